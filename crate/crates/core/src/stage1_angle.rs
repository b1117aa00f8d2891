//! Stage-1 sensing: slot/subframe/frame probing, least-squares recovery of the
//! time-space channel and 2D-MUSIC over the space-time manifold.

use nalgebra::Complex;
use rand::Rng;

use crate::channel::{array_response, complex_gaussian, ArrayConfig, MultipathChannel, PathComponent};
use crate::error::{DamError, Result};
use crate::linalg::{cis, condition_number, hermitian_eigen_desc, vec_of, CMatrix, CVector};
use crate::scalar::{count, lit, to_f64, Real};
use crate::stage2_delay::pulse_at;
use crate::waveform::{probing_matrix, SymbolKind, SymbolStream};

/// Largest condition number accepted for `S_a` and `F_s`.
pub const MAX_CONDITION: f64 = 1e6;

/// Probing schedule of one sensing frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameConfig<T: Real> {
    /// `M`, slot length and FIR span.
    pub taps: usize,
    /// `Q`, subframes per frame.
    pub subframes: usize,
    /// `S_a`, M x M.
    pub probing: CMatrix<T>,
    /// `F_s`, N x N; one column per slot.
    pub precoders: CMatrix<T>,
}

impl<T: Real> FrameConfig<T> {
    pub fn new(taps: usize, subframes: usize, probing: CMatrix<T>, precoders: CMatrix<T>) -> Result<Self> {
        if probing.shape() != (taps, taps) {
            return Err(DamError::Dimension(format!("S_a must be {taps}x{taps}")));
        }
        if precoders.nrows() != precoders.ncols() || precoders.nrows() == 0 {
            return Err(DamError::Dimension("F_s must be square".into()));
        }
        if subframes == 0 {
            return Err(DamError::Config("a frame needs at least one subframe".into()));
        }
        for (name, m) in [("S_a", &probing), ("F_s", &precoders)] {
            let c = to_f64(condition_number(m));
            if !(c < MAX_CONDITION) {
                return Err(DamError::IllConditioned { name, condition: c });
            }
        }
        Ok(Self {
            taps,
            subframes,
            probing,
            precoders,
        })
    }

    /// QPSK Toeplitz `S_a` (redrawn while ill-conditioned) and a DFT `F_s`
    /// whose columns each carry `sensing_power`.
    pub fn generate<R: Rng + ?Sized>(
        num_antennas: usize,
        taps: usize,
        subframes: usize,
        sensing_power: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let precoders = dft_precoders(num_antennas, sensing_power);
        for _ in 0..100 {
            let s = SymbolStream::qpsk(2 * taps - 1, SymbolKind::Probing, rng);
            let sa = probing_matrix(&s, taps, taps)?;
            if to_f64(condition_number(&sa)) < MAX_CONDITION {
                return Self::new(taps, subframes, sa, precoders);
            }
        }
        Err(DamError::IllConditioned {
            name: "S_a",
            condition: f64::INFINITY,
        })
    }

    pub fn num_antennas(&self) -> usize {
        self.precoders.nrows()
    }

    /// Checks `M > max delay` and `Q >= L_s` for a sensing channel.
    pub fn check_channel(&self, ch: &MultipathChannel<T>) -> Result<()> {
        if ch.max_tap() >= self.taps {
            return Err(DamError::Config(format!(
                "slot length {} does not cover discrete delay {}",
                self.taps,
                ch.max_tap()
            )));
        }
        if self.subframes < ch.num_paths() {
            return Err(DamError::Config(format!(
                "{} subframes cannot resolve {} paths",
                self.subframes,
                ch.num_paths()
            )));
        }
        Ok(())
    }
}

/// Unimodular DFT matrix scaled so every column has power `power`.
pub fn dft_precoders<T: Real>(n: usize, power: f64) -> CMatrix<T> {
    let scale: T = lit((power / n as f64).sqrt());
    CMatrix::from_fn(n, n, |i, k| {
        let theta = -T::two_pi() * count::<T>(i * k % n) / count::<T>(n);
        cis(theta) * scale
    })
}

/// `h_s[m] = sum_l beta_l^* a^H(phi_l) f_s delta[m - n_l]`, m = 0..M-1.
pub fn fir_taps<T: Real>(ch: &MultipathChannel<T>, cfg: &ArrayConfig<T>, f_s: &CVector<T>, taps: usize) -> CVector<T> {
    let mut h = CVector::zeros(taps);
    for p in ch.paths() {
        if p.tap < taps {
            h[p.tap] += p.gain.conj() * array_response(p.angle, cfg).dotc(f_s);
        }
    }
    h
}

/// `H_s = A_s D_s G_s`, N x M.
pub fn time_space_matrix<T: Real>(ch: &MultipathChannel<T>, cfg: &ArrayConfig<T>, taps: usize) -> CMatrix<T> {
    time_space_from_paths(ch.paths(), cfg, taps)
}

fn time_space_from_paths<T: Real>(paths: &[PathComponent<T>], cfg: &ArrayConfig<T>, taps: usize) -> CMatrix<T> {
    let mut h = CMatrix::zeros(cfg.num_antennas, taps);
    for p in paths {
        if p.tap < taps {
            let col = array_response(p.angle, cfg) * p.gain;
            let mut c = h.column_mut(p.tap);
            c += col;
        }
    }
    h
}

/// `Y = S_a^H H_s^H F_s + W`, M x N.
pub fn simulate_subframe<T: Real, R: Rng + ?Sized>(
    ch: &MultipathChannel<T>,
    cfg: &ArrayConfig<T>,
    frame: &FrameConfig<T>,
    noise_var: f64,
    rng: &mut R,
) -> CMatrix<T> {
    observe(&time_space_matrix(ch, cfg, frame.taps), frame, noise_var, rng)
}

fn observe<T: Real, R: Rng + ?Sized>(hs: &CMatrix<T>, frame: &FrameConfig<T>, noise_var: f64, rng: &mut R) -> CMatrix<T> {
    let mut y = frame.probing.adjoint() * hs.adjoint() * &frame.precoders;
    if noise_var > 0.0 {
        for v in y.iter_mut() {
            *v += complex_gaussian(rng, noise_var);
        }
    }
    y
}

/// Mean per-entry power of the noiseless subframe observation.
pub fn subframe_signal_power<T: Real>(ch: &MultipathChannel<T>, cfg: &ArrayConfig<T>, frame: &FrameConfig<T>) -> f64 {
    let hs = time_space_matrix(ch, cfg, frame.taps);
    let y = frame.probing.adjoint() * hs.adjoint() * &frame.precoders;
    to_f64(y.norm_squared()) / y.len() as f64
}

/// `H_hat^H = S~_a Y F~_s`, with `S~_a = (S_a S_a^H)^-1 S_a` and
/// `F~_s = F_s^H (F_s F_s^H)^-1`.
pub fn ls_channel_estimate<T: Real>(y: &CMatrix<T>, frame: &FrameConfig<T>) -> Result<CMatrix<T>> {
    let sa = &frame.probing;
    let fs = &frame.precoders;
    let left = (sa * sa.adjoint())
        .lu()
        .solve(sa)
        .ok_or(DamError::IllConditioned {
            name: "S_a",
            condition: f64::INFINITY,
        })?;
    // F~ = F^H (F F^H)^-1  <=>  (F F^H) F~^H = F
    let right = (fs * fs.adjoint())
        .lu()
        .solve(fs)
        .ok_or(DamError::IllConditioned {
            name: "F_s",
            condition: f64::INFINITY,
        })?
        .adjoint();
    Ok(left * y * right)
}

/// `vec(H_hat)` from the recovered `H_hat^H`.
pub fn vectorize_estimate<T: Real>(hh: &CMatrix<T>) -> CVector<T> {
    vec_of(&hh.adjoint())
}

/// Runs `Q` subframes with independent per-subframe gains
/// `a_j = beta ∘ g_j`, `g_j ~ CN(0, I)`, and returns the vectorized LS
/// estimates.
pub fn simulate_frame<T: Real, R: Rng + ?Sized>(
    ch: &MultipathChannel<T>,
    cfg: &ArrayConfig<T>,
    frame: &FrameConfig<T>,
    noise_var: f64,
    rng: &mut R,
) -> Result<Vec<CVector<T>>> {
    frame.check_channel(ch)?;
    let mut out = Vec::with_capacity(frame.subframes);
    for _ in 0..frame.subframes {
        let paths: Vec<PathComponent<T>> = ch
            .paths()
            .iter()
            .map(|p| PathComponent {
                gain: p.gain * complex_gaussian::<T, R>(rng, 1.0),
                ..p.clone()
            })
            .collect();
        let hs = time_space_from_paths(&paths, cfg, frame.taps);
        let y = observe(&hs, frame, noise_var, rng);
        out.push(vectorize_estimate(&ls_channel_estimate(&y, frame)?));
    }
    Ok(out)
}

/// `R_Q = (1/Q) sum_j h_j h_j^H`
pub fn frame_covariance<T: Real>(estimates: &[CVector<T>]) -> Result<CMatrix<T>> {
    let first = estimates
        .first()
        .ok_or_else(|| DamError::Config("covariance needs at least one subframe".into()))?;
    let d = first.len();
    let mut r = CMatrix::zeros(d, d);
    for h in estimates {
        if h.len() != d {
            return Err(DamError::Dimension("subframe estimates differ in length".into()));
        }
        r.ger(Complex::from(T::one()), h, &h.conjugate(), Complex::from(T::one()));
    }
    Ok(r / Complex::from(count::<T>(estimates.len())))
}

/// Angle/delay grids for the space-time manifold `u(phi, tau) = p(tau) ⊗ a(phi)`.
#[derive(Debug, Clone)]
pub struct SpaceTimeManifold<T: Real> {
    pub array: ArrayConfig<T>,
    pub taps: usize,
    /// Angles (rad), ascending.
    pub angles: Vec<T>,
    /// Delays in taps, ascending.
    pub delays: Vec<T>,
}

impl<T: Real> SpaceTimeManifold<T> {
    /// 0.25 degree angle grid over the open half-plane and unit-tap delays.
    pub fn default_grid(array: ArrayConfig<T>, taps: usize) -> Self {
        let angles = (-359..=359).map(|i| lit::<T>((i as f64 * 0.25).to_radians())).collect();
        let delays = (0..taps).map(count).collect();
        Self {
            array,
            taps,
            angles,
            delays,
        }
    }

    pub fn steering(&self, angle: T) -> CVector<T> {
        array_response(angle, &self.array)
    }

    pub fn pulse(&self, delay_taps: T) -> CVector<T> {
        pulse_at(delay_taps, self.taps)
    }

    /// `p(tau) ⊗ a(phi)`, index `m N + n`.
    pub fn column(&self, angle: T, delay_taps: T) -> CVector<T> {
        let a = self.steering(angle);
        let p = self.pulse(delay_taps);
        let n = a.len();
        CVector::from_fn(self.taps * n, |i, _| p[i / n] * a[i % n])
    }

    /// `U = G_s^T ⋄ A_s` for the true paths.
    pub fn path_matrix(&self, ch: &MultipathChannel<T>) -> CMatrix<T> {
        let cols: Vec<CVector<T>> = ch
            .paths()
            .iter()
            .map(|p| self.column(p.angle, count(p.tap)))
            .collect();
        crate::linalg::hstack(self.taps * self.array.num_antennas, &cols)
    }
}

/// One 2D-MUSIC peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathEstimate<T: Real> {
    pub angle: T,
    pub delay_taps: T,
    /// Pseudo-spectrum `||u||^2 / ||E_n^H u||^2` at the grid peak.
    pub spectrum: T,
}

/// Minimum ratio between the L-th and (L+1)-th covariance eigenvalues.
const MIN_EIGEN_GAP: f64 = 1.5;
/// Minimum pseudo-spectrum of an accepted peak (half of `u` in the signal subspace).
const MIN_PEAK: f64 = 2.0;
/// Half-width, in cells, of the suppression window around accepted peaks.
const SUPPRESS: usize = 2;

/// 2D-MUSIC: the `num_paths` strongest separated local maxima of
/// `1 / ||E_n^H u||^2` over the manifold grid, refined by one parabolic step
/// per axis.
pub fn music_estimate<T: Real>(
    r: &CMatrix<T>,
    num_paths: usize,
    manifold: &SpaceTimeManifold<T>,
) -> Result<Vec<PathEstimate<T>>> {
    let n = manifold.array.num_antennas;
    let dim = n * manifold.taps;
    if r.shape() != (dim, dim) {
        return Err(DamError::Dimension(format!("covariance must be {dim}x{dim}")));
    }
    if num_paths == 0 || num_paths >= dim {
        return Err(DamError::Config(format!("cannot estimate {num_paths} paths in dimension {dim}")));
    }
    let fail = |found: Vec<(f64, f64)>| DamError::EstimationFailure {
        wanted: num_paths,
        found,
    };
    let (vals, vecs) = hermitian_eigen_desc(r);
    let (sig, noise) = (to_f64(vals[num_paths - 1]), to_f64(vals[num_paths]).max(0.0));
    if !(sig > 0.0) || sig < MIN_EIGEN_GAP * noise {
        return Err(fail(Vec::new()));
    }
    let es = vecs.columns(0, num_paths).into_owned();

    // W_d = sum_m p_d[m] E_m^H, so E_s^H u(phi, d) = W_d a(phi).
    let steer: Vec<CVector<T>> = manifold.angles.iter().map(|&a| manifold.steering(a)).collect();
    let (na, nd) = (manifold.angles.len(), manifold.delays.len());
    let mut spec = vec![0f64; na * nd];
    for (di, &d) in manifold.delays.iter().enumerate() {
        let p = manifold.pulse(d);
        let pn = to_f64(p.norm_squared());
        let mut w = CMatrix::<T>::zeros(num_paths, n);
        for (m, pm) in p.iter().enumerate() {
            if pm.norm_sqr() > T::zero() {
                w += es.rows(m * n, n).adjoint() * *pm;
            }
        }
        for (ai, a) in steer.iter().enumerate() {
            let inside = to_f64((&w * a).norm_squared());
            let resid = (pn - inside).max(pn * 1e-30);
            spec[ai * nd + di] = pn / resid;
        }
    }

    let at = |ai: usize, di: usize| spec[ai * nd + di];
    let mut candidates = Vec::new();
    for ai in 0..na {
        for di in 0..nd {
            let v = at(ai, di);
            let mut is_max = true;
            'nb: for dai in -1i64..=1 {
                for ddi in -1i64..=1 {
                    if dai == 0 && ddi == 0 {
                        continue;
                    }
                    let (x, y) = (ai as i64 + dai, di as i64 + ddi);
                    if x < 0 || y < 0 || x >= na as i64 || y >= nd as i64 {
                        continue;
                    }
                    if at(x as usize, y as usize) >= v {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max && v >= MIN_PEAK {
                candidates.push((v, ai, di));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    let mut accepted: Vec<(f64, usize, usize)> = Vec::new();
    for c in candidates {
        let clear = accepted
            .iter()
            .all(|a| a.1.abs_diff(c.1) > SUPPRESS || a.2.abs_diff(c.2) > SUPPRESS);
        if clear {
            accepted.push(c);
            if accepted.len() == num_paths {
                break;
            }
        }
    }

    let refine = |vals: [Option<f64>; 3]| -> f64 {
        match vals {
            [Some(l), Some(c), Some(r)] if c < 1e10 => {
                let (l, c, r) = (l.ln(), c.ln(), r.ln());
                let den = l - 2.0 * c + r;
                if den < 0.0 {
                    (0.5 * (l - r) / den).clamp(-0.5, 0.5)
                } else {
                    0.0
                }
            }
            _ => 0.0,
        }
    };
    let grid_at = |grid: &[T], i: usize, frac: f64| -> T {
        if frac == 0.0 {
            return grid[i];
        }
        let j = if frac > 0.0 { i + 1 } else { i - 1 };
        grid[i] + (grid[j] - grid[i]) * lit::<T>(frac.abs())
    };
    let out: Vec<PathEstimate<T>> = accepted
        .iter()
        .map(|&(v, ai, di)| {
            let ga = |x: i64| (x >= 0 && x < na as i64).then(|| at(x as usize, di));
            let gd = |y: i64| (y >= 0 && y < nd as i64).then(|| at(ai, y as usize));
            let fa = refine([ga(ai as i64 - 1), Some(v), ga(ai as i64 + 1)]);
            let fd = refine([gd(di as i64 - 1), Some(v), gd(di as i64 + 1)]);
            PathEstimate {
                angle: grid_at(&manifold.angles, ai, fa),
                delay_taps: grid_at(&manifold.delays, di, fd),
                spectrum: lit(v),
            }
        })
        .collect();
    if out.len() < num_paths {
        return Err(fail(
            out.iter().map(|e| (to_f64(e.angle), to_f64(e.delay_taps))).collect(),
        ));
    }
    Ok(out)
}
