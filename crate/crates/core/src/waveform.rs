//! Transmit signal synthesis for sensing plus DAM data streams, and the exact
//! time-domain receiver used as the reference for every closed-form SINR.

use nalgebra::Complex;
use rand::Rng;

use crate::channel::{complex_gaussian, ArrayConfig, MultipathChannel};
use crate::error::{DamError, Result};
use crate::linalg::{cplx, czero, vstack, CMatrix, CVector};
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolKind {
    /// Sensing probe `s_d`.
    Probing,
    /// Data stream `s_{c,k}`.
    Data,
}

/// Unit-power symbol sequence indexed from 0; reads outside the stored range
/// return zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolStream<T: Real> {
    pub samples: Vec<Complex<T>>,
    pub kind: SymbolKind,
}

impl<T: Real> SymbolStream<T> {
    /// Unit-modulus QPSK, `(+-1 +- j)/sqrt(2)`.
    pub fn qpsk<R: Rng + ?Sized>(len: usize, kind: SymbolKind, rng: &mut R) -> Self {
        let a: T = lit(std::f64::consts::FRAC_1_SQRT_2);
        let samples = (0..len)
            .map(|_| {
                let re = if rng.gen::<bool>() { a } else { -a };
                let im = if rng.gen::<bool>() { a } else { -a };
                cplx(re, im)
            })
            .collect();
        Self { samples, kind }
    }

    /// Circularly symmetric Gaussian, unit variance.
    pub fn gaussian<R: Rng + ?Sized>(len: usize, kind: SymbolKind, rng: &mut R) -> Self {
        let samples = (0..len).map(|_| complex_gaussian(rng, 1.0)).collect();
        Self { samples, kind }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    #[inline]
    pub fn at(&self, n: i64) -> Complex<T> {
        if n < 0 || n as usize >= self.samples.len() {
            czero()
        } else {
            self.samples[n as usize]
        }
    }

    pub fn mean_power(&self) -> T {
        let s = self.samples.iter().fold(T::zero(), |a, z| a + z.norm_sqr());
        s / lit(self.samples.len().max(1) as f64)
    }
}

/// Shifted probing matrix `[s_d[n], ..., s_d[n + cols - 1]]` with
/// `s_d[n] = [s*[n], ..., s*[n - rows + 1]]^T`, taking `n = rows - 1` so the
/// stream needs `rows + cols - 1` samples.
pub fn probing_matrix<T: Real>(stream: &SymbolStream<T>, rows: usize, cols: usize) -> Result<CMatrix<T>> {
    if stream.len() < rows + cols - 1 {
        return Err(DamError::Dimension(format!(
            "probing matrix {rows}x{cols} needs {} symbols, got {}",
            rows + cols - 1,
            stream.len()
        )));
    }
    Ok(CMatrix::from_fn(rows, cols, |r, c| {
        stream.samples[rows - 1 + c - r].conj()
    }))
}

/// Discrete delay of the strongest path (largest `|beta|`), ties toward the
/// smaller delay.
pub fn strongest_path_reference<T: Real>(ch: &MultipathChannel<T>) -> usize {
    let mut best = &ch.paths()[0];
    for p in &ch.paths()[1..] {
        let (g, gb) = (p.gain.norm_sqr(), best.gain.norm_sqr());
        if g > gb || (g == gb && p.tap < best.tap) {
            best = p;
        }
    }
    best.tap
}

/// Sensing and per-path communication precoders together with the DAM
/// alignment delays.
///
/// `pre_delays[k][l] = references[k] - n_{c,kl}` is signed: paths arriving
/// after the strongest one need a symbol advance, which a block transmitter
/// realizes by reading ahead in its buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSet<T: Real> {
    pub sensing: CVector<T>,
    pub comm: Vec<Vec<CVector<T>>>,
    pub pre_delays: Vec<Vec<i64>>,
    pub references: Vec<usize>,
}

impl<T: Real> PrecoderSet<T> {
    pub fn new(
        sensing: CVector<T>,
        comm: Vec<Vec<CVector<T>>>,
        ues: &[MultipathChannel<T>],
    ) -> Result<Self> {
        if comm.len() != ues.len() {
            return Err(DamError::Dimension(format!(
                "{} precoder groups for {} UEs",
                comm.len(),
                ues.len()
            )));
        }
        let n = sensing.len();
        for (k, (fk, ch)) in comm.iter().zip(ues).enumerate() {
            if fk.len() != ch.num_paths() {
                return Err(DamError::Dimension(format!(
                    "UE {k}: {} precoders for {} paths",
                    fk.len(),
                    ch.num_paths()
                )));
            }
            if fk.iter().any(|f| f.len() != n) {
                return Err(DamError::Dimension(format!("UE {k}: precoder length != {n}")));
            }
        }
        let references: Vec<usize> = ues.iter().map(strongest_path_reference).collect();
        let pre_delays = ues
            .iter()
            .zip(&references)
            .map(|(ch, &r)| ch.paths().iter().map(|p| r as i64 - p.tap as i64).collect())
            .collect();
        Ok(Self {
            sensing,
            comm,
            pre_delays,
            references,
        })
    }

    /// All-zero precoders shaped for the given UE channels.
    pub fn zeros(num_antennas: usize, ues: &[MultipathChannel<T>]) -> Self {
        let comm = ues
            .iter()
            .map(|c| vec![CVector::zeros(num_antennas); c.num_paths()])
            .collect();
        Self::new(CVector::zeros(num_antennas), comm, ues).expect("shapes agree by construction")
    }

    pub fn num_antennas(&self) -> usize {
        self.sensing.len()
    }

    /// `f_bar_k = [f_k1; ...; f_kL]`
    pub fn stacked(&self, k: usize) -> CVector<T> {
        vstack(&self.comm[k])
    }

    /// Overwrites UE `k`'s precoders from a stacked vector.
    pub fn set_stacked(&mut self, k: usize, stacked: &CVector<T>) {
        let n = self.num_antennas();
        for (l, f) in self.comm[k].iter_mut().enumerate() {
            f.copy_from(&stacked.rows(l * n, n));
        }
    }

    pub fn ue_power(&self, k: usize) -> T {
        self.comm[k].iter().fold(T::zero(), |a, f| a + f.norm_squared())
    }

    pub fn sensing_power(&self) -> T {
        self.sensing.norm_squared()
    }

    pub fn total_power(&self) -> T {
        (0..self.comm.len()).fold(self.sensing_power(), |a, k| a + self.ue_power(k))
    }

    pub fn max_abs_pre_delay(&self) -> usize {
        self.pre_delays
            .iter()
            .flatten()
            .map(|d| d.unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
    }
}

/// `x[n] = f_s s_d[n] + sum_k sum_l f_kl s_k[n - kappa_kl]`, N x horizon.
pub fn synthesize_transmit<T: Real>(
    pre: &PrecoderSet<T>,
    probing: Option<&SymbolStream<T>>,
    data: &[Option<&SymbolStream<T>>],
    horizon: usize,
) -> CMatrix<T> {
    let n = pre.num_antennas();
    let mut x = CMatrix::zeros(n, horizon);
    if let Some(sd) = probing {
        for t in 0..horizon {
            let s = sd.at(t as i64);
            for (xi, fi) in x.column_mut(t).iter_mut().zip(pre.sensing.iter()) {
                *xi += fi * s;
            }
        }
    }
    for (k, stream) in data.iter().enumerate() {
        let Some(sk) = stream else { continue };
        for (f, &kappa) in pre.comm[k].iter().zip(&pre.pre_delays[k]) {
            for t in 0..horizon {
                let s = sk.at(t as i64 - kappa);
                for (xi, fi) in x.column_mut(t).iter_mut().zip(f.iter()) {
                    *xi += fi * s;
                }
            }
        }
    }
    x
}

/// `y[n] = sum_l h_l^H x[n - n_l] + w[n]`; with zero noise this is the exact
/// convolution and no randomness is drawn.
pub fn receive_oracle<T: Real, R: Rng + ?Sized>(
    ch: &MultipathChannel<T>,
    cfg: &ArrayConfig<T>,
    x: &CMatrix<T>,
    noise_var: f64,
    rng: &mut R,
) -> Vec<Complex<T>> {
    let horizon = x.ncols();
    let mut y = vec![czero::<T>(); horizon];
    for h in ch.spatial_vectors(cfg).iter().zip(ch.paths()) {
        let (hv, path) = h;
        let row = hv.adjoint() * x;
        for t in path.tap..horizon {
            y[t] += row[(0, t - path.tap)];
        }
    }
    if noise_var > 0.0 {
        for v in &mut y {
            *v += complex_gaussian(rng, noise_var);
        }
    }
    y
}
