//! Delay refinement of the line-of-sight echo: sinc-sampled pulse model, the
//! sensing ZF projector, the ML amplitude/delay estimator and the delay CRB.

use nalgebra::Complex;
use rand::Rng;

use crate::channel::complex_gaussian;
use crate::error::{DamError, Result};
use crate::linalg::{complement_projector, hstack, CMatrix, CVector, OrthProjector};
use crate::scalar::{lit, sinc, sinc_derivative, to_f64, Real};

/// Sinc-sampled delay pulse `[p(tau)]_k = sinc(k + B (eta - tau))`, k = 0..M-1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseVector<T: Real> {
    /// `tau` (s).
    pub delay: T,
    /// `eta` (s).
    pub reference: T,
    pub taps: usize,
    pub bandwidth: T,
}

impl<T: Real> PulseVector<T> {
    pub fn new(delay: T, reference: T, taps: usize, bandwidth: T) -> Self {
        Self {
            delay,
            reference,
            taps,
            bandwidth,
        }
    }

    /// `B (tau - eta)`, the delay in taps.
    pub fn offset(&self) -> T {
        self.bandwidth * (self.delay - self.reference)
    }

    pub fn values(&self) -> CVector<T> {
        pulse_at(self.offset(), self.taps)
    }

    /// `dp/dtau` (1/s).
    pub fn derivative(&self) -> CVector<T> {
        pulse_derivative_at(self.offset(), self.taps) * Complex::from(self.bandwidth)
    }
}

/// `p` as a function of the tap offset `x = B (tau - eta)`.
pub fn pulse_at<T: Real>(offset: T, taps: usize) -> CVector<T> {
    CVector::from_fn(taps, |k, _| {
        Complex::from(sinc(lit::<T>(k as f64) - offset))
    })
}

/// `dp/dx` with `x` the tap offset; `dp/dtau = B dp/dx`.
pub fn pulse_derivative_at<T: Real>(offset: T, taps: usize) -> CVector<T> {
    CVector::from_fn(taps, |k, _| {
        Complex::from(-sinc_derivative(lit::<T>(k as f64) - offset))
    })
}

/// `Q_s = I - H_{s,1} (H_{s,1}^H H_{s,1})^-1 H_{s,1}^H`, computed from an
/// orthonormal basis of the NLoS columns. Rank-deficient columns degrade to
/// the pseudo-inverse projector and set `degraded`.
pub fn zf_sensing_projector<T: Real>(n: usize, nlos: &[CVector<T>]) -> Result<OrthProjector<T>> {
    if nlos.len() >= n {
        return Err(DamError::InfeasibleZeroForcing {
            columns: nlos.len(),
            antennas: n,
            deficit: nlos.len() + 1 - n,
        });
    }
    Ok(complement_projector(n, &hstack(n, nlos)))
}

/// Stage-2 echo model `y = S_d^H p(tau) beta a^H(phi) f_s + z`.
#[derive(Debug, Clone)]
pub struct EchoModel<T: Real> {
    /// `S_d`, M x M2.
    pub probing: CMatrix<T>,
    /// `a(phi_1)`.
    pub steering: CVector<T>,
    /// `f_s`.
    pub precoder: CVector<T>,
    pub bandwidth: T,
    /// `eta_s` (s).
    pub reference: T,
}

impl<T: Real> EchoModel<T> {
    pub fn new(
        probing: CMatrix<T>,
        steering: CVector<T>,
        precoder: CVector<T>,
        bandwidth: T,
        reference: T,
    ) -> Result<Self> {
        if steering.len() != precoder.len() {
            return Err(DamError::Dimension(format!(
                "steering length {} vs precoder length {}",
                steering.len(),
                precoder.len()
            )));
        }
        Ok(Self {
            probing,
            steering,
            precoder,
            bandwidth,
            reference,
        })
    }

    pub fn taps(&self) -> usize {
        self.probing.nrows()
    }

    pub fn snapshots(&self) -> usize {
        self.probing.ncols()
    }

    /// `a^H(phi_1) f_s`
    pub fn illumination(&self) -> Complex<T> {
        self.steering.dotc(&self.precoder)
    }

    /// Seconds to tap offset.
    pub fn offset_of(&self, delay: T) -> T {
        self.bandwidth * (delay - self.reference)
    }

    pub fn delay_of(&self, offset: T) -> T {
        self.reference + offset / self.bandwidth
    }

    fn xi_at_offset(&self, offset: T) -> CVector<T> {
        self.probing.adjoint() * pulse_at(offset, self.taps()) * self.illumination()
    }

    /// `xi(tau) = S_d^H p(tau) a^H(phi_1) f_s`
    pub fn xi(&self, delay: T) -> CVector<T> {
        self.xi_at_offset(self.offset_of(delay))
    }

    /// Noisy observation for a true delay and amplitude.
    pub fn simulate<R: Rng + ?Sized>(&self, delay: T, amplitude: Complex<T>, noise_var: f64, rng: &mut R) -> CVector<T> {
        let mut y = self.xi(delay) * amplitude;
        if noise_var > 0.0 {
            for v in y.iter_mut() {
                *v += complex_gaussian(rng, noise_var);
            }
        }
        y
    }

    fn objective_at_offset(&self, offset: T, y: &CVector<T>) -> Result<T> {
        let xi = self.xi_at_offset(offset);
        let e = xi.norm_squared();
        if !(e > T::zero()) {
            return Err(DamError::DegenerateSensing(
                "xi vanishes: the sensing precoder does not illuminate the line-of-sight direction".into(),
            ));
        }
        Ok(xi.dotc(y).norm_sqr() / e)
    }
}

/// `J(tau) = |xi^H y|^2 / ||xi||^2`
pub fn ml_objective<T: Real>(model: &EchoModel<T>, delay: T, y: &CVector<T>) -> Result<T> {
    model.objective_at_offset(model.offset_of(delay), y)
}

/// `beta_hat = xi^H y / ||xi||^2`
pub fn ml_amplitude<T: Real>(model: &EchoModel<T>, delay: T, y: &CVector<T>) -> Result<Complex<T>> {
    let xi = model.xi(delay);
    let e = xi.norm_squared();
    if !(e > T::zero()) {
        return Err(DamError::DegenerateSensing(
            "xi vanishes: the sensing precoder does not illuminate the line-of-sight direction".into(),
        ));
    }
    Ok(xi.dotc(y) / Complex::from(e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayEstimate<T: Real> {
    /// `tau_hat` (s).
    pub delay: T,
    pub amplitude: Complex<T>,
    pub objective: T,
    pub iterations: usize,
    /// False when `max_iters` ran out; the best iterate is still returned.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AscentOptions {
    pub max_iters: usize,
    /// Step tolerance in taps (`|dtau| < tol * T`).
    pub step_tol: f64,
    /// Central-difference step in taps.
    pub fd_step: f64,
}

impl Default for AscentOptions {
    fn default() -> Self {
        Self {
            max_iters: 100,
            step_tol: 1e-4,
            fd_step: 1e-4,
        }
    }
}

/// Gradient ascent on `J` with a Newton-scaled step, Armijo backtracking and
/// the iterate confined to `bracket` (seconds).
pub fn estimate_delay<T: Real>(
    model: &EchoModel<T>,
    y: &CVector<T>,
    bracket: (T, T),
    init: T,
    opts: &AscentOptions,
) -> Result<DelayEstimate<T>> {
    let lo = to_f64(model.offset_of(bracket.0));
    let hi = to_f64(model.offset_of(bracket.1));
    if !(lo < hi) {
        return Err(DamError::Config("empty delay bracket".into()));
    }
    let j = |x: f64| -> Result<f64> { Ok(to_f64(model.objective_at_offset(lit(x), y)?)) };
    let h = opts.fd_step;
    let mut x = to_f64(model.offset_of(init)).clamp(lo, hi);
    let mut jx = j(x)?;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iters {
        iterations += 1;
        let (jp, jm) = (j(x + h)?, j(x - h)?);
        let g = (jp - jm) / (2.0 * h);
        let curv = (jp - 2.0 * jx + jm) / (h * h);
        let mut dir = if curv < 0.0 { -g / curv } else { 0.25 * g.signum() };
        // never leave the bracket and never jump more than a tap at once
        dir = dir.clamp(-1.0, 1.0);
        if !(dir.abs() > 0.0) {
            converged = true;
            break;
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let xn = (x + alpha * dir).clamp(lo, hi);
            let jn = j(xn)?;
            if jn >= jx + 1e-4 * g * (xn - x) {
                accepted = Some((xn, jn));
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((xn, jn)) => {
                let step = (xn - x).abs();
                if jn >= jx {
                    x = xn;
                    jx = jn;
                }
                if step < opts.step_tol {
                    converged = true;
                    break;
                }
            }
            None => {
                converged = true;
                break;
            }
        }
    }
    if !converged {
        log::warn!("delay ascent stopped after {} iterations without meeting the step tolerance", opts.max_iters);
    }
    let delay = model.delay_of(lit(x));
    Ok(DelayEstimate {
        delay,
        amplitude: ml_amplitude(model, delay, y)?,
        objective: lit(jx),
        iterations,
        converged,
    })
}

/// `G = p~^H R_J p~ - |p~^H R_J p|^2 / (p^H R_J p)` with `R_J = S_d S_d^H`
/// and `p~ = dp/dtau`.
pub fn delay_information<T: Real>(model: &EchoModel<T>, delay: T) -> Result<T> {
    let pulse = PulseVector::new(delay, model.reference, model.taps(), model.bandwidth);
    let u = model.probing.adjoint() * pulse.derivative();
    let v = model.probing.adjoint() * pulse.values();
    let vv = v.norm_squared();
    if !(vv > T::zero()) {
        return Err(DamError::DegenerateSensing(
            "pulse lies in the null space of the probing correlation".into(),
        ));
    }
    let g = u.norm_squared() - v.dotc(&u).norm_sqr() / vv;
    if !(g > T::zero()) {
        return Err(DamError::DegenerateSensing(format!(
            "delay information G = {:e} is not positive",
            to_f64(g)
        )));
    }
    Ok(g)
}

/// `CRB(tau_1) = 1 / (|beta|^2 zeta G)`, `zeta = 2 |a^H f_s|^2 / sigma_a^2` (s^2).
pub fn crb_delay<T: Real>(model: &EchoModel<T>, delay: T, amplitude: Complex<T>, noise_var: T) -> Result<T> {
    let zeta = lit::<T>(2.0) * model.illumination().norm_sqr() / noise_var;
    if !(zeta > T::zero()) {
        return Err(DamError::DegenerateSensing(
            "no line-of-sight illumination: the CRB is infinite".into(),
        ));
    }
    let b2 = amplitude.norm_sqr();
    if !(b2 > T::zero()) {
        return Err(DamError::DegenerateSensing("zero echo amplitude: the CRB is infinite".into()));
    }
    Ok(T::one() / (b2 * zeta * delay_information(model, delay)?))
}
