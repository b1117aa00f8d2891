//! Array geometry, path-loss model and multipath channel synthesis for the
//! sensing, user and eavesdropper links.

use nalgebra::Complex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{DamError, Result};
use crate::linalg::{cis, hstack, CMatrix, CVector};
use crate::scalar::{count, lit, to_f64, Real};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Reference distance `d0` of the path-loss model (m).
pub const REFERENCE_DISTANCE: f64 = 1.0;
/// Path loss at the reference distance, LoS (dB).
pub const LOS_LOSS_AT_REFERENCE_DB: f64 = 61.4;
/// Path loss at the reference distance, NLoS (dB).
pub const NLOS_LOSS_AT_REFERENCE_DB: f64 = 72.0;
pub const LOS_EXPONENT: f64 = 2.0;
pub const NLOS_EXPONENT: f64 = 2.92;
/// Minimum `|sin phi_i - sin phi_j|` between generated paths of one link.
/// Fixed rather than tied to N so that draws do not depend on the array size.
pub const MIN_SIN_SEPARATION: f64 = 0.07;

/// Uniform linear array and sampling parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayConfig<T: Real> {
    pub num_antennas: usize,
    /// Inter-element spacing (m).
    pub element_spacing: T,
    /// Carrier wavelength (m).
    pub wavelength: T,
    /// System bandwidth (Hz).
    pub bandwidth: T,
}

impl<T: Real> ArrayConfig<T> {
    pub fn new(num_antennas: usize, element_spacing: T, wavelength: T, bandwidth: T) -> Result<Self> {
        if num_antennas == 0 {
            return Err(DamError::Config("array needs at least one antenna".into()));
        }
        if element_spacing <= T::zero() || wavelength <= T::zero() || bandwidth <= T::zero() {
            return Err(DamError::Config(
                "spacing, wavelength and bandwidth must be positive".into(),
            ));
        }
        Ok(Self {
            num_antennas,
            element_spacing,
            wavelength,
            bandwidth,
        })
    }

    /// Half-wavelength ULA at the given carrier.
    pub fn half_wavelength(num_antennas: usize, carrier_hz: f64, bandwidth_hz: f64) -> Result<Self> {
        if carrier_hz <= 0.0 {
            return Err(DamError::Config("carrier frequency must be positive".into()));
        }
        let lambda = SPEED_OF_LIGHT / carrier_hz;
        Self::new(num_antennas, lit(lambda / 2.0), lit(lambda), lit(bandwidth_hz))
    }

    /// Sampling period `T = 1/B`.
    pub fn sample_period(&self) -> T {
        T::one() / self.bandwidth
    }

    /// Same array with a different element count.
    pub fn with_antennas(&self, num_antennas: usize) -> Self {
        Self {
            num_antennas,
            ..self.clone()
        }
    }
}

/// ULA steering vector with unit Euclidean norm.
pub fn array_response<T: Real>(angle: T, cfg: &ArrayConfig<T>) -> CVector<T> {
    let n = cfg.num_antennas;
    let scale = T::one() / count::<T>(n).sqrt();
    let step = T::two_pi() * cfg.element_spacing * angle.sin() / cfg.wavelength;
    CVector::from_fn(n, |m, _| cis(step * count::<T>(m)) * scale)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathKind {
    LineOfSight,
    NonLineOfSight,
}

/// Large-scale gain `K_u (d/d0)^(-eps_u)`.
pub fn large_scale_gain(distance: f64, kind: PathKind) -> Result<f64> {
    if !(distance >= REFERENCE_DISTANCE) {
        return Err(DamError::BelowReferenceDistance {
            distance,
            reference: REFERENCE_DISTANCE,
        });
    }
    let (loss_db, eps) = match kind {
        PathKind::LineOfSight => (LOS_LOSS_AT_REFERENCE_DB, LOS_EXPONENT),
        PathKind::NonLineOfSight => (NLOS_LOSS_AT_REFERENCE_DB, NLOS_EXPONENT),
    };
    let k = 10f64.powf(-loss_db / 10.0);
    Ok(k * (distance / REFERENCE_DISTANCE).powf(-eps))
}

/// One resolvable propagation path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathComponent<T: Real> {
    /// Complex coefficient `beta = sqrt(N/L) alpha`.
    pub gain: Complex<T>,
    /// Azimuth (rad), in `(-pi/2, pi/2)`.
    pub angle: T,
    /// Continuous propagation delay (s).
    pub delay: T,
    /// Discrete delay in taps relative to the link's timing reference.
    pub tap: usize,
    pub kind: PathKind,
}

/// `beta a(phi)`
pub fn spatial_vector<T: Real>(path: &PathComponent<T>, cfg: &ArrayConfig<T>) -> CVector<T> {
    array_response(path.angle, cfg) * path.gain
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkRole {
    Sensing,
    Ue(usize),
    Eve,
}

/// Resolvable paths of one link plus its timing reference.
#[derive(Debug, Clone, PartialEq)]
pub struct MultipathChannel<T: Real> {
    paths: Vec<PathComponent<T>>,
    timing_reference: T,
    role: LinkRole,
}

impl<T: Real> MultipathChannel<T> {
    pub fn new(role: LinkRole, paths: Vec<PathComponent<T>>, timing_reference: T) -> Result<Self> {
        if paths.is_empty() {
            return Err(DamError::Config("a channel needs at least one path".into()));
        }
        let half_pi = T::frac_pi_2();
        if let Some(p) = paths.iter().find(|p| !(p.angle.abs() < half_pi)) {
            return Err(DamError::DegenerateGeometry(format!(
                "path angle {} rad outside (-pi/2, pi/2)",
                to_f64(p.angle)
            )));
        }
        if paths.iter().map(|p| p.tap).min() != Some(0) {
            return Err(DamError::Config(
                "earliest path must sit at discrete delay 0".into(),
            ));
        }
        Ok(Self {
            paths,
            timing_reference,
            role,
        })
    }

    /// Builds a channel from continuous delays; the timing reference is the
    /// earliest arrival and taps are `round(B (tau - eta))`.
    pub fn from_delays(
        role: LinkRole,
        raw: Vec<(Complex<T>, T, T, PathKind)>,
        bandwidth: T,
    ) -> Result<Self> {
        let eta = raw
            .iter()
            .map(|r| r.2)
            .fold(None, |m: Option<T>, d| Some(m.map_or(d, |m| if d < m { d } else { m })))
            .ok_or_else(|| DamError::Config("a channel needs at least one path".into()))?;
        let paths = raw
            .into_iter()
            .map(|(gain, angle, delay, kind)| PathComponent {
                gain,
                angle,
                delay,
                tap: to_f64(bandwidth * (delay - eta)).round() as usize,
                kind,
            })
            .collect();
        Self::new(role, paths, eta)
    }

    /// Builds a channel directly in the discrete model: delays are `tap / B`
    /// with zero timing reference.
    pub fn from_taps(
        role: LinkRole,
        raw: Vec<(Complex<T>, T, usize, PathKind)>,
        bandwidth: T,
    ) -> Result<Self> {
        let paths = raw
            .into_iter()
            .map(|(gain, angle, tap, kind)| PathComponent {
                gain,
                angle,
                delay: count::<T>(tap) / bandwidth,
                tap,
                kind,
            })
            .collect();
        Self::new(role, paths, T::zero())
    }

    /// Random discrete-model channel for oracle checks: distinct taps in
    /// `0..=max_tap` (one of them 0), angles uniform in +-60 degrees and
    /// standard complex Gaussian gains. The first path is marked LoS.
    pub fn random<R: Rng + ?Sized>(
        role: LinkRole,
        num_paths: usize,
        max_tap: usize,
        cfg: &ArrayConfig<T>,
        rng: &mut R,
    ) -> Result<Self> {
        if num_paths == 0 || num_paths > max_tap + 1 {
            return Err(DamError::Config(format!(
                "cannot place {num_paths} distinct taps in 0..={max_tap}"
            )));
        }
        let mut taps = vec![0usize];
        while taps.len() < num_paths {
            let t = rng.gen_range(1..=max_tap);
            if !taps.contains(&t) {
                taps.push(t);
            }
        }
        let raw = taps
            .into_iter()
            .enumerate()
            .map(|(i, tap)| {
                let angle = lit::<T>(rng.gen_range(-60.0f64..60.0).to_radians());
                let kind = if i == 0 {
                    PathKind::LineOfSight
                } else {
                    PathKind::NonLineOfSight
                };
                (complex_gaussian(rng, 1.0), angle, tap, kind)
            })
            .collect();
        Self::from_taps(role, raw, cfg.bandwidth)
    }

    pub fn paths(&self) -> &[PathComponent<T>] {
        &self.paths
    }

    pub fn num_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn timing_reference(&self) -> T {
        self.timing_reference
    }

    pub fn role(&self) -> LinkRole {
        self.role
    }

    pub fn taps(&self) -> Vec<usize> {
        self.paths.iter().map(|p| p.tap).collect()
    }

    pub fn min_tap(&self) -> usize {
        self.paths.iter().map(|p| p.tap).min().unwrap_or(0)
    }

    pub fn max_tap(&self) -> usize {
        self.paths.iter().map(|p| p.tap).max().unwrap_or(0)
    }

    /// Index of the (first) line-of-sight path.
    pub fn los_index(&self) -> Option<usize> {
        self.paths.iter().position(|p| p.kind == PathKind::LineOfSight)
    }

    pub fn spatial_vectors(&self, cfg: &ArrayConfig<T>) -> Vec<CVector<T>> {
        self.paths.iter().map(|p| spatial_vector(p, cfg)).collect()
    }

    /// `[h_1, ..., h_L]`, N x L.
    pub fn channel_matrix(&self, cfg: &ArrayConfig<T>) -> CMatrix<T> {
        hstack(cfg.num_antennas, &self.spatial_vectors(cfg))
    }

    /// Rejects two paths landing on the same discrete delay.
    pub fn check_resolvable(&self) -> Result<()> {
        for i in 0..self.paths.len() {
            for j in i + 1..self.paths.len() {
                if self.paths[i].tap == self.paths[j].tap {
                    return Err(DamError::UnresolvablePaths {
                        first: i,
                        second: j,
                        tap: self.paths[i].tap,
                    });
                }
            }
        }
        Ok(())
    }

    /// Same geometry seen by a different array size, `beta` rescaled by
    /// `sqrt(N_new / N_old)`.
    pub fn rescaled_for_antennas(&self, old_n: usize, new_n: usize) -> Self {
        let s = (count::<T>(new_n) / count::<T>(old_n)).sqrt();
        let mut out = self.clone();
        for p in &mut out.paths {
            p.gain *= s;
        }
        out
    }
}

/// Draws `CN(0, variance)`.
pub fn complex_gaussian<T: Real, R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex<T> {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex::new(lit(re * s), lit(im * s))
}

fn default_spacing() -> f64 {
    0.5
}
fn default_inner() -> f64 {
    3.0
}
fn default_outer() -> f64 {
    12.0
}
fn default_max_tap() -> usize {
    24
}

/// Noise variances (W) of the four receivers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseVariances {
    /// Stage-1 echo receiver, `sigma_d^2`.
    pub stage1: f64,
    /// Stage-2 echo receiver, `sigma_a^2`.
    pub stage2: f64,
    /// Every UE, `sigma_k^2`.
    pub ue: f64,
    /// Eavesdropper, `sigma_e^2`.
    pub eve: f64,
}

impl NoiseVariances {
    pub fn uniform(var: f64) -> Self {
        Self {
            stage1: var,
            stage2: var,
            ue: var,
            eve: var,
        }
    }
}

/// Scenario description: array, node placement, path counts and budgets.
///
/// Node positions are 2-D points (m) with the BS at the origin and the ULA
/// along the y-axis, so a node at `(x, y)` with `x > 0` is seen at
/// `atan2(y, x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub num_antennas: usize,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    #[serde(default = "default_spacing")]
    pub element_spacing_wavelengths: f64,
    pub target: [f64; 2],
    pub ues: Vec<[f64; 2]>,
    pub eve: [f64; 2],
    pub sensing_paths: usize,
    pub ue_paths: usize,
    pub eve_paths: usize,
    /// Scatterers are drawn uniformly in an annulus around the midpoint of the
    /// BS-node segment.
    #[serde(default = "default_inner")]
    pub scatter_inner_m: f64,
    #[serde(default = "default_outer")]
    pub scatter_outer_m: f64,
    /// Largest admissible discrete delay of any path.
    #[serde(default = "default_max_tap")]
    pub max_tap: usize,
    /// Left at zero when an experiment derives it from a thermal model.
    #[serde(default)]
    pub noise: NoiseVariances,
    pub total_power_w: f64,
    pub coherence_symbols: usize,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn num_ues(&self) -> usize {
        self.ues.len()
    }

    pub fn array<T: Real>(&self) -> Result<ArrayConfig<T>> {
        let lambda = SPEED_OF_LIGHT / self.carrier_hz;
        ArrayConfig::new(
            self.num_antennas,
            lit(lambda * self.element_spacing_wavelengths),
            lit(lambda),
            lit(self.bandwidth_hz),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(DamError::Config(m.to_string()));
        if self.ues.is_empty() {
            return bad("at least one UE is required");
        }
        if self.sensing_paths == 0 || self.ue_paths == 0 || self.eve_paths == 0 {
            return bad("every link needs at least one path");
        }
        let n = self.noise;
        if !(n.stage1 > 0.0 && n.stage2 > 0.0 && n.ue > 0.0 && n.eve > 0.0) {
            return bad("noise variances must be positive");
        }
        if !(self.total_power_w > 0.0) {
            return bad("total power must be positive");
        }
        if self.coherence_symbols <= 2 * self.max_tap {
            return bad("coherence block must exceed twice the largest discrete delay");
        }
        if !(self.scatter_outer_m > self.scatter_inner_m && self.scatter_inner_m >= 0.0) {
            return bad("scatter annulus radii must satisfy 0 <= inner < outer");
        }
        if !(self.element_spacing_wavelengths > 0.0) {
            return bad("element spacing must be positive");
        }
        Ok(())
    }
}

/// Channels of every link in one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet<T: Real> {
    pub sensing: MultipathChannel<T>,
    pub ues: Vec<MultipathChannel<T>>,
    pub eve: MultipathChannel<T>,
}

impl<T: Real> ChannelSet<T> {
    pub fn num_ues(&self) -> usize {
        self.ues.len()
    }

    /// Largest discrete delay across the UE links, `n_{B,max}`.
    pub fn max_ue_tap(&self) -> usize {
        self.ues.iter().map(|c| c.max_tap()).max().unwrap_or(0)
    }

    pub fn rescaled_for_antennas(&self, old_n: usize, new_n: usize) -> Self {
        Self {
            sensing: self.sensing.rescaled_for_antennas(old_n, new_n),
            ues: self
                .ues
                .iter()
                .map(|c| c.rescaled_for_antennas(old_n, new_n))
                .collect(),
            eve: self.eve.rescaled_for_antennas(old_n, new_n),
        }
    }
}

#[derive(Clone, Copy)]
enum Geometry {
    /// BS -> node -> BS; scatter paths are BS -> scatterer -> BS echoes.
    RoundTrip,
    /// BS -> node; scatter paths are BS -> scatterer -> node.
    OneWay,
}

fn norm2(p: [f64; 2]) -> f64 {
    (p[0] * p[0] + p[1] * p[1]).sqrt()
}

fn draw_link<T: Real, R: Rng + ?Sized>(
    role: LinkRole,
    node: [f64; 2],
    num_paths: usize,
    geometry: Geometry,
    scenario: &ScenarioConfig,
    rng: &mut R,
) -> Result<MultipathChannel<T>> {
    let r = norm2(node);
    if r < REFERENCE_DISTANCE || node[0] <= 0.0 {
        return Err(DamError::DegenerateGeometry(format!(
            "node at ({}, {}) must lie in front of the array, at least {} m away",
            node[0], node[1], REFERENCE_DISTANCE
        )));
    }
    let b = scenario.bandwidth_hz;
    let los_angle = node[1].atan2(node[0]);
    if los_angle.abs() >= 80f64.to_radians() {
        return Err(DamError::DegenerateGeometry(format!(
            "node at ({}, {}) sits near array endfire",
            node[0], node[1]
        )));
    }
    let los_dist = match geometry {
        Geometry::RoundTrip => 2.0 * r,
        Geometry::OneWay => r,
    };
    // (distance, angle, kind)
    let mut geo = vec![(los_dist, los_angle, PathKind::LineOfSight)];
    let tap_of = |d: f64, d0: f64| ((d - d0) / SPEED_OF_LIGHT * b).round() as i64;
    let mid = [node[0] / 2.0, node[1] / 2.0];
    let (r_in, r_out) = (scenario.scatter_inner_m, scenario.scatter_outer_m);
    let mut tries = 0usize;
    while geo.len() < num_paths {
        tries += 1;
        if tries > 20_000 {
            return Err(DamError::DegenerateGeometry(format!(
                "could not place {num_paths} resolvable paths for {role:?}"
            )));
        }
        let rad = (rng.gen_range(r_in * r_in..r_out * r_out)).sqrt();
        let th = rng.gen_range(0.0..std::f64::consts::TAU);
        let s = [mid[0] + rad * th.cos(), mid[1] + rad * th.sin()];
        let ds = norm2(s);
        if s[0] <= 1.0 || ds < REFERENCE_DISTANCE {
            continue;
        }
        let angle = s[1].atan2(s[0]);
        if angle.abs() >= 80f64.to_radians() {
            continue;
        }
        let dist = match geometry {
            Geometry::RoundTrip => 2.0 * ds,
            Geometry::OneWay => ds + norm2([s[0] - node[0], s[1] - node[1]]),
        };
        let candidate: Vec<f64> = geo.iter().map(|g| g.0).chain([dist]).collect();
        let d0 = candidate.iter().cloned().fold(f64::INFINITY, f64::min);
        let taps: Vec<i64> = candidate.iter().map(|&d| tap_of(d, d0)).collect();
        let distinct = (0..taps.len()).all(|i| (i + 1..taps.len()).all(|j| taps[i] != taps[j]));
        let in_range = taps.iter().all(|&t| t <= scenario.max_tap as i64);
        let separated = geo
            .iter()
            .all(|g| (g.1.sin() - angle.sin()).abs() > MIN_SIN_SEPARATION);
        if distinct && in_range && separated {
            geo.push((dist, angle, PathKind::NonLineOfSight));
        }
    }
    let l = num_paths as f64;
    let n = scenario.num_antennas as f64;
    let mut raw = Vec::with_capacity(num_paths);
    for &(dist, angle, kind) in &geo {
        let var = large_scale_gain(dist, kind)?;
        let alpha: Complex<f64> = complex_gaussian(rng, var);
        let beta = alpha * (n / l).sqrt();
        raw.push((
            Complex::new(lit::<T>(beta.re), lit::<T>(beta.im)),
            lit::<T>(angle),
            lit::<T>(dist / SPEED_OF_LIGHT),
            kind,
        ));
    }
    MultipathChannel::from_delays(role, raw, lit(b))
}

/// Draws every link of a scenario. Deterministic for a given RNG state; path
/// geometry and small-scale gains do not depend on the array size, so two
/// scenarios differing only in `num_antennas` share the same `alpha`s.
pub fn generate_channels<T: Real, R: Rng + ?Sized>(
    scenario: &ScenarioConfig,
    rng: &mut R,
) -> Result<ChannelSet<T>> {
    scenario.validate()?;
    let sensing = draw_link(
        LinkRole::Sensing,
        scenario.target,
        scenario.sensing_paths,
        Geometry::RoundTrip,
        scenario,
        rng,
    )?;
    let mut ues = Vec::with_capacity(scenario.num_ues());
    for (k, &pos) in scenario.ues.iter().enumerate() {
        ues.push(draw_link(
            LinkRole::Ue(k),
            pos,
            scenario.ue_paths,
            Geometry::OneWay,
            scenario,
            rng,
        )?);
    }
    let eve = draw_link(
        LinkRole::Eve,
        scenario.eve,
        scenario.eve_paths,
        Geometry::OneWay,
        scenario,
        rng,
    )?;
    Ok(ChannelSet { sensing, ues, eve })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(n: usize) -> ArrayConfig<f64> {
        ArrayConfig::half_wavelength(n, 28e9, 128e6).unwrap()
    }

    pub(crate) fn scenario() -> ScenarioConfig {
        ScenarioConfig {
            num_antennas: 30,
            carrier_hz: 28e9,
            bandwidth_hz: 128e6,
            element_spacing_wavelengths: 0.5,
            target: [15.0 * 20f64.to_radians().cos(), 15.0 * 20f64.to_radians().sin()],
            ues: vec![[17.0, -10.0], [25.0, 20.0]],
            eve: [22.0, 5.0],
            sensing_paths: 3,
            ue_paths: 3,
            eve_paths: 3,
            scatter_inner_m: 3.0,
            scatter_outer_m: 12.0,
            max_tap: 24,
            noise: NoiseVariances::uniform(4.05e-12),
            total_power_w: 0.1,
            coherence_symbols: 1000,
            seed: 1,
        }
    }

    #[test]
    fn broadside_response_is_flat() {
        let a = array_response(0.0, &cfg(2));
        let s = 1.0 / 2f64.sqrt();
        for z in a.iter() {
            assert!((z.re - s).abs() < 1e-15 && z.im.abs() < 1e-15);
        }
    }

    #[test]
    fn endfire_limit_alternates_sign() {
        let a = array_response(std::f64::consts::FRAC_PI_2 - 1e-9, &cfg(4));
        let expect = [0.5, -0.5, 0.5, -0.5];
        for (z, e) in a.iter().zip(expect) {
            assert!((z.re - e).abs() < 1e-7 && z.im.abs() < 1e-7);
        }
    }

    #[test]
    fn response_has_unit_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c = cfg(30);
        for _ in 0..100 {
            let phi = rng.gen_range(-1.5..1.5);
            assert!((array_response(phi, &c).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn response_distinguishes_angles_beyond_beamwidth_grid() {
        let c = cfg(30);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..200 {
            let s1: f64 = rng.gen_range(-0.95..0.95);
            let s2 = (s1 + rng.gen_range(1.01e-3..0.05) * if rng.gen() { 1.0 } else { -1.0 }).clamp(-0.99, 0.99);
            if (s1 - s2).abs() <= 1e-3 {
                continue;
            }
            let ip = array_response(s1.asin(), &c).dotc(&array_response(s2.asin(), &c)).norm();
            assert!(ip < 1.0 - 1e-6);
        }
    }

    #[test]
    fn path_loss_reference_values() {
        assert!((large_scale_gain(1.0, PathKind::LineOfSight).unwrap() - 10f64.powf(-6.14)).abs() < 1e-20);
        assert!((large_scale_gain(1.0, PathKind::NonLineOfSight).unwrap() - 10f64.powf(-7.2)).abs() < 1e-20);
        let g10 = large_scale_gain(10.0, PathKind::LineOfSight).unwrap();
        assert!((g10 / (10f64.powf(-6.14) * 1e-2) - 1.0).abs() < 1e-12);
        assert!(matches!(
            large_scale_gain(0.5, PathKind::LineOfSight),
            Err(DamError::BelowReferenceDistance { .. })
        ));
    }

    #[test]
    fn spatial_vector_norm_is_gain_magnitude() {
        let c = cfg(4);
        let p = PathComponent {
            gain: Complex::new(1.0, 0.0),
            angle: 0.0,
            delay: 0.0,
            tap: 0,
            kind: PathKind::LineOfSight,
        };
        let h = spatial_vector(&p, &c);
        for z in h.iter() {
            assert!((z.re - 0.5).abs() < 1e-15);
        }
        let zero = PathComponent { gain: Complex::new(0.0, 0.0), ..p.clone() };
        assert_eq!(spatial_vector(&zero, &c).norm(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let q = PathComponent {
                gain: complex_gaussian(&mut rng, 3.0),
                angle: rng.gen_range(-1.4..1.4),
                ..p.clone()
            };
            assert!((spatial_vector(&q, &c).norm() - q.gain.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn generation_is_deterministic_and_well_formed() {
        let s = scenario();
        let a: ChannelSet<f64> = generate_channels(&s, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b: ChannelSet<f64> = generate_channels(&s, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        for ch in std::iter::once(&a.sensing).chain(a.ues.iter()).chain([&a.eve]) {
            assert_eq!(ch.min_tap(), 0);
            assert!(ch.check_resolvable().is_ok());
            assert!(ch.max_tap() <= s.max_tap);
            assert_eq!(ch.paths()[0].kind, PathKind::LineOfSight);
        }
        assert_eq!(a.ues.len(), 2);
    }

    #[test]
    fn sensing_round_trip_delay() {
        let mut s = scenario();
        s.target = [15.0, 0.0];
        s.sensing_paths = 1;
        let ch: ChannelSet<f64> = generate_channels(&s, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let tau = ch.sensing.paths()[0].delay;
        assert!((tau - 30.0 / SPEED_OF_LIGHT).abs() < 1e-18);
        assert!((tau - 100.069e-9).abs() < 1e-12);
        assert_eq!(ch.sensing.paths()[0].tap, 0);
    }

    #[test]
    fn array_size_does_not_change_small_scale_draws() {
        let s30 = scenario();
        let mut s100 = scenario();
        s100.num_antennas = 100;
        let a: ChannelSet<f64> = generate_channels(&s30, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b: ChannelSet<f64> = generate_channels(&s100, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let r = b.sensing.paths()[0].gain / a.sensing.paths()[0].gain;
        assert!((r.re - (100.0f64 / 30.0).sqrt()).abs() < 1e-12 && r.im.abs() < 1e-12);
        assert_eq!(a.rescaled_for_antennas(30, 100).sensing.paths()[0].gain, b.sensing.paths()[0].gain);
    }

    #[test]
    fn single_path_gain_scaling_matches_large_scale_model() {
        let mut s = scenario();
        s.ues = vec![[20.0, 0.0]];
        s.ue_paths = 1;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let trials = 10_000;
        let mut acc = 0.0;
        for _ in 0..trials {
            let ch: ChannelSet<f64> = generate_channels(&s, &mut rng).unwrap();
            assert_eq!(ch.ues[0].num_paths(), 1);
            assert_eq!(ch.ues[0].paths()[0].tap, 0);
            acc += ch.ues[0].paths()[0].gain.norm_sqr();
        }
        let expect = 30.0 * large_scale_gain(20.0, PathKind::LineOfSight).unwrap();
        assert!((acc / trials as f64 / expect - 1.0).abs() < 0.05);
    }

    #[test]
    fn multipath_energy_matches_n_gain_over_l() {
        // E||h_kl||^2 = N * gain / L per path, checked on the LoS path of a
        // three-path link.
        let s = scenario();
        let mut rng = ChaCha8Rng::seed_from_u64(78);
        let trials = 10_000;
        let mut acc = 0.0;
        let c = s.array::<f64>().unwrap();
        for _ in 0..trials {
            let ch: ChannelSet<f64> = generate_channels(&s, &mut rng).unwrap();
            acc += spatial_vector(&ch.ues[0].paths()[0], &c).norm_squared();
        }
        let d = norm2(s.ues[0]);
        let expect = 30.0 * large_scale_gain(d, PathKind::LineOfSight).unwrap() / 3.0;
        assert!((acc / trials as f64 / expect - 1.0).abs() < 0.05);
    }

    #[test]
    fn rejects_node_at_origin() {
        let mut s = scenario();
        s.eve = [0.0, 0.0];
        let r: Result<ChannelSet<f64>> = generate_channels(&s, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(matches!(r, Err(DamError::DegenerateGeometry(_))));
    }

    #[test]
    fn random_channel_contract() {
        let c = cfg(8);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let ch = MultipathChannel::random(LinkRole::Eve, 4, 6, &c, &mut rng).unwrap();
            assert_eq!(ch.min_tap(), 0);
            assert!(ch.check_resolvable().is_ok());
        }
    }
}
