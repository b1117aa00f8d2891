//! Experiment orchestration: configuration, Monte Carlo sweeps over the
//! transmit power, CSV rows and run manifests.
//!
//! Every run is a pure function of `(config, seed)`. Trials run in parallel
//! with per-trial ChaCha streams and are aggregated in trial order.

use std::path::{Path, PathBuf};

use log::warn;
use nalgebra::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{generate_channels, ArrayConfig, ChannelSet, NoiseVariances, ScenarioConfig};
use crate::error::{DamError, Result};
use crate::linalg::{creal, CVector};
use crate::precoding::{effective_forms, los_steering, sensing_los_index, sp_precoders, ProjectorBank};
use crate::sca_opt::{sca_loop, warm_start, CrbConstraint, ScaOptions, ScaProblem, ScaState};
use crate::secrecy::{worst_sse, QuadraticFormSet};
use crate::stage2_delay::{crb_delay, estimate_delay, zf_sensing_projector, AscentOptions, EchoModel};
use crate::waveform::{probing_matrix, PrecoderSet, SymbolKind, SymbolStream};

pub const CSV_HEADER: &str = "scheme,power_dbm,metric,value,trials,stderr";

/// Receiver noise power (W) from a PSD in dBm/Hz, a noise figure and a
/// bandwidth.
pub fn noise_variance(psd_dbm_per_hz: f64, noise_figure_db: f64, bandwidth_hz: f64) -> Result<f64> {
    if !(bandwidth_hz > 0.0) {
        return Err(DamError::Config(format!("bandwidth must be positive, got {bandwidth_hz}")));
    }
    Ok(10f64.powf((psd_dbm_per_hz + noise_figure_db) / 10.0) * bandwidth_hz * 1e-3)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Optimized,
    Mrt,
    Sp,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Optimized => "optimized",
            Scheme::Mrt => "mrt",
            Scheme::Sp => "sp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalNoise {
    pub psd_dbm_per_hz: f64,
    pub noise_figure_db: f64,
}

/// Stage-2 observation window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EchoSettings {
    /// `M`, pulse taps per snapshot.
    pub taps: usize,
    /// `M_2`, snapshots.
    pub snapshots: usize,
    /// Whole taps between the window start and the line-of-sight echo.
    pub lead: usize,
    /// Half-width of the delay search bracket, in taps.
    pub bracket: f64,
}

impl Default for EchoSettings {
    fn default() -> Self {
        Self {
            taps: 16,
            snapshots: 256,
            lead: 2,
            bracket: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScaSettings {
    pub max_iters: usize,
    pub tol: f64,
    pub reduce_subspace: bool,
}

impl Default for ScaSettings {
    fn default() -> Self {
        let d = ScaOptions::default();
        Self {
            max_iters: d.max_iters,
            tol: d.tol,
            reduce_subspace: d.reduce_subspace,
        }
    }
}

impl ScaSettings {
    pub fn options(&self) -> ScaOptions {
        ScaOptions {
            max_iters: self.max_iters,
            tol: self.tol,
            reduce_subspace: self.reduce_subspace,
            ..ScaOptions::default()
        }
    }
}

fn default_schemes() -> Vec<Scheme> {
    vec![Scheme::Optimized, Scheme::Mrt, Scheme::Sp]
}
fn default_crb_antennas() -> Vec<usize> {
    vec![30, 100]
}
fn default_output() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    /// When set, every receiver's noise variance is derived from it.
    #[serde(default)]
    pub thermal: Option<ThermalNoise>,
    pub power_dbm: Vec<f64>,
    pub trials: usize,
    /// Fixed CRB threshold (s^2). Absent: twice the CRB reached with the
    /// lowest sweep power entirely on sensing, per realization.
    #[serde(default)]
    pub crb_threshold: Option<f64>,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<Scheme>,
    /// Array sizes compared in the CRB sweep.
    #[serde(default = "default_crb_antennas")]
    pub crb_antennas: Vec<usize>,
    #[serde(default)]
    pub echo: EchoSettings,
    #[serde(default)]
    pub sca: ScaSettings,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| DamError::Config(e.to_string()))?;
        cfg.resolve()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| DamError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            DamError::Config(m) => DamError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Fills derived noise variances and validates.
    pub fn resolve(&mut self) -> Result<()> {
        if let Some(t) = self.thermal {
            let var = noise_variance(t.psd_dbm_per_hz, t.noise_figure_db, self.scenario.bandwidth_hz)?;
            self.scenario.noise = NoiseVariances::uniform(var);
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DamError::Config(m));
        self.scenario.validate()?;
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.power_dbm.is_empty() {
            return bad("power sweep is empty".into());
        }
        if self.power_dbm.iter().any(|p| !p.is_finite()) || self.power_dbm.windows(2).any(|w| !(w[0] < w[1])) {
            return bad(format!("power sweep must be finite and strictly increasing: {:?}", self.power_dbm));
        }
        if self.schemes.is_empty() {
            return bad("no schemes selected".into());
        }
        if self.crb_antennas.is_empty() || self.crb_antennas.contains(&0) {
            return bad("crb_antennas must list positive array sizes".into());
        }
        if let Some(g) = self.crb_threshold {
            if !(g > 0.0) {
                return bad(format!("crb_threshold must be positive, got {g}"));
            }
        }
        let e = &self.echo;
        if e.snapshots == 0 || !(e.bracket > 0.0) || (e.lead as f64 + e.bracket + 2.0) > e.taps as f64 {
            return bad(format!("echo window too small for lead {} and bracket {}", e.lead, e.bracket));
        }
        if self.sca.max_iters == 0 || !(self.sca.tol > 0.0) {
            return bad("sca.max_iters and sca.tol must be positive".into());
        }
        Ok(())
    }

    /// SHA-256 of the canonical TOML serialization, output directory aside.
    pub fn digest(&self) -> String {
        let mut canonical = self.clone();
        canonical.output = default_output();
        let text = toml::to_string(&canonical).expect("config is serializable");
        format!("{:x}", Sha256::digest(text.as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scheme: String,
    pub power_dbm: f64,
    pub metric: String,
    pub value: f64,
    pub trials: usize,
    pub stderr: f64,
}

impl ResultRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{:e},{},{:e}",
            self.scheme, self.power_dbm, self.metric, self.value, self.trials, self.stderr
        )
    }
}

pub fn to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

/// Looks up a row by scheme, power and metric.
pub fn find_row<'a>(rows: &'a [ResultRow], scheme: &str, power_dbm: f64, metric: &str) -> Option<&'a ResultRow> {
    rows.iter()
        .find(|r| r.scheme == scheme && r.power_dbm == power_dbm && r.metric == metric)
}

fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        v.iter().sum()
    } else {
        let (a, b) = v.split_at(v.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// Mean and its standard error (zero for a single sample).
pub fn mean_and_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len();
    if n == 0 {
        return (f64::NAN, 0.0);
    }
    let mean = pairwise_sum(v) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Trial stream of a run: ChaCha8 keyed by the seed, stream id by the trial.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stage-2 echo model for the sensing link's line-of-sight echo; the window
/// starts `lead` whole taps before it. Returns the model (dark precoder), the
/// true delay and the echo amplitude.
pub fn echo_model(
    ch: &ChannelSet<f64>,
    array: &ArrayConfig<f64>,
    settings: &EchoSettings,
    rng: &mut ChaCha8Rng,
) -> Result<(EchoModel<f64>, f64, Complex<f64>)> {
    let los = &ch.sensing.paths()[sensing_los_index(&ch.sensing)];
    let b = array.bandwidth;
    let whole = (b * los.delay).floor();
    let reference = (whole - settings.lead as f64) / b;
    let stream = SymbolStream::qpsk(settings.taps + settings.snapshots - 1, SymbolKind::Probing, rng);
    let sd = probing_matrix(&stream, settings.taps, settings.snapshots)?;
    let model = EchoModel::new(
        sd,
        los_steering(ch, array),
        CVector::zeros(array.num_antennas),
        b,
        reference,
    )?;
    Ok((model, los.delay, los.gain))
}

/// One channel draw with everything the schemes need.
#[derive(Debug, Clone)]
pub struct Realization {
    pub channels: ChannelSet<f64>,
    pub array: ArrayConfig<f64>,
    pub bank: ProjectorBank<f64>,
    pub raw: QuadraticFormSet<f64>,
    pub effective: QuadraticFormSet<f64>,
    pub echo: EchoModel<f64>,
    pub delay: f64,
    pub amplitude: Complex<f64>,
    pub noise: NoiseVariances,
}

impl Realization {
    pub fn draw(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        let scenario = &cfg.scenario;
        let channels = generate_channels::<f64, _>(scenario, rng)?;
        let array = scenario.array::<f64>()?;
        let bank = ProjectorBank::build(&channels, &array)?;
        let raw = QuadraticFormSet::from_channels(&channels, &array, &scenario.noise)?;
        let effective = effective_forms(&bank, &raw)?;
        let (echo, delay, amplitude) = echo_model(&channels, &array, &cfg.echo, rng)?;
        Ok(Self {
            channels,
            array,
            bank,
            raw,
            effective,
            echo,
            delay,
            amplitude,
            noise: scenario.noise,
        })
    }

    /// CRB with `power` W on the zero-forced line-of-sight beam.
    pub fn full_power_crb(&self, power: f64) -> Result<f64> {
        let qa = &self.bank.sensing.matrix * &self.echo.steering;
        let mut m = self.echo.clone();
        m.precoder = &qa * creal((power / qa.norm_squared()).sqrt());
        crb_delay(&m, self.delay, self.amplitude, self.noise.stage2)
    }

    pub fn crb_constraint(&self, threshold: f64) -> Result<CrbConstraint<f64>> {
        CrbConstraint::new(self.echo.clone(), self.delay, self.amplitude, self.noise.stage2, threshold)
    }

    /// The configured threshold, or twice the full-power CRB at `lowest_w`.
    pub fn threshold(&self, cfg: &ExperimentConfig, lowest_w: f64) -> Result<f64> {
        match cfg.crb_threshold {
            Some(g) => Ok(g),
            None => Ok(2.0 * self.full_power_crb(lowest_w)?),
        }
    }

    pub fn worst_sse(&self, pre: &PrecoderSet<f64>, coherence: usize) -> Result<f64> {
        Ok(worst_sse(&self.raw, pre, coherence, self.channels.max_ue_tap())?.0)
    }
}

/// Precoders of one scheme at one power, plus the SCA state when optimized.
#[derive(Debug, Clone)]
pub struct SchemeOutcome {
    pub precoders: PrecoderSet<f64>,
    pub state: Option<ScaState<f64>>,
}

/// Designs every requested scheme from the shared CRB-honoring MRT start.
pub fn design(
    real: &Realization,
    crb: &CrbConstraint<f64>,
    power_w: f64,
    schemes: &[Scheme],
    sca: &ScaSettings,
) -> Result<Vec<Result<SchemeOutcome>>> {
    let (init, split) = warm_start(&real.channels, &real.array, &real.bank, crb, power_w)?;
    Ok(schemes
        .iter()
        .map(|s| match s {
            Scheme::Mrt => Ok(SchemeOutcome {
                precoders: init.clone(),
                state: None,
            }),
            Scheme::Sp => Ok(SchemeOutcome {
                precoders: sp_precoders(&real.channels, &real.array, &real.bank, &split)?,
                state: None,
            }),
            Scheme::Optimized => {
                let opts = sca.options();
                let problem = ScaProblem::new(&real.effective, &real.bank, crb.clone(), power_w, opts.reduce_subspace)?;
                let (pre, state) = sca_loop(&problem, &init, &opts)?;
                Ok(SchemeOutcome {
                    precoders: pre,
                    state: Some(state),
                })
            }
        })
        .collect())
}

/// Per-trial result of the SSE sweep: `[point][scheme]`.
type TrialGrid = Vec<Vec<Option<(f64, usize)>>>;

fn sse_trial(cfg: &ExperimentConfig, seed: u64, trial: usize) -> TrialGrid {
    let empty = vec![vec![None; cfg.schemes.len()]; cfg.power_dbm.len()];
    // channels depend on the trial only, so every power point sees the same draws
    let mut rng = trial_rng(seed, trial as u64);
    let real = match Realization::draw(cfg, &mut rng) {
        Ok(r) => r,
        Err(e) => {
            warn!("trial {trial}: realization rejected ({e})");
            return empty;
        }
    };
    let lowest = dbm_to_watts(cfg.power_dbm[0]);
    let crb = match real.threshold(cfg, lowest).and_then(|g| real.crb_constraint(g)) {
        Ok(c) => c,
        Err(e) => {
            warn!("trial {trial}: CRB constraint unavailable ({e})");
            return empty;
        }
    };
    cfg.power_dbm
        .iter()
        .map(|&dbm| {
            let outcomes = match design(&real, &crb, dbm_to_watts(dbm), &cfg.schemes, &cfg.sca) {
                Ok(o) => o,
                Err(e) => {
                    warn!("trial {trial}, {dbm} dBm: no feasible start ({e})");
                    return vec![None; cfg.schemes.len()];
                }
            };
            outcomes
                .into_iter()
                .zip(&cfg.schemes)
                .map(|(o, s)| {
                    let o = o.and_then(|o| {
                        let iters = o.state.as_ref().map_or(0, |st| st.iteration);
                        Ok((real.worst_sse(&o.precoders, cfg.scenario.coherence_symbols)?, iters))
                    });
                    match o {
                        Ok(v) => Some(v),
                        Err(e) => {
                            warn!("trial {trial}, {dbm} dBm, {}: failed ({e})", s.name());
                            None
                        }
                    }
                })
                .collect()
        })
        .collect()
}

/// Mean worst-UE SSE per scheme and power point.
pub fn run_sse_vs_power(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let grids: Vec<TrialGrid> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| sse_trial(cfg, seed, t))
        .collect();
    let mut rows = Vec::new();
    for (p, &dbm) in cfg.power_dbm.iter().enumerate() {
        for (s, scheme) in cfg.schemes.iter().enumerate() {
            let ok: Vec<(f64, usize)> = grids.iter().filter_map(|g| g[p][s]).collect();
            let failed = cfg.trials - ok.len();
            let row = |metric: &str, value: f64, trials: usize, stderr: f64| ResultRow {
                scheme: scheme.name().into(),
                power_dbm: dbm,
                metric: metric.into(),
                value,
                trials,
                stderr,
            };
            if !ok.is_empty() {
                let sse: Vec<f64> = ok.iter().map(|v| v.0).collect();
                let (m, se) = mean_and_stderr(&sse);
                rows.push(row("worst_sse", m, ok.len(), se));
                if *scheme == Scheme::Optimized {
                    let it: Vec<f64> = ok.iter().map(|v| v.1 as f64).collect();
                    let (m, se) = mean_and_stderr(&it);
                    rows.push(row("sca_iterations", m, ok.len(), se));
                }
            }
            if failed > 0 {
                warn!("{} at {dbm} dBm: {failed} of {} trials failed", scheme.name(), cfg.trials);
                rows.push(row("failed_trials", failed as f64, cfg.trials, 0.0));
            }
        }
    }
    Ok(rows)
}

/// Zero-forced line-of-sight sensing beam with `power` W.
fn los_beam(ch: &ChannelSet<f64>, array: &ArrayConfig<f64>, power: f64) -> Result<CVector<f64>> {
    let los = sensing_los_index(&ch.sensing);
    let vs = ch.sensing.spatial_vectors(array);
    let nlos: Vec<CVector<f64>> = vs
        .into_iter()
        .enumerate()
        .filter(|(l, _)| *l != los)
        .map(|(_, v)| v)
        .collect();
    let q = zf_sensing_projector(array.num_antennas, &nlos)?;
    let a = los_steering(ch, array);
    let qa = &q.matrix * &a;
    if !(qa.norm() > 1e-8 * a.norm()) {
        return Err(DamError::LosSuppressed);
    }
    Ok(&qa * creal((power / qa.norm_squared()).sqrt()))
}

/// Analytic CRB and empirical RMSE of the delay estimator per array size
/// and power point. RMSE uses the zero-forced LoS beam; `crb_mrt` is the
/// bound for a matched beam toward the LoS at the same power. The geometry and probing block are fixed by the seed;
/// trials redraw the noise only.
pub fn run_crb_rmse(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let mut rng = trial_rng(seed, u64::MAX);
    let base = generate_channels::<f64, _>(&cfg.scenario, &mut rng)?;
    let array0 = cfg.scenario.array::<f64>()?;
    let (model0, delay, _) = echo_model(&base, &array0, &cfg.echo, &mut rng)?;
    let sigma2 = cfg.scenario.noise.stage2;
    let n0 = cfg.scenario.num_antennas;
    let mut rows = Vec::new();
    for &n in &cfg.crb_antennas {
        let ch = base.rescaled_for_antennas(n0, n);
        let array = array0.with_antennas(n);
        let scheme = format!("n{n}");
        let amplitude = ch.sensing.paths()[sensing_los_index(&ch.sensing)].gain;
        for (p, &dbm) in cfg.power_dbm.iter().enumerate() {
            let mut model = model0.clone();
            model.steering = los_steering(&ch, &array);
            model.precoder = los_beam(&ch, &array, dbm_to_watts(dbm))?;
            let crb = crb_delay(&model, delay, amplitude, sigma2)?;
            let mut mrt = model.clone();
            mrt.precoder = &model.steering * creal(dbm_to_watts(dbm).sqrt() / model.steering.norm());
            let crb_mrt = crb_delay(&mrt, delay, amplitude, sigma2)?;
            let truth = model.offset_of(delay);
            let start = truth.round();
            let top = (cfg.echo.taps - 1) as f64;
            let bracket = (
                model.delay_of((start - cfg.echo.bracket).max(0.0)),
                model.delay_of((start + cfg.echo.bracket).min(top)),
            );
            let init = model.delay_of(start);
            let errors: Vec<Option<f64>> = (0..cfg.trials)
                .into_par_iter()
                .map(|t| {
                    let mut rng = trial_rng(seed, ((p as u64) << 32) | t as u64);
                    let y = model.simulate(delay, amplitude, sigma2, &mut rng);
                    match estimate_delay(&model, &y, bracket, init, &AscentOptions::default()) {
                        Ok(e) if e.converged => Some(e.delay - delay),
                        Ok(_) => None,
                        Err(e) => {
                            warn!("{scheme}, {dbm} dBm, trial {t}: {e}");
                            None
                        }
                    }
                })
                .collect();
            let ok: Vec<f64> = errors.into_iter().flatten().collect();
            let row = |metric: &str, value: f64, trials: usize, stderr: f64| ResultRow {
                scheme: scheme.clone(),
                power_dbm: dbm,
                metric: metric.into(),
                value,
                trials,
                stderr,
            };
            rows.push(row("crb", crb, 0, 0.0));
            rows.push(row("sqrt_crb", crb.sqrt(), 0, 0.0));
            rows.push(row("crb_mrt", crb_mrt, 0, 0.0));
            if !ok.is_empty() {
                let sq: Vec<f64> = ok.iter().map(|e| e * e).collect();
                let (mse, se) = mean_and_stderr(&sq);
                let rmse = mse.sqrt();
                // delta method for sqrt(mse)
                let rmse_se = if rmse > 0.0 { se / (2.0 * rmse) } else { 0.0 };
                rows.push(row("rmse", rmse, ok.len(), rmse_se));
                rows.push(row("rmse_over_sqrt_crb", rmse / crb.sqrt(), ok.len(), rmse_se / crb.sqrt()));
            }
            let failed = cfg.trials - ok.len();
            if failed > 0 {
                warn!("{scheme} at {dbm} dBm: {failed} of {} estimates excluded", cfg.trials);
                rows.push(row("failed_trials", failed as f64, cfg.trials, 0.0));
            }
        }
    }
    Ok(rows)
}

/// One optimization at the scenario's power budget, all schemes.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub power_w: f64,
    pub threshold: f64,
    pub sse: Vec<(Scheme, f64)>,
    pub crb: Vec<(Scheme, f64)>,
    pub state: Option<ScaState<f64>>,
}

pub fn solve_once(cfg: &ExperimentConfig, seed: u64) -> Result<SolveReport> {
    cfg.validate()?;
    let mut rng = trial_rng(seed, 0);
    let real = Realization::draw(cfg, &mut rng)?;
    let power_w = cfg.scenario.total_power_w;
    let lowest = dbm_to_watts(cfg.power_dbm[0]).min(power_w);
    let threshold = real.threshold(cfg, lowest)?;
    let crb = real.crb_constraint(threshold)?;
    let mut report = SolveReport {
        power_w,
        threshold,
        sse: Vec::new(),
        crb: Vec::new(),
        state: None,
    };
    for (o, s) in design(&real, &crb, power_w, &cfg.schemes, &cfg.sca)?.into_iter().zip(&cfg.schemes) {
        let o = o?;
        report.sse.push((*s, real.worst_sse(&o.precoders, cfg.scenario.coherence_symbols)?));
        report.crb.push((*s, crb.crb(&o.precoders.sensing)?));
        if o.state.is_some() {
            report.state = o.state;
        }
    }
    Ok(report)
}

/// Machine-readable record written next to every result file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    pub config_sha256: String,
    pub seed: u64,
    pub trials: usize,
    pub crate_version: String,
    pub outputs: Vec<String>,
}

fn io_err(path: &Path, e: std::io::Error) -> DamError {
    DamError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Writes `<dir>/<name>.csv` and `<dir>/<name>.manifest.json`.
pub fn write_results(
    rows: &[ResultRow],
    dir: &Path,
    name: &str,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let csv = dir.join(format!("{name}.csv"));
    std::fs::write(&csv, to_csv(rows)).map_err(|e| io_err(&csv, e))?;
    let manifest = RunManifest {
        experiment: name.into(),
        config_sha256: cfg.digest(),
        seed,
        trials: cfg.trials,
        crate_version: env!("CARGO_PKG_VERSION").into(),
        outputs: vec![format!("{name}.csv")],
    };
    let mpath = dir.join(format!("{name}.manifest.json"));
    let text = serde_json::to_string_pretty(&manifest).expect("manifest is serializable");
    std::fs::write(&mpath, text).map_err(|e| io_err(&mpath, e))?;
    Ok(csv)
}
