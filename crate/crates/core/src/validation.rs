//! Time-domain check of the closed-form SINR terms: unit-power symbol
//! streams are pushed through `synthesize_transmit` and `receive_oracle`, and
//! each term is measured from the received samples.

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{complex_gaussian, ArrayConfig, ChannelSet, LinkRole, MultipathChannel, NoiseVariances};
use crate::error::{DamError, Result};
use crate::experiments::trial_rng;
use crate::linalg::{creal, CVector};
use crate::scalar::{to_f64, Real};
use crate::secrecy::{eve_terms, ue_terms, QuadraticFormSet, SinrTerms};
use crate::waveform::{receive_oracle, synthesize_transmit, PrecoderSet, SymbolKind, SymbolStream};

/// Received contributions of every source at one observer, noise-free.
struct Components<T: Real> {
    /// `by_ue[k']`: samples caused by UE `k'`'s stream alone.
    by_ue: Vec<Vec<Complex<T>>>,
    sensing: Vec<Complex<T>>,
}

/// Transmit streams of one measurement.
pub struct OracleStreams<T: Real> {
    pub data: Vec<SymbolStream<T>>,
    pub probing: SymbolStream<T>,
}

impl<T: Real> OracleStreams<T> {
    pub fn qpsk<R: Rng + ?Sized>(num_ues: usize, len: usize, rng: &mut R) -> Self {
        Self {
            data: (0..num_ues).map(|_| SymbolStream::qpsk(len, SymbolKind::Data, rng)).collect(),
            probing: SymbolStream::qpsk(len, SymbolKind::Probing, rng),
        }
    }

    pub fn len(&self) -> usize {
        self.probing.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probing.is_empty()
    }
}

fn components<T: Real>(
    observer: &MultipathChannel<T>,
    cfg: &ArrayConfig<T>,
    pre: &PrecoderSet<T>,
    streams: &OracleStreams<T>,
    horizon: usize,
) -> Components<T> {
    // noise-free, so the generator is never drawn from
    let mut rng = trial_rng(0, 0);
    let k_count = streams.data.len();
    let by_ue = (0..k_count)
        .map(|k| {
            let data: Vec<Option<&SymbolStream<T>>> =
                (0..k_count).map(|kp| (kp == k).then_some(&streams.data[k])).collect();
            let x = synthesize_transmit(pre, None, &data, horizon);
            receive_oracle(observer, cfg, &x, 0.0, &mut rng)
        })
        .collect();
    let none: Vec<Option<&SymbolStream<T>>> = vec![None; k_count];
    let x = synthesize_transmit(pre, Some(&streams.probing), &none, horizon);
    Components {
        by_ue,
        sensing: receive_oracle(observer, cfg, &x, 0.0, &mut rng),
    }
}

fn mean_power<T: Real>(y: &[Complex<T>], window: (usize, usize)) -> f64 {
    let s: f64 = y[window.0..window.1].iter().map(|v| to_f64(v.norm_sqr())).sum();
    s / (window.1 - window.0) as f64
}

fn sample<T: Real>(s: &SymbolStream<T>, n: i64) -> Complex<f64> {
    let v = s.at(n);
    Complex::new(to_f64(v.re), to_f64(v.im))
}

/// Desired power `|c_target|^2` from the joint least-squares fit
/// `y[n] ~ sum_j c_j s[n - lag_j]` over every lag the stream can reach, and
/// the empirical power of `y[n] - c_target s[n - target]`.
fn split_desired<T: Real>(
    y: &[Complex<T>],
    s: &SymbolStream<T>,
    lags: &[i64],
    target: i64,
    window: (usize, usize),
) -> (f64, f64) {
    let m = lags.len();
    let mut gram = DMatrix::<Complex<f64>>::zeros(m, m);
    let mut rhs = DVector::<Complex<f64>>::zeros(m);
    let mut v = DVector::<Complex<f64>>::zeros(m);
    for n in window.0..window.1 {
        for (j, &lag) in lags.iter().enumerate() {
            v[j] = sample(s, n as i64 - lag);
        }
        gram.ger(Complex::new(1.0, 0.0), &v.conjugate(), &v, Complex::new(1.0, 0.0));
        let yn = Complex::new(to_f64(y[n].re), to_f64(y[n].im));
        rhs.axpy(yn, &v.conjugate(), Complex::new(1.0, 0.0));
    }
    let coeffs = gram.cholesky().expect("distinct lags of a QPSK stream are independent").solve(&rhs);
    let c = lags.iter().position(|&l| l == target).map_or(Complex::new(0.0, 0.0), |j| coeffs[j]);
    let mut res = 0.0;
    for n in window.0..window.1 {
        let yn = Complex::new(to_f64(y[n].re), to_f64(y[n].im));
        res += (yn - c * sample(s, n as i64 - target)).norm_sqr();
    }
    (c.norm_sqr(), res / (window.1 - window.0) as f64)
}

fn measure<T: Real>(
    comp: &Components<T>,
    streams: &OracleStreams<T>,
    k: usize,
    lags: &[i64],
    target: i64,
    noise_var: f64,
    window: (usize, usize),
) -> SinrTerms<f64> {
    let (desired, own) = split_desired(&comp.by_ue[k], &streams.data[k], lags, target, window);
    let len = comp.sensing.len();
    let mut others = vec![Complex::new(T::zero(), T::zero()); len];
    for (kp, y) in comp.by_ue.iter().enumerate() {
        if kp != k {
            for (o, v) in others.iter_mut().zip(y) {
                *o += *v;
            }
        }
    }
    SinrTerms {
        desired: desired / noise_var,
        isi: own / noise_var,
        iui: mean_power(&others, window) / noise_var,
        sensing: mean_power(&comp.sensing, window) / noise_var,
    }
}

/// Lags `n*_k + i` over the delay-difference span of an observer/UE pair.
fn reachable_lags<T: Real>(observer: &MultipathChannel<T>, source: &MultipathChannel<T>, reference: usize) -> Vec<i64> {
    let lo = observer.min_tap() as i64 - source.max_tap() as i64;
    let hi = observer.max_tap() as i64 - source.min_tap() as i64;
    (lo..=hi).map(|i| reference as i64 + i).collect()
}

/// Closed-form and measured terms of one receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermPair {
    pub closed: SinrTerms<f64>,
    pub measured: SinrTerms<f64>,
}

impl TermPair {
    /// `(name, closed, measured)` of the four terms.
    pub fn entries(&self) -> [(&'static str, f64, f64); 4] {
        let (c, m) = (&self.closed, &self.measured);
        [
            ("desired", c.desired, m.desired),
            ("isi", c.isi, m.isi),
            ("iui", c.iui, m.iui),
            ("sensing", c.sensing, m.sensing),
        ]
    }

    /// Largest relative deviation over the terms; a term whose closed form
    /// is below `1e-12` of the receiver's total is compared absolutely
    /// against that total.
    pub fn worst_relative_error(&self) -> f64 {
        let e = self.entries();
        let total: f64 = e.iter().map(|t| t.1).sum();
        e.iter()
            .map(|&(_, c, m)| {
                if c > 1e-12 * total {
                    (m - c).abs() / c
                } else {
                    (m - c).abs() / total.max(f64::MIN_POSITIVE)
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Every UE's and Eve's terms for every UE, closed form against the
/// time-domain measurement over `symbols` QPSK symbols per stream.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub ue: Vec<TermPair>,
    pub eve: Vec<TermPair>,
}

impl OracleReport {
    pub fn worst_relative_error(&self) -> f64 {
        self.ue
            .iter()
            .chain(&self.eve)
            .map(TermPair::worst_relative_error)
            .fold(0.0, f64::max)
    }
}

pub fn oracle_report<T: Real>(
    ch: &ChannelSet<T>,
    cfg: &ArrayConfig<T>,
    pre: &PrecoderSet<T>,
    noise: &NoiseVariances,
    streams: &OracleStreams<T>,
) -> Result<OracleReport> {
    let forms = QuadraticFormSet::from_channels(ch, cfg, noise)?;
    let len = streams.len();
    let reach = pre.max_abs_pre_delay()
        + ch.ues.iter().chain([&ch.eve, &ch.sensing]).map(|c| c.max_tap()).max().unwrap_or(0);
    let horizon = len + reach;
    // samples whose every contributing symbol index lies inside the streams
    let window = (reach + 1, len.saturating_sub(reach + 1));
    if window.0 >= window.1 {
        return Err(DamError::Config(format!("{len} symbols cannot cover a delay reach of {reach}")));
    }
    let k_count = ch.num_ues();
    let ue = (0..k_count)
        .map(|k| {
            let comp = components(&ch.ues[k], cfg, pre, streams, horizon);
            let lags = reachable_lags(&ch.ues[k], &ch.ues[k], pre.references[k]);
            TermPair {
                closed: to_f64_terms(ue_terms(&forms, k, pre)),
                measured: measure(&comp, streams, k, &lags, pre.references[k] as i64, noise.ue, window),
            }
        })
        .collect();
    let comp = components(&ch.eve, cfg, pre, streams, horizon);
    let eve = (0..k_count)
        .map(|k| {
            let lags = reachable_lags(&ch.eve, &ch.ues[k], pre.references[k]);
            let target = pre.references[k] as i64 + forms.eve[k].best_index;
            TermPair {
                closed: to_f64_terms(eve_terms(&forms, k, pre)),
                measured: measure(&comp, streams, k, &lags, target, noise.eve, window),
            }
        })
        .collect();
    Ok(OracleReport { ue, eve })
}

fn to_f64_terms<T: Real>(t: SinrTerms<T>) -> SinrTerms<f64> {
    SinrTerms {
        desired: to_f64(t.desired),
        isi: to_f64(t.isi),
        iui: to_f64(t.iui),
        sensing: to_f64(t.sensing),
    }
}

/// Random discrete-model scenario: `K` UEs, Eve and a sensing link with the
/// given path counts and standard Gaussian gains, plus random precoders of
/// unit total power.
pub fn random_scenario<T: Real>(
    cfg: &ArrayConfig<T>,
    num_ues: usize,
    paths: &[usize],
    max_tap: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(ChannelSet<T>, PrecoderSet<T>)> {
    let mut count = paths.iter().cycle();
    let mut next = || *count.next().expect("non-empty path list");
    let sensing = MultipathChannel::random(LinkRole::Sensing, next(), max_tap, cfg, rng)?;
    let ues = (0..num_ues)
        .map(|k| MultipathChannel::random(LinkRole::Ue(k), next(), max_tap, cfg, rng))
        .collect::<Result<Vec<_>>>()?;
    let eve = MultipathChannel::random(LinkRole::Eve, next(), max_tap, cfg, rng)?;
    let n = cfg.num_antennas;
    let mut draw = || CVector::<T>::from_fn(n, |_, _| complex_gaussian(rng, 1.0));
    let sensing_pre = draw();
    let comm = ues.iter().map(|u| (0..u.num_paths()).map(|_| draw()).collect()).collect();
    let mut pre = PrecoderSet::new(sensing_pre, comm, &ues)?;
    let scale = creal(T::one() / pre.total_power().sqrt());
    pre.sensing *= scale;
    for f in pre.comm.iter_mut().flatten() {
        *f *= scale;
    }
    Ok((ChannelSet { sensing, ues, eve }, pre))
}

/// One row of the validation table.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationCase {
    pub scenario: usize,
    pub num_ues: usize,
    pub worst_relative_error: f64,
    pub passed: bool,
}

/// Oracle-equivalence suite: `scenarios` random instances with up to three
/// UEs and up to four paths per link, tolerance `tol` relative.
pub fn run_validation(seed: u64, scenarios: usize, symbols: usize, tol: f64) -> Result<Vec<ValidationCase>> {
    let cfg = ArrayConfig::<f64>::half_wavelength(8, 28e9, 128e6)?;
    (0..scenarios)
        .map(|i| {
            let mut rng = trial_rng(seed, i as u64);
            let k = rng.gen_range(1..=3usize);
            let paths: Vec<usize> = (0..k + 2).map(|_| rng.gen_range(1..=4usize)).collect();
            let (ch, pre) = random_scenario(&cfg, k, &paths, 6, &mut rng)?;
            let noise = NoiseVariances::uniform(rng.gen_range(0.1..1.0));
            let streams = OracleStreams::qpsk(k, symbols, &mut rng);
            let report = oracle_report(&ch, &cfg, &pre, &noise, &streams)?;
            let worst = report.worst_relative_error();
            Ok(ValidationCase {
                scenario: i,
                num_ues: k,
                worst_relative_error: worst,
                passed: worst < tol,
            })
        })
        .collect()
}
