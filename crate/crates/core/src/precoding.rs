//! Path-based zero-forcing projectors, projected SINR forms and the MRT and
//! strongest-path baselines.

use log::warn;

use crate::channel::{array_response, ArrayConfig, ChannelSet, MultipathChannel};
use crate::error::{DamError, Result};
use crate::linalg::{block_diag, creal, hstack, complement_projector, CMatrix, CVector, OrthProjector};
use crate::scalar::{lit, Real};
use crate::secrecy::{EveIntercept, QuadraticFormSet, UeForms};
use crate::waveform::PrecoderSet;

/// A column nulled by a projector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NulledColumn {
    Sensing(usize),
    Ue { ue: usize, path: usize },
}

/// All ZF projectors of one realization.
#[derive(Debug, Clone)]
pub struct ProjectorBank<T: Real> {
    /// `Q_{c,kl}`
    pub comm: Vec<Vec<OrthProjector<T>>>,
    /// `Q_bar_{c,k}`, block diagonal.
    pub comm_stacked: Vec<CMatrix<T>>,
    /// `Q_bar_s`
    pub sensing: OrthProjector<T>,
    pub comm_nulled: Vec<Vec<Vec<NulledColumn>>>,
    pub sensing_nulled: Vec<NulledColumn>,
}

fn check_columns(columns: usize, antennas: usize) -> Result<()> {
    if columns >= antennas {
        return Err(DamError::InfeasibleZeroForcing {
            columns,
            antennas,
            deficit: columns + 1 - antennas,
        });
    }
    Ok(())
}

fn project<T: Real>(
    n: usize,
    nulled: Vec<NulledColumn>,
    ch: &ChannelSet<T>,
    cfg: &ArrayConfig<T>,
) -> Result<(OrthProjector<T>, Vec<NulledColumn>)> {
    check_columns(nulled.len(), n)?;
    let sens = ch.sensing.spatial_vectors(cfg);
    let ues: Vec<Vec<CVector<T>>> = ch.ues.iter().map(|u| u.spatial_vectors(cfg)).collect();
    let cols: Vec<CVector<T>> = nulled
        .iter()
        .map(|c| match *c {
            NulledColumn::Sensing(l) => sens[l].clone(),
            NulledColumn::Ue { ue, path } => ues[ue][path].clone(),
        })
        .collect();
    Ok((complement_projector(n, &hstack(n, &cols)), nulled))
}

/// `Q_{c,kl}`: nulls every sensing path and every UE path except `(k, l)`.
pub fn build_comm_projector<T: Real>(
    k: usize,
    l: usize,
    ch: &ChannelSet<T>,
    cfg: &ArrayConfig<T>,
) -> Result<(OrthProjector<T>, Vec<NulledColumn>)> {
    let mut nulled: Vec<NulledColumn> = (0..ch.sensing.num_paths()).map(NulledColumn::Sensing).collect();
    for (ue, u) in ch.ues.iter().enumerate() {
        for path in 0..u.num_paths() {
            if (ue, path) != (k, l) {
                nulled.push(NulledColumn::Ue { ue, path });
            }
        }
    }
    project(cfg.num_antennas, nulled, ch, cfg)
}

/// Index of the sensing line-of-sight path (the strongest path if none is
/// labelled line-of-sight).
pub fn sensing_los_index<T: Real>(sensing: &MultipathChannel<T>) -> usize {
    sensing.los_index().unwrap_or_else(|| strongest_path(sensing))
}

/// `a(phi_{s,1})`
pub fn los_steering<T: Real>(ch: &ChannelSet<T>, cfg: &ArrayConfig<T>) -> CVector<T> {
    array_response(ch.sensing.paths()[sensing_los_index(&ch.sensing)].angle, cfg)
}

/// `Q_bar_s`: nulls the NLoS sensing paths and every UE path, keeping part of
/// the LoS steering direction.
pub fn build_sensing_projector<T: Real>(
    ch: &ChannelSet<T>,
    cfg: &ArrayConfig<T>,
) -> Result<(OrthProjector<T>, Vec<NulledColumn>)> {
    let los = sensing_los_index(&ch.sensing);
    let mut nulled: Vec<NulledColumn> = (0..ch.sensing.num_paths())
        .filter(|&l| l != los)
        .map(NulledColumn::Sensing)
        .collect();
    for (ue, u) in ch.ues.iter().enumerate() {
        nulled.extend((0..u.num_paths()).map(|path| NulledColumn::Ue { ue, path }));
    }
    let (q, nulled) = project(cfg.num_antennas, nulled, ch, cfg)?;
    let a = los_steering(ch, cfg);
    if (&q.matrix * &a).norm() <= lit::<T>(1e-8) * a.norm() {
        return Err(DamError::LosSuppressed);
    }
    Ok((q, nulled))
}

impl<T: Real> ProjectorBank<T> {
    pub fn build(ch: &ChannelSet<T>, cfg: &ArrayConfig<T>) -> Result<Self> {
        let mut comm = Vec::with_capacity(ch.num_ues());
        let mut comm_nulled = Vec::with_capacity(ch.num_ues());
        for (k, u) in ch.ues.iter().enumerate() {
            let (qs, ns): (Vec<_>, Vec<_>) = (0..u.num_paths())
                .map(|l| build_comm_projector(k, l, ch, cfg))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .unzip();
            comm.push(qs);
            comm_nulled.push(ns);
        }
        let comm_stacked = comm
            .iter()
            .map(|qs: &Vec<OrthProjector<T>>| {
                block_diag(&qs.iter().map(|q| q.matrix.clone()).collect::<Vec<_>>())
            })
            .collect();
        let (sensing, sensing_nulled) = build_sensing_projector(ch, cfg)?;
        Ok(Self {
            comm,
            comm_stacked,
            sensing,
            comm_nulled,
            sensing_nulled,
        })
    }

    /// `f = Q_bar b` for every precoder.
    pub fn apply(&self, pre: &PrecoderSet<T>) -> PrecoderSet<T> {
        let mut out = pre.clone();
        out.sensing = &self.sensing.matrix * &pre.sensing;
        for (k, qs) in self.comm.iter().enumerate() {
            for (l, q) in qs.iter().enumerate() {
                out.comm[k][l] = &q.matrix * &pre.comm[k][l];
            }
        }
        out
    }
}

/// `Q_bar^H X Q_bar` for every form.
pub fn effective_forms<T: Real>(bank: &ProjectorBank<T>, raw: &QuadraticFormSet<T>) -> Result<QuadraticFormSet<T>> {
    if raw.num_ues() != bank.comm.len() {
        return Err(DamError::Dimension(format!(
            "{} UE form sets for {} projector groups",
            raw.num_ues(),
            bank.comm.len()
        )));
    }
    let qc = &bank.comm_stacked;
    let qs = &bank.sensing.matrix;
    for (k, u) in raw.ues.iter().enumerate() {
        if u.desired.dim() != qc[k].nrows() {
            return Err(DamError::Dimension(format!("UE {k}: form and projector sizes differ")));
        }
    }
    let ues = raw
        .ues
        .iter()
        .enumerate()
        .map(|(k, u)| UeForms {
            desired: u.desired.sandwich(&qc[k]),
            isi: u.isi.sandwich(&qc[k]),
            iui: u
                .iui
                .iter()
                .enumerate()
                .map(|(kp, b)| b.as_ref().map(|b| b.sandwich(&qc[kp])))
                .collect(),
            sensing: u.sensing.sandwich(qs),
        })
        .collect();
    let eve = raw
        .eve
        .iter()
        .enumerate()
        .map(|(k, e)| EveIntercept {
            best_index: e.best_index,
            desired: e.desired.sandwich(&qc[k]),
            self_interference: e.self_interference.sandwich(&qc[k]),
        })
        .collect();
    Ok(QuadraticFormSet {
        ues,
        eve,
        eve_cross: raw.eve_cross.iter().enumerate().map(|(k, b)| b.sandwich(&qc[k])).collect(),
        eve_sensing: raw.eve_sensing.sandwich(qs),
    })
}

/// Sensing and per-UE power budgets.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSplit {
    pub sensing: f64,
    pub comm: Vec<f64>,
}

impl PowerSplit {
    /// `P/(K+1)` to every stream.
    pub fn equal(total: f64, num_ues: usize) -> Self {
        let share = total / (num_ues + 1) as f64;
        Self {
            sensing: share,
            comm: vec![share; num_ues],
        }
    }

    /// Given sensing power, the remainder split evenly across UEs.
    pub fn with_sensing(total: f64, sensing: f64, num_ues: usize) -> Result<Self> {
        if !(0.0..=total).contains(&sensing) {
            return Err(DamError::Config(format!(
                "sensing power {sensing} outside [0, {total}]"
            )));
        }
        Ok(Self {
            sensing,
            comm: vec![(total - sensing) / num_ues as f64; num_ues],
        })
    }

    pub fn total(&self) -> f64 {
        self.sensing + self.comm.iter().sum::<f64>()
    }
}

fn strongest_path<T: Real>(ch: &MultipathChannel<T>) -> usize {
    let mut best = 0;
    for (l, p) in ch.paths().iter().enumerate() {
        if p.gain.norm_sqr() > ch.paths()[best].gain.norm_sqr() {
            best = l;
        }
    }
    best
}

/// Projection left with less than `1e-8` of the original norm.
fn vanishes<T: Real>(projected: &CVector<T>, original: &CVector<T>) -> bool {
    !(projected.norm() > lit::<T>(1e-8) * original.norm())
}

fn sensing_beam<T: Real>(bank: &ProjectorBank<T>, ch: &ChannelSet<T>, cfg: &ArrayConfig<T>, power: f64) -> CVector<T> {
    let a = los_steering(ch, cfg);
    let v = &bank.sensing.matrix * &a;
    let nv = v.norm();
    if power <= 0.0 || vanishes(&v, &a) {
        return CVector::zeros(cfg.num_antennas);
    }
    v * creal(lit::<T>(power.sqrt()) / nv)
}

fn check_split<T: Real>(ch: &ChannelSet<T>, split: &PowerSplit) -> Result<()> {
    if split.comm.len() != ch.num_ues() {
        return Err(DamError::Dimension(format!(
            "{} UE budgets for {} UEs",
            split.comm.len(),
            ch.num_ues()
        )));
    }
    if split.sensing < 0.0 || split.comm.iter().any(|&p| p < 0.0) {
        return Err(DamError::Config("negative power budget".into()));
    }
    Ok(())
}

/// DAM-MRT: `b_{c,kl} ∝ Q_{c,kl} h_{c,kl}` with a common scale per UE, and
/// `b_s ∝ Q_bar_s a(phi_{s,1})`.
pub fn mrt_precoders<T: Real>(
    ch: &ChannelSet<T>,
    cfg: &ArrayConfig<T>,
    bank: &ProjectorBank<T>,
    split: &PowerSplit,
) -> Result<PrecoderSet<T>> {
    check_split(ch, split)?;
    let n = cfg.num_antennas;
    let comm = ch
        .ues
        .iter()
        .enumerate()
        .map(|(k, u)| {
            let v: Vec<CVector<T>> = u
                .spatial_vectors(cfg)
                .iter()
                .zip(&bank.comm[k])
                .enumerate()
                .map(|(l, (h, q))| {
                    let v = &q.matrix * h;
                    if vanishes(&v, h) {
                        warn!("UE {k} path {l}: projected channel vanishes, path dropped");
                        CVector::zeros(n)
                    } else {
                        v
                    }
                })
                .collect();
            let total = v.iter().fold(T::zero(), |a, x| a + x.norm_squared());
            if !(total > T::zero()) {
                warn!("UE {k}: every projected path vanishes, UE left silent");
                return vec![CVector::zeros(n); v.len()];
            }
            let scale = creal((lit::<T>(split.comm[k]) / total).sqrt());
            v.into_iter().map(|x| x * scale).collect()
        })
        .collect();
    PrecoderSet::new(sensing_beam(bank, ch, cfg, split.sensing), comm, &ch.ues)
}

/// Strongest-path baseline: each UE's whole budget on its largest-gain path
/// (the next strongest if that one is fully nulled).
pub fn sp_precoders<T: Real>(
    ch: &ChannelSet<T>,
    cfg: &ArrayConfig<T>,
    bank: &ProjectorBank<T>,
    split: &PowerSplit,
) -> Result<PrecoderSet<T>> {
    check_split(ch, split)?;
    let n = cfg.num_antennas;
    let comm = ch
        .ues
        .iter()
        .enumerate()
        .map(|(k, u)| {
            let hs = u.spatial_vectors(cfg);
            let mut order: Vec<usize> = (0..u.num_paths()).collect();
            order.sort_by(|&a, &b| {
                u.paths()[b]
                    .gain
                    .norm_sqr()
                    .partial_cmp(&u.paths()[a].gain.norm_sqr())
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            let mut out = vec![CVector::zeros(n); u.num_paths()];
            for &l in &order {
                let v = &bank.comm[k][l].matrix * &hs[l];
                let nv = v.norm();
                if !vanishes(&v, &hs[l]) {
                    out[l] = v * creal(lit::<T>(split.comm[k].sqrt()) / nv);
                    return out;
                }
                warn!("UE {k} path {l}: projected channel vanishes, trying the next strongest");
            }
            out
        })
        .collect();
    PrecoderSet::new(sensing_beam(bank, ch, cfg, split.sensing), comm, &ch.ues)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{complex_gaussian, LinkRole, NoiseVariances, PathKind};
    use crate::linalg::{hermitian_eigen_desc, projector_defects};
    use crate::secrecy::{sinr_eve, sinr_ue, ue_terms, worst_sse};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(n: usize) -> ArrayConfig<f64> {
        ArrayConfig::half_wavelength(n, 28e9, 128e6).unwrap()
    }

    fn rvec(rng: &mut ChaCha8Rng, n: usize) -> CVector<f64> {
        CVector::from_fn(n, |_, _| complex_gaussian(rng, 1.0))
    }

    fn random_set(c: &ArrayConfig<f64>, k: usize, l: usize, rng: &mut ChaCha8Rng) -> ChannelSet<f64> {
        ChannelSet {
            sensing: MultipathChannel::random(LinkRole::Sensing, 3, 6, c, rng).unwrap(),
            ues: (0..k).map(|i| MultipathChannel::random(LinkRole::Ue(i), l, 8, c, rng).unwrap()).collect(),
            eve: MultipathChannel::random(LinkRole::Eve, 3, 8, c, rng).unwrap(),
        }
    }

    fn single(role: LinkRole, gain: f64, angle: f64) -> MultipathChannel<f64> {
        MultipathChannel::from_taps(role, vec![(creal(gain), angle, 0, PathKind::LineOfSight)], 128e6).unwrap()
    }

    #[test]
    fn single_path_comm_projector_nulls_the_sensing_path() {
        let c = cfg(8);
        let ch = ChannelSet {
            sensing: single(LinkRole::Sensing, 1.0, 0.2),
            ues: vec![single(LinkRole::Ue(0), 1.0, -0.4)],
            eve: single(LinkRole::Eve, 1.0, 0.6),
        };
        let (q, nulled) = build_comm_projector(0, 0, &ch, &c).unwrap();
        assert_eq!(nulled, vec![NulledColumn::Sensing(0)]);
        let hs = &ch.sensing.spatial_vectors(&c)[0];
        assert!((&q.matrix * hs).norm() < 1e-10);
    }

    #[test]
    fn projectors_null_their_columns_and_have_the_right_rank() {
        let c = cfg(16);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            let ch = random_set(&c, 2, 3, &mut rng);
            let bank = ProjectorBank::build(&ch, &c).unwrap();
            let sens = ch.sensing.spatial_vectors(&c);
            let ues: Vec<_> = ch.ues.iter().map(|u| u.spatial_vectors(&c)).collect();
            let col = |nc: &NulledColumn| match *nc {
                NulledColumn::Sensing(l) => sens[l].clone(),
                NulledColumn::Ue { ue, path } => ues[ue][path].clone(),
            };
            let mut all: Vec<(&OrthProjector<f64>, &Vec<NulledColumn>)> = vec![(&bank.sensing, &bank.sensing_nulled)];
            for k in 0..2 {
                for l in 0..3 {
                    all.push((&bank.comm[k][l], &bank.comm_nulled[k][l]));
                    assert_eq!(bank.comm_nulled[k][l].len(), 3 + 6 - 1);
                }
            }
            for (q, nulled) in all {
                let (idem, herm) = projector_defects(&q.matrix);
                assert!(idem < 1e-10 && herm < 1e-10);
                for nc in nulled {
                    let h = col(nc);
                    for _ in 0..100 {
                        let x = rvec(&mut rng, 16);
                        assert!(h.dotc(&(&q.matrix * &x)).norm() < 1e-10 * h.norm() * x.norm());
                    }
                }
                // rank by spectral decomposition
                let (vals, _) = hermitian_eigen_desc(&q.matrix);
                let r = vals.iter().filter(|&&v| v > 0.5).count();
                let h = hstack(16, &nulled.iter().map(col).collect::<Vec<_>>());
                let (hv, _) = hermitian_eigen_desc(&(&h * h.adjoint()));
                let rank_h = hv.iter().filter(|&&v| v > 1e-10 * hv[0]).count();
                assert_eq!(r, 16 - rank_h);
            }
        }
    }

    #[test]
    fn zf_feasibility_reports_the_deficit() {
        let c = cfg(8);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        // L_s + sum L - 1 = 3 + 6 - 1 = 8 = N: infeasible by 1
        let ch = random_set(&c, 2, 3, &mut rng);
        assert!(matches!(
            build_comm_projector(0, 0, &ch, &c),
            Err(DamError::InfeasibleZeroForcing { columns: 8, antennas: 8, deficit: 1 })
        ));
        let c9 = cfg(9);
        let ch = random_set(&c9, 2, 3, &mut rng);
        assert!(build_comm_projector(0, 0, &ch, &c9).is_ok());
        // sensing: (L_s - 1) + sum L = 8
        assert!(build_sensing_projector(&ch, &c9).is_ok());
        assert!(matches!(
            build_sensing_projector(&random_set(&c, 2, 3, &mut rng), &c),
            Err(DamError::InfeasibleZeroForcing { deficit: 1, .. })
        ));
    }

    #[test]
    fn sensing_projector_keeps_the_los_direction() {
        let c = cfg(8);
        // UE steering orthogonal to the LoS: sin difference 2/N
        let phi_s = 0.0f64;
        let phi_u = (2.0f64 / 8.0).asin();
        let ch = ChannelSet {
            sensing: single(LinkRole::Sensing, 1.0, phi_s),
            ues: vec![single(LinkRole::Ue(0), 1.0, phi_u)],
            eve: single(LinkRole::Eve, 1.0, 0.6),
        };
        let (q, _) = build_sensing_projector(&ch, &c).unwrap();
        let a = array_response(phi_s, &c);
        assert!((&q.matrix * &a).norm() >= 1.0 - 1e-10);

        // UE on the LoS direction: suppressed
        let ch = ChannelSet {
            ues: vec![single(LinkRole::Ue(0), 0.3, phi_s)],
            ..ch
        };
        assert!(matches!(build_sensing_projector(&ch, &c), Err(DamError::LosSuppressed)));
    }

    #[test]
    fn sensing_projector_retains_the_los_component_outside_the_nulled_span() {
        let c = cfg(12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let ch = random_set(&c, 2, 2, &mut rng);
            let (q, nulled) = build_sensing_projector(&ch, &c).unwrap();
            let a = los_steering(&ch, &c);
            // subspace angle: residual of a after least squares on the nulled span
            let sens = ch.sensing.spatial_vectors(&c);
            let cols: Vec<CVector<f64>> = nulled
                .iter()
                .map(|nc| match *nc {
                    NulledColumn::Sensing(l) => sens[l].clone(),
                    NulledColumn::Ue { ue, path } => ch.ues[ue].spatial_vectors(&c)[path].clone(),
                })
                .collect();
            let h = hstack(12, &cols);
            let coef = (h.adjoint() * &h).lu().solve(&(h.adjoint() * &a)).unwrap();
            let resid = (&a - &h * coef).norm_squared();
            let aqa = a.dotc(&(&q.matrix * &a)).norm();
            assert!(aqa > 0.0);
            assert!((aqa - resid).abs() < 1e-8);
            for u in &ch.ues {
                for hu in u.spatial_vectors(&c) {
                    let b = rvec(&mut rng, 12);
                    assert!(hu.dotc(&(&q.matrix * &b)).norm() < 1e-10 * hu.norm() * b.norm());
                }
            }
        }
    }

    #[test]
    fn effective_forms_match_the_full_sinr_under_projection() {
        let c = cfg(16);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ch = random_set(&c, 2, 3, &mut rng);
        let noise = NoiseVariances::uniform(1e-3);
        let raw = QuadraticFormSet::from_channels(&ch, &c, &noise).unwrap();
        let bank = ProjectorBank::build(&ch, &c).unwrap();
        let eff = effective_forms(&bank, &raw).unwrap();
        let b = PrecoderSet::new(
            rvec(&mut rng, 16),
            (0..2).map(|_| (0..3).map(|_| rvec(&mut rng, 16)).collect()).collect(),
            &ch.ues,
        )
        .unwrap();
        let f = bank.apply(&b);
        for k in 0..2 {
            let g_full = sinr_ue(&raw, k, &f);
            let g_eff = sinr_ue(&eff, k, &b);
            let snr = eff.ues[k].desired.eval(&b.stacked(k));
            assert!((g_full / g_eff - 1.0).abs() < 1e-10);
            assert!((g_eff / snr - 1.0).abs() < 1e-10);
            let bb = b.stacked(k);
            assert!(eff.ues[k].isi.eval(&bb) < 1e-18 * bb.norm_squared());
            let ge_full = sinr_eve(&raw, k, &f);
            let ge_eff = sinr_eve(&eff, k, &b);
            assert!((ge_full / ge_eff - 1.0).abs() < 1e-10);
        }
        let zero = PrecoderSet::zeros(16, &ch.ues);
        for k in 0..2 {
            assert_eq!(sinr_ue(&eff, k, &zero), 0.0);
            let t = ue_terms(&eff, k, &zero);
            assert_eq!((t.desired, t.isi, t.iui, t.sensing), (0.0, 0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn zf_terms_vanish_relative_to_desired() {
        let c = cfg(30);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ch = random_set(&c, 3, 3, &mut rng);
        let raw = QuadraticFormSet::from_channels(&ch, &c, &NoiseVariances::uniform(1.0)).unwrap();
        let bank = ProjectorBank::build(&ch, &c).unwrap();
        let pre = mrt_precoders(&ch, &c, &bank, &PowerSplit::equal(1.0, 3)).unwrap();
        for k in 0..3 {
            let t = ue_terms(&raw, k, &pre);
            assert!(t.isi + t.iui + t.sensing < 1e-18 * t.desired, "{t:?}");
        }
    }

    #[test]
    fn mrt_examples() {
        let c = cfg(8);
        let ch = ChannelSet {
            sensing: single(LinkRole::Sensing, 1.0, 0.2),
            ues: vec![single(LinkRole::Ue(0), 0.5, -0.4)],
            eve: single(LinkRole::Eve, 1.0, 0.6),
        };
        let bank = ProjectorBank::build(&ch, &c).unwrap();
        let split = PowerSplit::equal(2.0, 1);
        let pre = mrt_precoders(&ch, &c, &bank, &split).unwrap();
        let h = &ch.ues[0].spatial_vectors(&c)[0];
        let qh = &bank.comm[0][0].matrix * h;
        let expect = &qh * creal(1.0f64.sqrt() / qh.norm());
        assert!((&pre.comm[0][0] - expect).norm() < 1e-12);
        assert!((pre.total_power() - 2.0).abs() < 1e-10);
        assert_eq!(sp_precoders(&ch, &c, &bank, &split).unwrap(), pre);
    }

    #[test]
    fn mrt_snr_closed_form_and_power_audit() {
        let c = cfg(20);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let ch = random_set(&c, 2, 3, &mut rng);
        let bank = ProjectorBank::build(&ch, &c).unwrap();
        let sigma2 = 1e-11;
        let raw = QuadraticFormSet::from_channels(&ch, &c, &NoiseVariances::uniform(sigma2)).unwrap();
        let eff = effective_forms(&bank, &raw).unwrap();
        let split = PowerSplit { sensing: 0.2, comm: vec![0.3, 0.5] };
        let pre = mrt_precoders(&ch, &c, &bank, &split).unwrap();
        assert!((pre.total_power() - 1.0).abs() < 1e-10);
        for k in 0..2 {
            let s: f64 = ch.ues[k]
                .spatial_vectors(&c)
                .iter()
                .zip(&bank.comm[k])
                .map(|(h, q)| (&q.matrix * h).norm_squared())
                .sum();
            let expect = split.comm[k] * s / sigma2;
            assert!((sinr_ue(&eff, k, &pre) / expect - 1.0).abs() < 1e-10);
            assert!((sinr_ue(&raw, k, &pre) / expect - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn sp_picks_the_strongest_path() {
        let c = cfg(8);
        let ue = MultipathChannel::from_taps(
            LinkRole::Ue(0),
            vec![
                (creal(1.0), -0.3, 0, PathKind::LineOfSight),
                (creal(2.0), 0.4, 2, PathKind::NonLineOfSight),
            ],
            128e6,
        )
        .unwrap();
        let ch = ChannelSet {
            sensing: single(LinkRole::Sensing, 1.0, 0.1),
            ues: vec![ue],
            eve: single(LinkRole::Eve, 1.0, 0.6),
        };
        let bank = ProjectorBank::build(&ch, &c).unwrap();
        let pre = sp_precoders(&ch, &c, &bank, &PowerSplit::equal(1.0, 1)).unwrap();
        assert_eq!(pre.comm[0][0].norm(), 0.0);
        assert!((pre.comm[0][1].norm_squared() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn zero_projected_channel_is_dropped_and_power_redistributed() {
        let c = cfg(6);
        // UE path 1 is collinear with the sensing path and gets nulled
        let ue = MultipathChannel::from_taps(
            LinkRole::Ue(0),
            vec![
                (creal(1.0), -0.5, 0, PathKind::LineOfSight),
                (creal(3.0), 0.1, 1, PathKind::NonLineOfSight),
            ],
            128e6,
        )
        .unwrap();
        let ch = ChannelSet {
            sensing: MultipathChannel::from_taps(
                LinkRole::Sensing,
                vec![
                    (creal(1.0), 0.6, 0, PathKind::LineOfSight),
                    (creal(0.5), 0.1, 2, PathKind::NonLineOfSight),
                ],
                128e6,
            )
            .unwrap(),
            ues: vec![ue],
            eve: single(LinkRole::Eve, 1.0, 0.6),
        };
        let bank = ProjectorBank::build(&ch, &c).unwrap();
        let split = PowerSplit::equal(1.0, 1);
        for pre in [
            mrt_precoders(&ch, &c, &bank, &split).unwrap(),
            sp_precoders(&ch, &c, &bank, &split).unwrap(),
        ] {
            assert!(pre.comm[0][1].norm() < 1e-6);
            assert!((pre.ue_power(0) - 0.5).abs() < 1e-10);
        }
    }

    #[test]
    fn mrt_beats_sp_on_most_multipath_seeds() {
        let c = cfg(30);
        let mut wins = 0;
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let ch = random_set(&c, 2, 3, &mut rng);
            let noise = NoiseVariances::uniform(1e-2);
            let raw = QuadraticFormSet::from_channels(&ch, &c, &noise).unwrap();
            let bank = ProjectorBank::build(&ch, &c).unwrap();
            let split = PowerSplit::equal(1.0, 2);
            let mrt = mrt_precoders(&ch, &c, &bank, &split).unwrap();
            let sp = sp_precoders(&ch, &c, &bank, &split).unwrap();
            let (a, _) = worst_sse(&raw, &mrt, 1000, 8).unwrap();
            let (b, _) = worst_sse(&raw, &sp, 1000, 8).unwrap();
            if a >= b {
                wins += 1;
            }
        }
        assert!(wins >= 90, "MRT >= SP on {wins}/100 seeds");
    }

    #[test]
    fn power_split_helpers() {
        let s = PowerSplit::equal(0.3, 2);
        assert!((s.total() - 0.3).abs() < 1e-15);
        assert!((s.sensing - 0.1).abs() < 1e-15);
        let s = PowerSplit::with_sensing(1.0, 0.4, 3).unwrap();
        assert!((s.comm[0] - 0.2).abs() < 1e-15);
        assert!(PowerSplit::with_sensing(1.0, 1.5, 3).is_err());
    }
}
