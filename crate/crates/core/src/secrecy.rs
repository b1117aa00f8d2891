//! Delay-difference grouping, closed-form SINR at the users and at Eve, and
//! the secrecy spectral efficiency.

use crate::channel::{ArrayConfig, ChannelSet, MultipathChannel, NoiseVariances};
use crate::error::{DamError, Result};
use crate::linalg::{vstack, CVector, GramForm};
use crate::scalar::{count, lit, Real};
use crate::waveform::PrecoderSet;

/// Observer paths grouped by delay difference `i = n_obs,l - n_src,l'` for
/// every source path `l'`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayGroupTable<T: Real> {
    pub delta_min: i64,
    pub delta_max: i64,
    num_antennas: usize,
    num_sources: usize,
    /// `slots[bin][l']`: observer path index occupying the bin, if any.
    slots: Vec<Vec<Option<usize>>>,
    observer_vectors: Vec<CVector<T>>,
}

impl<T: Real> DelayGroupTable<T> {
    /// Builds the table from observer delays/spatial vectors and source delays.
    pub fn from_parts(observer_taps: &[usize], observer_vectors: Vec<CVector<T>>, source_taps: &[usize]) -> Result<Self> {
        if observer_taps.is_empty() || source_taps.is_empty() {
            return Err(DamError::Config("delay grouping needs non-empty channels".into()));
        }
        if observer_taps.len() != observer_vectors.len() {
            return Err(DamError::Dimension("one spatial vector per observer path".into()));
        }
        for i in 0..observer_taps.len() {
            for j in i + 1..observer_taps.len() {
                if observer_taps[i] == observer_taps[j] {
                    return Err(DamError::UnresolvablePaths {
                        first: i,
                        second: j,
                        tap: observer_taps[i],
                    });
                }
            }
        }
        let omin = *observer_taps.iter().min().unwrap() as i64;
        let omax = *observer_taps.iter().max().unwrap() as i64;
        let smin = *source_taps.iter().min().unwrap() as i64;
        let smax = *source_taps.iter().max().unwrap() as i64;
        let (delta_min, delta_max) = (omin - smax, omax - smin);
        let span = (delta_max - delta_min + 1) as usize;
        let mut slots = vec![vec![None; source_taps.len()]; span];
        for (l, &no) in observer_taps.iter().enumerate() {
            for (lp, &ns) in source_taps.iter().enumerate() {
                let bin = (no as i64 - ns as i64 - delta_min) as usize;
                slots[bin][lp] = Some(l);
            }
        }
        let num_antennas = observer_vectors[0].len();
        Ok(Self {
            delta_min,
            delta_max,
            num_antennas,
            num_sources: source_taps.len(),
            slots,
            observer_vectors,
        })
    }

    /// Number of bins, `delta_max - delta_min + 1`.
    pub fn span(&self) -> usize {
        self.slots.len()
    }

    pub fn num_sources(&self) -> usize {
        self.num_sources
    }

    pub fn bins(&self) -> std::ops::RangeInclusive<i64> {
        self.delta_min..=self.delta_max
    }

    /// Observer path in bin `i` for source path `l'`.
    pub fn occupant(&self, i: i64, source_path: usize) -> Option<usize> {
        if i < self.delta_min || i > self.delta_max {
            return None;
        }
        self.slots[(i - self.delta_min) as usize][source_path]
    }

    /// `g_{., l'}[i]`
    pub fn group(&self, i: i64, source_path: usize) -> CVector<T> {
        match self.occupant(i, source_path) {
            Some(l) => self.observer_vectors[l].clone(),
            None => CVector::zeros(self.num_antennas),
        }
    }

    /// `g_bar[i] = [g_1[i]; ...; g_L'[i]]`
    pub fn stacked(&self, i: i64) -> CVector<T> {
        let parts: Vec<CVector<T>> = (0..self.num_sources).map(|lp| self.group(i, lp)).collect();
        vstack(&parts)
    }

    /// `sum_l' ||g_l'[i]||^2`
    pub fn bin_power(&self, i: i64) -> T {
        (0..self.num_sources)
            .filter_map(|lp| self.occupant(i, lp))
            .fold(T::zero(), |a, l| a + self.observer_vectors[l].norm_squared())
    }

    /// `sum_{i in bins} g_bar[i] g_bar[i]^H / sigma^2`, skipping `exclude`.
    pub fn gram(&self, exclude: Option<i64>, noise_var: T) -> GramForm<T> {
        let cols: Vec<CVector<T>> = self.bins().filter(|&i| Some(i) != exclude).map(|i| self.stacked(i)).collect();
        GramForm::from_vectors(&cols, self.num_sources * self.num_antennas, T::one() / noise_var)
    }
}

/// Table for an observer channel receiving a source UE's precoded paths.
pub fn build_group_table<T: Real>(
    observer: &MultipathChannel<T>,
    source: &MultipathChannel<T>,
    cfg: &ArrayConfig<T>,
) -> Result<DelayGroupTable<T>> {
    DelayGroupTable::from_parts(&observer.taps(), observer.spatial_vectors(cfg), &source.taps())
}

/// `i* = argmax_i sum_l' ||g_{e,kl'}[i]||^2`, ties toward the smallest `i`.
pub fn eve_best_index<T: Real>(table: &DelayGroupTable<T>) -> i64 {
    let mut best = table.delta_min;
    let mut best_p = table.bin_power(best);
    for i in table.bins().skip(1) {
        let p = table.bin_power(i);
        if p > best_p {
            best = i;
            best_p = p;
        }
    }
    best
}

/// SINR matrices seen by UE k.
#[derive(Debug, Clone, PartialEq)]
pub struct UeForms<T: Real> {
    /// `R_{c,k} = h_bar h_bar^H / sigma_k^2`
    pub desired: GramForm<T>,
    /// `A_{k,k}`, every bin except `i = 0`.
    pub isi: GramForm<T>,
    /// `B_{k,k'}` for `k' != k`; `None` at `k' = k`.
    pub iui: Vec<Option<GramForm<T>>>,
    /// `B_{s,k} = H_{c,k} H_{c,k}^H / sigma_k^2`
    pub sensing: GramForm<T>,
}

/// Eve's interception of UE k.
#[derive(Debug, Clone, PartialEq)]
pub struct EveIntercept<T: Real> {
    pub best_index: i64,
    /// `R_{e,k}`, bin `i*` only.
    pub desired: GramForm<T>,
    /// `A_{e,k}`, every bin except `i*`.
    pub self_interference: GramForm<T>,
}

/// All SINR matrices of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticFormSet<T: Real> {
    pub ues: Vec<UeForms<T>>,
    pub eve: Vec<EveIntercept<T>>,
    /// `B_{e,k'}`, all bins of Eve's table for UE k'.
    pub eve_cross: Vec<GramForm<T>>,
    /// `B_{es} = H_e H_e^H / sigma_e^2`
    pub eve_sensing: GramForm<T>,
}

/// Every delay-group table of a realization: `ue[k][k']` and `eve[k']`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupTables<T: Real> {
    pub ue: Vec<Vec<DelayGroupTable<T>>>,
    pub eve: Vec<DelayGroupTable<T>>,
}

impl<T: Real> GroupTables<T> {
    pub fn build(ch: &ChannelSet<T>, cfg: &ArrayConfig<T>) -> Result<Self> {
        let mut ue = Vec::with_capacity(ch.num_ues());
        for obs in &ch.ues {
            let mut row = Vec::with_capacity(ch.num_ues());
            for src in &ch.ues {
                row.push(build_group_table(obs, src, cfg)?);
            }
            ue.push(row);
        }
        let eve = ch
            .ues
            .iter()
            .map(|src| build_group_table(&ch.eve, src, cfg))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { ue, eve })
    }
}

fn gram_of<T: Real>(vectors: &[CVector<T>], noise_var: T) -> GramForm<T> {
    GramForm::from_vectors(vectors, vectors[0].len(), T::one() / noise_var)
}

impl<T: Real> QuadraticFormSet<T> {
    pub fn build(tables: &GroupTables<T>, ch: &ChannelSet<T>, cfg: &ArrayConfig<T>, noise: &NoiseVariances) -> Self {
        let (sk, se): (T, T) = (lit(noise.ue), lit(noise.eve));
        let k_count = ch.num_ues();
        let ues = (0..k_count)
            .map(|k| {
                let own = &tables.ue[k][k];
                let hbar = own.stacked(0);
                UeForms {
                    desired: GramForm::from_vectors(&[hbar.clone()], hbar.len(), T::one() / sk),
                    isi: own.gram(Some(0), sk),
                    iui: (0..k_count)
                        .map(|kp| (kp != k).then(|| tables.ue[k][kp].gram(None, sk)))
                        .collect(),
                    sensing: gram_of(&ch.ues[k].spatial_vectors(cfg), sk),
                }
            })
            .collect();
        let eve = tables
            .eve
            .iter()
            .map(|t| {
                let best = eve_best_index(t);
                let g = t.stacked(best);
                EveIntercept {
                    best_index: best,
                    desired: GramForm::from_vectors(&[g.clone()], g.len(), T::one() / se),
                    self_interference: t.gram(Some(best), se),
                }
            })
            .collect();
        Self {
            ues,
            eve,
            eve_cross: tables.eve.iter().map(|t| t.gram(None, se)).collect(),
            eve_sensing: gram_of(&ch.eve.spatial_vectors(cfg), se),
        }
    }

    /// Tables and forms in one call.
    pub fn from_channels(ch: &ChannelSet<T>, cfg: &ArrayConfig<T>, noise: &NoiseVariances) -> Result<Self> {
        let tables = GroupTables::build(ch, cfg)?;
        Ok(Self::build(&tables, ch, cfg, noise))
    }

    pub fn num_ues(&self) -> usize {
        self.ues.len()
    }
}

/// Noise-normalized powers of the four SINR terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrTerms<T: Real> {
    pub desired: T,
    /// Own-stream interference (ISI at a UE, off-`i*` bins at Eve).
    pub isi: T,
    pub iui: T,
    pub sensing: T,
}

impl<T: Real> SinrTerms<T> {
    pub fn sinr(&self) -> T {
        self.desired / (self.isi + self.iui + self.sensing + T::one())
    }
}

pub fn ue_terms<T: Real>(forms: &QuadraticFormSet<T>, k: usize, pre: &PrecoderSet<T>) -> SinrTerms<T> {
    let f = &forms.ues[k];
    let fk = pre.stacked(k);
    let iui = f
        .iui
        .iter()
        .enumerate()
        .filter_map(|(kp, b)| b.as_ref().map(|b| b.eval(&pre.stacked(kp))))
        .fold(T::zero(), |a, v| a + v);
    SinrTerms {
        desired: f.desired.eval(&fk),
        isi: f.isi.eval(&fk),
        iui,
        sensing: f.sensing.eval(&pre.sensing),
    }
}

pub fn eve_terms<T: Real>(forms: &QuadraticFormSet<T>, k: usize, pre: &PrecoderSet<T>) -> SinrTerms<T> {
    let e = &forms.eve[k];
    let fk = pre.stacked(k);
    let iui = (0..forms.num_ues())
        .filter(|&kp| kp != k)
        .fold(T::zero(), |a, kp| a + forms.eve_cross[kp].eval(&pre.stacked(kp)));
    SinrTerms {
        desired: e.desired.eval(&fk),
        isi: e.self_interference.eval(&fk),
        iui,
        sensing: forms.eve_sensing.eval(&pre.sensing),
    }
}

/// `gamma_k`
pub fn sinr_ue<T: Real>(forms: &QuadraticFormSet<T>, k: usize, pre: &PrecoderSet<T>) -> T {
    ue_terms(forms, k, pre).sinr()
}

/// `gamma_{e,k}`
pub fn sinr_eve<T: Real>(forms: &QuadraticFormSet<T>, k: usize, pre: &PrecoderSet<T>) -> T {
    eve_terms(forms, k, pre).sinr()
}

/// `(n_c - 2 n_Bmax) / n_c`
pub fn guard_factor<T: Real>(coherence: usize, max_delay: usize) -> Result<T> {
    if coherence <= 2 * max_delay {
        return Err(DamError::Config(format!(
            "coherence block of {coherence} symbols does not exceed twice the delay spread {max_delay}"
        )));
    }
    Ok(count::<T>(coherence - 2 * max_delay) / count::<T>(coherence))
}

/// `((n_c - 2 n_Bmax)/n_c) [log2(1 + gamma_k) - log2(1 + gamma_e)]^+`
pub fn sse<T: Real>(gamma_ue: T, gamma_eve: T, coherence: usize, max_delay: usize) -> Result<T> {
    let g = guard_factor::<T>(coherence, max_delay)?;
    let d = (T::one() + gamma_ue).log2() - (T::one() + gamma_eve).log2();
    Ok(if d > T::zero() { g * d } else { T::zero() })
}

/// Per-UE SSE and the worst one.
pub fn worst_sse<T: Real>(
    forms: &QuadraticFormSet<T>,
    pre: &PrecoderSet<T>,
    coherence: usize,
    max_delay: usize,
) -> Result<(T, Vec<T>)> {
    let per: Vec<T> = (0..forms.num_ues())
        .map(|k| sse(sinr_ue(forms, k, pre), sinr_eve(forms, k, pre), coherence, max_delay))
        .collect::<Result<_>>()?;
    let worst = per.iter().cloned().fold(None, |m: Option<T>, v| Some(m.map_or(v, |m| if v < m { v } else { m })));
    Ok((worst.unwrap_or(T::zero()), per))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{complex_gaussian, LinkRole, PathKind};
    use crate::linalg::{creal, fro};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(n: usize) -> ArrayConfig<f64> {
        ArrayConfig::half_wavelength(n, 28e9, 128e6).unwrap()
    }

    fn rvec(rng: &mut ChaCha8Rng, n: usize) -> CVector<f64> {
        CVector::from_fn(n, |_, _| complex_gaussian(rng, 1.0))
    }

    #[test]
    fn table_bins_by_direct_subtraction() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h0 = rvec(&mut rng, 3);
        let h2 = rvec(&mut rng, 3);
        let t = DelayGroupTable::from_parts(&[0, 2], vec![h0.clone(), h2.clone()], &[1]).unwrap();
        assert_eq!((t.delta_min, t.delta_max, t.span()), (-1, 1, 3));
        assert_eq!(t.group(-1, 0), h0);
        assert_eq!(t.group(1, 0), h2);
        assert_eq!(t.group(0, 0), CVector::zeros(3));

        let single = DelayGroupTable::from_parts(&[0], vec![h0.clone()], &[0]).unwrap();
        assert_eq!(single.span(), 1);
        assert_eq!(single.group(0, 0), h0);
    }

    #[test]
    fn table_rejects_colliding_observer_paths() {
        let v = vec![CVector::<f64>::zeros(2), CVector::zeros(2)];
        assert!(matches!(
            DelayGroupTable::from_parts(&[3, 3], v, &[0]),
            Err(DamError::UnresolvablePaths { first: 0, second: 1, tap: 3 })
        ));
    }

    #[test]
    fn each_observer_path_lands_in_exactly_one_bin_per_source_path() {
        let c = cfg(4);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let obs = MultipathChannel::random(LinkRole::Eve, 4, 8, &c, &mut rng).unwrap();
            let src = MultipathChannel::random(LinkRole::Ue(0), 3, 8, &c, &mut rng).unwrap();
            let t = build_group_table(&obs, &src, &c).unwrap();
            for lp in 0..3 {
                let mut seen = vec![0; 4];
                for i in t.bins() {
                    if let Some(l) = t.occupant(i, lp) {
                        seen[l] += 1;
                        assert_eq!(i, obs.paths()[l].tap as i64 - src.paths()[lp].tap as i64);
                    }
                }
                assert!(seen.iter().all(|&s| s == 1));
            }
        }
    }

    #[test]
    fn best_index_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = rvec(&mut rng, 2);
        let t = DelayGroupTable::from_parts(&[4], vec![h], &[1]).unwrap();
        assert_eq!(eve_best_index(&t), 3);
        // powers 0.1, 0.7, 0.2 at bins -1, 0, 1
        let v = |p: f64| CVector::from_element(1, creal(p.sqrt()));
        let t = DelayGroupTable::from_parts(&[0, 1, 2], vec![v(0.1), v(0.7), v(0.2)], &[1]).unwrap();
        assert_eq!(eve_best_index(&t), 0);
        // exhaustive scan on random instances
        let c = cfg(3);
        for _ in 0..50 {
            let obs = MultipathChannel::random(LinkRole::Eve, 3, 6, &c, &mut rng).unwrap();
            let src = MultipathChannel::random(LinkRole::Ue(0), 3, 6, &c, &mut rng).unwrap();
            let t = build_group_table(&obs, &src, &c).unwrap();
            let mut best = (f64::NEG_INFINITY, 0);
            for i in t.bins() {
                let p: f64 = (0..3).map(|lp| t.group(i, lp).norm_squared()).sum();
                if p > best.0 {
                    best = (p, i);
                }
            }
            assert_eq!(eve_best_index(&t), best.1);
        }
    }

    fn set(c: &ArrayConfig<f64>, k: usize, l: usize, rng: &mut ChaCha8Rng) -> ChannelSet<f64> {
        ChannelSet {
            sensing: MultipathChannel::random(LinkRole::Sensing, 2, 5, c, rng).unwrap(),
            ues: (0..k).map(|i| MultipathChannel::random(LinkRole::Ue(i), l, 6, c, rng).unwrap()).collect(),
            eve: MultipathChannel::random(LinkRole::Eve, 3, 6, c, rng).unwrap(),
        }
    }

    #[test]
    fn matched_single_path_snr() {
        let c = cfg(4);
        let ch = ChannelSet {
            sensing: MultipathChannel::from_taps(LinkRole::Sensing, vec![(creal(1.0), 0.3, 0, PathKind::LineOfSight)], 128e6).unwrap(),
            ues: vec![MultipathChannel::from_taps(LinkRole::Ue(0), vec![(creal(0.7), -0.2, 0, PathKind::LineOfSight)], 128e6).unwrap()],
            eve: MultipathChannel::from_taps(LinkRole::Eve, vec![(creal(0.1), 0.5, 0, PathKind::LineOfSight)], 128e6).unwrap(),
        };
        let noise = NoiseVariances::uniform(0.01);
        let forms = QuadraticFormSet::from_channels(&ch, &c, &noise).unwrap();
        let h = ch.ues[0].spatial_vectors(&c)[0].clone();
        let p: f64 = 2.0;
        let f = h.clone() * creal(p.sqrt() / h.norm());
        let pre = PrecoderSet::new(CVector::zeros(4), vec![vec![f]], &ch.ues).unwrap();
        let g = sinr_ue(&forms, 0, &pre);
        assert!((g / (p * h.norm_squared() / 0.01) - 1.0).abs() < 1e-12);
        let zero = PrecoderSet::zeros(4, &ch.ues);
        assert_eq!(sinr_ue(&forms, 0, &zero), 0.0);
    }

    #[test]
    fn eve_on_the_user_channel_sees_the_user_sinr() {
        let c = cfg(4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut ch = set(&c, 1, 3, &mut rng);
        ch.eve = ch.ues[0].clone();
        let forms = QuadraticFormSet::from_channels(&ch, &c, &NoiseVariances::uniform(0.3)).unwrap();
        let pre = PrecoderSet::new(
            CVector::zeros(4),
            vec![(0..3).map(|_| rvec(&mut rng, 4)).collect()],
            &ch.ues,
        )
        .unwrap();
        assert_eq!(forms.eve[0].best_index, 0);
        assert!((sinr_eve(&forms, 0, &pre) / sinr_ue(&forms, 0, &pre) - 1.0).abs() < 1e-12);
        // and with Eve silenced
        ch.eve = MultipathChannel::from_taps(LinkRole::Eve, vec![(creal(0.0), 0.1, 0, PathKind::LineOfSight)], 128e6).unwrap();
        let forms = QuadraticFormSet::from_channels(&ch, &c, &NoiseVariances::uniform(0.3)).unwrap();
        assert_eq!(sinr_eve(&forms, 0, &pre), 0.0);
    }

    #[test]
    fn forms_are_hermitian_psd_with_expected_dimensions() {
        let c = cfg(3);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let ch = set(&c, 3, 2, &mut rng);
        let forms = QuadraticFormSet::from_channels(&ch, &c, &NoiseVariances::uniform(0.5)).unwrap();
        let mut all: Vec<&GramForm<f64>> = vec![&forms.eve_sensing];
        for u in &forms.ues {
            all.extend([&u.desired, &u.isi, &u.sensing]);
            all.extend(u.iui.iter().flatten());
            assert_eq!(u.desired.dim(), 6);
            assert_eq!(u.sensing.dim(), 3);
        }
        for e in &forms.eve {
            all.extend([&e.desired, &e.self_interference]);
        }
        all.extend(forms.eve_cross.iter());
        for g in all {
            let m = &g.matrix();
            assert!(fro(&(m - m.adjoint())) < 1e-12 * fro(m).max(1.0));
            let (vals, _) = crate::linalg::hermitian_eigen_desc(m);
            assert!(*vals.last().unwrap() > -1e-10 * vals[0].abs().max(1.0));
        }
    }

    #[test]
    fn scaling_precoders_scales_comm_terms_only() {
        let c = cfg(4);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ch = set(&c, 2, 3, &mut rng);
        let forms = QuadraticFormSet::from_channels(&ch, &c, &NoiseVariances::uniform(0.2)).unwrap();
        let comm: Vec<Vec<CVector<f64>>> = (0..2).map(|_| (0..3).map(|_| rvec(&mut rng, 4)).collect()).collect();
        let pre = PrecoderSet::new(rvec(&mut rng, 4), comm.clone(), &ch.ues).unwrap();
        let s = 1.7;
        let scaled = PrecoderSet::new(
            pre.sensing.clone(),
            comm.iter().map(|v| v.iter().map(|f| f * creal(s)).collect()).collect(),
            &ch.ues,
        )
        .unwrap();
        for k in 0..2 {
            let (a, b) = (ue_terms(&forms, k, &pre), ue_terms(&forms, k, &scaled));
            assert!((b.desired / a.desired - s * s).abs() < 1e-10);
            assert!((b.isi / a.isi - s * s).abs() < 1e-10);
            assert!((b.iui / a.iui - s * s).abs() < 1e-10);
            assert!((b.sensing - a.sensing).abs() < 1e-12 * a.sensing);
        }
    }

    #[test]
    fn sse_examples() {
        assert_eq!(sse(2.0, 2.0, 100, 10).unwrap(), 0.0);
        assert!((sse(3.0f64, 1.0, 100, 0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(sse(1.0, 3.0, 100, 10).unwrap(), 0.0);
        assert!((sse(3.0f64, 1.0, 100, 10).unwrap() - 0.8).abs() < 1e-15);
        assert!(matches!(sse(3.0f64, 1.0, 20, 10), Err(DamError::Config(_))));
    }

    #[test]
    fn sse_is_monotone_on_a_grid() {
        let grid: Vec<f64> = (0..40).map(|i| 0.25 * i as f64).collect();
        for &ge in &grid {
            for w in grid.windows(2) {
                assert!(sse(w[1], ge, 500, 10).unwrap() >= sse(w[0], ge, 500, 10).unwrap());
                assert!(sse(ge, w[1], 500, 10).unwrap() <= sse(ge, w[0], 500, 10).unwrap());
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let (a, b): (f64, f64) = (rng.gen_range(0.0..50.0), rng.gen_range(0.0..50.0));
            assert!(sse(a, b, 300, 5).unwrap() >= 0.0);
        }
    }
}
