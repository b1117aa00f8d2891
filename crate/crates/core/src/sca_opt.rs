//! Max-min secrecy precoder design: CRB constraint algebra, SCA minorants,
//! convex subproblem assembly and the outer loop.
//!
//! The optimizer works in coordinates `b_bar_k = V_k c_k`, where `V_k` is an
//! orthonormal basis inside the range of the ZF projector. By default `V_k`
//! spans only the directions that any SINR term can see (the projected
//! desired channel and Eve's projected bins); components outside that span
//! only consume power, so the restriction loses nothing.

mod solver;

use std::io::Write;

use log::{debug, warn};
use nalgebra::{Complex, DMatrix, DVector};

pub use solver::{
    solve_subproblem, solve_with, Constraint, ConstraintKind, ConvexSubproblem, SolveStatus, SolverOptions,
    SubproblemSolution,
};

use crate::error::{DamError, Result};
use crate::linalg::{column_basis, creal, hstack, CMatrix, CVector, GramForm};
use crate::precoding::{mrt_precoders, PowerSplit, ProjectorBank};
use crate::scalar::{lit, to_f64, Real};
use crate::secrecy::QuadraticFormSet;
use crate::stage2_delay::{crb_delay, delay_information, EchoModel};
use crate::waveform::PrecoderSet;
use crate::{ArrayConfig, ChannelSet};

/// `(Gamma_2, G)` with `Gamma_2 = 1 / (2 |beta|^2 Gamma G)`, so that
/// `CRB <= Gamma` iff `|a^H f_s|^2 >= Gamma_2 sigma_a^2`.
pub fn crb_constraint_coeff<T: Real>(
    model: &EchoModel<T>,
    delay: T,
    amplitude: Complex<T>,
    threshold: T,
) -> Result<(T, T)> {
    if !(threshold > T::zero()) {
        return Err(DamError::Config("CRB threshold must be positive".into()));
    }
    let g = delay_information(model, delay)?;
    let b2 = amplitude.norm_sqr();
    if !(b2 > T::zero()) {
        return Err(DamError::DegenerateSensing("zero echo amplitude".into()));
    }
    Ok((T::one() / (lit::<T>(2.0) * b2 * threshold * g), g))
}

/// The sensing requirement `CRB(tau_1) <= Gamma` of one realization.
#[derive(Debug, Clone)]
pub struct CrbConstraint<T: Real> {
    pub model: EchoModel<T>,
    pub delay: T,
    pub amplitude: Complex<T>,
    pub noise_var: T,
    pub threshold: T,
    pub gamma2: T,
    pub information: T,
}

impl<T: Real> CrbConstraint<T> {
    pub fn new(model: EchoModel<T>, delay: T, amplitude: Complex<T>, noise_var: T, threshold: T) -> Result<Self> {
        let (gamma2, information) = crb_constraint_coeff(&model, delay, amplitude, threshold)?;
        Ok(Self {
            model,
            delay,
            amplitude,
            noise_var,
            threshold,
            gamma2,
            information,
        })
    }

    /// `Gamma_2 sigma_a^2`, the floor on `|a^H f_s|^2`.
    pub fn illumination_floor(&self) -> T {
        self.gamma2 * self.noise_var
    }

    pub fn steering(&self) -> &CVector<T> {
        &self.model.steering
    }

    /// `CRB(tau_1)` for a given sensing precoder.
    pub fn crb(&self, sensing: &CVector<T>) -> Result<T> {
        let mut m = self.model.clone();
        m.precoder = sensing.clone();
        crb_delay(&m, self.delay, self.amplitude, self.noise_var)
    }

    /// Least sensing power meeting the floor when beaming along `Q_s a`.
    pub fn min_sensing_power(&self, sensing_projector: &CMatrix<T>) -> T {
        let g = (sensing_projector * self.steering()).norm_squared();
        self.illumination_floor() / g
    }
}

/// `m(x) = 2 Re{x^H A x0} - x0^H A x0`, tight at `x0` and below `x^H A x`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMinorant<T: Real> {
    /// `A x0`
    pub gradient: CVector<T>,
    /// `x0^H A x0`
    pub constant: T,
}

impl<T: Real> AffineMinorant<T> {
    pub fn eval(&self, x: &CVector<T>) -> T {
        lit::<T>(2.0) * self.gradient.dotc(x).re - self.constant
    }
}

pub fn linearize_quadratic<T: Real>(a: &CMatrix<T>, x0: &CVector<T>) -> AffineMinorant<T> {
    let g = a * x0;
    AffineMinorant {
        constant: x0.dotc(&g).re,
        gradient: g,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ScaOptions {
    pub max_iters: usize,
    /// Stop once `|gamma^(n+1) - gamma^(n)|` falls below this.
    pub tol: f64,
    pub subproblem_tol: f64,
    /// Optimize only over the directions the SINR terms can see.
    pub reduce_subspace: bool,
}

impl Default for ScaOptions {
    fn default() -> Self {
        Self {
            max_iters: 50,
            tol: 1e-4,
            subproblem_tol: 1e-8,
            reduce_subspace: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    /// `sum ||f||^2 / P - 1` (non-positive when feasible).
    pub power_residual: f64,
    /// `1 - |a^H f_s|^2 / (Gamma_2 sigma_a^2)` (non-positive when feasible).
    pub crb_residual: f64,
    pub newton_steps: usize,
}

/// Iterate of the SCA loop.
#[derive(Debug, Clone)]
pub struct ScaState<T: Real> {
    /// `b_bar_{c,k}` (already inside the projector range, so `f = b`).
    pub comm: Vec<CVector<T>>,
    pub sensing: CVector<T>,
    pub t1: Vec<T>,
    pub t2: Vec<T>,
    pub t3: Vec<T>,
    pub q1: Vec<T>,
    pub q2: Vec<T>,
    pub q3: Vec<T>,
    /// `gamma^(0), gamma^(1), ...` of accepted iterates.
    pub history: Vec<T>,
    pub iteration: usize,
    pub converged: bool,
    pub records: Vec<IterationRecord>,
    coords: DVector<T>,
}

impl<T: Real> ScaState<T> {
    pub fn objective(&self) -> T {
        *self.history.last().expect("history starts with the initial objective")
    }

    /// Per-iteration `(n, gamma, residuals)` as CSV.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iteration,objective,power_residual,crb_residual,newton_steps")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{:.12e},{:.6e},{:.6e},{}",
                r.iteration, r.objective, r.power_residual, r.crb_residual, r.newton_steps
            )?;
        }
        Ok(())
    }
}

/// `[[Re F, -Im F], [Im F, Re F]]`, so that `x^H F F^H x = ||E^T [Re x; Im x]||^2`.
fn real_factor<T: Real>(f: &CMatrix<T>) -> DMatrix<T> {
    let (d, r) = f.shape();
    let mut e = DMatrix::zeros(2 * d, 2 * r);
    for i in 0..d {
        for j in 0..r {
            let z = f[(i, j)];
            e[(i, j)] = z.re;
            e[(i, r + j)] = -z.im;
            e[(d + i, j)] = z.im;
            e[(d + i, r + j)] = z.re;
        }
    }
    e
}

fn real_gram<T: Real>(g: &GramForm<T>) -> DMatrix<T> {
    let e = real_factor(&g.factor);
    &e * e.transpose()
}

fn reduced_form<T: Real>(g: &GramForm<T>, basis: &CMatrix<T>, power: T) -> DMatrix<T> {
    real_gram(&g.sandwich(basis).scaled(power))
}

fn sum_forms<T: Real>(a: &GramForm<T>, b: &GramForm<T>) -> GramForm<T> {
    let mut cols: Vec<CVector<T>> = a.factor.column_iter().map(|c| c.into_owned()).collect();
    cols.extend(b.factor.column_iter().map(|c| c.into_owned()));
    GramForm {
        factor: hstack(a.dim(), &cols),
    }
}

/// Problem data in optimizer coordinates.
#[derive(Debug, Clone)]
pub struct ScaProblem<T: Real> {
    pub power: T,
    pub crb: CrbConstraint<T>,
    bases: Vec<CMatrix<T>>,
    sensing_basis: CMatrix<T>,
    /// Real offsets of `u_k`, `u_s`, the slacks and `gamma`.
    offsets: Vec<usize>,
    sensing_offset: usize,
    slack_offset: usize,
    num_vars: usize,
    desired: Vec<DMatrix<T>>,
    eve_total: Vec<DMatrix<T>>,
    eve_interference: Vec<DMatrix<T>>,
    eve_cross: Vec<DMatrix<T>>,
    eve_sensing: DMatrix<T>,
    illumination: DMatrix<T>,
}

struct Terms<T> {
    desired: T,
    eve_total: T,
    eve_interference: T,
}

impl<T: Real> ScaProblem<T> {
    /// `forms` are the projected (effective) forms.
    pub fn new(
        forms: &QuadraticFormSet<T>,
        bank: &ProjectorBank<T>,
        crb: CrbConstraint<T>,
        power: T,
        reduce_subspace: bool,
    ) -> Result<Self> {
        if !(power > T::zero()) {
            return Err(DamError::Config("power budget must be positive".into()));
        }
        let k_count = forms.num_ues();
        if bank.comm_stacked.len() != k_count {
            return Err(DamError::Dimension("projector bank and forms disagree on K".into()));
        }
        let bases: Vec<CMatrix<T>> = (0..k_count)
            .map(|k| {
                if reduce_subspace {
                    let f = sum_forms(
                        &forms.ues[k].desired,
                        &sum_forms(&forms.eve[k].desired, &forms.eve[k].self_interference),
                    );
                    column_basis(&f.factor)
                } else {
                    column_basis(&bank.comm_stacked[k])
                }
            })
            .collect();
        let qa = &bank.sensing.matrix * crb.steering();
        let sensing_basis = if reduce_subspace {
            let mut cols = vec![qa];
            cols.extend(forms.eve_sensing.factor.column_iter().map(|c| c.into_owned()));
            column_basis(&hstack(bank.sensing.matrix.nrows(), &cols))
        } else {
            column_basis(&bank.sensing.matrix)
        };
        let mut offsets = Vec::with_capacity(k_count);
        let mut at = 0;
        for b in &bases {
            offsets.push(at);
            at += 2 * b.ncols();
        }
        let sensing_offset = at;
        at += 2 * sensing_basis.ncols();
        let slack_offset = at;
        let num_vars = at + 6 * k_count + 1;

        let desired = (0..k_count).map(|k| reduced_form(&forms.ues[k].desired, &bases[k], power)).collect();
        let eve_total = (0..k_count)
            .map(|k| {
                let own = sum_forms(&forms.eve[k].desired, &forms.eve[k].self_interference);
                reduced_form(&own, &bases[k], power)
            })
            .collect();
        let eve_interference = (0..k_count)
            .map(|k| reduced_form(&forms.eve[k].self_interference, &bases[k], power))
            .collect();
        let eve_cross = (0..k_count).map(|k| reduced_form(&forms.eve_cross[k], &bases[k], power)).collect();
        let eve_sensing = reduced_form(&forms.eve_sensing, &sensing_basis, power);
        let illum = GramForm::from_vectors(&[crb.steering().clone()], crb.steering().len(), T::one());
        let illumination = reduced_form(&illum, &sensing_basis, power);
        Ok(Self {
            power,
            crb,
            bases,
            sensing_basis,
            offsets,
            sensing_offset,
            slack_offset,
            num_vars,
            desired,
            eve_total,
            eve_interference,
            eve_cross,
            eve_sensing,
            illumination,
        })
    }

    pub fn num_ues(&self) -> usize {
        self.bases.len()
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    /// Complex optimization dimensions `(d_1, ..., d_K, d_s)`.
    pub fn dimensions(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self.bases.iter().map(|b| b.ncols()).collect();
        d.push(self.sensing_basis.ncols());
        d
    }

    fn block(&self, k: usize) -> (usize, usize) {
        (self.offsets[k], 2 * self.bases[k].ncols())
    }

    fn sensing_block(&self) -> (usize, usize) {
        (self.sensing_offset, 2 * self.sensing_basis.ncols())
    }

    /// Slack index: `which` = 0..6 for t1, t2, t3, q1, q2, q3.
    fn slack(&self, k: usize, which: usize) -> usize {
        self.slack_offset + 6 * k + which
    }

    fn gamma_index(&self) -> usize {
        self.num_vars - 1
    }

    fn quad(m: &DMatrix<T>, x: &DVector<T>, (o, d): (usize, usize)) -> T {
        if d == 0 {
            return T::zero();
        }
        let v = x.rows(o, d);
        (m * v).dot(&v)
    }

    /// Exact SINR-term values at `x`.
    fn terms(&self, x: &DVector<T>, k: usize) -> Terms<T> {
        let es = Self::quad(&self.eve_sensing, x, self.sensing_block());
        let cross = (0..self.num_ues())
            .filter(|&kp| kp != k)
            .fold(T::zero(), |a, kp| a + Self::quad(&self.eve_cross[kp], x, self.block(kp)));
        Terms {
            desired: Self::quad(&self.desired[k], x, self.block(k)),
            eve_total: Self::quad(&self.eve_total[k], x, self.block(k)) + cross + es,
            eve_interference: Self::quad(&self.eve_interference[k], x, self.block(k)) + cross + es,
        }
    }

    /// `min_k [log2(1 + gamma_k) - log2(1 + gamma_{e,k})]` written through
    /// the three slack quantities.
    pub fn objective_at(&self, x: &DVector<T>) -> T {
        (0..self.num_ues())
            .map(|k| {
                let t = self.terms(x, k);
                (T::one() + t.desired).log2() - (T::one() + t.eve_total).log2()
                    + (T::one() + t.eve_interference).log2()
            })
            .fold(lit(f64::INFINITY), |m: T, v| if v < m { v } else { m })
    }

    /// `sum ||u||^2`; the precoder blocks are contiguous from index 0.
    fn power_at(&self, x: &DVector<T>) -> T {
        let (so, sd) = self.sensing_block();
        x.rows(0, so + sd).norm_squared()
    }

    fn illumination_at(&self, x: &DVector<T>) -> T {
        Self::quad(&self.illumination, x, self.sensing_block())
    }

    /// `Gamma_2 sigma_a^2`; the illumination form already carries `P`, so
    /// `u^T I u = |a^H f_s|^2`.
    fn floor(&self) -> T {
        self.crb.illumination_floor()
    }

    /// Optimizer coordinates of a precoder set (components outside the
    /// bases are discarded).
    pub fn coordinates(&self, pre: &PrecoderSet<T>) -> DVector<T> {
        let mut x = DVector::zeros(self.num_vars);
        let s = creal(T::one() / self.power.sqrt());
        let mut put = |o: usize, c: CVector<T>| {
            let d = c.len();
            for i in 0..d {
                x[o + i] = c[i].re;
                x[o + d + i] = c[i].im;
            }
        };
        for k in 0..self.num_ues() {
            put(self.offsets[k], self.bases[k].adjoint() * pre.stacked(k) * s);
        }
        put(self.sensing_offset, self.sensing_basis.adjoint() * &pre.sensing * s);
        x
    }

    fn complex_block(x: &DVector<T>, (o, d): (usize, usize)) -> CVector<T> {
        let h = d / 2;
        CVector::from_fn(h, |i, _| Complex::new(x[o + i], x[o + h + i]))
    }

    /// `f = sqrt(P) V c` written into a copy of `template`.
    pub fn precoders(&self, x: &DVector<T>, template: &PrecoderSet<T>) -> PrecoderSet<T> {
        let mut out = template.clone();
        let s = creal(self.power.sqrt());
        for k in 0..self.num_ues() {
            let b = &self.bases[k] * Self::complex_block(x, self.block(k)) * s;
            out.set_stacked(k, &b);
        }
        out.sensing = &self.sensing_basis * Self::complex_block(x, self.sensing_block()) * s;
        out
    }

    /// Tight slacks at `x`.
    fn tight_slacks(&self, x: &mut DVector<T>) {
        let mut best = lit::<T>(f64::INFINITY);
        for k in 0..self.num_ues() {
            let t = self.terms(x, k);
            let (q1, q2, q3) = (T::one() + t.desired, T::one() + t.eve_total, T::one() + t.eve_interference);
            let vals = [q1.log2(), q2.log2(), q3.log2(), q1, q2, q3];
            for (w, v) in vals.iter().enumerate() {
                x[self.slack(k, w)] = *v;
            }
            let g = vals[0] - vals[1] + vals[2];
            if g < best {
                best = g;
            }
        }
        let gi = self.gamma_index();
        x[gi] = best;
    }

    fn state_at(&self, x: &DVector<T>, template: &PrecoderSet<T>) -> ScaState<T> {
        let mut x = x.clone();
        self.tight_slacks(&mut x);
        let pre = self.precoders(&x, template);
        let k = self.num_ues();
        let col = |w: usize| (0..k).map(|kk| x[self.slack(kk, w)]).collect::<Vec<T>>();
        ScaState {
            comm: (0..k).map(|kk| pre.stacked(kk)).collect(),
            sensing: pre.sensing.clone(),
            t1: col(0),
            t2: col(1),
            t3: col(2),
            q1: col(3),
            q2: col(4),
            q3: col(5),
            history: vec![x[self.gamma_index()]],
            iteration: 0,
            converged: false,
            records: Vec::new(),
            coords: x,
        }
    }

    fn record(&self, n: usize, x: &DVector<T>, steps: usize) -> IterationRecord {
        IterationRecord {
            iteration: n,
            objective: to_f64(self.objective_at(x)),
            power_residual: to_f64(self.power_at(x)) - 1.0,
            crb_residual: 1.0 - to_f64(self.illumination_at(x) / self.floor()),
            newton_steps: steps,
        }
    }
}

fn linear_row<T: Real>(n: usize) -> DVector<T> {
    DVector::zeros(n)
}

fn add_gradient<T: Real>(row: &mut DVector<T>, m: &DMatrix<T>, x0: &DVector<T>, (o, d): (usize, usize), sign: T) {
    if d == 0 {
        return;
    }
    let g = m * x0.rows(o, d) * (lit::<T>(2.0) * sign);
    let mut r = row.rows_mut(o, d);
    r += g;
}

/// Assembles the convex surrogate around `state` (constraints, minorants and
/// the log tangent; objective `max gamma`).
pub fn build_subproblem<T: Real>(state: &ScaState<T>, problem: &ScaProblem<T>) -> Result<ConvexSubproblem<T>> {
    let x0 = &state.coords;
    if x0.len() != problem.num_vars {
        return Err(DamError::Dimension(format!(
            "state has {} coordinates, problem {}",
            x0.len(),
            problem.num_vars
        )));
    }
    let n = problem.num_vars;
    let kk = problem.num_ues();
    let ln2: T = lit(std::f64::consts::LN_2);
    let mut cons = Vec::with_capacity(7 * kk + 2);
    for k in 0..kk {
        let [t1, t2, t3, q1, q2, q3] = [0, 1, 2, 3, 4, 5].map(|w| problem.slack(k, w));
        let t0 = problem.terms(x0, k);

        // gamma <= t1 - t2 + t3
        let mut a = linear_row::<T>(n);
        a[problem.gamma_index()] = T::one();
        a[t1] = -T::one();
        a[t2] = T::one();
        a[t3] = -T::one();
        cons.push(Constraint::linear("sse-epigraph", a, T::zero()));

        // q1 - 1 <= minorant of the desired power
        let mut a = linear_row::<T>(n);
        a[q1] = T::one();
        add_gradient(&mut a, &problem.desired[k], x0, problem.block(k), -T::one());
        cons.push(Constraint::linear("desired-minorant", a, T::one() - t0.desired));
        cons.push(Constraint::log_epigraph("desired-log", t1, q1));

        // Eve total power <= q2 - 1
        let mut p = DMatrix::zeros(n, n);
        let mut place = |m: &DMatrix<T>, (o, d): (usize, usize)| {
            if d > 0 {
                let mut v = p.view_mut((o, o), (d, d));
                v += m;
            }
        };
        place(&problem.eve_total[k], problem.block(k));
        for kp in (0..kk).filter(|&kp| kp != k) {
            place(&problem.eve_cross[kp], problem.block(kp));
        }
        place(&problem.eve_sensing, problem.sensing_block());
        let mut a = linear_row::<T>(n);
        a[q2] = -T::one();
        cons.push(Constraint::quadratic("eve-total", p, a, T::one()));

        // log2 q2 tangent at q2^(n) <= t2
        let q20 = T::one() + t0.eve_total;
        let mut a = linear_row::<T>(n);
        a[q2] = T::one() / (q20 * ln2);
        a[t2] = -T::one();
        cons.push(Constraint::linear("eve-log-tangent", a, T::one() / ln2 - q20.log2()));

        // q3 - 1 <= minorant of Eve's interference power
        let mut a = linear_row::<T>(n);
        a[q3] = T::one();
        add_gradient(&mut a, &problem.eve_interference[k], x0, problem.block(k), -T::one());
        for kp in (0..kk).filter(|&kp| kp != k) {
            add_gradient(&mut a, &problem.eve_cross[kp], x0, problem.block(kp), -T::one());
        }
        add_gradient(&mut a, &problem.eve_sensing, x0, problem.sensing_block(), -T::one());
        cons.push(Constraint::linear("eve-interference-minorant", a, T::one() - t0.eve_interference));
        cons.push(Constraint::log_epigraph("eve-interference-log", t3, q3));
    }
    // sum ||u||^2 <= 1
    let (so, sd) = problem.sensing_block();
    let mut p = DMatrix::zeros(n, n);
    for i in 0..so + sd {
        p[(i, i)] = T::one();
    }
    cons.push(Constraint::quadratic("power", p, linear_row(n), -T::one()));
    // floor <= minorant of |a^H f_s|^2
    let mut a = linear_row::<T>(n);
    add_gradient(&mut a, &problem.illumination, x0, problem.sensing_block(), -T::one());
    let illum0 = problem.illumination_at(x0);
    cons.push(Constraint::linear("crb", a, -problem.floor() - illum0));

    let mut objective = linear_row::<T>(n);
    objective[problem.gamma_index()] = T::one();
    Ok(ConvexSubproblem {
        num_vars: n,
        objective,
        constraints: cons,
        start: Some(interior_start(problem, x0)),
    })
}

/// The expansion point with slacks backed off from their tight values.
fn interior_start<T: Real>(problem: &ScaProblem<T>, x0: &DVector<T>) -> DVector<T> {
    let mut x = x0.clone();
    let eps: T = lit(1e-9);
    let ln2: T = lit(std::f64::consts::LN_2);
    let mut best = lit::<T>(f64::INFINITY);
    for k in 0..problem.num_ues() {
        let t = problem.terms(x0, k);
        let q1 = (T::one() + t.desired) * (T::one() - eps);
        let q20 = T::one() + t.eve_total;
        let q2 = q20 * (T::one() + eps);
        let q3 = (T::one() + t.eve_interference) * (T::one() - eps);
        let t1 = q1.log2() - eps;
        let t2 = q20.log2() + (q2 - q20) / (q20 * ln2) + eps;
        let t3 = q3.log2() - eps;
        for (w, v) in [t1, t2, t3, q1, q2, q3].iter().enumerate() {
            x[problem.slack(k, w)] = *v;
        }
        let g = t1 - t2 + t3;
        if g < best {
            best = g;
        }
    }
    let gi = problem.gamma_index();
    x[gi] = best - eps;
    x
}

/// Checks the original power and CRB constraints at `pre`.
fn check_start<T: Real>(problem: &ScaProblem<T>, pre: &PrecoderSet<T>) -> Result<()> {
    let p = to_f64(pre.total_power());
    let budget = to_f64(problem.power);
    if p > budget * (1.0 + 1e-8) {
        return Err(DamError::InfeasibleStart(format!(
            "initial precoders use {p:.4e} W of a {budget:.4e} W budget"
        )));
    }
    let illum = to_f64(problem.crb.steering().dotc(&pre.sensing).norm_sqr());
    let floor = to_f64(problem.crb.illumination_floor());
    if illum < floor * (1.0 - 1e-9) {
        return Err(DamError::InfeasibleStart(format!(
            "initial sensing illumination {illum:.4e} is below the CRB floor {floor:.4e}"
        )));
    }
    Ok(())
}

/// SCA on the max-min secrecy surrogate, starting from `init`.
pub fn sca_loop<T: Real>(
    problem: &ScaProblem<T>,
    init: &PrecoderSet<T>,
    opts: &ScaOptions,
) -> Result<(PrecoderSet<T>, ScaState<T>)> {
    check_start(problem, init)?;
    let mut x = problem.coordinates(init);
    // step inside the power ball when the start sits on its boundary
    let pw = problem.power_at(&x);
    let margin: T = lit(1e-7);
    if pw > T::one() - margin {
        let shrink = T::one() - margin;
        for k in 0..problem.num_ues() {
            let (o, d) = problem.block(k);
            let mut v = x.rows_mut(o, d);
            v *= shrink;
        }
    }
    let mut state = problem.state_at(&x, init);
    state.records.push(problem.record(0, &state.coords, 0));
    let sopts = SolverOptions {
        tol: opts.subproblem_tol,
        ..SolverOptions::default()
    };
    for n in 1..=opts.max_iters {
        let sp = build_subproblem(&state, problem)?;
        let sol = match solve_with(&sp, &sopts) {
            Ok(s) => s,
            Err(e) if n == 1 => {
                return Err(DamError::InfeasibleStart(format!(
                    "first convex subproblem failed ({e})"
                )))
            }
            Err(e) => {
                warn!("SCA iteration {n}: subproblem failed ({e}); keeping the last iterate");
                break;
            }
        };
        if sol.status == SolveStatus::MaxIter {
            debug!("SCA iteration {n}: subproblem hit its Newton budget (gap {:e})", to_f64(sol.gap));
        }
        let prev = state.objective();
        let cand = problem.objective_at(&sol.x);
        if !(cand >= prev) {
            // the surrogate cannot improve further within solver accuracy
            state.converged = true;
            break;
        }
        let mut next = problem.state_at(&sol.x, init);
        next.history = std::mem::take(&mut state.history);
        next.history.push(problem.objective_at(&next.coords));
        next.records = std::mem::take(&mut state.records);
        next.records.push(problem.record(n, &next.coords, sol.newton_steps));
        next.iteration = n;
        state = next;
        if (to_f64(state.objective()) - to_f64(prev)).abs() < opts.tol {
            state.converged = true;
            break;
        }
    }
    let pre = problem.precoders(&state.coords, init);
    Ok((pre, state))
}

impl<T: Real> ScaState<T> {
    /// Coordinates of this iterate in the problem it came from.
    pub fn coordinates(&self) -> &DVector<T> {
        &self.coords
    }
}

/// Power split of the warm start: the default equal split when it leaves a
/// 3 dB CRB margin, otherwise more sensing power (up to twice the minimum,
/// never more than halfway between the minimum and the budget).
pub fn warm_start_split(power: f64, min_sensing: f64, num_ues: usize) -> Result<PowerSplit> {
    if !(min_sensing <= power) {
        return Err(DamError::InfeasibleStart(format!(
            "the CRB threshold needs {min_sensing:.4e} W of sensing power but the budget is {power:.4e} W; \
             raise the power or relax the threshold"
        )));
    }
    let equal = power / (num_ues + 1) as f64;
    let ps = equal.max((2.0 * min_sensing).min(0.5 * (min_sensing + power)));
    PowerSplit::with_sensing(power, ps, num_ues)
}

/// MRT warm start honoring the CRB floor.
pub fn warm_start<T: Real>(
    ch: &ChannelSet<T>,
    cfg: &ArrayConfig<T>,
    bank: &ProjectorBank<T>,
    crb: &CrbConstraint<T>,
    power: f64,
) -> Result<(PrecoderSet<T>, PowerSplit)> {
    let min_s = to_f64(crb.min_sensing_power(&bank.sensing.matrix));
    let split = warm_start_split(power, min_s, ch.num_ues())?;
    Ok((mrt_precoders(ch, cfg, bank, &split)?, split))
}
