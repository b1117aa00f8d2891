//! Log-barrier interior-point method for linear-objective problems with
//! linear, convex quadratic and `t <= log2 q` constraints.

use nalgebra::{DMatrix, DVector};

use crate::error::{DamError, Result};
use crate::scalar::{lit, to_f64, Real};

#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintKind<T: Real> {
    /// `a^T x <= b`
    Linear { a: DVector<T>, b: T },
    /// `x^T P x + a^T x + r <= 0`, `P` symmetric PSD.
    Quadratic { p: DMatrix<T>, a: DVector<T>, r: T },
    /// `x_t <= log2 x_q` (minus `x_shift` when set).
    LogEpigraph { t: usize, q: usize, shift: Option<usize> },
}

/// One constraint `g(x) <= 0` tagged with its family name.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<T: Real> {
    pub family: String,
    pub kind: ConstraintKind<T>,
}

impl<T: Real> Constraint<T> {
    pub fn linear(family: impl Into<String>, a: DVector<T>, b: T) -> Self {
        Self {
            family: family.into(),
            kind: ConstraintKind::Linear { a, b },
        }
    }

    pub fn quadratic(family: impl Into<String>, p: DMatrix<T>, a: DVector<T>, r: T) -> Self {
        Self {
            family: family.into(),
            kind: ConstraintKind::Quadratic { p, a, r },
        }
    }

    pub fn log_epigraph(family: impl Into<String>, t: usize, q: usize) -> Self {
        Self {
            family: family.into(),
            kind: ConstraintKind::LogEpigraph { t, q, shift: None },
        }
    }

    /// `g(x)`; `+inf` outside the logarithm's domain.
    pub fn value(&self, x: &DVector<T>) -> T {
        match &self.kind {
            ConstraintKind::Linear { a, b } => a.dot(x) - *b,
            ConstraintKind::Quadratic { p, a, r } => (p * x).dot(x) + a.dot(x) + *r,
            ConstraintKind::LogEpigraph { t, q, shift } => {
                if !(x[*q] > T::zero()) {
                    return lit(f64::INFINITY);
                }
                let s = shift.map_or(T::zero(), |i| x[i]);
                x[*t] - x[*q].log2() - s
            }
        }
    }

    /// Adds this constraint's barrier gradient and Hessian at `x` (where
    /// `g(x) < 0`).
    fn accumulate_barrier(&self, x: &DVector<T>, g: T, grad: &mut DVector<T>, hess: &mut DMatrix<T>) {
        let n = x.len();
        let inv = T::one() / (-g);
        let inv2 = inv * inv;
        match &self.kind {
            ConstraintKind::Linear { a, .. } => {
                grad.axpy(inv, a, T::one());
                hess.ger(inv2, a, a, T::one());
            }
            ConstraintKind::Quadratic { p, a, .. } => {
                let dg = p * x * lit::<T>(2.0) + a;
                grad.axpy(inv, &dg, T::one());
                hess.ger(inv2, &dg, &dg, T::one());
                *hess += p * (lit::<T>(2.0) * inv);
            }
            ConstraintKind::LogEpigraph { t, q, shift } => {
                let ln2: T = lit(std::f64::consts::LN_2);
                let xq = x[*q];
                let mut dg = DVector::zeros(n);
                dg[*t] = T::one();
                dg[*q] = -T::one() / (xq * ln2);
                if let Some(s) = shift {
                    dg[*s] = -T::one();
                }
                grad.axpy(inv, &dg, T::one());
                hess.ger(inv2, &dg, &dg, T::one());
                hess[(*q, *q)] += inv / (xq * xq * ln2);
            }
        }
    }

    /// Same constraint on `[x; s]` relaxed to `g(x) - s <= 0`.
    fn relaxed(&self, n: usize) -> Self {
        let pad = |a: &DVector<T>| {
            let mut v = DVector::zeros(n + 1);
            v.rows_mut(0, n).copy_from(a);
            v[n] = -T::one();
            v
        };
        let kind = match &self.kind {
            ConstraintKind::Linear { a, b } => ConstraintKind::Linear { a: pad(a), b: *b },
            ConstraintKind::Quadratic { p, a, r } => {
                let mut pp = DMatrix::zeros(n + 1, n + 1);
                pp.view_mut((0, 0), (n, n)).copy_from(p);
                ConstraintKind::Quadratic { p: pp, a: pad(a), r: *r }
            }
            ConstraintKind::LogEpigraph { t, q, .. } => ConstraintKind::LogEpigraph {
                t: *t,
                q: *q,
                shift: Some(n),
            },
        };
        Self {
            family: self.family.clone(),
            kind,
        }
    }

    fn dim(&self) -> Option<usize> {
        match &self.kind {
            ConstraintKind::Linear { a, .. } => Some(a.len()),
            ConstraintKind::Quadratic { p, a, .. } => {
                (p.nrows() == a.len() && p.ncols() == a.len()).then_some(a.len())
            }
            ConstraintKind::LogEpigraph { .. } => None,
        }
    }
}

/// `maximize c^T x` subject to the constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexSubproblem<T: Real> {
    pub num_vars: usize,
    pub objective: DVector<T>,
    pub constraints: Vec<Constraint<T>>,
    /// Optional starting point; used directly when strictly feasible.
    pub start: Option<DVector<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSolution<T: Real> {
    pub x: DVector<T>,
    pub objective: T,
    pub status: SolveStatus,
    /// Duality gap bound `m / t` at exit.
    pub gap: T,
    pub newton_steps: usize,
}

impl<T: Real> ConvexSubproblem<T> {
    pub fn check_dimensions(&self) -> Result<()> {
        if self.objective.len() != self.num_vars {
            return Err(DamError::Dimension("objective length".into()));
        }
        for c in &self.constraints {
            if let Some(d) = c.dim() {
                if d != self.num_vars {
                    return Err(DamError::Dimension(format!("constraint `{}` has {d} columns", c.family)));
                }
            }
            if let ConstraintKind::LogEpigraph { t, q, .. } = c.kind {
                if t >= self.num_vars || q >= self.num_vars {
                    return Err(DamError::Dimension(format!("constraint `{}` index out of range", c.family)));
                }
            }
        }
        if let Some(s) = &self.start {
            if s.len() != self.num_vars {
                return Err(DamError::Dimension("start point length".into()));
            }
        }
        Ok(())
    }

    /// Largest constraint value and its family.
    pub fn max_violation(&self, x: &DVector<T>) -> (String, T) {
        let mut worst = (String::new(), lit::<T>(f64::NEG_INFINITY));
        for c in &self.constraints {
            let v = c.value(x);
            if v > worst.1 || !v.is_finite() {
                worst = (c.family.clone(), v);
                if !v.is_finite() {
                    break;
                }
            }
        }
        worst
    }

    pub fn strictly_feasible(&self, x: &DVector<T>) -> bool {
        self.constraints.iter().all(|c| c.value(x) < T::zero())
    }
}

/// Barrier solver settings.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub tol: f64,
    pub mu: f64,
    pub max_newton: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            mu: 20.0,
            max_newton: 3000,
        }
    }
}

struct Barrier<'a, T: Real> {
    c: &'a DVector<T>,
    cons: &'a [Constraint<T>],
}

impl<T: Real> Barrier<'_, T> {
    /// `-t c^T x - sum log(-g_i(x))`; `None` outside the domain.
    fn value(&self, x: &DVector<T>, t: T) -> Option<T> {
        let mut f = -t * self.c.dot(x);
        for c in self.cons {
            let g = c.value(x);
            if !(g < T::zero()) {
                return None;
            }
            f -= (-g).ln();
        }
        Some(f)
    }

    fn derivatives(&self, x: &DVector<T>, t: T) -> (DVector<T>, DMatrix<T>) {
        let n = x.len();
        let mut grad = self.c * (-t);
        let mut hess = DMatrix::zeros(n, n);
        for c in self.cons {
            let g = c.value(x);
            c.accumulate_barrier(x, g, &mut grad, &mut hess);
        }
        (grad, hess)
    }
}

/// Regularized Newton direction.
fn newton_direction<T: Real>(hess: &DMatrix<T>, grad: &DVector<T>) -> DVector<T> {
    let n = grad.len();
    let scale = (0..n).fold(T::zero(), |m, i| if hess[(i, i)].abs() > m { hess[(i, i)].abs() } else { m });
    let scale = if scale > T::zero() { scale } else { T::one() };
    let mut ridge = T::zero();
    loop {
        let mut h = hess.clone();
        for i in 0..n {
            h[(i, i)] += ridge;
        }
        if let Some(ch) = h.cholesky() {
            let d = ch.solve(&(-grad));
            if d.iter().all(|v| v.is_finite()) {
                return d;
            }
        }
        ridge = if ridge == T::zero() { scale * lit(1e-14) } else { ridge * lit(100.0) };
        if ridge > scale * lit(1e6) {
            return -grad.clone() / scale;
        }
    }
}

/// Minimizes the barrier function at fixed `t`. Returns the number of
/// Newton steps; `stop` may end the centering early.
fn center<T: Real>(
    bar: &Barrier<'_, T>,
    x: &mut DVector<T>,
    t: T,
    budget: usize,
    stop: &dyn Fn(&DVector<T>) -> bool,
) -> usize {
    let mut steps = 0;
    let mut fx = match bar.value(x, t) {
        Some(f) => f,
        None => return 0,
    };
    while steps < budget {
        if stop(x) {
            break;
        }
        let (grad, hess) = bar.derivatives(x, t);
        let dx = newton_direction(&hess, &grad);
        let slope = grad.dot(&dx);
        let lambda2 = -slope;
        if !(lambda2 > lit::<T>(2e-10)) {
            break;
        }
        steps += 1;
        let mut alpha = T::one();
        let mut moved = false;
        for _ in 0..80 {
            let trial = &*x + &dx * alpha;
            if let Some(ft) = bar.value(&trial, t) {
                if ft <= fx + lit::<T>(0.01) * alpha * slope {
                    // rounding-level progress means we are centered
                    moved = fx - ft > lit::<T>(1e-15) * (T::one() + fx.abs());
                    *x = trial;
                    fx = ft;
                    break;
                }
            }
            alpha *= lit(0.5);
        }
        if !moved {
            break;
        }
    }
    steps
}

/// Phase I: finds a strictly feasible point by minimizing the common
/// relaxation `s` of every constraint.
fn phase_one<T: Real>(sp: &ConvexSubproblem<T>, opts: &SolverOptions) -> Result<(DVector<T>, usize)> {
    let n = sp.num_vars;
    let mut x0 = sp.start.clone().unwrap_or_else(|| DVector::zeros(n));
    for c in &sp.constraints {
        if let ConstraintKind::LogEpigraph { q, .. } = c.kind {
            if !(x0[q] > T::zero()) {
                x0[q] = T::one();
            }
        }
    }
    let s0 = sp
        .constraints
        .iter()
        .fold(T::zero(), |m, c| {
            let v = c.value(&x0);
            if v > m {
                v
            } else {
                m
            }
        });
    let mut cons: Vec<Constraint<T>> = sp.constraints.iter().map(|c| c.relaxed(n)).collect();
    let mut floor = DVector::zeros(n + 1);
    floor[n] = -T::one();
    cons.push(Constraint::linear("phase-one floor", floor, T::one()));
    // keep directions the constraints leave free from running away:
    // ||x - x0||^2 <= R^2
    let radius = lit::<T>(1e3) * (T::one() + x0.norm());
    let mut p = DMatrix::identity(n + 1, n + 1);
    p[(n, n)] = T::zero();
    let mut a = DVector::zeros(n + 1);
    a.rows_mut(0, n).copy_from(&(&x0 * lit::<T>(-2.0)));
    cons.push(Constraint::quadratic("phase-one box", p, a, x0.norm_squared() - radius * radius));
    let mut c = DVector::zeros(n + 1);
    c[n] = -T::one();
    let mut x = DVector::zeros(n + 1);
    x.rows_mut(0, n).copy_from(&x0);
    x[n] = s0 + T::one();
    let bar = Barrier { c: &c, cons: &cons };
    let done = |x: &DVector<T>| x[n] < lit::<T>(-1e-8);
    let m = count_of(&cons);
    let mut t = T::one();
    let mut steps = 0;
    loop {
        steps += center(&bar, &mut x, t, opts.max_newton.saturating_sub(steps), &done);
        if done(&x) {
            let xs = x.rows(0, n).into_owned();
            if sp.strictly_feasible(&xs) {
                return Ok((xs, steps));
            }
        }
        if m / t < lit::<T>(opts.tol) * lit(1e-2) || steps >= opts.max_newton {
            let xs = x.rows(0, n).into_owned();
            let (family, violation) = sp.max_violation(&xs);
            return Err(DamError::Infeasible {
                family,
                violation: to_f64(violation).max(0.0),
            });
        }
        t *= lit(opts.mu);
    }
}

fn count_of<T: Real>(cons: &[Constraint<T>]) -> T {
    lit(cons.len() as f64)
}

/// Solves `sp` to duality gap `tol`.
pub fn solve_subproblem<T: Real>(sp: &ConvexSubproblem<T>, tol: f64) -> Result<SubproblemSolution<T>> {
    solve_with(sp, &SolverOptions { tol, ..SolverOptions::default() })
}

pub fn solve_with<T: Real>(sp: &ConvexSubproblem<T>, opts: &SolverOptions) -> Result<SubproblemSolution<T>> {
    sp.check_dimensions()?;
    if sp.constraints.is_empty() {
        return Err(DamError::Config("unconstrained linear objective is unbounded".into()));
    }
    let (mut x, mut steps) = match &sp.start {
        Some(s) if sp.strictly_feasible(s) => (s.clone(), 0),
        _ => phase_one(sp, opts)?,
    };
    let bar = Barrier {
        c: &sp.objective,
        cons: &sp.constraints,
    };
    let m = count_of(&sp.constraints);
    let never = |_: &DVector<T>| false;
    // initial duality gap of the order of the objective itself
    let mut t = m / (T::one() + sp.objective.dot(&x).abs());
    let status = loop {
        steps += center(&bar, &mut x, t, opts.max_newton.saturating_sub(steps), &never);
        if m / t < lit(opts.tol) {
            break SolveStatus::Optimal;
        }
        if steps >= opts.max_newton {
            break SolveStatus::MaxIter;
        }
        t *= lit(opts.mu);
    };
    Ok(SubproblemSolution {
        objective: sp.objective.dot(&x),
        x,
        status,
        gap: m / t,
        newton_steps: steps,
    })
}
