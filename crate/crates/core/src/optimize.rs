//! Root finding and minimization.
//!
//! Newton, secant and steepest descent stop on the relative step
//! `‖x_{k+1} − x_k‖ / ‖x_k‖`. The quasi-Newton methods also stop on a small
//! (projected) gradient. Objectives that evaluate non-finite are seen by the
//! minimizers as [`SENTINEL`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::solve_dense;

/// Objective value substituted for non-finite evaluations.
pub const SENTINEL: f64 = 1e10;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_N_MAX: usize = 200;
const MAX_BACKTRACKS: usize = 60;

type ValueFn<'a> = Box<dyn Fn(&[f64]) -> f64 + 'a>;
type GradFn<'a> = Box<dyn Fn(&[f64]) -> Vec<f64> + 'a>;
type JointFn<'a> = Box<dyn Fn(&[f64]) -> (f64, Vec<f64>) + 'a>;

/// Objective with an optional analytic gradient. Without one, central
/// differences with step `fd_step` are used.
pub struct ScalarFn<'a> {
    value: ValueFn<'a>,
    grad: Option<GradFn<'a>>,
    joint: Option<JointFn<'a>>,
    pub fd_step: f64,
}

impl<'a> ScalarFn<'a> {
    pub fn new(f: impl Fn(&[f64]) -> f64 + 'a) -> Self {
        Self { value: Box::new(f), grad: None, joint: None, fd_step: 1e-6 }
    }

    pub fn with_gradient(mut self, g: impl Fn(&[f64]) -> Vec<f64> + 'a) -> Self {
        self.grad = Some(Box::new(g));
        self
    }

    pub fn with_fd_step(mut self, h: f64) -> Self {
        self.fd_step = h;
        self
    }

    /// Objective whose value and gradient come from one evaluation.
    pub fn joint(fg: impl Fn(&[f64]) -> (f64, Vec<f64>) + Clone + 'a) -> Self {
        let f = fg.clone();
        Self {
            value: Box::new(move |x| f(x).0),
            grad: None,
            joint: Some(Box::new(fg)),
            fd_step: 1e-6,
        }
    }

    pub fn has_gradient(&self) -> bool {
        self.grad.is_some() || self.joint.is_some()
    }

    /// Raw objective value, without the sentinel substitution.
    pub fn raw(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    /// Objective value, with non-finite results replaced by [`SENTINEL`].
    pub fn value(&self, x: &[f64]) -> f64 {
        let v = (self.value)(x);
        if v.is_finite() {
            v
        } else {
            SENTINEL
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        if let Some(j) = &self.joint {
            return Ok(j(x).1);
        }
        match &self.grad {
            Some(g) => Ok(g(x)),
            None => self.guarded_difference(x),
        }
    }

    // Central differences, falling back to a one-sided difference when one
    // stencil point lands on the sentinel (e.g. a diverged forward solve).
    fn guarded_difference(&self, x: &[f64]) -> Result<Vec<f64>> {
        let h = self.fd_step;
        if !(h > 0.0) {
            return Err(Error::InvalidArgument(format!("finite-difference step must be positive, got {h}")));
        }
        let mut z = x.to_vec();
        let mut center = None;
        let mut g = Vec::with_capacity(x.len());
        for i in 0..x.len() {
            z[i] = x[i] + h;
            let fp = self.value(&z);
            z[i] = x[i] - h;
            let fm = self.value(&z);
            z[i] = x[i];
            let (bad_p, bad_m) = (fp >= SENTINEL, fm >= SENTINEL);
            let gi = if bad_p == bad_m {
                if bad_p {
                    0.0
                } else {
                    (fp - fm) / (2.0 * h)
                }
            } else {
                let f0 = *center.get_or_insert_with(|| self.value(x));
                if f0 >= SENTINEL {
                    0.0
                } else if bad_p {
                    (f0 - fm) / h
                } else {
                    (fp - f0) / h
                }
            };
            g.push(gi);
        }
        Ok(g)
    }

    pub fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        if let Some(j) = &self.joint {
            let (v, g) = j(x);
            return Ok((if v.is_finite() { v } else { SENTINEL }, g));
        }
        Ok((self.value(x), self.gradient(x)?))
    }
}

/// Why an iterative method stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    StepTolerance,
    GradientTolerance,
    ExactRoot,
    MaxIterations,
    LineSearchFailed,
    EarlyStopped,
    Completed,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub f_final: f64,
    pub stop: StopReason,
    /// Objective (or residual, for root finders) at every iterate, starting with `x0`.
    pub trace: Vec<f64>,
    /// Iterates, recorded for problems with at most [`PATH_DIM_LIMIT`] unknowns.
    pub path: Vec<Vec<f64>>,
}

pub const PATH_DIM_LIMIT: usize = 16;

struct Recorder {
    trace: Vec<f64>,
    path: Vec<Vec<f64>>,
    keep_path: bool,
}

impl Recorder {
    fn new(dim: usize) -> Self {
        Self { trace: Vec::new(), path: Vec::new(), keep_path: dim <= PATH_DIM_LIMIT }
    }

    fn push(&mut self, x: &[f64], f: f64) {
        self.trace.push(f);
        if self.keep_path {
            self.path.push(x.to_vec());
        }
    }

    fn finish(self, solution: Vec<f64>, iterations: usize, stop: StopReason, f_final: f64) -> SolveOutcome {
        let converged = matches!(
            stop,
            StopReason::StepTolerance | StopReason::GradientTolerance | StopReason::ExactRoot
        );
        SolveOutcome { solution, iterations, converged, f_final, stop, trace: self.trace, path: self.path }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmijoParams {
    pub alpha0: f64,
    pub beta: f64,
    pub c: f64,
}

impl Default for ArmijoParams {
    fn default() -> Self {
        Self { alpha0: 1.0, beta: 0.5, c: 0.1 }
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rel_step(new: &[f64], old: &[f64]) -> f64 {
    let step = new.iter().zip(old).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    if step == 0.0 {
        return 0.0;
    }
    step / norm2(old)
}

/// Central-difference gradient with absolute step `h`.
pub fn numeric_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("finite-difference step must be positive, got {h}")));
    }
    let mut z = x.to_vec();
    let mut g = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        z[i] = x[i] + h;
        let fp = f(&z);
        z[i] = x[i] - h;
        let fm = f(&z);
        z[i] = x[i];
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::NonFinite { context: "numeric_gradient", step: i });
        }
        g.push((fp - fm) / (2.0 * h));
    }
    Ok(g)
}

/// Newton iteration `x ← x − f(x)/df(x)` for a scalar root.
pub fn newton_root(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    x0: f64,
    n_max: usize,
    tol: f64,
) -> Result<SolveOutcome> {
    let mut rec = Recorder::new(1);
    let mut x = x0;
    let mut fx = f(x);
    rec.push(&[x], fx);
    for k in 0..n_max {
        if fx == 0.0 {
            return Ok(rec.finish(vec![x], k, StopReason::ExactRoot, fx));
        }
        let d = df(x);
        if !d.is_finite() || d.abs() < 1e-300 {
            return Err(Error::DerivativeVanished { iteration: k + 1 });
        }
        let x_new = x - fx / d;
        let err = rel_step(&[x_new], &[x]);
        x = x_new;
        fx = f(x);
        rec.push(&[x], fx);
        if err < tol {
            return Ok(rec.finish(vec![x], k + 1, StopReason::StepTolerance, fx));
        }
        if !x.is_finite() {
            return Ok(rec.finish(vec![x], k + 1, StopReason::MaxIterations, fx));
        }
    }
    Ok(rec.finish(vec![x], n_max, StopReason::MaxIterations, fx))
}

/// Multivariate Newton on a gradient: `x ← x − H(x)⁻¹ g(x)`.
pub fn newton_system(
    grad: impl Fn(&[f64]) -> Vec<f64>,
    hess: impl Fn(&[f64]) -> Vec<f64>,
    x0: &[f64],
    n_max: usize,
    tol: f64,
) -> Result<SolveOutcome> {
    let n = x0.len();
    let mut rec = Recorder::new(n);
    let mut x = x0.to_vec();
    let mut g = grad(&x);
    rec.push(&x, norm2(&g));
    for k in 0..n_max {
        if g.iter().all(|v| *v == 0.0) {
            return Ok(rec.finish(x, k, StopReason::ExactRoot, 0.0));
        }
        let h = hess(&x);
        let step = match solve_dense(h, n, &g) {
            Ok(s) => s,
            Err(Error::SingularPivot { .. }) => return Err(Error::DerivativeVanished { iteration: k + 1 }),
            Err(e) => return Err(e),
        };
        let x_new: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a - s).collect();
        let err = rel_step(&x_new, &x);
        x = x_new;
        g = grad(&x);
        let gn = norm2(&g);
        rec.push(&x, gn);
        if err < tol {
            return Ok(rec.finish(x, k + 1, StopReason::StepTolerance, gn));
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Ok(rec.finish(x, k + 1, StopReason::MaxIterations, gn));
        }
    }
    let gn = norm2(&g);
    Ok(rec.finish(x, n_max, StopReason::MaxIterations, gn))
}

/// Secant iteration started from the pair `(x0, x1)`.
pub fn secant_root(f: impl Fn(f64) -> f64, x0: f64, x1: f64, n_max: usize, tol: f64) -> Result<SolveOutcome> {
    if x0 == x1 {
        return Err(Error::InvalidArgument("secant needs two distinct starting points".into()));
    }
    let mut rec = Recorder::new(1);
    let (mut xp, mut fp) = (x0, f(x0));
    let (mut x, mut fx) = (x1, f(x1));
    rec.push(&[xp], fp);
    rec.push(&[x], fx);
    for k in 0..n_max {
        if fx == 0.0 {
            return Ok(rec.finish(vec![x], k, StopReason::ExactRoot, fx));
        }
        let den = fx - fp;
        if den == 0.0 || !den.is_finite() {
            return Err(Error::FlatSecant { iteration: k + 1 });
        }
        let x_new = x - fx * (x - xp) / den;
        let err = rel_step(&[x_new], &[x]);
        xp = x;
        fp = fx;
        x = x_new;
        fx = f(x);
        rec.push(&[x], fx);
        if err < tol {
            return Ok(rec.finish(vec![x], k + 1, StopReason::StepTolerance, fx));
        }
        if !x.is_finite() {
            return Ok(rec.finish(vec![x], k + 1, StopReason::MaxIterations, fx));
        }
    }
    Ok(rec.finish(vec![x], n_max, StopReason::MaxIterations, fx))
}

/// Largest `α = α₀βᵏ` with `f(x − αg) ≤ f(x) − cα‖g‖²`.
pub fn armijo_line_search(f: &ScalarFn, x: &[f64], g: &[f64], params: &ArmijoParams) -> Result<f64> {
    let fx = f.value(x);
    let gg = dot(g, g);
    let mut alpha = params.alpha0;
    let mut trial = x.to_vec();
    for _ in 0..=MAX_BACKTRACKS {
        for i in 0..x.len() {
            trial[i] = x[i] - alpha * g[i];
        }
        if f.value(&trial) <= fx - params.c * alpha * gg {
            return Ok(alpha);
        }
        alpha *= params.beta;
    }
    Err(Error::LineSearch { backtracks: MAX_BACKTRACKS })
}

/// Gradient descent with Armijo step sizes.
pub fn steepest_descent(f: &ScalarFn, x0: &[f64], n_max: usize, tol: f64) -> Result<SolveOutcome> {
    let params = ArmijoParams::default();
    let mut rec = Recorder::new(x0.len());
    let mut x = x0.to_vec();
    let mut fx = f.value(&x);
    rec.push(&x, fx);
    for k in 0..n_max {
        let g = f.gradient(&x)?;
        if g.iter().all(|v| *v == 0.0) {
            return Ok(rec.finish(x, k, StopReason::GradientTolerance, fx));
        }
        let alpha = armijo_line_search(f, &x, &g, &params)?;
        let x_new: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - alpha * b).collect();
        let err = rel_step(&x_new, &x);
        x = x_new;
        fx = f.value(&x);
        rec.push(&x, fx);
        if err < tol {
            return Ok(rec.finish(x, k + 1, StopReason::StepTolerance, fx));
        }
    }
    Ok(rec.finish(x, n_max, StopReason::MaxIterations, fx))
}

/// Dense BFGS with backtracking line search.
pub fn bfgs_minimize(f: &ScalarFn, x0: &[f64], n_max: usize, tol: f64) -> Result<SolveOutcome> {
    let n = x0.len();
    quasi_newton(f, x0, &vec![f64::NEG_INFINITY; n], &vec![f64::INFINITY; n], n_max, tol)
}

/// Projected quasi-Newton for `lb ≤ x ≤ ub`. Every iterate is feasible.
pub fn box_minimize(f: &ScalarFn, x0: &[f64], lb: &[f64], ub: &[f64], n_max: usize, tol: f64) -> Result<SolveOutcome> {
    if lb.len() != x0.len() || ub.len() != x0.len() {
        return Err(Error::InvalidArgument("bound dimensions differ from x0".into()));
    }
    if x0.iter().zip(lb.iter().zip(ub)).any(|(x, (l, u))| !(l <= x && x <= u)) {
        return Err(Error::InfeasibleStart);
    }
    quasi_newton(f, x0, lb, ub, n_max, tol)
}

fn project(x: &mut [f64], lb: &[f64], ub: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].max(lb[i]).min(ub[i]);
    }
}

/// Coordinates pinned at a bound with the gradient pushing outward.
fn active_set(x: &[f64], g: &[f64], lb: &[f64], ub: &[f64]) -> Vec<bool> {
    (0..x.len()).map(|i| (x[i] <= lb[i] && g[i] > 0.0) || (x[i] >= ub[i] && g[i] < 0.0)).collect()
}

// Backtracking along the projected path x(α) = P(x + αd), with safeguarded
// quadratic interpolation between trials.
fn projected_backtrack(
    f: &ScalarFn,
    x: &[f64],
    fx: f64,
    g: &[f64],
    d: &[f64],
    lb: &[f64],
    ub: &[f64],
    c: f64,
) -> Option<(Vec<f64>, f64)> {
    let mut alpha = 1.0;
    let mut trial = vec![0.0; x.len()];
    for _ in 0..=MAX_BACKTRACKS {
        for i in 0..x.len() {
            trial[i] = x[i] + alpha * d[i];
        }
        project(&mut trial, lb, ub);
        let ft = f.value(&trial);
        let decrease: f64 = g.iter().zip(trial.iter().zip(x)).map(|(gi, (t, xi))| gi * (t - xi)).sum();
        if ft <= fx + c * decrease {
            return Some((trial, ft));
        }
        let slope = dot(g, d);
        let curv = ft - fx - alpha * slope;
        let next = if curv > 0.0 && ft < SENTINEL && slope < 0.0 {
            -slope * alpha * alpha / (2.0 * curv)
        } else {
            0.5 * alpha
        };
        alpha = next.max(0.01 * alpha).min(0.5 * alpha);
    }
    None
}

fn quasi_newton(f: &ScalarFn, x0: &[f64], lb: &[f64], ub: &[f64], n_max: usize, tol: f64) -> Result<SolveOutcome> {
    let n = x0.len();
    let c = ArmijoParams::default().c;
    let mut rec = Recorder::new(n);
    let mut x = x0.to_vec();
    let (mut fx, mut g) = f.value_and_gradient(&x)?;
    rec.push(&x, fx);
    let identity = |n: usize| {
        let mut h = vec![0.0; n * n];
        for i in 0..n {
            h[i * n + i] = 1.0;
        }
        h
    };
    let mut h = identity(n);
    let mut updated = false;

    for k in 0..n_max {
        let active = active_set(&x, &g, lb, ub);
        let pg: Vec<f64> = g.iter().zip(&active).map(|(gi, a)| if *a { 0.0 } else { *gi }).collect();
        if norm_inf(&pg) < tol {
            return Ok(rec.finish(x, k, StopReason::GradientTolerance, fx));
        }

        let mut d = vec![0.0; n];
        for i in 0..n {
            if active[i] {
                continue;
            }
            d[i] = -(0..n).filter(|&j| !active[j]).map(|j| h[i * n + j] * g[j]).sum::<f64>();
        }
        if !(dot(&d, &g) < 0.0) {
            h = identity(n);
            updated = false;
            d = pg.iter().map(|v| -v).collect();
        }
        if !updated {
            // no curvature information yet: bound the trial step relative to x
            let limit = 10.0 * norm_inf(&x).max(1.0);
            let big = norm_inf(&d);
            if big > limit {
                d.iter_mut().for_each(|v| *v *= limit / big);
            }
        }

        let step = match projected_backtrack(f, &x, fx, &g, &d, lb, ub, c) {
            Some(s) => Some(s),
            None if updated => {
                // curvature model is misleading: drop it and retry along -g
                h = identity(n);
                updated = false;
                let sd: Vec<f64> = pg.iter().map(|v| -v).collect();
                projected_backtrack(f, &x, fx, &g, &sd, lb, ub, c)
            }
            None => None,
        };
        let Some((x_new, f_new)) = step else {
            return Ok(rec.finish(x, k, StopReason::LineSearchFailed, fx));
        };

        let g_new = f.gradient(&x_new)?;
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let err = rel_step(&x_new, &x);
        x = x_new;
        fx = f_new;
        g = g_new;
        rec.push(&x, fx);
        if err < tol {
            return Ok(rec.finish(x, k + 1, StopReason::StepTolerance, fx));
        }

        let sy = dot(&s, &y);
        if sy > 1e-12 * norm2(&s) * norm2(&y) && sy > 0.0 {
            if !updated {
                let scale = sy / dot(&y, &y);
                h = identity(n).into_iter().map(|v| v * scale).collect();
                updated = true;
            }
            bfgs_update(&mut h, &s, &y, sy);
        }
    }
    Ok(rec.finish(x, n_max, StopReason::MaxIterations, fx))
}

// H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i * n + j] * y[j]).sum()).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl AdamParams {
    pub fn with_lr(lr: f64) -> Self {
        Self { lr, ..Self::default() }
    }
}

/// Adam moment state, stepped one gradient at a time.
#[derive(Clone, Debug)]
pub struct Adam {
    pub params: AdamParams,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(params: AdamParams, dim: usize) -> Self {
        Self { params, m: vec![0.0; dim], v: vec![0.0; dim], t: 0 }
    }

    pub fn step(&mut self, theta: &mut [f64], g: &[f64]) {
        let p = self.params;
        self.t += 1;
        let bc1 = 1.0 - p.beta1.powi(self.t);
        let bc2 = 1.0 - p.beta2.powi(self.t);
        for i in 0..theta.len() {
            self.m[i] = p.beta1 * self.m[i] + (1.0 - p.beta1) * g[i];
            self.v[i] = p.beta2 * self.v[i] + (1.0 - p.beta2) * g[i] * g[i];
            let mh = self.m[i] / bc1;
            let vh = self.v[i] / bc2;
            theta[i] -= p.lr * mh / (vh.sqrt() + p.eps);
        }
    }
}

/// Runs `epochs` Adam steps. The trace holds the loss before each step and
/// after the last.
pub fn adam(f: &ScalarFn, theta0: &[f64], params: AdamParams, epochs: usize) -> Result<SolveOutcome> {
    if !(params.lr > 0.0) || epochs == 0 {
        return Err(Error::InvalidArgument("adam needs lr > 0 and epochs >= 1".into()));
    }
    let mut rec = Recorder::new(theta0.len());
    let mut theta = theta0.to_vec();
    let mut opt = Adam::new(params, theta.len());
    for epoch in 0..epochs {
        let (v, g) = f.value_and_gradient(&theta)?;
        if !g.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite { context: "adam gradient", step: epoch });
        }
        rec.push(&theta, v);
        opt.step(&mut theta, &g);
    }
    let v = f.value(&theta);
    rec.push(&theta, v);
    Ok(rec.finish(theta, epochs, StopReason::Completed, v))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub n_max: usize,
    pub tol: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self { memory: 10, n_max: DEFAULT_N_MAX, tol: DEFAULT_TOL, c1: 1e-4, c2: 0.9 }
    }
}

/// L-BFGS with a strong-Wolfe line search.
pub fn lbfgs(f: &ScalarFn, x0: &[f64], opts: LbfgsOptions) -> Result<SolveOutcome> {
    lbfgs_observed(f, x0, opts, |_, _| true)
}

/// As [`lbfgs`]; `observer(iteration, f)` runs after every accepted step and
/// stops the run by returning `false`.
pub fn lbfgs_observed(
    f: &ScalarFn,
    x0: &[f64],
    opts: LbfgsOptions,
    mut observer: impl FnMut(usize, f64) -> bool,
) -> Result<SolveOutcome> {
    if opts.memory == 0 {
        return Err(Error::InvalidArgument("L-BFGS memory must be at least 1".into()));
    }
    let n = x0.len();
    let mut rec = Recorder::new(n);
    let mut x = x0.to_vec();
    let (mut fx, mut g) = f.value_and_gradient(&x)?;
    rec.push(&x, fx);
    let mut hist: std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)> = Default::default();

    for k in 0..opts.n_max {
        if norm_inf(&g) < opts.tol {
            return Ok(rec.finish(x, k, StopReason::GradientTolerance, fx));
        }
        let mut d = two_loop(&g, &hist);
        if !(dot(&d, &g) < 0.0) {
            hist.clear();
            d = g.iter().map(|v| -v).collect();
        }
        let a0 = if hist.is_empty() { (1.0 / g.iter().map(|v| v.abs()).sum::<f64>()).min(1.0) } else { 1.0 };
        let mut found = strong_wolfe(f, &x, fx, &g, &d, a0, opts.c1, opts.c2)?;
        if found.is_none() && !hist.is_empty() {
            hist.clear();
            d = g.iter().map(|v| -v).collect();
            let a0 = (1.0 / g.iter().map(|v| v.abs()).sum::<f64>()).min(1.0);
            found = strong_wolfe(f, &x, fx, &g, &d, a0, opts.c1, opts.c2)?;
        }
        let Some((alpha, f_new, g_new)) = found else {
            return Ok(rec.finish(x, k, StopReason::LineSearchFailed, fx));
        };
        let s: Vec<f64> = d.iter().map(|v| alpha * v).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm2(&s) * norm2(&y) && sy > 0.0 {
            if hist.len() == opts.memory {
                hist.pop_front();
            }
            hist.push_back((s.clone(), y, 1.0 / sy));
        }
        for i in 0..n {
            x[i] += s[i];
        }
        fx = f_new;
        g = g_new;
        rec.push(&x, fx);
        if !observer(k + 1, fx) {
            return Ok(rec.finish(x, k + 1, StopReason::EarlyStopped, fx));
        }
    }
    if norm_inf(&g) < opts.tol {
        return Ok(rec.finish(x, opts.n_max, StopReason::GradientTolerance, fx));
    }
    Ok(rec.finish(x, opts.n_max, StopReason::MaxIterations, fx))
}

fn two_loop(g: &[f64], hist: &std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = vec![0.0; hist.len()];
    for (i, (s, y, rho)) in hist.iter().enumerate().rev() {
        let a = rho * dot(s, &q);
        alphas[i] = a;
        for j in 0..q.len() {
            q[j] -= a * y[j];
        }
    }
    if let Some((s, y, _)) = hist.back() {
        let gamma = dot(s, y) / dot(y, y);
        for v in &mut q {
            *v *= gamma;
        }
    }
    for (i, (s, y, rho)) in hist.iter().enumerate() {
        let b = rho * dot(y, &q);
        for j in 0..q.len() {
            q[j] += s[j] * (alphas[i] - b);
        }
    }
    q.iter().map(|v| -v).collect()
}

struct LinePoint {
    a: f64,
    f: f64,
    d: f64,
    g: Vec<f64>,
}

// Bracketing phase followed by zoom with cubic interpolation.
#[allow(clippy::too_many_arguments)]
fn strong_wolfe(
    f: &ScalarFn,
    x: &[f64],
    f0: f64,
    g0: &[f64],
    d: &[f64],
    a_init: f64,
    c1: f64,
    c2: f64,
) -> Result<Option<(f64, f64, Vec<f64>)>> {
    let d0 = dot(g0, d);
    let eval = |a: f64| -> Result<LinePoint> {
        let z: Vec<f64> = x.iter().zip(d).map(|(xi, di)| xi + a * di).collect();
        let (fv, g) = f.value_and_gradient(&z)?;
        let fv = if fv.is_finite() { fv } else { f64::INFINITY };
        let dd = if g.iter().all(|v| v.is_finite()) { dot(&g, d) } else { f64::NAN };
        Ok(LinePoint { a, f: fv, d: dd, g })
    };
    // Near the optimum the decrease test drowns in rounding; the approximate
    // Wolfe test of Hager and Zhang accepts on the directional derivative there.
    // Accepted points still never raise f.
    let armijo = |p: &LinePoint| {
        p.f <= f0 + c1 * p.a * d0 || (p.f <= f0 && p.d.is_finite() && p.d <= (2.0 * c1 - 1.0) * d0)
    };
    let curvature = |p: &LinePoint| p.d.abs() <= -c2 * d0;

    let mut prev = LinePoint { a: 0.0, f: f0, d: d0, g: g0.to_vec() };
    let mut a = a_init;
    for i in 0..25 {
        let cur = eval(a)?;
        if !armijo(&cur) || (i > 0 && cur.f >= prev.f) || !cur.d.is_finite() {
            return zoom(&eval, &armijo, prev, cur, d0, c2);
        }
        if curvature(&cur) {
            return Ok(Some((cur.a, cur.f, cur.g)));
        }
        if cur.d >= 0.0 {
            return zoom(&eval, &armijo, cur, prev, d0, c2);
        }
        a = 2.0 * cur.a;
        prev = cur;
    }
    Ok(None)
}

fn cubic_min(lo: &LinePoint, hi: &LinePoint) -> f64 {
    let d1 = lo.d + hi.d - 3.0 * (lo.f - hi.f) / (lo.a - hi.a);
    let disc = d1 * d1 - lo.d * hi.d;
    if disc.is_finite() && disc >= 0.0 && hi.d.is_finite() && hi.f.is_finite() {
        let d2 = disc.sqrt() * (hi.a - lo.a).signum();
        let a = hi.a - (hi.a - lo.a) * (hi.d + d2 - d1) / (hi.d - lo.d + 2.0 * d2);
        if a.is_finite() {
            return a;
        }
    }
    0.5 * (lo.a + hi.a)
}

fn zoom(
    eval: &impl Fn(f64) -> Result<LinePoint>,
    armijo: &impl Fn(&LinePoint) -> bool,
    mut lo: LinePoint,
    mut hi: LinePoint,
    d0: f64,
    c2: f64,
) -> Result<Option<(f64, f64, Vec<f64>)>> {
    for _ in 0..30 {
        let (a_min, a_max) = (lo.a.min(hi.a), lo.a.max(hi.a));
        let width = a_max - a_min;
        if width <= 1e-14 * a_max.max(1e-300) {
            break;
        }
        let mut a = cubic_min(&lo, &hi);
        if !(a > a_min + 0.1 * width && a < a_max - 0.1 * width) {
            a = 0.5 * (lo.a + hi.a);
        }
        let cur = eval(a)?;
        if !armijo(&cur) || cur.f > lo.f || !cur.d.is_finite() {
            hi = cur;
        } else {
            if cur.d.abs() <= -c2 * d0 {
                return Ok(Some((cur.a, cur.f, cur.g)));
            }
            if cur.d * (hi.a - lo.a) >= 0.0 {
                hi = lo;
            }
            lo = cur;
        }
    }
    // accept the best sufficient-decrease point found, if it improved
    if lo.a > 0.0 && armijo(&lo) {
        return Ok(Some((lo.a, lo.f, lo.g)));
    }
    Ok(None)
}
