//! Porous medium equation `u_t = (u^β)_xx` in one space dimension and its
//! linear special case, the heat equation.

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field2D, Grid1D};
use crate::linalg::{solve_tridiagonal, DenseLu};
use crate::optimize::{bfgs_minimize, box_minimize, steepest_descent, ScalarFn, DEFAULT_N_MAX, DEFAULT_TOL, SENTINEL};
use crate::report::{rel_errors, OptimizerReport};
use crate::scalar::Real;

/// Barenblatt profile for `β = 3`, shifted in time by `delta`.
pub fn barenblatt<T: Real>(t: T, x: T, delta: T) -> T {
    let s = t + delta;
    let core = T::one() - x * x / (T::lit(12.0) * s.sqrt());
    s.powf(T::lit(-0.25)) * core.max(T::zero()).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarenblattParams {
    pub delta: f64,
}

impl Default for BarenblattParams {
    fn default() -> Self {
        Self { delta: 1.0 }
    }
}

impl BarenblattParams {
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        barenblatt(t, x, self.delta)
    }

    /// Exact field sampled on a tensor grid.
    pub fn field(&self, t_grid: Grid1D<f64>, x_grid: Grid1D<f64>) -> Field2D<f64> {
        Field2D::from_fn(t_grid, x_grid, |t, x| self.eval(t, x))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeatScheme {
    MethodOfLinesRk4,
    ForwardEuler,
    BackwardEuler,
    CrankNicolson,
}

fn time_grid<T: Real>(tau: T, t_end: T) -> Result<Grid1D<T>> {
    if !(tau > T::zero()) || !(t_end > T::zero()) {
        return Err(Error::InvalidArgument(format!("need tau > 0 and t_end > 0 (tau={tau:?}, t_end={t_end:?})")));
    }
    let steps = (t_end / tau).round();
    if (steps * tau - t_end).abs() > T::lit(1e-9) * t_end {
        return Err(Error::InvalidArgument(format!("t_end={t_end:?} is not a multiple of tau={tau:?}")));
    }
    Grid1D::new(T::zero(), t_end, steps.to_usize().unwrap_or(0))
}

fn check_ic<T: Real>(ic: &[T], x_grid: &Grid1D<T>) -> Result<()> {
    if ic.len() != x_grid.len() {
        return Err(Error::InvalidArgument(format!("ic has {} values for {} grid points", ic.len(), x_grid.len())));
    }
    if ic.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("ic is not finite".into()));
    }
    Ok(())
}

/// Second difference `u_{i-1} - 2u_i + u_{i+1}` of a full row.
fn second_difference<T: Real>(u: &[T], out: &mut [T]) {
    let n = u.len();
    for i in 1..n - 1 {
        out[i] = u[i - 1] - T::lit(2.0) * u[i] + u[i + 1];
    }
}

/// Integrates `u_t = u_xx` with Dirichlet data `bc(t) = (left, right)`.
///
/// Forward Euler beyond `τ ≤ h²/2` is refused unless `accept_unstable` is set.
/// A non-finite state marks the field divergent instead of returning an error.
pub fn heat_solve<T: Real>(
    scheme: HeatScheme,
    ic: &[T],
    x_grid: Grid1D<T>,
    tau: T,
    t_end: T,
    bc: impl Fn(T) -> (T, T),
    accept_unstable: bool,
) -> Result<Field2D<T>> {
    check_ic(ic, &x_grid)?;
    let t_grid = time_grid(tau, t_end)?;
    let h = x_grid.h;
    let lam = tau / (h * h);
    if scheme == HeatScheme::ForwardEuler && lam > T::lit(0.5) && !accept_unstable {
        return Err(Error::InvalidArgument(format!(
            "forward Euler with tau/h^2 = {lam:?} > 1/2 is unstable; pass accept_unstable to run it anyway"
        )));
    }
    let n = x_grid.len();
    let m = n.saturating_sub(2);
    let mut field = Field2D::zeros(t_grid, x_grid);
    field.row_mut(0).copy_from_slice(ic);
    let mut u = ic.to_vec();
    let mut work = vec![T::zero(); n];
    let two = T::lit(2.0);
    let half = T::lit(0.5);

    for k in 1..t_grid.len() {
        let t_old = t_grid.point(k - 1);
        let t_new = t_grid.point(k);
        let (l_new, r_new) = bc(t_new);
        match scheme {
            HeatScheme::ForwardEuler => {
                second_difference(&u, &mut work);
                for i in 1..n - 1 {
                    u[i] = u[i] + lam * work[i];
                }
            }
            HeatScheme::BackwardEuler | HeatScheme::CrankNicolson => {
                let theta = if scheme == HeatScheme::BackwardEuler { T::one() } else { half };
                let a = theta * lam;
                if m > 0 {
                    let diag = vec![T::one() + two * a; m];
                    let off = vec![-a; m - 1];
                    second_difference(&u, &mut work);
                    let mut rhs: Vec<T> = (1..n - 1).map(|i| u[i] + (T::one() - theta) * lam * work[i]).collect();
                    rhs[0] = rhs[0] + a * l_new;
                    rhs[m - 1] = rhs[m - 1] + a * r_new;
                    let sol = solve_tridiagonal(&off, &diag, &off, &rhs)?;
                    u[1..n - 1].copy_from_slice(&sol);
                }
            }
            HeatScheme::MethodOfLinesRk4 => {
                let t_mid = t_old + half * tau;
                let rate = |v: &[T], t: T| -> Vec<T> {
                    let (l, r) = bc(t);
                    let mut full = v.to_vec();
                    full[0] = l;
                    full[n - 1] = r;
                    let mut d = vec![T::zero(); n];
                    second_difference(&full, &mut d);
                    d.iter().map(|x| *x / (h * h)).collect()
                };
                let stage = |base: &[T], k: &[T], s: T| -> Vec<T> { base.iter().zip(k).map(|(b, d)| *b + s * *d).collect() };
                let k1 = rate(&u, t_old);
                let k2 = rate(&stage(&u, &k1, half * tau), t_mid);
                let k3 = rate(&stage(&u, &k2, half * tau), t_mid);
                let k4 = rate(&stage(&u, &k3, tau), t_new);
                let sixth = tau / T::lit(6.0);
                for i in 1..n - 1 {
                    u[i] = u[i] + sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]);
                }
            }
        }
        u[0] = l_new;
        u[n - 1] = r_new;
        if u.iter().any(|v| !v.is_finite()) {
            field.mark_diverged(k);
            return Ok(field);
        }
        field.row_mut(k).copy_from_slice(&u);
    }
    Ok(field)
}

/// Settings of the implicit Newton PME solver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PmeConfig {
    pub beta: f64,
    pub x_grid: Grid1D<f64>,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_newton_max_iter")]
    pub newton_max_iter: usize,
    #[serde(default = "default_jac_h")]
    pub jac_h: f64,
}

fn default_newton_tol() -> f64 {
    1e-6
}
fn default_newton_max_iter() -> usize {
    20
}
fn default_jac_h() -> f64 {
    1e-6
}

impl PmeConfig {
    /// 100 intervals on `[-1, 1]`, `dt = 0.01`, `t ∈ [0, 1]`.
    pub fn reference(beta: f64) -> Self {
        Self {
            beta,
            x_grid: Grid1D::new(-1.0, 1.0, 100).expect("static grid"),
            dt: 0.01,
            t_end: 1.0,
            newton_tol: default_newton_tol(),
            newton_max_iter: default_newton_max_iter(),
            jac_h: default_jac_h(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !(self.jac_h > 0.0) || !(self.newton_tol > 0.0) || self.newton_max_iter == 0 {
            return Err(Error::InvalidArgument(format!("invalid PME settings: {self:?}")));
        }
        if self.x_grid.n < 2 {
            return Err(Error::InvalidArgument("PME grid needs an interior point".into()));
        }
        Ok(())
    }
}

#[inline]
fn residual_row<T: Real>(i: usize, u: &[T], u_old: &[T], bounds: (T, T), beta: T, coef: T) -> T {
    let n = u.len();
    let ul = if i == 0 { bounds.0 } else { u[i - 1] };
    let ur = if i + 1 == n { bounds.1 } else { u[i + 1] };
    let ui = u[i];
    let half = T::lit(0.5);
    let e = beta - T::one();
    let ap = (half * (ur + ui)).powf(e);
    let am = (half * (ui + ul)).powf(e);
    ui - u_old[i] - coef * (ap * (ur - ui) - am * (ui - ul))
}

/// Implicit residual `F(u^{n+1})` on interior unknowns with half-point
/// diffusivities `β ((u_i + u_{i±1})/2)^{β-1}`; `bounds` are the Dirichlet
/// values at the new time level.
pub fn pme_residual<T: Real>(u_new: &[T], u_old: &[T], bounds: (T, T), beta: T, dt: T, dx: T) -> Vec<T> {
    let coef = beta * dt / (dx * dx);
    (0..u_new.len()).map(|i| residual_row(i, u_new, u_old, bounds, beta, coef)).collect()
}

/// Forward-difference Jacobian of [`pme_residual`], column by column. Only the
/// three rows touched by `u_j` are re-evaluated; storage is dense row-major.
pub fn pme_jacobian_fd<T: Real>(u: &[T], u_old: &[T], bounds: (T, T), beta: T, dt: T, dx: T, jac_h: T) -> Vec<T> {
    let n = u.len();
    let coef = beta * dt / (dx * dx);
    let base: Vec<T> = (0..n).map(|i| residual_row(i, u, u_old, bounds, beta, coef)).collect();
    let mut jac = vec![T::zero(); n * n];
    let mut up = u.to_vec();
    for j in 0..n {
        up[j] = u[j] + jac_h;
        for i in j.saturating_sub(1)..(j + 2).min(n) {
            jac[i * n + j] = (residual_row(i, &up, u_old, bounds, beta, coef) - base[i]) / jac_h;
        }
        up[j] = u[j];
    }
    jac
}

fn max_abs<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| if x.abs() > m || x.is_nan() { x.abs() } else { m })
}

/// Implicit Euler in time with a Newton solve per step, from initial row `ic`
/// and boundary values `bc(k, t_k)`.
pub fn pme_solve_direct_with(
    config: &PmeConfig,
    ic: &[f64],
    bc: impl Fn(usize, f64) -> (f64, f64),
) -> Result<Field2D<f64>> {
    config.validate()?;
    let x_grid = config.x_grid;
    check_ic(ic, &x_grid)?;
    let t_grid = time_grid(config.dt, config.t_end)?;
    let n = x_grid.len();
    let mut field = Field2D::zeros(t_grid, x_grid);
    field.row_mut(0).copy_from_slice(ic);
    let (beta, dt, dx) = (config.beta, config.dt, x_grid.h);
    let mut u_old: Vec<f64> = ic[1..n - 1].to_vec();
    field.status.newton_iterations.push(0);

    for k in 1..t_grid.len() {
        let bounds = bc(k, t_grid.point(k));
        let mut u = u_old.clone();
        let mut iterations = 0;
        loop {
            let f = pme_residual(&u, &u_old, bounds, beta, dt, dx);
            let norm = max_abs(&f);
            if !norm.is_finite() {
                break;
            }
            if norm < config.newton_tol {
                break;
            }
            if iterations == config.newton_max_iter {
                field.status.stalled_steps.push(k);
                break;
            }
            let jac = pme_jacobian_fd(&u, &u_old, bounds, beta, dt, dx, config.jac_h);
            let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
            let step = match DenseLu::factor(jac, u.len()) {
                Ok(lu) => lu.solve(&rhs),
                Err(_) => vec![f64::NAN; u.len()],
            };
            for (ui, di) in u.iter_mut().zip(&step) {
                *ui += di;
            }
            iterations += 1;
        }
        field.status.newton_iterations.push(iterations);
        if u.iter().any(|v| !v.is_finite()) {
            field.mark_diverged(k);
            return Ok(field);
        }
        let row = field.row_mut(k);
        row[0] = bounds.0;
        row[n - 1] = bounds.1;
        row[1..n - 1].copy_from_slice(&u);
        u_old = u;
    }
    Ok(field)
}

/// Implicit Newton solve with initial profile `ic(x)` and boundary data `bc(t)`.
pub fn pme_solve_direct(
    config: &PmeConfig,
    ic: impl Fn(f64) -> f64,
    bc: impl Fn(f64) -> (f64, f64),
) -> Result<Field2D<f64>> {
    let ic: Vec<f64> = config.x_grid.points().into_iter().map(ic).collect();
    pme_solve_direct_with(config, &ic, |_, t| bc(t))
}

/// Explicit FTCS update `u += (Δt/Δx²) δ²(max(u,0)^β)`.
pub fn pme_ftcs_solve<T: Real>(
    beta: T,
    x_grid: Grid1D<T>,
    dt: T,
    t_end: T,
    ic: &[T],
    bc: impl Fn(usize, T) -> (T, T),
) -> Result<Field2D<T>> {
    check_ic(ic, &x_grid)?;
    let t_grid = time_grid(dt, t_end)?;
    let n = x_grid.len();
    let lam = dt / (x_grid.h * x_grid.h);
    let mut field = Field2D::zeros(t_grid, x_grid);
    field.row_mut(0).copy_from_slice(ic);
    let mut u = ic.to_vec();
    let mut w = vec![T::zero(); n];
    let mut d = vec![T::zero(); n];
    for k in 1..t_grid.len() {
        for (wi, ui) in w.iter_mut().zip(&u) {
            *wi = ui.max(T::zero()).powf(beta);
        }
        second_difference(&w, &mut d);
        for i in 1..n - 1 {
            u[i] = u[i] + lam * d[i];
        }
        let (l, r) = bc(k, t_grid.point(k));
        u[0] = l;
        u[n - 1] = r;
        if u.iter().any(|v| !v.is_finite()) {
            field.mark_diverged(k);
            return Ok(field);
        }
        field.row_mut(k).copy_from_slice(&u);
    }
    Ok(field)
}

/// Forward solver used inside the β objective.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PmeSolver {
    NewtonImplicit {
        #[serde(default = "default_newton_tol")]
        newton_tol: f64,
        #[serde(default = "default_newton_max_iter")]
        newton_max_iter: usize,
        #[serde(default = "default_jac_h")]
        jac_h: f64,
    },
    Ftcs,
}

impl PmeSolver {
    pub fn newton() -> Self {
        PmeSolver::NewtonImplicit {
            newton_tol: default_newton_tol(),
            newton_max_iter: default_newton_max_iter(),
            jac_h: default_jac_h(),
        }
    }

    /// Solves on the reference's grid, reusing its first row and boundary columns.
    pub fn solve_like(&self, beta: f64, reference: &Field2D<f64>) -> Result<Field2D<f64>> {
        let ic = reference.row(0).to_vec();
        let last = reference.n_cols() - 1;
        let bc = |k: usize, _t: f64| (reference.get(k, 0), reference.get(k, last));
        match *self {
            PmeSolver::NewtonImplicit { newton_tol, newton_max_iter, jac_h } => {
                let config = PmeConfig {
                    beta,
                    x_grid: reference.x_grid,
                    dt: reference.t_grid.h,
                    t_end: reference.t_grid.b,
                    newton_tol,
                    newton_max_iter,
                    jac_h,
                };
                pme_solve_direct_with(&config, &ic, bc)
            }
            PmeSolver::Ftcs => {
                pme_ftcs_solve(beta, reference.x_grid, reference.t_grid.h, reference.t_grid.b, &ic, bc)
            }
        }
    }
}

/// `Σ (a - b)²` over rows `rows`; grids must agree.
pub fn sum_sq_diff(a: &Field2D<f64>, b: &Field2D<f64>, rows: std::ops::Range<usize>) -> Result<f64> {
    if !a.same_grid(b) {
        return Err(Error::GridMismatch(format!(
            "{} x {} vs {} x {}",
            a.n_rows(),
            a.n_cols(),
            b.n_rows(),
            b.n_cols()
        )));
    }
    let c = a.n_cols();
    let span = rows.start * c..rows.end * c;
    Ok(a.values[span.clone()].iter().zip(&b.values[span]).map(|(x, y)| (x - y) * (x - y)).sum())
}

/// `J(β) = Σ_{k,i} (u_β - u_ref)²` over the full grid, or the sentinel when
/// the forward solve diverges.
pub fn pme_inverse_objective(beta: f64, reference: &Field2D<f64>, solver: &PmeSolver) -> Result<f64> {
    if !beta.is_finite() {
        return Ok(SENTINEL);
    }
    let field = solver.solve_like(beta, reference)?;
    if field.status.diverged {
        return Ok(SENTINEL);
    }
    let j = sum_sq_diff(&field, reference, 0..field.n_rows())?;
    Ok(if j.is_finite() { j } else { SENTINEL })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaMethod {
    Box,
    Bfgs,
    Steepest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BetaFitOptions {
    pub n_max: usize,
    pub tol: f64,
    /// Central-difference step for `dJ/dβ`; by default 1e-4 for the Newton
    /// solver, whose objective carries noise at the Newton tolerance, and
    /// 1e-6 for FTCS.
    pub fd_step: Option<f64>,
}

impl Default for BetaFitOptions {
    fn default() -> Self {
        Self { n_max: DEFAULT_N_MAX, tol: DEFAULT_TOL, fd_step: None }
    }
}

impl PmeSolver {
    pub fn default_fd_step(&self) -> f64 {
        match self {
            PmeSolver::NewtonImplicit { .. } => 1e-4,
            PmeSolver::Ftcs => 1e-6,
        }
    }
}

/// Recovers β by minimizing [`pme_inverse_objective`]. Interpolation and
/// extrapolation errors are mean squared misfits over the first and second
/// halves of the time rows.
pub fn estimate_beta(
    reference: &Field2D<f64>,
    beta0: f64,
    bounds: (f64, f64),
    solver: &PmeSolver,
    method: BetaMethod,
    truth: Option<f64>,
    opts: &BetaFitOptions,
) -> Result<OptimizerReport> {
    if method == BetaMethod::Box && !(bounds.0 <= beta0 && beta0 <= bounds.1) {
        return Err(Error::InfeasibleStart);
    }
    let start = Instant::now();
    let objective = |x: &[f64]| pme_inverse_objective(x[0], reference, solver).unwrap_or(SENTINEL);
    let f = ScalarFn::new(objective).with_fd_step(opts.fd_step.unwrap_or_else(|| solver.default_fd_step()));
    let outcome = match method {
        BetaMethod::Box => box_minimize(&f, &[beta0], &[bounds.0], &[bounds.1], opts.n_max, opts.tol)?,
        BetaMethod::Bfgs => bfgs_minimize(&f, &[beta0], opts.n_max, opts.tol)?,
        BetaMethod::Steepest => steepest_descent(&f, &[beta0], opts.n_max, opts.tol)?,
    };
    let beta_hat = outcome.solution[0];
    let feval = objective(&outcome.solution);
    let (interp_error, extrap_error) = match solver.solve_like(beta_hat, reference) {
        Ok(field) if !field.status.diverged => {
            let rows = field.n_rows();
            let mid = rows / 2;
            let c = field.n_cols() as f64;
            (
                sum_sq_diff(&field, reference, 0..mid)? / (mid as f64 * c),
                sum_sq_diff(&field, reference, mid..rows)? / ((rows - mid) as f64 * c),
            )
        }
        _ => (f64::NAN, f64::NAN),
    };
    Ok(OptimizerReport {
        method: format!("{method:?}").to_lowercase(),
        params_hat: vec![beta_hat],
        rel_errors: rel_errors(&[beta_hat], truth.map(|t| vec![t]).as_deref()),
        feval,
        interp_error,
        extrap_error,
        iterations: outcome.iterations,
        converged: outcome.converged,
        stop: outcome.stop,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Explicit-scheme benchmark on `[0, 1]`: `u0 = base − amplitude·sin(πx)`,
/// both boundaries held at `base`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FtcsBenchmark {
    pub beta: f64,
    pub n_intervals: usize,
    pub dt: f64,
    pub t_end: f64,
    pub base: f64,
    pub amplitude: f64,
}

impl Default for FtcsBenchmark {
    fn default() -> Self {
        Self { beta: 2.0, n_intervals: 50, dt: 1e-4, t_end: 0.2, base: 0.9, amplitude: 0.5 }
    }
}

impl FtcsBenchmark {
    pub fn new(beta: f64) -> Self {
        Self { beta, ..Self::default() }
    }

    pub fn solve(&self) -> Result<Field2D<f64>> {
        let g = Grid1D::new(0.0, 1.0, self.n_intervals)?;
        let ic: Vec<f64> = g.points().iter().map(|x| self.base - self.amplitude * (PI * x).sin()).collect();
        pme_ftcs_solve(self.beta, g, self.dt, self.t_end, &ic, |_, _| (self.base, self.base))
    }
}

/// Relative L2 error at `t_end` of a heat scheme on `sin(πx)` over `[0, 1]`
/// with `n` intervals, measured against the exact solution of the
/// semi-discrete system so that only the temporal error remains.
pub fn heat_sine_error(scheme: HeatScheme, n: usize, tau: f64, t_end: f64) -> Result<f64> {
    let g = Grid1D::new(0.0, 1.0, n)?;
    let ic: Vec<f64> = g.points().iter().map(|x| (PI * x).sin()).collect();
    let f = heat_solve(scheme, &ic, g, tau, t_end, |_| (0.0, 0.0), false)?;
    let k = f.n_rows() - 1;
    let lam = 4.0 / (g.h * g.h) * (PI * g.h / 2.0).sin().powi(2);
    let decay = (-lam * t_end).exp();
    let (mut num, mut den) = (0.0, 0.0);
    for (i, x) in g.points().iter().enumerate() {
        let exact = decay * (PI * x).sin();
        num += (f.get(k, i) - exact).powi(2);
        den += exact * exact;
    }
    Ok((num / den).sqrt())
}

/// Relative L2 error of `approx` against `exact` over the full grid.
pub fn field_rel_l2(approx: &Field2D<f64>, exact: &Field2D<f64>) -> Result<f64> {
    let num = sum_sq_diff(approx, exact, 0..approx.n_rows())?;
    let den: f64 = exact.values.iter().map(|v| v * v).sum();
    Ok((num / den).sqrt())
}

/// Sidecar describing how a field was produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub beta: f64,
    pub delta: Option<f64>,
    pub t_grid: Grid1D<f64>,
    pub x_grid: Grid1D<f64>,
    pub dt: f64,
    pub scheme: String,
}

/// Writes the field as CSV: first row holds x, first column holds t.
pub fn write_field_csv(path: &Path, field: &Field2D<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t\\x".to_string()];
    header.extend(field.x_grid.points().iter().map(|x| format!("{x:?}")));
    w.write_record(&header)?;
    for k in 0..field.n_rows() {
        let mut rec = vec![format!("{:?}", field.t_grid.point(k))];
        rec.extend(field.row(k).iter().map(|v| format!("{v:?}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_field_meta(path: &Path, meta: &FieldMeta) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(meta)?)?;
    Ok(())
}

/// Reads a field written by [`write_field_csv`]; grids are rebuilt from the
/// first and last coordinates.
pub fn read_field_csv(path: &Path) -> Result<Field2D<f64>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut xs: Vec<f64> = Vec::new();
    for (idx, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| Error::InvalidArgument(format!("{s}: {e}")));
        if idx == 0 {
            xs = rec.iter().skip(1).map(parse).collect::<Result<_>>()?;
        } else {
            rows.push(rec.iter().map(parse).collect::<Result<_>>()?);
        }
    }
    if xs.len() < 2 || rows.len() < 2 {
        return Err(Error::InvalidArgument("field CSV needs at least two rows and columns".into()));
    }
    let x_grid = Grid1D::new(xs[0], xs[xs.len() - 1], xs.len() - 1)?;
    let t_grid = Grid1D::new(rows[0][0], rows[rows.len() - 1][0], rows.len() - 1)?;
    let mut field = Field2D::zeros(t_grid, x_grid);
    for (k, row) in rows.iter().enumerate() {
        if row.len() != xs.len() + 1 {
            return Err(Error::GridMismatch(format!("row {k} has {} values", row.len() - 1)));
        }
        field.row_mut(k).copy_from_slice(&row[1..]);
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::HyperDual;
    use std::f64::consts::PI;

    fn sine_ic(x_grid: &Grid1D<f64>) -> Vec<f64> {
        x_grid.points().iter().map(|x| (PI * x).sin()).collect()
    }

    #[test]
    fn barenblatt_values() {
        assert_eq!(barenblatt(0.0, 0.0, 1.0), 1.0);
        assert!((barenblatt(0.0f64, 1.0, 1.0) - (11.0f64 / 12.0).sqrt()).abs() < 1e-15);
        assert_eq!(barenblatt(0.0, 4.0, 1.0), 0.0);
        let b = BarenblattParams::default();
        assert_eq!(b.eval(0.0, 0.0), 1.0);
    }

    #[test]
    fn barenblatt_solves_the_equation() {
        // u_t - (u^3)_xx = u_t - 3u²u_xx - 6u u_x² via hyper-dual derivatives
        for &(t, x) in &[(0.0, 0.3), (0.5, -0.7), (1.0, 0.9)] {
            let ut = barenblatt(HyperDual::variable(t), HyperDual::constant(x), HyperDual::constant(1.0f64)).e1;
            let ux = barenblatt(HyperDual::constant(t), HyperDual::variable(x), HyperDual::constant(1.0f64));
            let (u, dx, dxx) = (ux.re, ux.e1, ux.e12);
            let res = ut - 3.0 * u * u * dxx - 6.0 * u * dx * dx;
            assert!(res.abs() < 1e-12, "{res}");
        }
    }

    #[test]
    fn heat_zero_data() {
        let g = Grid1D::new(0.0, 1.0, 10).unwrap();
        for s in [HeatScheme::ForwardEuler, HeatScheme::BackwardEuler, HeatScheme::CrankNicolson, HeatScheme::MethodOfLinesRk4] {
            let f = heat_solve(s, &vec![0.0; 11], g, 0.001, 0.01, |_| (0.0, 0.0), false).unwrap();
            assert!(f.values.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn crank_nicolson_matches_decay() {
        let g = Grid1D::new(0.0, 1.0, 100).unwrap();
        let f = heat_solve(HeatScheme::CrankNicolson, &sine_ic(&g), g, 0.001, 0.1, |_| (0.0, 0.0), false).unwrap();
        let k = f.n_rows() - 1;
        let decay = (-PI * PI * 0.1f64).exp();
        let (mut num, mut den) = (0.0, 0.0);
        for (i, x) in g.points().iter().enumerate() {
            let exact = decay * (PI * x).sin();
            num += (f.get(k, i) - exact).powi(2);
            den += exact * exact;
        }
        assert!((num / den).sqrt() <= 1e-4);
    }

    #[test]
    fn temporal_orders() {
        let cn = heat_sine_error(HeatScheme::CrankNicolson, 50, 0.01, 0.1).unwrap() / heat_sine_error(HeatScheme::CrankNicolson, 50, 0.005, 0.1).unwrap();
        assert!((3.0..=5.0).contains(&cn), "{cn}");
        let be = heat_sine_error(HeatScheme::BackwardEuler, 50, 0.01, 0.1).unwrap() / heat_sine_error(HeatScheme::BackwardEuler, 50, 0.005, 0.1).unwrap();
        assert!((1.6..=2.6).contains(&be), "{be}");
        let h2 = 0.02f64 * 0.02;
        let rk = heat_sine_error(HeatScheme::MethodOfLinesRk4, 50, h2, 0.1).unwrap() / heat_sine_error(HeatScheme::MethodOfLinesRk4, 50, h2 / 2.0, 0.1).unwrap();
        assert!(rk > 12.0, "{rk}");
    }

    #[test]
    fn forward_euler_stability_dichotomy() {
        let g = Grid1D::new(0.0, 1.0, 50).unwrap();
        let h2 = g.h * g.h;
        let ic = sine_ic(&g);
        let stable = heat_solve(HeatScheme::ForwardEuler, &ic, g, 0.4 * h2, 2000.0 * 0.4 * h2, |_| (0.0, 0.0), false).unwrap();
        assert!(!stable.status.diverged);
        assert!(stable.values.iter().all(|v| v.abs() <= 1.0));
        assert!(heat_solve(HeatScheme::ForwardEuler, &ic, g, 0.6 * h2, 0.6 * h2 * 4000.0, |_| (0.0, 0.0), false).is_err());
        let unstable =
            heat_solve(HeatScheme::ForwardEuler, &ic, g, 0.6 * h2, 0.6 * h2 * 4000.0, |_| (0.0, 0.0), true).unwrap();
        assert!(unstable.status.diverged);
    }

    #[test]
    fn tau_must_divide_horizon() {
        let g = Grid1D::new(0.0, 1.0, 10).unwrap();
        assert!(heat_solve(HeatScheme::BackwardEuler, &vec![0.0; 11], g, 0.3, 1.0, |_| (0.0, 0.0), false).is_err());
        assert!(heat_solve(HeatScheme::BackwardEuler, &vec![0.0; 3], g, 0.1, 1.0, |_| (0.0, 0.0), false).is_err());
    }

    #[test]
    fn residual_cases() {
        let c = vec![0.7f64; 5];
        let f = pme_residual(&c, &c, (0.7, 0.7), 3.0, 0.01, 0.1);
        assert!(f.iter().all(|v| v.abs() < 1e-15));

        // hand computation, u_old = [0,1,0], u_new = [0,0.9,0], β=3, Δt=Δx=0.1
        let f = pme_residual(&[0.0, 0.9, 0.0], &[0.0, 1.0, 0.0], (0.0, 0.0), 3.0, 0.1, 0.1);
        let coef = 3.0 * 0.1 / 0.01;
        let a = 0.45f64 * 0.45;
        let expect = [-coef * (a * 0.9), 0.9 - 1.0 - coef * (a * -0.9 - a * 0.9), -coef * (a * 0.9)];
        for (x, y) in f.iter().zip(&expect) {
            assert!((x - y).abs() < 1e-12, "{x} vs {y}");
        }

        // β = 1 is the backward-Euler heat residual
        let u_new = [0.2f64, 0.5, 0.4, 0.1];
        let u_old = [0.3, 0.6, 0.2, 0.0];
        let (l, r, dt, dx) = (0.1f64, 0.05, 0.01, 0.1);
        let lam = dt / (dx * dx);
        let f = pme_residual(&u_new, &u_old, (l, r), 1.0, dt, dx);
        for i in 0..4 {
            let ul = if i == 0 { l } else { u_new[i - 1] };
            let ur = if i == 3 { r } else { u_new[i + 1] };
            let heat = (1.0 + 2.0 * lam) * u_new[i] - lam * (ul + ur) - u_old[i];
            assert!((f[i] - heat).abs() < 1e-14);
        }
    }

    #[test]
    fn jacobian_checks() {
        let (dt, dx) = (0.01f64, 0.1f64);
        let lam = dt / (dx * dx);
        let u = [0.2f64, 0.5, 0.4, 0.1];
        let u_old = [0.3, 0.6, 0.2, 0.0];
        let j = pme_jacobian_fd(&u, &u_old, (0.1, 0.05), 1.0, dt, dx, 1e-6);
        for i in 0..4usize {
            for k in 0..4usize {
                let exact = if i == k { 1.0 + 2.0 * lam } else if i.abs_diff(k) == 1 { -lam } else { 0.0 };
                assert!((j[i * 4 + k] - exact).abs() <= 1e-6 * (1.0 + 2.0 * lam));
            }
        }
        // central-difference oracle with a larger step
        let u = [0.61f64, 0.83, 0.47, 0.92, 0.35];
        let u_old = [0.6, 0.8, 0.5, 0.9, 0.4];
        let bounds = (0.5, 0.3);
        let j = pme_jacobian_fd(&u, &u_old, bounds, 3.0, dt, dx, 1e-6);
        let h = 1e-4;
        for k in 0..5 {
            let mut up = u;
            let mut um = u;
            up[k] += h;
            um[k] -= h;
            let fp = pme_residual(&up, &u_old, bounds, 3.0, dt, dx);
            let fm = pme_residual(&um, &u_old, bounds, 3.0, dt, dx);
            for i in 0..5 {
                let c: f64 = (fp[i] - fm[i]) / (2.0 * h);
                let scale = c.abs().max(1e-2);
                assert!((j[i * 5 + k] - c).abs() <= 1e-4 * scale, "({i},{k}) {} vs {c}", j[i * 5 + k]);
            }
        }
    }

    #[test]
    fn direct_solver_trivial_and_linear() {
        let mut cfg = PmeConfig::reference(3.0);
        cfg.t_end = 0.1;
        let zero = pme_solve_direct(&cfg, |_| 0.0, |_| (0.0, 0.0)).unwrap();
        assert!(zero.values.iter().all(|v| *v == 0.0));
        assert!(zero.status.newton_iterations.iter().all(|&n| n == 0));

        let mut lin = PmeConfig::reference(1.0);
        lin.newton_tol = 1e-12;
        let ic = |x: f64| 1.0 + 0.5 * (PI * x).cos();
        let bc = |t: f64| (0.5 + t, 0.5 - 0.2 * t);
        let a = pme_solve_direct(&lin, ic, bc).unwrap();
        let ic_v: Vec<f64> = lin.x_grid.points().into_iter().map(ic).collect();
        let b = heat_solve(HeatScheme::BackwardEuler, &ic_v, lin.x_grid, lin.dt, lin.t_end, bc, false).unwrap();
        let diff = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff <= 1e-8, "{diff}");
    }

    #[test]
    fn barenblatt_direct_accuracy() {
        let cfg = PmeConfig::reference(3.0);
        let b = BarenblattParams::default();
        let field = pme_solve_direct(&cfg, |x| b.eval(0.0, x), |t| (b.eval(t, -1.0), b.eval(t, 1.0))).unwrap();
        assert!(field.status.stalled_steps.is_empty());
        assert!(field.values.iter().all(|v| *v >= -1e-8));
        let exact = b.field(field.t_grid, field.x_grid);
        let err = field_rel_l2(&field, &exact).unwrap();
        assert!(err <= 3.2e-2, "{err}");
        // the objective at the generating β is the squared direct-problem error
        let j = pme_inverse_objective(3.0, &exact, &PmeSolver::newton()).unwrap();
        let sq = sum_sq_diff(&field, &exact, 0..field.n_rows()).unwrap();
        assert!((j - sq).abs() <= 1e-12 * sq);
    }

    fn ftcs_reference(beta: f64) -> Field2D<f64> {
        FtcsBenchmark::new(beta).solve().unwrap()
    }

    #[test]
    fn ftcs_behaviour() {
        let g = Grid1D::new(0.0, 1.0, 50).unwrap();
        let ic = sine_ic(&g);
        let a = pme_ftcs_solve(1.0, g, 1e-4, 0.05, &ic, |_, _| (0.0, 0.0)).unwrap();
        let b = heat_solve(HeatScheme::ForwardEuler, &ic, g, 1e-4, 0.05, |_| (0.0, 0.0), false).unwrap();
        let diff = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff <= 1e-12);
        assert!(!ftcs_reference(2.0).status.diverged);
        assert!(!ftcs_reference(2.2).status.diverged);
        assert!(ftcs_reference(3.0).status.diverged);
        let reference = ftcs_reference(2.0);
        assert_eq!(pme_inverse_objective(3.0, &reference, &PmeSolver::Ftcs).unwrap(), SENTINEL);
        assert!(pme_inverse_objective(2.0, &reference, &PmeSolver::Ftcs).unwrap() <= 1e-20);
        let j = pme_inverse_objective(2.2, &reference, &PmeSolver::Ftcs).unwrap();
        assert!(j > 0.0 && j < SENTINEL);
    }

    #[test]
    fn objective_minimum_on_grid() {
        let reference = ftcs_reference(2.0);
        let mut best = (f64::INFINITY, 0.0);
        let mut beta = 1.1;
        while beta <= 10.0 + 1e-9 {
            let j = pme_inverse_objective(beta, &reference, &PmeSolver::Ftcs).unwrap();
            if j < best.0 {
                best = (j, beta);
            }
            beta += 0.05;
        }
        assert!((best.1 - 2.0f64).abs() < 0.026, "{best:?}");
    }

    #[test]
    fn ftcs_beta_recovery() {
        let reference = ftcs_reference(2.0);
        let opts = BetaFitOptions::default();
        let rep = estimate_beta(&reference, 1.5, (0.1, 10.0), &PmeSolver::Ftcs, BetaMethod::Box, Some(2.0), &opts).unwrap();
        assert!((rep.params_hat[0] - 2.0).abs() <= 1e-2, "{rep:?}");
        let at = estimate_beta(&reference, 2.0, (0.1, 10.0), &PmeSolver::Ftcs, BetaMethod::Bfgs, Some(2.0), &opts).unwrap();
        assert!(at.feval <= 1e-20 && at.rel_errors[0] == 0.0);
        let stuck = estimate_beta(&reference, 3.0, (0.1, 10.0), &PmeSolver::Ftcs, BetaMethod::Box, Some(2.0), &opts).unwrap();
        assert_eq!(stuck.feval, SENTINEL);
        assert!(matches!(
            estimate_beta(&reference, 20.0, (0.1, 10.0), &PmeSolver::Ftcs, BetaMethod::Box, None, &opts),
            Err(Error::InfeasibleStart)
        ));
    }

    #[test]
    fn grid_mismatch_detected() {
        let a = ftcs_reference(2.0);
        let g = Grid1D::new(0.0, 1.0, 10).unwrap();
        let b = Field2D::zeros(a.t_grid, g);
        assert!(matches!(sum_sq_diff(&a, &b, 0..1), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn field_csv_round_trip() {
        let f = ftcs_reference(2.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.csv");
        write_field_csv(&path, &f).unwrap();
        let back = read_field_csv(&path).unwrap();
        assert_eq!(back.values, f.values);
        assert_eq!(back.n_rows(), f.n_rows());
        let meta = FieldMeta { beta: 2.0, delta: None, t_grid: f.t_grid, x_grid: f.x_grid, dt: 1e-4, scheme: "ftcs".into() };
        write_field_meta(&dir.path().join("field.json"), &meta).unwrap();
    }
}
