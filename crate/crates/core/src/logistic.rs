//! Logistic growth: closed-form solution, pointwise rate recovery, normalized
//! least-squares losses and parameter fitting.

use std::path::Path;
use std::time::Instant;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dual::{gradient, gradient_and_hessian, HyperDual};
use crate::error::{Error, Result};
use crate::grid::{Grid1D, TimeSeries};
use crate::optimize::{
    bfgs_minimize, box_minimize, newton_root, newton_system, numeric_gradient, secant_root,
    steepest_descent, ScalarFn, SolveOutcome, DEFAULT_N_MAX, DEFAULT_TOL, SENTINEL,
};
use crate::report::{rel_errors, OptimizerReport};
use crate::rng::seeded;
use crate::scalar::Real;

const EXP_LIMIT: f64 = 700.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticParams {
    pub r: f64,
    #[serde(rename = "K", alias = "k")]
    pub k: f64,
    pub p0: f64,
    #[serde(default)]
    pub t0: f64,
}

impl LogisticParams {
    pub fn new(r: f64, k: f64, p0: f64, t0: f64) -> Result<Self> {
        let p = Self { r, k, p0, t0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0) || !(self.p0 > 0.0) || !self.r.is_finite() || !self.t0.is_finite() {
            return Err(Error::InvalidArgument(format!("logistic parameters need K > 0, p0 > 0: {self:?}")));
        }
        Ok(())
    }

    pub fn exact(&self, t: f64) -> f64 {
        logistic_exact(t, self.r, self.k, self.p0, self.t0)
    }

    pub fn rhs(&self, _t: f64, y: f64) -> f64 {
        logistic_rhs(y, self.r, self.k)
    }
}

/// `K p0 e^{r(t-t0)} / (K - p0 + p0 e^{r(t-t0)})`, returning `K` once the
/// exponent passes 700.
pub fn logistic_exact<T: Real>(t: T, r: T, k: T, p0: T, t0: T) -> T {
    let z = r * (t - t0);
    if z > T::lit(EXP_LIMIT) {
        // dividing through by e^z leaves K p0 / (p0 + (K - p0) e^{-z}) -> K
        return k * p0 / (p0 + (k - p0) * (-z).exp());
    }
    let e = z.exp();
    k * p0 * e / (k - p0 + p0 * e)
}

pub fn logistic_rhs<T: Real>(y: T, r: T, k: T) -> T {
    r * y * (T::one() - y / k)
}

/// Pointwise growth rates `r_i` that reproduce each sample exactly.
pub fn analytic_r_series(data: &TimeSeries<f64>, k: f64, p0: f64, t0: f64) -> Result<TimeSeries<f64>> {
    let mut rates = Vec::with_capacity(data.len());
    for (&t, &p) in data.times.iter().zip(&data.values) {
        if t == t0 {
            return Err(Error::Domain(format!("sample at t0 = {t0} has no defined rate")));
        }
        let arg = p * (k - p0) / (p0 * (k - p));
        if !(arg > 0.0) || !arg.is_finite() {
            return Err(Error::Domain(format!("log argument {arg} at t = {t}")));
        }
        rates.push(arg.ln() / (t - t0));
    }
    TimeSeries::new(data.times.clone(), rates)
}

/// Largest relative misfit `|p(t_i; r_i) - p_i| / |p_i|`.
pub fn rate_reconstruction_error(data: &TimeSeries<f64>, rates: &TimeSeries<f64>, k: f64, p0: f64, t0: f64) -> f64 {
    data.times
        .iter()
        .zip(&data.values)
        .zip(&rates.values)
        .map(|((&t, &p), &r)| (logistic_exact(t, r, k, p0, t0) - p).abs() / p.abs())
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseSpec {
    None,
    /// White Gaussian noise at `snr` decibels relative to the measured signal power.
    AwgnSnr { snr: f64 },
    /// Gaussian noise with standard deviation `pct · max|P|`.
    GaussianPctOfMax {
        #[serde(default = "default_pct")]
        pct: f64,
    },
}

fn default_pct() -> f64 {
    0.03
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec::None
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseSpec::GaussianPctOfMax { pct } if !(0.0..=1.0).contains(&pct) => {
                Err(Error::InvalidArgument(format!("noise pct {pct} outside [0, 1]")))
            }
            NoiseSpec::AwgnSnr { snr } if !snr.is_finite() => Err(Error::InvalidArgument("snr must be finite".into())),
            _ => Ok(()),
        }
    }

    /// Standard deviation applied to a clean signal.
    pub fn sigma(&self, clean: &[f64]) -> f64 {
        match *self {
            NoiseSpec::None => 0.0,
            NoiseSpec::AwgnSnr { snr } => {
                let power = clean.iter().map(|v| v * v).sum::<f64>() / clean.len().max(1) as f64;
                (power / 10f64.powf(snr / 10.0)).sqrt()
            }
            NoiseSpec::GaussianPctOfMax { pct } => pct * clean.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
    All,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticDataset {
    pub series: TimeSeries<f64>,
    pub train_fraction: f64,
    pub noise: NoiseSpec,
    /// Known parameters: `K`, `p0`, `t0` are held fixed in the one-parameter
    /// fit; for synthetic data this is also the ground truth.
    pub model: LogisticParams,
    pub synthetic: bool,
}

impl LogisticDataset {
    pub fn new(series: TimeSeries<f64>, model: LogisticParams, synthetic: bool) -> Result<Self> {
        if series.is_empty() {
            return Err(Error::EmptySplit);
        }
        Ok(Self { series, train_fraction: 0.5, noise: NoiseSpec::None, model, synthetic })
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    /// Number of training points, `⌈fraction · m⌉`.
    pub fn train_len(&self) -> usize {
        ((self.train_fraction * self.len() as f64).ceil() as usize).min(self.len())
    }

    pub fn range(&self, split: Split) -> std::ops::Range<usize> {
        let n = self.train_len();
        match split {
            Split::Train => 0..n,
            Split::Test => n..self.len(),
            Split::All => 0..self.len(),
        }
    }

    pub fn truth(&self) -> Option<LogisticParams> {
        self.synthetic.then_some(self.model)
    }
}

pub fn generate_logistic_data(
    params: LogisticParams,
    t_start: f64,
    t_end: f64,
    m: usize,
    noise: NoiseSpec,
    seed: u64,
) -> Result<LogisticDataset> {
    params.validate()?;
    noise.validate()?;
    if m < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 samples, got {m}")));
    }
    let times = Grid1D::new(t_start, t_end, m - 1)?.points();
    let mut values: Vec<f64> = times.iter().map(|&t| params.exact(t)).collect();
    let sigma = noise.sigma(&values);
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let mut rng = seeded(seed);
        for v in &mut values {
            *v += normal.sample(&mut rng);
        }
    }
    let mut ds = LogisticDataset::new(TimeSeries::new(times, values)?, params, true)?;
    ds.noise = noise;
    Ok(ds)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    ROnly,
    #[serde(rename = "r_and_K", alias = "r_and_k")]
    RAndK,
    #[serde(rename = "r_and_logK", alias = "r_and_logk")]
    RAndLogK,
}

impl LossMode {
    pub fn dim(self) -> usize {
        match self {
            LossMode::ROnly => 1,
            _ => 2,
        }
    }

    /// Maps natural `(r, K)` onto the mode's coordinates.
    pub fn encode(self, p: &LogisticParams) -> Vec<f64> {
        match self {
            LossMode::ROnly => vec![p.r],
            LossMode::RAndK => vec![p.r, p.k],
            LossMode::RAndLogK => vec![p.r, p.k.ln()],
        }
    }

    /// Natural `(r, K)` from the mode's coordinates.
    pub fn decode(self, theta: &[f64]) -> Vec<f64> {
        match self {
            LossMode::ROnly => vec![theta[0]],
            LossMode::RAndK => vec![theta[0], theta[1]],
            LossMode::RAndLogK => vec![theta[0], theta[1].exp()],
        }
    }
}

/// Normalized misfit in any scalar type; `None` when a model value is not finite.
pub fn normalized_loss_generic<T: Real>(
    theta: &[T],
    ds: &LogisticDataset,
    mode: LossMode,
    split: Split,
) -> Result<Option<T>> {
    if theta.len() != mode.dim() {
        return Err(Error::InvalidArgument(format!("expected {} parameters, got {}", mode.dim(), theta.len())));
    }
    let range = ds.range(split);
    if range.is_empty() {
        return Err(Error::EmptySplit);
    }
    let m = ds.model;
    let (r, k) = match mode {
        LossMode::ROnly => (theta[0], T::lit(m.k)),
        LossMode::RAndK => (theta[0], theta[1]),
        LossMode::RAndLogK => (theta[0], theta[1].exp()),
    };
    let (p0, t0) = (T::lit(m.p0), T::lit(m.t0));
    let times = &ds.series.times[range.clone()];
    let values = &ds.series.values[range];
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let mut sum = T::zero();
    for (&t, &p) in times.iter().zip(values) {
        let model = logistic_exact(T::lit(t), r, k, p0, t0);
        if !model.is_finite() {
            return Ok(None);
        }
        let d = model - T::lit(p);
        sum = sum + d * d;
    }
    let denom = T::lit(values.len() as f64 * scale * scale);
    Ok(Some(sum / denom))
}

/// Normalized misfit `Σ (p(t_i) - p_i)² / (m · max|P|²)` over `split`, or the
/// sentinel when the model leaves the finite range.
pub fn normalized_loss(theta: &[f64], ds: &LogisticDataset, mode: LossMode, split: Split) -> Result<f64> {
    Ok(match normalized_loss_generic(theta, ds, mode, split)? {
        Some(v) if v.is_finite() => v,
        _ => SENTINEL,
    })
}

fn loss_hd(theta: &[HyperDual<f64>], ds: &LogisticDataset, mode: LossMode) -> HyperDual<f64> {
    match normalized_loss_generic(theta, ds, mode, Split::Train) {
        Ok(Some(v)) if v.re.is_finite() => v,
        _ => HyperDual::constant(SENTINEL),
    }
}

/// Exact gradient of the training loss.
pub fn loss_gradient(theta: &[f64], ds: &LogisticDataset, mode: LossMode) -> Vec<f64> {
    gradient(|v| loss_hd(v, ds, mode), theta).1
}

/// Exact Hessian (row-major) of the training loss.
pub fn loss_hessian(theta: &[f64], ds: &LogisticDataset, mode: LossMode) -> Vec<f64> {
    gradient_and_hessian(|v| loss_hd(v, ds, mode), theta).2
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    /// Newton on the gradient with exact derivatives.
    Newton,
    /// Newton with central-difference derivatives.
    NewtonFd,
    Secant,
    Steepest,
    Bfgs,
    Box,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    pub n_max: usize,
    pub tol: f64,
    pub fd_step: f64,
    /// Second start for the secant method, offset from `init[0]`.
    pub secant_offset: f64,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { n_max: DEFAULT_N_MAX, tol: DEFAULT_TOL, fd_step: 1e-6, secant_offset: 0.01, lower: None, upper: None }
    }
}

/// Default box bounds in the mode's coordinates.
pub fn default_bounds(mode: LossMode) -> (Vec<f64>, Vec<f64>) {
    match mode {
        LossMode::ROnly => (vec![1e-6], vec![10.0]),
        LossMode::RAndK => (vec![1e-6, 1.0], vec![10.0, 1e12]),
        LossMode::RAndLogK => (vec![1e-6, 0.0], vec![10.0, 1e12f64.ln()]),
    }
}

/// Minimizes the training loss from `init` (mode coordinates). The report
/// carries natural `(r[, K])`.
pub fn fit_logistic(
    ds: &LogisticDataset,
    mode: LossMode,
    method: FitMethod,
    init: &[f64],
    opts: &FitOptions,
) -> Result<OptimizerReport> {
    if init.len() != mode.dim() {
        return Err(Error::InvalidArgument(format!("init has {} entries, mode needs {}", init.len(), mode.dim())));
    }
    let start = Instant::now();
    let loss = |x: &[f64]| normalized_loss(x, ds, mode, Split::Train).unwrap_or(SENTINEL);
    let exact = ScalarFn::joint(|x: &[f64]| gradient(|v| loss_hd(v, ds, mode), x));

    let outcome: SolveOutcome = match method {
        FitMethod::Newton | FitMethod::NewtonFd => {
            let fd = method == FitMethod::NewtonFd;
            let h = opts.fd_step;
            let grad = |x: &[f64]| -> Vec<f64> {
                if fd {
                    numeric_gradient(&loss, x, h * x[0].abs().max(1.0)).unwrap_or_else(|_| vec![f64::NAN; x.len()])
                } else {
                    loss_gradient(x, ds, mode)
                }
            };
            if mode.dim() == 1 {
                let df = |r: f64| grad(&[r])[0];
                let d2f = |r: f64| {
                    if fd {
                        let step = h * r.abs().max(1.0);
                        (df(r + step) - df(r - step)) / (2.0 * step)
                    } else {
                        loss_hessian(&[r], ds, mode)[0]
                    }
                };
                newton_root(df, d2f, init[0], opts.n_max, opts.tol)?
            } else {
                let hess = |x: &[f64]| -> Vec<f64> {
                    if fd {
                        fd_hessian(&grad, x, h)
                    } else {
                        loss_hessian(x, ds, mode)
                    }
                };
                newton_system(&grad, &hess, init, opts.n_max, opts.tol)?
            }
        }
        FitMethod::Secant => {
            if mode.dim() != 1 {
                return Err(Error::InvalidArgument("the secant method fits r only".into()));
            }
            let df = |r: f64| loss_gradient(&[r], ds, mode)[0];
            secant_root(df, init[0], init[0] + opts.secant_offset, opts.n_max, opts.tol)?
        }
        FitMethod::Steepest => steepest_descent(&exact, init, opts.n_max, opts.tol)?,
        FitMethod::Bfgs => bfgs_minimize(&exact, init, opts.n_max, opts.tol)?,
        FitMethod::Box => {
            let (lb, ub) = default_bounds(mode);
            let lb = opts.lower.clone().unwrap_or(lb);
            let ub = opts.upper.clone().unwrap_or(ub);
            box_minimize(&exact, init, &lb, &ub, opts.n_max, opts.tol)?
        }
    };

    let theta = &outcome.solution;
    let params_hat = mode.decode(theta);
    let truth = ds.truth().map(|p| match mode {
        LossMode::ROnly => vec![p.r],
        _ => vec![p.r, p.k],
    });
    let extrap_error = if ds.range(Split::Test).is_empty() {
        f64::NAN
    } else {
        normalized_loss(theta, ds, mode, Split::Test)?
    };
    let interp_error = loss(theta);
    Ok(OptimizerReport {
        method: format!("{method:?}").to_lowercase(),
        rel_errors: rel_errors(&params_hat, truth.as_deref()),
        params_hat,
        feval: interp_error,
        interp_error,
        extrap_error,
        iterations: outcome.iterations,
        converged: outcome.converged,
        stop: outcome.stop,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

fn fd_hessian(grad: &impl Fn(&[f64]) -> Vec<f64>, x: &[f64], h: f64) -> Vec<f64> {
    let n = x.len();
    let mut hess = vec![0.0; n * n];
    let mut xp = x.to_vec();
    for j in 0..n {
        let step = h * x[j].abs().max(1.0);
        xp[j] = x[j] + step;
        let gp = grad(&xp);
        xp[j] = x[j] - step;
        let gm = grad(&xp);
        xp[j] = x[j];
        for i in 0..n {
            hess[i * n + j] = (gp[i] - gm[i]) / (2.0 * step);
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let s = 0.5 * (hess[i * n + j] + hess[j * n + i]);
            hess[i * n + j] = s;
            hess[j * n + i] = s;
        }
    }
    hess
}

/// Writes `time,population` with round-trip precision.
pub fn write_series_csv(path: &Path, series: &TimeSeries<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["time", "population"])?;
    for (t, p) in series.times.iter().zip(&series.values) {
        w.write_record([format!("{t:?}"), format!("{p:?}")])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_series_csv(path: &Path) -> Result<TimeSeries<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for rec in r.deserialize() {
        let (t, p): (f64, f64) = rec?;
        times.push(t);
        values.push(p);
    }
    TimeSeries::new(times, values)
}
