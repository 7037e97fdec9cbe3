//! Ready-made PINN experiments: network, point sets, loss and evaluation.

use std::collections::BTreeMap;

use inversa_core::logistic::LogisticParams;
use inversa_core::metrics::rel_l2_error;
use inversa_core::pme::barenblatt;
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::collocation::{test_points, times, CollocationSets, Domain, Sampling, SetSizes};
use crate::loss::{Exponent, InverseUnknowns, LogisticDirectLoss, LogisticInverseLoss, PinnLoss, PmeLoss};
use crate::mlp::{Mlp, OutputActivation};
use crate::train::{train_pinn, TrainResult, TrainSchedule};
use crate::{PinnError, Result};

fn network(input: usize, hidden: &[usize], output: OutputActivation, seed: u64) -> Result<Mlp> {
    let sizes: Vec<usize> = std::iter::once(input).chain(hidden.iter().copied()).chain([1]).collect();
    Mlp::xavier(&sizes, output, seed)
}

fn scalar_map(loss: &dyn PinnLoss, raw: &[f64]) -> BTreeMap<String, f64> {
    loss.scalar_names().into_iter().map(String::from).zip(loss.scalar_values(raw)).collect()
}

/// Trained model together with everything needed to report on it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PinnRun {
    pub train: TrainResult,
    pub checkpoint: Checkpoint,
    /// Relative L2 error of the final model on the evaluation points.
    pub rel_l2: f64,
    /// Same, for the model at the end of the Adam phase.
    pub rel_l2_adam: f64,
    /// Physical values of the trainable scalars, final model.
    pub scalars: BTreeMap<String, f64>,
    pub scalars_adam: BTreeMap<String, f64>,
    /// Evaluation points (`[t]` or `[t, x]`), predictions and exact values.
    pub eval_points: Vec<Vec<f64>>,
    pub predicted: Vec<f64>,
    pub exact: Vec<f64>,
}

fn finish_run(
    loss: &dyn PinnLoss,
    train: TrainResult,
    schedule: &TrainSchedule,
    scale: f64,
    eval_points: Vec<Vec<f64>>,
    exact: Vec<f64>,
) -> Result<PinnRun> {
    let predict = |net: &Mlp| -> Vec<f64> { eval_points.iter().map(|p| scale * net.value(p)).collect() };
    let predicted = predict(&train.final_state.net);
    let rel_l2 = rel_l2_error(&predicted, &exact)?;
    let rel_l2_adam = rel_l2_error(&predict(&train.after_adam.net), &exact)?;
    let scalars = scalar_map(loss, &train.final_state.scalars);
    let scalars_adam = scalar_map(loss, &train.after_adam.scalars);
    let checkpoint = Checkpoint::new(&train.final_state.net, scalars.clone(), schedule);
    Ok(PinnRun { train, checkpoint, rel_l2, rel_l2_adam, scalars, scalars_adam, eval_points, predicted, exact })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LogisticDirectPinn {
    pub params: LogisticParams,
    pub t_end: f64,
    pub n_colloc: usize,
    pub sampling: Sampling,
    pub n_eval: usize,
    pub hidden: Vec<usize>,
    /// Learn `u = p / K` with a sigmoid output instead of `p` directly.
    pub normalized: bool,
    pub schedule: TrainSchedule,
}

impl Default for LogisticDirectPinn {
    fn default() -> Self {
        Self {
            params: LogisticParams { r: 0.079, k: 10.0, p0: 20.0, t0: 0.0 },
            t_end: 5.0,
            n_colloc: 100,
            sampling: Sampling::Uniform,
            n_eval: 200,
            hidden: vec![32, 32],
            normalized: false,
            schedule: TrainSchedule { adam_epochs: 5000, adam_lr: 1e-3, lbfgs_max_iter: 0, ..Default::default() },
        }
    }
}

impl LogisticDirectPinn {
    pub fn run(&self) -> Result<PinnRun> {
        let p = self.params;
        p.validate()?;
        let colloc = times(p.t0, self.t_end, self.n_colloc, self.sampling)?;
        let (scale, output) = if self.normalized { (p.k, OutputActivation::Sigmoid) } else { (1.0, OutputActivation::Linear) };
        let loss = LogisticDirectLoss::new(p.r, p.k, p.p0, p.t0, &colloc, scale)?;
        let net = network(1, &self.hidden, output, self.schedule.seed)?;
        let train = train_pinn(&loss, &net, &self.schedule)?;
        let ts = times(p.t0, self.t_end, self.n_eval, Sampling::Uniform)?;
        let exact = ts.iter().map(|&t| p.exact(t)).collect();
        finish_run(&loss, train, &self.schedule, scale, ts.into_iter().map(|t| vec![t]).collect(), exact)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LogisticInversePinn {
    /// Ground truth used to synthesize the observations.
    pub params: LogisticParams,
    pub unknowns: InverseUnknowns,
    pub t_end: f64,
    pub n_data: usize,
    pub n_colloc: usize,
    pub sampling: Sampling,
    pub r_init: f64,
    /// Starting carrying capacity when it is trained.
    pub k_init: Option<f64>,
    pub lambda_data: f64,
    pub hidden: Vec<usize>,
    /// Learn `u = p / K` (known `K` only). The raw scale leaves `r` at zero
    /// when `p0 > K`.
    pub normalized: bool,
    pub sigmoid_output: bool,
    pub schedule: TrainSchedule,
}

impl Default for LogisticInversePinn {
    fn default() -> Self {
        Self {
            params: LogisticParams { r: 0.079, k: 10.0, p0: 20.0, t0: 0.0 },
            unknowns: InverseUnknowns::ROnly,
            t_end: 10.0,
            n_data: 30,
            n_colloc: 100,
            sampling: Sampling::Uniform,
            r_init: 0.5,
            k_init: None,
            lambda_data: 1.0,
            hidden: vec![32, 32],
            normalized: true,
            sigmoid_output: false,
            schedule: TrainSchedule { adam_epochs: 10000, adam_lr: 1e-3, lbfgs_max_iter: 0, ..Default::default() },
        }
    }
}

impl LogisticInversePinn {
    pub fn run(&self) -> Result<PinnRun> {
        let p = self.params;
        p.validate()?;
        if self.normalized && self.unknowns == InverseUnknowns::RAndK {
            return Err(PinnError::Config("normalization needs a known carrying capacity".into()));
        }
        let data: Vec<(f64, f64)> =
            times(p.t0, self.t_end, self.n_data, Sampling::Uniform)?.into_iter().map(|t| (t, p.exact(t))).collect();
        let colloc = times(p.t0, self.t_end, self.n_colloc, self.sampling)?;
        let scale = if self.normalized { p.k } else { 1.0 };
        let output = if self.sigmoid_output { OutputActivation::Sigmoid } else { OutputActivation::Linear };
        let k = match self.unknowns {
            InverseUnknowns::ROnly => p.k,
            InverseUnknowns::RAndK => self.k_init.unwrap_or(p.k),
        };
        let loss = LogisticInverseLoss::new(self.unknowns, k, self.r_init, p.p0, p.t0, &colloc, &data, self.lambda_data, scale)?;
        let net = network(1, &self.hidden, output, self.schedule.seed)?;
        let train = train_pinn(&loss, &net, &self.schedule)?;
        let exact = data.iter().map(|d| d.1).collect();
        finish_run(&loss, train, &self.schedule, scale, data.iter().map(|d| vec![d.0]).collect(), exact)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PmePinn {
    /// Barenblatt time shift; the exact solution supplies boundary, initial
    /// and measurement values.
    pub delta: f64,
    pub exponent: Exponent,
    pub sizes: SetSizes,
    /// Measurement grid `[nt, nx]`; absent for the direct problem.
    pub measurements: Option<[usize; 2]>,
    pub lambda_u: f64,
    pub lambda_s: f64,
    pub hidden: Vec<usize>,
    pub n_test: usize,
    pub schedule: TrainSchedule,
}

impl Default for PmePinn {
    fn default() -> Self {
        Self {
            delta: 1.0,
            exponent: Exponent::Fixed { beta: 3.0 },
            sizes: SetSizes::default(),
            measurements: None,
            lambda_u: 10.0,
            lambda_s: 10.0,
            hidden: vec![20; 4],
            n_test: 50_000,
            schedule: TrainSchedule { adam_epochs: 10000, adam_lr: 1e-3, lbfgs_max_iter: 0, ..Default::default() },
        }
    }
}

impl PmePinn {
    /// Inverse problem from `beta0` with a 40 × 40 measurement grid.
    pub fn inverse(beta0: f64) -> Self {
        Self { exponent: Exponent::Trainable { beta0 }, measurements: Some([40, 40]), ..Self::default() }
    }

    pub fn run(&self) -> Result<PinnRun> {
        if !(self.delta > 0.0) {
            return Err(PinnError::Config("delta must be positive".into()));
        }
        let domain = Domain::default();
        let exact = |t: f64, x: f64| barenblatt(t, x, self.delta);
        let mut sets = CollocationSets::pme(domain, self.sizes, exact)?;
        if let Some([nt, nx]) = self.measurements {
            sets = sets.with_grid_measurements(domain, nt, nx, exact)?;
        }
        let loss = PmeLoss::new(self.exponent, &sets, self.lambda_u, self.lambda_s)?;
        let net = network(2, &self.hidden, OutputActivation::Linear, self.schedule.seed)?;
        let train = train_pinn(&loss, &net, &self.schedule)?;
        let pts = test_points(domain, self.n_test);
        let exact_vals = pts.iter().map(|p| exact(p[0], p[1])).collect();
        finish_run(&loss, train, &self.schedule, 1.0, pts.iter().map(|p| p.to_vec()).collect(), exact_vals)
    }
}
