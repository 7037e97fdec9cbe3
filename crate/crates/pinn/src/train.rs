//! Adam followed by L-BFGS, full batch.

use std::time::Instant;

use inversa_core::optimize::{lbfgs_observed, Adam, AdamParams, LbfgsOptions, ScalarFn, StopReason};
use serde::{Deserialize, Serialize};

use crate::loss::{loss_and_grad, LossValue, PinnLoss};
use crate::mlp::Mlp;
use crate::{PinnError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSchedule {
    pub adam_epochs: usize,
    pub adam_lr: f64,
    pub lbfgs_max_iter: usize,
    pub lbfgs_memory: usize,
    /// Early stopping, monitored during the L-BFGS phase.
    pub early_stopping: bool,
    pub patience: usize,
    pub min_delta: f64,
    pub seed: u64,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self {
            adam_epochs: 1000,
            adam_lr: 1e-3,
            lbfgs_max_iter: 0,
            lbfgs_memory: 50,
            early_stopping: true,
            patience: 50,
            min_delta: 1e-6,
            seed: 0,
        }
    }
}

impl TrainSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.adam_epochs > 0 && !(self.adam_lr > 0.0 && self.adam_lr.is_finite()) {
            return Err(PinnError::Config("adam_lr must be positive".into()));
        }
        if self.early_stopping && self.patience == 0 {
            return Err(PinnError::Config("patience must be at least 1 when early stopping is on".into()));
        }
        if self.lbfgs_max_iter > 0 && self.lbfgs_memory == 0 {
            return Err(PinnError::Config("lbfgs_memory must be at least 1".into()));
        }
        if !(self.min_delta >= 0.0) {
            return Err(PinnError::Config("min_delta must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Adam,
    Lbfgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub epoch: usize,
    pub phase: Phase,
    pub loss: f64,
}

/// Network and raw scalars at one point of training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub net: Mlp,
    pub scalars: Vec<f64>,
    pub loss: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainResult {
    pub final_state: Snapshot,
    /// State when the Adam phase ended.
    pub after_adam: Snapshot,
    pub history: Vec<HistoryEntry>,
    pub lbfgs_stop: Option<StopReason>,
    /// Set when a non-finite loss ended training early.
    pub aborted: Option<String>,
    pub terms: LossValue,
    pub wall_time_s: f64,
}

/// Trains `net` (and the loss's scalars) in place of a copy. A non-finite
/// loss stops training; the last finite state and the history are kept.
pub fn train_pinn(loss: &dyn PinnLoss, net: &Mlp, schedule: &TrainSchedule) -> Result<TrainResult> {
    schedule.validate()?;
    let start = Instant::now();
    let np = net.n_params();
    let mut params: Vec<f64> = net.theta.iter().copied().chain(loss.scalar_init()).collect();
    let mut grad = vec![0.0; params.len()];
    let mut history = Vec::new();
    let mut aborted = None;

    let mut adam = Adam::new(AdamParams::with_lr(schedule.adam_lr.max(f64::MIN_POSITIVE)), params.len());
    let mut last_good = params.clone();
    for epoch in 0..schedule.adam_epochs {
        match loss_and_grad(loss, net, &params, Some(&mut grad)) {
            Ok(v) => {
                history.push(HistoryEntry { epoch, phase: Phase::Adam, loss: v.total });
                last_good.copy_from_slice(&params);
                adam.step(&mut params, &grad);
            }
            Err(PinnError::NonFinite { term, .. }) => {
                aborted = Some(PinnError::NonFinite { term, epoch }.to_string());
                params.copy_from_slice(&last_good);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    if aborted.is_none() && schedule.adam_epochs > 0 {
        // make sure the Adam snapshot's loss is finite
        if let Err(PinnError::NonFinite { term, .. }) = loss_and_grad(loss, net, &params, None) {
            aborted = Some(PinnError::NonFinite { term, epoch: schedule.adam_epochs }.to_string());
            params.copy_from_slice(&last_good);
        }
    }
    let snapshot = |p: &[f64]| -> Result<Snapshot> {
        let v = loss_and_grad(loss, net, p, None)?;
        let mut n = net.clone();
        n.theta.copy_from_slice(&p[..np]);
        Ok(Snapshot { net: n, scalars: p[np..].to_vec(), loss: v.total })
    };
    let after_adam = snapshot(&params)?;

    let mut lbfgs_stop = None;
    if aborted.is_none() && schedule.lbfgs_max_iter > 0 {
        let offset = schedule.adam_epochs;
        let objective = ScalarFn::joint(|x: &[f64]| {
            let mut g = vec![0.0; x.len()];
            match loss_and_grad(loss, net, x, Some(&mut g)) {
                Ok(v) => (v.total, g),
                Err(_) => (f64::INFINITY, vec![0.0; x.len()]),
            }
        });
        let mut best = after_adam.loss;
        let mut wait = 0;
        history.push(HistoryEntry { epoch: offset, phase: Phase::Lbfgs, loss: best });
        let opts = LbfgsOptions {
            memory: schedule.lbfgs_memory,
            n_max: schedule.lbfgs_max_iter,
            tol: 0.0,
            ..LbfgsOptions::default()
        };
        let out = lbfgs_observed(&objective, &params, opts, |k, f| {
            history.push(HistoryEntry { epoch: offset + k, phase: Phase::Lbfgs, loss: f });
            if f < best - schedule.min_delta {
                best = f;
                wait = 0;
            } else {
                wait += 1;
            }
            !(schedule.early_stopping && wait >= schedule.patience)
        })?;
        if out.f_final.is_finite() {
            params = out.solution;
        }
        lbfgs_stop = Some(out.stop);
    }

    let final_state = snapshot(&params)?;
    let terms = loss_and_grad(loss, net, &params, None)?;
    Ok(TrainResult {
        final_state,
        after_adam,
        history,
        lbfgs_stop,
        aborted,
        terms,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}
