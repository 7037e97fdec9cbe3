use serde::{Deserialize, Serialize};

use crate::optimize::StopReason;

/// Outcome of a parameter-recovery run, laid out like the appendix tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerReport {
    pub method: String,
    pub params_hat: Vec<f64>,
    /// Relative error per parameter; empty when no ground truth is known.
    pub rel_errors: Vec<f64>,
    pub feval: f64,
    pub interp_error: f64,
    pub extrap_error: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stop: StopReason,
    pub wall_time_s: f64,
}

pub fn rel_errors(estimate: &[f64], truth: Option<&[f64]>) -> Vec<f64> {
    match truth {
        Some(t) => estimate.iter().zip(t).map(|(e, t)| ((e - t) / t).abs()).collect(),
        None => Vec::new(),
    }
}
