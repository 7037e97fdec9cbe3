//! Physics-informed neural networks for the logistic equation and the 1-D
//! porous medium equation.
//!
//! A small tanh network ([`mlp::Mlp`]) is evaluated point by point with
//! forward-mode jets for its input derivatives; each loss turns the point
//! evaluations into per-point adjoints which are pulled back through the
//! network in a hand-written reverse pass.

pub mod checkpoint;
pub mod collocation;
pub mod diagnostics;
pub mod experiments;
pub mod loss;
pub mod mlp;
pub mod sobol;
pub mod train;

pub use loss::{LogisticDirectLoss, LogisticInverseLoss, PinnLoss, PmeLoss};
pub use mlp::{Mlp, Need, OutputActivation, PointEval};
pub use train::{train_pinn, HistoryEntry, Phase, TrainResult, TrainSchedule};

#[derive(Debug, thiserror::Error)]
pub enum PinnError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite loss term '{term}' at epoch {epoch}")]
    NonFinite { term: String, epoch: usize },
    #[error(transparent)]
    Core(#[from] inversa_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, PinnError>;
