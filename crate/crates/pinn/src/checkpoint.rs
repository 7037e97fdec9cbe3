//! Model checkpoints (JSON) and loss histories (CSV).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::mlp::{Mlp, OutputActivation};
use crate::train::{HistoryEntry, TrainSchedule};
use crate::{PinnError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    /// Row-major, `n_out` rows of `n_in` entries.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub sizes: Vec<usize>,
    pub output: OutputActivation,
    pub layers: Vec<LayerParams>,
    /// Trainable scalars in physical units.
    pub scalars: BTreeMap<String, f64>,
    pub seed: u64,
    pub schedule: TrainSchedule,
}

impl Checkpoint {
    pub fn new(net: &Mlp, scalars: BTreeMap<String, f64>, schedule: &TrainSchedule) -> Self {
        let layers = (0..net.n_layers())
            .map(|l| LayerParams {
                weights: net.weights(l).chunks(net.sizes[l]).map(<[f64]>::to_vec).collect(),
                bias: net.bias(l).to_vec(),
            })
            .collect();
        Self {
            sizes: net.sizes.clone(),
            output: net.output,
            layers,
            scalars,
            seed: schedule.seed,
            schedule: schedule.clone(),
        }
    }

    pub fn to_mlp(&self) -> Result<Mlp> {
        let mut net = Mlp::zeros(&self.sizes, self.output)?;
        if self.layers.len() != net.n_layers() {
            return Err(PinnError::Config("checkpoint layer count does not match sizes".into()));
        }
        let mut theta = Vec::with_capacity(net.n_params());
        for (l, layer) in self.layers.iter().enumerate() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            if layer.weights.len() != n_out || layer.weights.iter().any(|r| r.len() != n_in) || layer.bias.len() != n_out {
                return Err(PinnError::Config(format!("layer {l} has the wrong shape")));
            }
            theta.extend(layer.weights.iter().flatten());
            theta.extend(&layer.bias);
        }
        net.theta = theta;
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

pub fn write_loss_history(path: &Path, history: &[HistoryEntry]) -> Result<()> {
    let mut s = String::from("epoch,loss\n");
    for h in history {
        writeln!(s, "{},{:e}", h.epoch, h.loss).expect("writing to a String");
    }
    std::fs::write(path, s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::Phase;

    #[test]
    fn checkpoint_round_trip() {
        let net = Mlp::xavier(&[2, 5, 3, 1], OutputActivation::Sigmoid, 4).unwrap();
        let scalars = BTreeMap::from([("beta".to_string(), 2.5)]);
        let cp = Checkpoint::new(&net, scalars, &TrainSchedule::default());
        let dir = std::env::temp_dir().join(format!("inversa-cp-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.json");
        cp.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, cp);
        assert_eq!(back.to_mlp().unwrap(), net);
        assert_eq!(back.layers[1].weights.len(), 3);
        assert_eq!(back.layers[1].weights[0].len(), 5);

        let hist = [HistoryEntry { epoch: 0, phase: Phase::Adam, loss: 0.5 }, HistoryEntry { epoch: 1, phase: Phase::Adam, loss: 0.25 }];
        write_loss_history(&dir.join("h.csv"), &hist).unwrap();
        let text = std::fs::read_to_string(dir.join("h.csv")).unwrap();
        assert_eq!(text.lines().collect::<Vec<_>>(), ["epoch,loss", "0,5e-1", "1,2.5e-1"]);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn malformed_checkpoint_rejected() {
        let net = Mlp::xavier(&[1, 4, 1], OutputActivation::Linear, 1).unwrap();
        let mut cp = Checkpoint::new(&net, BTreeMap::new(), &TrainSchedule::default());
        cp.layers[0].bias.pop();
        assert!(cp.to_mlp().is_err());
    }
}
