//! Checkpoint files: one JSON document holding the configs, every
//! unconstrained parameter as a base-10 full-precision decimal string,
//! the recorded initialization, and the training history.
//!
//! Numbers are stringified with the shortest representation that parses
//! back to the identical bit pattern, so a save/load round trip is exact
//! and the files stay diffable.

use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use crate::error::Error;
use crate::Result;

use super::params::{LayerBlock, LearnableParams, ParamBlock};
use super::{EpochStats, NetworkConfig, TrainConfig};

const VERSION: &str = "fits-checkpoint v1";

/// A complete training artifact: enough to evaluate, perturb, or resume
/// analysis without the original run.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub params: LearnableParams,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_accuracy: f64,
}

#[derive(Serialize, Deserialize)]
struct LayerStrings {
    weights: Vec<String>,
    u: Vec<String>,
    beta_hat: Vec<String>,
    lambda_hat: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct Document {
    version: String,
    network: NetworkConfig,
    train: TrainConfig,
    best_epoch: usize,
    best_accuracy: f64,
    history: Vec<EpochStats>,
    layers: Vec<LayerStrings>,
    readout_w: Vec<String>,
    readout_b: Vec<String>,
    init_u: Vec<Vec<String>>,
}

fn encode(xs: &[f64]) -> Vec<String> {
    xs.iter().map(|x| x.to_string()).collect()
}

fn decode(xs: &[String], what: &str) -> Result<Vec<f64>> {
    xs.iter()
        .map(|s| {
            s.parse::<f64>().map_err(|_| {
                Error::Config(format!("checkpoint: invalid number '{s}' in {what}"))
            })
        })
        .collect()
}

/// Writes the checkpoint as pretty-printed JSON (newline-terminated).
pub fn save_checkpoint<P: AsRef<Path>>(path: P, ck: &Checkpoint) -> Result<()> {
    let doc = Document {
        version: VERSION.to_string(),
        network: ck.network.clone(),
        train: ck.train.clone(),
        best_epoch: ck.best_epoch,
        best_accuracy: ck.best_accuracy,
        history: ck.history.clone(),
        layers: ck
            .params
            .block
            .layers
            .iter()
            .map(|l| LayerStrings {
                weights: encode(&l.weights),
                u: encode(&l.u),
                beta_hat: encode(&l.beta_hat),
                lambda_hat: encode(&l.lambda_hat),
            })
            .collect(),
        readout_w: encode(&ck.params.block.readout_w),
        readout_b: encode(&ck.params.block.readout_b),
        init_u: ck.params.init_u.iter().map(|u| encode(u)).collect(),
    };
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Reads a checkpoint back; exact inverse of [`save_checkpoint`] down to
/// the parameter bit patterns.
pub fn load_checkpoint<P: AsRef<Path>>(path: P) -> Result<Checkpoint> {
    let text = fs::read_to_string(path)?;
    let doc: Document = serde_json::from_str(&text)?;
    if doc.version != VERSION {
        return Err(Error::Config(format!(
            "checkpoint version '{}' not supported (expected '{VERSION}')",
            doc.version
        )));
    }
    let layers = doc
        .layers
        .iter()
        .enumerate()
        .map(|(l, s)| {
            Ok(LayerBlock {
                weights: decode(&s.weights, &format!("layer {l} weights"))?,
                u: decode(&s.u, &format!("layer {l} u"))?,
                beta_hat: decode(&s.beta_hat, &format!("layer {l} beta_hat"))?,
                lambda_hat: decode(&s.lambda_hat, &format!("layer {l} lambda_hat"))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let block = ParamBlock {
        layers,
        readout_w: decode(&doc.readout_w, "readout weights")?,
        readout_b: decode(&doc.readout_b, "readout bias")?,
    };
    let init_u = doc
        .init_u
        .iter()
        .enumerate()
        .map(|(l, u)| decode(u, &format!("layer {l} recorded init")))
        .collect::<Result<Vec<_>>>()?;
    Ok(Checkpoint {
        network: doc.network,
        train: doc.train,
        params: LearnableParams { block, init_u },
        history: doc.history,
        best_epoch: doc.best_epoch,
        best_accuracy: doc.best_accuracy,
    })
}
