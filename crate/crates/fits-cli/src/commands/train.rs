//! `fits train` — surrogate-gradient training on a generated dataset.
//!
//! Config shape:
//! `network` — the full architecture document (`input_channels`,
//! `classes`, `layers` as `{width, ts_order, tau_m, tau_a}` objects,
//! `dt`, `v_th`, `f_min_hz`, `f_max_hz`, `dropout`, `variant`,
//! `surrogate_width`, `detach_reset`, `seed`);
//! `train` — `epochs`, `batch_size`, `lr`;
//! `data_dir` — a directory written by `gen-data`.
//! `--seed` overrides `network.seed`.
//! Artifacts: `summary.json`, `history.csv`, `checkpoint.json`.

use fits_core::train::{save_checkpoint, train, Checkpoint, NetworkConfig, TrainConfig};
use fits_core::Result;
use serde_json::{Map, Value};

use crate::commands::dataset_from;
use crate::config::{self, Ctx, Keys};

const KEYS: Keys = Keys { required: &["network", "train", "data_dir"], optional: &[] };

const NETWORK_KEYS: Keys = Keys {
    required: &[
        "input_channels",
        "classes",
        "layers",
        "dt",
        "v_th",
        "f_min_hz",
        "f_max_hz",
        "dropout",
        "variant",
        "surrogate_width",
        "detach_reset",
        "seed",
    ],
    optional: &[],
};

const LAYER_KEYS: Keys =
    Keys { required: &["width", "ts_order", "tau_m", "tau_a"], optional: &[] };

const TRAIN_KEYS: Keys = Keys { required: &["epochs", "batch_size", "lr"], optional: &[] };

/// Strict key check for the nested network document; shared with the
/// other commands that embed one.
pub(crate) fn check_network_keys(v: &Value, path: &str, problems: &mut Vec<String>) {
    if let Some(obj) = config::check_keys(v, path, &NETWORK_KEYS, problems) {
        if let Some(layers) = obj.get("layers") {
            match layers.as_array() {
                Some(items) => {
                    for (i, item) in items.iter().enumerate() {
                        config::check_keys(item, &format!("{path}.layers[{i}]"), &LAYER_KEYS, problems);
                    }
                }
                None => problems.push(format!("{path}.layers must be an array")),
            }
        }
    }
}

pub fn run(ctx: &Ctx) -> Result<()> {
    let mut problems = Vec::new();
    if let Some(obj) = config::check_keys(&ctx.config, "$", &KEYS, &mut problems) {
        if let Some(network) = obj.get("network") {
            check_network_keys(network, "$.network", &mut problems);
        }
        if let Some(train) = obj.get("train") {
            config::check_keys(train, "$.train", &TRAIN_KEYS, &mut problems);
        }
    }
    config::finish(problems)?;

    let mut net: NetworkConfig = config::parse(&ctx.config["network"], "network")?;
    let tcfg: TrainConfig = config::parse(&ctx.config["train"], "train")?;
    if let Some(seed) = ctx.seed {
        net.seed = seed;
    }
    let ds = dataset_from(&ctx.config, "data_dir")?;

    let outcome = train(&net, &tcfg, &ds)?;

    let mut csv = String::from("epoch,train_loss,val_accuracy\n");
    for e in &outcome.history {
        csv.push_str(&format!("{},{},{}\n", e.epoch, e.train_loss, e.val_accuracy));
    }
    ctx.out.write("history.csv", &csv)?;

    let ck = Checkpoint {
        network: net.clone(),
        train: tcfg.clone(),
        params: outcome.params.clone(),
        history: outcome.history.clone(),
        best_epoch: outcome.best_epoch,
        best_accuracy: outcome.best_accuracy,
    };
    save_checkpoint(ctx.out.join("checkpoint.json"), &ck)?;

    let last = outcome.history.last().expect("training always runs at least one epoch");
    let mut body = Map::new();
    body.insert("variant".to_string(), Value::from(net.variant.as_str()));
    body.insert("epochs".to_string(), Value::from(outcome.history.len()));
    body.insert("best_epoch".to_string(), Value::from(outcome.best_epoch));
    body.insert("best_accuracy".to_string(), Value::from(outcome.best_accuracy));
    body.insert("final_train_loss".to_string(), Value::from(last.train_loss));
    body.insert("final_val_accuracy".to_string(), Value::from(last.val_accuracy));
    config::write_summary(&ctx.out, "train", Some(net.seed), body)
}
