//! `fits eval` — accuracy and loss of a checkpoint on a dataset split.
//!
//! Config keys: `checkpoint`, `data_dir`, `split` ("train" or "val").
//! Artifacts: `summary.json`, `spike_rates.csv` (mean spikes per neuron
//! per step, one row per spiking layer).

use fits_core::train::evaluate;
use fits_core::Result;
use serde_json::{Map, Value};

use crate::commands::{check_compatibility, checkpoint_from, dataset_from, split_of};
use crate::config::{self, Ctx, Keys};

const KEYS: Keys = Keys { required: &["checkpoint", "data_dir", "split"], optional: &[] };

pub fn run(ctx: &Ctx) -> Result<()> {
    let mut problems = Vec::new();
    config::check_keys(&ctx.config, "$", &KEYS, &mut problems);
    config::finish(problems)?;
    let split: String = config::parse(&ctx.config["split"], "split")?;

    let ck = checkpoint_from(&ctx.config, "checkpoint")?;
    let ds = dataset_from(&ctx.config, "data_dir")?;
    check_compatibility(&ck, &ds)?;
    let samples = split_of(&ds, &split)?;

    let res = evaluate(&ck.network, &ck.params.block, samples)?;

    let mut csv = String::from("layer,spike_rate\n");
    for (l, r) in res.spike_rates.iter().enumerate() {
        csv.push_str(&format!("{l},{r}\n"));
    }
    ctx.out.write("spike_rates.csv", &csv)?;

    let mut body = Map::new();
    body.insert("split".to_string(), Value::from(split));
    body.insert("accuracy".to_string(), Value::from(res.accuracy));
    body.insert("mean_loss".to_string(), Value::from(res.mean_loss));
    body.insert("correct".to_string(), Value::from(res.correct));
    body.insert("total".to_string(), Value::from(res.total));
    config::write_summary(&ctx.out, "eval", None, body)
}
