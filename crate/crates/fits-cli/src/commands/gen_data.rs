//! `fits gen-data` — synthetic frequency-discrimination dataset:
//! Poisson-like rate-coded rasters whose only discriminative feature is
//! the class's sinusoidal rate-modulation frequency.
//!
//! Config keys (all required): `classes_hz`, `channels`, `t_bins`, `dt`,
//! `base_rate`, `depth`, `train_per_class`, `val_per_class`, `seed`.
//! `--seed` overrides the config seed.
//! Artifacts: `summary.json` plus the dataset itself (`manifest.json`,
//! `labels.csv`, `train/`, `val/`) under the output directory.

use fits_core::data::{generate_synthetic, save_dataset, GeneratorConfig, SpikeRaster};
use fits_core::Result;
use serde_json::{Map, Value};

use crate::config::{self, Ctx, Keys};

const KEYS: Keys = Keys {
    required: &[
        "classes_hz",
        "channels",
        "t_bins",
        "dt",
        "base_rate",
        "depth",
        "train_per_class",
        "val_per_class",
        "seed",
    ],
    optional: &[],
};

fn mean_rate(samples: &[SpikeRaster]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|r| r.rate()).sum::<f64>() / samples.len() as f64
}

pub fn run(ctx: &Ctx) -> Result<()> {
    let mut problems = Vec::new();
    config::check_keys(&ctx.config, "$", &KEYS, &mut problems);
    config::finish(problems)?;
    let mut gen: GeneratorConfig = config::parse(&ctx.config, "gen-data")?;
    if let Some(seed) = ctx.seed {
        gen.seed = seed;
    }

    let ds = generate_synthetic(&gen)?;
    save_dataset(ctx.out.path(), &ds)?;

    let mut body = Map::new();
    body.insert("classes_hz".to_string(), Value::from(gen.classes_hz.clone()));
    body.insert("channels".to_string(), Value::from(gen.channels));
    body.insert("t_bins".to_string(), Value::from(gen.t_bins));
    body.insert("dt".to_string(), Value::from(gen.dt));
    body.insert("base_rate".to_string(), Value::from(gen.base_rate));
    body.insert("depth".to_string(), Value::from(gen.depth));
    body.insert("n_train".to_string(), Value::from(ds.train.len()));
    body.insert("n_val".to_string(), Value::from(ds.val.len()));
    body.insert("mean_rate_train".to_string(), Value::from(mean_rate(&ds.train)));
    body.insert("mean_rate_val".to_string(), Value::from(mean_rate(&ds.val)));
    config::write_summary(&ctx.out, "gen-data", Some(gen.seed), body)
}
