//! `fits perturb` — the targeted-frequency perturbation protocol:
//! shuffle the learned per-layer target frequencies (multiset-preserving
//! permutation) or reset them to their initialization, then re-evaluate
//! against the unperturbed checkpoint on the same split.
//!
//! Config keys: `checkpoint`, `data_dir`, `mode` ("shuffle" or
//! "reset"), `perturb_seed`; optional `split` (default "val").
//! `--seed` overrides `perturb_seed`.
//! Artifacts: `summary.json`, `frequencies.csv` (decoded per-neuron
//! targets before and after).

use fits_core::train::{evaluate, perturb_target_frequencies, Network, PerturbMode};
use fits_core::Result;
use serde_json::{Map, Value};

use crate::commands::{check_compatibility, checkpoint_from, dataset_from, split_of};
use crate::config::{self, Ctx, Keys};

const KEYS: Keys = Keys {
    required: &["checkpoint", "data_dir", "mode", "perturb_seed"],
    optional: &["split"],
};

pub fn run(ctx: &Ctx) -> Result<()> {
    let mut problems = Vec::new();
    config::check_keys(&ctx.config, "$", &KEYS, &mut problems);
    config::finish(problems)?;
    let mode: PerturbMode = config::parse::<String>(&ctx.config["mode"], "mode")?.parse()?;
    let config_seed: u64 = config::parse(&ctx.config["perturb_seed"], "perturb_seed")?;
    let seed = ctx.seed.unwrap_or(config_seed);
    let split = match ctx.config.get("split") {
        Some(v) => config::parse::<String>(v, "split")?,
        None => "val".to_string(),
    };

    let ck = checkpoint_from(&ctx.config, "checkpoint")?;
    let ds = dataset_from(&ctx.config, "data_dir")?;
    check_compatibility(&ck, &ds)?;
    let samples = split_of(&ds, &split)?;

    let perturbed = perturb_target_frequencies(&ck.params, mode, seed)?;
    let base = evaluate(&ck.network, &ck.params.block, samples)?;
    let after = evaluate(&ck.network, &perturbed.block, samples)?;

    let before_f = Network::build(&ck.network, &ck.params.block)?.target_frequencies();
    let after_f = Network::build(&ck.network, &perturbed.block)?.target_frequencies();
    let mut csv = String::from("layer,neuron,f_before_hz,f_after_hz\n");
    for (l, (b, a)) in before_f.iter().zip(&after_f).enumerate() {
        for (n, (fb, fa)) in b.iter().zip(a).enumerate() {
            csv.push_str(&format!("{l},{n},{fb},{fa}\n"));
        }
    }
    ctx.out.write("frequencies.csv", &csv)?;

    let mut body = Map::new();
    body.insert("mode".to_string(), Value::from(mode.to_string()));
    body.insert("split".to_string(), Value::from(split));
    body.insert("accuracy_unperturbed".to_string(), Value::from(base.accuracy));
    body.insert("accuracy_perturbed".to_string(), Value::from(after.accuracy));
    body.insert("accuracy_drop".to_string(), Value::from(base.accuracy - after.accuracy));
    config::write_summary(&ctx.out, "perturb", Some(seed), body)
}
