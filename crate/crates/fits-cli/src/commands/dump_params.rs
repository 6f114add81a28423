//! `fits dump-params` — learned parameter distributions of a checkpoint
//! as flat CSV tables, ready for external plotting.
//!
//! Config keys: `checkpoint`.
//! Artifacts: `frequencies.csv` (raw coordinate, decoded target, decoded
//! coupling per neuron), `shaping.csv` (raw and decoded cascade
//! parameters per stage), `summary.json` (per-layer target statistics).

use fits_core::neuron::{decode_beta, decode_lambda};
use fits_core::train::decode_frequency;
use fits_core::Result;
use serde_json::{json, Map, Value};

use crate::commands::checkpoint_from;
use crate::config::{self, Ctx, Keys};

const KEYS: Keys = Keys { required: &["checkpoint"], optional: &[] };

pub fn run(ctx: &Ctx) -> Result<()> {
    let mut problems = Vec::new();
    config::check_keys(&ctx.config, "$", &KEYS, &mut problems);
    config::finish(problems)?;
    let ck = checkpoint_from(&ctx.config, "checkpoint")?;
    let cfg = &ck.network;
    let frozen_zero = cfg.variant.kappa_frozen_zero();

    let mut frequencies = String::from("layer,neuron,u,f_hz,kappa\n");
    let mut shaping = String::from("layer,neuron,stage,beta_hat,lambda_hat,beta,lambda\n");
    let mut layer_stats = Vec::new();
    for (l, (spec, lb)) in cfg.layers.iter().zip(&ck.params.block.layers).enumerate() {
        let mut fs = Vec::with_capacity(spec.width);
        for (n, &u) in lb.u.iter().enumerate() {
            let (f_hz, kappa) = if frozen_zero {
                (0.0, 0.0)
            } else {
                let d = decode_frequency(cfg, l, u)?;
                (d.f_hz, d.kappa)
            };
            fs.push(f_hz);
            frequencies.push_str(&format!("{l},{n},{u},{f_hz},{kappa}\n"));
            for m in 0..spec.ts_order {
                let bh = lb.beta_hat[n * spec.ts_order + m];
                let lh = lb.lambda_hat[n * spec.ts_order + m];
                shaping.push_str(&format!(
                    "{l},{n},{m},{bh},{lh},{},{}\n",
                    decode_beta(bh),
                    decode_lambda(lh)
                ));
            }
        }
        let mean = fs.iter().sum::<f64>() / fs.len().max(1) as f64;
        let min = fs.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = fs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        layer_stats.push(json!({
            "layer": l,
            "width": spec.width,
            "ts_order": spec.ts_order,
            "effective_ts_order": cfg.variant.effective_ts_order(spec.ts_order),
            "f_hz_min": min,
            "f_hz_mean": mean,
            "f_hz_max": max,
        }));
    }
    ctx.out.write("frequencies.csv", &frequencies)?;
    ctx.out.write("shaping.csv", &shaping)?;

    let mut body = Map::new();
    body.insert("variant".to_string(), Value::from(cfg.variant.as_str()));
    body.insert("layers".to_string(), Value::Array(layer_stats));
    body.insert("best_epoch".to_string(), Value::from(ck.best_epoch));
    body.insert("best_accuracy".to_string(), Value::from(ck.best_accuracy));
    config::write_summary(&ctx.out, "dump-params", None, body)
}
