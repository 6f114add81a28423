//! `fits energy` — event-driven operation tallies and energy estimates
//! for a checkpoint on a dataset split.
//!
//! Every sample is run through the instrumented forward pass, which
//! counts each synaptic accumulate, state MAC, and threshold AC it
//! actually performs; the totals are cross-checked against the
//! closed-form operation model (they must agree exactly) and then
//! priced. The readout is excluded by the counting rules.
//!
//! Config keys: `checkpoint`, `data_dir`, `split`.
//! Artifacts: `summary.json`, `ops.csv` (per-layer counts and energy).

use fits_core::energy::{
    count_operations_from_events, estimate_energy, instrumented_forward, OpTally,
};
use fits_core::train::Network;
use fits_core::{Error, Result};
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
    if samples.is_empty() {
        return Err(Error::Config(format!("split \"{split}\" is empty")));
    }

    let net = Network::build(&ck.network, &ck.params.block)?;
    let n_layers = ck.network.layers.len();
    let mut tallies = vec![OpTally::default(); n_layers];
    let mut events = vec![0u64; n_layers];
    let mut steps_total = 0usize;
    for r in samples {
        let run =
            instrumented_forward(net.layers(), ck.network.variant, &r.dense_f64(), r.t_bins())?;
        for l in 0..n_layers {
            tallies[l].synaptic_acs += run.tallies[l].synaptic_acs;
            tallies[l].neuron_acs += run.tallies[l].neuron_acs;
            tallies[l].neuron_macs += run.tallies[l].neuron_macs;
            events[l] += run.in_spike_counts[l];
        }
        steps_total += r.t_bins();
    }

    let counts =
        count_operations_from_events(&ck.network, ck.network.variant, &events, steps_total)?;
    for (l, (tally, formula)) in tallies.iter().zip(&counts.layers).enumerate() {
        let measured = tally.to_layer_counts();
        if measured != *formula {
            return Err(Error::Internal(format!(
                "layer {l}: instrumented tally {measured:?} disagrees with the operation model {formula:?}"
            )));
        }
    }
    let report = estimate_energy(&counts);

    let mut csv =
        String::from("layer,synaptic_acs,neuron_acs,neuron_macs,e_layer_uj,e_neuron_uj\n");
    for (l, (tally, le)) in tallies.iter().zip(&report.layers).enumerate() {
        csv.push_str(&format!(
            "{l},{},{},{},{},{}\n",
            tally.synaptic_acs, tally.neuron_acs, tally.neuron_macs, le.e_layer_uj, le.e_neuron_uj
        ));
    }
    ctx.out.write("ops.csv", &csv)?;

    let in_rates: Vec<f64> = {
        let mut fan_in = ck.network.input_channels;
        events
            .iter()
            .zip(&ck.network.layers)
            .map(|(&ev, spec)| {
                let rate = ev as f64 / (fan_in * steps_total) as f64;
                fan_in = spec.width;
                rate
            })
            .collect()
    };

    let mut body = Map::new();
    body.insert("split".to_string(), Value::from(split));
    body.insert("samples".to_string(), Value::from(samples.len()));
    body.insert("t_bins_total".to_string(), Value::from(steps_total));
    body.insert("variant".to_string(), Value::from(ck.network.variant.as_str()));
    body.insert("acs".to_string(), Value::from(counts.acs));
    body.insert("macs".to_string(), Value::from(counts.macs));
    body.insert("in_rates".to_string(), Value::from(in_rates));
    body.insert("e_layer_uj".to_string(), Value::from(report.e_layer_uj));
    body.insert("e_neuron_uj".to_string(), Value::from(report.e_neuron_uj));
    body.insert("e_total_uj".to_string(), Value::from(report.e_total_uj));
    body.insert("e_ac_pj".to_string(), Value::from(report.e_ac_pj));
    body.insert("e_mac_pj".to_string(), Value::from(report.e_mac_pj));
    body.insert("counting_rules".to_string(), Value::from(report.counting_rules.clone()));
    config::write_summary(&ctx.out, "energy", None, body)
}
