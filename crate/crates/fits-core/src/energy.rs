//! Event-driven energy accounting from AC/MAC operation counts.
//!
//! Counting rules (`fits-opcount v1`, published in every report so the
//! numbers are auditable):
//!
//! * **Synaptic** work is event-driven: each arriving spike costs one
//!   accumulate per outgoing synapse, so a layer's synaptic ACs are
//!   `rate_in * N_in * N_out * T`.
//! * **Neuron updates** are dense (every neuron, every step) and counted
//!   as MACs: 1 for a plain leaky integrator (decay multiply-add), 4 for
//!   the adaptive two-variable update (two coupled multiply-adds each),
//!   and 3 more per cascade stage (one multiply over the stage's
//!   three-term combination plus the two-multiply mix).
//! * **Threshold and soft reset** cost 2 ACs per neuron per step
//!   (compare, conditional subtract), spike or no spike.
//! * The linear readout is excluded: it is shared unchanged by every
//!   variant under comparison, so it would only add a constant.
//!
//! Energies use the standard 45 nm estimates `E_AC = 0.9 pJ`,
//! `E_MAC = 4.6 pJ` and are reported in microjoules. The module also
//! provides an instrumented forward pass that tallies the operations it
//! actually performs while reproducing the reference simulation bit for
//! bit, so the closed-form counts can be checked against reality rather
//! than against themselves.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::neuron::{fire_and_reset_with, fs_step_with, ts_step_with, FsCoeffs, SpikingLayer};
use crate::train::{ModelVariant, NetworkConfig};
use crate::Result;

/// Accumulate cost, picojoules (45 nm CMOS estimate).
pub const E_AC_PJ: f64 = 0.9;
/// Multiply-accumulate cost, picojoules (45 nm CMOS estimate).
pub const E_MAC_PJ: f64 = 4.6;
/// Version tag for the counting rules documented in the module header.
pub const COUNTING_RULES: &str = "fits-opcount v1";

/// Neuron-update MACs per neuron per step for a variant simulating an
/// effective cascade order `m`.
fn macs_per_neuron_step(variant: ModelVariant, m: usize) -> u64 {
    match variant {
        ModelVariant::PlainLif => 1,
        ModelVariant::AdaptFrozenZero | ModelVariant::FsFrozen | ModelVariant::FsLearnable => 4,
        ModelVariant::FsTs => 4 + 3 * m as u64,
    }
}

/// Operation tally of one layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerOpCounts {
    /// Spike-driven accumulates into the synaptic sums.
    pub synaptic_acs: f64,
    /// Threshold/reset accumulates.
    pub neuron_acs: f64,
    /// Dense state-update multiply-accumulates.
    pub neuron_macs: f64,
}

/// Operation totals with the per-layer breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpCounts {
    pub acs: f64,
    pub macs: f64,
    pub layers: Vec<LayerOpCounts>,
}

impl OpCounts {
    fn from_layers(layers: Vec<LayerOpCounts>) -> Self {
        let acs = layers.iter().map(|l| l.synaptic_acs + l.neuron_acs).sum();
        let macs = layers.iter().map(|l| l.neuron_macs).sum();
        OpCounts { acs, macs, layers }
    }
}

fn check_layer_arg(cfg: &NetworkConfig, len: usize, what: &str, t_bins: usize) -> Result<()> {
    if t_bins == 0 {
        return Err(Error::Config("t_bins must be >= 1".to_string()));
    }
    if len != cfg.layers.len() {
        return Err(Error::Config(format!(
            "{what} has {len} entries for {} layers; expected one per spiking layer",
            cfg.layers.len()
        )));
    }
    Ok(())
}

/// Closed-form operation counts from per-layer input firing rates.
/// `firing_rates[l]` is the mean spikes per input line per timestep
/// *arriving at* layer `l` (the raw input rate for layer 0, the previous
/// layer's output rate after that).
pub fn count_operations(
    cfg: &NetworkConfig,
    variant: ModelVariant,
    firing_rates: &[f64],
    t_bins: usize,
) -> Result<OpCounts> {
    check_layer_arg(cfg, firing_rates.len(), "firing_rates", t_bins)?;
    for (l, &r) in firing_rates.iter().enumerate() {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::Config(format!(
                "firing_rates[{l}] = {r} outside [0, 1] (binary rasters cannot exceed one \
                 spike per line per step)"
            )));
        }
    }
    let t = t_bins as f64;
    let mut fan_in = cfg.input_channels;
    let mut layers = Vec::with_capacity(cfg.layers.len());
    for (spec, &rate) in cfg.layers.iter().zip(firing_rates) {
        let m = variant.effective_ts_order(spec.ts_order);
        let width = spec.width as f64;
        layers.push(LayerOpCounts {
            synaptic_acs: rate * fan_in as f64 * width * t,
            neuron_acs: 2.0 * width * t,
            neuron_macs: macs_per_neuron_step(variant, m) as f64 * width * t,
        });
        fan_in = spec.width;
    }
    Ok(OpCounts::from_layers(layers))
}

/// Exact-integer twin of [`count_operations`] for measured spike events:
/// `in_spike_counts[l]` is the total number of spikes arriving at layer
/// `l` over the whole run. Every count is integer arithmetic, so the
/// result is exactly comparable with an instrumented tally.
pub fn count_operations_from_events(
    cfg: &NetworkConfig,
    variant: ModelVariant,
    in_spike_counts: &[u64],
    t_bins: usize,
) -> Result<OpCounts> {
    check_layer_arg(cfg, in_spike_counts.len(), "in_spike_counts", t_bins)?;
    let mut fan_in = cfg.input_channels;
    let mut layers = Vec::with_capacity(cfg.layers.len());
    for (l, (spec, &events)) in cfg.layers.iter().zip(in_spike_counts).enumerate() {
        let slots = (fan_in * t_bins) as u64;
        if events > slots {
            return Err(Error::Config(format!(
                "in_spike_counts[{l}] = {events} exceeds the {slots} input slots \
                 ({fan_in} lines x {t_bins} steps)"
            )));
        }
        let m = variant.effective_ts_order(spec.ts_order);
        let width = spec.width as u64;
        let steps = t_bins as u64;
        layers.push(LayerOpCounts {
            synaptic_acs: (events * width) as f64,
            neuron_acs: (2 * width * steps) as f64,
            neuron_macs: (macs_per_neuron_step(variant, m) * width * steps) as f64,
        });
        fan_in = spec.width;
    }
    Ok(OpCounts::from_layers(layers))
}

/// Energy of one layer, microjoules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerEnergy {
    pub e_layer_uj: f64,
    pub e_neuron_uj: f64,
}

/// Energy estimate in the Table-4 layout: `e_layer` is the spike-driven
/// synaptic energy, `e_neuron` the dense neuron-update energy (state MACs
/// plus threshold ACs), `e_total` their sum. Constants and the
/// counting-rule version ride along so reports are self-describing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub e_layer_uj: f64,
    pub e_neuron_uj: f64,
    pub e_total_uj: f64,
    pub e_ac_pj: f64,
    pub e_mac_pj: f64,
    pub counting_rules: String,
    pub layers: Vec<LayerEnergy>,
}

const PJ_TO_UJ: f64 = 1e-6;

/// Prices an operation count; pure arithmetic, never fails.
pub fn estimate_energy(counts: &OpCounts) -> EnergyReport {
    let layers: Vec<LayerEnergy> = counts
        .layers
        .iter()
        .map(|l| LayerEnergy {
            e_layer_uj: l.synaptic_acs * E_AC_PJ * PJ_TO_UJ,
            e_neuron_uj: (l.neuron_macs * E_MAC_PJ + l.neuron_acs * E_AC_PJ) * PJ_TO_UJ,
        })
        .collect();
    let e_layer_uj: f64 = layers.iter().map(|l| l.e_layer_uj).sum();
    let e_neuron_uj: f64 = layers.iter().map(|l| l.e_neuron_uj).sum();
    EnergyReport {
        e_layer_uj,
        e_neuron_uj,
        e_total_uj: e_layer_uj + e_neuron_uj,
        e_ac_pj: E_AC_PJ,
        e_mac_pj: E_MAC_PJ,
        counting_rules: COUNTING_RULES.to_string(),
        layers,
    }
}

/// Integer operation tally of one layer from an instrumented run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OpTally {
    pub synaptic_acs: u64,
    pub neuron_acs: u64,
    pub neuron_macs: u64,
}

impl OpTally {
    pub fn to_layer_counts(self) -> LayerOpCounts {
        LayerOpCounts {
            synaptic_acs: self.synaptic_acs as f64,
            neuron_acs: self.neuron_acs as f64,
            neuron_macs: self.neuron_macs as f64,
        }
    }
}

/// Output of [`instrumented_forward`].
#[derive(Debug, Clone)]
pub struct InstrumentedRun {
    /// Binary spike trains emitted by each layer, row-major `T x width`.
    pub spikes: Vec<Vec<f64>>,
    /// Operations actually performed, per layer.
    pub tallies: Vec<OpTally>,
    /// Spikes arriving at each layer (the raw input for layer 0), the
    /// exact argument for [`count_operations_from_events`].
    pub in_spike_counts: Vec<u64>,
}

/// Event-driven forward pass that tallies every synaptic accumulate,
/// state MAC, and threshold AC it performs. The synaptic sums skip silent
/// inputs and the state update does only the arithmetic the variant pays
/// for, yet the emitted spike trains equal the dense reference simulation
/// bit for bit: skipped terms are exact zeros and the performed
/// operations reuse the reference step kernels unchanged.
pub fn instrumented_forward(
    layers: &[SpikingLayer],
    variant: ModelVariant,
    input: &[f64],
    t_bins: usize,
) -> Result<InstrumentedRun> {
    if layers.is_empty() {
        return Err(Error::Config("at least one layer is required".to_string()));
    }
    if input.len() != t_bins * layers[0].n_in() {
        return Err(Error::Config(format!(
            "input length {} does not match T x n_in = {t_bins} x {}",
            input.len(),
            layers[0].n_in()
        )));
    }
    if let Some(bad) = input.iter().find(|&&x| x != 0.0 && x != 1.0) {
        return Err(Error::Config(format!(
            "instrumented forward requires binary inputs, found {bad}"
        )));
    }

    let mut spikes_out = Vec::with_capacity(layers.len());
    let mut tallies = Vec::with_capacity(layers.len());
    let mut in_counts = Vec::with_capacity(layers.len());
    let mut x: Vec<f64> = input.to_vec();

    for layer in layers {
        let (n_in, n_out) = (layer.n_in(), layer.n_out());
        let order = layer.order();
        let m1 = order + 1;
        let expected_m = match variant {
            ModelVariant::FsTs => order,
            _ => 0,
        };
        if order != expected_m {
            return Err(Error::Config(format!(
                "variant {variant} expects cascade order {expected_m}, layer has {order}"
            )));
        }
        let coeffs: Vec<FsCoeffs<f64>> = layer.fs().iter().map(|p| p.coeffs()).collect();
        let weights = layer.weights();
        let mut tally = OpTally::default();
        let mut events: u64 = 0;

        let mut v = vec![0.0; n_out];
        let mut a = vec![0.0; n_out];
        let mut stages = vec![0.0; n_out * m1];
        let mut stage_next = vec![0.0; m1];
        let mut acc = vec![0.0; n_out];
        let mut out = vec![0.0; t_bins * n_out];

        for k in 0..t_bins {
            // event-driven synaptic accumulation: silent inputs contribute
            // exact zeros in the dense kernel, so skipping them is free
            acc.iter_mut().for_each(|s| *s = 0.0);
            for i in 0..n_in {
                if x[k * n_in + i] != 0.0 {
                    events += 1;
                    tally.synaptic_acs += n_out as u64;
                    for (j, slot) in acc.iter_mut().enumerate() {
                        *slot += weights[j * n_in + i];
                    }
                }
            }

            for n in 0..n_out {
                let mixed = match variant {
                    ModelVariant::PlainLif => {
                        // the frozen-zero coupling makes the adaptation
                        // terms exact zeros; one decay multiply-add remains
                        let v0 = coeffs[n].mu_bar * v[n] + acc[n];
                        tally.neuron_macs += 1;
                        stages[n * m1] = v0;
                        v0
                    }
                    _ => {
                        let (v0, a_next) = fs_step_with(&coeffs[n], v[n], a[n], acc[n]);
                        a[n] = a_next;
                        tally.neuron_macs += 4;
                        if order > 0 {
                            let prev = &stages[n * m1..(n + 1) * m1];
                            let mixed = ts_step_with(
                                layer.ts()[n].betas(),
                                layer.ts()[n].lambdas(),
                                prev,
                                v0,
                                &mut stage_next,
                            );
                            stages[n * m1..(n + 1) * m1].copy_from_slice(&stage_next);
                            tally.neuron_macs += 3 * order as u64;
                            mixed
                        } else {
                            stages[n * m1] = v0;
                            v0
                        }
                    }
                };
                if !mixed.is_finite() {
                    return Err(Error::NonFinite { neuron: n, step: k });
                }
                let (s, v_next) = fire_and_reset_with(mixed, layer.v_th());
                tally.neuron_acs += 2;
                v[n] = v_next;
                out[k * n_out + n] = s;
            }
        }

        in_counts.push(events);
        tallies.push(tally);
        x = out.clone();
        spikes_out.push(out);
    }

    Ok(InstrumentedRun { spikes: spikes_out, tallies, in_spike_counts: in_counts })
}
