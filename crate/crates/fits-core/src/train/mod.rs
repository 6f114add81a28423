//! Desk-scale supervised training of feedforward FiTS networks.
//!
//! The trainable quantities all live in unconstrained coordinates: synaptic
//! weights directly, per-neuron target frequencies through a scaled
//! logistic map that keeps the implied coupling inside the stable region by
//! construction, and the cascade shape through tanh/sigmoid squashes. The
//! forward pass is the vectorized layer update from [`crate::neuron`] with
//! a sum-over-time linear readout; the backward pass is exact reverse-mode
//! differentiation of that unrolled computation with the Heaviside replaced
//! by a triangular surrogate, gradient flowing through the soft-reset
//! subtraction (optionally detached), and the frequency coordinate chained
//! through the closed-form inverse target map.
//!
//! Batch work fans out through [`crate::parallel::ordered_map`] and reduces
//! in input order, so training history is bit-identical for any worker
//! count. Everything downstream of the config seed (weight init, epoch
//! shuffling, dropout masks) is derived deterministically from it.

mod adam;
mod backprop;
mod checkpoint;
mod params;

pub use adam::{cosine_lr, optimizer_step, OptimState};
pub use backprop::{
    evaluate, forward_backward, forward_backward_mode, BatchResult, DropoutPlan, EvalResult,
};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use params::{
    decode_frequency, encode_frequency, init_parameters, learnable_mask, FrequencyDecode,
    LayerBlock, LearnableParams, ParamBlock,
};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::data::{self, Dataset, SpikeRaster};
use crate::error::Error;
use crate::neuron::{FsParams, SpikingLayer, TsParams};
use crate::stability::{self, Scheme};
use crate::Result;

/// Model family for the ablation ladder. The frozen variants share the
/// learnable variants' architecture but freeze (or zero) parts of it, so
/// accuracy and energy differences isolate one mechanism at a time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelVariant {
    /// Leaky integrator only: adaptation coupling hard-zeroed, one
    /// multiply per neuron-step in the energy model.
    #[serde(rename = "plain-lif")]
    PlainLif,
    /// The full adaptive state is simulated but its coupling is frozen at
    /// zero; dynamics match [`ModelVariant::PlainLif`] bit for bit while
    /// energy accounting pays for the extra state.
    #[serde(rename = "adapt-frozen")]
    AdaptFrozenZero,
    /// Frequency selectivity at the log-spaced initialization, frozen.
    #[serde(rename = "fs-frozen")]
    FsFrozen,
    /// Learnable per-neuron target frequencies, no cascade.
    #[serde(rename = "fs")]
    FsLearnable,
    /// Learnable frequencies plus the learnable all-pass cascade.
    #[serde(rename = "fs-ts")]
    FsTs,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 5] = [
        ModelVariant::PlainLif,
        ModelVariant::AdaptFrozenZero,
        ModelVariant::FsFrozen,
        ModelVariant::FsLearnable,
        ModelVariant::FsTs,
    ];

    /// Whether the optimizer may move the frequency coordinates.
    pub fn learns_frequency(self) -> bool {
        matches!(self, ModelVariant::FsLearnable | ModelVariant::FsTs)
    }

    /// Whether the optimizer may move the cascade coordinates.
    pub fn learns_shaping(self) -> bool {
        matches!(self, ModelVariant::FsTs)
    }

    /// Whether the adaptation coupling is hard-zeroed (plain leaky
    /// integration).
    pub fn kappa_frozen_zero(self) -> bool {
        matches!(self, ModelVariant::PlainLif | ModelVariant::AdaptFrozenZero)
    }

    /// The cascade order actually simulated: the configured order for the
    /// cascade variant, zero for everything else.
    pub fn effective_ts_order(self, configured: usize) -> usize {
        if matches!(self, ModelVariant::FsTs) {
            configured
        } else {
            0
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelVariant::PlainLif => "plain-lif",
            ModelVariant::AdaptFrozenZero => "adapt-frozen",
            ModelVariant::FsFrozen => "fs-frozen",
            ModelVariant::FsLearnable => "fs",
            ModelVariant::FsTs => "fs-ts",
        }
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain-lif" => Ok(ModelVariant::PlainLif),
            "adapt-frozen" => Ok(ModelVariant::AdaptFrozenZero),
            "fs-frozen" => Ok(ModelVariant::FsFrozen),
            "fs" => Ok(ModelVariant::FsLearnable),
            "fs-ts" => Ok(ModelVariant::FsTs),
            other => Err(Error::Config(format!(
                "unknown model variant '{other}'; expected one of \
                 plain-lif, adapt-frozen, fs-frozen, fs, fs-ts"
            ))),
        }
    }
}

/// Architecture and neuron constants of one hidden layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub width: usize,
    /// Configured cascade order M; simulated only by the cascade variant.
    pub ts_order: usize,
    /// Membrane time constant, seconds.
    pub tau_m: f64,
    /// Adaptation time constant, seconds.
    pub tau_a: f64,
}

impl LayerSpec {
    pub fn new(width: usize) -> Self {
        Self { width, ts_order: 1, tau_m: 0.04, tau_a: 0.2 }
    }
}

/// Full model description; every run-affecting choice lives here so that
/// one seed pins the entire training trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub input_channels: usize,
    pub classes: usize,
    pub layers: Vec<LayerSpec>,
    /// Simulation step, seconds; must match the dataset's binning.
    pub dt: f64,
    pub v_th: f64,
    /// Lower end of the target-frequency range, Hz.
    pub f_min_hz: f64,
    /// Upper end of the *initialization* range, Hz; learnable frequencies
    /// may move past it but never reach the per-layer stability cap.
    pub f_max_hz: f64,
    /// Probability of dropping a hidden spike during training.
    pub dropout: f64,
    pub variant: ModelVariant,
    /// Half-width of the triangular surrogate around threshold.
    pub surrogate_width: f64,
    /// If true, the backward pass treats the spike inside the soft-reset
    /// subtraction as a constant instead of applying the surrogate.
    pub detach_reset: bool,
    pub seed: u64,
}

impl NetworkConfig {
    /// Desk-scale defaults: 4 ms steps, unit threshold, frequencies
    /// initialized across 1-40 Hz, learnable-frequency variant.
    pub fn new(input_channels: usize, classes: usize, widths: &[usize]) -> Self {
        Self {
            input_channels,
            classes,
            layers: widths.iter().map(|&w| LayerSpec::new(w)).collect(),
            dt: 0.004,
            v_th: 1.0,
            f_min_hz: 1.0,
            f_max_hz: 40.0,
            dropout: 0.0,
            variant: ModelVariant::FsLearnable,
            surrogate_width: 1.0,
            detach_reset: false,
            seed: 7,
        }
    }

    /// The hard per-layer frequency ceiling: 0.95x the semi-implicit
    /// stability limit for that layer's time constants and step.
    pub fn f_cap_hz(&self, layer: usize) -> Result<f64> {
        let spec = &self.layers[layer];
        let probe = FsParams::new_unchecked(spec.tau_m, spec.tau_a, self.dt, 0.0, 0.0);
        let limit = stability::max_stable_target_frequency(&probe, Scheme::SemiImplicit)?;
        Ok(0.95 * limit.f_hz)
    }

    /// `(fan_in, width)` of each spiking layer, then the readout.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.layers.len() + 1);
        let mut fan_in = self.input_channels;
        for spec in &self.layers {
            dims.push((fan_in, spec.width));
            fan_in = spec.width;
        }
        dims.push((fan_in, self.classes));
        dims
    }

    /// Checks every structural and numeric constraint, reporting all
    /// violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.input_channels == 0 {
            problems.push("input_channels must be >= 1".to_string());
        }
        if self.classes < 2 {
            problems.push(format!("classes must be >= 2, got {}", self.classes));
        }
        if self.layers.is_empty() {
            problems.push("at least one hidden layer is required".to_string());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            problems.push(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.v_th > 0.0 && self.v_th.is_finite()) {
            problems.push(format!("v_th must be positive, got {}", self.v_th));
        }
        if !(self.f_min_hz > 0.0 && self.f_min_hz.is_finite()) {
            problems.push(format!("f_min_hz must be positive, got {}", self.f_min_hz));
        }
        if self.f_max_hz.is_nan() || self.f_max_hz <= self.f_min_hz {
            problems.push(format!(
                "f_max_hz ({}) must exceed f_min_hz ({})",
                self.f_max_hz, self.f_min_hz
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            problems.push(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if !(self.surrogate_width > 0.0 && self.surrogate_width.is_finite()) {
            problems.push(format!("surrogate_width must be positive, got {}", self.surrogate_width));
        }
        for (l, spec) in self.layers.iter().enumerate() {
            if spec.width == 0 {
                problems.push(format!("layer {l}: width must be >= 1"));
            }
            if !(spec.tau_m > 0.0 && spec.tau_a > 0.0) {
                problems.push(format!(
                    "layer {l}: time constants must be positive, got tau_m = {}, tau_a = {}",
                    spec.tau_m, spec.tau_a
                ));
            } else if self.dt >= spec.tau_m.min(spec.tau_a) {
                problems.push(format!(
                    "layer {l}: dt = {} must be below min(tau_m, tau_a) = {}",
                    self.dt,
                    spec.tau_m.min(spec.tau_a)
                ));
            } else {
                match self.f_cap_hz(l) {
                    Ok(cap) if self.f_max_hz >= cap => problems.push(format!(
                        "layer {l}: f_max_hz = {} reaches the stable cap {cap:.4} Hz \
                         (0.95x the semi-implicit frequency limit)",
                        self.f_max_hz
                    )),
                    Ok(_) => {}
                    Err(e) => problems.push(format!("layer {l}: {e}")),
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

/// Optimization hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Base Adam learning rate; annealed by a cosine over all steps.
    pub lr: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 30, batch_size: 32, lr: 1e-2 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.epochs == 0 {
            problems.push("epochs must be >= 1".to_string());
        }
        if self.batch_size == 0 {
            problems.push("batch_size must be >= 1".to_string());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            problems.push(format!("lr must be positive, got {}", self.lr));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }
}

/// Independent sub-seeds derived from the config seed, one per source of
/// randomness, so changing e.g. the dropout draw cannot disturb the
/// weight init.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedSet {
    pub init: u64,
    pub shuffle: u64,
    pub dropout: u64,
}

impl SeedSet {
    pub fn derive(seed: u64) -> Self {
        let mut state = seed;
        Self {
            init: data::splitmix64(&mut state),
            shuffle: data::splitmix64(&mut state),
            dropout: data::splitmix64(&mut state),
        }
    }
}

/// Deterministic per-sample dropout seed: unique per (epoch, dataset
/// index) and decorrelated by one mixing round.
pub(crate) fn dropout_sample_seed(dropout_seed: u64, epoch: usize, sample_index: usize) -> u64 {
    let mut state = dropout_seed.wrapping_add(((epoch as u64) << 32) | sample_index as u64);
    data::splitmix64(&mut state)
}

/// Triangular surrogate for the threshold derivative:
/// `(1/w) * max(0, 1 - |v - v_th| / w)`. Peaks at `1/w` on the threshold,
/// vanishes outside `|v - v_th| >= w`, and integrates to one.
pub fn surrogate_grad(v: f64, v_th: f64, width: f64) -> f64 {
    debug_assert!(width > 0.0, "surrogate width must be positive");
    (1.0 - (v - v_th).abs() / width).max(0.0) / width
}

/// A config + parameter block realized as simulation-ready layers, with
/// the per-neuron frequency decodes cached for the backward pass.
#[derive(Debug, Clone)]
pub struct Network {
    pub(crate) layers: Vec<SpikingLayer>,
    /// Per layer, per neuron; zeroed placeholders when the adaptation
    /// coupling is hard-frozen at zero.
    pub(crate) decodes: Vec<Vec<FrequencyDecode>>,
}

impl Network {
    /// Validates shapes and decodes every constrained parameter.
    pub fn build(cfg: &NetworkConfig, block: &ParamBlock) -> Result<Network> {
        cfg.validate()?;
        check_shapes(cfg, block)?;
        let mut layers = Vec::with_capacity(cfg.layers.len());
        let mut decodes = Vec::with_capacity(cfg.layers.len());
        let mut fan_in = cfg.input_channels;
        for (l, spec) in cfg.layers.iter().enumerate() {
            let lb = &block.layers[l];
            let m_eff = cfg.variant.effective_ts_order(spec.ts_order);
            let mut fs = Vec::with_capacity(spec.width);
            let mut ts = Vec::with_capacity(spec.width);
            let mut dec = Vec::with_capacity(spec.width);
            for n in 0..spec.width {
                if cfg.variant.kappa_frozen_zero() {
                    fs.push(FsParams::new(spec.tau_m, spec.tau_a, cfg.dt, 0.0, 0.0)?);
                    dec.push(FrequencyDecode { f_hz: 0.0, kappa: 0.0, dkappa_du: 0.0 });
                } else {
                    let d = decode_frequency(cfg, l, lb.u[n])?;
                    fs.push(FsParams::with_kappa(spec.tau_m, spec.tau_a, cfg.dt, d.kappa)?);
                    dec.push(d);
                }
                if m_eff > 0 {
                    let row = n * spec.ts_order..n * spec.ts_order + m_eff;
                    ts.push(TsParams::from_unconstrained(
                        lb.beta_hat[row.clone()].to_vec(),
                        lb.lambda_hat[row].to_vec(),
                    )?);
                } else {
                    ts.push(TsParams::init(0));
                }
            }
            layers.push(SpikingLayer::new(fan_in, spec.width, lb.weights.clone(), fs, ts, cfg.v_th)?);
            decodes.push(dec);
            fan_in = spec.width;
        }
        Ok(Network { layers, decodes })
    }

    pub fn layers(&self) -> &[SpikingLayer] {
        &self.layers
    }

    /// Decoded per-neuron target frequencies, Hz, per layer (zeros for
    /// the frozen-coupling variants).
    pub fn target_frequencies(&self) -> Vec<Vec<f64>> {
        self.decodes.iter().map(|l| l.iter().map(|d| d.f_hz).collect()).collect()
    }
}

fn check_shapes(cfg: &NetworkConfig, block: &ParamBlock) -> Result<()> {
    let mut problems = Vec::new();
    if block.layers.len() != cfg.layers.len() {
        problems.push(format!(
            "parameter block has {} layers, config has {}",
            block.layers.len(),
            cfg.layers.len()
        ));
    } else {
        let mut fan_in = cfg.input_channels;
        for (l, (spec, lb)) in cfg.layers.iter().zip(&block.layers).enumerate() {
            if lb.weights.len() != spec.width * fan_in {
                problems.push(format!(
                    "layer {l}: weight length {} does not match {} x {fan_in}",
                    lb.weights.len(),
                    spec.width
                ));
            }
            if lb.u.len() != spec.width {
                problems.push(format!(
                    "layer {l}: {} frequency coordinates for width {}",
                    lb.u.len(),
                    spec.width
                ));
            }
            if lb.beta_hat.len() != spec.width * spec.ts_order
                || lb.lambda_hat.len() != spec.width * spec.ts_order
            {
                problems.push(format!(
                    "layer {l}: cascade coordinate lengths ({}, {}) do not match width {} x order {}",
                    lb.beta_hat.len(),
                    lb.lambda_hat.len(),
                    spec.width,
                    spec.ts_order
                ));
            }
            fan_in = spec.width;
        }
        if block.readout_w.len() != cfg.classes * fan_in {
            problems.push(format!(
                "readout weight length {} does not match {} x {fan_in}",
                block.readout_w.len(),
                cfg.classes
            ));
        }
        if block.readout_b.len() != cfg.classes {
            problems.push(format!(
                "readout bias length {} does not match {} classes",
                block.readout_b.len(),
                cfg.classes
            ));
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(problems.join("; ")))
    }
}

/// One line of training history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
}

/// Result of a full training run: the best-validation parameters plus the
/// complete history.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: LearnableParams,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_accuracy: f64,
}

fn check_dataset(cfg: &NetworkConfig, ds: &Dataset) -> Result<()> {
    let mut problems = Vec::new();
    if ds.manifest.channels != cfg.input_channels {
        problems.push(format!(
            "dataset has {} channels, config expects {}",
            ds.manifest.channels, cfg.input_channels
        ));
    }
    if ds.class_count() != cfg.classes {
        problems.push(format!(
            "dataset has {} classes, config expects {}",
            ds.class_count(),
            cfg.classes
        ));
    }
    if ds.manifest.dt != cfg.dt {
        problems.push(format!(
            "dataset step {} s does not match config step {} s",
            ds.manifest.dt, cfg.dt
        ));
    }
    if ds.train.is_empty() || ds.val.is_empty() {
        problems.push("dataset must contain train and val samples".to_string());
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(problems.join("; ")))
    }
}

/// Runs the full loop: log-grid init, shuffled mini-batches, Adam with a
/// cosine schedule over all steps, dropout on hidden spikes, per-epoch
/// validation. Returns the parameters of the best validation epoch
/// (earliest on ties) and the complete history. Fully deterministic given
/// the config; bit-identical for any worker count.
pub fn train(cfg: &NetworkConfig, tcfg: &TrainConfig, ds: &Dataset) -> Result<TrainOutcome> {
    cfg.validate()?;
    tcfg.validate()?;
    check_dataset(cfg, ds)?;

    let mut params = init_parameters(cfg)?;
    let seeds = SeedSet::derive(cfg.seed);
    let n_train = ds.train.len();
    let batches_per_epoch = n_train.div_ceil(tcfg.batch_size);
    let horizon = tcfg.epochs * batches_per_epoch;
    let mask = learnable_mask(cfg, &params.block);
    let mut opt = OptimState::new(params.block.len(), tcfg.lr, horizon, mask);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(seeds.shuffle);

    let mut history = Vec::with_capacity(tcfg.epochs);
    let mut best: Option<(usize, f64, LearnableParams)> = None;
    let mut step = 0usize;

    for epoch in 0..tcfg.epochs {
        let mut order: Vec<usize> = (0..n_train).collect();
        order.shuffle(&mut shuffle_rng);

        let mut loss_sum = 0.0;
        for chunk in order.chunks(tcfg.batch_size) {
            let batch: Vec<&SpikeRaster> = chunk.iter().map(|&i| &ds.train[i]).collect();
            let labels: Vec<usize> = batch.iter().map(|r| r.label()).collect();
            let dropout = DropoutPlan::for_batch(cfg, seeds.dropout, epoch, chunk);
            let res =
                forward_backward(cfg, &params.block, &batch, &labels, dropout.as_ref())?;
            if !res.loss.is_finite() {
                return Err(Error::Diverged { step, what: format!("batch loss = {}", res.loss) });
            }
            loss_sum += res.loss * chunk.len() as f64;
            optimizer_step(&mut opt, &mut params.block, &res.gradients);
            step += 1;
            if !params.block.all_finite() {
                return Err(Error::Diverged {
                    step,
                    what: "non-finite parameter after optimizer step".to_string(),
                });
            }
        }
        let train_loss = loss_sum / n_train as f64;
        if !train_loss.is_finite() {
            return Err(Error::Diverged { step, what: format!("epoch loss = {train_loss}") });
        }

        let val = evaluate(cfg, &params.block, &ds.val)?;
        history.push(EpochStats { epoch, train_loss, val_accuracy: val.accuracy });
        let improved = match &best {
            Some((_, acc, _)) => val.accuracy > *acc,
            None => true,
        };
        if improved {
            best = Some((epoch, val.accuracy, params.clone()));
        }
    }

    let (best_epoch, best_accuracy, params) =
        best.expect("at least one epoch ran, so a best checkpoint exists");
    Ok(TrainOutcome { params, history, best_epoch, best_accuracy })
}

/// Which perturbation the targeted-frequency protocol applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbMode {
    /// Restore the frequency coordinates to their recorded initialization.
    Reset,
    /// Permute the trained frequency coordinates within each layer.
    Shuffle,
}

impl fmt::Display for PerturbMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PerturbMode::Reset => "reset",
            PerturbMode::Shuffle => "shuffle",
        })
    }
}

impl FromStr for PerturbMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reset" => Ok(PerturbMode::Reset),
            "shuffle" => Ok(PerturbMode::Shuffle),
            other => Err(Error::Config(format!(
                "unknown perturbation mode '{other}'; expected reset or shuffle"
            ))),
        }
    }
}

/// Applies the targeted perturbation to the frequency coordinates only:
/// reset restores the recorded initialization; shuffle applies a seeded
/// within-layer permutation, preserving each layer's multiset of decoded
/// frequencies exactly. Everything else is left untouched.
pub fn perturb_target_frequencies(
    params: &LearnableParams,
    mode: PerturbMode,
    seed: u64,
) -> Result<LearnableParams> {
    let mut out = params.clone();
    match mode {
        PerturbMode::Reset => {
            if params.init_u.len() != params.block.layers.len()
                || params
                    .init_u
                    .iter()
                    .zip(&params.block.layers)
                    .any(|(init, l)| init.len() != l.u.len())
            {
                return Err(Error::Config(
                    "recorded initialization is missing or does not match the \
                     parameter shapes; cannot reset target frequencies"
                        .to_string(),
                ));
            }
            for (l, init) in out.block.layers.iter_mut().zip(&params.init_u) {
                l.u.copy_from_slice(init);
            }
        }
        PerturbMode::Shuffle => {
            let mut state = seed;
            for l in out.block.layers.iter_mut() {
                let layer_seed = data::splitmix64(&mut state);
                let mut rng = ChaCha8Rng::seed_from_u64(layer_seed);
                let mut perm: Vec<usize> = (0..l.u.len()).collect();
                perm.shuffle(&mut rng);
                let old = l.u.clone();
                for (i, &j) in perm.iter().enumerate() {
                    l.u[i] = old[j];
                }
            }
        }
    }
    Ok(out)
}
