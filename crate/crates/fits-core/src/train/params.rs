//! Parameter containers, constrained decodes, and initialization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::freq;
use crate::neuron;
use crate::Result;

use super::{NetworkConfig, SeedSet};

/// Learnable quantities of one spiking layer, all in unconstrained
/// coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerBlock {
    /// Row-major `width x fan_in` synaptic weights.
    pub weights: Vec<f64>,
    /// Per-neuron unconstrained target-frequency coordinate.
    pub u: Vec<f64>,
    /// Row-major `width x M` all-pass coordinates (tanh-decoded).
    pub beta_hat: Vec<f64>,
    /// Row-major `width x M` mixing coordinates (sigmoid-decoded).
    pub lambda_hat: Vec<f64>,
}

/// Every learnable number in the model, in a fixed traversal order
/// (per layer: weights, u, beta_hat, lambda_hat; then the readout).
/// Doubles as the container for gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamBlock {
    pub layers: Vec<LayerBlock>,
    /// Row-major `classes x last_width` readout weights.
    pub readout_w: Vec<f64>,
    pub readout_b: Vec<f64>,
}

impl ParamBlock {
    /// An all-zero block with the same shapes.
    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| LayerBlock {
                    weights: vec![0.0; l.weights.len()],
                    u: vec![0.0; l.u.len()],
                    beta_hat: vec![0.0; l.beta_hat.len()],
                    lambda_hat: vec![0.0; l.lambda_hat.len()],
                })
                .collect(),
            readout_w: vec![0.0; self.readout_w.len()],
            readout_b: vec![0.0; self.readout_b.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.u.len() + l.beta_hat.len() + l.lambda_hat.len())
            .sum::<usize>()
            + self.readout_w.len()
            + self.readout_b.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Copies every entry into one flat vector, in traversal order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.u);
            out.extend_from_slice(&l.beta_hat);
            out.extend_from_slice(&l.lambda_hat);
        }
        out.extend_from_slice(&self.readout_w);
        out.extend_from_slice(&self.readout_b);
        out
    }

    /// Inverse of [`flatten`]; panics on length mismatch.
    ///
    /// [`flatten`]: ParamBlock::flatten
    pub fn assign_from_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.len(), "flat parameter length mismatch");
        let mut i = 0;
        let mut take = |dst: &mut [f64]| {
            dst.copy_from_slice(&flat[i..i + dst.len()]);
            i += dst.len();
        };
        for l in &mut self.layers {
            take(&mut l.weights);
            take(&mut l.u);
            take(&mut l.beta_hat);
            take(&mut l.lambda_hat);
        }
        take(&mut self.readout_w);
        take(&mut self.readout_b);
    }

    /// Elementwise in-place accumulation, used for batch reduction in a
    /// fixed order.
    pub fn add_assign(&mut self, other: &Self) {
        let add = |a: &mut [f64], b: &[f64]| {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        };
        for (l, o) in self.layers.iter_mut().zip(&other.layers) {
            add(&mut l.weights, &o.weights);
            add(&mut l.u, &o.u);
            add(&mut l.beta_hat, &o.beta_hat);
            add(&mut l.lambda_hat, &o.lambda_hat);
        }
        add(&mut self.readout_w, &other.readout_w);
        add(&mut self.readout_b, &other.readout_b);
    }

    /// True iff every coordinate is finite; a cheap post-step guard
    /// against silent parameter blow-up.
    pub fn all_finite(&self) -> bool {
        let ok = |v: &[f64]| v.iter().all(|x| x.is_finite());
        self.layers
            .iter()
            .all(|l| ok(&l.weights) && ok(&l.u) && ok(&l.beta_hat) && ok(&l.lambda_hat))
            && ok(&self.readout_w)
            && ok(&self.readout_b)
    }
}

/// Model parameters plus the recorded frequency-coordinate initialization
/// (needed by the perturbation protocol).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnableParams {
    pub block: ParamBlock,
    /// Per-layer copy of `u` as initialized.
    pub init_u: Vec<Vec<f64>>,
}

/// Keeps the logistic output strictly inside (0,1) so decoded target
/// frequencies stay strictly inside their open interval.
pub(crate) const SIGMA_MARGIN: f64 = 1e-12;

pub(crate) fn sigma_clamped(u: f64) -> f64 {
    let s = 1.0 / (1.0 + (-u).exp());
    s.clamp(SIGMA_MARGIN, 1.0 - SIGMA_MARGIN)
}

/// A decoded per-neuron target frequency with the quantities the
/// optimizer chains through.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyDecode {
    pub f_hz: f64,
    pub kappa: f64,
    /// d kappa / d u at the decoded point.
    pub dkappa_du: f64,
}

/// Decodes an unconstrained coordinate into `(f*, kappa)` for one layer:
/// `f* = f_min * (f_cap / f_min)^{sigma(u)}` with `f_cap` 0.95x the
/// layer's semi-implicit stability limit, then `kappa` through the
/// inverse target map. The construction keeps every reachable `kappa`
/// strictly inside the Jury-stable region.
pub fn decode_frequency(cfg: &NetworkConfig, layer: usize, u: f64) -> Result<FrequencyDecode> {
    let spec = &cfg.layers[layer];
    let f_cap = cfg.f_cap_hz(layer)?;
    let s = sigma_clamped(u);
    let ratio = f_cap / cfg.f_min_hz;
    let ln_ratio = ratio.ln();
    let f = cfg.f_min_hz * ratio.powf(s);
    let omega = std::f64::consts::TAU * f;
    let (mu, rho) = (1.0 / spec.tau_m, 1.0 / spec.tau_a);
    let kappa = freq::kappa_from_target(mu, rho, omega)?;
    // dkappa/dOmega from the stationarity quadratic, then the chain
    // through f(u).
    let b = rho * (rho + mu);
    let c = omega * omega + rho * rho;
    let dkappa_domega = 2.0 * omega * c / b.hypot(c);
    let df_du = f * ln_ratio * s * (1.0 - s);
    let dkappa_du = dkappa_domega * std::f64::consts::TAU * df_du;
    Ok(FrequencyDecode { f_hz: f, kappa, dkappa_du })
}

/// Inverse of the frequency decode: the unconstrained coordinate whose
/// decode is (up to the sigma margin) the requested frequency.
pub fn encode_frequency(cfg: &NetworkConfig, layer: usize, f_hz: f64) -> Result<f64> {
    let f_cap = cfg.f_cap_hz(layer)?;
    if !(f_hz > 0.0 && f_hz.is_finite()) {
        return Err(Error::Config(format!("target frequency must be positive, got {f_hz}")));
    }
    let s = ((f_hz / cfg.f_min_hz).ln() / (f_cap / cfg.f_min_hz).ln())
        .clamp(SIGMA_MARGIN, 1.0 - SIGMA_MARGIN);
    Ok((s / (1.0 - s)).ln())
}

/// Initializes parameters for a validated configuration:
///
/// * per-neuron target frequencies on a deterministic log-spaced grid
///   over `[f_min, f_max]` (neuron `i` of `N` gets
///   `f_min * (f_max/f_min)^{i/(N-1)}`; a single neuron gets the
///   geometric midpoint), stored through [`encode_frequency`];
/// * all-pass coordinates at 0 and mixing coordinates at -3.0, so each
///   stage starts essentially on the direct pathway (`lambda ~ 0.047`);
/// * weights uniform on `(-1/sqrt(fan_in), 1/sqrt(fan_in))` from the
///   seed's dedicated init stream; readout bias at zero.
pub fn init_parameters(cfg: &NetworkConfig) -> Result<LearnableParams> {
    cfg.validate()?;
    let seeds = SeedSet::derive(cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seeds.init);
    let mut layers = Vec::with_capacity(cfg.layers.len());
    let mut fan_in = cfg.input_channels;
    for (l, spec) in cfg.layers.iter().enumerate() {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let weights: Vec<f64> =
            (0..spec.width * fan_in).map(|_| rng.random_range(-bound..bound)).collect();
        let freqs = if spec.width == 1 {
            vec![(cfg.f_min_hz * cfg.f_max_hz).sqrt()]
        } else {
            freq::log_grid(cfg.f_min_hz, cfg.f_max_hz, spec.width)
        };
        let u = freqs.iter().map(|&f| encode_frequency(cfg, l, f)).collect::<Result<Vec<_>>>()?;
        let m = spec.ts_order;
        layers.push(LayerBlock {
            weights,
            u,
            beta_hat: vec![0.0; spec.width * m],
            lambda_hat: vec![neuron::INIT_LAMBDA_HAT; spec.width * m],
        });
        fan_in = spec.width;
    }
    let bound = 1.0 / (fan_in as f64).sqrt();
    let readout_w: Vec<f64> =
        (0..cfg.classes * fan_in).map(|_| rng.random_range(-bound..bound)).collect();
    let block = ParamBlock { layers, readout_w, readout_b: vec![0.0; cfg.classes] };
    let init_u = block.layers.iter().map(|l| l.u.clone()).collect();
    Ok(LearnableParams { block, init_u })
}

/// Which flat entries the optimizer may move for a given variant, in
/// [`ParamBlock::flatten`] order: weights and readout always learn;
/// frequency coordinates only for the learnable-frequency variants;
/// shaping coordinates only when the cascade is enabled.
pub fn learnable_mask(cfg: &NetworkConfig, block: &ParamBlock) -> Vec<bool> {
    let mut mask = Vec::with_capacity(block.len());
    for l in &block.layers {
        mask.extend(std::iter::repeat(true).take(l.weights.len()));
        mask.extend(std::iter::repeat(cfg.variant.learns_frequency()).take(l.u.len()));
        mask.extend(std::iter::repeat(cfg.variant.learns_shaping()).take(l.beta_hat.len()));
        mask.extend(std::iter::repeat(cfg.variant.learns_shaping()).take(l.lambda_hat.len()));
    }
    mask.extend(std::iter::repeat(true).take(block.readout_w.len() + block.readout_b.len()));
    mask
}
