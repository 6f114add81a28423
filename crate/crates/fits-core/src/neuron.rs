//! Discrete-time neuron state update, scalar and layer form.
//!
//! One update step is the composition of three stages, always in this
//! order:
//!
//! 1. **FS step** — semi-implicit Euler step of the adaptive membrane
//!    pair: `V0[k+1] = (1-mu*dt) V[k] - eta*dt a[k] + I[k]`, then
//!    `a[k+1] = (1-rho*dt) a[k] + gamma*dt V0[k+1]`. The adaptation
//!    update deliberately uses the *new* pre-reset voltage; that coupling
//!    is what widens the stable parameter range.
//! 2. **TS step** — a cascade of M first-order all-pass stages
//!    `V_m[k+1] = beta_m (V_m[k] - V_{m-1}[k+1]) + V_{m-1}[k]` whose
//!    outputs are recursively mixed with the direct pathway,
//!    `Vt_m = (1-lambda_m) Vt_{m-1} + lambda_m V_m`, producing the mixed
//!    pre-reset voltage `Vt_M`.
//! 3. **Fire and reset** — threshold at `v_th` (equality fires) with a
//!    subtractive soft reset of the carried voltage only. Adaptation and
//!    stage states persist across spikes.
//!
//! The layer form runs the same arithmetic for every neuron of a dense
//! feedforward layer and is bit-exactly equal to looping the scalar
//! reference — enforced by tests with zero tolerance.

use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::linalg;
use crate::stability;
use crate::Result;

/// Decode saturation for the tanh/logistic parameter maps. `tanh` and the
/// logistic rounding to exactly +/-1 or 0/1 in double precision would break
/// the open-interval contracts (|beta| < 1, lambda in (0,1)), so decoded
/// values are clamped this far inside the closed interval.
const DECODE_MARGIN: f64 = 1e-15;

/// Membrane/adaptation parameters of one neuron.
///
/// Stored as time constants plus the two coupling gains; the derived rates
/// `mu = 1/tau_m`, `rho = 1/tau_a`, coupling product `kappa = eta*gamma`
/// and the discrete coefficients are exposed as methods so every caller
/// computes them identically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FsParams {
    /// Membrane time constant (seconds).
    pub tau_m: f64,
    /// Adaptation time constant (seconds).
    pub tau_a: f64,
    /// Simulation step (seconds).
    pub dt: f64,
    /// Adaptation-to-voltage coupling gain.
    pub eta: f64,
    /// Voltage-to-adaptation coupling gain.
    pub gamma: f64,
}

impl FsParams {
    /// Validated constructor. Requires positive time constants,
    /// `0 < dt < min(tau_m, tau_a)` (so both discrete decay factors lie in
    /// (0,1)), `kappa = eta*gamma >= 0`, and `kappa` strictly below the
    /// semi-implicit stability bound.
    pub fn new(tau_m: f64, tau_a: f64, dt: f64, eta: f64, gamma: f64) -> Result<Self> {
        let p = Self { tau_m, tau_a, dt, eta, gamma };
        let mut problems = Vec::new();
        if !(tau_m.is_finite() && tau_m > 0.0) {
            problems.push(format!("tau_m must be positive and finite, got {tau_m}"));
        }
        if !(tau_a.is_finite() && tau_a > 0.0) {
            problems.push(format!("tau_a must be positive and finite, got {tau_a}"));
        }
        if !(dt.is_finite() && dt > 0.0) {
            problems.push(format!("dt must be positive and finite, got {dt}"));
        } else if tau_m > 0.0 && tau_a > 0.0 && dt >= tau_m.min(tau_a) {
            problems.push(format!(
                "dt must be below min(tau_m, tau_a) = {}, got {dt}",
                tau_m.min(tau_a)
            ));
        }
        if !eta.is_finite() || !gamma.is_finite() {
            problems.push(format!("eta and gamma must be finite, got eta={eta}, gamma={gamma}"));
        } else if eta * gamma < 0.0 {
            problems.push(format!("kappa = eta*gamma must be nonnegative, got {}", eta * gamma));
        } else if problems.is_empty() {
            let bound = stability::semi_implicit_kappa_bound(p.mu(), p.rho(), dt);
            if p.kappa() >= bound {
                problems.push(format!(
                    "kappa = {} is at or above the semi-implicit stability bound {bound}",
                    p.kappa()
                ));
            }
        }
        if problems.is_empty() {
            Ok(p)
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    /// Constructor with the tied gain convention `eta = gamma = sqrt(kappa)`.
    pub fn with_kappa(tau_m: f64, tau_a: f64, dt: f64, kappa: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(Error::Config(format!("kappa must be nonnegative and finite, got {kappa}")));
        }
        let g = kappa.sqrt();
        Self::new(tau_m, tau_a, dt, g, g)
    }

    /// Unvalidated constructor for stability exploration (bisection across
    /// the stability bounds needs parameter sets the validated constructors
    /// reject). Dynamics built from such parameters may diverge.
    pub fn new_unchecked(tau_m: f64, tau_a: f64, dt: f64, eta: f64, gamma: f64) -> Self {
        Self { tau_m, tau_a, dt, eta, gamma }
    }

    /// Leak rate `1/tau_m` (1/s).
    pub fn mu(&self) -> f64 {
        1.0 / self.tau_m
    }

    /// Adaptation rate `1/tau_a` (1/s).
    pub fn rho(&self) -> f64 {
        1.0 / self.tau_a
    }

    /// Coupling product `eta*gamma` (1/s^2).
    pub fn kappa(&self) -> f64 {
        self.eta * self.gamma
    }

    /// Discrete voltage decay `1 - mu*dt`.
    pub fn mu_bar(&self) -> f64 {
        1.0 - self.mu() * self.dt
    }

    /// Discrete adaptation decay `1 - rho*dt`.
    pub fn rho_bar(&self) -> f64 {
        1.0 - self.rho() * self.dt
    }

    /// Discrete coupling product `eta*gamma*dt^2`.
    pub fn kappa_bar(&self) -> f64 {
        self.eta * self.gamma * self.dt * self.dt
    }

    /// True when the gains follow the tied convention `eta == gamma`.
    pub fn gains_tied(&self) -> bool {
        self.eta == self.gamma
    }

    /// Step coefficients, precomputed once so the scalar and layer paths
    /// perform identical arithmetic.
    pub fn coeffs(&self) -> FsCoeffs<f64> {
        FsCoeffs {
            mu_bar: self.mu_bar(),
            rho_bar: self.rho_bar(),
            eta_dt: self.eta * self.dt,
            gamma_dt: self.gamma * self.dt,
        }
    }

    /// Single-precision coefficients for the 32-bit mode.
    pub fn coeffs_f32(&self) -> FsCoeffs<f32> {
        let c = self.coeffs();
        FsCoeffs {
            mu_bar: c.mu_bar as f32,
            rho_bar: c.rho_bar as f32,
            eta_dt: c.eta_dt as f32,
            gamma_dt: c.gamma_dt as f32,
        }
    }
}

/// Precomputed per-step coefficients of the FS update.
///
/// Generic over the float width: the reference path and everything
/// acceptance-tested runs in `f64`; the `f32` instantiation exists as a
/// memory-saving mode for large sweeps and is validated against the `f64`
/// path only at coarse tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FsCoeffs<T> {
    pub mu_bar: T,
    pub rho_bar: T,
    pub eta_dt: T,
    pub gamma_dt: T,
}

/// All-pass cascade parameters of one neuron, stored in unconstrained
/// coordinates (`beta = tanh(beta_hat)`, `lambda = logistic(lambda_hat)`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TsParams {
    beta_hat: Vec<f64>,
    lambda_hat: Vec<f64>,
    #[serde(skip)]
    beta: Vec<f64>,
    #[serde(skip)]
    lambda: Vec<f64>,
}

/// Initialization value for the mixing logit; `logistic(-3) ~ 0.0474`,
/// close to the direct pathway.
pub const INIT_LAMBDA_HAT: f64 = -3.0;

impl TsParams {
    /// Builds from unconstrained coordinates. Both lists must have equal
    /// length (the cascade order M); non-finite entries are rejected.
    pub fn from_unconstrained(beta_hat: Vec<f64>, lambda_hat: Vec<f64>) -> Result<Self> {
        if beta_hat.len() != lambda_hat.len() {
            return Err(Error::Config(format!(
                "beta_hat and lambda_hat must have equal length, got {} and {}",
                beta_hat.len(),
                lambda_hat.len()
            )));
        }
        if beta_hat.iter().chain(lambda_hat.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Config("unconstrained TS coordinates must be finite".into()));
        }
        let beta = beta_hat.iter().map(|&b| decode_beta(b)).collect();
        let lambda = lambda_hat.iter().map(|&l| decode_lambda(l)).collect();
        Ok(Self { beta_hat, lambda_hat, beta, lambda })
    }

    /// Builds from constrained values `|beta| < 1`, `lambda in (0,1)` by
    /// inverting the parameter maps.
    pub fn from_constrained(betas: &[f64], lambdas: &[f64]) -> Result<Self> {
        let mut problems = Vec::new();
        for (m, &b) in betas.iter().enumerate() {
            if !(b.is_finite() && b.abs() < 1.0) {
                problems.push(format!("beta[{m}] must satisfy |beta| < 1, got {b}"));
            }
        }
        for (m, &l) in lambdas.iter().enumerate() {
            if !(l.is_finite() && l > 0.0 && l < 1.0) {
                problems.push(format!("lambda[{m}] must lie in (0,1), got {l}"));
            }
        }
        if !problems.is_empty() {
            return Err(Error::Config(problems.join("; ")));
        }
        let beta_hat = betas.iter().map(|&b| b.atanh()).collect();
        let lambda_hat = lambdas.iter().map(|&l| (l / (1.0 - l)).ln()).collect();
        Self::from_unconstrained(beta_hat, lambda_hat)
    }

    /// Default initialization for a cascade of `order` stages:
    /// `beta_hat = 0` (one-sample delays) and `lambda_hat = -3`
    /// (mixing weight ~ 0.047, close to the direct pathway).
    pub fn init(order: usize) -> Self {
        Self::from_unconstrained(vec![0.0; order], vec![INIT_LAMBDA_HAT; order])
            .expect("finite constants")
    }

    /// Cascade order M. Zero means the identity TS pathway (FS-only).
    pub fn order(&self) -> usize {
        self.beta_hat.len()
    }

    pub fn beta_hat(&self) -> &[f64] {
        &self.beta_hat
    }

    pub fn lambda_hat(&self) -> &[f64] {
        &self.lambda_hat
    }

    /// Decoded all-pass coefficients, each strictly inside (-1, 1).
    pub fn betas(&self) -> &[f64] {
        &self.beta
    }

    /// Decoded mixing weights, each strictly inside (0, 1).
    pub fn lambdas(&self) -> &[f64] {
        &self.lambda
    }

    /// Single-precision copies of the decoded coefficients.
    pub fn betas_f32(&self) -> Vec<f32> {
        self.beta.iter().map(|&b| b as f32).collect()
    }

    pub fn lambdas_f32(&self) -> Vec<f32> {
        self.lambda.iter().map(|&l| l as f32).collect()
    }
}

/// `tanh` decode saturated to stay strictly inside (-1, 1).
pub fn decode_beta(beta_hat: f64) -> f64 {
    beta_hat.tanh().clamp(-(1.0 - DECODE_MARGIN), 1.0 - DECODE_MARGIN)
}

/// Logistic decode saturated to stay strictly inside (0, 1).
pub fn decode_lambda(lambda_hat: f64) -> f64 {
    let l = 1.0 / (1.0 + (-lambda_hat).exp());
    l.clamp(DECODE_MARGIN, 1.0 - DECODE_MARGIN)
}

/// Full per-neuron state carried between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronState {
    /// Post-reset carried voltage V[k].
    pub v: f64,
    /// Adaptation current a[k].
    pub a: f64,
    /// Previous-step stage outputs V_0[k]..V_M[k]; slot 0 holds the
    /// previous *pre-reset* FS output, which the first all-pass stage
    /// needs even though the carried voltage is post-reset.
    pub stage_v: Vec<f64>,
}

impl NeuronState {
    /// Fresh all-zero state for a cascade of `order` stages.
    pub fn zeros(order: usize) -> Self {
        Self { v: 0.0, a: 0.0, stage_v: vec![0.0; order + 1] }
    }
}

/// Result of the threshold stage of one update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikeOutput {
    /// Binary spike indicator (1.0 fires).
    pub s: f64,
    /// Post-reset carried voltage.
    pub v_next: f64,
    /// Mixed pre-reset voltage, retained for analysis and training.
    pub pre_reset_v: f64,
}

/// How the threshold stage treats the mixed voltage. `Binary` is the real
/// neuron; the other two exist for gradient diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpikeMode {
    /// Heaviside threshold with subtractive soft reset.
    Binary,
    /// The Heaviside replaced by its smooth triangular-integral relaxation
    /// of the given width; emission and reset both use the relaxed value,
    /// making the whole network differentiable.
    Relaxed { width: f64 },
    /// Spiking disabled: neurons emit their pre-reset voltage and never
    /// reset, exposing the smooth linear subthreshold map.
    Passthrough,
}

/// Generic FS step core; see the module docs for the update equations.
#[inline]
pub fn fs_step_with<T: Float>(c: &FsCoeffs<T>, v: T, a: T, input: T) -> (T, T) {
    let v0 = c.mu_bar * v - c.eta_dt * a + input;
    let a_next = c.rho_bar * a + c.gamma_dt * v0;
    (v0, a_next)
}

/// Generic TS step core. `stage_prev` holds `V_0[k]..V_M[k]`, `v0_next` is
/// the new FS output; new stage values are written into `stage_next` and
/// the mixed voltage `Vt_M[k+1]` is returned. Slices must all have length
/// M+1 (checked by callers).
#[inline]
pub fn ts_step_with<T: Float>(
    betas: &[T],
    lambdas: &[T],
    stage_prev: &[T],
    v0_next: T,
    stage_next: &mut [T],
) -> T {
    stage_next[0] = v0_next;
    let mut mixed = v0_next;
    for m in 1..stage_next.len() {
        let vm = betas[m - 1] * (stage_prev[m] - stage_next[m - 1]) + stage_prev[m - 1];
        stage_next[m] = vm;
        let l = lambdas[m - 1];
        mixed = (T::one() - l) * mixed + l * vm;
    }
    mixed
}

/// Generic threshold/soft-reset core. Equality fires (`theta(0) = 1`).
/// An infinite threshold never fires and passes the voltage through,
/// which is handy for probing the subthreshold map in isolation.
#[inline]
pub fn fire_and_reset_with<T: Float>(v_mixed: T, v_th: T) -> (T, T) {
    if v_mixed >= v_th {
        (T::one(), v_mixed - v_th)
    } else {
        (T::zero(), v_mixed)
    }
}

/// One FS step in double precision: `(v0_next, a_next)` from the carried
/// voltage, adaptation current, and summed input.
pub fn fs_step(p: &FsParams, v: f64, a: f64, input: f64) -> (f64, f64) {
    fs_step_with(&p.coeffs(), v, a, input)
}

/// One TS step in double precision: returns the updated stage list (slot 0
/// is `v0_next`) and the mixed pre-reset voltage.
pub fn ts_step(ts: &TsParams, stage_v_prev: &[f64], v0_next: f64) -> Result<(Vec<f64>, f64)> {
    if stage_v_prev.len() != ts.order() + 1 {
        return Err(Error::Config(format!(
            "stage list length {} does not match TS order {} (expected {})",
            stage_v_prev.len(),
            ts.order(),
            ts.order() + 1
        )));
    }
    let mut next = vec![0.0; stage_v_prev.len()];
    let mixed = ts_step_with(ts.betas(), ts.lambdas(), stage_v_prev, v0_next, &mut next);
    Ok((next, mixed))
}

/// Threshold and subtractive soft reset.
pub fn fire_and_reset(v_mixed: f64, v_th: f64) -> SpikeOutput {
    let (s, v_next) = fire_and_reset_with(v_mixed, v_th);
    SpikeOutput { s, v_next, pre_reset_v: v_mixed }
}

/// Composed scalar update: FS step, TS step, fire-and-reset, in that
/// order. The adaptation update uses the pre-mix, pre-reset FS output;
/// spiking modifies only the carried voltage.
pub fn fits_step(
    p: &FsParams,
    ts: &TsParams,
    st: &NeuronState,
    input: f64,
    v_th: f64,
) -> Result<(NeuronState, SpikeOutput)> {
    let (v0, a_next) = fs_step(p, st.v, st.a, input);
    let (stage_next, mixed) = ts_step(ts, &st.stage_v, v0)?;
    let out = fire_and_reset(mixed, v_th);
    Ok((NeuronState { v: out.v_next, a: a_next, stage_v: stage_next }, out))
}

/// A dense feedforward layer of neurons sharing `dt` and threshold.
#[derive(Debug, Clone)]
pub struct SpikingLayer {
    n_in: usize,
    n_out: usize,
    /// Row-major `n_out x n_in` weights.
    weights: Vec<f64>,
    fs: Vec<FsParams>,
    ts: Vec<TsParams>,
    v_th: f64,
}

impl SpikingLayer {
    /// Validated constructor; all per-neuron parameter lists must match
    /// the weight shape and share one cascade order and one `dt`.
    pub fn new(
        n_in: usize,
        n_out: usize,
        weights: Vec<f64>,
        fs: Vec<FsParams>,
        ts: Vec<TsParams>,
        v_th: f64,
    ) -> Result<Self> {
        let mut problems = Vec::new();
        if n_in == 0 || n_out == 0 {
            problems.push(format!("layer must be nonempty, got {n_in} inputs, {n_out} neurons"));
        }
        if weights.len() != n_out * n_in {
            problems.push(format!(
                "weight length {} does not match {n_out} x {n_in}",
                weights.len()
            ));
        }
        if fs.len() != n_out {
            problems.push(format!("expected {n_out} FS parameter sets, got {}", fs.len()));
        }
        if ts.len() != n_out {
            problems.push(format!("expected {n_out} TS parameter sets, got {}", ts.len()));
        }
        if let Some(first) = ts.first() {
            if ts.iter().any(|t| t.order() != first.order()) {
                problems.push("all neurons in a layer must share one TS order".into());
            }
        }
        if let Some(first) = fs.first() {
            if fs.iter().any(|p| p.dt != first.dt) {
                problems.push("all neurons in a layer must share one dt".into());
            }
        }
        if !(v_th.is_finite() && v_th > 0.0) {
            problems.push(format!("v_th must be positive, got {v_th}"));
        }
        if problems.is_empty() {
            Ok(Self { n_in, n_out, weights, fs, ts, v_th })
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn fs(&self) -> &[FsParams] {
        &self.fs
    }

    pub fn ts(&self) -> &[TsParams] {
        &self.ts
    }

    pub fn v_th(&self) -> f64 {
        self.v_th
    }

    /// Cascade order shared by the layer's neurons.
    pub fn order(&self) -> usize {
        self.ts.first().map_or(0, |t| t.order())
    }
}

/// Everything a layer run produces, kept per timestep for training.
/// Row-major layouts: `spikes`, `pre_reset`, `adapt` are `T x n_out`;
/// `stages` is `T x n_out x (M+1)`.
#[derive(Debug, Clone)]
pub struct LayerRun {
    pub t_bins: usize,
    pub n_out: usize,
    pub order: usize,
    /// Emitted outputs: binary spikes in `Binary` mode, relaxed spike
    /// values in `Relaxed` mode, pre-reset voltages in `Passthrough`.
    pub spikes: Vec<f64>,
    pub pre_reset: Vec<f64>,
    pub adapt: Vec<f64>,
    pub stages: Vec<f64>,
}

impl LayerRun {
    /// Emitted outputs at timestep `k`.
    pub fn spikes_at(&self, k: usize) -> &[f64] {
        &self.spikes[k * self.n_out..(k + 1) * self.n_out]
    }

    /// Pre-reset voltages at timestep `k`.
    pub fn pre_reset_at(&self, k: usize) -> &[f64] {
        &self.pre_reset[k * self.n_out..(k + 1) * self.n_out]
    }
}

/// Smooth spike relaxation whose derivative is the triangular surrogate:
/// 0 below `v_th - width`, 1 above `v_th + width`, piecewise-quadratic
/// ramp in between, 1/2 exactly at threshold.
pub fn relaxed_spike(v: f64, v_th: f64, width: f64) -> f64 {
    let d = v - v_th;
    if d <= -width {
        0.0
    } else if d < 0.0 {
        let r = d + width;
        r * r / (2.0 * width * width)
    } else if d < width {
        let r = width - d;
        1.0 - r * r / (2.0 * width * width)
    } else {
        1.0
    }
}

/// Vectorized layer forward pass: per timestep the input spikes are mixed
/// through the weights, then every neuron performs one composed update.
/// Bit-exactly equal to looping [`fits_step`] per neuron per timestep.
///
/// `input_spikes` is row-major `T x n_in`. State starts at zero.
pub fn layer_forward(layer: &SpikingLayer, input_spikes: &[f64], t_bins: usize) -> Result<LayerRun> {
    layer_forward_mode(layer, input_spikes, t_bins, SpikeMode::Binary)
}

/// [`layer_forward`] with an explicit spike mode (see [`SpikeMode`]).
pub fn layer_forward_mode(
    layer: &SpikingLayer,
    input_spikes: &[f64],
    t_bins: usize,
    mode: SpikeMode,
) -> Result<LayerRun> {
    let (n_in, n_out) = (layer.n_in, layer.n_out);
    if input_spikes.len() != t_bins * n_in {
        return Err(Error::Config(format!(
            "input length {} does not match T x n_in = {t_bins} x {n_in}",
            input_spikes.len()
        )));
    }
    let order = layer.order();
    let m1 = order + 1;
    let coeffs: Vec<FsCoeffs<f64>> = layer.fs.iter().map(FsParams::coeffs).collect();

    let mut run = LayerRun {
        t_bins,
        n_out,
        order,
        spikes: vec![0.0; t_bins * n_out],
        pre_reset: vec![0.0; t_bins * n_out],
        adapt: vec![0.0; t_bins * n_out],
        stages: vec![0.0; t_bins * n_out * m1],
    };

    let mut v = vec![0.0; n_out];
    let mut a = vec![0.0; n_out];
    let zero_stages = vec![0.0; n_out * m1];
    let mut current = vec![0.0; n_out];

    for k in 0..t_bins {
        let input_row = &input_spikes[k * n_in..(k + 1) * n_in];
        linalg::matvec(&layer.weights, n_out, n_in, input_row, &mut current);

        let (head, tail) = run.stages.split_at_mut(k * n_out * m1);
        let prev_all: &[f64] = if k == 0 { &zero_stages } else { &head[(k - 1) * n_out * m1..] };
        let next_all = &mut tail[..n_out * m1];

        for n in 0..n_out {
            let (v0, a_next) = fs_step_with(&coeffs[n], v[n], a[n], current[n]);
            let prev = &prev_all[n * m1..(n + 1) * m1];
            let next = &mut next_all[n * m1..(n + 1) * m1];
            let mixed =
                ts_step_with(layer.ts[n].betas(), layer.ts[n].lambdas(), prev, v0, next);
            if !(mixed.is_finite() && a_next.is_finite()) {
                return Err(Error::NonFinite { neuron: n, step: k });
            }
            let (emit, v_next) = match mode {
                SpikeMode::Binary => fire_and_reset_with(mixed, layer.v_th),
                SpikeMode::Relaxed { width } => {
                    let s = relaxed_spike(mixed, layer.v_th, width);
                    (s, mixed - s * layer.v_th)
                }
                SpikeMode::Passthrough => (mixed, mixed),
            };
            v[n] = v_next;
            a[n] = a_next;
            let idx = k * n_out + n;
            run.spikes[idx] = emit;
            run.pre_reset[idx] = mixed;
            run.adapt[idx] = a_next;
        }
    }
    Ok(run)
}
