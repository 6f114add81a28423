//! Adam with bias correction and a cosine learning-rate schedule.
//!
//! Constrained quantities never appear here: the optimizer only ever sees
//! the flat unconstrained coordinates, so no update can leave a feasible
//! region. A boolean mask freezes the coordinates a variant declares
//! non-learnable (their moments stay at zero).

use super::params::ParamBlock;

/// Optimizer state; moments are laid out in [`ParamBlock::flatten`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    m: Vec<f64>,
    v: Vec<f64>,
    /// Completed optimizer steps.
    pub step: usize,
    pub base_lr: f64,
    /// Total planned steps; the cosine reaches zero here.
    pub horizon: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    mask: Vec<bool>,
}

impl OptimState {
    /// `mask[i] = false` freezes flat coordinate `i`.
    pub fn new(len: usize, base_lr: f64, horizon: usize, mask: Vec<bool>) -> Self {
        assert_eq!(mask.len(), len, "mask length must match parameter count");
        assert!(horizon >= 1, "schedule horizon must be at least one step");
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
            base_lr,
            horizon,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            mask,
        }
    }
}

/// Cosine annealing: `base/2 * (1 + cos(pi * step / horizon))`, clamped at
/// the horizon so late steps keep a zero rate. The first step (step 0)
/// runs at the full base rate; the step starting exactly at the horizon
/// runs at zero.
pub fn cosine_lr(base: f64, step: usize, horizon: usize) -> f64 {
    let frac = step.min(horizon) as f64 / horizon as f64;
    base * 0.5 * (1.0 + (std::f64::consts::PI * frac).cos())
}

/// One Adam update in place. The learning rate is read from the schedule
/// *before* the step counter advances; bias correction uses the advanced
/// counter, matching the standard recursion where the first step is t = 1.
pub fn optimizer_step(opt: &mut OptimState, params: &mut ParamBlock, gradients: &ParamBlock) {
    let lr = cosine_lr(opt.base_lr, opt.step, opt.horizon);
    opt.step += 1;
    let t = opt.step as i32;
    let bc1 = 1.0 - opt.beta1.powi(t);
    let bc2 = 1.0 - opt.beta2.powi(t);

    let g = gradients.flatten();
    let mut p = params.flatten();
    debug_assert_eq!(g.len(), opt.m.len());
    debug_assert_eq!(p.len(), opt.m.len());
    for i in 0..p.len() {
        if !opt.mask[i] {
            continue;
        }
        opt.m[i] = opt.beta1 * opt.m[i] + (1.0 - opt.beta1) * g[i];
        opt.v[i] = opt.beta2 * opt.v[i] + (1.0 - opt.beta2) * g[i] * g[i];
        let m_hat = opt.m[i] / bc1;
        let v_hat = opt.v[i] / bc2;
        p[i] -= lr * m_hat / (v_hat.sqrt() + opt.eps);
    }
    params.assign_from_flat(&p);
}
