//! Continuous- and discrete-time transfer-function analysis.
//!
//! The subthreshold voltage dynamics form a second-order linear system
//! whose magnitude response peaks at a *target frequency* determined by
//! the coupling product `kappa`. This module provides:
//!
//! * the continuous-time magnitude response, the closed-form forward map
//!   `kappa -> Omega*` and its inverse, and the pole comparison showing
//!   that selectivity is a response property, not a pole property;
//! * the discrete-time response of the semi-implicit update, closed-form
//!   stationary candidates for its realized peak, and a brute-force sweep
//!   oracle against which the closed forms are validated;
//! * first-order all-pass stages, cascades, and the recursive mixing
//!   chain, including exact group-delay expressions and the condition
//!   under which a mixed stage produces *negative* group delay;
//! * numeric group delay via phase unwrapping for any response evaluator.

use num_complex::Complex64;

use crate::error::Error;
use crate::neuron::{FsParams, TsParams};
use crate::parallel;
use crate::Result;

/// Denominator magnitude below which a discrete-time transfer evaluation
/// is considered to sit on a pole.
const NEAR_POLE_THRESHOLD: f64 = 1e-14;

/// Denominator magnitude below which the mixed-stage group delay is
/// degenerate (direct and all-pass pathways cancel exactly).
const SINGULAR_MIXTURE_THRESHOLD: f64 = 1e-14;

/// Continuous-time subthreshold response parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtResponse {
    /// Leak rate (1/s).
    pub mu: f64,
    /// Adaptation rate (1/s).
    pub rho: f64,
    /// Coupling product (1/s^2).
    pub kappa: f64,
}

impl CtResponse {
    pub fn new(mu: f64, rho: f64, kappa: f64) -> Result<Self> {
        if !(mu.is_finite() && mu > 0.0 && rho.is_finite() && rho > 0.0) {
            return Err(Error::Config(format!(
                "rates must be positive and finite, got mu={mu}, rho={rho}"
            )));
        }
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(Error::Config(format!("kappa must be nonnegative and finite, got {kappa}")));
        }
        Ok(Self { mu, rho, kappa })
    }

    pub fn from_fs(p: &FsParams) -> Result<Self> {
        Self::new(p.mu(), p.rho(), p.kappa())
    }
}

/// Squared magnitude of the continuous-time response at angular frequency
/// `omega` (rad/s):
/// `(rho^2 + w^2) / ((mu rho + kappa - w^2)^2 + (mu + rho)^2 w^2)`.
pub fn ct_magnitude_sq(r: &CtResponse, omega: f64) -> f64 {
    let w2 = omega * omega;
    let num = r.rho * r.rho + w2;
    let d1 = r.mu * r.rho + r.kappa - w2;
    let s = r.mu + r.rho;
    num / (d1 * d1 + s * s * w2)
}

/// Closed-form target frequency: the unique positive maximizer of the
/// magnitude response, `Omega* = sqrt(sqrt(kappa (2 rho^2 + 2 rho mu +
/// kappa)) - rho^2)`, when the inner square root exceeds `rho^2`; `None`
/// when the response is low-pass (maximized at zero).
pub fn ct_target_frequency(r: &CtResponse) -> Option<f64> {
    let b = r.rho * (r.rho + r.mu);
    let q = r.kappa * (2.0 * b + r.kappa);
    let rho2 = r.rho * r.rho;
    let rho4 = rho2 * rho2;
    if q <= rho4 {
        return None;
    }
    // x* = sqrt(q) - rho^2, evaluated without subtractive cancellation.
    let x_star = (q - rho4) / (q.sqrt() + rho2);
    Some(x_star.sqrt())
}

/// Inverse of the forward map: the coupling product whose response peaks
/// at `omega_star` (> 0). Evaluated from the stationarity quadratic
/// `kappa^2 + 2 b kappa - c^2 = 0` (`b = rho (rho + mu)`,
/// `c = omega*^2 + rho^2`) in the cancellation-free form
/// `kappa* = c^2 / (b + hypot(b, c))`, which stays accurate for
/// arbitrarily large `omega*/rho`.
pub fn kappa_from_target(mu: f64, rho: f64, omega_star: f64) -> Result<f64> {
    if !(omega_star.is_finite() && omega_star > 0.0) {
        return Err(Error::Domain(format!(
            "target frequency must be positive and finite, got {omega_star}"
        )));
    }
    let b = rho * (rho + mu);
    let c = omega_star * omega_star + rho * rho;
    Ok((c / (b + b.hypot(c))) * c)
}

/// Pole classification of the continuous-time response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoleAnalysis {
    /// True when the pole pair is complex: `4 (mu rho + kappa) > (mu + rho)^2`.
    pub complex: bool,
    /// Imaginary-part magnitude of the complex pair, when present.
    pub omega_pole: Option<f64>,
}

/// Classifies the pole pair. Selectivity can exist with real poles — the
/// target frequency is a property of the full response, not of the poles.
pub fn pole_analysis(r: &CtResponse) -> PoleAnalysis {
    let lhs = 4.0 * (r.mu * r.rho + r.kappa);
    let s = r.mu + r.rho;
    let rhs = s * s;
    if lhs > rhs {
        PoleAnalysis { complex: true, omega_pole: Some(0.5 * (lhs - rhs).sqrt()) }
    } else {
        PoleAnalysis { complex: false, omega_pole: None }
    }
}

/// Discrete-time response coefficients of the semi-implicit update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DtResponse {
    /// Discrete voltage decay, in (0,1).
    pub mu_bar: f64,
    /// Discrete adaptation decay, in (0,1).
    pub rho_bar: f64,
    /// Discrete coupling product, >= 0.
    pub kappa_bar: f64,
    /// Step size (seconds), for converting rad/sample to Hz.
    pub dt: f64,
}

impl DtResponse {
    /// Validated constructor; rejects coefficients outside the Jury-stable
    /// region, naming the violated margin.
    pub fn new(mu_bar: f64, rho_bar: f64, kappa_bar: f64, dt: f64) -> Result<Self> {
        let mut problems = Vec::new();
        if !(mu_bar > 0.0 && mu_bar < 1.0) {
            problems.push(format!("mu_bar must lie in (0,1), got {mu_bar}"));
        }
        if !(rho_bar > 0.0 && rho_bar < 1.0) {
            problems.push(format!("rho_bar must lie in (0,1), got {rho_bar}"));
        }
        if !(kappa_bar.is_finite() && kappa_bar >= 0.0) {
            problems.push(format!("kappa_bar must be nonnegative, got {kappa_bar}"));
        }
        if !(dt.is_finite() && dt > 0.0) {
            problems.push(format!("dt must be positive, got {dt}"));
        }
        if problems.is_empty() {
            // Characteristic polynomial z^2 - T z + D of the semi-implicit
            // state matrix, in terms of the discrete coefficients.
            let t = mu_bar + rho_bar - kappa_bar;
            let d = mu_bar * rho_bar;
            let margins = [("1 - T + D", 1.0 - t + d), ("1 + T + D", 1.0 + t + d), ("1 - D", 1.0 - d)];
            for (name, margin) in margins {
                if margin <= 0.0 {
                    problems.push(format!("unstable parameters: violated Jury margin {name} = {margin}"));
                }
            }
        }
        if problems.is_empty() {
            Ok(Self { mu_bar, rho_bar, kappa_bar, dt })
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    pub fn from_fs(p: &FsParams) -> Result<Self> {
        Self::new(p.mu_bar(), p.rho_bar(), p.kappa_bar(), p.dt)
    }
}

/// Discrete-time transfer function on the unit circle:
/// `H_d(e^{jw}) = (z - rho_bar) / ((z - mu_bar)(z - rho_bar) + kappa_bar z)`.
pub fn dt_transfer(d: &DtResponse, omega: f64) -> Result<Complex64> {
    let z = Complex64::from_polar(1.0, omega);
    let num = z - d.rho_bar;
    let den = (z - d.mu_bar) * (z - d.rho_bar) + d.kappa_bar * z;
    let den_mag = den.norm();
    if den_mag < NEAR_POLE_THRESHOLD {
        return Err(Error::NearPole { omega, denom: den_mag });
    }
    Ok(num / den)
}

/// Squared magnitude of the discrete-time response as a rational function
/// of `x = cos(omega)` — the closed form used for stationary analysis,
/// independent of the complex evaluation in [`dt_transfer`].
pub fn dt_magnitude_sq_cos(d: &DtResponse, x: f64) -> f64 {
    let p = d.mu_bar + d.rho_bar - d.kappa_bar;
    let q = d.mu_bar * d.rho_bar;
    let num = 1.0 + d.rho_bar * d.rho_bar - 2.0 * d.rho_bar * x;
    let den = p * p + (1.0 - q) * (1.0 - q) - 2.0 * p * (1.0 + q) * x + 4.0 * q * x * x;
    num / den
}

/// Closed-form stationary candidates of the discrete-time magnitude
/// response and the realized target selected among them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryCandidates {
    /// Candidate `cos(omega)` values, `x_minus <= x_plus`.
    pub x_plus: f64,
    pub x_minus: f64,
    /// Corresponding angles, present iff the candidate lies strictly
    /// inside (-1, 1).
    pub omega_plus: Option<f64>,
    pub omega_minus: Option<f64>,
    /// Realized target `omega*` (rad/sample): the interior candidate at
    /// which the magnitude attains its maximum, or `None` when the
    /// maximum sits at an endpoint (low-pass or Nyquist-dominated).
    pub realized: Option<f64>,
}

/// Computes the stationary candidates
/// `x_pm = [1 + rho_bar^2 pm sqrt((kappa_bar/mu_bar)((1 - rho_bar^2)(1 -
/// mu_bar rho_bar) + kappa_bar rho_bar))] / (2 rho_bar)` and selects the
/// realized target by direct comparison of the magnitude at the interior
/// candidates and at both endpoints `x = +/-1`.
pub fn dt_stationary_candidates(d: &DtResponse) -> Result<StationaryCandidates> {
    let (mb, rb, kb) = (d.mu_bar, d.rho_bar, d.kappa_bar);
    let disc = (kb / mb) * ((1.0 - rb * rb) * (1.0 - mb * rb) + kb * rb);
    if disc < 0.0 {
        return Err(Error::Internal(format!(
            "stationary-candidate discriminant is negative ({disc}) for stable coefficients"
        )));
    }
    let s = disc.sqrt();
    let x_plus = (1.0 + rb * rb + s) / (2.0 * rb);
    let x_minus = (1.0 + rb * rb - s) / (2.0 * rb);

    let interior = |x: f64| x > -1.0 && x < 1.0;
    let omega_plus = interior(x_plus).then(|| x_plus.acos());
    let omega_minus = interior(x_minus).then(|| x_minus.acos());

    let edge_max = dt_magnitude_sq_cos(d, 1.0).max(dt_magnitude_sq_cos(d, -1.0));
    let mut realized = None;
    let mut best = edge_max;
    for x in [x_minus, x_plus] {
        if interior(x) {
            let m = dt_magnitude_sq_cos(d, x);
            if m > best {
                best = m;
                realized = Some(x.acos());
            }
        }
    }
    Ok(StationaryCandidates { x_plus, x_minus, omega_plus, omega_minus, realized })
}

/// A realized target frequency in Hz, with a flag for the degenerate
/// low-pass case (peak at zero).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetFrequency {
    /// Peak frequency in Hz (0 when low-pass).
    pub f_hz: f64,
    /// True when the maximum sits at zero frequency.
    pub low_pass: bool,
}

/// Brute-force argmax of `|H_d(e^{jw})|` over a uniform grid on `[0, pi]`
/// with golden-section refinement around the grid argmax. This is the
/// oracle the closed-form candidates are validated against; it evaluates
/// the complex transfer function directly and shares no algebra with
/// [`dt_stationary_candidates`]. Returns the peak as Hz via
/// `f = omega / (2 pi dt)`.
pub fn realized_dt_target_sweep(d: &DtResponse, resolution_hz: f64) -> Result<TargetFrequency> {
    if !(resolution_hz.is_finite() && resolution_hz > 0.0) {
        return Err(Error::Config(format!("sweep resolution must be positive, got {resolution_hz}")));
    }
    let omega_per_hz = 2.0 * std::f64::consts::PI * d.dt;
    // Grid spacing of a few resolution steps is enough to bracket the peak
    // basin; golden-section refinement then localizes far below resolution.
    let spacing = (resolution_hz * omega_per_hz * 8.0).max(1e-12);
    let n = ((std::f64::consts::PI / spacing).ceil() as usize).clamp(4096, 2_000_000);
    let h = std::f64::consts::PI / n as f64;

    let mag_sq = |omega: f64| -> Result<f64> { Ok(dt_transfer(d, omega)?.norm_sqr()) };

    let mut best_i = 0;
    let mut best = f64::NEG_INFINITY;
    for i in 0..=n {
        let m = mag_sq(i as f64 * h)?;
        if m > best {
            best = m;
            best_i = i;
        }
    }
    if best_i == 0 {
        return Ok(TargetFrequency { f_hz: 0.0, low_pass: true });
    }

    // Golden-section search on the bracketing interval.
    let mut a = (best_i.saturating_sub(1)) as f64 * h;
    let mut b = ((best_i + 1).min(n)) as f64 * h;
    let inv_phi = 0.618_033_988_749_894_9;
    let tol = (resolution_hz * omega_per_hz * 1e-2).max(1e-15);
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = mag_sq(x1)?;
    let mut f2 = mag_sq(x2)?;
    while b - a > tol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = mag_sq(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = mag_sq(x1)?;
        }
    }
    let omega_star = 0.5 * (a + b);
    Ok(TargetFrequency { f_hz: omega_star / omega_per_hz, low_pass: false })
}

/// One first-order all-pass stage evaluated on the unit circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllpassStage {
    /// `A(e^{jw}) = (e^{-jw} - beta) / (1 - beta e^{-jw})`, unit magnitude.
    pub value: Complex64,
    /// Principal-value phase (radians).
    pub phase: f64,
    /// Analytic group delay `(1 - beta^2) / (1 + beta^2 - 2 beta cos w)`
    /// in samples, strictly positive for `|beta| < 1`.
    pub delay: f64,
}

/// Evaluates one all-pass stage. `|beta| >= 1` is outside the stable
/// parameter domain.
pub fn allpass_stage(beta: f64, omega: f64) -> Result<AllpassStage> {
    if !(beta.is_finite() && beta.abs() < 1.0) {
        return Err(Error::Domain(format!("all-pass coefficient must satisfy |beta| < 1, got {beta}")));
    }
    let zi = Complex64::from_polar(1.0, -omega);
    let value = (zi - beta) / (1.0 - beta * zi);
    let delay = (1.0 - beta * beta) / (1.0 + beta * beta - 2.0 * beta * omega.cos());
    Ok(AllpassStage { value, phase: value.arg(), delay })
}

/// Frequency response of a cascade of all-pass stages (product of stage
/// responses; still unit magnitude).
pub fn cascade_response(betas: &[f64], omega: f64) -> Result<Complex64> {
    let mut acc = Complex64::new(1.0, 0.0);
    for &b in betas {
        acc *= allpass_stage(b, omega)?.value;
    }
    Ok(acc)
}

/// Group delay of an all-pass cascade: the sum of stage delays.
pub fn cascade_group_delay(betas: &[f64], omega: f64) -> Result<f64> {
    let mut acc = 0.0;
    for &b in betas {
        acc += allpass_stage(b, omega)?.delay;
    }
    Ok(acc)
}

/// Group delay of a single mixed stage and the closed-form predicate for
/// its sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedStageDelay {
    /// Group delay of `(1 - lambda) + lambda A(e^{jw})` in samples.
    pub delay: f64,
    /// True iff the closed-form negativity condition holds:
    /// `lambda < 1/2` and `cos phi_A < -lambda / (1 - lambda)`.
    pub negative_region: bool,
}

/// Closed-form group delay of one lambda-mixed all-pass stage:
/// `tau(w) = lambda (lambda + (1-lambda) cos phi_A) / (lambda^2 +
/// (1-lambda)^2 + 2 lambda (1-lambda) cos phi_A) * tau_A(w)`.
///
/// Unlike a pure cascade this can be *negative*: mixing a unit-delay
/// pathway with the direct pathway can advance the phase locally.
pub fn mixed_single_stage(lambda1: f64, beta1: f64, omega: f64) -> Result<MixedStageDelay> {
    if !(lambda1.is_finite() && lambda1 > 0.0 && lambda1 < 1.0) {
        return Err(Error::Domain(format!("mixing weight must lie in (0,1), got {lambda1}")));
    }
    let stage = allpass_stage(beta1, omega)?;
    // |A| = 1, so cos(phi_A) is just the real part.
    let c = stage.value.re;
    let l = lambda1;
    let num = l * (l + (1.0 - l) * c);
    let den = l * l + (1.0 - l) * (1.0 - l) + 2.0 * l * (1.0 - l) * c;
    if den.abs() < SINGULAR_MIXTURE_THRESHOLD {
        return Err(Error::SingularMixture { denom: den.abs() });
    }
    let negative_region = l < 0.5 && c < -l / (1.0 - l);
    Ok(MixedStageDelay { delay: num / den * stage.delay, negative_region })
}

/// Frequency response of the full mixing chain:
/// `G_0 = 1`, `G_m = (1 - lambda_m) G_{m-1} + lambda_m prod_{i<=m} A_i`.
/// A convex mixture of unit-magnitude responses, so `|G_M| <= 1`.
pub fn ts_chain_response(ts: &TsParams, omega: f64) -> Result<Complex64> {
    let mut g = Complex64::new(1.0, 0.0);
    let mut cascade = Complex64::new(1.0, 0.0);
    for m in 0..ts.order() {
        cascade *= allpass_stage(ts.betas()[m], omega)?.value;
        let l = ts.lambdas()[m];
        g = (1.0 - l) * g + l * cascade;
    }
    Ok(g)
}

/// Numerically differentiated group delay over a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupDelayCurve {
    /// Angular frequencies (rad/sample), strictly ascending in (0, pi).
    pub omega: Vec<f64>,
    /// Unwrapped phase (radians).
    pub phase: Vec<f64>,
    /// Group delay (samples): central differences inside, one-sided at
    /// the ends.
    pub delay: Vec<f64>,
}

/// Evaluates `response` on the grid, unwraps the phase (jumps larger than
/// pi are corrected by whole turns), and differentiates numerically.
///
/// An adjacent-sample phase difference within 1e-6 of a half turn is
/// ambiguous — the unwrap cannot tell +pi from -pi — and produces a
/// refine-grid error rather than a silent guess.
pub fn group_delay_numeric<F>(mut response: F, omega_grid: &[f64]) -> Result<GroupDelayCurve>
where
    F: FnMut(f64) -> Result<Complex64>,
{
    let n = omega_grid.len();
    if n < 3 {
        return Err(Error::Config(format!("group-delay grid needs at least 3 points, got {n}")));
    }
    let h = omega_grid[1] - omega_grid[0];
    if h.is_nan() || h <= 0.0 {
        return Err(Error::Config("group-delay grid must be strictly ascending".into()));
    }
    for i in 1..n {
        let hi = omega_grid[i] - omega_grid[i - 1];
        if (hi - h).abs() > 1e-9 * h {
            return Err(Error::Config("group-delay grid must be uniform".into()));
        }
    }
    if omega_grid[0] <= 0.0 || omega_grid[n - 1] >= std::f64::consts::PI {
        return Err(Error::Config("group-delay grid must lie strictly inside (0, pi)".into()));
    }

    let tau = std::f64::consts::TAU;
    let mut phase = Vec::with_capacity(n);
    let mut prev_raw = 0.0;
    for (i, &w) in omega_grid.iter().enumerate() {
        let raw = response(w)?.arg();
        if i == 0 {
            phase.push(raw);
        } else {
            let mut delta = raw - prev_raw;
            delta -= tau * (delta / tau).round();
            if (delta.abs() - std::f64::consts::PI).abs() < 1e-6 {
                return Err(Error::RefineGrid { omega: w });
            }
            phase.push(phase[i - 1] + delta);
        }
        prev_raw = raw;
    }

    let mut delay = vec![0.0; n];
    delay[0] = -(phase[1] - phase[0]) / h;
    delay[n - 1] = -(phase[n - 1] - phase[n - 2]) / h;
    for i in 1..n - 1 {
        delay[i] = -(phase[i + 1] - phase[i - 1]) / (2.0 * h);
    }
    Ok(GroupDelayCurve { omega: omega_grid.to_vec(), phase, delay })
}

/// Uniform grid of `n` points strictly inside (0, pi):
/// `omega_i = (i+1) pi / (n+1)`.
pub fn omega_grid(n: usize) -> Vec<f64> {
    let step = std::f64::consts::PI / (n + 1) as f64;
    (0..n).map(|i| (i + 1) as f64 * step).collect()
}

/// Log-spaced grid: point `i` of `n` is `lo * (hi/lo)^(i/(n-1))`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "log grid needs at least 2 points");
    let ratio = hi / lo;
    (0..n).map(|i| lo * ratio.powf(i as f64 / (n - 1) as f64)).collect()
}

/// One row of the continuous-vs-discrete target comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtDtRow {
    /// Requested continuous-time target (Hz).
    pub f_ct_hz: f64,
    /// Closed-form estimate of the realized discrete-time target (Hz).
    pub f_hat_dt_hz: Option<f64>,
    /// Sweep-oracle realized discrete-time target (Hz); `None` if low-pass.
    pub f_dt_hz: Option<f64>,
}

fn ct_dt_row(tau_m: f64, tau_a: f64, dt: f64, f_ct_hz: f64, resolution_hz: f64) -> Result<CtDtRow> {
    let omega_star = 2.0 * std::f64::consts::PI * f_ct_hz;
    let mu = 1.0 / tau_m;
    let rho = 1.0 / tau_a;
    let kappa = kappa_from_target(mu, rho, omega_star)?;
    let p = FsParams::with_kappa(tau_m, tau_a, dt, kappa)?;
    let d = DtResponse::from_fs(&p)?;
    let cands = dt_stationary_candidates(&d)?;
    let f_hat = cands.realized.map(|w| w / (2.0 * std::f64::consts::PI * dt));
    let sweep = realized_dt_target_sweep(&d, resolution_hz)?;
    let f_dt = if sweep.low_pass { None } else { Some(sweep.f_hz) };
    Ok(CtDtRow { f_ct_hz, f_hat_dt_hz: f_hat, f_dt_hz: f_dt })
}

/// Full continuous-vs-discrete comparison over a frequency grid: for each
/// requested target, invert to `kappa`, build the discrete response, and
/// report the closed-form and sweep-oracle realized targets. Rows are
/// computed in parallel (order-preserving).
pub fn ct_dt_comparison(
    tau_m: f64,
    tau_a: f64,
    dt: f64,
    f_grid_hz: &[f64],
    resolution_hz: f64,
) -> Result<Vec<CtDtRow>> {
    parallel::ordered_map(f_grid_hz, |&f| ct_dt_row(tau_m, tau_a, dt, f, resolution_hz))
        .into_iter()
        .collect()
}

/// Sequential twin of [`ct_dt_comparison`] for path comparisons.
pub fn ct_dt_comparison_seq(
    tau_m: f64,
    tau_a: f64,
    dt: f64,
    f_grid_hz: &[f64],
    resolution_hz: f64,
) -> Result<Vec<CtDtRow>> {
    parallel::ordered_map_seq(f_grid_hz, |&f| ct_dt_row(tau_m, tau_a, dt, f, resolution_hz))
        .into_iter()
        .collect()
}
