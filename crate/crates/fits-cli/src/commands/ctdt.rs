//! `fits ctdt` — continuous- vs discrete-time target-frequency fidelity
//! over a log-spaced grid of requested targets.
//!
//! For each requested `f*` the coupling is inverted in continuous time,
//! the discrete response is built at the configured step, and two
//! realized targets are compared against the sweep oracle: the
//! closed-form stationary candidate and the requested target itself.
//!
//! Config keys: `tau_m`, `tau_a`, `dt`, `f_min_hz`, `f_max_hz`, `grid`
//! (required); `resolution_hz` (optional, default 1e-4).
//! Artifacts: `summary.json`, `grid.csv`.

use fits_core::freq::{ct_dt_comparison, log_grid};
use fits_core::{Error, Result};
use serde::Deserialize;
use serde_json::{Map, Value};

use crate::config::{self, csv_opt, Ctx, Keys};

const KEYS: Keys = Keys {
    required: &["tau_m", "tau_a", "dt", "f_min_hz", "f_max_hz", "grid"],
    optional: &["resolution_hz"],
};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Cfg {
    tau_m: f64,
    tau_a: f64,
    dt: f64,
    f_min_hz: f64,
    f_max_hz: f64,
    grid: usize,
    resolution_hz: Option<f64>,
}

pub fn run(ctx: &Ctx) -> Result<()> {
    let mut problems = Vec::new();
    config::check_keys(&ctx.config, "$", &KEYS, &mut problems);
    config::finish(problems)?;
    let c: Cfg = config::parse(&ctx.config, "ctdt")?;
    let resolution = c.resolution_hz.unwrap_or(1e-4);

    let mut problems = Vec::new();
    if c.grid < 2 {
        problems.push(format!("grid must have at least 2 points, got {}", c.grid));
    }
    if !(c.f_min_hz > 0.0 && c.f_min_hz.is_finite()) {
        problems.push(format!("f_min_hz must be positive, got {}", c.f_min_hz));
    }
    if !(c.f_max_hz > c.f_min_hz && c.f_max_hz.is_finite()) {
        problems.push(format!(
            "f_max_hz must exceed f_min_hz = {}, got {}",
            c.f_min_hz, c.f_max_hz
        ));
    }
    if !problems.is_empty() {
        return Err(Error::Config(problems.join("; ")));
    }

    let grid = log_grid(c.f_min_hz, c.f_max_hz, c.grid);
    let rows = ct_dt_comparison(c.tau_m, c.tau_a, c.dt, &grid, resolution)?;

    let mut csv = String::from("f_ct_hz,f_hat_dt_hz,f_dt_hz,low_pass\n");
    let mut closed_err = Vec::new();
    let mut ct_err = Vec::new();
    let mut low_pass_rows = 0usize;
    for row in &rows {
        let low_pass = row.f_dt_hz.is_none();
        low_pass_rows += low_pass as usize;
        csv.push_str(&format!(
            "{},{},{},{}\n",
            row.f_ct_hz,
            csv_opt(row.f_hat_dt_hz),
            csv_opt(row.f_dt_hz),
            low_pass
        ));
        if let (Some(hat), Some(dt)) = (row.f_hat_dt_hz, row.f_dt_hz) {
            closed_err.push((hat - dt).abs());
            ct_err.push((row.f_ct_hz - dt).abs());
        }
    }
    ctx.out.write("grid.csv", &csv)?;

    let stats = |errs: &[f64]| -> (f64, f64) {
        if errs.is_empty() {
            return (0.0, 0.0);
        }
        let mae = errs.iter().sum::<f64>() / errs.len() as f64;
        let max = errs.iter().cloned().fold(0.0, f64::max);
        (mae, max)
    };
    let (closed_mae, closed_max) = stats(&closed_err);
    let (ct_mae, ct_max) = stats(&ct_err);

    let mut body = Map::new();
    body.insert("tau_m".to_string(), Value::from(c.tau_m));
    body.insert("tau_a".to_string(), Value::from(c.tau_a));
    body.insert("dt".to_string(), Value::from(c.dt));
    body.insert("grid".to_string(), Value::from(c.grid));
    body.insert("resolution_hz".to_string(), Value::from(resolution));
    body.insert("low_pass_rows".to_string(), Value::from(low_pass_rows));
    body.insert("closed_vs_sweep_mae_hz".to_string(), Value::from(closed_mae));
    body.insert("closed_vs_sweep_max_hz".to_string(), Value::from(closed_max));
    body.insert("ct_vs_sweep_mae_hz".to_string(), Value::from(ct_mae));
    body.insert("ct_vs_sweep_max_hz".to_string(), Value::from(ct_max));
    config::write_summary(&ctx.out, "ctdt", None, body)
}
