//! `fits analyze` — discrete-time transfer-function curves and realized
//! target frequencies, for one inline neuron or for every hidden neuron
//! of a checkpoint.
//!
//! Config shape: exactly one of
//! `neuron` — `{tau_m, tau_a, dt, f_star_hz, betas?, lambdas?}`
//! (constrained cascade values; both lists or neither), or
//! `checkpoint` — path to a trained model;
//! plus optional `n_omega` (default 512) and `resolution_hz`
//! (default 1e-4) for the sweep oracle.
//!
//! Artifacts: `magnitude.csv` (`mag_fs` is the band-pass core alone,
//! `mag_total` includes the cascade mixture), `delay.csv` (group delays
//! in samples and the shift contributed by the cascade), `targets.csv`
//! (continuous-time target, closed-form discrete target, sweep-oracle
//! discrete target, low-pass flag), `summary.json`.
//!
//! Unstable parameters are rejected with the violated Jury margin named.

use fits_core::freq::{
    ct_target_frequency, dt_stationary_candidates, dt_transfer, group_delay_numeric,
    kappa_from_target, omega_grid, realized_dt_target_sweep, ts_chain_response, CtResponse,
    DtResponse,
};
use fits_core::neuron::{FsParams, TsParams};
use fits_core::train::Network;
use fits_core::{Error, Result};
use serde::Deserialize;
use serde_json::{Map, Value};

use crate::commands::checkpoint_from;
use crate::config::{self, csv_opt, Ctx, Keys};

const KEYS: Keys =
    Keys { required: &[], optional: &["neuron", "checkpoint", "n_omega", "resolution_hz"] };

const NEURON_KEYS: Keys = Keys {
    required: &["tau_m", "tau_a", "dt", "f_star_hz"],
    optional: &["betas", "lambdas"],
};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NeuronCfg {
    tau_m: f64,
    tau_a: f64,
    dt: f64,
    f_star_hz: f64,
    betas: Option<Vec<f64>>,
    lambdas: Option<Vec<f64>>,
}

struct Row {
    layer: usize,
    neuron: usize,
    fs: FsParams,
    ts: TsParams,
}

fn inline_rows(v: &Value) -> Result<Vec<Row>> {
    let c: NeuronCfg = config::parse(v, "neuron")?;
    if !(c.f_star_hz.is_finite() && c.f_star_hz > 0.0) {
        return Err(Error::Config(format!(
            "neuron.f_star_hz must be positive, got {}",
            c.f_star_hz
        )));
    }
    let omega = 2.0 * std::f64::consts::PI * c.f_star_hz;
    let kappa = kappa_from_target(1.0 / c.tau_m, 1.0 / c.tau_a, omega)?;
    // Deliberately unvalidated: requests past the stability limit must
    // reach the discrete-response constructor so the offending Jury
    // margin is named, rather than dying on the coupling bound here.
    let g = kappa.sqrt();
    let fs = FsParams::new_unchecked(c.tau_m, c.tau_a, c.dt, g, g);
    let ts = match (c.betas, c.lambdas) {
        (None, None) => TsParams::init(0),
        (Some(b), Some(l)) => TsParams::from_constrained(&b, &l)?,
        _ => {
            return Err(Error::Config(
                "neuron.betas and neuron.lambdas must be given together".to_string(),
            ))
        }
    };
    Ok(vec![Row { layer: 0, neuron: 0, fs, ts }])
}

fn checkpoint_rows(config: &Value) -> Result<Vec<Row>> {
    let ck = checkpoint_from(config, "checkpoint")?;
    let net = Network::build(&ck.network, &ck.params.block)?;
    let mut rows = Vec::new();
    for (l, layer) in net.layers().iter().enumerate() {
        for n in 0..layer.n_out() {
            rows.push(Row { layer: l, neuron: n, fs: layer.fs()[n], ts: layer.ts()[n].clone() });
        }
    }
    Ok(rows)
}

pub fn run(ctx: &Ctx) -> Result<()> {
    let mut problems = Vec::new();
    if let Some(obj) = config::check_keys(&ctx.config, "$", &KEYS, &mut problems) {
        match (obj.contains_key("neuron"), obj.contains_key("checkpoint")) {
            (true, true) => problems
                .push("give either $.neuron or $.checkpoint, not both".to_string()),
            (false, false) => {
                problems.push("one of $.neuron or $.checkpoint is required".to_string())
            }
            _ => {}
        }
        if let Some(neuron) = obj.get("neuron") {
            config::check_keys(neuron, "$.neuron", &NEURON_KEYS, &mut problems);
        }
    }
    config::finish(problems)?;

    let n_omega = match ctx.config.get("n_omega") {
        Some(v) => config::parse::<usize>(v, "n_omega")?,
        None => 512,
    };
    if n_omega < 3 {
        return Err(Error::Config(format!("n_omega must be at least 3, got {n_omega}")));
    }
    let resolution = match ctx.config.get("resolution_hz") {
        Some(v) => config::parse::<f64>(v, "resolution_hz")?,
        None => 1e-4,
    };
    let (rows, source) = if ctx.config.get("neuron").is_some() {
        (inline_rows(&ctx.config["neuron"])?, "inline")
    } else {
        (checkpoint_rows(&ctx.config)?, "checkpoint")
    };

    let grid = omega_grid(n_omega);
    let mut magnitude = String::from("layer,neuron,omega,mag_fs,mag_total\n");
    let mut delay = String::from("layer,neuron,omega,delay_fs,delay_total,delay_shift\n");
    let mut targets = String::from("layer,neuron,f_ct_hz,f_hat_dt_hz,f_dt_hz,low_pass\n");
    let mut max_closed_vs_sweep: f64 = 0.0;

    for row in &rows {
        let d = DtResponse::from_fs(&row.fs)?;
        for &w in &grid {
            let core = dt_transfer(&d, w)?;
            let total = core * ts_chain_response(&row.ts, w)?;
            magnitude.push_str(&format!(
                "{},{},{w},{},{}\n",
                row.layer,
                row.neuron,
                core.norm(),
                total.norm()
            ));
        }
        let fs_delay = group_delay_numeric(|w| dt_transfer(&d, w), &grid)?;
        let total_delay = group_delay_numeric(
            |w| Ok(dt_transfer(&d, w)? * ts_chain_response(&row.ts, w)?),
            &grid,
        )?;
        for ((w, d_fs), d_total) in grid.iter().zip(&fs_delay.delay).zip(&total_delay.delay) {
            let shift = d_total - d_fs;
            delay.push_str(&format!(
                "{},{},{w},{d_fs},{d_total},{shift}\n",
                row.layer, row.neuron
            ));
        }

        let ct = CtResponse::new(row.fs.mu(), row.fs.rho(), row.fs.kappa())?;
        let two_pi = 2.0 * std::f64::consts::PI;
        let f_ct = ct_target_frequency(&ct).map(|w| w / two_pi);
        let f_hat = dt_stationary_candidates(&d)?.realized.map(|w| w / (two_pi * d.dt));
        let sweep = realized_dt_target_sweep(&d, resolution)?;
        let f_dt = (!sweep.low_pass).then_some(sweep.f_hz);
        targets.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.layer,
            row.neuron,
            csv_opt(f_ct),
            csv_opt(f_hat),
            csv_opt(f_dt),
            sweep.low_pass
        ));
        if let (Some(hat), Some(dt)) = (f_hat, f_dt) {
            max_closed_vs_sweep = max_closed_vs_sweep.max((hat - dt).abs());
        }
    }

    ctx.out.write("magnitude.csv", &magnitude)?;
    ctx.out.write("delay.csv", &delay)?;
    ctx.out.write("targets.csv", &targets)?;

    let mut body = Map::new();
    body.insert("source".to_string(), Value::from(source));
    body.insert("neurons".to_string(), Value::from(rows.len()));
    body.insert("n_omega".to_string(), Value::from(n_omega));
    body.insert("resolution_hz".to_string(), Value::from(resolution));
    body.insert(
        "max_closed_vs_sweep_hz".to_string(),
        Value::from(max_closed_vs_sweep),
    );
    config::write_summary(&ctx.out, "analyze", None, body)
}
