//! `fits stability` — closed-form coupling bounds, the maximum stable
//! target frequency of each discretization scheme, and a Jury-margin
//! sweep across the coupling axis.
//!
//! Config keys: `tau_m`, `tau_a`, `dt` (all required, seconds).
//! Artifacts: `summary.json`, `margins.csv` (per scheme, 49 coupling
//! points from 0 to 1.2x that scheme's bound).

use fits_core::neuron::FsParams;
use fits_core::stability::{
    build_state_matrix, jury_assess, kappa_stability_bounds, max_stable_target_frequency, Scheme,
};
use fits_core::Result;
use serde::Deserialize;
use serde_json::{Map, Value};

use crate::config::{self, Ctx, Keys};

const KEYS: Keys = Keys { required: &["tau_m", "tau_a", "dt"], optional: &[] };

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Cfg {
    tau_m: f64,
    tau_a: f64,
    dt: f64,
}

pub fn run(ctx: &Ctx) -> Result<()> {
    let mut problems = Vec::new();
    config::check_keys(&ctx.config, "$", &KEYS, &mut problems);
    config::finish(problems)?;
    let c: Cfg = config::parse(&ctx.config, "stability")?;

    let p = FsParams::new(c.tau_m, c.tau_a, c.dt, 0.0, 0.0)?;
    let bounds = kappa_stability_bounds(&p);
    let explicit = max_stable_target_frequency(&p, Scheme::Explicit)?;
    let semi = max_stable_target_frequency(&p, Scheme::SemiImplicit)?;

    let mut csv = String::from(
        "scheme,kappa,jury_1mTpD,jury_1pTpD,jury_1mD,stable,spectral_radius\n",
    );
    for (name, scheme, bound) in [
        ("explicit", Scheme::Explicit, bounds.explicit),
        ("semi-implicit", Scheme::SemiImplicit, bounds.semi_implicit),
    ] {
        for i in 0..49 {
            let kappa = bound * 1.2 * i as f64 / 48.0;
            let g = kappa.sqrt();
            let q = FsParams::new_unchecked(c.tau_m, c.tau_a, c.dt, g, g);
            let report = jury_assess(&build_state_matrix(&q, scheme));
            csv.push_str(&format!(
                "{name},{kappa},{},{},{},{},{}\n",
                report.jury_1mTpD,
                report.jury_1pTpD,
                report.jury_1mD,
                report.stable,
                report.spectral_radius
            ));
        }
    }
    ctx.out.write("margins.csv", &csv)?;

    let mut body = Map::new();
    body.insert("tau_m".to_string(), Value::from(c.tau_m));
    body.insert("tau_a".to_string(), Value::from(c.tau_a));
    body.insert("dt".to_string(), Value::from(c.dt));
    body.insert("explicit_kappa_bound".to_string(), Value::from(bounds.explicit));
    body.insert("semi_implicit_kappa_bound".to_string(), Value::from(bounds.semi_implicit));
    body.insert("explicit_limit_hz".to_string(), Value::from(explicit.f_hz));
    body.insert("semi_implicit_limit_hz".to_string(), Value::from(semi.f_hz));
    body.insert("explicit_low_pass".to_string(), Value::from(explicit.low_pass));
    body.insert("semi_implicit_low_pass".to_string(), Value::from(semi.low_pass));
    config::write_summary(&ctx.out, "stability", None, body)
}
