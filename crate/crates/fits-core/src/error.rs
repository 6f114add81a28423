//! Error taxonomy shared by all modules.
//!
//! The split matters to callers: configuration, domain, and parse errors
//! mean the caller handed us something invalid (the CLI maps them to exit
//! code 2), while the numeric variants mean a computation failed on valid
//! inputs (exit code 3).

use thiserror::Error;

/// All errors produced by this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (bad shapes, out-of-range constants,
    /// inconsistent options). The message lists every violation found.
    #[error("configuration error: {0}")]
    Config(String),

    /// A scalar argument is outside the mathematical domain of the
    /// operation (e.g. a nonpositive target frequency for the inverse map).
    #[error("domain error: {0}")]
    Domain(String),

    /// Neuron state left the finite range during simulation.
    #[error("non-finite state in neuron {neuron} at timestep {step}")]
    NonFinite { neuron: usize, step: usize },

    /// Transfer-function evaluation too close to a pole to be meaningful.
    #[error("near-pole evaluation at omega = {omega}: |denominator| = {denom:.3e}")]
    NearPole { omega: f64, denom: f64 },

    /// Adjacent phase samples are an ambiguous half-turn apart; the caller
    /// must densify the frequency grid before the unwrap can be trusted.
    #[error("phase unwrap ambiguous near omega = {omega} (|delta| within 1e-6 of pi); use a denser grid")]
    RefineGrid { omega: f64 },

    /// Degenerate mixture in a group-delay expression (direct and all-pass
    /// pathways cancel exactly).
    #[error("singular mixture: |denominator| = {denom:.3e} below 1e-14")]
    SingularMixture { denom: f64 },

    /// An internal identity that should hold by construction failed;
    /// indicates a bug or pathological floating-point inputs.
    #[error("internal consistency failure: {0}")]
    Internal(String),

    /// Training produced a non-finite loss or state.
    #[error("training diverged at optimizer step {step}: {what}")]
    Diverged { step: usize, what: String },

    /// Malformed input file.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by invalid user input (exit code 2 in the
    /// CLI) as opposed to numeric failures during computation (exit 3).
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Domain(_) | Error::Parse { .. } | Error::Io(_) | Error::Json(_)
        )
    }
}
