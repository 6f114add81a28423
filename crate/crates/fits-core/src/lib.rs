//! Frequency-selective spiking neurons with temporal shaping.
//!
//! The neuron model combines two pieces:
//!
//! * an adaptive leaky integrate-and-fire core whose voltage-coupled
//!   adaptation current gives the subthreshold response a tunable
//!   band-pass peak (the *target frequency*), and
//! * an optional cascade of first-order all-pass stages whose outputs are
//!   recursively mixed back into the membrane pathway, shaping *when*
//!   frequency content contributes to voltage accumulation without
//!   changing *how much* (group-delay control at unit magnitude).
//!
//! The crate covers the discrete-time state update in scalar and layer
//! form ([`neuron`]), continuous- and discrete-time transfer-function
//! analysis ([`freq`]), Jury stability assessment of the discretizations
//! ([`stability`]), surrogate-gradient training of small feedforward
//! networks ([`train`]), synthetic dataset plumbing ([`data`]), and
//! theoretical energy accounting from operation counts ([`energy`]).
//!
//! Everything is deterministic: given the same configuration and seed,
//! every entry point produces bit-identical results whether it runs
//! sequentially or on the rayon pool (see [`parallel`]).

pub mod data;
pub mod energy;
pub mod error;
pub mod freq;
pub mod linalg;
pub mod neuron;
pub mod parallel;
pub mod stability;
pub mod train;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
