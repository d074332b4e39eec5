//! Deterministic simulation of two teleportation protocols and a harness that
//! checks their shared properties.
//!
//! * [`classical_protocol`] teleports an epistemic coin state `|x⟩` using a
//!   correlated pair of coins in sealed boxes and one classical bit.
//! * [`quantum_protocol`] is the standard three-qubit state-vector protocol
//!   with a Bell measurement and two classical bits.
//! * [`verification`] runs Monte Carlo and analytic checks for both and
//!   renders a side-by-side report.
//! * [`transport`] carries the messages, either in-process or over TCP with a
//!   fixed binary frame format so the three parties can run as processes.
//!
//! Every random choice is drawn from a substream derived from
//! `(root seed, trial index, stream label)`, see [`rng`]. Runs are therefore
//! reproducible across serial, parallel and networked execution.

pub mod classical_protocol;
pub mod epistemic_state;
mod error;
pub mod events;
pub mod party;
pub mod quantum_protocol;
pub mod rng;
pub mod transport;
pub mod verification;

pub use error::ProtocolError;
pub use party::Party;

/// Tolerance shared by every "exact" numerical claim about quantum states.
pub const EXACT_TOLERANCE: f64 = 1e-12;
