//! State-vector simulation of quantum teleportation over a three-qubit
//! register ordered (charlie, alice, bob).
//!
//! Comparisons between states are made up to global phase, through
//! [`fidelity`]. Exactness claims use [`crate::EXACT_TOLERANCE`].

mod bell;
mod observable;
mod state;
mod trial;

use thiserror::Error;

pub use bell::{
    apply_correction, bell_measure, outcome_probabilities, project_onto, BellBranch, BellOutcome, Correction,
};
pub use observable::{deterministic_observable_exists, mixed_analogue, DeterministicObservable};
pub use state::{
    compose, fidelity, prepare_epr, random_pure_state, reduced_density, reduced_density_of, DensityMatrix,
    PureState, RegisterState, NORMALIZATION_SLACK,
};
pub use trial::{run_quantum_trial, QuantumInput, QuantumTrialRecord};

use crate::party::Party;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantumError {
    #[error("state norm is {0}, expected 1")]
    NotNormalized(f64),
    #[error("a register needs 1–3 qubits and 2^k amplitudes (got {qubits} qubits, {amplitudes} amplitudes)")]
    BadRegister { qubits: usize, amplitudes: usize },
    #[error("qubit label {0} appears twice")]
    DuplicateLabel(Party),
    #[error("no qubit labelled {0}")]
    MissingLabel(Party),
    #[error("expected qubits (charlie, alice, bob), got {0:?}")]
    UnexpectedLayout(Vec<Party>),
    #[error("outcome {0:?} has zero probability")]
    ZeroProbabilityBranch(BellOutcome),
}
