use thiserror::Error;

use crate::classical_protocol::TrialRecord;
use crate::epistemic_state::StateError;
use crate::quantum_protocol::{QuantumError, QuantumTrialRecord};
use crate::transport::TransportError;

/// Why a trial could not complete.
#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("expected {expected}, got {got}")]
    UnexpectedMessage { expected: &'static str, got: String },
    #[error(
        "trial {} broke teleportation: Charlie selected {:?} but Bob ended with {:?}",
        .0.trial_index, .0.charlie_face_at_selection, .0.bob_final_face
    )]
    InvariantViolated(Box<TrialRecord>),
    #[error("quantum trial {} ended with fidelity {}", .0.trial_index, .0.fidelity)]
    FidelityDeficit(Box<QuantumTrialRecord>),
    #[error("trial index {0} does not fit the 32-bit wire field")]
    TrialIndexOverflow(u64),
}

pub(crate) fn wire_trial_index(trial_index: u64) -> Result<u32, ProtocolError> {
    u32::try_from(trial_index).map_err(|_| ProtocolError::TrialIndexOverflow(trial_index))
}
