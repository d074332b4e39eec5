use rand::Rng;
use serde::{Deserialize, Serialize};

use super::bell::{apply_correction, bell_measure, BellOutcome, Correction};
use super::state::{compose, fidelity, prepare_epr, random_pure_state, PureState};
use crate::error::{wire_trial_index, ProtocolError};
use crate::events::EventKind;
use crate::party::Party;
use crate::rng::{SeedSchedule, StreamLabel};
use crate::transport::{Message, Payload, StateRequest, TrialLink};
use crate::EXACT_TOLERANCE;

/// The state Charlie teleports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuantumInput {
    /// Haar-random, drawn from Charlie's substream for the trial.
    Random,
    Given(PureState),
}

impl QuantumInput {
    pub fn resolve<R: Rng + ?Sized>(&self, rng: &mut R) -> PureState {
        match self {
            QuantumInput::Random => random_pure_state(rng),
            QuantumInput::Given(psi) => *psi,
        }
    }

    pub fn to_request(&self) -> StateRequest {
        match self {
            QuantumInput::Random => StateRequest::QuantumRandom,
            QuantumInput::Given(psi) => StateRequest::QuantumGiven(psi.to_reals()),
        }
    }
}

/// Omniscient log of one quantum trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumTrialRecord {
    pub trial_index: u64,
    #[serde(rename = "truth_psi")]
    pub psi: PureState,
    pub outcome: BellOutcome,
    /// The two bits as Bob decoded them, packed `x | z << 1`.
    pub message_bits: u8,
    pub bits_sent: u32,
    pub correction: Correction,
    /// `|⟨ψ|final⟩|²`.
    #[serde(rename = "truth_fidelity")]
    pub fidelity: f64,
    /// `|⟨U_outcome ψ|bob⟩|²` at the measure event.
    #[serde(rename = "truth_pre_correction_fidelity")]
    pub pre_correction_fidelity: f64,
    pub event_order: Vec<EventKind>,
}

/// One in-process run of the quantum protocol. Fails if the final fidelity
/// falls short of one by more than [`EXACT_TOLERANCE`].
pub fn run_quantum_trial(
    input: &QuantumInput,
    link: &TrialLink,
    schedule: &SeedSchedule,
    trial_index: u64,
) -> Result<QuantumTrialRecord, ProtocolError> {
    let wire_index = wire_trial_index(trial_index)?;
    let mut events = Vec::with_capacity(crate::events::TRIAL_EVENTS.len());

    let epr = prepare_epr();
    events.push(EventKind::PreparePair);
    events.push(EventKind::Distribute);

    let psi = input.resolve(&mut schedule.substream(trial_index, StreamLabel::Charlie));
    events.push(EventKind::PrepareState);
    let register = compose(&psi, &epr)?;
    events.push(EventKind::Handover);

    let branch = bell_measure(&register, &mut schedule.substream(trial_index, StreamLabel::Device))?;
    let expected_pre = branch.outcome.known_transform().apply(&psi);
    let pre_correction_fidelity = fidelity(&expected_pre, &branch.bob_state);
    events.push(EventKind::Measure);

    let msg = Message::new(link.session_id, wire_index, Payload::TwoBits(branch.outcome));
    link.alice.send(Party::Bob, &msg)?;
    events.push(EventKind::Send);

    let (_, received) = link.bob.recv()?;
    let bits_sent = received.information_bits();
    let outcome = match received.payload {
        Payload::TwoBits(o) => o,
        other => {
            return Err(ProtocolError::UnexpectedMessage {
                expected: "two bits",
                got: format!("{other:?}"),
            })
        }
    };
    events.push(EventKind::Receive);

    let final_state = apply_correction(&branch.bob_state, outcome);
    events.push(EventKind::Correct);
    events.push(EventKind::Done);

    let record = QuantumTrialRecord {
        trial_index,
        psi,
        outcome,
        message_bits: outcome.bits(),
        bits_sent,
        correction: Correction::for_outcome(outcome),
        fidelity: fidelity(&psi, &final_state),
        pre_correction_fidelity,
        event_order: events,
    };
    if 1.0 - record.fidelity > EXACT_TOLERANCE {
        return Err(ProtocolError::FidelityDeficit(Box::new(record)));
    }
    Ok(record)
}
