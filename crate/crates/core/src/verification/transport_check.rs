//! Wire-format and networked-equivalence checks.

use std::io::Write;
use std::net::TcpStream;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{derive_seed, tags, VerifyConfig};
use super::VerifyError;
use crate::classical_protocol::{run_trial, ClassicalOutcome};
use crate::epistemic_state::PreparationMode;
use crate::party::Party;
use crate::quantum_protocol::{random_pure_state, run_quantum_trial, BellOutcome, QuantumInput};
use crate::rng::{SeedSchedule, StreamLabel};
use crate::transport::golden::{corrupt_frames, golden_frames};
use crate::transport::message::{decode, encode_versioned, read_frame};
use crate::transport::{
    Control, Coordinator, LinkStats, LocalParties, Message, Payload, ProtocolKind, RejectCode, StateRequest,
    TrialLink,
};

fn random_request<R: Rng + ?Sized>(rng: &mut R) -> StateRequest {
    match rng.random_range(0..3) {
        0 => StateRequest::Classical {
            x: rng.random(),
            mode: if rng.random() {
                PreparationMode::Direct
            } else {
                PreparationMode::Ensemble
            },
        },
        1 => StateRequest::QuantumRandom,
        _ => StateRequest::QuantumGiven(random_pure_state(rng).to_reals()),
    }
}

/// A message of any type with random fields.
pub fn random_message<R: Rng + ?Sized>(rng: &mut R) -> Message {
    let party = *Party::ALL.choose(rng).expect("non-empty");
    let protocol = if rng.random() {
        ProtocolKind::Classical
    } else {
        ProtocolKind::Quantum
    };
    let payload = match rng.random_range(0..13) {
        0 => Payload::ClassicalBit(if rng.random() {
            ClassicalOutcome::Same
        } else {
            ClassicalOutcome::Different
        }),
        1 => Payload::TwoBits(*BellOutcome::ALL.choose(rng).expect("non-empty")),
        2 => Payload::BoxTransfer {
            box_id: rng.random(),
            token: rng.random(),
        },
        3 => Payload::Control(Control::Hello { role: party, protocol }),
        4 => Payload::Control(Control::Welcome { role: party }),
        5 => Payload::Control(Control::Reject(
            RejectCode::from_code(rng.random_range(1..=4)).expect("codes 1-4 exist"),
        )),
        6 => Payload::Control(Control::BeginTrial(random_request(rng))),
        7 => Payload::Control(Control::Prepare(random_request(rng))),
        8 => Payload::Control(Control::Measure {
            first: rng.random(),
            second: rng.random(),
        }),
        9 => Payload::Control(Control::MeasureResult(rng.random())),
        10 => Payload::Control(Control::Correct {
            system: rng.random(),
            correction: rng.random(),
        }),
        11 => Payload::Control(Control::Ack),
        _ => Payload::Control(Control::Teardown),
    };
    Message::new(rng.random(), rng.random(), payload)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTripCheck {
    pub messages: u64,
    pub mismatches: u64,
    pub pass: bool,
}

pub fn roundtrip_check(seed: u64, messages: u64) -> RoundTripCheck {
    let schedule = SeedSchedule::new(seed);
    let mismatches = (0..messages)
        .filter(|&i| {
            let msg = random_message(&mut schedule.substream(i, StreamLabel::Harness));
            let bytes = msg.encode();
            !matches!(decode(&bytes), Ok((back, used)) if back == msg && used == bytes.len())
        })
        .count() as u64;
    RoundTripCheck {
        messages,
        mismatches,
        pass: mismatches == 0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenCheck {
    pub fixtures: usize,
    pub matched: usize,
    pub corrupt_fixtures: usize,
    pub corrupt_rejected_as_expected: usize,
    pub pass: bool,
}

pub fn golden_check() -> GoldenCheck {
    let golden = golden_frames();
    let matched = golden
        .iter()
        .filter(|g| g.message.encode() == g.bytes && matches!(decode(&g.bytes), Ok((m, _)) if m == g.message))
        .count();
    let corrupt = corrupt_frames();
    let rejected = corrupt
        .iter()
        .filter(|c| matches!(decode(&c.bytes), Err(e) if c.expected.matches(&e)))
        .count();
    GoldenCheck {
        fixtures: golden.len(),
        matched,
        corrupt_fixtures: corrupt.len(),
        corrupt_rejected_as_expected: rejected,
        pass: matched == golden.len() && rejected == corrupt.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HandshakeCheck {
    pub offered_version: u8,
    pub reject_code: Option<u8>,
    pub pass: bool,
}

/// Offers a Hello with an unsupported version and records the reply.
fn version_mismatch_check(addr: &str) -> Result<HandshakeCheck, VerifyError> {
    const OFFERED: u8 = 0x02;
    let mut stream = TcpStream::connect(addr).map_err(crate::transport::TransportError::from)?;
    let hello = Message::new(0, 0, Payload::Control(Control::Hello {
        role: Party::Alice,
        protocol: ProtocolKind::Classical,
    }));
    stream
        .write_all(&encode_versioned(&hello, OFFERED))
        .map_err(crate::transport::TransportError::from)?;
    let reject_code = match read_frame(&mut stream) {
        Ok(Message {
            payload: Payload::Control(Control::Reject(code)),
            ..
        }) => Some(code.code()),
        _ => None,
    };
    Ok(HandshakeCheck {
        offered_version: OFFERED,
        reject_code,
        pass: reject_code == Some(RejectCode::VersionMismatch.code()),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCheck {
    pub protocol: ProtocolKind,
    pub trials: u64,
    pub identical_records: u64,
    pub first_mismatch: Option<u64>,
    pub alice_to_bob: LinkStats,
    pub pass: bool,
}

impl NetworkCheck {
    fn new(protocol: ProtocolKind, trials: u64, equal: impl Iterator<Item = bool>, alice_to_bob: LinkStats) -> Self {
        let mut identical = 0;
        let mut first_mismatch = None;
        for (t, same) in equal.enumerate() {
            if same {
                identical += 1;
            } else if first_mismatch.is_none() {
                first_mismatch = Some(t as u64);
            }
        }
        let bits = match protocol {
            ProtocolKind::Classical => 1,
            ProtocolKind::Quantum => 2,
        };
        NetworkCheck {
            protocol,
            trials,
            identical_records: identical,
            first_mismatch,
            pass: identical == trials
                && alice_to_bob.frames == trials
                && alice_to_bob.information_bits == bits * trials,
            alice_to_bob,
        }
    }
}

/// Runs `trials` classical trials over loopback TCP and in-process with the
/// same seed and compares the records one by one.
pub fn classical_network_check(
    parties: &LocalParties,
    x: f64,
    mode: PreparationMode,
    seed: u64,
    trials: u64,
) -> Result<NetworkCheck, VerifyError> {
    let schedule = SeedSchedule::new(seed);
    let mut coordinator = Coordinator::connect(&parties.endpoints, seed, ProtocolKind::Classical)?;
    let link = TrialLink::new(seed);
    let mut equal = Vec::with_capacity(trials as usize);
    for t in 0..trials {
        let networked = coordinator.run_classical_trial(x, mode, &schedule, t)?;
        equal.push(networked == run_trial(x, mode, &link, &schedule, t)?);
    }
    let stats = coordinator.alice_to_bob();
    coordinator.teardown()?;
    Ok(NetworkCheck::new(ProtocolKind::Classical, trials, equal.into_iter(), stats))
}

pub fn quantum_network_check(parties: &LocalParties, seed: u64, trials: u64) -> Result<NetworkCheck, VerifyError> {
    let schedule = SeedSchedule::new(seed);
    let mut coordinator = Coordinator::connect(&parties.endpoints, seed, ProtocolKind::Quantum)?;
    let link = TrialLink::new(seed);
    let mut equal = Vec::with_capacity(trials as usize);
    for t in 0..trials {
        let networked = coordinator.run_quantum_trial(&QuantumInput::Random, &schedule, t)?;
        equal.push(networked == run_quantum_trial(&QuantumInput::Random, &link, &schedule, t)?);
    }
    let stats = coordinator.alice_to_bob();
    coordinator.teardown()?;
    Ok(NetworkCheck::new(ProtocolKind::Quantum, trials, equal.into_iter(), stats))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportReport {
    pub roundtrip: RoundTripCheck,
    pub golden: GoldenCheck,
    pub handshake: HandshakeCheck,
    pub classical_network: NetworkCheck,
    pub quantum_network: NetworkCheck,
    pub pass: bool,
}

fn finish(parties: LocalParties) -> Result<(), VerifyError> {
    for r in parties.join() {
        r?;
    }
    Ok(())
}

pub fn verify_transport(cfg: &VerifyConfig) -> Result<TransportReport, VerifyError> {
    let t = &cfg.transport;
    let roundtrip = roundtrip_check(derive_seed(cfg.seed, tags::ROUNDTRIP, 0), t.roundtrip_messages);
    let golden = golden_check();

    let parties = LocalParties::spawn()?;
    let handshake = version_mismatch_check(&parties.endpoints.alice)?;
    let classical_network = classical_network_check(&parties, t.x, cfg.mode, cfg.seed, t.classical_trials)?;
    finish(parties)?;

    let parties = LocalParties::spawn()?;
    let quantum_network = quantum_network_check(&parties, cfg.seed, t.quantum_trials)?;
    finish(parties)?;

    Ok(TransportReport {
        pass: roundtrip.pass && golden.pass && handshake.pass && classical_network.pass && quantum_network.pass,
        roundtrip,
        golden,
        handshake,
        classical_network,
        quantum_network,
    })
}
