//! The three-party protocol over TCP.
//!
//! Every party listens on its own endpoint and a [`Coordinator`] connects to
//! all three. The coordinator stands in for the physical world: it owns the
//! boxes (or qubits), the pair source and the measurement device, and it
//! relays party-to-party messages. Parties hold only handles, an id plus a
//! token, so hidden faces never cross the wire. Party decisions (what to
//! measure, what to send, how to correct) are made in the party processes by
//! the engines below.
//!
//! The coordinator draws randomness from the same substreams as the
//! in-process runners, so a networked trial reproduces the in-process
//! [`TrialRecord`] exactly.

use std::collections::HashMap;
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use super::message::{correction_code, correction_from_code, FrameError};
use super::{Control, LinkStats, Message, Payload, ProtocolKind, RejectCode, StateRequest, TcpLink, TransportError};
use crate::classical_protocol::{
    step1_distribute, step2_charlie_prepare, BobCorrection, ClassicalOutcome, MeasurementDevice, OpenedFaces,
    TrialRecord,
};
use crate::epistemic_state::{PreparationMode, SealedBox};
use crate::error::{wire_trial_index, ProtocolError};
use crate::events::EventKind;
use crate::party::Party;
use crate::quantum_protocol::{
    bell_measure, compose, fidelity, prepare_epr, BellOutcome, Correction, PureState, QuantumInput,
    QuantumTrialRecord,
};
use crate::rng::{SeedSchedule, StreamLabel};
use crate::EXACT_TOLERANCE;

const HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(5);
const ACCEPT_POLL: Duration = Duration::from_millis(5);

/// What a party's engine does with an incoming message.
#[derive(Debug, PartialEq)]
pub enum EngineStep {
    Reply(Vec<Payload>),
    Finished,
}

pub trait PartyEngine: Send {
    fn on_message(&mut self, msg: &Message) -> Result<EngineStep, TransportError>;
}

fn violation(role: Party, msg: &Message) -> TransportError {
    TransportError::Protocol(format!("{role} did not expect {:?}", msg.payload))
}

/// Collects the pair half and Charlie's system, asks the device to measure
/// them jointly, and forwards the outcome to Bob.
pub struct AliceEngine {
    protocol: ProtocolKind,
    pair: Option<u64>,
    charlie: Option<u64>,
}

impl AliceEngine {
    pub fn new(protocol: ProtocolKind) -> Self {
        AliceEngine {
            protocol,
            pair: None,
            charlie: None,
        }
    }
}

impl PartyEngine for AliceEngine {
    fn on_message(&mut self, msg: &Message) -> Result<EngineStep, TransportError> {
        match &msg.payload {
            Payload::BoxTransfer { box_id, .. } => match (self.pair, self.charlie) {
                (None, _) => {
                    self.pair = Some(*box_id);
                    Ok(EngineStep::Reply(vec![]))
                }
                (Some(pair), None) => {
                    self.charlie = Some(*box_id);
                    Ok(EngineStep::Reply(vec![Payload::Control(Control::Measure {
                        first: pair,
                        second: *box_id,
                    })]))
                }
                _ => Err(violation(Party::Alice, msg)),
            },
            Payload::Control(Control::MeasureResult(code)) if self.charlie.is_some() => {
                self.pair = None;
                self.charlie = None;
                let payload = match self.protocol {
                    ProtocolKind::Classical => ClassicalOutcome::from_bit(*code).map(Payload::ClassicalBit),
                    ProtocolKind::Quantum => BellOutcome::from_bits(*code).map(Payload::TwoBits),
                };
                payload
                    .map(|p| EngineStep::Reply(vec![p]))
                    .ok_or_else(|| violation(Party::Alice, msg))
            }
            Payload::Control(Control::Teardown) => Ok(EngineStep::Finished),
            _ => Err(violation(Party::Alice, msg)),
        }
    }
}

/// Holds his half of the pair and corrects it according to Alice's message.
pub struct BobEngine {
    held: Option<u64>,
}

impl BobEngine {
    pub fn new() -> Self {
        BobEngine { held: None }
    }
}

impl Default for BobEngine {
    fn default() -> Self {
        Self::new()
    }
}

impl PartyEngine for BobEngine {
    fn on_message(&mut self, msg: &Message) -> Result<EngineStep, TransportError> {
        let correct = |system: u64, correction: u8| {
            Ok(EngineStep::Reply(vec![Payload::Control(Control::Correct { system, correction })]))
        };
        match (&msg.payload, self.held) {
            (Payload::BoxTransfer { box_id, .. }, None) => {
                self.held = Some(*box_id);
                Ok(EngineStep::Reply(vec![]))
            }
            (Payload::ClassicalBit(o), Some(system)) => correct(system, BobCorrection::for_outcome(*o).code()),
            (Payload::TwoBits(o), Some(system)) => correct(system, correction_code(Correction::for_outcome(*o))),
            (Payload::Control(Control::Ack), Some(_)) => {
                self.held = None;
                Ok(EngineStep::Reply(vec![]))
            }
            (Payload::Control(Control::Teardown), _) => Ok(EngineStep::Finished),
            _ => Err(violation(Party::Bob, msg)),
        }
    }
}

/// Prepares the requested state and hands the resulting system to Alice.
pub struct CharlieEngine;

impl PartyEngine for CharlieEngine {
    fn on_message(&mut self, msg: &Message) -> Result<EngineStep, TransportError> {
        match &msg.payload {
            Payload::Control(Control::BeginTrial(req)) => {
                Ok(EngineStep::Reply(vec![Payload::Control(Control::Prepare(*req))]))
            }
            Payload::BoxTransfer { box_id, token } => Ok(EngineStep::Reply(vec![Payload::BoxTransfer {
                box_id: *box_id,
                token: *token,
            }])),
            Payload::Control(Control::Teardown) => Ok(EngineStep::Finished),
            _ => Err(violation(Party::Charlie, msg)),
        }
    }
}

pub fn engine_for(role: Party, protocol: ProtocolKind) -> Box<dyn PartyEngine> {
    match role {
        Party::Alice => Box::new(AliceEngine::new(protocol)),
        Party::Bob => Box::new(BobEngine::new()),
        Party::Charlie => Box::new(CharlieEngine),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServeSummary {
    pub role: Party,
    pub session_id: u64,
    pub protocol: ProtocolKind,
    pub messages: u64,
}

fn reject(link: &mut TcpLink, session_id: u64, code: RejectCode) -> TransportError {
    // Best effort; the peer may already be gone.
    let _ = link.send(&Message::new(session_id, 0, Payload::Control(Control::Reject(code))));
    TransportError::Rejected(code)
}

/// Reads the opening Hello and answers it. Returns the link and the session
/// parameters on success.
fn handshake(role: Party, stream: TcpStream, busy: bool) -> Result<(TcpLink, u64, ProtocolKind), TransportError> {
    stream.set_read_timeout(Some(HANDSHAKE_TIMEOUT))?;
    let mut link = TcpLink::from_stream(stream.try_clone()?)?;
    let hello = match link.recv() {
        Ok(msg) => msg,
        Err(TransportError::Frame(FrameError::UnsupportedVersion(_))) => {
            return Err(reject(&mut link, 0, RejectCode::VersionMismatch))
        }
        Err(e) => return Err(e),
    };
    let (asked, protocol) = match hello.payload {
        Payload::Control(Control::Hello { role, protocol }) => (role, protocol),
        _ => return Err(reject(&mut link, hello.session_id, RejectCode::ProtocolViolation)),
    };
    if asked != role {
        return Err(reject(&mut link, hello.session_id, RejectCode::RoleConflict));
    }
    if busy {
        return Err(reject(&mut link, hello.session_id, RejectCode::Busy));
    }
    link.send(&Message::new(hello.session_id, 0, Payload::Control(Control::Welcome { role })))?;
    stream.set_read_timeout(None)?;
    Ok((link, hello.session_id, protocol))
}

fn run_engine(role: Party, mut link: TcpLink, session_id: u64, protocol: ProtocolKind) -> Result<ServeSummary, TransportError> {
    let mut engine = engine_for(role, protocol);
    let mut messages = 0u64;
    loop {
        let msg = link.recv()?;
        messages += 1;
        if msg.session_id != session_id {
            return Err(TransportError::Protocol(format!(
                "{role} got a frame for session {:#x} inside session {session_id:#x}",
                msg.session_id
            )));
        }
        match engine.on_message(&msg)? {
            EngineStep::Finished => {
                return Ok(ServeSummary {
                    role,
                    session_id,
                    protocol,
                    messages,
                })
            }
            EngineStep::Reply(out) => {
                for payload in out {
                    link.send(&Message::new(session_id, msg.trial_index, payload))?;
                }
            }
        }
    }
}

/// Hosts one party until the coordinator tears the session down.
///
/// Connections that arrive with the wrong role, an unsupported version, or
/// while a session is running are rejected and do not end the server.
pub fn serve_party(role: Party, listener: TcpListener) -> Result<ServeSummary, TransportError> {
    listener.set_nonblocking(true)?;
    let in_session = Arc::new(AtomicBool::new(false));
    let mut session: Option<thread::JoinHandle<Result<ServeSummary, TransportError>>> = None;
    loop {
        if session.as_ref().is_some_and(|h| h.is_finished()) {
            let handle = session.take().expect("checked above");
            return handle
                .join()
                .unwrap_or_else(|_| Err(TransportError::Protocol(format!("{role} session thread panicked"))));
        }
        match listener.accept() {
            Ok((stream, _)) => {
                stream.set_nonblocking(false)?;
                match handshake(role, stream, in_session.load(Ordering::SeqCst)) {
                    Ok((link, session_id, protocol)) => {
                        in_session.store(true, Ordering::SeqCst);
                        session = Some(thread::spawn(move || run_engine(role, link, session_id, protocol)));
                    }
                    // A bad handshake ends that connection only.
                    Err(_) => continue,
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => thread::sleep(ACCEPT_POLL),
            Err(e) => return Err(e.into()),
        }
    }
}

/// Three parties served from threads of this process on loopback ports.
pub struct LocalParties {
    pub endpoints: PartyEndpoints,
    handles: Vec<thread::JoinHandle<Result<ServeSummary, TransportError>>>,
}

impl LocalParties {
    pub fn spawn() -> Result<Self, TransportError> {
        let mut addrs = Vec::new();
        let mut handles = Vec::new();
        for role in Party::ALL {
            let listener = TcpListener::bind("127.0.0.1:0")?;
            addrs.push(listener.local_addr()?.to_string());
            handles.push(thread::spawn(move || serve_party(role, listener)));
        }
        let mut addrs = addrs.into_iter();
        let mut next = || addrs.next().expect("one address per role");
        Ok(LocalParties {
            endpoints: PartyEndpoints {
                alice: next(),
                bob: next(),
                charlie: next(),
            },
            handles,
        })
    }

    /// Waits for every party to finish, in role order.
    pub fn join(self) -> Vec<Result<ServeSummary, TransportError>> {
        self.handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(TransportError::Protocol("party thread panicked".into()))))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartyEndpoints {
    pub alice: String,
    pub bob: String,
    pub charlie: String,
}

impl PartyEndpoints {
    fn get(&self, role: Party) -> &str {
        match role {
            Party::Alice => &self.alice,
            Party::Bob => &self.bob,
            Party::Charlie => &self.charlie,
        }
    }
}

fn handle_token(session_id: u64, handle: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = session_id ^ handle.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

struct Held<T> {
    item: T,
    holder: Party,
    token: u64,
}

/// Drives a networked session and plays the physical world.
pub struct Coordinator {
    session_id: u64,
    protocol: ProtocolKind,
    links: HashMap<Party, TcpLink>,
    next_handle: u64,
    alice_to_bob: LinkStats,
}

impl Coordinator {
    pub fn connect(endpoints: &PartyEndpoints, session_id: u64, protocol: ProtocolKind) -> Result<Self, TransportError> {
        for (i, a) in Party::ALL.iter().enumerate() {
            for b in &Party::ALL[i + 1..] {
                if endpoints.get(*a) == endpoints.get(*b) {
                    return Err(TransportError::DuplicateRole(*b));
                }
            }
        }
        let mut links = HashMap::new();
        for role in Party::ALL {
            let mut link = TcpLink::connect(endpoints.get(role))?;
            link.send(&Message::new(session_id, 0, Payload::Control(Control::Hello { role, protocol })))?;
            match link.recv()?.payload {
                Payload::Control(Control::Welcome { role: got }) if got == role => {}
                Payload::Control(Control::Welcome { role: got }) => {
                    return Err(TransportError::RoleMismatch { expected: role, got })
                }
                Payload::Control(Control::Reject(code)) => return Err(TransportError::Rejected(code)),
                other => return Err(TransportError::Protocol(format!("unexpected handshake reply {other:?}"))),
            }
            if links.insert(role, link).is_some() {
                return Err(TransportError::DuplicateRole(role));
            }
        }
        Ok(Coordinator {
            session_id,
            protocol,
            links,
            next_handle: 1,
            alice_to_bob: LinkStats::default(),
        })
    }

    pub fn session_id(&self) -> u64 {
        self.session_id
    }

    /// Information bits and wire bytes relayed from Alice to Bob so far.
    pub fn alice_to_bob(&self) -> LinkStats {
        self.alice_to_bob
    }

    fn send(&mut self, to: Party, trial: u32, payload: Payload) -> Result<(), TransportError> {
        let msg = Message::new(self.session_id, trial, payload);
        self.links.get_mut(&to).expect("all roles connected").send(&msg)
    }

    fn recv(&mut self, from: Party, trial: u32) -> Result<Payload, TransportError> {
        let msg = self.links.get_mut(&from).expect("all roles connected").recv()?;
        if msg.session_id != self.session_id || msg.trial_index != trial {
            return Err(TransportError::Protocol(format!(
                "{from} sent session {:#x} trial {} during session {:#x} trial {trial}",
                msg.session_id, msg.trial_index, self.session_id
            )));
        }
        Ok(msg.payload)
    }

    fn issue<T>(&mut self, registry: &mut HashMap<u64, Held<T>>, item: T, holder: Party) -> (u64, u64) {
        let handle = self.next_handle;
        self.next_handle += 1;
        let token = handle_token(self.session_id, handle);
        registry.insert(handle, Held { item, holder, token });
        (handle, token)
    }

    fn relay_alice_to_bob(&mut self, trial: u32, payload: Payload) -> Result<u32, TransportError> {
        let msg = Message::new(self.session_id, trial, payload.clone());
        self.alice_to_bob
            .record(msg.encode().len() as u64, msg.information_bits() as u64);
        self.send(Party::Bob, trial, payload)?;
        Ok(msg.information_bits())
    }

    fn expect_prepare(&mut self, trial: u32) -> Result<StateRequest, ProtocolError> {
        match self.recv(Party::Charlie, trial)? {
            Payload::Control(Control::Prepare(req)) => Ok(req),
            other => Err(unexpected("a prepare request from charlie", other)),
        }
    }

    /// Charlie hands his system to Alice; the world checks the token and
    /// passes the transfer on unchanged.
    fn relay_handover<T>(&mut self, trial: u32, registry: &mut HashMap<u64, Held<T>>, handle: u64) -> Result<(), ProtocolError> {
        match self.recv(Party::Charlie, trial)? {
            Payload::BoxTransfer { box_id, token }
                if box_id == handle
                    && registry.get(&box_id).is_some_and(|h| h.token == token && h.holder == Party::Charlie) =>
            {
                registry.get_mut(&box_id).expect("checked").holder = Party::Alice;
                self.send(Party::Alice, trial, Payload::BoxTransfer { box_id, token })?;
                Ok(())
            }
            other => Err(unexpected("charlie's handover", other)),
        }
    }

    fn expect_measure<T>(&mut self, trial: u32, registry: &HashMap<u64, Held<T>>) -> Result<(u64, u64), ProtocolError> {
        match self.recv(Party::Alice, trial)? {
            Payload::Control(Control::Measure { first, second })
                if first != second
                    && [first, second]
                        .iter()
                        .all(|h| registry.get(h).is_some_and(|held| held.holder == Party::Alice)) =>
            {
                Ok((first, second))
            }
            other => Err(unexpected("a measurement request from alice on her own systems", other)),
        }
    }

    fn expect_correct<T>(&mut self, trial: u32, registry: &HashMap<u64, Held<T>>) -> Result<(u64, u8), ProtocolError> {
        match self.recv(Party::Bob, trial)? {
            Payload::Control(Control::Correct { system, correction })
                if registry.get(&system).is_some_and(|h| h.holder == Party::Bob) =>
            {
                Ok((system, correction))
            }
            other => Err(unexpected("a correction from bob on his own system", other)),
        }
    }

    pub fn run_classical_trial(
        &mut self,
        x: f64,
        mode: PreparationMode,
        schedule: &SeedSchedule,
        trial_index: u64,
    ) -> Result<TrialRecord, ProtocolError> {
        self.require(ProtocolKind::Classical)?;
        let t = wire_trial_index(trial_index)?;
        let mut events = Vec::with_capacity(crate::events::TRIAL_EVENTS.len());
        let mut boxes: HashMap<u64, Held<SealedBox>> = HashMap::new();

        let (alice_box, bob_box) = step1_distribute(&mut schedule.substream(trial_index, StreamLabel::Source));
        events.push(EventKind::PreparePair);
        let (ha, ta) = self.issue(&mut boxes, alice_box, Party::Alice);
        let (hb, tb) = self.issue(&mut boxes, bob_box, Party::Bob);
        self.send(Party::Alice, t, Payload::BoxTransfer { box_id: ha, token: ta })?;
        self.send(Party::Bob, t, Payload::BoxTransfer { box_id: hb, token: tb })?;
        events.push(EventKind::Distribute);

        self.send(Party::Charlie, t, Payload::Control(Control::BeginTrial(StateRequest::Classical { x, mode })))?;
        let (rx, rmode) = match self.expect_prepare(t)? {
            StateRequest::Classical { x, mode } => (x, mode),
            other => return Err(unexpected("a classical prepare request", Payload::Control(Control::Prepare(other)))),
        };
        let (charlie_box, _) =
            step2_charlie_prepare(rx, rmode, &mut schedule.substream(trial_index, StreamLabel::Charlie))?;
        let charlie_face = charlie_box.hidden_face();
        let (hc, tc) = self.issue(&mut boxes, charlie_box, Party::Charlie);
        self.send(Party::Charlie, t, Payload::BoxTransfer { box_id: hc, token: tc })?;
        events.push(EventKind::PrepareState);

        self.relay_handover(t, &mut boxes, hc)?;
        events.push(EventKind::Handover);

        let (first, second) = self.expect_measure(t, &boxes)?;
        let mut first_box = boxes.remove(&first).expect("validated").item;
        let mut second_box = boxes.remove(&second).expect("validated").item;
        let mut device = MeasurementDevice::new();
        let outcome = device.measure(
            &mut first_box,
            &mut second_box,
            &mut schedule.substream(trial_index, StreamLabel::Device),
        )?;
        let reading = device.take_reading().expect("device just measured");
        let bob_face_at_measure = boxes[&hb].item.hidden_face();
        self.send(Party::Alice, t, Payload::Control(Control::MeasureResult(outcome.bit())))?;
        events.push(EventKind::Measure);

        let bit = match self.recv(Party::Alice, t)? {
            Payload::ClassicalBit(bit) => bit,
            other => return Err(unexpected("a classical bit from alice", other)),
        };
        events.push(EventKind::Send);
        let bits_sent = self.relay_alice_to_bob(t, Payload::ClassicalBit(bit))?;
        events.push(EventKind::Receive);

        let (system, code) = self.expect_correct(t, &boxes)?;
        let correction = BobCorrection::from_code(code)
            .ok_or_else(|| unexpected("a classical correction code", Payload::Control(Control::Correct { system, correction: code })))?;
        let held = boxes.get_mut(&system).expect("validated");
        if correction == BobCorrection::Rotate {
            held.item.rotate()?;
        }
        let bob_final_face = held.item.hidden_face();
        events.push(EventKind::Correct);
        self.send(Party::Bob, t, Payload::Control(Control::Ack))?;
        events.push(EventKind::Done);

        let record = TrialRecord {
            trial_index,
            x,
            charlie_face_at_selection: charlie_face,
            alice_outcome: outcome,
            message_bit: bit.bit(),
            bits_sent,
            bob_correction: correction,
            bob_final_face,
            bob_face_at_measure,
            alice_post_measurement_faces: OpenedFaces {
                pair: reading.first,
                charlie: reading.second,
            },
            event_order: events,
        };
        if !record.teleported() {
            return Err(ProtocolError::InvariantViolated(Box::new(record)));
        }
        Ok(record)
    }

    pub fn run_quantum_trial(
        &mut self,
        input: &QuantumInput,
        schedule: &SeedSchedule,
        trial_index: u64,
    ) -> Result<QuantumTrialRecord, ProtocolError> {
        self.require(ProtocolKind::Quantum)?;
        let t = wire_trial_index(trial_index)?;
        let mut events = Vec::with_capacity(crate::events::TRIAL_EVENTS.len());
        // Qubits live in one register; the registry only tracks who holds
        // which handle.
        let mut qubits: HashMap<u64, Held<Party>> = HashMap::new();

        let epr = prepare_epr();
        events.push(EventKind::PreparePair);
        let (ha, ta) = self.issue(&mut qubits, Party::Alice, Party::Alice);
        let (hb, tb) = self.issue(&mut qubits, Party::Bob, Party::Bob);
        self.send(Party::Alice, t, Payload::BoxTransfer { box_id: ha, token: ta })?;
        self.send(Party::Bob, t, Payload::BoxTransfer { box_id: hb, token: tb })?;
        events.push(EventKind::Distribute);

        self.send(Party::Charlie, t, Payload::Control(Control::BeginTrial(input.to_request())))?;
        let requested = match self.expect_prepare(t)? {
            StateRequest::QuantumRandom => QuantumInput::Random,
            StateRequest::QuantumGiven(reals) => QuantumInput::Given(PureState::from_reals(reals)?.0),
            other => return Err(unexpected("a quantum prepare request", Payload::Control(Control::Prepare(other)))),
        };
        let psi = requested.resolve(&mut schedule.substream(trial_index, StreamLabel::Charlie));
        let (hc, tc) = self.issue(&mut qubits, Party::Charlie, Party::Charlie);
        self.send(Party::Charlie, t, Payload::BoxTransfer { box_id: hc, token: tc })?;
        events.push(EventKind::PrepareState);

        self.relay_handover(t, &mut qubits, hc)?;
        let register = compose(&psi, &epr)?;
        events.push(EventKind::Handover);

        let (first, second) = self.expect_measure(t, &qubits)?;
        if (qubits[&first].item, qubits[&second].item) != (Party::Alice, Party::Charlie) {
            return Err(unexpected(
                "a Bell measurement on (pair half, charlie's qubit)",
                Payload::Control(Control::Measure { first, second }),
            ));
        }
        let branch = bell_measure(&register, &mut schedule.substream(trial_index, StreamLabel::Device))?;
        let pre_correction_fidelity = fidelity(&branch.outcome.known_transform().apply(&psi), &branch.bob_state);
        self.send(Party::Alice, t, Payload::Control(Control::MeasureResult(branch.outcome.bits())))?;
        events.push(EventKind::Measure);

        let outcome = match self.recv(Party::Alice, t)? {
            Payload::TwoBits(o) => o,
            other => return Err(unexpected("two bits from alice", other)),
        };
        events.push(EventKind::Send);
        let bits_sent = self.relay_alice_to_bob(t, Payload::TwoBits(outcome))?;
        events.push(EventKind::Receive);

        let (system, code) = self.expect_correct(t, &qubits)?;
        let correction = correction_from_code(code)
            .ok_or_else(|| unexpected("a Pauli correction code", Payload::Control(Control::Correct { system, correction: code })))?;
        let final_state = correction.apply(&branch.bob_state);
        events.push(EventKind::Correct);
        self.send(Party::Bob, t, Payload::Control(Control::Ack))?;
        events.push(EventKind::Done);

        let record = QuantumTrialRecord {
            trial_index,
            psi,
            outcome,
            message_bits: outcome.bits(),
            bits_sent,
            correction,
            fidelity: fidelity(&psi, &final_state),
            pre_correction_fidelity,
            event_order: events,
        };
        if 1.0 - record.fidelity > EXACT_TOLERANCE {
            return Err(ProtocolError::FidelityDeficit(Box::new(record)));
        }
        Ok(record)
    }

    fn require(&self, protocol: ProtocolKind) -> Result<(), ProtocolError> {
        if self.protocol == protocol {
            Ok(())
        } else {
            Err(TransportError::Protocol(format!(
                "session negotiated {:?}, trial asked for {protocol:?}",
                self.protocol
            ))
            .into())
        }
    }

    /// Ends the session; each party exits after acknowledging.
    pub fn teardown(mut self) -> Result<(), TransportError> {
        for role in Party::ALL {
            self.send(role, 0, Payload::Control(Control::Teardown))?;
        }
        Ok(())
    }
}

fn unexpected(expected: &'static str, got: Payload) -> ProtocolError {
    ProtocolError::UnexpectedMessage {
        expected,
        got: format!("{got:?}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msg(payload: Payload) -> Message {
        Message::new(1, 0, payload)
    }

    #[test]
    fn alice_engine_sequence() {
        let mut alice = AliceEngine::new(ProtocolKind::Classical);
        assert_eq!(
            alice.on_message(&msg(Payload::BoxTransfer { box_id: 1, token: 9 })).unwrap(),
            EngineStep::Reply(vec![])
        );
        assert_eq!(
            alice.on_message(&msg(Payload::BoxTransfer { box_id: 3, token: 8 })).unwrap(),
            EngineStep::Reply(vec![Payload::Control(Control::Measure { first: 1, second: 3 })])
        );
        assert_eq!(
            alice.on_message(&msg(Payload::Control(Control::MeasureResult(1)))).unwrap(),
            EngineStep::Reply(vec![Payload::ClassicalBit(ClassicalOutcome::Different)])
        );
        // Result before any systems arrive is a violation.
        assert!(alice.on_message(&msg(Payload::Control(Control::MeasureResult(0)))).is_err());
    }

    #[test]
    fn alice_engine_quantum_sends_two_bits() {
        let mut alice = AliceEngine::new(ProtocolKind::Quantum);
        alice.on_message(&msg(Payload::BoxTransfer { box_id: 1, token: 0 })).unwrap();
        alice.on_message(&msg(Payload::BoxTransfer { box_id: 2, token: 0 })).unwrap();
        assert_eq!(
            alice.on_message(&msg(Payload::Control(Control::MeasureResult(3)))).unwrap(),
            EngineStep::Reply(vec![Payload::TwoBits(BellOutcome::PsiMinus)])
        );
    }

    #[test]
    fn bob_engine_corrections() {
        let mut bob = BobEngine::new();
        assert!(bob.on_message(&msg(Payload::ClassicalBit(ClassicalOutcome::Same))).is_err());
        bob.on_message(&msg(Payload::BoxTransfer { box_id: 2, token: 0 })).unwrap();
        assert_eq!(
            bob.on_message(&msg(Payload::ClassicalBit(ClassicalOutcome::Different))).unwrap(),
            EngineStep::Reply(vec![Payload::Control(Control::Correct { system: 2, correction: 1 })])
        );
        bob.on_message(&msg(Payload::Control(Control::Ack))).unwrap();
        bob.on_message(&msg(Payload::BoxTransfer { box_id: 5, token: 0 })).unwrap();
        assert_eq!(
            bob.on_message(&msg(Payload::TwoBits(BellOutcome::PhiMinus))).unwrap(),
            EngineStep::Reply(vec![Payload::Control(Control::Correct { system: 5, correction: 2 })])
        );
        assert_eq!(bob.on_message(&msg(Payload::Control(Control::Teardown))).unwrap(), EngineStep::Finished);
    }

    #[test]
    fn charlie_engine_relays() {
        let req = StateRequest::Classical {
            x: 0.3,
            mode: PreparationMode::Direct,
        };
        let mut charlie = CharlieEngine;
        assert_eq!(
            charlie.on_message(&msg(Payload::Control(Control::BeginTrial(req)))).unwrap(),
            EngineStep::Reply(vec![Payload::Control(Control::Prepare(req))])
        );
        assert!(charlie.on_message(&msg(Payload::ClassicalBit(ClassicalOutcome::Same))).is_err());
    }

    #[test]
    fn tokens_do_not_repeat() {
        let tokens: std::collections::HashSet<u64> = (1..1000).map(|h| handle_token(42, h)).collect();
        assert_eq!(tokens.len(), 999);
    }
}
