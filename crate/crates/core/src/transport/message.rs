//! Messages and their binary frame encoding.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "CTEL"
//!      4     1  version (0x01)
//!      5     1  message type
//!      6     8  session id, big-endian
//!     14     4  trial index, big-endian
//!     18     2  payload length, big-endian
//!     20     n  payload
//! ```
//!
//! Message types: `0x01` classical bit, `0x02` two bits, `0x03` box transfer,
//! `0x04` control. A classical bit is one payload byte `0x00` (same) or
//! `0x01` (different); two bits are one byte `x | z << 1`. A box transfer
//! carries only an id and a token, never the face.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classical_protocol::ClassicalOutcome;
use crate::epistemic_state::PreparationMode;
use crate::party::Party;
use crate::quantum_protocol::{BellOutcome, Correction};

pub const MAGIC: [u8; 4] = *b"CTEL";
pub const VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("bad magic byte 0x{found:02x} at offset {offset}")]
    BadMagic { offset: usize, found: u8 },
    #[error("unsupported protocol version 0x{0:02x}")]
    UnsupportedVersion(u8),
    #[error("unknown message type 0x{0:02x}")]
    UnknownMessageType(u8),
    #[error("short read: needed {expected} bytes, got {got}")]
    ShortRead { expected: usize, got: usize },
    #[error("malformed {kind} payload: {reason}")]
    BadPayload { kind: &'static str, reason: String },
    #[error("payload of {0} bytes exceeds the 16-bit length field")]
    PayloadTooLong(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolKind {
    Classical,
    Quantum,
}

impl ProtocolKind {
    fn code(self) -> u8 {
        match self {
            ProtocolKind::Classical => 0,
            ProtocolKind::Quantum => 1,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ProtocolKind::Classical),
            1 => Some(ProtocolKind::Quantum),
            _ => None,
        }
    }
}

/// Handshake rejection reasons.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectCode {
    VersionMismatch,
    RoleConflict,
    Busy,
    ProtocolViolation,
}

impl RejectCode {
    pub fn code(self) -> u8 {
        match self {
            RejectCode::VersionMismatch => 0x01,
            RejectCode::RoleConflict => 0x02,
            RejectCode::Busy => 0x03,
            RejectCode::ProtocolViolation => 0x04,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0x01 => Some(RejectCode::VersionMismatch),
            0x02 => Some(RejectCode::RoleConflict),
            0x03 => Some(RejectCode::Busy),
            0x04 => Some(RejectCode::ProtocolViolation),
            _ => None,
        }
    }
}

/// What Charlie is asked to prepare.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StateRequest {
    Classical { x: f64, mode: PreparationMode },
    /// Haar-random state drawn from Charlie's substream.
    QuantumRandom,
    /// Explicit amplitudes `(re α, im α, re β, im β)`, already normalized.
    QuantumGiven([f64; 4]),
}

impl StateRequest {
    pub fn protocol(&self) -> ProtocolKind {
        match self {
            StateRequest::Classical { .. } => ProtocolKind::Classical,
            _ => ProtocolKind::Quantum,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Control {
    Hello { role: Party, protocol: ProtocolKind },
    Welcome { role: Party },
    Reject(RejectCode),
    /// Coordinator asks Charlie to start a trial.
    BeginTrial(StateRequest),
    /// Charlie asks the world to prepare a system.
    Prepare(StateRequest),
    /// Alice asks the measurement device to measure two systems jointly.
    Measure { first: u64, second: u64 },
    /// The device's reply: outcome code, as it will be sent on to Bob.
    MeasureResult(u8),
    /// Bob asks the world to apply a correction (wire code of the correction).
    Correct { system: u64, correction: u8 },
    Ack,
    Teardown,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    ClassicalBit(ClassicalOutcome),
    TwoBits(BellOutcome),
    BoxTransfer { box_id: u64, token: u64 },
    Control(Control),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub session_id: u64,
    pub trial_index: u32,
    pub payload: Payload,
}

impl Message {
    pub fn new(session_id: u64, trial_index: u32, payload: Payload) -> Self {
        Message {
            session_id,
            trial_index,
            payload,
        }
    }

    pub fn msg_type(&self) -> u8 {
        match self.payload {
            Payload::ClassicalBit(_) => 0x01,
            Payload::TwoBits(_) => 0x02,
            Payload::BoxTransfer { .. } => 0x03,
            Payload::Control(_) => 0x04,
        }
    }

    /// Semantic information carried, excluding framing: 1 for a classical
    /// bit, 2 for two bits, 0 otherwise.
    pub fn information_bits(&self) -> u32 {
        match self.payload {
            Payload::ClassicalBit(_) => 1,
            Payload::TwoBits(_) => 2,
            _ => 0,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        encode_versioned(self, VERSION)
    }
}

/// Encodes with an arbitrary version byte. Only useful for exercising
/// version negotiation.
pub fn encode_versioned(msg: &Message, version: u8) -> Vec<u8> {
    let payload = encode_payload(&msg.payload);
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(&MAGIC);
    out.push(version);
    out.push(msg.msg_type());
    out.extend_from_slice(&msg.session_id.to_be_bytes());
    out.extend_from_slice(&msg.trial_index.to_be_bytes());
    let len = u16::try_from(payload.len()).expect("payloads are at most a few dozen bytes");
    out.extend_from_slice(&len.to_be_bytes());
    out.extend_from_slice(&payload);
    out
}

fn encode_payload(payload: &Payload) -> Vec<u8> {
    match payload {
        Payload::ClassicalBit(o) => vec![o.bit()],
        Payload::TwoBits(o) => vec![o.bits()],
        Payload::BoxTransfer { box_id, token } => {
            let mut v = Vec::with_capacity(16);
            v.extend_from_slice(&box_id.to_be_bytes());
            v.extend_from_slice(&token.to_be_bytes());
            v
        }
        Payload::Control(c) => encode_control(c),
    }
}

fn encode_control(c: &Control) -> Vec<u8> {
    match c {
        Control::Hello { role, protocol } => vec![0x01, role.code(), protocol.code()],
        Control::Welcome { role } => vec![0x02, role.code()],
        Control::Reject(code) => vec![0x03, code.code()],
        Control::BeginTrial(req) => {
            let mut v = vec![0x04];
            encode_request(req, &mut v);
            v
        }
        Control::Prepare(req) => {
            let mut v = vec![0x05];
            encode_request(req, &mut v);
            v
        }
        Control::Measure { first, second } => {
            let mut v = vec![0x06];
            v.extend_from_slice(&first.to_be_bytes());
            v.extend_from_slice(&second.to_be_bytes());
            v
        }
        Control::MeasureResult(code) => vec![0x07, *code],
        Control::Correct { system, correction } => {
            let mut v = vec![0x08];
            v.extend_from_slice(&system.to_be_bytes());
            v.push(*correction);
            v
        }
        Control::Ack => vec![0x09],
        Control::Teardown => vec![0x0a],
    }
}

fn encode_request(req: &StateRequest, out: &mut Vec<u8>) {
    match req {
        StateRequest::Classical { x, mode } => {
            out.push(0x00);
            out.extend_from_slice(&x.to_bits().to_be_bytes());
            out.push(match mode {
                PreparationMode::Direct => 0,
                PreparationMode::Ensemble => 1,
            });
        }
        StateRequest::QuantumRandom => out.extend_from_slice(&[0x01, 0x00]),
        StateRequest::QuantumGiven(reals) => {
            out.extend_from_slice(&[0x01, 0x01]);
            for r in reals {
                out.extend_from_slice(&r.to_bits().to_be_bytes());
            }
        }
    }
}

fn bad(kind: &'static str, reason: impl Into<String>) -> FrameError {
    FrameError::BadPayload {
        kind,
        reason: reason.into(),
    }
}

struct Cursor<'a> {
    kind: &'static str,
    bytes: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FrameError> {
        if self.bytes.len() < n {
            return Err(bad(self.kind, format!("truncated, wanted {n} more bytes")));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8, FrameError> {
        Ok(self.take(1)?[0])
    }

    fn u64(&mut self) -> Result<u64, FrameError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, FrameError> {
        Ok(f64::from_bits(self.u64()?))
    }

    fn finish(self) -> Result<(), FrameError> {
        if self.bytes.is_empty() {
            Ok(())
        } else {
            Err(bad(self.kind, format!("{} trailing bytes", self.bytes.len())))
        }
    }
}

fn decode_payload(msg_type: u8, bytes: &[u8]) -> Result<Payload, FrameError> {
    match msg_type {
        0x01 => {
            let mut c = Cursor { kind: "classical bit", bytes };
            let b = c.u8()?;
            c.finish()?;
            ClassicalOutcome::from_bit(b)
                .map(Payload::ClassicalBit)
                .ok_or_else(|| bad("classical bit", format!("unused bits set in 0x{b:02x}")))
        }
        0x02 => {
            let mut c = Cursor { kind: "two bits", bytes };
            let b = c.u8()?;
            c.finish()?;
            BellOutcome::from_bits(b)
                .map(Payload::TwoBits)
                .ok_or_else(|| bad("two bits", format!("unused bits set in 0x{b:02x}")))
        }
        0x03 => {
            let mut c = Cursor { kind: "box transfer", bytes };
            let box_id = c.u64()?;
            let token = c.u64()?;
            c.finish()?;
            Ok(Payload::BoxTransfer { box_id, token })
        }
        0x04 => decode_control(bytes).map(Payload::Control),
        other => Err(FrameError::UnknownMessageType(other)),
    }
}

fn decode_control(bytes: &[u8]) -> Result<Control, FrameError> {
    const KIND: &str = "control";
    let mut c = Cursor { kind: KIND, bytes };
    let party = |code: u8| Party::from_code(code).ok_or_else(|| bad(KIND, format!("unknown role 0x{code:02x}")));
    let control = match c.u8()? {
        0x01 => {
            let role = party(c.u8()?)?;
            let p = c.u8()?;
            let protocol = ProtocolKind::from_code(p).ok_or_else(|| bad(KIND, format!("unknown protocol 0x{p:02x}")))?;
            Control::Hello { role, protocol }
        }
        0x02 => Control::Welcome { role: party(c.u8()?)? },
        0x03 => {
            let code = c.u8()?;
            Control::Reject(RejectCode::from_code(code).ok_or_else(|| bad(KIND, format!("unknown reject code 0x{code:02x}")))?)
        }
        0x04 => Control::BeginTrial(decode_request(&mut c)?),
        0x05 => Control::Prepare(decode_request(&mut c)?),
        0x06 => Control::Measure {
            first: c.u64()?,
            second: c.u64()?,
        },
        0x07 => Control::MeasureResult(c.u8()?),
        0x08 => Control::Correct {
            system: c.u64()?,
            correction: c.u8()?,
        },
        0x09 => Control::Ack,
        0x0a => Control::Teardown,
        other => return Err(bad(KIND, format!("unknown control code 0x{other:02x}"))),
    };
    c.finish()?;
    Ok(control)
}

fn decode_request(c: &mut Cursor<'_>) -> Result<StateRequest, FrameError> {
    match c.u8()? {
        0x00 => {
            let x = c.f64()?;
            let mode = match c.u8()? {
                0 => PreparationMode::Direct,
                1 => PreparationMode::Ensemble,
                m => return Err(bad("control", format!("unknown preparation mode {m}"))),
            };
            Ok(StateRequest::Classical { x, mode })
        }
        0x01 => match c.u8()? {
            0x00 => Ok(StateRequest::QuantumRandom),
            0x01 => Ok(StateRequest::QuantumGiven([c.f64()?, c.f64()?, c.f64()?, c.f64()?])),
            k => Err(bad("control", format!("unknown quantum state kind {k}"))),
        },
        p => Err(bad("control", format!("unknown protocol 0x{p:02x}"))),
    }
}

struct Header {
    version: u8,
    msg_type: u8,
    session_id: u64,
    trial_index: u32,
    payload_len: usize,
}

fn parse_header(bytes: &[u8; HEADER_LEN]) -> Result<Header, FrameError> {
    for (offset, (&found, &want)) in bytes.iter().zip(MAGIC.iter()).enumerate() {
        if found != want {
            return Err(FrameError::BadMagic { offset, found });
        }
    }
    Ok(Header {
        version: bytes[4],
        msg_type: bytes[5],
        session_id: u64::from_be_bytes(bytes[6..14].try_into().expect("8 bytes")),
        trial_index: u32::from_be_bytes(bytes[14..18].try_into().expect("4 bytes")),
        payload_len: u16::from_be_bytes([bytes[18], bytes[19]]) as usize,
    })
}

fn finish_frame(header: Header, payload: &[u8]) -> Result<Message, FrameError> {
    if header.version != VERSION {
        return Err(FrameError::UnsupportedVersion(header.version));
    }
    Ok(Message {
        session_id: header.session_id,
        trial_index: header.trial_index,
        payload: decode_payload(header.msg_type, payload)?,
    })
}

/// Decodes one frame from the front of `bytes`, returning the message and the
/// number of bytes consumed.
pub fn decode(bytes: &[u8]) -> Result<(Message, usize), FrameError> {
    if bytes.len() < HEADER_LEN {
        // Report a magic mismatch in a short buffer before its length.
        for (offset, (&found, &want)) in bytes.iter().zip(MAGIC.iter()).enumerate() {
            if found != want {
                return Err(FrameError::BadMagic { offset, found });
            }
        }
        return Err(FrameError::ShortRead {
            expected: HEADER_LEN,
            got: bytes.len(),
        });
    }
    let header = parse_header(bytes[..HEADER_LEN].try_into().expect("header length"))?;
    let total = HEADER_LEN + header.payload_len;
    if bytes.len() < total {
        return Err(FrameError::ShortRead {
            expected: total,
            got: bytes.len(),
        });
    }
    let msg = finish_frame(header, &bytes[HEADER_LEN..total])?;
    Ok((msg, total))
}

/// Reading a frame from a stream can fail on I/O or on content.
#[derive(Debug, Error)]
pub enum ReadFrameError {
    /// The stream ended cleanly before the first header byte.
    #[error("stream closed")]
    Closed,
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn read_full<R: Read>(reader: &mut R, buf: &mut [u8]) -> Result<usize, io::Error> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

/// Reads exactly one frame. The whole frame is consumed even when its version
/// is unsupported, so the caller can still answer on the same stream.
pub fn read_frame<R: Read>(reader: &mut R) -> Result<Message, ReadFrameError> {
    let mut header = [0u8; HEADER_LEN];
    let got = read_full(reader, &mut header)?;
    if got == 0 {
        return Err(ReadFrameError::Closed);
    }
    if got < HEADER_LEN {
        return Err(decode(&header[..got]).expect_err("short header cannot decode").into());
    }
    let parsed = parse_header(&header)?;
    let mut payload = vec![0u8; parsed.payload_len];
    let got = read_full(reader, &mut payload)?;
    if got < payload.len() {
        return Err(FrameError::ShortRead {
            expected: HEADER_LEN + payload.len(),
            got: HEADER_LEN + got,
        }
        .into());
    }
    Ok(finish_frame(parsed, &payload)?)
}

pub fn write_frame<W: Write>(writer: &mut W, msg: &Message) -> io::Result<usize> {
    let bytes = msg.encode();
    writer.write_all(&bytes)?;
    Ok(bytes.len())
}

/// Correction codes on the wire.
pub fn correction_code(c: Correction) -> u8 {
    match c {
        Correction::Identity => 0,
        Correction::FlipX => 1,
        Correction::PhaseZ => 2,
        Correction::FlipXPhaseZ => 3,
    }
}

pub fn correction_from_code(code: u8) -> Option<Correction> {
    match code {
        0 => Some(Correction::Identity),
        1 => Some(Correction::FlipX),
        2 => Some(Correction::PhaseZ),
        3 => Some(Correction::FlipXPhaseZ),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Message {
        Message::new(7, 3, Payload::ClassicalBit(ClassicalOutcome::Different))
    }

    #[test]
    fn decode_reports_consumed_length() {
        let mut bytes = sample().encode();
        bytes.extend_from_slice(&[0xde, 0xad]);
        let (msg, used) = decode(&bytes).unwrap();
        assert_eq!(msg, sample());
        assert_eq!(used, HEADER_LEN + 1);
    }

    #[test]
    fn unused_bits_rejected() {
        let mut bytes = sample().encode();
        bytes[HEADER_LEN] = 0x02;
        assert!(matches!(decode(&bytes), Err(FrameError::BadPayload { .. })));

        let mut two = Message::new(1, 1, Payload::TwoBits(BellOutcome::PsiMinus)).encode();
        assert_eq!(two[HEADER_LEN], 0x03);
        two[HEADER_LEN] = 0x04;
        assert!(matches!(decode(&two), Err(FrameError::BadPayload { .. })));
    }

    #[test]
    fn version_checked_after_header() {
        let bytes = encode_versioned(&sample(), 0x02);
        assert_eq!(decode(&bytes), Err(FrameError::UnsupportedVersion(0x02)));
        let mut reader = &bytes[..];
        assert!(matches!(
            read_frame(&mut reader),
            Err(ReadFrameError::Frame(FrameError::UnsupportedVersion(2)))
        ));
        assert!(reader.is_empty(), "frame fully consumed");
    }

    #[test]
    fn read_frame_distinguishes_clean_close() {
        let mut empty: &[u8] = &[];
        assert!(matches!(read_frame(&mut empty), Err(ReadFrameError::Closed)));
        let bytes = sample().encode();
        let mut cut = &bytes[..bytes.len() - 1];
        assert!(matches!(
            read_frame(&mut cut),
            Err(ReadFrameError::Frame(FrameError::ShortRead { expected: 21, got: 20 }))
        ));
    }

    #[test]
    fn correction_codes() {
        for code in 0..4 {
            assert_eq!(correction_code(correction_from_code(code).unwrap()), code);
        }
        assert_eq!(correction_from_code(4), None);
    }
}
