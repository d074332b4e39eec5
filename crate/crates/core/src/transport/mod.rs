//! Message passing between Alice, Bob and Charlie.
//!
//! [`inproc`] is a mailbox bus for single-process runs, [`tcp`] a framed TCP
//! link, and [`session`] runs the three-party protocol over TCP with a
//! coordinator that owns the physical systems. Both transports share the
//! frame codec in [`message`].

pub mod golden;
pub mod inproc;
pub mod message;
pub mod session;
pub mod tcp;

use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use inproc::{Endpoint, InProcessBus, TrialLink};
pub use message::{Control, FrameError, Message, Payload, ProtocolKind, RejectCode, StateRequest};
pub use session::{serve_party, Coordinator, LocalParties, PartyEndpoints, ServeSummary};
pub use tcp::TcpLink;

use crate::party::{Party, UnknownParty};
use message::ReadFrameError;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("channel closed")]
    Closed,
    #[error("frame decode failed: {0}")]
    Frame(#[from] FrameError),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("{0} cannot send to itself")]
    SelfAddressed(Party),
    #[error(transparent)]
    UnknownParty(#[from] UnknownParty),
    #[error("handshake rejected with code 0x{code:02x} ({0:?})", code = .0.code())]
    Rejected(RejectCode),
    #[error("role {0} registered twice")]
    DuplicateRole(Party),
    #[error("endpoint answered as {got}, expected {expected}")]
    RoleMismatch { expected: Party, got: Party },
    #[error("protocol violation: {0}")]
    Protocol(String),
}

impl From<ReadFrameError> for TransportError {
    fn from(e: ReadFrameError) -> Self {
        match e {
            ReadFrameError::Closed => TransportError::Closed,
            ReadFrameError::Frame(f) => TransportError::Frame(f),
            ReadFrameError::Io(io) if io.kind() == io::ErrorKind::UnexpectedEof => TransportError::Closed,
            ReadFrameError::Io(io) => TransportError::Io(io),
        }
    }
}

/// Traffic on one directed link. Information bits count only the semantic
/// payload of classical-bit and two-bit messages; framing shows up in
/// `wire_bytes`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkStats {
    pub frames: u64,
    pub wire_bytes: u64,
    pub information_bits: u64,
}

impl LinkStats {
    pub fn record(&mut self, wire_bytes: u64, information_bits: u64) {
        self.frames += 1;
        self.wire_bytes += wire_bytes;
        self.information_bits += information_bits;
    }
}

/// A point-to-point, reliable, ordered frame channel.
pub trait Channel {
    fn send_message(&mut self, msg: &Message) -> Result<(), TransportError>;
    /// Writes an encoded frame without validating it.
    fn send_frame(&mut self, frame: &[u8]) -> Result<(), TransportError>;
    fn recv_message(&mut self) -> Result<Message, TransportError>;
}

/// A bus endpoint bound to a single peer.
pub struct PeerLink {
    pub endpoint: Endpoint,
    pub peer: Party,
}

impl Channel for PeerLink {
    fn send_message(&mut self, msg: &Message) -> Result<(), TransportError> {
        self.endpoint.send(self.peer, msg)
    }

    fn send_frame(&mut self, frame: &[u8]) -> Result<(), TransportError> {
        self.endpoint.send_raw(self.peer, frame.to_vec())
    }

    fn recv_message(&mut self) -> Result<Message, TransportError> {
        let (from, msg) = self.endpoint.recv()?;
        if from != self.peer {
            return Err(TransportError::Protocol(format!(
                "expected a frame from {}, got one from {from}",
                self.peer
            )));
        }
        Ok(msg)
    }
}
