//! In-process message bus.
//!
//! Each party has a mailbox. Messages are encoded to frames on `send` and
//! decoded on `recv`, so the bus exercises the same codec as the TCP link and
//! counts the same wire bytes.

use std::collections::{BTreeMap, VecDeque};
use std::sync::{Arc, Condvar, Mutex};

use super::message::{decode, Message};
use super::{LinkStats, TransportError};
use crate::party::Party;

#[derive(Default)]
struct MailboxState {
    frames: VecDeque<(Party, Vec<u8>)>,
    closed: bool,
}

#[derive(Default)]
struct Mailbox {
    state: Mutex<MailboxState>,
    ready: Condvar,
}

struct BusInner {
    mailboxes: BTreeMap<Party, Mailbox>,
    stats: Mutex<BTreeMap<(Party, Party), LinkStats>>,
}

/// A reliable FIFO bus connecting Alice, Bob and Charlie.
#[derive(Clone)]
pub struct InProcessBus {
    inner: Arc<BusInner>,
}

impl Default for InProcessBus {
    fn default() -> Self {
        Self::new()
    }
}

impl InProcessBus {
    pub fn new() -> Self {
        InProcessBus {
            inner: Arc::new(BusInner {
                mailboxes: Party::ALL.iter().map(|p| (*p, Mailbox::default())).collect(),
                stats: Mutex::new(BTreeMap::new()),
            }),
        }
    }

    pub fn endpoint(&self, party: Party) -> Endpoint {
        Endpoint {
            party,
            inner: Arc::clone(&self.inner),
        }
    }

    /// Closes every mailbox. Pending frames can still be received; after
    /// that `recv` fails with [`TransportError::Closed`].
    pub fn close(&self) {
        for mailbox in self.inner.mailboxes.values() {
            mailbox.state.lock().expect("mailbox lock").closed = true;
            mailbox.ready.notify_all();
        }
    }

    /// Traffic counters for the directed link `from → to`.
    pub fn stats(&self, from: Party, to: Party) -> LinkStats {
        self.inner
            .stats
            .lock()
            .expect("stats lock")
            .get(&(from, to))
            .copied()
            .unwrap_or_default()
    }
}

/// One party's handle on the bus.
#[derive(Clone)]
pub struct Endpoint {
    party: Party,
    inner: Arc<BusInner>,
}

impl Endpoint {
    pub fn party(&self) -> Party {
        self.party
    }

    pub fn send(&self, to: Party, msg: &Message) -> Result<(), TransportError> {
        let frame = msg.encode();
        let bits = msg.information_bits() as u64;
        self.push(to, frame, bits)
    }

    /// Enqueues an already encoded frame as-is.
    pub fn send_raw(&self, to: Party, frame: Vec<u8>) -> Result<(), TransportError> {
        let bits = decode(&frame).map(|(m, _)| m.information_bits() as u64).unwrap_or(0);
        self.push(to, frame, bits)
    }

    fn push(&self, to: Party, frame: Vec<u8>, bits: u64) -> Result<(), TransportError> {
        if to == self.party {
            return Err(TransportError::SelfAddressed(to));
        }
        let mailbox = &self.inner.mailboxes[&to];
        let len = frame.len() as u64;
        {
            let mut state = mailbox.state.lock().expect("mailbox lock");
            if state.closed {
                return Err(TransportError::Closed);
            }
            state.frames.push_back((self.party, frame));
        }
        mailbox.ready.notify_one();
        let mut stats = self.inner.stats.lock().expect("stats lock");
        stats.entry((self.party, to)).or_default().record(len, bits);
        Ok(())
    }

    /// Blocks until a frame for this party arrives and decodes it.
    pub fn recv(&self) -> Result<(Party, Message), TransportError> {
        let mailbox = &self.inner.mailboxes[&self.party];
        let (from, frame) = {
            let mut state = mailbox.state.lock().expect("mailbox lock");
            loop {
                if let Some(item) = state.frames.pop_front() {
                    break item;
                }
                if state.closed {
                    return Err(TransportError::Closed);
                }
                state = mailbox.ready.wait(state).expect("mailbox lock");
            }
        };
        let (msg, used) = decode(&frame)?;
        if used != frame.len() {
            return Err(TransportError::Protocol(format!(
                "{} stray bytes after frame from {from}",
                frame.len() - used
            )));
        }
        Ok((from, msg))
    }
}

/// The Alice→Bob channel used by an in-process trial.
pub struct TrialLink {
    pub session_id: u64,
    pub alice: Endpoint,
    pub bob: Endpoint,
    bus: InProcessBus,
}

impl TrialLink {
    pub fn new(session_id: u64) -> Self {
        let bus = InProcessBus::new();
        TrialLink {
            session_id,
            alice: bus.endpoint(Party::Alice),
            bob: bus.endpoint(Party::Bob),
            bus,
        }
    }

    pub fn bus(&self) -> &InProcessBus {
        &self.bus
    }
}
