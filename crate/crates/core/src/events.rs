//! Logical event log shared by both protocols.

use serde::{Deserialize, Serialize};

/// Steps of a single trial, in the order they are logged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// The shared pair is prepared by the source.
    PreparePair,
    /// The two halves reach Alice and Bob.
    Distribute,
    /// Charlie prepares the state to be teleported.
    PrepareState,
    /// Charlie hands his system to Alice.
    Handover,
    /// Alice's joint measurement completes.
    Measure,
    /// Alice puts her message on the channel.
    Send,
    /// Bob takes the message off the channel.
    Receive,
    /// Bob applies his correction.
    Correct,
    Done,
}

/// The full event sequence of an undisturbed trial.
pub const TRIAL_EVENTS: [EventKind; 9] = [
    EventKind::PreparePair,
    EventKind::Distribute,
    EventKind::PrepareState,
    EventKind::Handover,
    EventKind::Measure,
    EventKind::Send,
    EventKind::Receive,
    EventKind::Correct,
    EventKind::Done,
];

/// True when `measure < send < correct` holds in the log, each event
/// appearing exactly once.
pub fn measure_send_correct_ordered(events: &[EventKind]) -> bool {
    let position = |kind: EventKind| {
        let mut hits = events.iter().enumerate().filter(|(_, e)| **e == kind);
        match (hits.next(), hits.next()) {
            (Some((i, _)), None) => Some(i),
            _ => None,
        }
    };
    match (
        position(EventKind::Measure),
        position(EventKind::Send),
        position(EventKind::Correct),
    ) {
        (Some(m), Some(s), Some(c)) => m < s && s < c,
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_check() {
        assert!(measure_send_correct_ordered(&TRIAL_EVENTS));
        let swapped = [EventKind::Send, EventKind::Measure, EventKind::Correct];
        assert!(!measure_send_correct_ordered(&swapped));
        let doubled = [
            EventKind::Measure,
            EventKind::Send,
            EventKind::Send,
            EventKind::Correct,
        ];
        assert!(!measure_send_correct_ordered(&doubled));
        assert!(!measure_send_correct_ordered(&[EventKind::Measure, EventKind::Send]));
    }
}
