//! Classical teleportation of an epistemic coin state.
//!
//! 1. A pair of boxes in `|1/2⟩_HH + |1/2⟩_TT` goes to Alice and Bob.
//! 2. Charlie prepares a box in `|x⟩` and passes it to Alice.
//! 3. A trusted device rotates both of Alice's boxes by the same random
//!    number of half turns, opens them, and reports only "same" or
//!    "different".
//! 4. Alice sends that one bit to Bob.
//! 5. Bob rotates his box on "different" and does nothing on "same".
//!
//! Afterwards Bob's coin shows exactly the face Charlie's coin showed when he
//! selected it, so Charlie's description `|x⟩` now applies to Bob's box.
//!
//! Party-facing functions only ever see outcomes and sealed boxes. Hidden
//! faces are copied into the omniscient [`TrialRecord`] by [`run_trial`] for
//! verification.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::epistemic_state::{
    prepare_shared_half_by_rotation, prepare_state, ClassicalState, Face, PreparationMode, SealedBox,
    StateError,
};
use crate::error::{wire_trial_index, ProtocolError};
use crate::events::EventKind;
use crate::party::Party;
use crate::rng::{SeedSchedule, StreamLabel};
use crate::transport::{Endpoint, Message, Payload, TrialLink};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassicalOutcome {
    Same,
    Different,
}

impl ClassicalOutcome {
    /// Wire encoding: Same = 0, Different = 1.
    pub fn bit(self) -> u8 {
        match self {
            ClassicalOutcome::Same => 0,
            ClassicalOutcome::Different => 1,
        }
    }

    pub fn from_bit(bit: u8) -> Option<Self> {
        match bit {
            0 => Some(ClassicalOutcome::Same),
            1 => Some(ClassicalOutcome::Different),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BobCorrection {
    Identity,
    Rotate,
}

impl BobCorrection {
    pub fn for_outcome(outcome: ClassicalOutcome) -> Self {
        match outcome {
            ClassicalOutcome::Same => BobCorrection::Identity,
            ClassicalOutcome::Different => BobCorrection::Rotate,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            BobCorrection::Identity => 0,
            BobCorrection::Rotate => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(BobCorrection::Identity),
            1 => Some(BobCorrection::Rotate),
            _ => None,
        }
    }
}

/// What the measurement device saw. Kept inside the device; Alice only gets
/// the outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeviceReading {
    pub parity: bool,
    pub first: Face,
    pub second: Face,
}

/// The machine (or external protagonist) that performs Alice's joint
/// measurement.
#[derive(Debug, Default)]
pub struct MeasurementDevice {
    last: Option<DeviceReading>,
}

impl MeasurementDevice {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rotates both boxes by one common random parity, opens them and reports
    /// whether they show the same face.
    pub fn measure<R: Rng + ?Sized>(
        &mut self,
        first: &mut SealedBox,
        second: &mut SealedBox,
        rng: &mut R,
    ) -> Result<ClassicalOutcome, StateError> {
        for b in [&*first, &*second] {
            if !b.is_sealed() {
                return Err(StateError::AlreadyOpened(b.id()));
            }
        }
        let parity = rng.random::<bool>();
        if parity {
            first.rotate()?;
            second.rotate()?;
        }
        let a = first.open()?;
        let b = second.open()?;
        self.last = Some(DeviceReading {
            parity,
            first: a,
            second: b,
        });
        Ok(if a == b {
            ClassicalOutcome::Same
        } else {
            ClassicalOutcome::Different
        })
    }

    pub(crate) fn take_reading(&mut self) -> Option<DeviceReading> {
        self.last.take()
    }
}

/// Faces of Alice's two boxes after the device opened them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpenedFaces {
    pub pair: Face,
    pub charlie: Face,
}

/// Omniscient log of one classical trial. Fields prefixed `truth_` in the
/// serialized form are ground truth that no party ever sees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: u64,
    pub x: f64,
    #[serde(rename = "truth_charlie_face")]
    pub charlie_face_at_selection: Face,
    #[serde(rename = "outcome")]
    pub alice_outcome: ClassicalOutcome,
    /// The bit as Bob decoded it from the channel.
    pub message_bit: u8,
    pub bits_sent: u32,
    #[serde(rename = "correction")]
    pub bob_correction: BobCorrection,
    #[serde(rename = "truth_bob_face")]
    pub bob_final_face: Face,
    /// Bob's face captured at the measure event, before any message exists.
    #[serde(rename = "truth_bob_face_at_measure")]
    pub bob_face_at_measure: Face,
    #[serde(rename = "truth_alice_opened_faces")]
    pub alice_post_measurement_faces: OpenedFaces,
    pub event_order: Vec<EventKind>,
}

impl TrialRecord {
    /// Bob's final face equals the face Charlie selected.
    pub fn teleported(&self) -> bool {
        self.bob_final_face == self.charlie_face_at_selection
    }
}

/// Step 1: prepare `|1/2⟩_HH + |1/2⟩_TT` by common random rotation and hand
/// one box each to Alice and Bob. Transit does not touch the boxes.
pub fn step1_distribute<R: Rng + ?Sized>(rng: &mut R) -> (SealedBox, SealedBox) {
    prepare_shared_half_by_rotation(rng).into_boxes()
}

/// Step 2: Charlie selects a box in `|x⟩`. The state belongs to Charlie.
pub fn step2_charlie_prepare<R: Rng + ?Sized>(
    x: f64,
    mode: PreparationMode,
    rng: &mut R,
) -> Result<(SealedBox, ClassicalState), StateError> {
    prepare_state(x, mode, Party::Charlie, rng)
}

/// Step 3: Alice has the device measure her pair box together with
/// Charlie's box. Only the outcome comes back.
pub fn step3_alice_measure<R: Rng + ?Sized>(
    alice_box: &mut SealedBox,
    charlie_box: &mut SealedBox,
    device: &mut MeasurementDevice,
    rng: &mut R,
) -> Result<ClassicalOutcome, StateError> {
    device.measure(alice_box, charlie_box, rng)
}

/// Step 4: one bit from Alice to Bob.
pub fn step4_send_bit(
    outcome: ClassicalOutcome,
    alice: &Endpoint,
    session_id: u64,
    trial_index: u32,
) -> Result<(), ProtocolError> {
    let msg = Message::new(session_id, trial_index, Payload::ClassicalBit(outcome));
    alice.send(Party::Bob, &msg)?;
    Ok(())
}

/// Step 5: Bob leaves his box on "same" and turns it over on "different".
pub fn step5_bob_correct(
    mut bob_box: SealedBox,
    bit: ClassicalOutcome,
) -> Result<(SealedBox, BobCorrection), StateError> {
    if !bob_box.is_sealed() {
        return Err(StateError::AlreadyOpened(bob_box.id()));
    }
    let correction = BobCorrection::for_outcome(bit);
    if correction == BobCorrection::Rotate {
        bob_box.rotate()?;
    }
    Ok((bob_box, correction))
}

/// Runs steps 1–5 for trial `trial_index` and checks that Bob's coin ended
/// on Charlie's face.
///
/// Randomness comes from three substreams of `schedule`: the pair source,
/// Charlie's selection, and the measurement device.
pub fn run_trial(
    x: f64,
    mode: PreparationMode,
    link: &TrialLink,
    schedule: &SeedSchedule,
    trial_index: u64,
) -> Result<TrialRecord, ProtocolError> {
    let wire_index = wire_trial_index(trial_index)?;
    let mut events = Vec::with_capacity(crate::events::TRIAL_EVENTS.len());

    let (mut alice_box, bob_box) = step1_distribute(&mut schedule.substream(trial_index, StreamLabel::Source));
    events.push(EventKind::PreparePair);
    events.push(EventKind::Distribute);

    let (mut charlie_box, _charlie_state) =
        step2_charlie_prepare(x, mode, &mut schedule.substream(trial_index, StreamLabel::Charlie))?;
    let charlie_face = charlie_box.hidden_face();
    events.push(EventKind::PrepareState);
    events.push(EventKind::Handover);

    let mut device = MeasurementDevice::new();
    let outcome = step3_alice_measure(
        &mut alice_box,
        &mut charlie_box,
        &mut device,
        &mut schedule.substream(trial_index, StreamLabel::Device),
    )?;
    let reading = device.take_reading().expect("device just measured");
    let bob_face_at_measure = bob_box.hidden_face();
    events.push(EventKind::Measure);

    step4_send_bit(outcome, &link.alice, link.session_id, wire_index)?;
    events.push(EventKind::Send);

    let (_, msg) = link.bob.recv()?;
    let bits_sent = msg.information_bits();
    let bit = match msg.payload {
        Payload::ClassicalBit(bit) => bit,
        other => {
            return Err(ProtocolError::UnexpectedMessage {
                expected: "a classical bit",
                got: format!("{other:?}"),
            })
        }
    };
    events.push(EventKind::Receive);

    let (bob_box, correction) = step5_bob_correct(bob_box, bit)?;
    events.push(EventKind::Correct);
    events.push(EventKind::Done);

    let record = TrialRecord {
        trial_index,
        x,
        charlie_face_at_selection: charlie_face,
        alice_outcome: outcome,
        message_bit: bit.bit(),
        bits_sent,
        bob_correction: correction,
        bob_final_face: bob_box.hidden_face(),
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::TRIAL_EVENTS;

    #[test]
    fn outcome_bits() {
        assert_eq!(ClassicalOutcome::Same.bit(), 0);
        assert_eq!(ClassicalOutcome::Different.bit(), 1);
        assert_eq!(ClassicalOutcome::from_bit(2), None);
        assert_eq!(BobCorrection::for_outcome(ClassicalOutcome::Same), BobCorrection::Identity);
        assert_eq!(BobCorrection::for_outcome(ClassicalOutcome::Different), BobCorrection::Rotate);
    }

    /// A device whose parity is forced, for walking individual branches.
    struct FixedBit(bool);
    impl rand::RngCore for FixedBit {
        fn next_u32(&mut self) -> u32 {
            self.next_u64() as u32
        }
        fn next_u64(&mut self) -> u64 {
            // `random::<bool>()` tests the sign bit of a u32.
            if self.0 {
                u64::MAX
            } else {
                0
            }
        }
        fn fill_bytes(&mut self, dst: &mut [u8]) {
            dst.fill(if self.0 { 0xff } else { 0 });
        }
    }

    #[test]
    fn fixed_bit_drives_parity() {
        use rand::Rng;
        assert!(FixedBit(true).random::<bool>());
        assert!(!FixedBit(false).random::<bool>());
    }

    #[test]
    fn common_rotation_preserves_sameness() {
        for parity in [false, true] {
            let mut a = SealedBox::seal(Face::Heads);
            let mut c = SealedBox::seal(Face::Heads);
            let mut device = MeasurementDevice::new();
            let o = step3_alice_measure(&mut a, &mut c, &mut device, &mut FixedBit(parity)).unwrap();
            assert_eq!(o, ClassicalOutcome::Same);
            assert!(!a.is_sealed() && !c.is_sealed());
            assert_eq!(device.take_reading().unwrap().parity, parity);
        }
    }

    #[test]
    fn measuring_opened_box_fails() {
        let mut a = SealedBox::seal(Face::Heads);
        let mut c = SealedBox::seal(Face::Tails);
        c.open().unwrap();
        let err = step3_alice_measure(&mut a, &mut c, &mut MeasurementDevice::new(), &mut FixedBit(true));
        assert!(matches!(err, Err(StateError::AlreadyOpened(_))));
        assert!(a.is_sealed(), "the sealed box is left untouched");
    }

    #[test]
    fn bob_correction_cases() {
        let (mut b, c) = step5_bob_correct(SealedBox::seal(Face::Heads), ClassicalOutcome::Same).unwrap();
        assert_eq!((b.open().unwrap(), c), (Face::Heads, BobCorrection::Identity));
        let (mut b, c) = step5_bob_correct(SealedBox::seal(Face::Heads), ClassicalOutcome::Different).unwrap();
        assert_eq!((b.open().unwrap(), c), (Face::Tails, BobCorrection::Rotate));
        let mut opened = SealedBox::seal(Face::Tails);
        opened.open().unwrap();
        assert!(step5_bob_correct(opened, ClassicalOutcome::Same).is_err());
    }

    /// Exhaustive walk over Charlie's face, the pair face and the device
    /// parity using the real step functions.
    #[test]
    fn all_eight_branches_teleport() {
        for charlie in [Face::Heads, Face::Tails] {
            for pair in [Face::Heads, Face::Tails] {
                for parity in [false, true] {
                    let mut alice_box = SealedBox::seal(pair);
                    let bob_box = SealedBox::seal(pair);
                    let mut charlie_box = SealedBox::seal(charlie);
                    let outcome = step3_alice_measure(
                        &mut alice_box,
                        &mut charlie_box,
                        &mut MeasurementDevice::new(),
                        &mut FixedBit(parity),
                    )
                    .unwrap();
                    assert_eq!(outcome == ClassicalOutcome::Same, charlie == pair);
                    let (bob_box, _) = step5_bob_correct(bob_box, outcome).unwrap();
                    assert_eq!(bob_box.hidden_face(), charlie, "{charlie:?} {pair:?} {parity}");
                }
            }
        }
    }

    #[test]
    fn run_trial_logs_full_event_sequence() {
        let link = TrialLink::new(11);
        let schedule = SeedSchedule::new(3);
        for t in 0..200 {
            let r = run_trial(0.3, PreparationMode::Direct, &link, &schedule, t).unwrap();
            assert_eq!(r.event_order, TRIAL_EVENTS);
            assert_eq!(r.bits_sent, 1);
            assert!(r.teleported());
            assert_eq!(r.bob_correction == BobCorrection::Identity, r.alice_outcome == ClassicalOutcome::Same);
            assert_eq!(r.message_bit, r.alice_outcome.bit());
        }
        let s = link.bus().stats(Party::Alice, Party::Bob);
        assert_eq!((s.frames, s.information_bits, s.wire_bytes), (200, 200, 200 * 21));
    }

    #[test]
    fn run_trial_is_reproducible() {
        let schedule = SeedSchedule::new(99);
        let a = run_trial(0.5, PreparationMode::Ensemble, &TrialLink::new(1), &schedule, 17).unwrap();
        let b = run_trial(0.5, PreparationMode::Ensemble, &TrialLink::new(1), &schedule, 17).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn run_trial_rejects_bad_inputs() {
        let link = TrialLink::new(0);
        let s = SeedSchedule::new(0);
        assert!(matches!(
            run_trial(1.2, PreparationMode::Direct, &link, &s, 0),
            Err(ProtocolError::State(StateError::ProbabilityOutOfRange(_)))
        ));
        assert!(matches!(
            run_trial(0.5, PreparationMode::Direct, &link, &s, u64::from(u32::MAX) + 1),
            Err(ProtocolError::TrialIndexOverflow(_))
        ));
    }
}
