use ctel_core::classical_protocol::ClassicalOutcome;
use ctel_core::rng::{SeedSchedule, StreamLabel};
use ctel_core::transport::golden::{corrupt_frames, golden_frames};
use ctel_core::transport::message::{decode, read_frame};
use ctel_core::transport::{Message, Payload};
use ctel_core::verification::random_message;
use proptest::prelude::*;

const HEADER_LEN: usize = 20;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn encode_then_decode_is_identity(seed in any::<u64>(), index in any::<u64>()) {
        let msg = random_message(&mut SeedSchedule::new(seed).substream(index, StreamLabel::Harness));
        let bytes = msg.encode();
        let (back, used) = decode(&bytes).unwrap();
        prop_assert_eq!(used, bytes.len());
        prop_assert_eq!(back, msg);
    }

    #[test]
    fn header_fields_sit_at_fixed_offsets(seed in any::<u64>()) {
        let msg = random_message(&mut SeedSchedule::new(seed).substream(0, StreamLabel::Harness));
        let bytes = msg.encode();
        prop_assert_eq!(&bytes[..4], b"CTEL");
        prop_assert_eq!(bytes[4], 0x01);
        prop_assert_eq!(bytes[5], msg.msg_type());
        prop_assert_eq!(u64::from_be_bytes(bytes[6..14].try_into().unwrap()), msg.session_id);
        prop_assert_eq!(u32::from_be_bytes(bytes[14..18].try_into().unwrap()), msg.trial_index);
        let len = u16::from_be_bytes(bytes[18..20].try_into().unwrap()) as usize;
        prop_assert_eq!(bytes.len(), HEADER_LEN + len);
    }

    #[test]
    fn arbitrary_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
        let _ = decode(&bytes);
    }

    #[test]
    fn every_truncation_is_rejected(seed in any::<u64>()) {
        let msg = random_message(&mut SeedSchedule::new(seed).substream(1, StreamLabel::Harness));
        let bytes = msg.encode();
        for cut in 0..bytes.len() {
            prop_assert!(decode(&bytes[..cut]).is_err(), "prefix of {} bytes decoded", cut);
        }
    }

    #[test]
    fn concatenated_frames_stream_back_in_order(seed in any::<u64>(), n in 1usize..20) {
        let schedule = SeedSchedule::new(seed);
        let msgs: Vec<_> = (0..n as u64).map(|i| random_message(&mut schedule.substream(i, StreamLabel::Harness))).collect();
        let stream: Vec<u8> = msgs.iter().flat_map(|m| m.encode()).collect();
        let mut cursor = std::io::Cursor::new(stream);
        for m in &msgs {
            prop_assert_eq!(&read_frame(&mut cursor).unwrap(), m);
        }
        prop_assert!(read_frame(&mut cursor).is_err());
    }
}

#[test]
fn golden_bytes_are_stable() {
    for g in golden_frames() {
        assert_eq!(g.message.encode(), g.bytes, "fixture {}", g.name);
        assert_eq!(decode(&g.bytes).unwrap().0, g.message, "fixture {}", g.name);
    }
}

#[test]
fn classical_bit_frame_by_hand() {
    // A Same outcome (bit 0) for session 1, trial 2, written out byte by byte.
    let expected: Vec<u8> = [
        b"CTEL".as_slice(),
        &[0x01, 0x01],
        &1u64.to_be_bytes(),
        &2u32.to_be_bytes(),
        &1u16.to_be_bytes(),
        &[0x00],
    ]
    .concat();
    let msg = Message::new(1, 2, Payload::ClassicalBit(ClassicalOutcome::Same));
    assert_eq!(msg.encode(), expected);
    assert_eq!(msg.information_bits(), 1);
}

#[test]
fn corrupt_fixtures_fail_as_documented() {
    for c in corrupt_frames() {
        let err = decode(&c.bytes).expect_err(c.name);
        assert!(c.expected.matches(&err), "{}: got {err:?}, expected {:?}", c.name, c.expected);
    }
}
