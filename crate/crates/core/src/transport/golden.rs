//! Golden frame fixtures, written out byte by byte rather than produced by
//! the encoder, plus corrupted frames and the decode error each must raise.

use super::message::{Control, FrameError, Message, Payload, ProtocolKind, RejectCode};
use crate::classical_protocol::ClassicalOutcome;
use crate::party::Party;
use crate::quantum_protocol::BellOutcome;

pub struct GoldenFrame {
    pub name: &'static str,
    pub message: Message,
    pub bytes: Vec<u8>,
}

#[rustfmt::skip]
pub fn golden_frames() -> Vec<GoldenFrame> {
    vec![
        GoldenFrame {
            name: "classical_bit_same",
            message: Message::new(0x0102_0304_0506_0708, 42, Payload::ClassicalBit(ClassicalOutcome::Same)),
            bytes: vec![
                0x43, 0x54, 0x45, 0x4c, 0x01, 0x01,
                0x01, 0x02, 0x03, 0x04, 0x05, 0x06, 0x07, 0x08,
                0x00, 0x00, 0x00, 0x2a,
                0x00, 0x01,
                0x00,
            ],
        },
        GoldenFrame {
            name: "classical_bit_different",
            message: Message::new(1, 0, Payload::ClassicalBit(ClassicalOutcome::Different)),
            bytes: vec![
                0x43, 0x54, 0x45, 0x4c, 0x01, 0x01,
                0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x01,
                0x00, 0x00, 0x00, 0x00,
                0x00, 0x01,
                0x01,
            ],
        },
        GoldenFrame {
            name: "two_bits_phi_plus",
            message: Message::new(0xcafe, 7, Payload::TwoBits(BellOutcome::PhiPlus)),
            bytes: vec![
                0x43, 0x54, 0x45, 0x4c, 0x01, 0x02,
                0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0xca, 0xfe,
                0x00, 0x00, 0x00, 0x07,
                0x00, 0x01,
                0x00,
            ],
        },
        GoldenFrame {
            name: "two_bits_psi_plus",
            message: Message::new(0xcafe, 7, Payload::TwoBits(BellOutcome::PsiPlus)),
            bytes: vec![
                0x43, 0x54, 0x45, 0x4c, 0x01, 0x02,
                0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0xca, 0xfe,
                0x00, 0x00, 0x00, 0x07,
                0x00, 0x01,
                0x01,
            ],
        },
        GoldenFrame {
            name: "two_bits_phi_minus",
            message: Message::new(0xcafe, 7, Payload::TwoBits(BellOutcome::PhiMinus)),
            bytes: vec![
                0x43, 0x54, 0x45, 0x4c, 0x01, 0x02,
                0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0xca, 0xfe,
                0x00, 0x00, 0x00, 0x07,
                0x00, 0x01,
                0x02,
            ],
        },
        GoldenFrame {
            name: "two_bits_psi_minus",
            message: Message::new(0xcafe, 7, Payload::TwoBits(BellOutcome::PsiMinus)),
            bytes: vec![
                0x43, 0x54, 0x45, 0x4c, 0x01, 0x02,
                0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0xca, 0xfe,
                0x00, 0x00, 0x00, 0x07,
                0x00, 0x01,
                0x03,
            ],
        },
        GoldenFrame {
            name: "box_transfer",
            message: Message::new(9, 1, Payload::BoxTransfer { box_id: 5, token: 0x1122_3344_5566_7788 }),
            bytes: vec![
                0x43, 0x54, 0x45, 0x4c, 0x01, 0x03,
                0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x09,
                0x00, 0x00, 0x00, 0x01,
                0x00, 0x10,
                0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x05,
                0x11, 0x22, 0x33, 0x44, 0x55, 0x66, 0x77, 0x88,
            ],
        },
        GoldenFrame {
            name: "hello_alice_classical",
            message: Message::new(0, 0, Payload::Control(Control::Hello { role: Party::Alice, protocol: ProtocolKind::Classical })),
            bytes: vec![
                0x43, 0x54, 0x45, 0x4c, 0x01, 0x04,
                0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
                0x00, 0x00, 0x00, 0x00,
                0x00, 0x03,
                0x01, 0x01, 0x00,
            ],
        },
        GoldenFrame {
            name: "reject_version_mismatch",
            message: Message::new(0, 0, Payload::Control(Control::Reject(RejectCode::VersionMismatch))),
            bytes: vec![
                0x43, 0x54, 0x45, 0x4c, 0x01, 0x04,
                0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
                0x00, 0x00, 0x00, 0x00,
                0x00, 0x02,
                0x03, 0x01,
            ],
        },
        GoldenFrame {
            name: "correct_rotate",
            message: Message::new(2, 3, Payload::Control(Control::Correct { system: 3, correction: 1 })),
            bytes: vec![
                0x43, 0x54, 0x45, 0x4c, 0x01, 0x04,
                0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x02,
                0x00, 0x00, 0x00, 0x03,
                0x00, 0x0a,
                0x08, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x03, 0x01,
            ],
        },
        GoldenFrame {
            name: "teardown",
            message: Message::new(2, 0, Payload::Control(Control::Teardown)),
            bytes: vec![
                0x43, 0x54, 0x45, 0x4c, 0x01, 0x04,
                0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x02,
                0x00, 0x00, 0x00, 0x00,
                0x00, 0x01,
                0x0a,
            ],
        },
    ]
}

/// The error a corrupted fixture must produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpectedFailure {
    BadMagic { offset: usize },
    UnsupportedVersion(u8),
    UnknownMessageType(u8),
    ShortRead { expected: usize, got: usize },
    BadPayload { kind: &'static str },
}

impl ExpectedFailure {
    pub fn matches(&self, err: &FrameError) -> bool {
        match (*self, err) {
            (ExpectedFailure::BadMagic { offset }, FrameError::BadMagic { offset: o, .. }) => offset == *o,
            (ExpectedFailure::UnsupportedVersion(v), FrameError::UnsupportedVersion(got)) => v == *got,
            (ExpectedFailure::UnknownMessageType(t), FrameError::UnknownMessageType(got)) => t == *got,
            (
                ExpectedFailure::ShortRead { expected, got },
                FrameError::ShortRead { expected: e, got: g },
            ) => expected == *e && got == *g,
            (ExpectedFailure::BadPayload { kind }, FrameError::BadPayload { kind: k, .. }) => kind == *k,
            _ => false,
        }
    }
}

pub struct CorruptFrame {
    pub name: &'static str,
    pub bytes: Vec<u8>,
    pub expected: ExpectedFailure,
}

pub fn corrupt_frames() -> Vec<CorruptFrame> {
    let good = &golden_frames()[0].bytes;
    let with = |i: usize, b: u8| {
        let mut v = good.clone();
        v[i] = b;
        v
    };
    vec![
        CorruptFrame {
            name: "magic_offset_0",
            bytes: with(0, b'X'),
            expected: ExpectedFailure::BadMagic { offset: 0 },
        },
        CorruptFrame {
            name: "magic_offset_3",
            bytes: with(3, b'l'),
            expected: ExpectedFailure::BadMagic { offset: 3 },
        },
        CorruptFrame {
            name: "version_0x02",
            bytes: with(4, 0x02),
            expected: ExpectedFailure::UnsupportedVersion(0x02),
        },
        CorruptFrame {
            name: "unknown_type_0x09",
            bytes: with(5, 0x09),
            expected: ExpectedFailure::UnknownMessageType(0x09),
        },
        CorruptFrame {
            name: "short_header",
            bytes: good[..10].to_vec(),
            expected: ExpectedFailure::ShortRead { expected: 20, got: 10 },
        },
        CorruptFrame {
            name: "short_payload",
            bytes: golden_frames()[6].bytes[..24].to_vec(),
            expected: ExpectedFailure::ShortRead { expected: 36, got: 24 },
        },
        CorruptFrame {
            name: "classical_bit_unused_bits",
            bytes: with(20, 0x80),
            expected: ExpectedFailure::BadPayload { kind: "classical bit" },
        },
        CorruptFrame {
            name: "classical_bit_two_byte_payload",
            bytes: {
                let mut v = with(19, 0x02);
                v.push(0x00);
                v
            },
            expected: ExpectedFailure::BadPayload { kind: "classical bit" },
        },
    ]
}
