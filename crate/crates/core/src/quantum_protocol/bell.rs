//! Bell-basis measurement of Charlie's and Alice's qubits and Bob's Pauli
//! corrections.
//!
//! Outcome → correction table (a convention; any consistent table works):
//!
//! | outcome | bits (x, z) | correction |
//! |---------|-------------|------------|
//! | Φ+      | 0, 0        | identity   |
//! | Ψ+      | 1, 0        | X          |
//! | Φ−      | 0, 1        | Z          |
//! | Ψ−      | 1, 1        | X·Z        |
//!
//! On the wire the two bits are packed as `x | z << 1`.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::state::{PureState, RegisterState};
use super::QuantumError;
use crate::party::Party;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Below this a projection is treated as impossible.
const MIN_BRANCH_PROBABILITY: f64 = 1e-24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BellOutcome {
    PhiPlus,
    PhiMinus,
    PsiPlus,
    PsiMinus,
}

impl BellOutcome {
    pub const ALL: [BellOutcome; 4] = [
        BellOutcome::PhiPlus,
        BellOutcome::PhiMinus,
        BellOutcome::PsiPlus,
        BellOutcome::PsiMinus,
    ];

    /// Packed wire bits: bit 0 set when X is needed, bit 1 when Z is needed.
    pub fn bits(self) -> u8 {
        match self {
            BellOutcome::PhiPlus => 0b00,
            BellOutcome::PsiPlus => 0b01,
            BellOutcome::PhiMinus => 0b10,
            BellOutcome::PsiMinus => 0b11,
        }
    }

    pub fn from_bits(bits: u8) -> Option<Self> {
        match bits {
            0b00 => Some(BellOutcome::PhiPlus),
            0b01 => Some(BellOutcome::PsiPlus),
            0b10 => Some(BellOutcome::PhiMinus),
            0b11 => Some(BellOutcome::PsiMinus),
            _ => None,
        }
    }

    /// The Bell vector over (charlie, alice), index `c << 1 | a`.
    pub fn vector(self) -> [Complex64; 4] {
        let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        match self {
            BellOutcome::PhiPlus => [s, ZERO, ZERO, s],
            BellOutcome::PhiMinus => [s, ZERO, ZERO, -s],
            BellOutcome::PsiPlus => [ZERO, s, s, ZERO],
            BellOutcome::PsiMinus => [ZERO, s, -s, ZERO],
        }
    }

    /// The Pauli operator `U` for which Bob's qubit is `U|ψ⟩` (up to global
    /// phase) right after this outcome.
    pub fn known_transform(self) -> Correction {
        Correction::for_outcome(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correction {
    Identity,
    FlipX,
    PhaseZ,
    FlipXPhaseZ,
}

impl Correction {
    pub const ALL: [Correction; 4] = [
        Correction::Identity,
        Correction::FlipX,
        Correction::PhaseZ,
        Correction::FlipXPhaseZ,
    ];

    pub fn for_outcome(outcome: BellOutcome) -> Self {
        match outcome {
            BellOutcome::PhiPlus => Correction::Identity,
            BellOutcome::PsiPlus => Correction::FlipX,
            BellOutcome::PhiMinus => Correction::PhaseZ,
            BellOutcome::PsiMinus => Correction::FlipXPhaseZ,
        }
    }

    /// Row-major 2×2 unitary. `FlipXPhaseZ` is the product `X·Z`.
    pub fn matrix(self) -> [[Complex64; 2]; 2] {
        match self {
            Correction::Identity => [[ONE, ZERO], [ZERO, ONE]],
            Correction::FlipX => [[ZERO, ONE], [ONE, ZERO]],
            Correction::PhaseZ => [[ONE, ZERO], [ZERO, -ONE]],
            Correction::FlipXPhaseZ => [[ZERO, -ONE], [ONE, ZERO]],
        }
    }

    pub fn apply(self, psi: &PureState) -> PureState {
        let m = self.matrix();
        let [a, b] = psi.amplitudes();
        PureState::normalized(m[0][0] * a + m[0][1] * b, m[1][0] * a + m[1][1] * b)
            .expect("unitaries preserve the norm")
    }
}

/// One branch of Alice's Bell measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct BellBranch {
    pub outcome: BellOutcome,
    pub probability: f64,
    /// Bob's normalized state before correction.
    pub bob_state: PureState,
    /// The full register after collapse: `|outcome⟩_{charlie,alice} ⊗ |bob⟩`.
    pub post_state: RegisterState,
}

fn require_layout(state: &RegisterState) -> Result<(), QuantumError> {
    if state.labels() != [Party::Charlie, Party::Alice, Party::Bob] {
        return Err(QuantumError::UnexpectedLayout(state.labels().to_vec()));
    }
    Ok(())
}

/// Unnormalized Bob amplitudes `⟨outcome|_{charlie,alice} |state⟩`.
fn bob_component(state: &RegisterState, outcome: BellOutcome) -> [Complex64; 2] {
    let amps = state.amplitudes();
    let bell = outcome.vector();
    let mut out = [ZERO; 2];
    for (j, slot) in out.iter_mut().enumerate() {
        *slot = (0..4).map(|ca| bell[ca].conj() * amps[(ca << 1) | j]).sum();
    }
    out
}

/// Born probabilities of the four outcomes, in [`BellOutcome::ALL`] order,
/// computed from projection norms.
pub fn outcome_probabilities(state: &RegisterState) -> Result<[f64; 4], QuantumError> {
    require_layout(state)?;
    Ok(BellOutcome::ALL.map(|o| {
        let [b0, b1] = bob_component(state, o);
        b0.norm_sqr() + b1.norm_sqr()
    }))
}

/// Projects onto a chosen outcome without sampling.
pub fn project_onto(state: &RegisterState, outcome: BellOutcome) -> Result<BellBranch, QuantumError> {
    require_layout(state)?;
    let [b0, b1] = bob_component(state, outcome);
    let probability = b0.norm_sqr() + b1.norm_sqr();
    if probability < MIN_BRANCH_PROBABILITY {
        return Err(QuantumError::ZeroProbabilityBranch(outcome));
    }
    let bob_state = PureState::normalized(b0, b1)?;
    let bell = outcome.vector();
    let bob = bob_state.amplitudes();
    let amplitudes = (0..8).map(|i| bell[i >> 1] * bob[i & 1]).collect();
    let post_state = RegisterState::new(state.labels().to_vec(), amplitudes)?;
    Ok(BellBranch {
        outcome,
        probability,
        bob_state,
        post_state,
    })
}

/// Alice's joint measurement: samples an outcome from the Born probabilities
/// and collapses the register.
pub fn bell_measure<R: Rng + ?Sized>(state: &RegisterState, rng: &mut R) -> Result<BellBranch, QuantumError> {
    let probs = outcome_probabilities(state)?;
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut chosen = None;
    for (o, p) in BellOutcome::ALL.iter().zip(probs) {
        if p < MIN_BRANCH_PROBABILITY {
            continue;
        }
        chosen = Some(*o);
        acc += p;
        if u < acc {
            break;
        }
    }
    // Rounding can leave `u` just past the last cumulative sum; the last
    // possible outcome absorbs it.
    let outcome = chosen.ok_or(QuantumError::NotNormalized(0.0))?;
    project_onto(state, outcome)
}

/// Bob's correction for the two bits he received.
pub fn apply_correction(bob_state: &PureState, outcome: BellOutcome) -> PureState {
    Correction::for_outcome(outcome).apply(bob_state)
}
