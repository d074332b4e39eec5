//! Whether some measurement on a system has a certain outcome.
//!
//! A pure qubit state always has one: the projector onto the state itself.
//! The only measurement on a coin in a box is opening it, so `|x⟩` behaves
//! like the mixed state `x|0⟩⟨0| + (1−x)|1⟩⟨1|` and is predictable only
//! when `x` is 0 or 1. Both cases reduce to asking whether the density matrix
//! has an eigenvalue equal to one.

use super::state::{DensityMatrix, PureState};
use crate::epistemic_state::ClassicalState;
use crate::EXACT_TOLERANCE;

/// `diag(x, 1−x)`: the density matrix that behaves like `|x⟩`.
pub fn mixed_analogue(state: &ClassicalState) -> DensityMatrix {
    DensityMatrix::diagonal(&[state.x(), 1.0 - state.x()])
}

pub trait DeterministicObservable {
    fn density(&self) -> DensityMatrix;

    fn deterministic_observable_exists(&self) -> bool {
        let [_, largest] = self.density().eigenvalues_2x2();
        (largest - 1.0).abs() <= EXACT_TOLERANCE
    }
}

impl DeterministicObservable for PureState {
    fn density(&self) -> DensityMatrix {
        PureState::density(self)
    }
}

impl DeterministicObservable for ClassicalState {
    fn density(&self) -> DensityMatrix {
        mixed_analogue(self)
    }
}

pub fn deterministic_observable_exists<S: DeterministicObservable + ?Sized>(state: &S) -> bool {
    state.deterministic_observable_exists()
}
