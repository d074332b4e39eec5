//! Exhaustive enumeration of the classical trial.
//!
//! A trial is determined by three independent choices: Charlie's face
//! (Heads with probability `x`), the shared pair face (fair) and the device
//! parity (fair). This module walks all eight branches with plain booleans,
//! sharing no code with the simulator, and derives the exact probabilities
//! the simulation is checked against.

use serde::{Deserialize, Serialize};

/// One branch, with `true` meaning Heads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub probability: f64,
    pub charlie_heads: bool,
    pub pair_heads: bool,
    pub parity: bool,
    /// Alice's device reports equal faces.
    pub same: bool,
    /// Bob's box before his correction.
    pub bob_heads_before: bool,
    pub bob_heads_after: bool,
    /// Faces of Alice's pair box and Charlie's box once the device opened them.
    pub opened_pair_heads: bool,
    pub opened_charlie_heads: bool,
}

pub fn enumerate_branches(x: f64) -> Vec<Branch> {
    let mut out = Vec::with_capacity(8);
    for charlie_heads in [true, false] {
        for pair_heads in [true, false] {
            for parity in [false, true] {
                let p_charlie = if charlie_heads { x } else { 1.0 - x };
                // A half turn flips a face; the device turns both boxes.
                let opened_pair_heads = pair_heads != parity;
                let opened_charlie_heads = charlie_heads != parity;
                let same = opened_pair_heads == opened_charlie_heads;
                let bob_heads_before = pair_heads;
                let bob_heads_after = if same { bob_heads_before } else { !bob_heads_before };
                out.push(Branch {
                    probability: p_charlie * 0.25,
                    charlie_heads,
                    pair_heads,
                    parity,
                    same,
                    bob_heads_before,
                    bob_heads_after,
                    opened_pair_heads,
                    opened_charlie_heads,
                });
            }
        }
    }
    out
}

/// Exact probabilities of the events the verification suite samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalOracle {
    pub x: f64,
    pub bob_heads_final: f64,
    pub same: f64,
    /// `P(Bob Heads before correction | Same)`; `None` if Same is impossible.
    pub bob_heads_given_same: Option<f64>,
    pub bob_heads_given_different: Option<f64>,
    pub opened_pair_heads: f64,
    pub opened_charlie_heads: f64,
    /// Every branch with positive weight ends with Bob on Charlie's face.
    pub invariant_holds: bool,
}

impl ClassicalOracle {
    pub fn new(x: f64) -> Self {
        let branches = enumerate_branches(x);
        let p = |f: &dyn Fn(&Branch) -> bool| -> f64 {
            branches.iter().filter(|b| f(b)).map(|b| b.probability).sum()
        };
        let conditional = |event: &dyn Fn(&Branch) -> bool, given: &dyn Fn(&Branch) -> bool| {
            let denom = p(given);
            (denom > 0.0).then(|| p(&|b| event(b) && given(b)) / denom)
        };
        ClassicalOracle {
            x,
            bob_heads_final: p(&|b| b.bob_heads_after),
            same: p(&|b| b.same),
            bob_heads_given_same: conditional(&|b| b.bob_heads_before, &|b| b.same),
            bob_heads_given_different: conditional(&|b| b.bob_heads_before, &|b| !b.same),
            opened_pair_heads: p(&|b| b.opened_pair_heads),
            opened_charlie_heads: p(&|b| b.opened_charlie_heads),
            invariant_holds: branches
                .iter()
                .all(|b| b.probability == 0.0 || b.bob_heads_after == b.charlie_heads),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_one() {
        for x in [0.0, 0.3, 1.0] {
            let total: f64 = enumerate_branches(x).iter().map(|b| b.probability).sum();
            assert!((total - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn closed_forms() {
        for x in [0.0, 0.1, 0.3, 0.5, 0.9, 1.0] {
            let o = ClassicalOracle::new(x);
            assert!(o.invariant_holds);
            assert!((o.bob_heads_final - x).abs() < 1e-15);
            assert!((o.same - 0.5).abs() < 1e-15);
            assert!((o.bob_heads_given_same.unwrap() - x).abs() < 1e-15);
            assert!((o.bob_heads_given_different.unwrap() - (1.0 - x)).abs() < 1e-15);
            assert!((o.opened_pair_heads - 0.5).abs() < 1e-15);
            assert!((o.opened_charlie_heads - 0.5).abs() < 1e-15);
        }
    }
}
