//! Pre-registered thresholds and sample sizes.

use serde::{Deserialize, Serialize};

use crate::epistemic_state::PreparationMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyConfig {
    pub x: f64,
    pub small_ensemble: usize,
    pub large_ensemble: usize,
    pub repetitions: u64,
    /// Allowed relative deviation of the RMS ratio from
    /// `sqrt(large / small)`.
    pub ratio_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableConfig {
    pub pure_states: usize,
    pub classical_x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportConfig {
    pub x: f64,
    pub classical_trials: u64,
    pub quantum_trials: u64,
    pub roundtrip_messages: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Worker threads. Results do not depend on it, so it is kept out of
    /// the report.
    #[serde(skip)]
    pub jobs: usize,
    pub mode: PreparationMode,
    pub correctness_grid: Vec<f64>,
    pub feature_grid: Vec<f64>,
    pub trials_per_point: u64,
    pub quantum_states: usize,
    /// Sampled quantum trials for event-order and bit accounting checks.
    pub quantum_trials: u64,
    pub precisions: Vec<u32>,
    pub info_gap_trials: u64,
    pub z: f64,
    pub chi_square_alpha: f64,
    pub mi_threshold_bits: f64,
    pub exact_tolerance: f64,
    pub tomography: TomographyConfig,
    pub observable: ObservableConfig,
    pub transport: TransportConfig,
}

pub const MIN_TRIALS_PER_POINT: u64 = 10_000;

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: 42,
            jobs: 1,
            mode: PreparationMode::Direct,
            correctness_grid: vec![0.0, 0.25, 0.3, 0.5, 0.75, 1.0],
            feature_grid: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            trials_per_point: 100_000,
            quantum_states: 100,
            quantum_trials: 10_000,
            precisions: vec![1, 3, 6, 12],
            info_gap_trials: 10_000,
            z: 3.0,
            chi_square_alpha: 0.001,
            mi_threshold_bits: 0.01,
            exact_tolerance: crate::EXACT_TOLERANCE,
            tomography: TomographyConfig {
                x: 0.3,
                small_ensemble: 1000,
                large_ensemble: 4000,
                repetitions: 1000,
                ratio_tolerance: 0.2,
            },
            observable: ObservableConfig {
                pure_states: 100,
                classical_x: vec![0.1, 0.5, 0.9],
            },
            transport: TransportConfig {
                x: 0.3,
                classical_trials: 1000,
                quantum_trials: 200,
                roundtrip_messages: 10_000,
            },
        }
    }
}

/// Independent seeds for the sub-checks of one run, derived from the root
/// seed with a splitmix64 step over `(tag, index)`.
pub fn derive_seed(root: u64, tag: u64, index: u64) -> u64 {
    let mut z = root
        ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ index.wrapping_mul(0xd1b5_4a32_d192_ed03);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) mod tags {
    pub const CLASSICAL_CORRECTNESS: u64 = 1;
    pub const QUANTUM_STATES: u64 = 2;
    pub const TOMOGRAPHY: u64 = 3;
    pub const OBSERVABLE: u64 = 4;
    pub const FEATURE_SWEEP: u64 = 5;
    pub const INFO_GAP: u64 = 6;
    pub const QUANTUM_SAMPLED: u64 = 7;
    pub const ROUNDTRIP: u64 = 8;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_seeds_differ() {
        let mut seen = std::collections::HashSet::new();
        for tag in 0..10 {
            for i in 0..100 {
                assert!(seen.insert(derive_seed(42, tag, i)));
            }
        }
        assert_eq!(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
    }

    #[test]
    fn config_serializes_without_jobs() {
        let json = serde_json::to_string(&VerifyConfig { jobs: 8, ..Default::default() }).unwrap();
        assert!(!json.contains("jobs"));
    }
}
