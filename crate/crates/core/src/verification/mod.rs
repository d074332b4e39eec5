//! Monte Carlo and analytic verification of both protocols.
//!
//! [`run_suite`] is the entry point. It runs any of three parts:
//!
//! * correctness: Bob's Heads frequency against the enumerated probability,
//!   the per-trial invariant, exact quantum fidelity for forced outcomes,
//!   ensemble tomography scaling and the deterministic-observable check;
//! * features: the four shared features for both protocols, compared side by
//!   side ([`compare_protocols`]);
//! * transport: frame round trips, golden bytes and networked-versus-
//!   in-process equivalence over loopback TCP.
//!
//! Thresholds live in [`VerifyConfig`] and are fixed before any trial runs.

mod config;
mod correctness;
mod features;
mod info;
mod oracle;
mod report;
mod stats;
mod sweep;
mod transport_check;

use thiserror::Error;

pub use config::{derive_seed, ObservableConfig, TomographyConfig, TransportConfig, VerifyConfig, MIN_TRIALS_PER_POINT};
pub use correctness::{
    haar_states, observable_check, run_correctness, tomography_rms, tomography_scaling,
    verify_classical_correctness, verify_quantum_correctness, ClassicalCorrectness, CorrectnessReport,
    ObservableCheck, QuantumCorrectness, QuantumFailure, TomographyCheck,
};
pub use features::{
    classical_state_at_precision, compare_protocols, feature_a_info_gap, feature_b_classical, feature_b_quantum,
    feature_c_classical, feature_c_quantum, feature_d_classical, feature_d_quantum, parameter_count,
    quantum_state_at_precision, Bound, ComparisonReport, CorrespondenceRow, Evidence, Feature, FeatureEntry,
    GridSweeps, Metric,
};
pub use info::{mutual_information, plugin_bias_bits, ContingencyTable, InfoError};
pub use oracle::{enumerate_branches, Branch, ClassicalOracle};
pub use report::{run_suite, Suite, UnknownSuite, VerificationReport};
pub use stats::{chi_square_homogeneity, chi_square_uniform, ChiSquareTest, MonteCarloResult};
pub use sweep::{classical_sweep, quantum_sweep, ClassicalCounts, Executor, Merge, QuantumCounts, CHUNK_TRIALS};
pub use transport_check::{
    classical_network_check, golden_check, quantum_network_check, random_message, roundtrip_check,
    verify_transport, GoldenCheck, HandshakeCheck, NetworkCheck, RoundTripCheck, TransportReport,
};

use crate::epistemic_state::StateError;
use crate::quantum_protocol::QuantumError;
use crate::transport::TransportError;
use crate::ProtocolError;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Info(#[from] InfoError),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("could not start worker threads: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}
