//! Deterministic parallel trial sweeps.
//!
//! Trials are cut into fixed-size chunks independent of the thread count.
//! Each chunk runs on its own in-process link and returns integer counts (or
//! exact extrema), which are merged in chunk order. The merged result is
//! therefore the same for any `jobs`.

use std::ops::Range;

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};
use serde::{Deserialize, Serialize};

use crate::classical_protocol::{run_trial, TrialRecord};
use crate::epistemic_state::{Face, PreparationMode};
use crate::events::measure_send_correct_ordered;
use crate::party::Party;
use crate::quantum_protocol::{run_quantum_trial, QuantumInput, QuantumTrialRecord};
use crate::rng::SeedSchedule;
use crate::transport::{LinkStats, TrialLink};
use crate::ProtocolError;

pub const CHUNK_TRIALS: u64 = 2048;

pub struct Executor {
    pool: ThreadPool,
    jobs: usize,
}

impl Executor {
    pub fn new(jobs: usize) -> Result<Self, rayon::ThreadPoolBuildError> {
        let jobs = jobs.max(1);
        Ok(Executor {
            pool: ThreadPoolBuilder::new().num_threads(jobs).build()?,
            jobs,
        })
    }

    pub fn jobs(&self) -> usize {
        self.jobs
    }

    /// Applies `f` to consecutive index ranges covering `0..total` and
    /// returns the results in range order.
    pub fn map_chunks<T, F>(&self, total: u64, chunk: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(Range<u64>) -> T + Sync,
    {
        let chunk = chunk.max(1);
        let n_chunks = total.div_ceil(chunk);
        self.pool.install(|| {
            (0..n_chunks)
                .into_par_iter()
                .map(|i| f(i * chunk..((i + 1) * chunk).min(total)))
                .collect()
        })
    }

    /// Applies `f` to every item, preserving order.
    pub fn map<I, T, F>(&self, items: &[I], f: F) -> Vec<T>
    where
        I: Sync,
        T: Send,
        F: Fn(&I) -> T + Sync,
    {
        self.pool.install(|| items.par_iter().map(&f).collect())
    }
}

/// Merges chunk results in order, stopping at the first error.
fn merge_chunks<T: Default + Merge, E>(chunks: Vec<Result<T, E>>) -> Result<T, E> {
    let mut total = T::default();
    for c in chunks {
        total.merge(&c?);
    }
    Ok(total)
}

pub trait Merge {
    fn merge(&mut self, other: &Self);
}

impl Merge for LinkStats {
    fn merge(&mut self, other: &Self) {
        self.frames += other.frames;
        self.wire_bytes += other.wire_bytes;
        self.information_bits += other.information_bits;
    }
}

/// Aggregate of classical trials at one `x`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassicalCounts {
    pub trials: u64,
    pub bob_heads: u64,
    /// Trials where Bob's final face equals Charlie's face at selection.
    pub teleported: u64,
    pub same: u64,
    pub bob_heads_before_given_same: u64,
    pub bob_heads_before_given_different: u64,
    pub opened_pair_heads: u64,
    pub opened_charlie_heads: u64,
    pub message_bit_one: u64,
    /// Trials whose bits_sent field differs from one.
    pub bits_field_mismatch: u64,
    pub ordered: u64,
    pub alice_to_bob: LinkStats,
}

impl ClassicalCounts {
    pub fn observe(&mut self, r: &TrialRecord) {
        let heads = |f: Face| f.is_heads() as u64;
        self.trials += 1;
        self.bob_heads += heads(r.bob_final_face);
        self.teleported += r.teleported() as u64;
        if r.alice_outcome.bit() == 0 {
            self.same += 1;
            self.bob_heads_before_given_same += heads(r.bob_face_at_measure);
        } else {
            self.bob_heads_before_given_different += heads(r.bob_face_at_measure);
        }
        self.opened_pair_heads += heads(r.alice_post_measurement_faces.pair);
        self.opened_charlie_heads += heads(r.alice_post_measurement_faces.charlie);
        self.message_bit_one += r.message_bit as u64;
        self.bits_field_mismatch += (r.bits_sent != 1) as u64;
        self.ordered += measure_send_correct_ordered(&r.event_order) as u64;
    }

    pub fn different(&self) -> u64 {
        self.trials - self.same
    }
}

impl Merge for ClassicalCounts {
    fn merge(&mut self, o: &Self) {
        self.trials += o.trials;
        self.bob_heads += o.bob_heads;
        self.teleported += o.teleported;
        self.same += o.same;
        self.bob_heads_before_given_same += o.bob_heads_before_given_same;
        self.bob_heads_before_given_different += o.bob_heads_before_given_different;
        self.opened_pair_heads += o.opened_pair_heads;
        self.opened_charlie_heads += o.opened_charlie_heads;
        self.message_bit_one += o.message_bit_one;
        self.bits_field_mismatch += o.bits_field_mismatch;
        self.ordered += o.ordered;
        self.alice_to_bob.merge(&o.alice_to_bob);
    }
}

/// Runs classical trials `0..trials` at `x`. A trial that breaks the
/// teleportation invariant aborts the sweep with that trial's record.
pub fn classical_sweep(
    exec: &Executor,
    x: f64,
    mode: PreparationMode,
    seed: u64,
    trials: u64,
) -> Result<ClassicalCounts, ProtocolError> {
    let schedule = SeedSchedule::new(seed);
    merge_chunks(exec.map_chunks(trials, CHUNK_TRIALS, |range| {
        let link = TrialLink::new(seed);
        let mut counts = ClassicalCounts::default();
        for t in range {
            counts.observe(&run_trial(x, mode, &link, &schedule, t)?);
        }
        counts.alice_to_bob = link.bus().stats(Party::Alice, Party::Bob);
        Ok(counts)
    }))
}

/// Aggregate of sampled quantum trials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantumCounts {
    pub trials: u64,
    pub outcome_counts: [u64; 4],
    pub min_fidelity: f64,
    pub min_pre_correction_fidelity: f64,
    pub bits_field_mismatch: u64,
    pub ordered: u64,
    pub alice_to_bob: LinkStats,
}

impl Default for QuantumCounts {
    fn default() -> Self {
        QuantumCounts {
            trials: 0,
            outcome_counts: [0; 4],
            min_fidelity: 1.0,
            min_pre_correction_fidelity: 1.0,
            bits_field_mismatch: 0,
            ordered: 0,
            alice_to_bob: LinkStats::default(),
        }
    }
}

impl QuantumCounts {
    pub fn observe(&mut self, r: &QuantumTrialRecord) {
        self.trials += 1;
        self.outcome_counts[r.outcome.bits() as usize] += 1;
        self.min_fidelity = self.min_fidelity.min(r.fidelity);
        self.min_pre_correction_fidelity = self.min_pre_correction_fidelity.min(r.pre_correction_fidelity);
        self.bits_field_mismatch += (r.bits_sent != 2) as u64;
        self.ordered += measure_send_correct_ordered(&r.event_order) as u64;
    }
}

impl Merge for QuantumCounts {
    fn merge(&mut self, o: &Self) {
        self.trials += o.trials;
        for (a, b) in self.outcome_counts.iter_mut().zip(o.outcome_counts) {
            *a += b;
        }
        self.min_fidelity = self.min_fidelity.min(o.min_fidelity);
        self.min_pre_correction_fidelity = self.min_pre_correction_fidelity.min(o.min_pre_correction_fidelity);
        self.bits_field_mismatch += o.bits_field_mismatch;
        self.ordered += o.ordered;
        self.alice_to_bob.merge(&o.alice_to_bob);
    }
}

pub fn quantum_sweep(
    exec: &Executor,
    input: &QuantumInput,
    seed: u64,
    trials: u64,
) -> Result<QuantumCounts, ProtocolError> {
    let schedule = SeedSchedule::new(seed);
    merge_chunks(exec.map_chunks(trials, CHUNK_TRIALS, |range| {
        let link = TrialLink::new(seed);
        let mut counts = QuantumCounts::default();
        for t in range {
            counts.observe(&run_quantum_trial(input, &link, &schedule, t)?);
        }
        counts.alice_to_bob = link.bus().stats(Party::Alice, Party::Bob);
        Ok(counts)
    }))
}
