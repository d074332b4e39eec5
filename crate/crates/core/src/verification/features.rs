//! The four shared features, checked for both protocols.
//!
//! Classical entries are statistical (z-intervals, chi-square, plug-in
//! mutual information over Monte Carlo sweeps). Quantum entries are analytic
//! (exact projections compared at a fixed tolerance), apart from event order
//! and bit accounting which come from sampled trials.

use serde::{Deserialize, Serialize};

use super::config::{derive_seed, tags, VerifyConfig, MIN_TRIALS_PER_POINT};
use super::correctness::haar_states;
use super::info::{plugin_bias_bits, ContingencyTable};
use super::oracle::ClassicalOracle;
use super::stats::{chi_square_uniform, MonteCarloResult};
use super::sweep::{classical_sweep, quantum_sweep, ClassicalCounts, Executor};
use super::VerifyError;
use crate::classical_protocol::run_trial;
use crate::epistemic_state::PreparationMode;
use crate::party::Party;
use crate::quantum_protocol::{
    compose, fidelity, outcome_probabilities, prepare_epr, project_onto, reduced_density, reduced_density_of,
    BellOutcome, DensityMatrix, PureState, QuantumInput,
};
use crate::rng::{SeedSchedule, StreamLabel};
use crate::transport::{ProtocolKind, TrialLink};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    InfoGap,
    Ignorance,
    Instantaneity,
    Erasure,
}

impl Feature {
    pub const ALL: [Feature; 4] = [Feature::InfoGap, Feature::Ignorance, Feature::Instantaneity, Feature::Erasure];

    pub fn letter(self) -> char {
        match self {
            Feature::InfoGap => 'a',
            Feature::Ignorance => 'b',
            Feature::Instantaneity => 'c',
            Feature::Erasure => 'd',
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Feature::InfoGap => "information gap",
            Feature::Ignorance => "ignorance",
            Feature::Instantaneity => "instantaneity",
            Feature::Erasure => "erasure",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Evidence {
    /// Exact counts of transmitted bits.
    Counting,
    Statistical,
    Analytic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Bound {
    AtMost { limit: f64 },
    Above { limit: f64 },
    Equals { value: f64 },
    Within { low: f64, high: f64 },
    /// Informational; always passes.
    Reported,
}

impl Bound {
    pub fn admits(&self, v: f64) -> bool {
        match *self {
            Bound::AtMost { limit } => v <= limit,
            Bound::Above { limit } => v > limit,
            Bound::Equals { value } => v == value,
            Bound::Within { low, high } => low <= v && v <= high,
            Bound::Reported => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub bound: Bound,
    pub pass: bool,
}

impl Metric {
    pub fn new(name: impl Into<String>, value: f64, bound: Bound) -> Self {
        Metric {
            name: name.into(),
            value,
            pass: bound.admits(value),
            bound,
        }
    }

    fn interval(name: impl Into<String>, r: &MonteCarloResult) -> Self {
        Metric::new(
            name,
            r.point_estimate,
            Bound::Within {
                low: r.target - r.tolerance,
                high: r.target + r.tolerance,
            },
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEntry {
    pub feature: Feature,
    pub protocol: ProtocolKind,
    pub evidence: Evidence,
    pub threshold: String,
    /// The number shown in the side-by-side table.
    pub headline: String,
    pub metrics: Vec<Metric>,
    pub pass: bool,
}

impl FeatureEntry {
    fn new(
        feature: Feature,
        protocol: ProtocolKind,
        evidence: Evidence,
        threshold: impl Into<String>,
        headline: impl Into<String>,
        metrics: Vec<Metric>,
    ) -> Self {
        FeatureEntry {
            feature,
            protocol,
            evidence,
            threshold: threshold.into(),
            headline: headline.into(),
            pass: metrics.iter().all(|m| m.pass),
            metrics,
        }
    }

    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }
}

/// Continuous real parameters needed to write down the teleported state.
pub fn parameter_count(protocol: ProtocolKind) -> u32 {
    match protocol {
        ProtocolKind::Classical => 1,
        ProtocolKind::Quantum => 2,
    }
}

fn round_to(v: f64, digits: u32) -> f64 {
    let scale = 10f64.powi(digits as i32);
    (v * scale).round() / scale
}

/// A value of `x` written with `digits` decimals, strictly inside (0, 1).
pub fn classical_state_at_precision(seed: u64, digits: u32) -> f64 {
    use rand::Rng;
    let mut rng = SeedSchedule::new(seed).substream(digits as u64, StreamLabel::Harness);
    let unit = 10f64.powi(-(digits as i32));
    round_to(rng.random::<f64>(), digits).clamp(unit, 1.0 - unit)
}

/// A qubit state whose amplitude components are written with `digits`
/// decimals before normalization.
pub fn quantum_state_at_precision(seed: u64, digits: u32) -> PureState {
    let mut rng = SeedSchedule::new(seed).substream(digits as u64, StreamLabel::Harness);
    loop {
        let [a, b, c, d] = crate::quantum_protocol::random_pure_state(&mut rng).to_reals().map(|v| round_to(v, digits));
        if let Ok(psi) = PureState::normalized(num_complex::Complex64::new(a, b), num_complex::Complex64::new(c, d)) {
            return psi;
        }
    }
}

/// Feature (a): bits on the Alice→Bob link stay at one (classical) or two
/// (quantum) per trial however precisely the state is specified.
pub fn feature_a_info_gap(
    exec: &Executor,
    protocol: ProtocolKind,
    precisions: &[u32],
    trials: u64,
    seed: u64,
) -> Result<FeatureEntry, VerifyError> {
    let expected = match protocol {
        ProtocolKind::Classical => 1.0,
        ProtocolKind::Quantum => 2.0,
    };
    let mut metrics = Vec::new();
    for &digits in precisions {
        let state_seed = derive_seed(seed, tags::INFO_GAP, 0);
        let run_seed = derive_seed(seed, tags::INFO_GAP, 1 + digits as u64);
        let (stats, bad_fields) = match protocol {
            ProtocolKind::Classical => {
                let x = classical_state_at_precision(state_seed, digits);
                let c = classical_sweep(exec, x, PreparationMode::Direct, run_seed, trials)?;
                (c.alice_to_bob, c.bits_field_mismatch)
            }
            ProtocolKind::Quantum => {
                let psi = quantum_state_at_precision(state_seed, digits);
                let c = quantum_sweep(exec, &QuantumInput::Given(psi), run_seed, trials)?;
                (c.alice_to_bob, c.bits_field_mismatch)
            }
        };
        let n = trials.max(1) as f64;
        metrics.push(Metric::new(format!("bits_per_trial[digits={digits}]"), stats.information_bits as f64 / n, Bound::Equals { value: expected }));
        metrics.push(Metric::new(format!("frames_per_trial[digits={digits}]"), stats.frames as f64 / n, Bound::Equals { value: 1.0 }));
        metrics.push(Metric::new(format!("trials_with_other_bit_count[digits={digits}]"), bad_fields as f64, Bound::Equals { value: 0.0 }));
        metrics.push(Metric::new(format!("wire_bytes_per_trial[digits={digits}]"), stats.wire_bytes as f64 / n, Bound::Reported));
    }
    if protocol == ProtocolKind::Classical {
        metrics.push(Metric::new("bits_for_two_composed_trials", composed_classical_bits(seed)? as f64, Bound::Equals { value: 2.0 }));
    }
    metrics.push(Metric::new("state_parameters", parameter_count(protocol) as f64, Bound::Equals { value: parameter_count(protocol) as f64 }));
    let max_digits = precisions.iter().copied().max().unwrap_or(0);
    metrics.push(Metric::new("max_description_digits", max_digits as f64, Bound::Reported));
    Ok(FeatureEntry::new(
        Feature::InfoGap,
        protocol,
        Evidence::Counting,
        format!("exactly {expected} information bit(s) per trial at every precision"),
        format!("{expected} bit/trial, {} parameter(s)", parameter_count(protocol)),
        metrics,
    ))
}

/// Two classical trials teleporting two different states over one link.
fn composed_classical_bits(seed: u64) -> Result<u64, VerifyError> {
    let link = TrialLink::new(seed);
    let schedule = SeedSchedule::new(derive_seed(seed, tags::INFO_GAP, 100));
    run_trial(0.3, PreparationMode::Direct, &link, &schedule, 0)?;
    run_trial(0.71, PreparationMode::Direct, &link, &schedule, 1)?;
    Ok(link.bus().stats(Party::Alice, Party::Bob).information_bits)
}

/// Classical sweeps shared by features (b)–(d), one per grid point.
pub struct GridSweeps {
    pub points: Vec<(f64, ClassicalCounts)>,
}

impl GridSweeps {
    pub fn run(exec: &Executor, xs: &[f64], mode: PreparationMode, trials: u64, seed: u64) -> Result<Self, VerifyError> {
        if trials < MIN_TRIALS_PER_POINT {
            return Err(VerifyError::Precondition(format!(
                "feature sweeps need at least {MIN_TRIALS_PER_POINT} trials per point, got {trials}"
            )));
        }
        let mut points = Vec::with_capacity(xs.len());
        for &x in xs {
            if points.iter().any(|(y, _)| *y == x) {
                continue;
            }
            let counts = classical_sweep(exec, x, mode, derive_seed(seed, tags::FEATURE_SWEEP, x.to_bits()), trials)?;
            points.push((x, counts));
        }
        Ok(GridSweeps { points })
    }

    fn get(&self, x: f64) -> &ClassicalCounts {
        &self.points.iter().find(|(y, _)| *y == x).expect("grid point was swept").1
    }

    fn table(&self, xs: &[f64], count: impl Fn(&ClassicalCounts) -> u64) -> Result<ContingencyTable, VerifyError> {
        let mut t = ContingencyTable::new(2, xs.len());
        for (col, &x) in xs.iter().enumerate() {
            let c = self.get(x);
            let k = count(c);
            t.add(0, col, k)?;
            t.add(1, col, c.trials - k)?;
        }
        Ok(t)
    }
}

fn mi_threshold_text(cfg: &VerifyConfig, labels: usize) -> String {
    let n = cfg.trials_per_point * labels as u64;
    format!(
        "plug-in MI <= {} bits (bias (|O|-1)(|L|-1)/(2N ln 2) = {:.3e} bits at N = {n})",
        cfg.mi_threshold_bits,
        plugin_bias_bits(2, labels, n)
    )
}

/// Feature (b), classical: neither the outcome nor the transmitted bit
/// carries information about `x`.
pub fn feature_b_classical(sweeps: &GridSweeps, cfg: &VerifyConfig) -> Result<FeatureEntry, VerifyError> {
    let xs = &cfg.feature_grid;
    let mi_limit = Bound::AtMost { limit: cfg.mi_threshold_bits };
    let outcome = sweeps.table(xs, |c| c.same)?.mutual_information()?;
    let bit = sweeps.table(xs, |c| c.message_bit_one)?.mutual_information()?;
    let mut metrics = vec![
        Metric::new("mi_outcome_x_bits", outcome, mi_limit),
        Metric::new("mi_bit_x_bits", bit, mi_limit),
        Metric::new("grid_points", xs.len() as f64, Bound::Above { limit: 4.0 }),
    ];
    for &x in xs {
        let c = sweeps.get(x);
        let r = MonteCarloResult::binomial(c.same, c.trials, ClassicalOracle::new(x).same, cfg.z);
        metrics.push(Metric::interval(format!("p_same[x={x}]"), &r));
    }
    Ok(FeatureEntry::new(
        Feature::Ignorance,
        ProtocolKind::Classical,
        Evidence::Statistical,
        mi_threshold_text(cfg, xs.len()),
        format!("MI(outcome;x) = {outcome:.2e} bits"),
        metrics,
    ))
}

/// Feature (b), quantum: the outcome distribution is uniform for every ψ,
/// so the outcome carries no information about ψ.
pub fn feature_b_quantum(states: &[PureState], tolerance: f64) -> Result<FeatureEntry, VerifyError> {
    let epr = prepare_epr();
    let mut max_dev: f64 = 0.0;
    let mut mean = [0.0f64; 4];
    let mut mean_entropy = 0.0;
    let entropy = |p: &[f64; 4]| -> f64 { p.iter().filter(|v| **v > 0.0).map(|v| -v * v.log2()).sum() };
    for psi in states {
        let p = outcome_probabilities(&compose(psi, &epr)?)?;
        for (m, v) in mean.iter_mut().zip(p) {
            max_dev = max_dev.max((v - 0.25).abs());
            *m += v / states.len() as f64;
        }
        mean_entropy += entropy(&p) / states.len() as f64;
    }
    // I(outcome; ψ) for ψ uniform over the test set.
    let mi = (entropy(&mean) - mean_entropy).max(0.0);
    Ok(FeatureEntry::new(
        Feature::Ignorance,
        ProtocolKind::Quantum,
        Evidence::Analytic,
        format!("max |p_k(psi) - 1/4| <= {tolerance:e}"),
        format!("max |p - 1/4| = {max_dev:.2e}"),
        vec![
            Metric::new("max_outcome_probability_deviation", max_dev, Bound::AtMost { limit: tolerance }),
            Metric::new("mi_outcome_psi_bits", mi, Bound::AtMost { limit: tolerance }),
            Metric::new("states", states.len() as f64, Bound::Reported),
        ],
    ))
}

/// Feature (c), classical: at the measure event, before anything is sent,
/// Bob's face is already distributed as `|x⟩` (Same) or its rotation
/// (Different).
pub fn feature_c_classical(sweeps: &GridSweeps, cfg: &VerifyConfig) -> FeatureEntry {
    let mut metrics = Vec::new();
    let mut trials = 0;
    let mut ordered = 0;
    for &x in &cfg.correctness_grid {
        let c = sweeps.get(x);
        let o = ClassicalOracle::new(x);
        trials += c.trials;
        ordered += c.ordered;
        if let Some(target) = o.bob_heads_given_same {
            let r = MonteCarloResult::binomial(c.bob_heads_before_given_same, c.same, target, cfg.z);
            metrics.push(Metric::interval(format!("p_bob_heads_given_same[x={x}]"), &r));
        }
        if let Some(target) = o.bob_heads_given_different {
            let r = MonteCarloResult::binomial(c.bob_heads_before_given_different, c.different(), target, cfg.z);
            metrics.push(Metric::interval(format!("p_bob_heads_given_different[x={x}]"), &r));
        }
    }
    metrics.push(Metric::new("trials_out_of_order", (trials - ordered) as f64, Bound::Equals { value: 0.0 }));
    FeatureEntry::new(
        Feature::Instantaneity,
        ProtocolKind::Classical,
        Evidence::Statistical,
        format!("conditional frequencies within target +/- {}*sigma; measure < send < correct in every trial", cfg.z),
        "P(Bob H | same) = x, P(Bob H | diff) = 1-x",
        metrics,
    )
}

/// Feature (c), quantum: right after the Bell measurement Bob holds
/// `U_outcome ψ`.
pub fn feature_c_quantum(
    exec: &Executor,
    states: &[PureState],
    cfg: &VerifyConfig,
) -> Result<FeatureEntry, VerifyError> {
    let epr = prepare_epr();
    let mut max_deficit: f64 = 0.0;
    for psi in states {
        let register = compose(psi, &epr)?;
        for outcome in BellOutcome::ALL {
            let branch = project_onto(&register, outcome)?;
            let expected = outcome.known_transform().apply(psi);
            max_deficit = max_deficit.max(1.0 - fidelity(&expected, &branch.bob_state));
        }
    }
    let sampled = quantum_sweep(
        exec,
        &QuantumInput::Random,
        derive_seed(cfg.seed, tags::QUANTUM_SAMPLED, 0),
        cfg.quantum_trials,
    )?;
    let tol = Bound::AtMost { limit: cfg.exact_tolerance };
    Ok(FeatureEntry::new(
        Feature::Instantaneity,
        ProtocolKind::Quantum,
        Evidence::Analytic,
        format!("1 - F(U_k psi, bob) <= {:e}; measure < send < correct in every trial", cfg.exact_tolerance),
        format!("max 1 - F = {max_deficit:.2e}"),
        vec![
            Metric::new("max_pre_correction_deficit_forced", max_deficit, tol),
            Metric::new("max_pre_correction_deficit_sampled", 1.0 - sampled.min_pre_correction_fidelity, tol),
            Metric::new("sampled_trials", sampled.trials as f64, Bound::Reported),
            Metric::new("trials_out_of_order", (sampled.trials - sampled.ordered) as f64, Bound::Equals { value: 0.0 }),
        ],
    ))
}

/// Feature (d), classical: after the device opens Alice's two boxes each
/// face is a fair coin whatever `x` was.
pub fn feature_d_classical(sweeps: &GridSweeps, cfg: &VerifyConfig) -> Result<FeatureEntry, VerifyError> {
    let xs = &cfg.feature_grid;
    let mut metrics = Vec::new();
    let above = Bound::Above { limit: cfg.chi_square_alpha };
    let mut min_p: f64 = 1.0;
    for &x in xs {
        let c = sweeps.get(x);
        for (name, heads) in [("pair_box", c.opened_pair_heads), ("charlie_box", c.opened_charlie_heads)] {
            let t = chi_square_uniform(&[heads, c.trials - heads]);
            min_p = min_p.min(t.p_value);
            metrics.push(Metric::new(format!("chi_square_p[{name},x={x}]"), t.p_value, above));
        }
    }
    let mi_limit = Bound::AtMost { limit: cfg.mi_threshold_bits };
    metrics.push(Metric::new("mi_pair_face_x_bits", sweeps.table(xs, |c| c.opened_pair_heads)?.mutual_information()?, mi_limit));
    metrics.push(Metric::new("mi_charlie_face_x_bits", sweeps.table(xs, |c| c.opened_charlie_heads)?.mutual_information()?, mi_limit));
    Ok(FeatureEntry::new(
        Feature::Erasure,
        ProtocolKind::Classical,
        Evidence::Statistical,
        format!("chi-square vs uniform p > {} per x and face; {}", cfg.chi_square_alpha, mi_threshold_text(cfg, xs.len())),
        format!("min chi-square p = {min_p:.3}"),
        metrics,
    ))
}

/// Feature (d), quantum: Alice's two qubits end in the outcome's Bell state
/// and each is maximally mixed.
pub fn feature_d_quantum(states: &[PureState], tolerance: f64) -> Result<FeatureEntry, VerifyError> {
    let epr = prepare_epr();
    let half = DensityMatrix::maximally_mixed(2);
    let mut max_bell: f64 = 0.0;
    let mut max_single: f64 = 0.0;
    for psi in states {
        let register = compose(psi, &epr)?;
        for outcome in BellOutcome::ALL {
            let post = project_onto(&register, outcome)?.post_state;
            let pair = reduced_density_of(&post, &[Party::Charlie, Party::Alice])?;
            max_bell = max_bell.max(pair.distance(&DensityMatrix::projector(&outcome.vector())));
            for q in [Party::Charlie, Party::Alice] {
                max_single = max_single.max(reduced_density(&post, q)?.distance(&half));
            }
        }
    }
    let tol = Bound::AtMost { limit: tolerance };
    Ok(FeatureEntry::new(
        Feature::Erasure,
        ProtocolKind::Quantum,
        Evidence::Analytic,
        format!("Frobenius distance <= {tolerance:e}"),
        format!("max ||rho - I/2|| = {max_single:.2e}"),
        vec![
            Metric::new("max_distance_to_bell_state", max_bell, tol),
            Metric::new("max_distance_single_qubit_to_maximally_mixed", max_single, tol),
            Metric::new("states", states.len() as f64, Bound::Reported),
        ],
    ))
}

/// One row of the side-by-side summary where the protocols differ by
/// design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceRow {
    pub aspect: String,
    pub classical: String,
    pub quantum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub entries: Vec<FeatureEntry>,
    pub correspondence: Vec<CorrespondenceRow>,
    pub pass: bool,
}

impl ComparisonReport {
    pub fn entry(&self, feature: Feature, protocol: ProtocolKind) -> Option<&FeatureEntry> {
        self.entries.iter().find(|e| e.feature == feature && e.protocol == protocol)
    }
}

fn bits_per_trial(entry: &FeatureEntry) -> String {
    entry
        .metrics
        .iter()
        .find(|m| m.name.starts_with("bits_per_trial"))
        .map(|m| format!("{}", m.value))
        .unwrap_or_else(|| "-".into())
}

/// Runs every feature check for both protocols.
pub fn compare_protocols(exec: &Executor, cfg: &VerifyConfig) -> Result<ComparisonReport, VerifyError> {
    let mut xs = cfg.feature_grid.clone();
    xs.extend_from_slice(&cfg.correctness_grid);
    let sweeps = GridSweeps::run(exec, &xs, cfg.mode, cfg.trials_per_point, cfg.seed)?;
    let states = haar_states(derive_seed(cfg.seed, tags::QUANTUM_STATES, 0), cfg.quantum_states);
    let tol = cfg.exact_tolerance;

    let entries = vec![
        feature_a_info_gap(exec, ProtocolKind::Classical, &cfg.precisions, cfg.info_gap_trials, cfg.seed)?,
        feature_a_info_gap(exec, ProtocolKind::Quantum, &cfg.precisions, cfg.info_gap_trials, cfg.seed)?,
        feature_b_classical(&sweeps, cfg)?,
        feature_b_quantum(&states, tol)?,
        feature_c_classical(&sweeps, cfg),
        feature_c_quantum(exec, &states, cfg)?,
        feature_d_classical(&sweeps, cfg)?,
        feature_d_quantum(&states, tol)?,
    ];
    let correspondence = vec![
        CorrespondenceRow {
            aspect: "continuous parameters in the state".into(),
            classical: format!("{} (x)", parameter_count(ProtocolKind::Classical)),
            quantum: format!("{} (Bloch sphere angles)", parameter_count(ProtocolKind::Quantum)),
        },
        CorrespondenceRow {
            aspect: "information bits sent per trial".into(),
            classical: bits_per_trial(&entries[0]),
            quantum: bits_per_trial(&entries[1]),
        },
        CorrespondenceRow {
            aspect: "evidence for (b)-(d)".into(),
            classical: format!("statistical (z = {}, chi-square alpha = {})", cfg.z, cfg.chi_square_alpha),
            quantum: format!("analytic (tolerance {tol:e})"),
        },
    ];
    Ok(ComparisonReport {
        pass: entries.iter().all(|e| e.pass),
        entries,
        correspondence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds() {
        assert!(Bound::Above { limit: 0.001 }.admits(0.5));
        assert!(!Bound::Above { limit: 0.001 }.admits(0.001));
        assert!(Bound::Equals { value: 2.0 }.admits(2.0));
        assert!(!Bound::Within { low: 0.1, high: 0.2 }.admits(0.3));
    }

    #[test]
    fn precision_states_have_requested_digits() {
        for d in [1, 3, 6, 12] {
            let x = classical_state_at_precision(4, d);
            assert!(x > 0.0 && x < 1.0);
            assert!((x * 10f64.powi(d as i32) - (x * 10f64.powi(d as i32)).round()).abs() < 1e-3);
        }
    }

    #[test]
    fn quantum_analytic_entries_pass() {
        let states = haar_states(1, 20);
        assert!(feature_b_quantum(&states, 1e-12).unwrap().pass);
        assert!(feature_d_quantum(&states, 1e-12).unwrap().pass);
    }

    #[test]
    fn composed_trials_send_two_bits() {
        assert_eq!(composed_classical_bits(3).unwrap(), 2);
    }
}
