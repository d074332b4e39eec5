//! Correctness of both protocols, ensemble tomography and the
//! deterministic-observable check.

use serde::{Deserialize, Serialize};

use super::config::{derive_seed, tags, VerifyConfig, MIN_TRIALS_PER_POINT};
use super::oracle::ClassicalOracle;
use super::stats::MonteCarloResult;
use super::sweep::{classical_sweep, Executor};
use super::VerifyError;
use crate::epistemic_state::{estimate_state, prepare_state, ClassicalState, PreparationMode, SealedBox};
use crate::party::Party;
use crate::quantum_protocol::{
    apply_correction, compose, deterministic_observable_exists, fidelity, outcome_probabilities, prepare_epr,
    project_onto, random_pure_state, BellOutcome, PureState,
};
use crate::rng::{SeedSchedule, StreamLabel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalCorrectness {
    pub results: Vec<MonteCarloResult>,
    pub trials_total: u64,
    /// Always zero in a returned report: a violation aborts the run.
    pub invariant_violations: u64,
    pub pass: bool,
}

/// Bob's Heads frequency at each `x`, checked against the enumerated
/// probability, plus the per-trial invariant.
pub fn verify_classical_correctness(
    exec: &Executor,
    x_grid: &[f64],
    trials_per_x: u64,
    seed: u64,
    z: f64,
    mode: PreparationMode,
) -> Result<ClassicalCorrectness, VerifyError> {
    if trials_per_x < MIN_TRIALS_PER_POINT {
        return Err(VerifyError::Precondition(format!(
            "classical correctness needs at least {MIN_TRIALS_PER_POINT} trials per x, got {trials_per_x}"
        )));
    }
    let mut results = Vec::with_capacity(x_grid.len());
    let mut trials_total = 0;
    for (i, &x) in x_grid.iter().enumerate() {
        let counts = classical_sweep(
            exec,
            x,
            mode,
            derive_seed(seed, tags::CLASSICAL_CORRECTNESS, i as u64),
            trials_per_x,
        )?;
        trials_total += counts.trials;
        if counts.teleported != counts.trials {
            return Err(VerifyError::Precondition(format!(
                "{} trials at x={x} did not teleport",
                counts.trials - counts.teleported
            )));
        }
        let target = ClassicalOracle::new(x).bob_heads_final;
        results.push(MonteCarloResult::binomial(counts.bob_heads, counts.trials, target, z));
    }
    Ok(ClassicalCorrectness {
        pass: results.iter().all(|r| r.pass),
        results,
        trials_total,
        invariant_violations: 0,
    })
}

/// A state and forced outcome whose corrected fidelity fell short.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumFailure {
    pub psi: PureState,
    pub outcome: BellOutcome,
    pub fidelity_deficit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumCorrectness {
    pub states: usize,
    pub branches_checked: usize,
    pub max_fidelity_deficit: f64,
    pub max_probability_deviation: f64,
    pub tolerance: f64,
    pub failures: Vec<QuantumFailure>,
    pub pass: bool,
}

/// Haar-random test states, one per index of the harness substream.
pub fn haar_states(seed: u64, n: usize) -> Vec<PureState> {
    let schedule = SeedSchedule::new(seed);
    (0..n as u64)
        .map(|i| random_pure_state(&mut schedule.substream(i, StreamLabel::Harness)))
        .collect()
}

/// Forces each Bell outcome on each state, applies the matching correction
/// and compares with the input. Also checks that all four outcomes have
/// probability 1/4.
pub fn verify_quantum_correctness(states: &[PureState], tolerance: f64) -> Result<QuantumCorrectness, VerifyError> {
    if states.is_empty() {
        return Err(VerifyError::Precondition("quantum correctness needs at least one state".into()));
    }
    let epr = prepare_epr();
    let mut max_deficit: f64 = 0.0;
    let mut max_dev: f64 = 0.0;
    let mut failures = Vec::new();
    for psi in states {
        let register = compose(psi, &epr)?;
        for p in outcome_probabilities(&register)? {
            max_dev = max_dev.max((p - 0.25).abs());
        }
        for outcome in BellOutcome::ALL {
            let branch = project_onto(&register, outcome)?;
            let deficit = 1.0 - fidelity(psi, &apply_correction(&branch.bob_state, outcome));
            max_deficit = max_deficit.max(deficit);
            if deficit > tolerance {
                failures.push(QuantumFailure {
                    psi: *psi,
                    outcome,
                    fidelity_deficit: deficit,
                });
            }
        }
    }
    Ok(QuantumCorrectness {
        states: states.len(),
        branches_checked: states.len() * BellOutcome::ALL.len(),
        max_fidelity_deficit: max_deficit,
        max_probability_deviation: max_dev,
        tolerance,
        pass: failures.is_empty() && max_dev <= tolerance,
        failures,
    })
}

/// Root-mean-square error of [`estimate_state`] on ensembles of `m` boxes in
/// `|x⟩`, over `repetitions` fresh ensembles.
pub fn tomography_rms(
    exec: &Executor,
    x: f64,
    m: usize,
    repetitions: u64,
    seed: u64,
) -> Result<f64, VerifyError> {
    let schedule = SeedSchedule::new(seed);
    let reps: Vec<u64> = (0..repetitions).collect();
    let squared = exec.map(&reps, |&r| -> Result<f64, VerifyError> {
        let mut rng = schedule.substream(r, StreamLabel::Harness);
        let mut boxes = (0..m)
            .map(|_| prepare_state(x, PreparationMode::Direct, Party::Charlie, &mut rng).map(|(b, _)| b))
            .collect::<Result<Vec<SealedBox>, _>>()?;
        Ok((estimate_state(&mut boxes)? - x).powi(2))
    });
    let mut sum = 0.0;
    for s in squared {
        sum += s?;
    }
    Ok((sum / repetitions as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyCheck {
    pub x: f64,
    pub small_ensemble: usize,
    pub large_ensemble: usize,
    pub repetitions: u64,
    pub rms_small: f64,
    pub rms_large: f64,
    /// `sqrt(x(1−x)/M)` for the small ensemble.
    pub expected_rms_small: f64,
    pub ratio: f64,
    pub expected_ratio: f64,
    pub ratio_low: f64,
    pub ratio_high: f64,
    pub pass: bool,
}

pub fn tomography_scaling(exec: &Executor, cfg: &VerifyConfig) -> Result<TomographyCheck, VerifyError> {
    let t = &cfg.tomography;
    let rms_small = tomography_rms(exec, t.x, t.small_ensemble, t.repetitions, derive_seed(cfg.seed, tags::TOMOGRAPHY, 0))?;
    let rms_large = tomography_rms(exec, t.x, t.large_ensemble, t.repetitions, derive_seed(cfg.seed, tags::TOMOGRAPHY, 1))?;
    let expected_ratio = (t.large_ensemble as f64 / t.small_ensemble as f64).sqrt();
    let ratio = rms_small / rms_large;
    let (ratio_low, ratio_high) = (expected_ratio * (1.0 - t.ratio_tolerance), expected_ratio * (1.0 + t.ratio_tolerance));
    Ok(TomographyCheck {
        x: t.x,
        small_ensemble: t.small_ensemble,
        large_ensemble: t.large_ensemble,
        repetitions: t.repetitions,
        rms_small,
        rms_large,
        expected_rms_small: (t.x * (1.0 - t.x) / t.small_ensemble as f64).sqrt(),
        ratio,
        expected_ratio,
        ratio_low,
        ratio_high,
        pass: ratio_low <= ratio && ratio <= ratio_high,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableCheck {
    pub pure_states: usize,
    pub pure_with_observable: usize,
    /// `(x, exists)` for each classical state checked.
    pub classical: Vec<(f64, bool)>,
    pub pass: bool,
}

/// Pure states have a measurement with a certain outcome; `|x⟩` with
/// `0 < x < 1` does not.
pub fn observable_check(cfg: &VerifyConfig) -> Result<ObservableCheck, VerifyError> {
    let states = haar_states(derive_seed(cfg.seed, tags::OBSERVABLE, 0), cfg.observable.pure_states);
    let pure_with_observable = states.iter().filter(|s| deterministic_observable_exists(*s)).count();
    let classical = cfg
        .observable
        .classical_x
        .iter()
        .map(|&x| Ok((x, deterministic_observable_exists(&ClassicalState::new(x, Party::Charlie)?))))
        .collect::<Result<Vec<_>, VerifyError>>()?;
    Ok(ObservableCheck {
        pure_states: states.len(),
        pure_with_observable,
        pass: pure_with_observable == states.len() && classical.iter().all(|(x, e)| *e == (*x == 0.0 || *x == 1.0)),
        classical,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectnessReport {
    pub classical: ClassicalCorrectness,
    pub oracle: Vec<ClassicalOracle>,
    pub quantum: QuantumCorrectness,
    pub tomography: TomographyCheck,
    pub observable: ObservableCheck,
    pub pass: bool,
}

pub fn run_correctness(exec: &Executor, cfg: &VerifyConfig) -> Result<CorrectnessReport, VerifyError> {
    let classical = verify_classical_correctness(
        exec,
        &cfg.correctness_grid,
        cfg.trials_per_point,
        cfg.seed,
        cfg.z,
        cfg.mode,
    )?;
    let oracle: Vec<ClassicalOracle> = cfg.correctness_grid.iter().map(|&x| ClassicalOracle::new(x)).collect();
    let states = haar_states(derive_seed(cfg.seed, tags::QUANTUM_STATES, 0), cfg.quantum_states);
    let quantum = verify_quantum_correctness(&states, cfg.exact_tolerance)?;
    let tomography = tomography_scaling(exec, cfg)?;
    let observable = observable_check(cfg)?;
    Ok(CorrectnessReport {
        pass: classical.pass
            && oracle.iter().all(|o| o.invariant_holds)
            && quantum.pass
            && tomography.pass
            && observable.pass,
        classical,
        oracle,
        quantum,
        tomography,
        observable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_ket_all_outcomes() {
        let r = verify_quantum_correctness(&[PureState::ZERO_KET], 1e-12).unwrap();
        assert!(r.pass);
        assert_eq!(r.branches_checked, 4);
    }

    #[test]
    fn too_few_trials_rejected() {
        let exec = Executor::new(1).unwrap();
        assert!(matches!(
            verify_classical_correctness(&exec, &[0.5], 10, 1, 3.0, PreparationMode::Direct),
            Err(VerifyError::Precondition(_))
        ));
    }

    #[test]
    fn tomography_rms_near_binomial() {
        let exec = Executor::new(2).unwrap();
        let rms = tomography_rms(&exec, 0.3, 1000, 400, 5).unwrap();
        let expected = (0.21f64 / 1000.0).sqrt();
        assert!((rms / expected - 1.0).abs() < 0.15, "{rms} vs {expected}");
    }
}
