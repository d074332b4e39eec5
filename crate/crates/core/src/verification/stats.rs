//! Binomial intervals and chi-square tests.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// A Bernoulli frequency checked against a target probability.
///
/// The pass band is `target ± z·sqrt(target(1−target)/n)`, computed from the
/// target rather than the estimate so that targets of 0 and 1 demand an exact
/// match. `ci_low..ci_high` is the normal-approximation interval around the
/// estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloResult {
    pub trials: u64,
    pub successes: u64,
    pub point_estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub target: f64,
    pub z: f64,
    /// Half-width of the pass band.
    pub tolerance: f64,
    pub pass: bool,
}

/// Absorbs rounding in `|p̂ − target|` when the band has zero width.
const BAND_SLACK: f64 = 1e-12;

impl MonteCarloResult {
    pub fn binomial(successes: u64, trials: u64, target: f64, z: f64) -> Self {
        assert!(successes <= trials, "{successes} successes in {trials} trials");
        if trials == 0 {
            return MonteCarloResult {
                trials,
                successes,
                point_estimate: 0.0,
                ci_low: 0.0,
                ci_high: 1.0,
                target,
                z,
                tolerance: 0.0,
                pass: false,
            };
        }
        let n = trials as f64;
        let p = successes as f64 / n;
        let half = z * (p * (1.0 - p) / n).sqrt();
        let tolerance = z * (target * (1.0 - target) / n).sqrt();
        MonteCarloResult {
            trials,
            successes,
            point_estimate: p,
            ci_low: (p - half).max(0.0),
            ci_high: (p + half).min(1.0),
            target,
            z,
            tolerance,
            pass: (p - target).abs() <= tolerance + BAND_SLACK,
        }
    }

    pub fn contains_target(&self) -> bool {
        self.ci_low <= self.target && self.target <= self.ci_high
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: u32,
    pub p_value: f64,
}

impl ChiSquareTest {
    pub fn passes(&self, alpha: f64) -> bool {
        self.p_value > alpha
    }

    fn from_statistic(statistic: f64, dof: u32) -> Self {
        let p_value = if dof == 0 {
            1.0
        } else {
            ChiSquared::new(dof as f64).expect("positive dof").sf(statistic)
        };
        ChiSquareTest {
            statistic,
            dof,
            p_value,
        }
    }
}

/// Goodness of fit of `counts` to equal cell probabilities.
pub fn chi_square_uniform(counts: &[u64]) -> ChiSquareTest {
    let total: u64 = counts.iter().sum();
    if counts.len() < 2 || total == 0 {
        return ChiSquareTest::from_statistic(0.0, 0);
    }
    let expected = total as f64 / counts.len() as f64;
    let statistic = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    ChiSquareTest::from_statistic(statistic, counts.len() as u32 - 1)
}

/// Two-sample homogeneity test on a 2×k table. Categories empty in both
/// samples are dropped.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> ChiSquareTest {
    assert_eq!(a.len(), b.len(), "samples must share categories");
    let cells: Vec<(u64, u64)> = a.iter().zip(b).map(|(&x, &y)| (x, y)).filter(|&(x, y)| x + y > 0).collect();
    let na: u64 = cells.iter().map(|c| c.0).sum();
    let nb: u64 = cells.iter().map(|c| c.1).sum();
    if cells.len() < 2 || na == 0 || nb == 0 {
        return ChiSquareTest::from_statistic(0.0, 0);
    }
    let n = (na + nb) as f64;
    let mut statistic = 0.0;
    for &(x, y) in &cells {
        let col = (x + y) as f64;
        for (obs, row) in [(x, na), (y, nb)] {
            let expected = row as f64 * col / n;
            statistic += (obs as f64 - expected).powi(2) / expected;
        }
    }
    ChiSquareTest::from_statistic(statistic, cells.len() as u32 - 1)
}
