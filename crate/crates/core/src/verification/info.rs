//! Plug-in mutual information between two discrete variables.

use std::collections::HashMap;
use std::hash::Hash;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InfoError {
    #[error("mutual information of an empty sample")]
    Empty,
    #[error("cell ({row}, {col}) outside a {rows}x{cols} table")]
    OutOfRange { row: usize, col: usize, rows: usize, cols: usize },
}

/// Joint counts of an outcome (row) and a label (column).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    rows: usize,
    cols: usize,
    counts: Vec<u64>,
}

impl ContingencyTable {
    pub fn new(rows: usize, cols: usize) -> Self {
        ContingencyTable {
            rows,
            cols,
            counts: vec![0; rows * cols],
        }
    }

    pub fn add(&mut self, row: usize, col: usize, n: u64) -> Result<(), InfoError> {
        if row >= self.rows || col >= self.cols {
            return Err(InfoError::OutOfRange {
                row,
                col,
                rows: self.rows,
                cols: self.cols,
            });
        }
        self.counts[row * self.cols + col] += n;
        Ok(())
    }

    pub fn get(&self, row: usize, col: usize) -> u64 {
        self.counts[row * self.cols + col]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `Σ p(o,l)·log2(p(o,l)/(p(o)p(l)))` from empirical frequencies, in
    /// bits, clamped at zero.
    pub fn mutual_information(&self) -> Result<f64, InfoError> {
        let n = self.total();
        if n == 0 {
            return Err(InfoError::Empty);
        }
        let row_sums: Vec<u64> = (0..self.rows).map(|r| (0..self.cols).map(|c| self.get(r, c)).sum()).collect();
        let col_sums: Vec<u64> = (0..self.cols).map(|c| (0..self.rows).map(|r| self.get(r, c)).sum()).collect();
        let n = n as f64;
        let mut mi = 0.0;
        for r in 0..self.rows {
            for c in 0..self.cols {
                let joint = self.get(r, c);
                if joint == 0 {
                    continue;
                }
                let joint = joint as f64;
                mi += joint / n * (joint * n / (row_sums[r] as f64 * col_sums[c] as f64)).log2();
            }
        }
        Ok(mi.max(0.0))
    }
}

/// Mutual information of `(outcome, label)` samples. Values are indexed in
/// order of first appearance, so the result depends only on the sample.
pub fn mutual_information<O, L, I>(samples: I) -> Result<f64, InfoError>
where
    O: Eq + Hash,
    L: Eq + Hash,
    I: IntoIterator<Item = (O, L)>,
{
    let mut outcomes: HashMap<O, usize> = HashMap::new();
    let mut labels: HashMap<L, usize> = HashMap::new();
    let mut pairs = Vec::new();
    for (o, l) in samples {
        let next = outcomes.len();
        let r = *outcomes.entry(o).or_insert(next);
        let next = labels.len();
        let c = *labels.entry(l).or_insert(next);
        pairs.push((r, c));
    }
    let mut table = ContingencyTable::new(outcomes.len(), labels.len());
    for (r, c) in pairs {
        table.add(r, c, 1)?;
    }
    table.mutual_information()
}

/// Leading-order bias of the plug-in estimator under independence:
/// `(|O|−1)(|L|−1) / (2N ln 2)` bits.
pub fn plugin_bias_bits(outcomes: usize, labels: usize, samples: u64) -> f64 {
    ((outcomes.saturating_sub(1)) * (labels.saturating_sub(1))) as f64
        / (2.0 * samples as f64 * std::f64::consts::LN_2)
}
