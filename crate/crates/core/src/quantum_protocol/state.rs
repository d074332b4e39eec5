//! Pure states, small registers and density matrices.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::QuantumError;
use crate::party::Party;
use crate::EXACT_TOLERANCE;

/// Amplitudes off unit norm by less than this are renormalized on input.
pub const NORMALIZATION_SLACK: f64 = 1e-6;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// A single-qubit state `α|0⟩ + β|1⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureState {
    alpha: Complex64,
    beta: Complex64,
}

impl PureState {
    pub const ZERO_KET: PureState = PureState {
        alpha: Complex64::new(1.0, 0.0),
        beta: ZERO,
    };
    pub const ONE_KET: PureState = PureState {
        alpha: ZERO,
        beta: Complex64::new(1.0, 0.0),
    };

    /// Accepts amplitudes already normalized to within [`EXACT_TOLERANCE`].
    pub fn new(alpha: Complex64, beta: Complex64) -> Result<Self, QuantumError> {
        let norm = alpha.norm_sqr() + beta.norm_sqr();
        if (norm - 1.0).abs() > EXACT_TOLERANCE {
            return Err(QuantumError::NotNormalized(norm.sqrt()));
        }
        Ok(PureState { alpha, beta })
    }

    /// Scales the amplitudes to unit norm. Fails on the zero vector.
    pub fn normalized(alpha: Complex64, beta: Complex64) -> Result<Self, QuantumError> {
        let norm = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
        if !norm.is_finite() || norm < 1e-300 {
            return Err(QuantumError::NotNormalized(norm));
        }
        Ok(PureState {
            alpha: alpha / norm,
            beta: beta / norm,
        })
    }

    /// Parses `(re α, im α, re β, im β)` from user input. A norm within
    /// [`NORMALIZATION_SLACK`] of one is renormalized and reported with
    /// `true`; anything further off is rejected.
    pub fn from_reals(reals: [f64; 4]) -> Result<(Self, bool), QuantumError> {
        let alpha = Complex64::new(reals[0], reals[1]);
        let beta = Complex64::new(reals[2], reals[3]);
        let norm = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() >= NORMALIZATION_SLACK {
            return Err(QuantumError::NotNormalized(norm));
        }
        let adjusted = (norm - 1.0).abs() > EXACT_TOLERANCE;
        Ok((PureState::normalized(alpha, beta)?, adjusted))
    }

    pub fn alpha(&self) -> Complex64 {
        self.alpha
    }

    pub fn beta(&self) -> Complex64 {
        self.beta
    }

    pub fn amplitudes(&self) -> [Complex64; 2] {
        [self.alpha, self.beta]
    }

    pub fn to_reals(&self) -> [f64; 4] {
        [self.alpha.re, self.alpha.im, self.beta.re, self.beta.im]
    }

    pub fn norm(&self) -> f64 {
        (self.alpha.norm_sqr() + self.beta.norm_sqr()).sqrt()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> Complex64 {
        self.alpha.conj() * other.alpha + self.beta.conj() * other.beta
    }

    /// `(⟨X⟩, ⟨Y⟩, ⟨Z⟩)`.
    pub fn bloch_vector(&self) -> [f64; 3] {
        let cross = self.alpha.conj() * self.beta;
        [
            2.0 * cross.re,
            2.0 * cross.im,
            self.alpha.norm_sqr() - self.beta.norm_sqr(),
        ]
    }

    pub fn density(&self) -> DensityMatrix {
        DensityMatrix::projector(&self.amplitudes())
    }
}

impl Serialize for PureState {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_reals().serialize(s)
    }
}

impl<'de> Deserialize<'de> for PureState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let reals = <[f64; 4]>::deserialize(d)?;
        PureState::from_reals(reals)
            .map(|(s, _)| s)
            .map_err(serde::de::Error::custom)
    }
}

/// `|⟨a|b⟩|²`, clamped to `[0, 1]`.
pub fn fidelity(a: &PureState, b: &PureState) -> f64 {
    a.inner(b).norm_sqr().clamp(0.0, 1.0)
}

/// Haar-random single-qubit state: a normalized vector of four independent
/// standard normals.
pub fn random_pure_state<R: Rng + ?Sized>(rng: &mut R) -> PureState {
    loop {
        let mut g = [0.0f64; 4];
        for v in &mut g {
            *v = rng.sample(StandardNormal);
        }
        if let Ok(state) = PureState::normalized(Complex64::new(g[0], g[1]), Complex64::new(g[2], g[3])) {
            return state;
        }
    }
}

/// Amplitudes over 1–3 labelled qubits. The first label is the most
/// significant bit of the basis index.
#[derive(Debug, Clone, PartialEq)]
pub struct RegisterState {
    labels: Vec<Party>,
    amplitudes: Vec<Complex64>,
}

impl RegisterState {
    pub fn new(labels: Vec<Party>, amplitudes: Vec<Complex64>) -> Result<Self, QuantumError> {
        let k = labels.len();
        if !(1..=3).contains(&k) || amplitudes.len() != 1 << k {
            return Err(QuantumError::BadRegister {
                qubits: k,
                amplitudes: amplitudes.len(),
            });
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(QuantumError::DuplicateLabel(*l));
            }
        }
        let state = RegisterState { labels, amplitudes };
        let norm = state.norm();
        if (norm - 1.0).abs() > EXACT_TOLERANCE {
            return Err(QuantumError::NotNormalized(norm));
        }
        Ok(state)
    }

    pub fn single(label: Party, psi: &PureState) -> Self {
        RegisterState {
            labels: vec![label],
            amplitudes: psi.amplitudes().to_vec(),
        }
    }

    pub fn labels(&self) -> &[Party] {
        &self.labels
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `self ⊗ other`, with `self`'s qubits first.
    pub fn tensor(&self, other: &RegisterState) -> Result<RegisterState, QuantumError> {
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        let amplitudes = self
            .amplitudes
            .iter()
            .flat_map(|a| other.amplitudes.iter().map(move |b| a * b))
            .collect();
        RegisterState::new(labels, amplitudes)
    }

    fn position(&self, label: Party) -> Result<usize, QuantumError> {
        self.labels
            .iter()
            .position(|l| *l == label)
            .ok_or(QuantumError::MissingLabel(label))
    }
}

/// `(|00⟩ + |11⟩)/√2` shared by Alice (first qubit) and Bob.
pub fn prepare_epr() -> RegisterState {
    let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    RegisterState {
        labels: vec![Party::Alice, Party::Bob],
        amplitudes: vec![s, ZERO, ZERO, s],
    }
}

/// Charlie's qubit joins the pair: `|ψ⟩_charlie ⊗ |epr⟩_{alice,bob}`.
pub fn compose(psi: &PureState, epr: &RegisterState) -> Result<RegisterState, QuantumError> {
    RegisterState::single(Party::Charlie, psi).tensor(epr)
}

/// A dense Hermitian matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    entries: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn from_entries(dim: usize, entries: Vec<Complex64>) -> Self {
        assert_eq!(entries.len(), dim * dim, "density matrix must be square");
        DensityMatrix { dim, entries }
    }

    pub fn projector(v: &[Complex64]) -> Self {
        let dim = v.len();
        let entries = (0..dim * dim).map(|k| v[k / dim] * v[k % dim].conj()).collect();
        DensityMatrix { dim, entries }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self::diagonal(&vec![1.0 / dim as f64; dim])
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        let mut entries = vec![ZERO; dim * dim];
        for (i, d) in diag.iter().enumerate() {
            entries[i * dim + i] = Complex64::new(*d, 0.0);
        }
        DensityMatrix { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        (0..self.dim).all(|i| (0..self.dim).all(|j| (self.get(i, j) - self.get(j, i).conj()).norm() <= tol))
    }

    /// Frobenius norm of `self − other`.
    pub fn distance(&self, other: &DensityMatrix) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Eigenvalues of a 2×2 Hermitian matrix, ascending.
    pub fn eigenvalues_2x2(&self) -> [f64; 2] {
        assert_eq!(self.dim, 2, "eigenvalues_2x2 on a {}x{} matrix", self.dim, self.dim);
        let a = self.get(0, 0).re;
        let d = self.get(1, 1).re;
        let b = self.get(0, 1);
        let mean = (a + d) / 2.0;
        let spread = (((a - d) / 2.0).powi(2) + b.norm_sqr()).sqrt();
        [mean - spread, mean + spread]
    }
}

/// Partial trace down to a single qubit.
pub fn reduced_density(state: &RegisterState, keep: Party) -> Result<DensityMatrix, QuantumError> {
    reduced_density_of(state, &[keep])
}

/// Partial trace down to `keep`, in the given order.
pub fn reduced_density_of(state: &RegisterState, keep: &[Party]) -> Result<DensityMatrix, QuantumError> {
    let n = state.qubits();
    let kept: Vec<usize> = keep.iter().map(|l| state.position(*l)).collect::<Result<_, _>>()?;
    for (i, p) in kept.iter().enumerate() {
        if kept[..i].contains(p) {
            return Err(QuantumError::DuplicateLabel(state.labels[*p]));
        }
    }
    let traced: Vec<usize> = (0..n).filter(|p| !kept.contains(p)).collect();
    // Bit position of qubit p inside the basis index.
    let shift = |p: usize| n - 1 - p;
    let index = |k: usize, t: usize| {
        let mut idx = 0usize;
        for (j, p) in kept.iter().enumerate() {
            let bit = (k >> (kept.len() - 1 - j)) & 1;
            idx |= bit << shift(*p);
        }
        for (j, p) in traced.iter().enumerate() {
            let bit = (t >> (traced.len() - 1 - j)) & 1;
            idx |= bit << shift(*p);
        }
        idx
    };
    let dim = 1 << kept.len();
    let mut entries = vec![ZERO; dim * dim];
    for r in 0..dim {
        for c in 0..dim {
            entries[r * dim + c] = (0..1usize << traced.len())
                .map(|t| state.amplitudes[index(r, t)] * state.amplitudes[index(c, t)].conj())
                .sum();
        }
    }
    Ok(DensityMatrix { dim, entries })
}
