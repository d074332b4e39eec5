//! Coins in sealed boxes and the epistemic states that describe them.
//!
//! A coin shows one of two faces; Heads is the reference configuration. A
//! [`ClassicalState`] `|x⟩` is somebody's knowledge that the coin inside a
//! box shows Heads with probability `x`. The coin itself is a
//! [`SealedBox`]: its face is fixed but cannot be read until the box is
//! opened, and turning the box over (a 180° rotation) swaps which face is up.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::party::Party;

/// Largest ensemble used by the ensemble preparation method is `10^6` boxes.
pub const MAX_ENSEMBLE_DIGITS: u32 = 6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("probability {0} is outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("x = {x} needs more than {MAX_ENSEMBLE_DIGITS} decimal digits; ensemble preparation is capped at 10^{MAX_ENSEMBLE_DIGITS} boxes")]
    EnsemblePrecision { x: f64 },
    #[error("ensemble of {size} boxes cannot hold {n_heads} heads")]
    EnsembleCount { n_heads: usize, size: usize },
    #[error("box {0} has already been opened")]
    AlreadyOpened(BoxId),
    #[error("cannot estimate a state from an empty collection of boxes")]
    EmptyCollection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Face {
    Heads,
    Tails,
}

impl Face {
    /// The other face; an involution.
    pub fn flip(self) -> Face {
        match self {
            Face::Heads => Face::Tails,
            Face::Tails => Face::Heads,
        }
    }

    pub fn is_heads(self) -> bool {
        self == Face::Heads
    }
}

/// A probability in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Probability(f64);

impl Probability {
    pub const HALF: Probability = Probability(0.5);

    pub fn new(p: f64) -> Result<Self, StateError> {
        if (0.0..=1.0).contains(&p) {
            Ok(Probability(p))
        } else {
            Err(StateError::ProbabilityOutOfRange(p))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn complement(self) -> Probability {
        Probability(1.0 - self.0)
    }
}

impl TryFrom<f64> for Probability {
    type Error = StateError;
    fn try_from(p: f64) -> Result<Self, Self::Error> {
        Probability::new(p)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

/// Identifier written on the outside of a box. Carries no information about
/// the coin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BoxId(pub u64);

impl BoxId {
    pub fn fresh() -> BoxId {
        static NEXT: AtomicU64 = AtomicU64::new(1);
        BoxId(NEXT.fetch_add(1, Ordering::Relaxed))
    }
}

impl fmt::Display for BoxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// A coin sealed in a tightly fitting box.
///
/// While sealed, the only operations are [`rotate`](SealedBox::rotate) and
/// [`open`](SealedBox::open); nothing reports the face. Boxes are not
/// `Clone`: a box is held by exactly one owner at a time.
#[derive(PartialEq, Eq)]
pub struct SealedBox {
    id: BoxId,
    hidden_face: Face,
    sealed: bool,
}

impl fmt::Debug for SealedBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut d = f.debug_struct("SealedBox");
        d.field("id", &self.id);
        match self.face() {
            Some(face) => d.field("face", &face),
            None => d.field("face", &"sealed"),
        };
        d.finish()
    }
}

impl SealedBox {
    /// Places a coin showing `face` in a new box and seals it.
    pub fn seal(face: Face) -> SealedBox {
        SealedBox {
            id: BoxId::fresh(),
            hidden_face: face,
            sealed: true,
        }
    }

    pub fn id(&self) -> BoxId {
        self.id
    }

    pub fn is_sealed(&self) -> bool {
        self.sealed
    }

    /// Turns the box through 180°, which swaps the face the coin shows.
    pub fn rotate(&mut self) -> Result<(), StateError> {
        self.ensure_sealed()?;
        self.hidden_face = self.hidden_face.flip();
        Ok(())
    }

    /// Unseals the box and looks at the coin.
    pub fn open(&mut self) -> Result<Face, StateError> {
        self.ensure_sealed()?;
        self.sealed = false;
        Ok(self.hidden_face)
    }

    /// The face of an opened box; `None` while sealed.
    pub fn face(&self) -> Option<Face> {
        (!self.sealed).then_some(self.hidden_face)
    }

    /// Ground truth for the omniscient trial log. Party logic never calls this.
    pub(crate) fn hidden_face(&self) -> Face {
        self.hidden_face
    }

    fn ensure_sealed(&self) -> Result<(), StateError> {
        if self.sealed {
            Ok(())
        } else {
            Err(StateError::AlreadyOpened(self.id))
        }
    }
}

/// The epistemic state `|x⟩`: `owner` believes the coin shows Heads with
/// probability `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalState {
    x: Probability,
    owner: Party,
}

impl ClassicalState {
    pub fn new(x: f64, owner: Party) -> Result<Self, StateError> {
        Ok(ClassicalState {
            x: Probability::new(x)?,
            owner,
        })
    }

    pub fn x(&self) -> f64 {
        self.x.value()
    }

    pub fn owner(&self) -> Party {
        self.owner
    }

    /// The description after the box is turned upside down: `|x⟩ → |1−x⟩`.
    pub fn rotated(self) -> ClassicalState {
        ClassicalState {
            x: self.x.complement(),
            owner: self.owner,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreparationMode {
    /// One Bernoulli(x) draw per box.
    #[default]
    Direct,
    /// Draw from an explicitly built ensemble of `10^d` boxes, `d` being the
    /// decimal precision of `x`.
    Ensemble,
}

/// Returns `(n_heads, size)` for the smallest ensemble `size = 10^d` in which
/// `x · size` is a whole number.
pub fn ensemble_dimensions(x: f64) -> Result<(usize, usize), StateError> {
    let x = Probability::new(x)?.value();
    for digits in 0..=MAX_ENSEMBLE_DIGITS {
        let size = 10usize.pow(digits);
        let scaled = x * size as f64;
        let rounded = scaled.round();
        // Only floating-point representation error is forgiven here.
        if (scaled - rounded).abs() <= 1e-9 {
            return Ok((rounded as usize, size));
        }
    }
    Err(StateError::EnsemblePrecision { x })
}

/// `size` sealed boxes of which exactly `n_heads` hold a coin showing Heads,
/// in shuffled order.
#[derive(Debug)]
pub struct Ensemble {
    n_heads: usize,
    size: usize,
    boxes: Vec<SealedBox>,
}

impl Ensemble {
    pub fn new<R: Rng + ?Sized>(n_heads: usize, size: usize, rng: &mut R) -> Result<Self, StateError> {
        if n_heads > size {
            return Err(StateError::EnsembleCount { n_heads, size });
        }
        let mut boxes: Vec<SealedBox> = (0..size)
            .map(|i| SealedBox::seal(if i < n_heads { Face::Heads } else { Face::Tails }))
            .collect();
        boxes.shuffle(rng);
        Ok(Ensemble {
            n_heads,
            size,
            boxes,
        })
    }

    /// The ensemble numbered `x · N` for the smallest admissible `N`.
    pub fn for_state<R: Rng + ?Sized>(x: f64, rng: &mut R) -> Result<Self, StateError> {
        let (n_heads, size) = ensemble_dimensions(x)?;
        Ensemble::new(n_heads, size, rng)
    }

    pub fn n_heads(&self) -> usize {
        self.n_heads
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn remaining(&self) -> usize {
        self.boxes.len()
    }

    /// Removes one box chosen uniformly at random (no replacement).
    pub fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<SealedBox> {
        draw_uniform(&mut self.boxes, rng)
    }

    pub fn into_boxes(self) -> Vec<SealedBox> {
        self.boxes
    }
}

fn draw_uniform<T, R: Rng + ?Sized>(items: &mut Vec<T>, rng: &mut R) -> Option<T> {
    if items.is_empty() {
        return None;
    }
    let i = rng.random_range(0..items.len());
    Some(items.swap_remove(i))
}

fn bernoulli_face<R: Rng + ?Sized>(p: f64, rng: &mut R) -> Face {
    if rng.random::<f64>() < p {
        Face::Heads
    } else {
        Face::Tails
    }
}

/// Prepares a box whose coin shows Heads with probability `x`, together with
/// the preparer's description of it.
///
/// In ensemble mode the ensemble is rebuilt for every preparation and a single
/// box is drawn from it.
pub fn prepare_state<R: Rng + ?Sized>(
    x: f64,
    mode: PreparationMode,
    preparer: Party,
    rng: &mut R,
) -> Result<(SealedBox, ClassicalState), StateError> {
    let state = ClassicalState::new(x, preparer)?;
    let sealed_box = match mode {
        PreparationMode::Direct => SealedBox::seal(bernoulli_face(x, rng)),
        PreparationMode::Ensemble => {
            let mut ensemble = Ensemble::for_state(x, rng)?;
            ensemble
                .draw(rng)
                .expect("an ensemble has at least one box")
        }
    };
    Ok((sealed_box, state))
}

/// Two boxes whose coins show the same face: both Heads with probability `y`,
/// both Tails otherwise.
#[derive(Debug)]
pub struct CorrelatedPairState {
    y: Probability,
    pair: (SealedBox, SealedBox),
}

impl CorrelatedPairState {
    fn from_face(y: Probability, face: Face) -> Self {
        CorrelatedPairState {
            y,
            pair: (SealedBox::seal(face), SealedBox::seal(face)),
        }
    }

    pub fn y(&self) -> f64 {
        self.y.value()
    }

    pub fn boxes(&self) -> (&SealedBox, &SealedBox) {
        (&self.pair.0, &self.pair.1)
    }

    pub fn into_boxes(self) -> (SealedBox, SealedBox) {
        self.pair
    }
}

/// Prepares `|y⟩_HH + |1−y⟩_TT`.
///
/// Ensemble mode builds ensemble number `y · N` of `N` box pairs (`n` of them
/// Heads-Heads) and draws one pair.
pub fn prepare_correlated_pair<R: Rng + ?Sized>(
    y: f64,
    mode: PreparationMode,
    rng: &mut R,
) -> Result<CorrelatedPairState, StateError> {
    let y = Probability::new(y)?;
    match mode {
        PreparationMode::Direct => Ok(CorrelatedPairState::from_face(y, bernoulli_face(y.value(), rng))),
        PreparationMode::Ensemble => {
            let (n_heads, size) = ensemble_dimensions(y.value())?;
            let mut pairs: Vec<CorrelatedPairState> = (0..size)
                .map(|i| {
                    let face = if i < n_heads { Face::Heads } else { Face::Tails };
                    CorrelatedPairState::from_face(y, face)
                })
                .collect();
            pairs.shuffle(rng);
            Ok(draw_uniform(&mut pairs, rng).expect("an ensemble has at least one pair"))
        }
    }
}

/// Prepares `|1/2⟩_HH + |1/2⟩_TT` from a single pair: both coins go in Heads
/// up, then both boxes receive the same random number of half turns. Only the
/// parity of that number matters, so a single uniform bit is drawn; it is not
/// recorded anywhere.
pub fn prepare_shared_half_by_rotation<R: Rng + ?Sized>(rng: &mut R) -> CorrelatedPairState {
    let mut state = CorrelatedPairState::from_face(Probability::HALF, Face::Heads);
    if rng.random::<bool>() {
        state.pair.0.rotate().expect("fresh box is sealed");
        state.pair.1.rotate().expect("fresh box is sealed");
    }
    state
}

/// Opens every box and returns the fraction showing Heads.
///
/// A single box gives `0` or `1` whatever the true `x`; determining `|x⟩`
/// takes a whole ensemble. Fails without opening anything if a box is
/// already open.
pub fn estimate_state(boxes: &mut [SealedBox]) -> Result<f64, StateError> {
    if boxes.is_empty() {
        return Err(StateError::EmptyCollection);
    }
    if let Some(opened) = boxes.iter().find(|b| !b.is_sealed()) {
        return Err(StateError::AlreadyOpened(opened.id()));
    }
    let mut heads = 0usize;
    for b in boxes.iter_mut() {
        if b.open()?.is_heads() {
            heads += 1;
        }
    }
    Ok(heads as f64 / boxes.len() as f64)
}
