//! Exact measures on the extended state space `X̄ = X ∪ {∂}`.
//!
//! A [`Measure`] is a sparse list of positive rational weights sorted by
//! [`ExtendedState`]. A [`Belief`] is a measure of total mass one that is either
//! supported on `X` or equal to the cemetery belief `δ_∂`. [`StepMapping`] is a
//! self-map of `X̄` stored as a table; pushforwards, renormalization and the
//! forward/backward restrictions used by the filtering algebra live here.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::value::{format_rational_fraction, Rational};

/// A state index of `X` or the cemetery point `∂`.
///
/// The derived order places every state before `∂`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExtendedState {
    State(usize),
    Cemetery,
}

impl ExtendedState {
    pub fn state(self) -> Option<usize> {
        match self {
            ExtendedState::State(x) => Some(x),
            ExtendedState::Cemetery => None,
        }
    }

    pub fn is_cemetery(self) -> bool {
        self == ExtendedState::Cemetery
    }
}

impl fmt::Display for ExtendedState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedState::State(x) => write!(f, "{x}"),
            ExtendedState::Cemetery => write!(f, "CEMETERY"),
        }
    }
}

pub type StateSet = BTreeSet<usize>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MeasureError {
    #[error("negative weight {weight} at {point}")]
    NegativeWeight { point: ExtendedState, weight: String },
    #[error("belief mass is {0}, expected exactly 1")]
    MassNotOne(String),
    #[error("state index {index} out of range for {num_states} states")]
    StateOutOfRange { index: usize, num_states: usize },
}

/// Nonnegative measure on `X̄` with canonical sparse storage.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Measure {
    entries: Vec<(ExtendedState, Rational)>,
}

impl Measure {
    pub fn zero() -> Self {
        Measure::default()
    }

    /// Builds a measure, merging repeated points and dropping zero weights.
    pub fn new<I>(weights: I) -> Result<Self, MeasureError>
    where
        I: IntoIterator<Item = (ExtendedState, Rational)>,
    {
        let mut acc: BTreeMap<ExtendedState, Rational> = BTreeMap::new();
        for (point, weight) in weights {
            if weight.is_negative() {
                return Err(MeasureError::NegativeWeight {
                    point,
                    weight: format_rational_fraction(&weight),
                });
            }
            *acc.entry(point).or_insert_with(Rational::zero) += weight;
        }
        Ok(Self::from_sorted_unchecked(
            acc.into_iter().filter(|(_, w)| !w.is_zero()).collect(),
        ))
    }

    /// Entries must be sorted by point, unique and strictly positive.
    pub(crate) fn from_sorted_unchecked(entries: Vec<(ExtendedState, Rational)>) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        debug_assert!(entries.iter().all(|(_, w)| w.is_positive()));
        Measure { entries }
    }

    pub fn entries(&self) -> &[(ExtendedState, Rational)] {
        &self.entries
    }

    pub fn weight(&self, point: ExtendedState) -> Rational {
        self.entries
            .binary_search_by(|(p, _)| p.cmp(&point))
            .map(|i| self.entries[i].1.clone())
            .unwrap_or_else(|_| Rational::zero())
    }

    pub fn total(&self) -> Rational {
        self.entries.iter().map(|(_, w)| w).sum()
    }

    /// `m(X)`: the mass carried by genuine states.
    pub fn state_mass(&self) -> Rational {
        self.entries
            .iter()
            .filter(|(p, _)| !p.is_cemetery())
            .map(|(_, w)| w)
            .sum()
    }

    pub fn support(&self) -> Vec<ExtendedState> {
        self.entries.iter().map(|(p, _)| *p).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }
}

/// A probability measure in `Δ(X) ∪ {δ_∂}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Belief {
    measure: Measure,
}

impl Belief {
    pub fn cemetery() -> Self {
        Belief {
            measure: Measure::from_sorted_unchecked(vec![(ExtendedState::Cemetery, Rational::one())]),
        }
    }

    pub fn dirac(state: usize) -> Self {
        Belief {
            measure: Measure::from_sorted_unchecked(vec![(ExtendedState::State(state), Rational::one())]),
        }
    }

    /// Uniform belief on a nonempty set of states.
    pub fn uniform<I: IntoIterator<Item = usize>>(states: I) -> Self {
        let set: StateSet = states.into_iter().collect();
        assert!(!set.is_empty(), "uniform belief needs a nonempty support");
        let w = Rational::new(1.into(), set.len().into());
        Belief {
            measure: Measure::from_sorted_unchecked(
                set.into_iter().map(|x| (ExtendedState::State(x), w.clone())).collect(),
            ),
        }
    }

    pub(crate) fn from_measure_unchecked(measure: Measure) -> Self {
        Belief { measure }
    }

    pub fn measure(&self) -> &Measure {
        &self.measure
    }

    pub fn entries(&self) -> &[(ExtendedState, Rational)] {
        self.measure.entries()
    }

    pub fn is_cemetery(&self) -> bool {
        matches!(self.measure.entries(), [(ExtendedState::Cemetery, _)])
    }

    pub fn weight(&self, state: usize) -> Rational {
        self.measure.weight(ExtendedState::State(state))
    }

    /// `(state, weight)` pairs; empty for `δ_∂`.
    pub fn state_weights(&self) -> impl Iterator<Item = (usize, &Rational)> {
        self.measure
            .entries()
            .iter()
            .filter_map(|(p, w)| p.state().map(|x| (x, w)))
    }

    /// Support restricted to `X`, ascending.
    pub fn states(&self) -> Vec<usize> {
        self.state_weights().map(|(x, _)| x).collect()
    }

    pub fn support_size(&self) -> usize {
        self.measure.entries().len()
    }
}

impl fmt::Display for Belief {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_cemetery() {
            return write!(f, "CEMETERY");
        }
        write!(f, "{{")?;
        for (i, (x, w)) in self.state_weights().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{x}: {}", format_rational_fraction(w))?;
        }
        write!(f, "}}")
    }
}

/// Builds a belief on `X` from state weights that sum to exactly one.
pub fn make_belief<I>(weights: I, num_states: usize) -> Result<Belief, MeasureError>
where
    I: IntoIterator<Item = (usize, Rational)>,
{
    let mut pairs = Vec::new();
    for (x, w) in weights {
        if x >= num_states {
            return Err(MeasureError::StateOutOfRange { index: x, num_states });
        }
        pairs.push((ExtendedState::State(x), w));
    }
    let measure = Measure::new(pairs)?;
    let total = measure.total();
    if !total.is_one() {
        return Err(MeasureError::MassNotOne(format_rational_fraction(&total)));
    }
    Ok(Belief { measure })
}

pub fn support(b: &Belief) -> Vec<ExtendedState> {
    b.measure.support()
}

/// `R(m)`: rescales the `X`-part to mass one, or returns `δ_∂` when `m(X) = 0`.
pub fn renormalize(m: &Measure) -> Belief {
    let mass = m.state_mass();
    if mass.is_zero() {
        return Belief::cemetery();
    }
    let entries = m
        .entries()
        .iter()
        .filter(|(p, _)| !p.is_cemetery())
        .map(|(p, w)| (*p, w / &mass))
        .collect();
    Belief {
        measure: Measure::from_sorted_unchecked(entries),
    }
}

/// A self-map of `X̄`, stored with the image of `∂` in the last slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StepMapping {
    image: Vec<ExtendedState>,
}

impl StepMapping {
    /// `table[x]` is the image of state `x`; `cemetery_image` the image of `∂`.
    pub fn new(table: Vec<ExtendedState>, cemetery_image: ExtendedState) -> Self {
        let mut image = table;
        image.push(cemetery_image);
        let m = StepMapping { image };
        let n = m.num_states();
        debug_assert!(m.image.iter().all(|p| p.state().is_none_or(|x| x < n)));
        m
    }

    /// Maps that fix `∂`.
    pub fn from_states(table: Vec<ExtendedState>) -> Self {
        Self::new(table, ExtendedState::Cemetery)
    }

    pub fn identity(num_states: usize) -> Self {
        Self::from_states((0..num_states).map(ExtendedState::State).collect())
    }

    /// Embeds a total map `X → X` with `∂ ↦ ∂`.
    pub fn embed(f: &[usize]) -> Self {
        Self::from_states(f.iter().map(|&y| ExtendedState::State(y)).collect())
    }

    pub fn num_states(&self) -> usize {
        self.image.len() - 1
    }

    pub fn apply(&self, p: ExtendedState) -> ExtendedState {
        match p {
            ExtendedState::State(x) => self.image[x],
            ExtendedState::Cemetery => self.image[self.num_states()],
        }
    }

    pub fn image_of_state(&self, x: usize) -> ExtendedState {
        self.image[x]
    }

    pub fn fixes_cemetery(&self) -> bool {
        self.image[self.num_states()].is_cemetery()
    }

    /// `g⁻¹(X)`: states sent to a genuine state.
    pub fn state_preimage(&self) -> StateSet {
        (0..self.num_states())
            .filter(|&x| !self.image[x].is_cemetery())
            .collect()
    }

    pub fn table(&self) -> &[ExtendedState] {
        &self.image
    }
}

impl fmt::Display for StepMapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, p) in self.image.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, "]")
    }
}

/// `(g⋆m)(d) = m(g⁻¹(d))`.
pub fn pushforward(g: &StepMapping, m: &Measure) -> Measure {
    let mut acc: BTreeMap<ExtendedState, Rational> = BTreeMap::new();
    for (p, w) in m.entries() {
        *acc.entry(g.apply(*p)).or_insert_with(Rational::zero) += w;
    }
    Measure::from_sorted_unchecked(acc.into_iter().collect())
}

/// `f_Y`: keeps `f(x)` when it lands in `subset`, otherwise sends `x` to `∂`.
pub fn forward_restrict(f: &[usize], subset: &StateSet) -> StepMapping {
    StepMapping::from_states(
        f.iter()
            .map(|&y| {
                if subset.contains(&y) {
                    ExtendedState::State(y)
                } else {
                    ExtendedState::Cemetery
                }
            })
            .collect(),
    )
}

/// `f^Y`: keeps `f(x)` only for `x` in `subset`.
pub fn backward_restrict(f: &[usize], subset: &StateSet) -> StepMapping {
    StepMapping::from_states(
        f.iter()
            .enumerate()
            .map(|(x, &y)| {
                if subset.contains(&x) {
                    ExtendedState::State(y)
                } else {
                    ExtendedState::Cemetery
                }
            })
            .collect(),
    )
}

/// `g2 ∘ g1`.
pub fn compose_mappings(g2: &StepMapping, g1: &StepMapping) -> StepMapping {
    assert_eq!(
        g2.num_states(),
        g1.num_states(),
        "mappings act on different state spaces"
    );
    StepMapping {
        image: g1.image.iter().map(|&p| g2.apply(p)).collect(),
    }
}

/// Injective text encoding of a belief: `"x:p/q,..."` or `"CEMETERY"`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BeliefKey(String);

impl BeliefKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for BeliefKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn canonical_key(b: &Belief) -> BeliefKey {
    if b.is_cemetery() {
        return BeliefKey("CEMETERY".to_string());
    }
    let parts: Vec<String> = b
        .state_weights()
        .map(|(x, w)| format!("{x}:{}", format_rational_fraction(w)))
        .collect();
    BeliefKey(parts.join(","))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(BigInt::from(n), BigInt::from(d))
    }

    fn s(x: usize) -> ExtendedState {
        ExtendedState::State(x)
    }

    const D: ExtendedState = ExtendedState::Cemetery;

    fn half_half() -> Belief {
        make_belief([(0, q(1, 2)), (1, q(1, 2))], 3).unwrap()
    }

    // F^{ū₂,ō₁} and F^{ū₁,ō₂} of the three-state tight-bound instance.
    fn rotate3() -> StepMapping {
        StepMapping::from_states(vec![s(1), s(2), s(0)])
    }

    fn keep_last3() -> StepMapping {
        StepMapping::from_states(vec![D, D, s(2)])
    }

    #[test]
    fn make_belief_examples() {
        assert_eq!(support(&half_half()), vec![s(0), s(1)]);
        let dirac = make_belief([(0, q(1, 1))], 3).unwrap();
        assert_eq!(dirac, Belief::dirac(0));
        assert_eq!(support(&dirac).len(), 1);
        assert_eq!(
            make_belief([(0, q(1, 3)), (1, q(1, 3))], 3),
            Err(MeasureError::MassNotOne("2/3".into()))
        );
        assert!(matches!(
            make_belief([(0, q(-1, 2)), (1, q(3, 2))], 3),
            Err(MeasureError::NegativeWeight { .. })
        ));
        assert!(matches!(
            make_belief([(3, q(1, 1))], 3),
            Err(MeasureError::StateOutOfRange { .. })
        ));
    }

    #[test]
    fn support_examples() {
        assert_eq!(support(&Belief::cemetery()), vec![D]);
        let tank = Belief::uniform(260..=300);
        assert_eq!(support(&tank).len(), 41);
        assert_eq!(support(&tank)[0], s(260));
    }

    #[test]
    fn renormalize_examples() {
        let m = Measure::new([(s(0), q(1, 4)), (s(1), q(1, 4)), (D, q(1, 2))]).unwrap();
        assert_eq!(renormalize(&m), half_half());
        let m = Measure::new([(D, q(1, 1))]).unwrap();
        assert_eq!(renormalize(&m), Belief::cemetery());
        assert_eq!(renormalize(&Measure::zero()), Belief::cemetery());
    }

    #[test]
    fn pushforward_examples() {
        let b = half_half();
        assert_eq!(&pushforward(&StepMapping::identity(3), b.measure()), b.measure());
        let moved = pushforward(&rotate3(), b.measure());
        assert_eq!(moved.entries(), &[(s(1), q(1, 2)), (s(2), q(1, 2))]);
        let killed = pushforward(&keep_last3(), b.measure());
        assert_eq!(killed.entries(), &[(D, q(1, 1))]);
    }

    #[test]
    fn restriction_examples() {
        let f = [1usize, 2, 0];
        let all: StateSet = (0..3).collect();
        assert_eq!(forward_restrict(&f, &all), StepMapping::embed(&f));
        assert_eq!(
            forward_restrict(&f, &StateSet::new()),
            StepMapping::from_states(vec![D, D, D])
        );
        let id = [0usize, 1, 2];
        assert_eq!(forward_restrict(&id, &[2].into()), keep_last3());
        assert_eq!(backward_restrict(&f, &all), StepMapping::embed(&f));
        assert_eq!(
            backward_restrict(&id, &[0].into()),
            StepMapping::from_states(vec![s(0), D, D])
        );
    }

    #[test]
    fn composition_examples() {
        let g = rotate3();
        assert_eq!(compose_mappings(&g, &StepMapping::identity(3)), g);
        let gg = compose_mappings(&g, &g);
        assert_eq!(gg.apply(s(0)), s(2));
        assert_eq!(gg.apply(D), D);
    }

    #[test]
    fn keys_are_canonical() {
        let a = make_belief([(1, q(1, 2)), (0, q(1, 2))], 3).unwrap();
        let b = make_belief([(0, q(2, 4)), (1, q(1, 2))], 3).unwrap();
        assert_eq!(canonical_key(&a), canonical_key(&b));
        assert_eq!(canonical_key(&a).as_str(), "0:1/2,1:1/2");
        assert_ne!(canonical_key(&Belief::cemetery()), canonical_key(&Belief::dirac(0)));
    }
}
