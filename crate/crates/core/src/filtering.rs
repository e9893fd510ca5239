//! Belief dynamics: observation probabilities `Q`, the filter `τ` and the step
//! mappings `F^{u,o}_t` whose renormalized pushforwards reproduce `τ`.

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::measure::{
    forward_restrict, pushforward, renormalize, Belief, ExtendedState, Measure, StateSet, StepMapping,
};
use crate::model::DetPomdpModel;
use crate::value::Rational;

/// A transition `(t, u, o)`: control `u` applied at time `t`, observation `o` received at `t+1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StepKey {
    pub t: usize,
    pub u: usize,
    pub o: usize,
}

/// `Q_{t+1}(b,u,o) = b((h^u_{t+1} ∘ f^u_t)⁻¹(o))`; zero at `δ_∂`.
pub fn obs_prob(model: &DetPomdpModel, t: usize, b: &Belief, u: usize, o: usize) -> Rational {
    b.state_weights()
        .filter(|&(x, _)| model.observe(t, model.next_state(t, x, u), u) == o)
        .map(|(_, w)| w)
        .sum()
}

/// `τ_t(b,u,o)`, computed directly from the filtering formula.
pub fn belief_step(model: &DetPomdpModel, t: usize, b: &Belief, u: usize, o: usize) -> Belief {
    if b.is_cemetery() {
        return Belief::cemetery();
    }
    let q = obs_prob(model, t, b, u, o);
    if q.is_zero() {
        return Belief::cemetery();
    }
    let mut acc: BTreeMap<usize, Rational> = BTreeMap::new();
    for (x, w) in b.state_weights() {
        let y = model.next_state(t, x, u);
        if model.observe(t, y, u) == o {
            *acc.entry(y).or_insert_with(Rational::zero) += w;
        }
    }
    let entries = acc
        .into_iter()
        .map(|(y, w)| (ExtendedState::State(y), w / &q))
        .collect();
    Belief::from_measure_unchecked(Measure::from_sorted_unchecked(entries))
}

/// `(h^u_{t+1})⁻¹(o)`.
pub fn observation_preimage(model: &DetPomdpModel, t: usize, u: usize, o: usize) -> StateSet {
    (0..model.num_states())
        .filter(|&y| model.observe(t, y, u) == o)
        .collect()
}

/// `F^{u,o}_t`: the forward restriction of `f^u_t` to `(h^u_{t+1})⁻¹(o)`.
pub fn step_mapping(model: &DetPomdpModel, t: usize, u: usize, o: usize) -> StepMapping {
    forward_restrict(&model.dynamics_column(t, u), &observation_preimage(model, t, u, o))
}

/// `R ∘ (F^{u,o}_t)⋆ (b)`.
pub fn belief_step_via_pushforward(model: &DetPomdpModel, t: usize, b: &Belief, u: usize, o: usize) -> Belief {
    renormalize(&pushforward(&step_mapping(model, t, u, o), b.measure()))
}

/// One observation branch of a transition with positive probability.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Branch {
    pub observation: usize,
    pub probability: Rational,
    pub belief: Belief,
}

/// Every observation `o` with `Q_{t+1}(b,u,o) > 0` together with `τ_t(b,u,o)`,
/// in increasing order of `o`, computed in one pass over the support.
pub fn split_by_observation(model: &DetPomdpModel, t: usize, b: &Belief, u: usize) -> Vec<Branch> {
    let mut groups: BTreeMap<usize, BTreeMap<usize, Rational>> = BTreeMap::new();
    for (x, w) in b.state_weights() {
        let y = model.next_state(t, x, u);
        let o = model.observe(t, y, u);
        *groups.entry(o).or_default().entry(y).or_insert_with(Rational::zero) += w;
    }
    groups
        .into_iter()
        .map(|(o, weights)| {
            let q: Rational = weights.values().sum();
            let entries = weights
                .into_iter()
                .map(|(y, w)| (ExtendedState::State(y), w / &q))
                .collect();
            Branch {
                observation: o,
                probability: q,
                belief: Belief::from_measure_unchecked(Measure::from_sorted_unchecked(entries)),
            }
        })
        .collect()
}
