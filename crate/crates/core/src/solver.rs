//! Belief-space dynamic programming with admissibility constraints, closed-loop
//! simulation and a brute-force policy-tree oracle.
//!
//! The forward pass enumerates beliefs branching only over controls admissible
//! on the whole support. The backward pass evaluates
//! `V_T(b) = Σ_x b(x) K(x)` and
//! `V_t(b) = min_{u ∈ U^{b,ad}_t(b)} Σ_x b(x) L_t(x,u) + Σ_o Q_{t+1}(b,u,o) V_{t+1}(τ_t(b,u,o))`,
//! with `V_t(δ_∂) = 0` and `min ∅ = +∞`. Ties go to the lowest control index.

use std::sync::Arc;

use thiserror::Error;

use crate::filtering::belief_step;
use crate::measure::{canonical_key, Belief, BeliefKey};
use crate::model::DetPomdpModel;
use crate::reachability::{
    admissible_belief_controls_unchecked, reachable_layers_with, BeliefId, Branching, ReachError, ReachLayers,
    ReachOptions, DEFAULT_BELIEF_CAP,
};
use crate::value::ExtendedValue;

pub const DEFAULT_ORACLE_CAP: u128 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Reach(#[from] ReachError),
    #[error("admissible controls are undefined at the cemetery belief")]
    CemeteryBelief,
    #[error("belief {key} is not in the reachable set at time {t}")]
    UnknownBelief { t: usize, key: BeliefKey },
    #[error("no action is stored for the cemetery belief")]
    NoActionAtCemetery,
    #[error("no admissible control for belief {key} at time {t}")]
    Infeasible { t: usize, key: BeliefKey },
    #[error("oracle search space {size} exceeds the cap {cap}")]
    OracleCap { size: u128, cap: u128 },
    #[error("time {t} is outside the horizon {horizon}")]
    TimeOutOfRange { t: usize, horizon: usize },
}

/// `U^{b,ad}_t(b) = ∩_{x ∈ supp b} U^ad_t(x)`.
pub fn admissible_belief_controls(model: &DetPomdpModel, t: usize, b: &Belief) -> Result<Vec<usize>, SolveError> {
    if b.is_cemetery() {
        return Err(SolveError::CemeteryBelief);
    }
    Ok(admissible_belief_controls_unchecked(model, t, b))
}

/// `Σ_x b(x) c(x)` with `0 · ∞ = 0`.
fn expectation<'a>(b: &Belief, cost: impl Fn(usize) -> &'a ExtendedValue) -> ExtendedValue {
    let mut total = ExtendedValue::zero();
    for (x, w) in b.state_weights() {
        total.add_assign_ref(&cost(x).weighted(w));
        if total.is_infinite() {
            break;
        }
    }
    total
}

/// Decision stored for a non-cemetery belief.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Control(usize),
    /// `U^{b,ad}_t(b)` is empty.
    Infeasible,
    /// Terminal time, no decision.
    Terminal,
}

/// `V_t(b)` for every reachable `(t, b)`.
#[derive(Debug, Clone)]
pub struct ValueTable {
    reach: Arc<ReachLayers>,
    values: Vec<Vec<ExtendedValue>>,
}

impl ValueTable {
    pub fn horizon(&self) -> usize {
        self.values.len() - 1
    }

    pub fn reach(&self) -> &ReachLayers {
        &self.reach
    }

    fn position(&self, t: usize, b: &Belief) -> Option<usize> {
        let id = self.reach.arena().id_of(b)?;
        self.reach.layer(t).binary_search(&id).ok()
    }

    pub fn value(&self, t: usize, b: &Belief) -> Option<&ExtendedValue> {
        if t > self.horizon() {
            return None;
        }
        self.position(t, b).map(|i| &self.values[t][i])
    }

    /// `V_0(b₀)`.
    pub fn initial_value(&self) -> &ExtendedValue {
        &self.values[0][0]
    }

    /// `(belief, value)` pairs of one layer.
    pub fn layer(&self, t: usize) -> impl Iterator<Item = (&Belief, &ExtendedValue)> {
        self.reach
            .layer(t)
            .iter()
            .zip(&self.values[t])
            .map(|(&id, v)| (self.reach.belief(id), v))
    }

    pub fn len(&self) -> usize {
        self.values.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `π_t(b)` for every reachable `(t, b)` except `δ_∂`.
#[derive(Debug, Clone)]
pub struct Policy {
    reach: Arc<ReachLayers>,
    actions: Vec<Vec<Action>>,
}

impl Policy {
    pub fn horizon(&self) -> usize {
        self.actions.len() - 1
    }

    pub fn reach(&self) -> &ReachLayers {
        &self.reach
    }

    pub fn action(&self, t: usize, b: &Belief) -> Result<Action, SolveError> {
        if t > self.horizon() {
            return Err(SolveError::TimeOutOfRange {
                t,
                horizon: self.horizon(),
            });
        }
        if b.is_cemetery() {
            return Err(SolveError::NoActionAtCemetery);
        }
        let unknown = || SolveError::UnknownBelief {
            t,
            key: canonical_key(b),
        };
        let id = self.reach.arena().id_of(b).ok_or_else(unknown)?;
        let i = self.reach.layer(t).binary_search(&id).map_err(|_| unknown())?;
        Ok(self.actions[t][i])
    }
}

/// The stored minimizing control at `(t, b)`.
pub fn policy_action(policy: &Policy, t: usize, b: &Belief) -> Result<usize, SolveError> {
    match policy.action(t, b)? {
        Action::Control(u) => Ok(u),
        Action::Infeasible | Action::Terminal => Err(SolveError::Infeasible {
            t,
            key: canonical_key(b),
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolveOptions {
    pub max_beliefs: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_beliefs: DEFAULT_BELIEF_CAP,
        }
    }
}

pub fn solve(model: &DetPomdpModel, b0: &Belief) -> Result<(ValueTable, Policy), SolveError> {
    solve_with(model, b0, &SolveOptions::default())
}

pub fn solve_with(
    model: &DetPomdpModel,
    b0: &Belief,
    options: &SolveOptions,
) -> Result<(ValueTable, Policy), SolveError> {
    let horizon = model.horizon;
    let reach = reachable_layers_with(
        model,
        b0,
        horizon,
        &ReachOptions {
            branching: Branching::AdmissibleControls,
            max_beliefs: options.max_beliefs,
        },
    )?;
    let cemetery = reach.cemetery_id();
    let nu = model.num_controls();

    // Columns L_t(·,u) that do not depend on the state need no expectation.
    let constant_column = |t: usize, u: usize| -> Option<&ExtendedValue> {
        let first = model.step_cost(t, 0, u);
        (1..model.num_states())
            .all(|x| model.step_cost(t, x, u) == first)
            .then_some(first)
    };

    let mut values: Vec<Vec<ExtendedValue>> = vec![Vec::new(); horizon + 1];
    let mut actions: Vec<Vec<Action>> = vec![Vec::new(); horizon + 1];
    values[horizon] = reach
        .layer(horizon)
        .iter()
        .map(|&id| {
            if id == cemetery {
                ExtendedValue::zero()
            } else {
                expectation(reach.belief(id), |x| model.final_cost(x))
            }
        })
        .collect();
    actions[horizon] = vec![Action::Terminal; reach.layer_size(horizon)];

    for t in (0..horizon).rev() {
        let constants: Vec<Option<&ExtendedValue>> = (0..nu).map(|u| constant_column(t, u)).collect();
        let next_layer = reach.layer(t + 1);
        let next_values = &values[t + 1];
        let lookup = |id: BeliefId| -> &ExtendedValue {
            let i = next_layer
                .binary_search(&id)
                .expect("successor belongs to the next layer");
            &next_values[i]
        };
        let mut layer_values = Vec::with_capacity(reach.layer_size(t));
        let mut layer_actions = Vec::with_capacity(reach.layer_size(t));
        for &id in reach.layer(t) {
            if id == cemetery {
                layer_values.push(ExtendedValue::zero());
                layer_actions.push(Action::Infeasible);
                continue;
            }
            let b = reach.belief(id);
            let branches = reach.branches(t, id).expect("every non-terminal belief is expanded");
            let mut best: Option<(ExtendedValue, usize)> = None;
            for cb in branches {
                let u = cb.control;
                let mut q = match constants[u] {
                    Some(c) => c.clone(),
                    None => expectation(b, |x| model.step_cost(t, x, u)),
                };
                for s in &cb.successors {
                    if q.is_infinite() {
                        break;
                    }
                    q.add_assign_ref(&lookup(s.belief).weighted(&s.probability));
                }
                if best.as_ref().is_none_or(|(v, _)| q < *v) {
                    best = Some((q, u));
                }
            }
            match best {
                Some((v, u)) => {
                    layer_values.push(v);
                    layer_actions.push(Action::Control(u));
                }
                None => {
                    layer_values.push(ExtendedValue::Infinite);
                    layer_actions.push(Action::Infeasible);
                }
            }
        }
        values[t] = layer_values;
        actions[t] = layer_actions;
    }
    let reach = Arc::new(reach);
    Ok((
        ValueTable {
            reach: Arc::clone(&reach),
            values,
        },
        Policy { reach, actions },
    ))
}

/// Re-evaluates the Bellman equation at every stored `(t, b)` by filtering
/// afresh, returning the first inconsistency found.
pub fn check_bellman(model: &DetPomdpModel, values: &ValueTable) -> Result<(), String> {
    let horizon = values.horizon();
    for t in 0..=horizon {
        for (b, v) in values.layer(t) {
            let expected = if b.is_cemetery() {
                ExtendedValue::zero()
            } else if t == horizon {
                expectation(b, |x| model.final_cost(x))
            } else {
                let mut best = ExtendedValue::Infinite;
                for u in admissible_belief_controls_unchecked(model, t, b) {
                    let mut q = expectation(b, |x| model.step_cost(t, x, u));
                    for o in 0..model.num_observations() {
                        let p = crate::filtering::obs_prob(model, t, b, u, o);
                        if p == num_traits::Zero::zero() {
                            continue;
                        }
                        let next = belief_step(model, t, b, u, o);
                        let nv = values
                            .value(t + 1, &next)
                            .ok_or_else(|| format!("successor of {} at t={t} missing", canonical_key(b)))?;
                        q.add_assign_ref(&nv.weighted(&p));
                    }
                    best = best.min(q);
                }
                best
            };
            if *v != expected {
                return Err(format!(
                    "V_{t}({}) = {v}, Bellman right-hand side gives {expected}",
                    canonical_key(b)
                ));
            }
        }
    }
    Ok(())
}

/// One row of a closed-loop rollout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrajectoryRecord {
    pub t: usize,
    pub state: usize,
    /// `o_t`; at `t = 0` this is `h_0(x_0)`.
    pub observation: usize,
    /// `None` at the terminal time.
    pub control: Option<usize>,
    /// `L_t(x_t,u_t)`, or `K(x_T)` at the terminal time.
    pub step_cost: ExtendedValue,
    pub supp_min: usize,
    pub supp_max: usize,
    pub supp_size: usize,
    pub belief_key: BeliefKey,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Simulation {
    pub records: Vec<TrajectoryRecord>,
    pub total_cost: ExtendedValue,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimulateError {
    #[error("the belief collapsed to the cemetery at time {t}: observation {observation} contradicts the belief")]
    Cemetery { t: usize, observation: usize },
    #[error("policy lookup failed at time {t}: {source}")]
    Policy { t: usize, source: SolveError },
    #[error("initial state {0} is out of range")]
    StateOutOfRange(usize),
}

/// Closed-loop rollout from the true initial state `x0`.
pub fn simulate(model: &DetPomdpModel, policy: &Policy, x0: usize, b0: &Belief) -> Result<Simulation, SimulateError> {
    if x0 >= model.num_states() {
        return Err(SimulateError::StateOutOfRange(x0));
    }
    let mut warnings = Vec::new();
    if b0.weight(x0) == num_traits::Zero::zero() {
        warnings.push(format!(
            "initial state {} is outside the support of the initial belief",
            model.states[x0]
        ));
    }
    let horizon = model.horizon;
    let mut records = Vec::with_capacity(horizon + 1);
    let mut total = ExtendedValue::zero();
    let mut x = x0;
    let mut o = model.observe_initial(x0);
    let mut b = b0.clone();
    for t in 0..=horizon {
        let states = b.states();
        let record = |control: Option<usize>, step_cost: ExtendedValue| TrajectoryRecord {
            t,
            state: x,
            observation: o,
            control,
            step_cost,
            supp_min: states[0],
            supp_max: *states.last().unwrap(),
            supp_size: states.len(),
            belief_key: canonical_key(&b),
        };
        if t == horizon {
            let k = model.final_cost(x).clone();
            total.add_assign_ref(&k);
            records.push(record(None, k));
            break;
        }
        let u = policy_action(policy, t, &b).map_err(|source| SimulateError::Policy { t, source })?;
        let c = model.step_cost(t, x, u).clone();
        total.add_assign_ref(&c);
        records.push(record(Some(u), c));
        x = model.next_state(t, x, u);
        o = model.observe(t, x, u);
        b = belief_step(model, t, &b, u, o);
        if b.is_cemetery() {
            return Err(SimulateError::Cemetery {
                t: t + 1,
                observation: o,
            });
        }
    }
    Ok(Simulation {
        records,
        total_cost: total,
        warnings,
    })
}

/// Minimum expected cost over all history-feedback policies, computed without beliefs.
///
/// The search walks the tree of control and observation histories. At each
/// node it keeps, for every initial state consistent with the history, the
/// current state and the initial weight. The optimal policy picks the best
/// control independently at every node, so the tree minimum equals the
/// minimum over policies. A control inadmissible at a consistent state makes
/// that branch `+∞`.
pub fn brute_force_value(model: &DetPomdpModel, b0: &Belief, cap: u128) -> Result<ExtendedValue, SolveError> {
    let branching = (model.num_controls() as u128).saturating_mul(model.num_observations() as u128);
    let size = (0..model.horizon).try_fold(1u128, |acc, _| acc.checked_mul(branching));
    match size {
        Some(size) if size <= cap => {}
        Some(size) => return Err(SolveError::OracleCap { size, cap }),
        None => return Err(SolveError::OracleCap { size: u128::MAX, cap }),
    }
    if b0.is_cemetery() {
        return Err(SolveError::CemeteryBelief);
    }
    let group: Vec<(usize, crate::value::Rational)> = b0.state_weights().map(|(x, w)| (x, w.clone())).collect();
    Ok(tree_value(model, 0, &group))
}

fn tree_value(model: &DetPomdpModel, t: usize, group: &[(usize, crate::value::Rational)]) -> ExtendedValue {
    let mut total_final = ExtendedValue::zero();
    if t == model.horizon {
        for (x, w) in group {
            total_final.add_assign_ref(&model.final_cost(*x).weighted(w));
        }
        return total_final;
    }
    let mut best = ExtendedValue::Infinite;
    for u in 0..model.num_controls() {
        if group.iter().any(|&(x, _)| !model.is_admissible(t, x, u)) {
            continue;
        }
        let mut v = ExtendedValue::zero();
        for (x, w) in group {
            v.add_assign_ref(&model.step_cost(t, *x, u).weighted(w));
        }
        for o in 0..model.num_observations() {
            if v.is_infinite() {
                break;
            }
            let next: Vec<_> = group
                .iter()
                .filter_map(|(x, w)| {
                    let y = model.next_state(t, *x, u);
                    (model.observe(t, y, u) == o).then(|| (y, w.clone()))
                })
                .collect();
            if !next.is_empty() {
                v.add_assign_ref(&tree_value(model, t + 1, &next));
            }
        }
        best = best.min(v);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::make_belief;
    use crate::model::{gen_random, gen_tight_bound, AdmissibilityMode, RandomOptions, RandomSizes};
    use crate::value::Rational;
    use num_bigint::BigInt;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(BigInt::from(n), BigInt::from(d))
    }

    fn ev(n: i64) -> ExtendedValue {
        ExtendedValue::from_integer(n)
    }

    #[test]
    fn zero_cost_model_has_zero_value() {
        let m = gen_tight_bound(3).unwrap();
        let b0 = m.initial_belief.clone().unwrap();
        let (v, p) = solve(&m, &b0).unwrap();
        assert_eq!(v.initial_value(), &ExtendedValue::zero());
        assert_eq!(policy_action(&p, 0, &b0).unwrap(), 0);
        assert_eq!(
            brute_force_value(&m, &b0, DEFAULT_ORACLE_CAP).unwrap(),
            ExtendedValue::zero()
        );
        assert!(check_bellman(&m, &v).is_ok());
        assert_eq!(p.action(0, &Belief::cemetery()), Err(SolveError::NoActionAtCemetery));
    }

    #[test]
    fn admissible_intersection() {
        let mut m = gen_tight_bound(3).unwrap();
        let b = make_belief([(0, q(1, 2)), (1, q(1, 2))], 3).unwrap();
        assert_eq!(admissible_belief_controls(&m, 0, &b).unwrap(), vec![0, 1]);
        m.admissible[0][0] = vec![0];
        m.admissible[0][1] = vec![1];
        assert!(admissible_belief_controls(&m, 0, &b).unwrap().is_empty());
        assert_eq!(
            admissible_belief_controls(&m, 0, &Belief::cemetery()),
            Err(SolveError::CemeteryBelief)
        );
        let (v, p) = solve(&m, &b).unwrap();
        assert!(v.initial_value().is_infinite());
        assert_eq!(p.action(0, &b).unwrap(), Action::Infeasible);
    }

    fn two_state_instance() -> DetPomdpModel {
        // u0 stays and reveals the state, u1 swaps blindly.
        let mut m = gen_random(
            0,
            RandomSizes {
                states: 2,
                controls: 2,
                observations: 2,
                horizon: 2,
            },
            &RandomOptions {
                stationary: true,
                ..RandomOptions::default()
            },
        )
        .unwrap();
        m.dynamics[0] = vec![vec![0, 1], vec![1, 0]];
        m.obs[0] = vec![vec![0, 0], vec![1, 0]];
        m.cost[0] = vec![vec![ev(1), ev(0)], vec![ev(0), ev(3)]];
        m.final_cost = vec![ev(0), ev(10)];
        m
    }

    #[test]
    fn handcrafted_two_state_matches_oracle() {
        let m = two_state_instance();
        let b0 = make_belief([(0, q(1, 3)), (1, q(2, 3))], 2).unwrap();
        let (v, _) = solve(&m, &b0).unwrap();
        let oracle = brute_force_value(&m, &b0, DEFAULT_ORACLE_CAP).unwrap();
        assert_eq!(v.initial_value(), &oracle);
        assert!(check_bellman(&m, &v).is_ok());
    }

    #[test]
    fn single_state_single_step() {
        let mut m = gen_random(
            5,
            RandomSizes {
                states: 1,
                controls: 3,
                observations: 1,
                horizon: 1,
            },
            &RandomOptions::default(),
        )
        .unwrap();
        m.cost[0][0] = vec![ev(4), ev(2), ev(7)];
        m.final_cost = vec![ev(0)];
        let b0 = Belief::dirac(0);
        assert_eq!(brute_force_value(&m, &b0, DEFAULT_ORACLE_CAP).unwrap(), ev(2));
        let (v, p) = solve(&m, &b0).unwrap();
        assert_eq!(v.initial_value(), &ev(2));
        assert_eq!(policy_action(&p, 0, &b0).unwrap(), 1);
    }

    #[test]
    fn ties_pick_lowest_control() {
        let mut m = gen_random(
            5,
            RandomSizes {
                states: 1,
                controls: 3,
                observations: 1,
                horizon: 1,
            },
            &RandomOptions::default(),
        )
        .unwrap();
        m.cost[0][0] = vec![ev(4), ev(2), ev(2)];
        m.final_cost = vec![ev(0)];
        let (_, p) = solve(&m, &Belief::dirac(0)).unwrap();
        assert_eq!(policy_action(&p, 0, &Belief::dirac(0)).unwrap(), 1);
    }

    #[test]
    fn random_instances_match_oracle() {
        for seed in 0..40 {
            let opts = RandomOptions {
                admissibility: AdmissibilityMode::Restrictive,
                infinite_cost_probability: 0.1,
                ..RandomOptions::default()
            };
            let m = gen_random(
                seed,
                RandomSizes {
                    states: 3,
                    controls: 2,
                    observations: 2,
                    horizon: 3,
                },
                &opts,
            )
            .unwrap();
            let b0 = m.initial_belief.clone().unwrap();
            let (v, _) = solve(&m, &b0).unwrap();
            assert_eq!(
                v.initial_value(),
                &brute_force_value(&m, &b0, DEFAULT_ORACLE_CAP).unwrap()
            );
            check_bellman(&m, &v).unwrap();
        }
    }

    #[test]
    fn simulation_zero_cost_and_cemetery() {
        let m = gen_tight_bound(3).unwrap();
        let b0 = m.initial_belief.clone().unwrap();
        let (_, p) = solve(&m, &b0).unwrap();
        let sim = simulate(&m, &p, 1, &b0).unwrap();
        assert_eq!(sim.records.len(), m.horizon + 1);
        assert_eq!(sim.total_cost, ExtendedValue::zero());

        let m = two_state_instance();
        let b0 = Belief::dirac(0);
        let (_, p) = solve(&m, &b0).unwrap();
        assert_eq!(policy_action(&p, 0, &b0).unwrap(), 0);
        assert!(matches!(
            simulate(&m, &p, 1, &b0),
            Err(SimulateError::Cemetery { t: 1, .. })
        ));
    }

    #[test]
    fn oracle_cap_enforced() {
        let m = gen_tight_bound(6).unwrap();
        let b0 = m.initial_belief.clone().unwrap();
        assert!(matches!(
            brute_force_value(&m, &b0, 1000),
            Err(SolveError::OracleCap { .. })
        ));
    }
}
