//! Reachable beliefs `B^R_t(b₀)` and the closure `F^D` of composed step mappings.
//!
//! Beliefs are interned in an arena and referred to by [`BeliefId`]. Each layer
//! is the sorted list of ids reachable at that time. Transitions are computed
//! once per (time slice, belief) and kept, so the dynamic programming pass can
//! reuse them without refiltering.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::filtering::{split_by_observation, step_mapping};
use crate::measure::{backward_restrict, compose_mappings, Belief, StateSet, StepMapping};
use crate::model::DetPomdpModel;
use crate::value::Rational;

pub type BeliefId = u32;

pub const DEFAULT_BELIEF_CAP: usize = 10_000_000;
pub const DEFAULT_CLOSURE_CAP: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReachError {
    #[error("reachable belief count exceeds the cap of {cap}")]
    BeliefCap { cap: usize },
    #[error("mapping closure exceeds the cap of {cap} tables")]
    ClosureCap { cap: usize },
    #[error("time range [{from}, {to}] is invalid: need from < to <= {depth}")]
    InvalidRange { from: usize, to: usize, depth: usize },
    #[error("time {t} exceeds the horizon {horizon}")]
    TimeOutOfRange { t: usize, horizon: usize },
    #[error("the initial belief must be supported on states, not the cemetery")]
    CemeteryInitialBelief,
    #[error("the initial belief lives on {found} states, the model has {expected}")]
    BeliefDimension { found: usize, expected: usize },
}

/// Which controls a belief branches over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Branching {
    /// Every control in `U`, as in the definition of reachable beliefs.
    #[default]
    AllControls,
    /// Only controls admissible at every state of the belief's support.
    AdmissibleControls,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReachOptions {
    pub branching: Branching,
    pub max_beliefs: usize,
}

impl Default for ReachOptions {
    fn default() -> Self {
        ReachOptions {
            branching: Branching::AllControls,
            max_beliefs: DEFAULT_BELIEF_CAP,
        }
    }
}

/// Interned beliefs.
#[derive(Debug, Clone, Default)]
pub struct BeliefArena {
    beliefs: Vec<Belief>,
    index: HashMap<Belief, BeliefId>,
}

impl BeliefArena {
    pub fn intern(&mut self, b: Belief) -> BeliefId {
        if let Some(&id) = self.index.get(&b) {
            return id;
        }
        let id = self.beliefs.len() as BeliefId;
        self.beliefs.push(b.clone());
        self.index.insert(b, id);
        id
    }

    pub fn id_of(&self, b: &Belief) -> Option<BeliefId> {
        self.index.get(b).copied()
    }

    pub fn get(&self, id: BeliefId) -> &Belief {
        &self.beliefs[id as usize]
    }

    pub fn len(&self) -> usize {
        self.beliefs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beliefs.is_empty()
    }
}

/// One positive-probability outcome of applying a control.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Successor {
    pub observation: usize,
    pub probability: Rational,
    pub belief: BeliefId,
}

/// Outcomes of one control at one belief.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlBranches {
    pub control: usize,
    pub successors: Vec<Successor>,
}

/// Layered reachable sets `B^R_0, …, B^R_{t_max}`.
#[derive(Debug, Clone)]
pub struct ReachLayers {
    arena: BeliefArena,
    layers: Vec<Vec<BeliefId>>,
    first_seen: Vec<usize>,
    cemetery: BeliefId,
    branching: Branching,
    slice_of_time: Vec<usize>,
    transitions: HashMap<(usize, BeliefId), Vec<ControlBranches>>,
}

impl ReachLayers {
    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn branching(&self) -> Branching {
        self.branching
    }

    pub fn arena(&self) -> &BeliefArena {
        &self.arena
    }

    pub fn belief(&self, id: BeliefId) -> &Belief {
        self.arena.get(id)
    }

    pub fn cemetery_id(&self) -> BeliefId {
        self.cemetery
    }

    pub fn layer(&self, t: usize) -> &[BeliefId] {
        &self.layers[t]
    }

    pub fn layers(&self) -> &[Vec<BeliefId>] {
        &self.layers
    }

    pub fn layer_size(&self, t: usize) -> usize {
        self.layers[t].len()
    }

    pub fn contains(&self, t: usize, id: BeliefId) -> bool {
        self.layers[t].binary_search(&id).is_ok()
    }

    pub fn cemetery_reached(&self, t: usize) -> bool {
        self.contains(t, self.cemetery)
    }

    /// `|B^R_{[0,t]}|`.
    pub fn cumulative_size(&self, t: usize) -> usize {
        self.first_seen.iter().filter(|&&s| s <= t).count()
    }

    /// Control branches of belief `id` at time `t`, if it was expanded.
    pub fn branches(&self, t: usize, id: BeliefId) -> Option<&[ControlBranches]> {
        let slice = *self.slice_of_time.get(t)?;
        self.transitions.get(&(slice, id)).map(Vec::as_slice)
    }

    /// Sorted ids of `B^R_{[from,to]}`; requires `from < to`.
    pub fn union_ids(&self, from: usize, to: usize) -> Result<Vec<BeliefId>, ReachError> {
        if from >= to {
            return Err(ReachError::InvalidRange {
                from,
                to,
                depth: self.depth(),
            });
        }
        self.span_ids(from, to)
    }

    pub fn union_size(&self, from: usize, to: usize) -> Result<usize, ReachError> {
        self.union_ids(from, to).map(|v| v.len())
    }

    /// Sorted ids of the layers `from..=to`, where `from == to` is allowed.
    pub fn span_ids(&self, from: usize, to: usize) -> Result<Vec<BeliefId>, ReachError> {
        if from > to || to > self.depth() {
            return Err(ReachError::InvalidRange {
                from,
                to,
                depth: self.depth(),
            });
        }
        let mut ids: Vec<BeliefId> = self.layers[from..=to].iter().flatten().copied().collect();
        ids.sort_unstable();
        ids.dedup();
        Ok(ids)
    }

    pub fn span_size(&self, from: usize, to: usize) -> Result<usize, ReachError> {
        self.span_ids(from, to).map(|v| v.len())
    }
}

/// Enumerates `B^R_t(b₀)` for `t ∈ {0,…,t_max}` branching over all controls.
pub fn reachable_layers(model: &DetPomdpModel, b0: &Belief, t_max: usize) -> Result<ReachLayers, ReachError> {
    reachable_layers_with(model, b0, t_max, &ReachOptions::default())
}

pub fn reachable_layers_with(
    model: &DetPomdpModel,
    b0: &Belief,
    t_max: usize,
    options: &ReachOptions,
) -> Result<ReachLayers, ReachError> {
    if t_max > model.horizon {
        return Err(ReachError::TimeOutOfRange {
            t: t_max,
            horizon: model.horizon,
        });
    }
    if b0.is_cemetery() {
        return Err(ReachError::CemeteryInitialBelief);
    }
    if let Some(&x) = b0.states().last() {
        if x >= model.num_states() {
            return Err(ReachError::BeliefDimension {
                found: x + 1,
                expected: model.num_states(),
            });
        }
    }
    let slice_of_time: Vec<usize> = (0..model.horizon)
        .map(|t| match options.branching {
            Branching::AllControls => model.transition_slice(t),
            Branching::AdmissibleControls => model.admissible_transition_slice(t),
        })
        .collect();
    let mut arena = BeliefArena::default();
    let cemetery = arena.intern(Belief::cemetery());
    let start = arena.intern(b0.clone());
    let mut reach = ReachLayers {
        arena,
        layers: vec![vec![start]],
        first_seen: vec![usize::MAX, 0],
        cemetery,
        branching: options.branching,
        slice_of_time,
        transitions: HashMap::new(),
    };
    let all_controls: Vec<usize> = (0..model.num_controls()).collect();
    let num_obs = model.num_observations();
    let mut mark: Vec<bool> = Vec::new();

    for t in 0..t_max {
        let slice = reach.slice_of_time[t];
        let mut next: Vec<BeliefId> = Vec::new();
        let push = |id: BeliefId, next: &mut Vec<BeliefId>, mark: &mut Vec<bool>| {
            let i = id as usize;
            if i >= mark.len() {
                mark.resize(i + 1, false);
            }
            if !mark[i] {
                mark[i] = true;
                next.push(id);
            }
        };
        for &id in &reach.layers[t] {
            if id == cemetery {
                push(cemetery, &mut next, &mut mark);
                continue;
            }
            if !reach.transitions.contains_key(&(slice, id)) {
                let b = reach.arena.get(id).clone();
                let controls: Vec<usize> = match options.branching {
                    Branching::AllControls => all_controls.clone(),
                    Branching::AdmissibleControls => admissible_belief_controls_unchecked(model, t, &b),
                };
                let mut branches = Vec::with_capacity(controls.len());
                for u in controls {
                    let successors = split_by_observation(model, t, &b, u)
                        .into_iter()
                        .map(|br| Successor {
                            observation: br.observation,
                            probability: br.probability,
                            belief: reach.arena.intern(br.belief),
                        })
                        .collect();
                    branches.push(ControlBranches { control: u, successors });
                }
                if reach.arena.len() > options.max_beliefs {
                    return Err(ReachError::BeliefCap {
                        cap: options.max_beliefs,
                    });
                }
                reach.transitions.insert((slice, id), branches);
            }
            for cb in &reach.transitions[&(slice, id)] {
                if cb.successors.len() < num_obs {
                    push(cemetery, &mut next, &mut mark);
                }
                for s in &cb.successors {
                    push(s.belief, &mut next, &mut mark);
                }
            }
        }
        for &id in &next {
            mark[id as usize] = false;
        }
        next.sort_unstable();
        reach.first_seen.resize(reach.arena.len(), usize::MAX);
        for &id in &next {
            let s = &mut reach.first_seen[id as usize];
            *s = (*s).min(t + 1);
        }
        reach.layers.push(next);
    }
    reach.first_seen.resize(reach.arena.len(), usize::MAX);
    Ok(reach)
}

/// `U^{b,ad}_t(b) = ∩_{x ∈ supp b} U^ad_t(x)` without the cemetery check.
pub(crate) fn admissible_belief_controls_unchecked(model: &DetPomdpModel, t: usize, b: &Belief) -> Vec<usize> {
    let mut states = b.state_weights().map(|(x, _)| x);
    let Some(first) = states.next() else {
        return Vec::new();
    };
    let mut set: Vec<usize> = model.admissible_controls(t, first).to_vec();
    for x in states {
        if set.is_empty() {
            break;
        }
        set.retain(|&u| model.is_admissible(t, x, u));
    }
    set
}

/// Sorted, deduplicated beliefs of `B^R_{[from,to]}`.
pub fn reachable_union(layers: &ReachLayers, from: usize, to: usize) -> Result<Vec<Belief>, ReachError> {
    Ok(layers
        .union_ids(from, to)?
        .into_iter()
        .map(|id| layers.belief(id).clone())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClosureOptions {
    pub max_tables: usize,
    /// Send initial states outside this set to `∂`.
    pub restrict_to: Option<StateSet>,
    /// With [`Branching::AdmissibleControls`], `F^{u,o}_t` is further sent to `∂`
    /// on states where `u` is inadmissible.
    pub branching: Branching,
}

impl Default for ClosureOptions {
    fn default() -> Self {
        ClosureOptions {
            max_tables: DEFAULT_CLOSURE_CAP,
            restrict_to: None,
            branching: Branching::AllControls,
        }
    }
}

/// The step mappings `F^{u,o}_t` of one time, labelled by `(u, o)`, as generated
/// under the given options.
pub fn step_mappings_at(
    model: &DetPomdpModel,
    t: usize,
    options: &ClosureOptions,
) -> Vec<((usize, usize), StepMapping)> {
    let nx = model.num_states();
    let mut out = Vec::new();
    for u in 0..model.num_controls() {
        let mut domain: StateSet = match &options.restrict_to {
            Some(a) => a.clone(),
            None => (0..nx).collect(),
        };
        if options.branching == Branching::AdmissibleControls {
            domain.retain(|&x| model.is_admissible(t, x, u));
        }
        let mask = backward_restrict(&(0..nx).collect::<Vec<_>>(), &domain);
        for o in 0..model.num_observations() {
            out.push(((u, o), compose_mappings(&step_mapping(model, t, u, o), &mask)));
        }
    }
    out
}

/// The sets `F^D_{0:t}` of composed step mappings, deduplicated by table.
#[derive(Debug, Clone)]
pub struct MappingClosure {
    /// `depths[t]` is the sorted set `F^D_{0:t}`.
    pub depths: Vec<Vec<StepMapping>>,
    /// Set when a time-invariant model revisits an earlier depth; later depths repeat.
    pub fixed_point: Option<(usize, usize)>,
    union: BTreeMap<StepMapping, Vec<(usize, usize)>>,
}

impl MappingClosure {
    /// `F^D = ∪_t F^D_{0:t}`.
    pub fn union(&self) -> impl Iterator<Item = &StepMapping> {
        self.union.keys()
    }

    pub fn len(&self) -> usize {
        self.union.len()
    }

    pub fn is_empty(&self) -> bool {
        self.union.is_empty()
    }

    /// A control/observation sequence `(u_0,o_0), …, (u_t,o_t)` whose composed
    /// step mappings `F^{u_t,o_t}_t ∘ … ∘ F^{u_0,o_0}_0` equal `g`.
    pub fn derivation(&self, g: &StepMapping) -> Option<&[(usize, usize)]> {
        self.union.get(g).map(Vec::as_slice)
    }
}

/// `F^D_{0:t}` for `t ∈ {0,…,t_max}`, with `t_max < T`.
pub fn mapping_closure(model: &DetPomdpModel, t_max: usize) -> Result<MappingClosure, ReachError> {
    mapping_closure_with(model, t_max, &ClosureOptions::default())
}

pub fn mapping_closure_with(
    model: &DetPomdpModel,
    t_max: usize,
    options: &ClosureOptions,
) -> Result<MappingClosure, ReachError> {
    if t_max >= model.horizon {
        return Err(ReachError::TimeOutOfRange {
            t: t_max + 1,
            horizon: model.horizon,
        });
    }
    let time_invariant = (0..model.horizon).all(|t| match options.branching {
        Branching::AllControls => model.transition_slice(t) == 0,
        Branching::AdmissibleControls => model.admissible_transition_slice(t) == 0,
    });
    let cap_err = ReachError::ClosureCap {
        cap: options.max_tables,
    };
    let mut union: BTreeMap<StepMapping, Vec<(usize, usize)>> = BTreeMap::new();
    let mut current: BTreeMap<StepMapping, Vec<(usize, usize)>> = BTreeMap::new();
    for (label, g) in step_mappings_at(model, 0, options) {
        current.entry(g).or_insert_with(|| vec![label]);
    }
    union.extend(current.iter().map(|(g, p)| (g.clone(), p.clone())));
    if union.len() > options.max_tables {
        return Err(cap_err);
    }
    let mut depths: Vec<BTreeSet<StepMapping>> = vec![current.keys().cloned().collect()];
    let mut fixed_point = None;
    let later = ClosureOptions {
        restrict_to: None,
        ..options.clone()
    };
    let mut step_cache = step_mappings_at(model, 0, &later);
    for t in 1..=t_max {
        if !time_invariant {
            step_cache = step_mappings_at(model, t, &later);
        }
        let mut next: BTreeMap<StepMapping, Vec<(usize, usize)>> = BTreeMap::new();
        for (g, path) in &current {
            for (label, f) in &step_cache {
                next.entry(compose_mappings(f, g)).or_insert_with(|| {
                    let mut p = path.clone();
                    p.push(*label);
                    p
                });
            }
            if next.len() > options.max_tables {
                return Err(cap_err);
            }
        }
        for (g, p) in &next {
            if !union.contains_key(g) {
                union.insert(g.clone(), p.clone());
            }
        }
        if union.len() > options.max_tables {
            return Err(cap_err);
        }
        let keys: BTreeSet<StepMapping> = next.keys().cloned().collect();
        let repeat = if time_invariant {
            depths.iter().position(|d| *d == keys)
        } else {
            None
        };
        depths.push(keys);
        current = next;
        if let Some(s) = repeat {
            fixed_point = Some((t, s));
            break;
        }
    }
    Ok(MappingClosure {
        depths: depths.into_iter().map(|d| d.into_iter().collect()).collect(),
        fixed_point,
        union,
    })
}
