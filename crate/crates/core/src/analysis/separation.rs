//! Separated and `∂`-separated mapping sets, and the classification of models.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::filtering::step_mapping;
use crate::measure::{backward_restrict, compose_mappings, ExtendedState, StateSet, StepMapping};
use crate::model::{DetPomdpModel, Structure};
use crate::reachability::{mapping_closure_with, Branching, ClosureOptions, ReachError, DEFAULT_CLOSURE_CAP};
use crate::value::Rational;

/// Two members of a mapping set that agree at `agree_at` and differ at `differ_at`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairWitness {
    pub first: usize,
    pub second: usize,
    pub agree_at: usize,
    pub differ_at: usize,
}

/// Any two maps that agree at one point agree everywhere.
///
/// `maps` are total tables over a common domain. Returns a violating pair on failure.
pub fn is_separated_mapping_set(maps: &[Vec<usize>]) -> Result<(), PairWitness> {
    let n = maps.first().map_or(0, Vec::len);
    assert!(maps.iter().all(|g| g.len() == n), "tables must share a domain");
    for y in 0..n {
        let mut groups: HashMap<usize, usize> = HashMap::new();
        for (i, g) in maps.iter().enumerate() {
            match groups.get(&g[y]) {
                None => {
                    groups.insert(g[y], i);
                }
                Some(&j) if maps[j] == *g => {}
                Some(&j) => {
                    let differ_at = (0..n).find(|&z| maps[j][z] != g[z]).expect("tables differ");
                    return Err(PairWitness {
                        first: j,
                        second: i,
                        agree_at: y,
                        differ_at,
                    });
                }
            }
        }
    }
    Ok(())
}

/// Any two maps that agree at a point of `g₁⁻¹(X) ∩ g₂⁻¹(X)` agree on all of it.
///
/// Pairs whose common preimage is empty satisfy the condition vacuously.
pub fn is_cemetery_separated(maps: &[StepMapping]) -> Result<(), PairWitness> {
    let n = maps.first().map_or(0, StepMapping::num_states);
    assert!(
        maps.iter().all(|g| g.num_states() == n),
        "mappings must share a state space"
    );
    for y in 0..n {
        let mut groups: HashMap<ExtendedState, Vec<usize>> = HashMap::new();
        for (i, g) in maps.iter().enumerate() {
            let v = g.image_of_state(y);
            if !v.is_cemetery() {
                groups.entry(v).or_default().push(i);
            }
        }
        for members in groups.values() {
            // Within a group every defined value at a point must coincide.
            for z in 0..n {
                let mut seen: Option<(usize, ExtendedState)> = None;
                for &i in members {
                    let v = maps[i].image_of_state(z);
                    if v.is_cemetery() {
                        continue;
                    }
                    match seen {
                        None => seen = Some((i, v)),
                        Some((_, w)) if w == v => {}
                        Some((j, _)) => {
                            return Err(PairWitness {
                                first: j,
                                second: i,
                                agree_at: y,
                                differ_at: z,
                            })
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// How a verdict was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeparationStatus {
    SeparatedExact,
    SeparatedByDynamics,
    SeparatedByAffineStructure,
    SeparatedByProductStructure,
    NotSeparated,
    UndeterminedCap,
}

impl SeparationStatus {
    pub fn is_separated(self) -> bool {
        matches!(
            self,
            SeparationStatus::SeparatedExact
                | SeparationStatus::SeparatedByDynamics
                | SeparationStatus::SeparatedByAffineStructure
                | SeparationStatus::SeparatedByProductStructure
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SeparationStatus::SeparatedExact => "separated_exact",
            SeparationStatus::SeparatedByDynamics => "separated_by_dynamics",
            SeparationStatus::SeparatedByAffineStructure => "separated_by_affine_structure",
            SeparationStatus::SeparatedByProductStructure => "separated_by_product_structure",
            SeparationStatus::NotSeparated => "not_separated",
            SeparationStatus::UndeterminedCap => "undetermined_cap",
        }
    }
}

impl fmt::Display for SeparationStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which mapping family a verdict is about.
///
/// With [`Branching::AdmissibleControls`] the step mappings are first sent to
/// `∂` on states where the control is inadmissible.
pub type Scope = Branching;

pub fn scope_name(scope: Scope) -> &'static str {
    match scope {
        Branching::AllControls => "all_controls",
        Branching::AdmissibleControls => "admissible_controls",
    }
}

/// A composed step mapping named by its control/observation sequence from time 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingDescriptor {
    pub steps: Vec<(usize, usize)>,
}

impl fmt::Display for MappingDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (t, (u, o)) in self.steps.iter().enumerate() {
            if t > 0 {
                write!(f, " ")?;
            }
            write!(f, "F[t={t},u={u},o={o}]")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeparationWitness {
    pub first: MappingDescriptor,
    pub second: MappingDescriptor,
    pub agree_at: usize,
    pub differ_at: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeparationVerdict {
    pub status: SeparationStatus,
    pub scope: Scope,
    pub witness: Option<SeparationWitness>,
    pub trace: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeparationOptions {
    /// Largest composition depth explored; defaults to `T − 1`.
    pub max_depth: Option<usize>,
    pub closure_cap: usize,
}

impl Default for SeparationOptions {
    fn default() -> Self {
        SeparationOptions {
            max_depth: None,
            closure_cap: DEFAULT_CLOSURE_CAP,
        }
    }
}

/// First `(t, x, u)` in scope where the declared structure fails, if any.
fn structure_violation(model: &DetPomdpModel, structure: &Structure, scope: Scope) -> Option<String> {
    let labels = match model.numeric_state_labels() {
        Some(l) => l,
        None => return Some("state labels are not numeric".into()),
    };
    if let Structure::Product { .. } = structure {
        if labels.iter().any(|l| *l == Rational::from_integer(0.into())) {
            return Some("0 is a state label".into());
        }
    }
    let coeffs = structure.coefficients();
    for t in 0..model.horizon {
        let row = if coeffs.len() == 1 { &coeffs[0] } else { &coeffs[t] };
        for x in 0..model.num_states() {
            for (u, coeff) in row.iter().enumerate() {
                if scope == Branching::AdmissibleControls && !model.is_admissible(t, x, u) {
                    continue;
                }
                let expected = match structure {
                    Structure::Affine { .. } => &labels[x] + coeff,
                    Structure::Product { .. } => &labels[x] * coeff,
                };
                let y = model.next_state(t, x, u);
                if labels[y] != expected {
                    return Some(format!(
                        "f_{t}({}, {}) = {} but the {} annotation gives {}",
                        model.states[x],
                        model.controls[u],
                        model.states[y],
                        structure.kind(),
                        crate::value::format_rational(&expected)
                    ));
                }
            }
        }
    }
    None
}

/// Composed dynamics `f^{u_t}_t ∘ … ∘ f^{u_0}_0` for every `t ≤ max_depth`, deduplicated.
fn dynamics_closure(model: &DetPomdpModel, max_depth: usize, cap: usize) -> Option<Vec<Vec<usize>>> {
    let nx = model.num_states();
    let mut union: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut current: BTreeSet<Vec<usize>> = (0..model.num_controls()).map(|u| model.dynamics_column(0, u)).collect();
    let mut seen_depths: Vec<BTreeSet<Vec<usize>>> = Vec::new();
    let time_invariant = model.dynamics_is_time_invariant();
    for t in 0..=max_depth {
        if t > 0 {
            let columns: Vec<Vec<usize>> = (0..model.num_controls()).map(|u| model.dynamics_column(t, u)).collect();
            let mut next = BTreeSet::new();
            for g in &current {
                for f in &columns {
                    next.insert((0..nx).map(|x| f[g[x]]).collect::<Vec<_>>());
                }
                if next.len() > cap {
                    return None;
                }
            }
            current = next;
        }
        union.extend(current.iter().cloned());
        if union.len() > cap {
            return None;
        }
        if time_invariant {
            if seen_depths.contains(&current) {
                break;
            }
            seen_depths.push(current.clone());
        }
    }
    Some(union.into_iter().collect())
}

/// Replays a descriptor through the step mappings of the model.
pub fn replay_descriptor(model: &DetPomdpModel, descriptor: &MappingDescriptor, scope: Scope) -> StepMapping {
    let nx = model.num_states();
    let identity: Vec<usize> = (0..nx).collect();
    let mut g = StepMapping::identity(nx);
    for (t, &(u, o)) in descriptor.steps.iter().enumerate() {
        let mut f = step_mapping(model, t, u, o);
        if scope == Branching::AdmissibleControls {
            let domain: StateSet = (0..nx).filter(|&x| model.is_admissible(t, x, u)).collect();
            f = compose_mappings(&f, &backward_restrict(&identity, &domain));
        }
        g = compose_mappings(&f, &g);
    }
    g
}

/// Checks that a witness really exhibits agreement at one common point and
/// disagreement at another.
pub fn replay_witness(model: &DetPomdpModel, witness: &SeparationWitness, scope: Scope) -> bool {
    let g1 = replay_descriptor(model, &witness.first, scope);
    let g2 = replay_descriptor(model, &witness.second, scope);
    let (a1, a2) = (g1.image_of_state(witness.agree_at), g2.image_of_state(witness.agree_at));
    let (d1, d2) = (
        g1.image_of_state(witness.differ_at),
        g2.image_of_state(witness.differ_at),
    );
    !a1.is_cemetery() && a1 == a2 && !d1.is_cemetery() && !d2.is_cemetery() && d1 != d2
}

/// Exact `∂`-separation of the closure in the given scope.
pub fn exact_cemetery_separation(
    model: &DetPomdpModel,
    scope: Scope,
    options: &SeparationOptions,
) -> Result<Option<SeparationWitness>, ReachError> {
    let depth = options.max_depth.unwrap_or(model.horizon - 1).min(model.horizon - 1);
    let closure = mapping_closure_with(
        model,
        depth,
        &ClosureOptions {
            max_tables: options.closure_cap,
            restrict_to: None,
            branching: scope,
        },
    )?;
    let maps: Vec<StepMapping> = closure.union().cloned().collect();
    Ok(is_cemetery_separated(&maps).err().map(|w| SeparationWitness {
        first: MappingDescriptor {
            steps: closure.derivation(&maps[w.first]).unwrap().to_vec(),
        },
        second: MappingDescriptor {
            steps: closure.derivation(&maps[w.second]).unwrap().to_vec(),
        },
        agree_at: w.agree_at,
        differ_at: w.differ_at,
    }))
}

/// Classifies the model, trying cheap sufficient conditions before exact checks.
pub fn check_separated_dpomdp(model: &DetPomdpModel, options: &SeparationOptions) -> SeparationVerdict {
    let mut trace = Vec::new();
    let verdict = |status, scope, witness, trace| SeparationVerdict {
        status,
        scope,
        witness,
        trace,
    };

    if let Some(structure) = &model.structure {
        let status = match structure {
            Structure::Affine { .. } => SeparationStatus::SeparatedByAffineStructure,
            Structure::Product { .. } => SeparationStatus::SeparatedByProductStructure,
        };
        match structure_violation(model, structure, Branching::AllControls) {
            None => {
                trace.push(format!("{} annotation holds on every (t, x, u)", structure.kind()));
                return verdict(status, Branching::AllControls, None, trace);
            }
            Some(msg) => trace.push(format!("{} annotation fails on all controls: {msg}", structure.kind())),
        }
        match structure_violation(model, structure, Branching::AdmissibleControls) {
            None => {
                trace.push(format!(
                    "{} annotation holds on every admissible (t, x, u)",
                    structure.kind()
                ));
                return verdict(status, Branching::AdmissibleControls, None, trace);
            }
            Some(msg) => trace.push(format!(
                "{} annotation fails on admissible controls: {msg}",
                structure.kind()
            )),
        }
    } else {
        trace.push("no structure annotation".into());
    }

    let depth = options.max_depth.unwrap_or(model.horizon - 1).min(model.horizon - 1);
    match dynamics_closure(model, depth, options.closure_cap) {
        Some(maps) => match is_separated_mapping_set(&maps) {
            Ok(()) => {
                trace.push(format!("composed dynamics ({} maps) form a separated set", maps.len()));
                return verdict(
                    SeparationStatus::SeparatedByDynamics,
                    Branching::AllControls,
                    None,
                    trace,
                );
            }
            Err(_) => trace.push(format!("composed dynamics ({} maps) are not separated", maps.len())),
        },
        None => {
            trace.push(format!("composed dynamics exceed the cap of {}", options.closure_cap));
        }
    }

    match exact_cemetery_separation(model, Branching::AllControls, options) {
        Ok(None) => {
            trace.push("step-mapping closure is cemetery-separated".into());
            verdict(SeparationStatus::SeparatedExact, Branching::AllControls, None, trace)
        }
        Ok(Some(w)) => {
            trace.push(format!(
                "{} and {} agree at state {} and differ at state {}",
                w.first, w.second, model.states[w.agree_at], model.states[w.differ_at]
            ));
            match exact_cemetery_separation(model, Branching::AdmissibleControls, options) {
                Ok(None) => {
                    trace.push("admissible step-mapping closure is cemetery-separated".into());
                    verdict(
                        SeparationStatus::SeparatedExact,
                        Branching::AdmissibleControls,
                        None,
                        trace,
                    )
                }
                Ok(Some(_)) => {
                    trace.push("admissible step-mapping closure is not cemetery-separated".into());
                    verdict(SeparationStatus::NotSeparated, Branching::AllControls, Some(w), trace)
                }
                Err(e) => {
                    trace.push(format!("admissible check abandoned: {e}"));
                    verdict(SeparationStatus::NotSeparated, Branching::AllControls, Some(w), trace)
                }
            }
        }
        Err(e) => {
            trace.push(format!("exact check abandoned: {e}"));
            verdict(SeparationStatus::UndeterminedCap, Branching::AllControls, None, trace)
        }
    }
}
