//! Per-instance checks used by the ensemble suites.

use detpomdp::analysis::{
    check_separated_dpomdp, exact_cemetery_separation, replay_witness, verify_bounds, BoundsReport, SeparationOptions,
    SeparationStatus, VerifyOptions,
};
use detpomdp::filtering::{belief_step, belief_step_via_pushforward};
use detpomdp::reachability::reachable_layers;
use detpomdp::solver::{brute_force_value, check_bellman, solve, DEFAULT_ORACLE_CAP};
use detpomdp::DetPomdpModel;

fn b0(model: &DetPomdpModel) -> detpomdp::Belief {
    model
        .initial_belief
        .clone()
        .expect("generated models carry an initial belief")
}

/// `τ` computed directly and through the step mapping agree on every enumerated `(t, b, u, o)`.
pub fn pushforward_equivalence(model: &DetPomdpModel) -> Result<usize, String> {
    let layers = reachable_layers(model, &b0(model), model.horizon).map_err(|e| e.to_string())?;
    let mut count = 0;
    for t in 0..model.horizon {
        for &id in layers.layer(t) {
            let b = layers.belief(id);
            for u in 0..model.num_controls() {
                for o in 0..model.num_observations() {
                    let direct = belief_step(model, t, b, u, o);
                    let via = belief_step_via_pushforward(model, t, b, u, o);
                    if direct != via {
                        return Err(format!("t={t} b={b} u={u} o={o}: {direct} vs {via}"));
                    }
                    count += 1;
                }
            }
        }
    }
    Ok(count)
}

/// `Σ_o |supp τ_t(b,u,o) ∩ X| ≤ |supp b|` at every expanded node.
pub fn support_contraction(model: &DetPomdpModel) -> Result<usize, String> {
    let layers = reachable_layers(model, &b0(model), model.horizon).map_err(|e| e.to_string())?;
    let mut count = 0;
    for t in 0..model.horizon {
        for &id in layers.layer(t) {
            let b = layers.belief(id);
            if b.is_cemetery() {
                continue;
            }
            for u in 0..model.num_controls() {
                let total: usize = (0..model.num_observations())
                    .map(|o| belief_step(model, t, b, u, o).states().len())
                    .sum();
                if total > b.support_size() {
                    return Err(format!("t={t} b={b} u={u}: {total} > {}", b.support_size()));
                }
                count += 1;
            }
        }
    }
    Ok(count)
}

/// The belief DP and the history-tree oracle give the same exact value.
pub fn dp_matches_oracle(model: &DetPomdpModel) -> Result<String, String> {
    let b = b0(model);
    let (values, _) = solve(model, &b).map_err(|e| e.to_string())?;
    check_bellman(model, &values)?;
    let oracle = brute_force_value(model, &b, DEFAULT_ORACLE_CAP).map_err(|e| e.to_string())?;
    if *values.initial_value() != oracle {
        return Err(format!("dp {} vs oracle {oracle}", values.initial_value()));
    }
    Ok(values.initial_value().to_string())
}

pub fn bounds_conform(model: &DetPomdpModel) -> Result<BoundsReport, String> {
    let report = verify_bounds(model, &b0(model), &VerifyOptions::default()).map_err(|e| e.to_string())?;
    if let Some(v) = report.violations().next() {
        return Err(format!("{} bound {} < empirical {}", v.name, v.bound, v.empirical));
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SeparationOutcome {
    pub structural: bool,
    pub exact: bool,
    pub not_separated: bool,
}

/// Structural verdicts must survive the exact check; negative verdicts must replay.
pub fn structural_soundness(model: &DetPomdpModel) -> Result<SeparationOutcome, String> {
    let options = SeparationOptions::default();
    let verdict = check_separated_dpomdp(model, &options);
    let mut outcome = SeparationOutcome::default();
    match verdict.status {
        SeparationStatus::SeparatedByAffineStructure
        | SeparationStatus::SeparatedByProductStructure
        | SeparationStatus::SeparatedByDynamics => {
            outcome.structural = true;
            let exact = exact_cemetery_separation(model, verdict.scope, &options).map_err(|e| e.to_string())?;
            if let Some(w) = exact {
                return Err(format!(
                    "{} but exact check fails: {} vs {}",
                    verdict.status, w.first, w.second
                ));
            }
        }
        SeparationStatus::SeparatedExact => outcome.exact = true,
        SeparationStatus::NotSeparated => {
            outcome.not_separated = true;
            let w = verdict.witness.as_ref().ok_or("not_separated without witness")?;
            if !replay_witness(model, w, verdict.scope) {
                return Err(format!("witness does not replay: {} vs {}", w.first, w.second));
            }
        }
        SeparationStatus::UndeterminedCap => {}
    }
    Ok(outcome)
}
