use std::fs;
use std::time::Instant;

use detpomdp::analysis::{
    check_separated_dpomdp, scientific, scope_name, verify_bounds, SeparationOptions, VerifyOptions,
};
use detpomdp::model::{
    default_tank_prices, gen_random, gen_tank, gen_tight_bound, serialize_model, validate_document, AdmissibilityMode,
    ModelError, RandomOptions, RandomSizes, Severity, TankParams,
};
use detpomdp::reachability::{reachable_layers_with, Branching, ReachOptions};
use detpomdp::solver::{brute_force_value, check_bellman, simulate, solve_with, SolveOptions};
use detpomdp::value::rational_to_f64;
use detpomdp::{DetPomdpModel, ExtendedValue};
use serde_json::{json, Value};

use crate::error::CliError;
use crate::input::{initial_belief, load_model, model_text};
use crate::{AdmissibilityArg, BranchingArg, Cli, Command, Format, GenerateKind, GlobalArgs, Preset};

pub fn dispatch(cli: &Cli) -> Result<String, CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Validate => validate(g),
        Command::Generate { kind, out } => generate(kind, out.as_deref()),
        Command::Solve => solve(g),
        Command::Reachable { branching, t_max } => reachable(g, *branching, *t_max),
        Command::Bounds => bounds(g),
        Command::CheckSeparated { depth } => check_separated(g, *depth),
        Command::Simulate { x0 } => simulate_cmd(g, x0),
        Command::OracleCheck {
            count,
            seed,
            max_states,
            max_controls,
            max_observations,
            max_horizon,
        } => oracle_check(
            g,
            *count,
            *seed,
            RandomSizes {
                states: *max_states,
                controls: *max_controls,
                observations: *max_observations,
                horizon: *max_horizon,
            },
        ),
    }
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Two-column `quantity,value` output, or the equivalent JSON object.
fn key_values(format: Format, pairs: Vec<(&str, Value)>) -> String {
    match format {
        Format::Json => json_text(&Value::Object(
            pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        )),
        Format::Csv => {
            let rows: Vec<Vec<String>> = pairs
                .into_iter()
                .map(|(k, v)| {
                    let text = match v {
                        Value::String(s) => s,
                        Value::Null => String::new(),
                        other => other.to_string(),
                    };
                    vec![k.to_string(), text]
                })
                .collect();
            csv_text(&["quantity", "value"], &rows)
        }
    }
}

fn decimal(v: &ExtendedValue) -> String {
    match v {
        ExtendedValue::Finite(r) => format!("{:.6}", rational_to_f64(r)),
        ExtendedValue::Infinite => "inf".into(),
    }
}

fn validate(g: &GlobalArgs) -> Result<String, CliError> {
    let report = validate_document(&model_text(g)?);
    let severity = |s: Severity| match s {
        Severity::Error => "error",
        Severity::Warning => "warning",
    };
    let text = match g.format {
        Format::Json => json_text(&json!({
            "ok": report.ok,
            "issues": report.issues.iter().map(|i| json!({
                "severity": severity(i.severity),
                "path": i.path,
                "message": i.message,
            })).collect::<Vec<_>>(),
        })),
        Format::Csv => {
            let rows: Vec<Vec<String>> = report
                .issues
                .iter()
                .map(|i| vec![severity(i.severity).to_string(), i.path.clone(), i.message.clone()])
                .collect();
            csv_text(&["severity", "path", "message"], &rows)
        }
    };
    if report.ok {
        Ok(text)
    } else {
        print!("{text}");
        Err(CliError::Model(format!(
            "{} error(s) in the model document",
            report.errors().count()
        )))
    }
}

fn generate(kind: &GenerateKind, out: Option<&std::path::Path>) -> Result<String, CliError> {
    let usage = |e: ModelError| match e {
        ModelError::Generator(msg) => CliError::Usage(msg),
        other => other.into(),
    };
    let model = match kind {
        GenerateKind::Tank {
            preset,
            horizon,
            negate_prices,
            belief_seed,
        } => {
            let mut params = match preset {
                Preset::Instance1 => TankParams::instance_1(),
                Preset::Instance2 => TankParams::instance_2(),
            };
            if let Some(h) = horizon {
                params.horizon = *h;
                params.prices = default_tank_prices(*h);
            }
            if *negate_prices {
                params.prices = params.prices.iter().map(|p| -p).collect();
            }
            params.belief_seed = *belief_seed;
            let tank = gen_tank(&params).map_err(usage)?;
            for w in &tank.warnings {
                eprintln!("warning: {w}");
            }
            tank.model
        }
        GenerateKind::TightBound { n } => gen_tight_bound(*n).map_err(usage)?,
        GenerateKind::Random {
            seed,
            states,
            controls,
            observations,
            horizon,
            affine,
            product,
            admissibility,
            inf_prob,
            stationary,
        } => {
            if !(0.0..=1.0).contains(inf_prob) {
                return Err(CliError::Usage("--inf-prob must lie in [0, 1]".into()));
            }
            let options = RandomOptions {
                affine: *affine,
                product: *product,
                admissibility: match admissibility {
                    AdmissibilityArg::Full => AdmissibilityMode::Full,
                    AdmissibilityArg::Random => AdmissibilityMode::Random,
                    AdmissibilityArg::Restrictive => AdmissibilityMode::Restrictive,
                },
                infinite_cost_probability: *inf_prob,
                stationary: *stationary,
                support_size: None,
            };
            let sizes = RandomSizes {
                states: *states,
                controls: *controls,
                observations: *observations,
                horizon: *horizon,
            };
            gen_random(*seed, sizes, &options).map_err(usage)?
        }
    };
    let text = serialize_model(&model);
    match out {
        Some(path) => {
            fs::write(path, &text).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

fn solve(g: &GlobalArgs) -> Result<String, CliError> {
    let model = load_model(g)?;
    let b0 = initial_belief(&model)?;
    let start = Instant::now();
    let (values, _) = solve_with(
        &model,
        &b0,
        &SolveOptions {
            max_beliefs: g.cap_beliefs,
        },
    )?;
    eprintln!("solved in {:.3} s", start.elapsed().as_secs_f64());
    let reach = values.reach();
    let v = values.initial_value();
    Ok(key_values(
        g.format,
        vec![
            ("value", json!(v.to_string())),
            ("decimal", json!(decimal(v))),
            ("reachable_beliefs", json!(reach.span_size(0, model.horizon)?)),
            ("value_entries", json!(values.len())),
        ],
    ))
}

fn reachable(g: &GlobalArgs, branching: BranchingArg, t_max: Option<usize>) -> Result<String, CliError> {
    let model = load_model(g)?;
    let b0 = initial_belief(&model)?;
    let t_max = t_max.unwrap_or(model.horizon);
    let layers = reachable_layers_with(
        &model,
        &b0,
        t_max,
        &ReachOptions {
            branching: match branching {
                BranchingArg::All => Branching::AllControls,
                BranchingArg::Admissible => Branching::AdmissibleControls,
            },
            max_beliefs: g.cap_beliefs,
        },
    )?;
    let rows: Vec<(usize, usize, usize, bool)> = (0..=t_max)
        .map(|t| {
            (
                t,
                layers.layer_size(t),
                layers.cumulative_size(t),
                layers.cemetery_reached(t),
            )
        })
        .collect();
    Ok(match g.format {
        Format::Json => json_text(&json!({
            "layers": rows.iter().map(|&(t, size, cumulative, cemetery)| json!({
                "t": t,
                "layer_size": size,
                "cumulative_size": cumulative,
                "cemetery_reached": cemetery,
            })).collect::<Vec<_>>(),
        })),
        Format::Csv => csv_text(
            &["t", "layer_size", "cumulative_size", "cemetery_reached"],
            &rows
                .iter()
                .map(|(t, s, c, d)| vec![t.to_string(), s.to_string(), c.to_string(), d.to_string()])
                .collect::<Vec<_>>(),
        ),
    })
}

fn separation_options(g: &GlobalArgs, depth: Option<usize>) -> SeparationOptions {
    SeparationOptions {
        max_depth: depth,
        closure_cap: g.cap_closure,
    }
}

fn bounds(g: &GlobalArgs) -> Result<String, CliError> {
    let model = load_model(g)?;
    let b0 = initial_belief(&model)?;
    let report = verify_bounds(
        &model,
        &b0,
        &VerifyOptions {
            max_beliefs: g.cap_beliefs,
            separation: separation_options(g, None),
        },
    )?;
    let big = |v: &Option<num_bigint::BigUint>| v.as_ref().map_or(Value::Null, |b| json!(b.to_string()));
    let tight = report.tight();
    let violations: Vec<String> = report
        .violations()
        .map(|c| format!("{}: {} > {}", c.name, c.empirical, c.bound))
        .collect();
    let text = key_values(
        g.format,
        vec![
            ("states", json!(report.num_states)),
            ("controls", json!(report.num_controls)),
            ("horizon", json!(report.horizon)),
            ("support_size", json!(report.support_size)),
            ("littman", json!(report.littman.to_string())),
            ("littman_approx", json!(scientific(&report.littman))),
            ("thm1_term_a", json!(report.thm1.term_a.to_string())),
            ("thm1_term_b", big(&report.thm1.term_b)),
            ("thm1", json!(report.thm1.min.to_string())),
            ("thm1_approx", json!(scientific(&report.thm1.min))),
            ("separation", json!(report.separation.status.as_str())),
            ("scope", json!(scope_name(report.separation.scope))),
            ("thm2", big(&report.thm2)),
            ("thm2_stable", big(&report.thm2_stable)),
            ("stable_set_size", json!(report.stable_set_size)),
            ("empirical", json!(report.empirical)),
            ("empirical_with_initial", json!(report.empirical_with_initial)),
            ("empirical_admissible", json!(report.empirical_admissible)),
            ("tight", json!(!tight.is_empty())),
            ("tight_bounds", json!(tight.join(";"))),
            ("violations", json!(violations.len())),
        ],
    );
    if violations.is_empty() {
        Ok(text)
    } else {
        print!("{text}");
        Err(CliError::Internal(format!("bound violated: {}", violations.join("; "))))
    }
}

fn check_separated(g: &GlobalArgs, depth: Option<usize>) -> Result<String, CliError> {
    let model = load_model(g)?;
    let verdict = check_separated_dpomdp(&model, &separation_options(g, depth));
    let witness = verdict.witness.as_ref();
    let label = |x: usize| json!(model.states[x]);
    let mut pairs = vec![
        ("status", json!(verdict.status.as_str())),
        ("scope", json!(scope_name(verdict.scope))),
        ("first", witness.map_or(Value::Null, |w| json!(w.first.to_string()))),
        ("second", witness.map_or(Value::Null, |w| json!(w.second.to_string()))),
        ("agree_at", witness.map_or(Value::Null, |w| label(w.agree_at))),
        ("differ_at", witness.map_or(Value::Null, |w| label(w.differ_at))),
    ];
    Ok(match g.format {
        Format::Json => {
            pairs.push(("trace", json!(verdict.trace)));
            key_values(g.format, pairs)
        }
        Format::Csv => {
            pairs.extend(verdict.trace.iter().map(|line| ("trace", json!(line))));
            key_values(g.format, pairs)
        }
    })
}

fn simulate_cmd(g: &GlobalArgs, x0: &str) -> Result<String, CliError> {
    let model = load_model(g)?;
    let b0 = initial_belief(&model)?;
    let x = model
        .state_index(x0)
        .ok_or_else(|| CliError::Usage(format!("unknown state label {x0:?}")))?;
    if !b0.states().contains(&x) {
        return Err(CliError::Usage(format!(
            "state {x0:?} lies outside the support of the initial belief"
        )));
    }
    let (_, policy) = solve_with(
        &model,
        &b0,
        &SolveOptions {
            max_beliefs: g.cap_beliefs,
        },
    )?;
    let sim = simulate(&model, &policy, x, &b0)?;
    for w in &sim.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!("realized cost {}", sim.total_cost.to_literal());
    let header = [
        "t",
        "state",
        "observation",
        "control",
        "step_cost",
        "supp_min",
        "supp_max",
        "supp_size",
    ];
    let rows: Vec<Vec<String>> = sim
        .records
        .iter()
        .map(|r| {
            vec![
                r.t.to_string(),
                model.states[r.state].clone(),
                model.observations[r.observation].clone(),
                r.control.map_or(String::new(), |u| model.controls[u].clone()),
                r.step_cost.to_literal(),
                model.states[r.supp_min].clone(),
                model.states[r.supp_max].clone(),
                r.supp_size.to_string(),
            ]
        })
        .collect();
    Ok(match g.format {
        Format::Csv => csv_text(&header, &rows),
        Format::Json => json_text(&json!({
            "records": rows.iter().map(|row| {
                Value::Object(header.iter().zip(row).map(|(k, v)| (k.to_string(), json!(v))).collect())
            }).collect::<Vec<_>>(),
            "total_cost": sim.total_cost.to_literal(),
            "warnings": sim.warnings,
        })),
    })
}

/// Sizes cycle through every combination up to the maxima as the seed advances.
fn oracle_instance(seed: u64, max: RandomSizes) -> Result<DetPomdpModel, CliError> {
    let mut k = seed as usize;
    let mut pick = |m: usize| {
        let v = 1 + k % m.max(1);
        k /= m.max(1);
        v
    };
    let sizes = RandomSizes {
        states: pick(max.states),
        controls: pick(max.controls),
        observations: pick(max.observations),
        horizon: pick(max.horizon),
    };
    let options = RandomOptions {
        admissibility: match seed % 3 {
            0 => AdmissibilityMode::Restrictive,
            1 => AdmissibilityMode::Random,
            _ => AdmissibilityMode::Full,
        },
        infinite_cost_probability: if seed.is_multiple_of(2) { 0.15 } else { 0.0 },
        ..RandomOptions::default()
    };
    gen_random(seed, sizes, &options).map_err(|e| match e {
        ModelError::Generator(msg) => CliError::Usage(msg),
        other => other.into(),
    })
}

fn oracle_check(g: &GlobalArgs, count: u64, seed: u64, max: RandomSizes) -> Result<String, CliError> {
    let instances: Vec<(String, DetPomdpModel)> = if g.model.is_some() {
        vec![("model".into(), load_model(g)?)]
    } else {
        (seed..seed + count)
            .map(|s| Ok((format!("seed {s}"), oracle_instance(s, max)?)))
            .collect::<Result<_, CliError>>()?
    };
    let mut passed = 0;
    let mut failures = Vec::new();
    for (name, model) in &instances {
        let b0 = initial_belief(model)?;
        let (values, _) = solve_with(
            model,
            &b0,
            &SolveOptions {
                max_beliefs: g.cap_beliefs,
            },
        )?;
        let oracle = brute_force_value(model, &b0, g.cap_oracle)?;
        let bellman = check_bellman(model, &values);
        if *values.initial_value() == oracle && bellman.is_ok() {
            passed += 1;
        } else {
            let detail = format!(
                "{name}: dp {} oracle {oracle}{}",
                values.initial_value(),
                bellman.err().map_or(String::new(), |e| format!(", bellman: {e}"))
            );
            eprintln!("mismatch {detail}");
            failures.push(detail);
        }
    }
    let text = key_values(
        g.format,
        vec![
            ("instances", json!(instances.len())),
            ("passed", json!(passed)),
            ("failed", json!(failures.len())),
        ],
    );
    if failures.is_empty() {
        Ok(text)
    } else {
        print!("{text}");
        Err(CliError::Internal(format!("{} oracle mismatch(es)", failures.len())))
    }
}
