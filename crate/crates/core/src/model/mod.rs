//! Det-POMDP instances: the data tuple, validation, document format and generators.
//!
//! Time-indexed tables are stored as slices. A table holds either a single
//! slice that applies at every time step or exactly `T` slices, one per
//! transition `t ∈ {0,…,T−1}`. When `stationary` is set every table holds a
//! single slice.

mod format;
mod generate;

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use thiserror::Error;

use crate::measure::{make_belief, Belief, MeasureError};
use crate::value::{parse_rational, ExtendedValue, LiteralError, Rational};

pub use format::{parse_model, serialize_model, validate_document};
pub use generate::{
    default_tank_prices, gen_random, gen_tank, gen_tight_bound, random_belief, AdmissibilityMode, RandomOptions,
    RandomSizes, TankInstance, TankParams,
};

/// Declared shape of the dynamics on numeric state labels.
///
/// Annotations are claims; [`crate::analysis`] verifies them against the
/// dynamics table before relying on them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Structure {
    /// `label(f_t(x,u)) = label(x) + offsets[t][u]`.
    Affine { offsets: Vec<Vec<Rational>> },
    /// `label(f_t(x,u)) = label(x) · factors[t][u]`.
    Product { factors: Vec<Vec<Rational>> },
}

impl Structure {
    pub fn kind(&self) -> &'static str {
        match self {
            Structure::Affine { .. } => "affine",
            Structure::Product { .. } => "product",
        }
    }

    pub fn coefficients(&self) -> &[Vec<Rational>] {
        match self {
            Structure::Affine { offsets } => offsets,
            Structure::Product { factors } => factors,
        }
    }
}

/// The full data tuple of a finite-horizon deterministic POMDP.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DetPomdpModel {
    pub horizon: usize,
    pub stationary: bool,
    pub states: Vec<String>,
    pub controls: Vec<String>,
    pub observations: Vec<String>,
    /// `dynamics[slice][x][u]` is the index of `f_t(x,u)`.
    pub dynamics: Vec<Vec<Vec<usize>>>,
    /// `obs0[x]` is the index of `h_0(x)`.
    pub obs0: Vec<usize>,
    /// `obs[slice][y][u]` is the index of `h_{t+1}(y,u)`, evaluated at the next state `y`.
    pub obs: Vec<Vec<Vec<usize>>>,
    pub cost: Vec<Vec<Vec<ExtendedValue>>>,
    pub final_cost: Vec<ExtendedValue>,
    /// `admissible[slice][x]` is the sorted list of admissible control indices.
    pub admissible: Vec<Vec<Vec<usize>>>,
    pub initial_belief: Option<Belief>,
    pub structure: Option<Structure>,
}

fn slice_of<T>(table: &[T], t: usize) -> &T {
    if table.len() == 1 {
        &table[0]
    } else {
        &table[t]
    }
}

impl DetPomdpModel {
    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_controls(&self) -> usize {
        self.controls.len()
    }

    pub fn num_observations(&self) -> usize {
        self.observations.len()
    }

    /// `f_t(x,u)`.
    pub fn next_state(&self, t: usize, x: usize, u: usize) -> usize {
        slice_of(&self.dynamics, t)[x][u]
    }

    /// `h_{t+1}(y,u)` for the transition taken at time `t`.
    pub fn observe(&self, t: usize, y: usize, u: usize) -> usize {
        slice_of(&self.obs, t)[y][u]
    }

    pub fn observe_initial(&self, x: usize) -> usize {
        self.obs0[x]
    }

    pub fn step_cost(&self, t: usize, x: usize, u: usize) -> &ExtendedValue {
        &slice_of(&self.cost, t)[x][u]
    }

    pub fn final_cost(&self, x: usize) -> &ExtendedValue {
        &self.final_cost[x]
    }

    pub fn admissible_controls(&self, t: usize, x: usize) -> &[usize] {
        &slice_of(&self.admissible, t)[x]
    }

    pub fn is_admissible(&self, t: usize, x: usize, u: usize) -> bool {
        self.admissible_controls(t, x).binary_search(&u).is_ok()
    }

    /// Column `f_t(·,u)` as a table over states.
    pub fn dynamics_column(&self, t: usize, u: usize) -> Vec<usize> {
        slice_of(&self.dynamics, t).iter().map(|row| row[u]).collect()
    }

    pub fn dynamics_is_time_invariant(&self) -> bool {
        self.dynamics.len() == 1
    }

    /// Slice index shared by the dynamics and observation tables at time `t`.
    ///
    /// Two times with the same index have identical step mappings.
    pub fn transition_slice(&self, t: usize) -> usize {
        if self.dynamics.len() == 1 && self.obs.len() == 1 {
            0
        } else {
            t
        }
    }

    /// Like [`Self::transition_slice`], also accounting for admissibility.
    pub fn admissible_transition_slice(&self, t: usize) -> usize {
        if self.dynamics.len() == 1 && self.obs.len() == 1 && self.admissible.len() == 1 {
            0
        } else {
            t
        }
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }

    /// Builds a belief from state labels and rational weights.
    pub fn belief_from_labels<'a, I>(&self, weights: I) -> Result<Belief, ModelError>
    where
        I: IntoIterator<Item = (&'a str, Rational)>,
    {
        let mut pairs = Vec::new();
        for (label, w) in weights {
            let x = self.state_index(label).ok_or_else(|| ModelError::UnknownLabel {
                path: "initial_belief".into(),
                label: label.to_string(),
            })?;
            pairs.push((x, w));
        }
        Ok(make_belief(pairs, self.num_states())?)
    }

    /// Label-keyed weights, for documents and display.
    pub fn belief_labels(&self, b: &Belief) -> BTreeMap<String, Rational> {
        b.state_weights()
            .map(|(x, w)| (self.states[x].clone(), w.clone()))
            .collect()
    }

    /// Numeric values of the state labels, if every label is a rational literal.
    pub fn numeric_state_labels(&self) -> Option<Vec<Rational>> {
        self.states.iter().map(|s| parse_rational(s).ok()).collect()
    }

    pub fn with_initial_belief(mut self, b: Belief) -> Self {
        self.initial_belief = Some(b);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Severity::Warning => f.write_str("warning"),
            Severity::Error => f.write_str("error"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationIssue {
    pub severity: Severity,
    pub path: String,
    pub message: String,
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}: {}", self.severity, self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ValidationReport {
    pub ok: bool,
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn from_issues(issues: Vec<ValidationIssue>) -> Self {
        let ok = issues.iter().all(|i| i.severity != Severity::Error);
        ValidationReport { ok, issues }
    }

    pub fn errors(&self) -> impl Iterator<Item = &ValidationIssue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &ValidationIssue> {
        self.issues.iter().filter(|i| i.severity == Severity::Warning)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("missing field {0:?}")]
    MissingField(String),
    #[error("{path}: expected {expected}")]
    Type { path: String, expected: String },
    #[error("{path}: {source}")]
    Literal { path: String, source: LiteralError },
    #[error("{path}: unknown state label {label:?}")]
    UnknownLabel { path: String, label: String },
    #[error("invalid model: {}", first_error(.0))]
    Invalid(ValidationReport),
    #[error("invalid generator parameters: {0}")]
    Generator(String),
    #[error(transparent)]
    Belief(#[from] MeasureError),
}

fn first_error(report: &ValidationReport) -> String {
    let count = report.errors().count();
    match report.errors().next() {
        Some(issue) if count > 1 => format!("{issue} (and {} more)", count - 1),
        Some(issue) => issue.to_string(),
        None => "no errors".to_string(),
    }
}

struct Issues(Vec<ValidationIssue>);

impl Issues {
    fn error(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(ValidationIssue {
            severity: Severity::Error,
            path: path.into(),
            message: message.into(),
        });
    }

    fn warning(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(ValidationIssue {
            severity: Severity::Warning,
            path: path.into(),
            message: message.into(),
        });
    }
}

fn check_labels(issues: &mut Issues, name: &str, labels: &[String]) {
    if labels.is_empty() {
        issues.error(name, "set must be nonempty");
    }
    let mut seen = HashSet::new();
    for (i, l) in labels.iter().enumerate() {
        if !seen.insert(l) {
            issues.error(format!("{name}[{i}]"), format!("duplicate label {l:?}"));
        }
    }
}

/// Checks that a time-indexed table has an allowed number of slices.
fn check_slices(issues: &mut Issues, name: &str, len: usize, model: &DetPomdpModel) -> bool {
    let ok = if model.stationary {
        len == 1
    } else {
        len == 1 || len == model.horizon
    };
    if !ok {
        let expected = if model.stationary {
            "1 (stationary)".to_string()
        } else {
            format!("1 or {}", model.horizon)
        };
        issues.error(name, format!("has {len} time slices, expected {expected}"));
    }
    ok
}

fn check_index_grid(
    issues: &mut Issues,
    name: &str,
    table: &[Vec<Vec<usize>>],
    rows: usize,
    cols: usize,
    bound: usize,
) {
    for (s, slice) in table.iter().enumerate() {
        if slice.len() != rows {
            issues.error(
                format!("{name}[{s}]"),
                format!("has {} rows, expected {rows}", slice.len()),
            );
            continue;
        }
        for (x, row) in slice.iter().enumerate() {
            if row.len() != cols {
                issues.error(
                    format!("{name}[{s}][{x}]"),
                    format!("has {} entries, expected {cols}", row.len()),
                );
                continue;
            }
            for (u, &v) in row.iter().enumerate() {
                if v >= bound {
                    issues.error(
                        format!("{name}[{s}][{x}][{u}]"),
                        format!("index {v} out of range (size {bound})"),
                    );
                }
            }
        }
    }
}

/// Reports every violated invariant of the data tuple.
pub fn validate_model(model: &DetPomdpModel) -> ValidationReport {
    let mut issues = Issues(Vec::new());
    if model.horizon == 0 {
        issues.error("horizon", "horizon must be at least 1");
    }
    check_labels(&mut issues, "states", &model.states);
    check_labels(&mut issues, "controls", &model.controls);
    check_labels(&mut issues, "observations", &model.observations);
    let (nx, nu, no) = (model.num_states(), model.num_controls(), model.num_observations());

    if check_slices(&mut issues, "dynamics", model.dynamics.len(), model) {
        check_index_grid(&mut issues, "dynamics", &model.dynamics, nx, nu, nx);
    }
    if check_slices(&mut issues, "obs", model.obs.len(), model) {
        check_index_grid(&mut issues, "obs", &model.obs, nx, nu, no);
    }
    if model.obs0.len() != nx {
        issues.error("obs0", format!("has {} entries, expected {nx}", model.obs0.len()));
    } else {
        for (x, &o) in model.obs0.iter().enumerate() {
            if o >= no {
                issues.error(format!("obs0[{x}]"), format!("index {o} out of range (size {no})"));
            }
        }
    }
    if check_slices(&mut issues, "cost", model.cost.len(), model) {
        for (s, slice) in model.cost.iter().enumerate() {
            if slice.len() != nx {
                issues.error(format!("cost[{s}]"), format!("has {} rows, expected {nx}", slice.len()));
                continue;
            }
            for (x, row) in slice.iter().enumerate() {
                if row.len() != nu {
                    issues.error(
                        format!("cost[{s}][{x}]"),
                        format!("has {} entries, expected {nu}", row.len()),
                    );
                }
            }
        }
    }
    if model.final_cost.len() != nx {
        issues.error(
            "final_cost",
            format!("has {} entries, expected {nx}", model.final_cost.len()),
        );
    }
    if check_slices(&mut issues, "admissible", model.admissible.len(), model) {
        for (s, slice) in model.admissible.iter().enumerate() {
            if slice.len() != nx {
                issues.error(
                    format!("admissible[{s}]"),
                    format!("has {} rows, expected {nx}", slice.len()),
                );
                continue;
            }
            for (x, set) in slice.iter().enumerate() {
                let path = format!("admissible[{s}][{x}]");
                if set.iter().any(|&u| u >= nu) {
                    issues.error(path.clone(), format!("control index out of range (size {nu})"));
                }
                if set.windows(2).any(|w| w[0] >= w[1]) {
                    issues.error(path, "control indices must be strictly increasing");
                }
            }
        }
    }
    if let Some(b) = &model.initial_belief {
        if b.is_cemetery() {
            issues.error("initial_belief", "initial belief must be supported on states");
        } else if b.states().iter().any(|&x| x >= nx) {
            issues.error("initial_belief", "state index out of range");
        }
    }
    if let Some(structure) = &model.structure {
        let name = format!("structure.{}", structure.kind());
        let coeffs = structure.coefficients();
        if check_slices(&mut issues, &name, coeffs.len(), model) {
            for (s, row) in coeffs.iter().enumerate() {
                if row.len() != nu {
                    issues.error(
                        format!("{name}[{s}]"),
                        format!("has {} entries, expected {nu}", row.len()),
                    );
                }
            }
        }
        if model.numeric_state_labels().is_none() {
            issues.warning(&name, "state labels are not numeric, the annotation cannot be verified");
        }
    }
    ValidationReport::from_issues(issues.0)
}

/// Validates and turns errors into a [`ModelError`].
pub fn ensure_valid(model: &DetPomdpModel) -> Result<(), ModelError> {
    let report = validate_model(model);
    if report.ok {
        Ok(())
    } else {
        Err(ModelError::Invalid(report))
    }
}
