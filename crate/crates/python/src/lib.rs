//! Python bindings: build, solve and analyze models from Python.
//!
//! Exact rationals cross the boundary as `"p/q"` strings (or `"inf"`), bound
//! values as Python integers.

use detpomdp::analysis::{
    check_separated_dpomdp, scientific, scope_name, verify_bounds, BoundsError, SeparationOptions, VerifyOptions,
};
use detpomdp::model::{
    default_tank_prices, gen_random, gen_tank, gen_tight_bound, parse_model, serialize_model, validate_document,
    AdmissibilityMode, ModelError, RandomOptions, RandomSizes, Severity, TankParams,
};
use detpomdp::reachability::{reachable_layers_with, Branching, ReachError, ReachOptions, DEFAULT_BELIEF_CAP};
use detpomdp::solver::{simulate, solve_with, SimulateError, SolveError, SolveOptions};
use detpomdp::value::parse_rational;
use detpomdp::{Belief, DetPomdpModel};
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(detpomdp_py, CapExceeded, PyRuntimeError, "A resource cap was reached.");

fn model_err(e: ModelError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn reach_err(e: ReachError) -> PyErr {
    match e {
        ReachError::BeliefCap { .. } | ReachError::ClosureCap { .. } => CapExceeded::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn solve_err(e: SolveError) -> PyErr {
    match e {
        SolveError::Reach(r) => reach_err(r),
        SolveError::OracleCap { .. } => CapExceeded::new_err(e.to_string()),
        SolveError::CemeteryBelief => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn simulate_err(e: SimulateError) -> PyErr {
    match e {
        SimulateError::Policy { .. } => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn bounds_err(e: BoundsError) -> PyErr {
    match e {
        BoundsError::Reach(r) => reach_err(r),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// An immutable model document.
#[pyclass(frozen, module = "detpomdp_py")]
pub struct Model {
    inner: DetPomdpModel,
}

impl Model {
    fn belief(&self) -> PyResult<&Belief> {
        self.inner
            .initial_belief
            .as_ref()
            .ok_or_else(|| PyValueError::new_err("the model has no initial belief; use with_belief"))
    }
}

#[pymethods]
impl Model {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Model {
            inner: parse_model(text).map_err(model_err)?,
        })
    }

    fn to_json(&self) -> String {
        serialize_model(&self.inner)
    }

    #[getter]
    fn states(&self) -> Vec<String> {
        self.inner.states.clone()
    }

    #[getter]
    fn controls(&self) -> Vec<String> {
        self.inner.controls.clone()
    }

    #[getter]
    fn observations(&self) -> Vec<String> {
        self.inner.observations.clone()
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.inner.horizon
    }

    /// Initial belief as `(label, "p/q")` pairs, or `None`.
    #[getter]
    fn initial_belief(&self) -> Option<Vec<(String, String)>> {
        self.inner.initial_belief.as_ref().map(|b| {
            b.state_weights()
                .map(|(x, w)| (self.inner.states[x].clone(), w.to_string()))
                .collect()
        })
    }

    /// Copy with a new initial belief; weights may be ints, strings or `Fraction`s.
    fn with_belief(&self, weights: &Bound<'_, PyDict>) -> PyResult<Model> {
        let mut pairs = Vec::with_capacity(weights.len());
        for (label, weight) in weights.iter() {
            let label: String = label.extract()?;
            let literal = weight.str()?.to_string();
            let w = parse_rational(&literal).map_err(|e| PyValueError::new_err(format!("{label}: {e}")))?;
            pairs.push((label, w));
        }
        let b = self
            .inner
            .belief_from_labels(pairs.iter().map(|(l, w)| (l.as_str(), w.clone())))
            .map_err(model_err)?;
        Ok(Model {
            inner: self.inner.clone().with_initial_belief(b),
        })
    }

    /// Optimal expected cost from the initial belief.
    #[pyo3(signature = (cap_beliefs = DEFAULT_BELIEF_CAP))]
    fn solve(&self, py: Python<'_>, cap_beliefs: usize) -> PyResult<String> {
        let b0 = self.belief()?;
        let options = SolveOptions {
            max_beliefs: cap_beliefs,
        };
        let (values, _) = py.detach(|| solve_with(&self.inner, b0, &options)).map_err(solve_err)?;
        Ok(values.initial_value().to_string())
    }

    /// Rows `(t, layer_size, cumulative_size, cemetery_reached)`.
    #[pyo3(signature = (branching = "all", t_max = None, cap_beliefs = DEFAULT_BELIEF_CAP))]
    fn reachable_counts(
        &self,
        py: Python<'_>,
        branching: &str,
        t_max: Option<usize>,
        cap_beliefs: usize,
    ) -> PyResult<Vec<(usize, usize, usize, bool)>> {
        let branching = match branching {
            "all" => Branching::AllControls,
            "admissible" => Branching::AdmissibleControls,
            other => return Err(PyValueError::new_err(format!("unknown branching {other:?}"))),
        };
        let b0 = self.belief()?;
        let t_max = t_max.unwrap_or(self.inner.horizon);
        let options = ReachOptions {
            branching,
            max_beliefs: cap_beliefs,
        };
        let layers = py
            .detach(|| reachable_layers_with(&self.inner, b0, t_max, &options))
            .map_err(reach_err)?;
        Ok((0..=t_max)
            .map(|t| {
                (
                    t,
                    layers.layer_size(t),
                    layers.cumulative_size(t),
                    layers.cemetery_reached(t),
                )
            })
            .collect())
    }

    /// Theoretical bounds next to the empirical reachable counts.
    fn bounds<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let b0 = self.belief()?;
        let report = py
            .detach(|| verify_bounds(&self.inner, b0, &VerifyOptions::default()))
            .map_err(bounds_err)?;
        let d = PyDict::new(py);
        d.set_item("littman", report.littman.clone())?;
        d.set_item("littman_approx", scientific(&report.littman))?;
        d.set_item("thm1", report.thm1.min.clone())?;
        d.set_item("thm1_term_a", report.thm1.term_a.clone())?;
        d.set_item("thm1_term_b", report.thm1.term_b.clone())?;
        d.set_item("separation", report.separation.status.as_str())?;
        d.set_item("scope", scope_name(report.separation.scope))?;
        d.set_item("thm2", report.thm2.clone())?;
        d.set_item("thm2_stable", report.thm2_stable.clone())?;
        d.set_item("stable_set_size", report.stable_set_size)?;
        d.set_item("empirical", report.empirical)?;
        d.set_item("empirical_with_initial", report.empirical_with_initial)?;
        d.set_item("empirical_admissible", report.empirical_admissible)?;
        d.set_item("tight", report.tight())?;
        d.set_item("sound", report.is_sound())?;
        Ok(d)
    }

    #[pyo3(signature = (depth = None))]
    fn check_separated<'py>(&self, py: Python<'py>, depth: Option<usize>) -> PyResult<Bound<'py, PyDict>> {
        let options = SeparationOptions {
            max_depth: depth,
            ..SeparationOptions::default()
        };
        let verdict = py.detach(|| check_separated_dpomdp(&self.inner, &options));
        let d = PyDict::new(py);
        d.set_item("status", verdict.status.as_str())?;
        d.set_item("separated", verdict.status.is_separated())?;
        d.set_item("scope", scope_name(verdict.scope))?;
        match &verdict.witness {
            Some(w) => {
                let witness = PyDict::new(py);
                witness.set_item("first", w.first.to_string())?;
                witness.set_item("second", w.second.to_string())?;
                witness.set_item("agree_at", &self.inner.states[w.agree_at])?;
                witness.set_item("differ_at", &self.inner.states[w.differ_at])?;
                d.set_item("witness", witness)?;
            }
            None => d.set_item("witness", py.None())?,
        }
        d.set_item("trace", verdict.trace.clone())?;
        Ok(d)
    }

    /// Closed-loop rollout of the optimal policy; one dict per stage.
    fn simulate<'py>(&self, py: Python<'py>, x0: &str) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let b0 = self.belief()?;
        let x = self
            .inner
            .state_index(x0)
            .ok_or_else(|| PyValueError::new_err(format!("unknown state label {x0:?}")))?;
        let (_, policy) = py
            .detach(|| solve_with(&self.inner, b0, &SolveOptions::default()))
            .map_err(solve_err)?;
        let sim = simulate(&self.inner, &policy, x, b0).map_err(simulate_err)?;
        let m = &self.inner;
        sim.records
            .iter()
            .map(|r| {
                let d = PyDict::new(py);
                d.set_item("t", r.t)?;
                d.set_item("state", &m.states[r.state])?;
                d.set_item("observation", &m.observations[r.observation])?;
                d.set_item("control", r.control.map(|u| m.controls[u].clone()))?;
                d.set_item("step_cost", r.step_cost.to_literal())?;
                d.set_item("supp_min", &m.states[r.supp_min])?;
                d.set_item("supp_max", &m.states[r.supp_max])?;
                d.set_item("supp_size", r.supp_size)?;
                Ok(d)
            })
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(states={}, controls={}, observations={}, horizon={})",
            self.inner.num_states(),
            self.inner.num_controls(),
            self.inner.num_observations(),
            self.inner.horizon
        )
    }
}

/// Issues found in a model document as `(severity, path, message)`.
#[pyfunction]
fn validate(text: &str) -> Vec<(&'static str, String, String)> {
    validate_document(text)
        .issues
        .into_iter()
        .map(|i| {
            let severity = match i.severity {
                Severity::Error => "error",
                Severity::Warning => "warning",
            };
            (severity, i.path, i.message)
        })
        .collect()
}

#[pyfunction]
#[pyo3(signature = (preset = "instance-1", horizon = None, negate_prices = false, belief_seed = 0))]
fn tank(preset: &str, horizon: Option<usize>, negate_prices: bool, belief_seed: u64) -> PyResult<Model> {
    let mut params = match preset {
        "instance-1" => TankParams::instance_1(),
        "instance-2" => TankParams::instance_2(),
        other => return Err(PyValueError::new_err(format!("unknown preset {other:?}"))),
    };
    if let Some(h) = horizon {
        params.horizon = h;
        params.prices = default_tank_prices(h);
    }
    if negate_prices {
        params.prices = params.prices.iter().map(|p| -p).collect();
    }
    params.belief_seed = belief_seed;
    Ok(Model {
        inner: gen_tank(&params).map_err(model_err)?.model,
    })
}

#[pyfunction]
fn tight_bound(n: usize) -> PyResult<Model> {
    Ok(Model {
        inner: gen_tight_bound(n).map_err(model_err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (
    seed,
    states = 4,
    controls = 2,
    observations = 2,
    horizon = 3,
    affine = false,
    product = false,
    admissibility = "full",
    inf_prob = 0.0,
    stationary = false,
))]
#[allow(clippy::too_many_arguments)]
fn random_model(
    seed: u64,
    states: usize,
    controls: usize,
    observations: usize,
    horizon: usize,
    affine: bool,
    product: bool,
    admissibility: &str,
    inf_prob: f64,
    stationary: bool,
) -> PyResult<Model> {
    let admissibility = match admissibility {
        "full" => AdmissibilityMode::Full,
        "random" => AdmissibilityMode::Random,
        "restrictive" => AdmissibilityMode::Restrictive,
        other => return Err(PyValueError::new_err(format!("unknown admissibility {other:?}"))),
    };
    let options = RandomOptions {
        affine,
        product,
        admissibility,
        infinite_cost_probability: inf_prob,
        stationary,
        support_size: None,
    };
    let sizes = RandomSizes {
        states,
        controls,
        observations,
        horizon,
    };
    Ok(Model {
        inner: gen_random(seed, sizes, &options).map_err(model_err)?,
    })
}

#[pymodule]
fn detpomdp_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add("CapExceeded", m.py().get_type::<CapExceeded>())?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(tank, m)?)?;
    m.add_function(wrap_pyfunction!(tight_bound, m)?)?;
    m.add_function(wrap_pyfunction!(random_model, m)?)?;
    Ok(())
}
