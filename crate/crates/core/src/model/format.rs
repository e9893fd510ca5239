//! JSON model documents.
//!
//! A document is a JSON object with the keys `admissible`, `controls`, `cost`,
//! `dynamics`, `final_cost`, `horizon`, `initial_belief`, `obs`, `obs0`,
//! `observations`, `stationary`, `states` and `structure`. Tables hold indices
//! into the label lists. Costs and weights are strings `"p/q"`, integer
//! literals or `"inf"`. Serialization sorts keys and reduces every fraction,
//! so equal models produce identical text.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde_json::{Map, Value};

use super::{validate_model, DetPomdpModel, ModelError, Severity, Structure, ValidationIssue, ValidationReport};
use crate::measure::make_belief;
use crate::value::{format_rational, parse_rational, ExtendedValue, Rational};

struct Reader {
    errors: Vec<ModelError>,
}

impl Reader {
    fn type_error(&mut self, path: &str, expected: &str) {
        self.errors.push(ModelError::Type {
            path: path.to_string(),
            expected: expected.to_string(),
        });
    }

    fn index(&mut self, v: &Value, path: &str) -> Option<usize> {
        match v.as_u64() {
            Some(n) => Some(n as usize),
            None => {
                self.type_error(path, "a nonnegative integer index");
                None
            }
        }
    }

    fn array<'a>(&mut self, v: &'a Value, path: &str) -> Option<&'a Vec<Value>> {
        let a = v.as_array();
        if a.is_none() {
            self.type_error(path, "an array");
        }
        a
    }

    fn labels(&mut self, v: &Value, path: &str) -> Option<Vec<String>> {
        let items = self.array(v, path)?;
        let mut out = Vec::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            match item {
                Value::String(s) => out.push(s.clone()),
                Value::Number(n) => out.push(n.to_string()),
                _ => {
                    self.type_error(&format!("{path}[{i}]"), "a string label");
                    return None;
                }
            }
        }
        Some(out)
    }

    fn literal_text<'a>(&mut self, v: &'a Value, path: &str) -> Option<std::borrow::Cow<'a, str>> {
        match v {
            Value::String(s) => Some(s.as_str().into()),
            Value::Number(n) if n.is_i64() || n.is_u64() => Some(n.to_string().into()),
            _ => {
                self.type_error(path, "a rational string \"p/q\", an integer or \"inf\"");
                None
            }
        }
    }

    fn extended(&mut self, v: &Value, path: &str) -> Option<ExtendedValue> {
        let text = self.literal_text(v, path)?;
        match ExtendedValue::from_str(&text) {
            Ok(x) => Some(x),
            Err(source) => {
                self.errors.push(ModelError::Literal {
                    path: path.to_string(),
                    source,
                });
                None
            }
        }
    }

    fn rational(&mut self, v: &Value, path: &str) -> Option<Rational> {
        let text = self.literal_text(v, path)?;
        match parse_rational(&text) {
            Ok(x) => Some(x),
            Err(source) => {
                self.errors.push(ModelError::Literal {
                    path: path.to_string(),
                    source,
                });
                None
            }
        }
    }

    /// Decodes a nested array of the given depth, applying `leaf` to every element.
    fn nested<T>(
        &mut self,
        v: &Value,
        path: &str,
        depth: usize,
        leaf: &mut dyn FnMut(&mut Reader, &Value, &str) -> Option<T>,
    ) -> Option<NestedOut<T>> {
        if depth == 0 {
            return leaf(self, v, path).map(NestedOut::Leaf);
        }
        let items = self.array(v, path)?;
        let mut out = Vec::with_capacity(items.len());
        let mut ok = true;
        for (i, item) in items.iter().enumerate() {
            match self.nested(item, &format!("{path}[{i}]"), depth - 1, leaf) {
                Some(x) => out.push(x),
                None => ok = false,
            }
        }
        ok.then_some(NestedOut::List(out))
    }
}

enum NestedOut<T> {
    Leaf(T),
    List(Vec<NestedOut<T>>),
}

impl<T> NestedOut<T> {
    fn leaf(self) -> T {
        match self {
            NestedOut::Leaf(x) => x,
            NestedOut::List(_) => unreachable!("depth mismatch"),
        }
    }

    fn list(self) -> Vec<NestedOut<T>> {
        match self {
            NestedOut::List(v) => v,
            NestedOut::Leaf(_) => unreachable!("depth mismatch"),
        }
    }

    fn into_vec1(self) -> Vec<T> {
        self.list().into_iter().map(NestedOut::leaf).collect()
    }

    fn into_vec2(self) -> Vec<Vec<T>> {
        self.list().into_iter().map(NestedOut::into_vec1).collect()
    }

    fn into_vec3(self) -> Vec<Vec<Vec<T>>> {
        self.list().into_iter().map(NestedOut::into_vec2).collect()
    }
}

fn required<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a Value, ModelError> {
    obj.get(key).ok_or_else(|| ModelError::MissingField(key.to_string()))
}

fn syntax_error(e: serde_json::Error) -> ModelError {
    ModelError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Decodes a document, returning the model and every decoding error found.
fn decode(text: &str) -> Result<(Option<DetPomdpModel>, Vec<ModelError>), ModelError> {
    let root: Value = serde_json::from_str(text).map_err(syntax_error)?;
    let obj = root.as_object().ok_or_else(|| ModelError::Type {
        path: "<document>".into(),
        expected: "an object".into(),
    })?;
    for key in [
        "horizon",
        "states",
        "controls",
        "observations",
        "dynamics",
        "obs0",
        "obs",
        "cost",
        "final_cost",
        "admissible",
    ] {
        required(obj, key)?;
    }
    let mut r = Reader { errors: Vec::new() };

    let horizon = r.index(&obj["horizon"], "horizon");
    let stationary = match obj.get("stationary") {
        None | Some(Value::Null) => Some(false),
        Some(Value::Bool(b)) => Some(*b),
        Some(_) => {
            r.type_error("stationary", "a boolean");
            None
        }
    };
    let states = r.labels(&obj["states"], "states");
    let controls = r.labels(&obj["controls"], "controls");
    let observations = r.labels(&obj["observations"], "observations");
    let mut idx = |r: &mut Reader, v: &Value, p: &str| r.index(v, p);
    let dynamics = r
        .nested(&obj["dynamics"], "dynamics", 3, &mut idx)
        .map(NestedOut::into_vec3);
    let obs0 = r.nested(&obj["obs0"], "obs0", 1, &mut idx).map(NestedOut::into_vec1);
    let obs = r.nested(&obj["obs"], "obs", 3, &mut idx).map(NestedOut::into_vec3);
    let admissible = r
        .nested(&obj["admissible"], "admissible", 3, &mut idx)
        .map(NestedOut::into_vec3);
    let mut ext = |r: &mut Reader, v: &Value, p: &str| r.extended(v, p);
    let cost = r.nested(&obj["cost"], "cost", 3, &mut ext).map(NestedOut::into_vec3);
    let final_cost = r
        .nested(&obj["final_cost"], "final_cost", 1, &mut ext)
        .map(NestedOut::into_vec1);

    let structure = match obj.get("structure") {
        None | Some(Value::Null) => Some(None),
        Some(Value::Object(s)) => {
            let kind = s.get("kind").and_then(Value::as_str);
            match (kind, s.get("coefficients")) {
                (Some(kind @ ("affine" | "product")), Some(c)) => {
                    let mut rat = |r: &mut Reader, v: &Value, p: &str| r.rational(v, p);
                    r.nested(c, "structure.coefficients", 2, &mut rat).map(|c| {
                        let c = c.into_vec2();
                        Some(if kind == "affine" {
                            Structure::Affine { offsets: c }
                        } else {
                            Structure::Product { factors: c }
                        })
                    })
                }
                _ => {
                    r.type_error(
                        "structure",
                        "an object with kind \"affine\" or \"product\" and coefficients",
                    );
                    None
                }
            }
        }
        Some(_) => {
            r.type_error("structure", "an object");
            None
        }
    };

    let mut belief_weights = None;
    match obj.get("initial_belief") {
        None | Some(Value::Null) => {}
        Some(Value::Object(m)) => {
            let mut pairs = Vec::new();
            for (label, w) in m {
                if let Some(w) = r.rational(w, &format!("initial_belief.{label}")) {
                    pairs.push((label.clone(), w));
                }
            }
            belief_weights = Some(pairs);
        }
        Some(_) => r.type_error("initial_belief", "an object mapping state labels to weights"),
    }

    let (
        Some(horizon),
        Some(stationary),
        Some(states),
        Some(controls),
        Some(observations),
        Some(dynamics),
        Some(obs0),
        Some(obs),
        Some(cost),
        Some(final_cost),
        Some(admissible),
        Some(structure),
    ) = (
        horizon,
        stationary,
        states,
        controls,
        observations,
        dynamics,
        obs0,
        obs,
        cost,
        final_cost,
        admissible,
        structure,
    )
    else {
        return Ok((None, r.errors));
    };

    let mut initial_belief = None;
    if let Some(pairs) = belief_weights {
        let mut indexed = Vec::new();
        for (label, w) in pairs {
            match states.iter().position(|s| *s == label) {
                Some(x) => indexed.push((x, w)),
                None => r.errors.push(ModelError::UnknownLabel {
                    path: format!("initial_belief.{label}"),
                    label,
                }),
            }
        }
        match make_belief(indexed, states.len()) {
            Ok(b) => initial_belief = Some(b),
            Err(e) => r.errors.push(e.into()),
        }
    }

    let model = DetPomdpModel {
        horizon,
        stationary,
        states,
        controls,
        observations,
        dynamics,
        obs0,
        obs,
        cost,
        final_cost,
        admissible,
        initial_belief,
        structure,
    };
    Ok((Some(model), r.errors))
}

/// Parses and validates a model document.
pub fn parse_model(text: &str) -> Result<DetPomdpModel, ModelError> {
    let (model, mut errors) = decode(text)?;
    if !errors.is_empty() {
        return Err(errors.swap_remove(0));
    }
    let model = model.expect("decoding without errors yields a model");
    let report = validate_model(&model);
    if !report.ok {
        return Err(ModelError::Invalid(report));
    }
    Ok(model)
}

fn error_path(e: &ModelError) -> String {
    match e {
        ModelError::Type { path, .. } | ModelError::Literal { path, .. } | ModelError::UnknownLabel { path, .. } => {
            path.clone()
        }
        ModelError::MissingField(f) => f.clone(),
        ModelError::Belief(_) => "initial_belief".into(),
        _ => "<document>".into(),
    }
}

/// Collects every decoding and validation issue of a document.
pub fn validate_document(text: &str) -> ValidationReport {
    let issue = |e: &ModelError| ValidationIssue {
        severity: Severity::Error,
        path: error_path(e),
        message: e.to_string(),
    };
    match decode(text) {
        Err(e) => ValidationReport::from_issues(vec![issue(&e)]),
        Ok((model, errors)) => {
            let mut issues: Vec<_> = errors.iter().map(issue).collect();
            if let Some(m) = model {
                issues.extend(validate_model(&m).issues);
            }
            ValidationReport::from_issues(issues)
        }
    }
}

fn literal(v: &ExtendedValue) -> Value {
    Value::String(v.to_literal())
}

fn rational(r: &Rational) -> Value {
    Value::String(format_rational(r))
}

fn grid<T>(table: &[Vec<Vec<T>>], f: impl Fn(&T) -> Value + Copy) -> Value {
    Value::Array(
        table
            .iter()
            .map(|slice| {
                Value::Array(
                    slice
                        .iter()
                        .map(|row| Value::Array(row.iter().map(f).collect()))
                        .collect(),
                )
            })
            .collect(),
    )
}

fn labels(v: &[String]) -> Value {
    Value::Array(v.iter().cloned().map(Value::String).collect())
}

/// Canonical text: one sorted top-level key per line, compact values.
pub fn serialize_model(model: &DetPomdpModel) -> String {
    let index = |&i: &usize| Value::from(i);
    let mut doc: BTreeMap<&str, Value> = BTreeMap::new();
    doc.insert("horizon", Value::from(model.horizon));
    doc.insert("stationary", Value::Bool(model.stationary));
    doc.insert("states", labels(&model.states));
    doc.insert("controls", labels(&model.controls));
    doc.insert("observations", labels(&model.observations));
    doc.insert("dynamics", grid(&model.dynamics, index));
    doc.insert("obs0", Value::Array(model.obs0.iter().map(index).collect()));
    doc.insert("obs", grid(&model.obs, index));
    doc.insert("cost", grid(&model.cost, literal));
    doc.insert(
        "final_cost",
        Value::Array(model.final_cost.iter().map(literal).collect()),
    );
    doc.insert("admissible", grid(&model.admissible, index));
    if let Some(b) = &model.initial_belief {
        let weights: Map<String, Value> = model
            .belief_labels(b)
            .into_iter()
            .map(|(k, w)| (k, rational(&w)))
            .collect();
        doc.insert("initial_belief", Value::Object(weights));
    }
    if let Some(s) = &model.structure {
        let mut m = Map::new();
        m.insert("kind".into(), Value::String(s.kind().into()));
        m.insert(
            "coefficients".into(),
            Value::Array(
                s.coefficients()
                    .iter()
                    .map(|row| Value::Array(row.iter().map(rational).collect()))
                    .collect(),
            ),
        );
        doc.insert("structure", Value::Object(m));
    }
    let mut out = String::from("{\n");
    let n = doc.len();
    for (i, (k, v)) in doc.iter().enumerate() {
        out.push_str("  ");
        out.push_str(&Value::String((*k).to_string()).to_string());
        out.push_str(": ");
        out.push_str(&v.to_string());
        out.push_str(if i + 1 < n { ",\n" } else { "\n" });
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{gen_tight_bound, Structure};
    use crate::value::LiteralError;
    use num_bigint::BigInt;

    #[test]
    fn round_trip_tight_bound() {
        let m = gen_tight_bound(3).unwrap();
        let text = serialize_model(&m);
        let back = parse_model(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(
            (back.num_states(), back.num_controls(), back.num_observations()),
            (3, 2, 2)
        );
        assert_eq!(serialize_model(&back), text);
    }

    #[test]
    fn stationary_model_emits_single_slice() {
        let m = gen_tight_bound(4).unwrap();
        let text = serialize_model(&m);
        let v: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["stationary"], Value::Bool(true));
        assert_eq!(v["dynamics"].as_array().unwrap().len(), 1);
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    #[test]
    fn infinite_cost_emits_inf_token() {
        let mut m = gen_tight_bound(3).unwrap();
        m.cost[0][0][1] = ExtendedValue::Infinite;
        m.final_cost[2] = ExtendedValue::Finite(Rational::new(BigInt::from(6), BigInt::from(4)));
        let text = serialize_model(&m);
        assert!(text.contains("\"inf\""));
        assert!(text.contains("\"3/2\""));
        assert_eq!(parse_model(&text).unwrap(), m);
    }

    fn edit(text: &str, key: &str, value: Value) -> String {
        let mut v: Value = serde_json::from_str(text).unwrap();
        match value {
            Value::Null => {
                v.as_object_mut().unwrap().remove(key);
            }
            other => v[key] = other,
        }
        v.to_string()
    }

    #[test]
    fn missing_horizon_named() {
        let text = serialize_model(&gen_tight_bound(3).unwrap());
        let broken = edit(&text, "horizon", Value::Null);
        assert_eq!(parse_model(&broken), Err(ModelError::MissingField("horizon".into())));
    }

    #[test]
    fn initial_belief_is_exact() {
        let text = serialize_model(&gen_tight_bound(3).unwrap());
        let doc = edit(
            &text,
            "initial_belief",
            serde_json::json!({"x1": "1/3", "x2": "1/3", "x3": "1/3"}),
        );
        let m = parse_model(&doc).unwrap();
        let b = m.initial_belief.unwrap();
        assert_eq!(b.weight(0), Rational::new(BigInt::from(1), BigInt::from(3)));
    }

    #[test]
    fn negative_denominator_reported_at_cost_location() {
        let text = serialize_model(&gen_tight_bound(3).unwrap());
        let mut v: Value = serde_json::from_str(&text).unwrap();
        v["cost"][0][1][0] = Value::String("1/-2".into());
        let report = validate_document(&v.to_string());
        assert!(!report.ok);
        let errors: Vec<_> = report.errors().collect();
        assert_eq!(errors.len(), 1);
        assert_eq!(errors[0].path, "cost[0][1][0]");
        assert!(matches!(
            parse_model(&v.to_string()),
            Err(ModelError::Literal {
                source: LiteralError::NegativeDenominator(_),
                ..
            })
        ));
    }

    #[test]
    fn syntax_errors_carry_position() {
        match parse_model("{\n  \"horizon\": 3,\n  oops\n}") {
            Err(ModelError::Syntax { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn structure_round_trips() {
        let mut m = gen_tight_bound(3).unwrap();
        m.states = vec!["1".into(), "2".into(), "3".into()];
        m.initial_belief = None;
        m.structure = Some(Structure::Product {
            factors: vec![vec![
                Rational::from_integer(1.into()),
                Rational::new(1.into(), 2.into()),
            ]],
        });
        assert_eq!(parse_model(&serialize_model(&m)).unwrap(), m);
    }
}
