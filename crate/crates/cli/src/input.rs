use std::fs;
use std::path::Path;

use detpomdp::model::parse_model;
use detpomdp::value::parse_rational;
use detpomdp::{Belief, DetPomdpModel, Rational};

use crate::error::CliError;
use crate::GlobalArgs;

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

pub fn model_text(global: &GlobalArgs) -> Result<String, CliError> {
    let path = global
        .model
        .as_deref()
        .ok_or_else(|| CliError::Usage("this command needs --model".into()))?;
    read(path)
}

/// Parses the model and applies the `--belief` override.
pub fn load_model(global: &GlobalArgs) -> Result<DetPomdpModel, CliError> {
    let model = parse_model(&model_text(global)?)?;
    match &global.belief {
        Some(arg) => {
            let b = parse_belief(&model, arg)?;
            Ok(model.with_initial_belief(b))
        }
        None => Ok(model),
    }
}

pub fn initial_belief(model: &DetPomdpModel) -> Result<Belief, CliError> {
    model
        .initial_belief
        .clone()
        .ok_or_else(|| CliError::Model("the model has no initial_belief; pass --belief".into()))
}

/// `label:p/q,...` or a JSON object of label to weight, given inline or as a file path.
pub fn parse_belief(model: &DetPomdpModel, arg: &str) -> Result<Belief, CliError> {
    let text = if Path::new(arg).is_file() {
        read(Path::new(arg))?
    } else {
        arg.to_string()
    };
    let text = text.trim();
    let pairs: Vec<(String, Rational)> = if text.starts_with('{') {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Model(format!("belief: {e}")))?;
        let object = value
            .as_object()
            .ok_or_else(|| CliError::Model("belief: expected an object".into()))?;
        object
            .iter()
            .map(|(label, w)| {
                let literal = match w {
                    serde_json::Value::String(s) => s.clone(),
                    serde_json::Value::Number(n) => n.to_string(),
                    _ => return Err(CliError::Model(format!("belief[{label:?}]: expected a rational"))),
                };
                Ok((label.clone(), weight(label, &literal)?))
            })
            .collect::<Result<_, _>>()?
    } else {
        text.split(',')
            .filter(|part| !part.trim().is_empty())
            .map(|part| {
                let (label, literal) = part
                    .rsplit_once(':')
                    .ok_or_else(|| CliError::Model(format!("belief: expected label:weight, got {part:?}")))?;
                Ok((label.trim().to_string(), weight(label, literal.trim())?))
            })
            .collect::<Result<_, CliError>>()?
    };
    Ok(model.belief_from_labels(pairs.iter().map(|(l, w)| (l.as_str(), w.clone())))?)
}

fn weight(label: &str, literal: &str) -> Result<Rational, CliError> {
    parse_rational(literal).map_err(|e| CliError::Model(format!("belief[{label:?}]: {e}")))
}
