use serde::{Deserialize, Serialize};

use crate::constraint::{ObjectiveKind, TaskConstraint};
use crate::geocalc::GeoValue;

use super::{AnswerFormat, QueryContext};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub text: String,
    /// Chosen option letter for multiple-choice queries.
    pub option: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FinalizeError {
    #[error("no option is satisfied")]
    NoOption,
    #[error("several options are satisfied: {0:?}")]
    Ambiguous(Vec<String>),
    #[error("`{0}` is not one of the options")]
    UnknownOption(String),
    #[error("cannot read a multiple-choice answer from {0}")]
    Unreadable(String),
}

pub const OPTION_LETTERS: [&str; 6] = ["A", "B", "C", "D", "E", "F"];

/// `2.37` with unit `m` reads "2.37 m".
pub fn format_quantity(x: f64, unit: Option<&str>) -> String {
    match unit {
        Some(u) => format!("{x:.2} {u}"),
        None => {
            let s = format!("{x:.4}");
            let s = s.trim_end_matches('0').trim_end_matches('.');
            if s == "-0" { "0".into() } else { s.to_string() }
        }
    }
}

/// Turns the terminal value into the reported answer.
pub fn finalize_answer(tc: &TaskConstraint, ctx: &QueryContext, value: &GeoValue) -> Result<Answer, FinalizeError> {
    match &ctx.format {
        AnswerFormat::Mcq(options) => {
            let letters = &OPTION_LETTERS[..options.len()];
            let pick = |letter: &str| Answer {
                text: format!("{letter}. {}", options[letters.iter().position(|l| *l == letter).unwrap_or(0)]),
                option: Some(letter.to_string()),
            };
            match value {
                GeoValue::Record(r) => {
                    if let Some(k) = r.keys().find(|k| !letters.contains(&k.as_str())) {
                        return Err(FinalizeError::UnknownOption(k.clone()));
                    }
                    let chosen: Vec<String> = r
                        .iter()
                        .filter(|(_, v)| matches!(v, GeoValue::Bool(true)))
                        .map(|(k, _)| k.clone())
                        .collect();
                    match chosen.as_slice() {
                        [] => Err(FinalizeError::NoOption),
                        [one] => Ok(pick(one)),
                        _ => Err(FinalizeError::Ambiguous(chosen)),
                    }
                }
                GeoValue::Text(t) => {
                    let t = t.trim().trim_end_matches('.');
                    if let Some(l) = letters.iter().find(|l| l.eq_ignore_ascii_case(t)) {
                        return Ok(pick(l));
                    }
                    match options.iter().position(|o| o.eq_ignore_ascii_case(t)) {
                        Some(i) => Ok(pick(letters[i])),
                        None => Err(FinalizeError::UnknownOption(t.to_string())),
                    }
                }
                other => Err(FinalizeError::Unreadable(other.type_name().to_string())),
            }
        }
        AnswerFormat::Free => {
            let text = match value {
                GeoValue::Scalar(x) => match tc.objective.kind {
                    ObjectiveKind::MetricMeasure => format_quantity(*x, Some("m")),
                    ObjectiveKind::Count => format!("{}", x.round()),
                    _ => format_quantity(*x, None),
                },
                GeoValue::Text(t) => t.clone(),
                GeoValue::Bool(b) => if *b { "yes" } else { "no" }.to_string(),
                other => other.summary(),
            };
            Ok(Answer { text, option: None })
        }
    }
}
