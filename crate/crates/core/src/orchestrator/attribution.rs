//! Blaming a failed or wrong run on one pipeline stage.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::constraint::{FrameSpec, FrameVariant, TaskConstraint};

use super::planner::FINAL_ANSWER_API;
use super::trace::{BindingRecord, FailureEvent, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stage {
    Formalize,
    Reconstruction,
    Orientation,
    Detection,
    Computation,
    Budget,
    Other,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Formalize,
        Stage::Reconstruction,
        Stage::Orientation,
        Stage::Detection,
        Stage::Computation,
        Stage::Budget,
        Stage::Other,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Formalize => "Formalize",
            Stage::Reconstruction => "Reconstruction",
            Stage::Orientation => "Orientation",
            Stage::Detection => "Detection",
            Stage::Computation => "Computation",
            Stage::Budget => "Budget",
            Stage::Other => "Other",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorAttribution {
    pub stage: Stage,
    pub detail: String,
    /// Workspace variable whose producer was blamed, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blamed: Option<String>,
}

impl ErrorAttribution {
    pub fn new(stage: Stage, detail: impl Into<String>) -> Self {
        ErrorAttribution {
            stage,
            detail: detail.into(),
            blamed: None,
        }
    }
}

pub fn stage_for_api(api: &str) -> Stage {
    match api {
        "reconstruct" => Stage::Reconstruction,
        "predict_obj_pose" => Stage::Orientation,
        "detect" => Stage::Detection,
        "code" => Stage::Computation,
        _ => Stage::Other,
    }
}

/// Reference frames agree up to letter case of entity names.
pub fn frames_match(a: &FrameSpec, b: &FrameSpec) -> bool {
    let same = |x: &str, y: &str| x.eq_ignore_ascii_case(y);
    a.cardinal == b.cardinal
        && match (&a.variant, &b.variant) {
            (
                FrameVariant::ObjectBased { object: o1, axis: x1 },
                FrameVariant::ObjectBased { object: o2, axis: x2 },
            ) => same(o1, o2) && x1 == x2,
            (
                FrameVariant::CameraBased { camera: c1, axis: x1 },
                FrameVariant::CameraBased { camera: c2, axis: x2 },
            ) => c1 == c2 && x1 == x2,
            (
                FrameVariant::DirectionBased { from: f1, to: t1 },
                FrameVariant::DirectionBased { from: f2, to: t2 },
            ) => same(f1, f2) && same(t1, t2),
            _ => false,
        }
}

fn blame_producer(bindings: &BTreeMap<&str, &BindingRecord>, var: &str, why: &str) -> ErrorAttribution {
    match bindings.get(var) {
        Some(b) => ErrorAttribution {
            stage: stage_for_api(&b.provenance.api),
            detail: format!("{why}; `{var}` came from {}", b.provenance.api),
            blamed: Some(var.to_string()),
        },
        None => ErrorAttribution::new(Stage::Other, why.to_string()),
    }
}

/// Earliest perturbed producer among `roots` and their dependencies.
fn back_walk(trace: &Trace, roots: &[String]) -> ErrorAttribution {
    let by_name: BTreeMap<&str, &BindingRecord> = trace.bindings.iter().map(|b| (b.name.as_str(), b)).collect();
    let mut seen = BTreeSet::new();
    let mut stack: Vec<&str> = roots.iter().map(String::as_str).collect();
    while let Some(n) = stack.pop() {
        if let Some(b) = by_name.get(n) {
            if seen.insert(n) {
                stack.extend(b.provenance.deps.iter().map(String::as_str));
            }
        }
    }
    // trace.bindings is in binding order, so the first hit is the earliest
    let culprit = trace
        .bindings
        .iter()
        .filter(|b| seen.contains(b.name.as_str()) && b.provenance.perturbed)
        .min_by_key(|b| b.provenance.turn);
    match culprit {
        Some(b) => ErrorAttribution {
            stage: stage_for_api(&b.provenance.api),
            detail: format!(
                "wrong answer; earliest perturbed input `{}` from {} (turn {})",
                b.name, b.provenance.api, b.provenance.turn
            ),
            blamed: Some(b.name.clone()),
        },
        None => ErrorAttribution::new(Stage::Other, "wrong answer with no perturbed input"),
    }
}

/// Stage of the first event that made the run fail or answer wrongly.
/// `ground_truth`, when known, exposes silently wrong formalizations.
pub fn attribute_error(trace: &Trace, ground_truth: Option<&TaskConstraint>) -> ErrorAttribution {
    if let Some(FailureEvent::Formalize { message }) = &trace.failure {
        return ErrorAttribution::new(Stage::Formalize, message.clone());
    }
    if let (Some(tc), Some(gt)) = (&trace.constraint, ground_truth) {
        if !frames_match(&tc.reference, &gt.reference) {
            return ErrorAttribution::new(
                Stage::Formalize,
                format!("formalized `{}`, expected `{}`", tc.reference, gt.reference),
            );
        }
    }
    let by_name: BTreeMap<&str, &BindingRecord> = trace.bindings.iter().map(|b| (b.name.as_str(), b)).collect();
    match &trace.failure {
        Some(FailureEvent::Formalize { .. }) => unreachable!("handled above"),
        Some(FailureEvent::Budget { budget }) => {
            ErrorAttribution::new(Stage::Budget, format!("no final answer within {budget} turns"))
        }
        Some(FailureEvent::Tool { api, message, turn }) => {
            ErrorAttribution::new(stage_for_api(api), format!("{api} failed at turn {turn}: {message}"))
        }
        Some(FailureEvent::Argument { blame: Some(v), message, .. })
        | Some(FailureEvent::Planner { blame: Some(v), message, .. }) => blame_producer(&by_name, v, message),
        Some(FailureEvent::Argument { api, message, .. }) => {
            ErrorAttribution::new(Stage::Other, format!("bad arguments for {api}: {message}"))
        }
        Some(FailureEvent::Planner { message, .. }) => {
            let failed = trace.steps.iter().flat_map(|s| &s.calls).find(|c| c.status == crate::toolbox::ToolStatus::Error);
            match failed {
                Some(c) => ErrorAttribution::new(
                    stage_for_api(&c.request.api),
                    format!("{} failed: {}", c.request.api, c.message),
                ),
                None => ErrorAttribution::new(Stage::Other, message.clone()),
            }
        }
        Some(FailureEvent::Finalize { message }) => ErrorAttribution::new(Stage::Other, message.clone()),
        None => {
            let roots: Vec<String> = trace
                .steps
                .iter()
                .flat_map(|s| &s.calls)
                .filter(|c| c.request.api == FINAL_ANSWER_API)
                .flat_map(|c| c.deps.iter().cloned())
                .collect();
            back_walk(trace, &roots)
        }
    }
}
