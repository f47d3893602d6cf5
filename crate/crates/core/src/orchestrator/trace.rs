//! Run records, persisted as JSON lines.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::constraint::TaskConstraint;
use crate::toolbox::{ToolRequest, ToolStatus};

use super::answer::Answer;
use super::attribution::ErrorAttribution;
use super::planner::{FormalizeDocs, PlanStep};
use super::workspace::Provenance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormalizeAttempt {
    pub docs: Option<FormalizeDocs>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub request: ToolRequest,
    /// Workspace variables the arguments referenced.
    pub deps: Vec<String>,
    /// Program text, for `code` calls.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program: Option<String>,
    pub status: ToolStatus,
    pub message: String,
    pub perturbed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub turn: usize,
    pub step: PlanStep,
    pub calls: Vec<CallRecord>,
    pub constraint_digest: String,
    pub wall_ms: u64,
}

/// The first event that made the run fail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FailureEvent {
    Formalize { message: String },
    /// A tool call returned an error.
    Tool { turn: usize, api: String, message: String },
    /// Arguments could not be resolved against the workspace.
    Argument { turn: usize, api: String, message: String, blame: Option<String> },
    Planner { turn: usize, message: String, blame: Option<String> },
    Finalize { message: String },
    Budget { budget: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BindingRecord {
    pub name: String,
    pub type_name: String,
    pub summary: String,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub query: String,
    pub formalization: Vec<FormalizeAttempt>,
    pub constraint: Option<TaskConstraint>,
    pub steps: Vec<StepRecord>,
    pub answer: Option<Answer>,
    pub failure: Option<FailureEvent>,
    pub attribution: Option<ErrorAttribution>,
    pub turns: usize,
    pub budget: usize,
    pub bindings: Vec<BindingRecord>,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum TraceLine {
    Formalize {
        query: String,
        attempts: Vec<FormalizeAttempt>,
        constraint: Option<TaskConstraint>,
        digest: Option<String>,
    },
    Step(StepRecord),
    Summary {
        answer: Option<Answer>,
        failure: Option<FailureEvent>,
        attribution: Option<ErrorAttribution>,
        turns: usize,
        budget: usize,
        bindings: Vec<BindingRecord>,
        wall_ms: u64,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("trace io: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("trace is incomplete: {0}")]
    Incomplete(&'static str),
}

impl Trace {
    pub fn succeeded(&self) -> bool {
        self.answer.is_some() && self.failure.is_none()
    }

    pub fn tool_call_count(&self) -> usize {
        self.steps.iter().map(|s| s.calls.len()).sum()
    }

    /// Copy with wall-clock fields zeroed, for determinism checks.
    pub fn without_timing(&self) -> Trace {
        let mut t = self.clone();
        t.wall_ms = 0;
        for s in &mut t.steps {
            s.wall_ms = 0;
        }
        t
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), TraceError> {
        let mut line = |l: &TraceLine| -> Result<(), TraceError> {
            serde_json::to_writer(&mut w, l).map_err(|e| TraceError::Io(e.into()))?;
            w.write_all(b"\n")?;
            Ok(())
        };
        line(&TraceLine::Formalize {
            query: self.query.clone(),
            attempts: self.formalization.clone(),
            constraint: self.constraint.clone(),
            digest: self.constraint.as_ref().map(TaskConstraint::digest),
        })?;
        for s in &self.steps {
            line(&TraceLine::Step(s.clone()))?;
        }
        line(&TraceLine::Summary {
            answer: self.answer.clone(),
            failure: self.failure.clone(),
            attribution: self.attribution.clone(),
            turns: self.turns,
            budget: self.budget,
            bindings: self.bindings.clone(),
            wall_ms: self.wall_ms,
        })
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Trace, TraceError> {
        let mut head = None;
        let mut steps = Vec::new();
        let mut summary = None;
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: TraceLine =
                serde_json::from_str(&line).map_err(|source| TraceError::Json { line: i + 1, source })?;
            match parsed {
                TraceLine::Formalize {
                    query,
                    attempts,
                    constraint,
                    ..
                } => head = Some((query, attempts, constraint)),
                TraceLine::Step(s) => steps.push(s),
                s @ TraceLine::Summary { .. } => summary = Some(s),
            }
        }
        let (query, formalization, constraint) = head.ok_or(TraceError::Incomplete("no formalize line"))?;
        let Some(TraceLine::Summary {
            answer,
            failure,
            attribution,
            turns,
            budget,
            bindings,
            wall_ms,
        }) = summary
        else {
            return Err(TraceError::Incomplete("no summary line"));
        };
        Ok(Trace {
            query,
            formalization,
            constraint,
            steps,
            answer,
            failure,
            attribution,
            turns,
            budget,
            bindings,
            wall_ms,
        })
    }
}
