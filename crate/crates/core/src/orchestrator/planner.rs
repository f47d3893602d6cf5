//! The planner interface shared by the scripted and LLM policies.

use serde::{Deserialize, Serialize};

use crate::constraint::TaskConstraint;
use crate::toolbox::ToolRequest;

use super::trace::StepRecord;
use super::workspace::Workspace;
use super::QueryContext;

/// Pseudo-API that ends the compute loop.
pub const FINAL_ANSWER_API: &str = "generate_final_answer";

/// Raw model responses for the two formalization prompts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormalizeDocs {
    pub reference: String,
    pub objective: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanStep {
    pub analysis: String,
    pub tool_calls: Vec<ToolRequest>,
}

impl PlanStep {
    pub fn finalize_call(&self) -> Option<&ToolRequest> {
        self.tool_calls.iter().find(|c| c.api == FINAL_ANSWER_API)
    }

    pub fn finalize(analysis: impl Into<String>, answer: serde_json::Value) -> Self {
        PlanStep {
            analysis: analysis.into(),
            tool_calls: vec![ToolRequest {
                api: FINAL_ANSWER_API.into(),
                args: serde_json::json!({ "answer": answer }),
                output_variable: "final_answer".into(),
            }],
        }
    }
}

/// What a planner sees at the start of a turn.
pub struct PlanState<'a> {
    pub ctx: &'a QueryContext,
    pub constraint: &'a TaskConstraint,
    pub workspace: &'a Workspace,
    pub history: &'a [StepRecord],
    /// 1-based index of the turn being planned.
    pub turn: usize,
    pub budget: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarDoc {
    pub name: String,
    pub type_name: String,
    pub producer: String,
    pub summary: String,
}

/// Everything the coder gets for one `code` call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodeRequest {
    pub question: String,
    pub constraint: TaskConstraint,
    pub request: String,
    pub variables: Vec<VarDoc>,
    /// Retrieved formula notes, already rendered.
    pub knowledge: String,
}

impl CodeRequest {
    pub fn func_signature(&self) -> String {
        self.variables.iter().map(|v| v.name.as_str()).collect::<Vec<_>>().join(", ")
    }

    pub fn var_docs(&self) -> String {
        self.variables
            .iter()
            .map(|v| format!("- {} ({}, from {}): {}", v.name, v.type_name, v.producer, v.summary))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlannerError {
    /// The planner needs a value that the workspace holds but cannot use,
    /// e.g. an empty detection list.
    #[error("`{variable}` is unusable: {reason}")]
    Unusable { variable: String, reason: String },
    /// The planner stops after a failed tool call.
    #[error("giving up after failed call: {0}")]
    Abandon(String),
    #[error("no policy for {0}")]
    Unsupported(String),
    #[error("malformed planner output: {0}")]
    Malformed(String),
    #[error("llm: {0}")]
    Llm(String),
}

pub trait Planner: Send {
    /// One attempt at both formalization documents. `feedback` carries the
    /// parse or validation error of the previous attempt.
    fn formalize(&mut self, ctx: &QueryContext, feedback: Option<&str>) -> Result<FormalizeDocs, PlannerError>;

    fn next_step(&mut self, state: &PlanState<'_>) -> Result<PlanStep, PlannerError>;

    /// Program text for a `code` call.
    fn write_program(&mut self, req: &CodeRequest) -> Result<String, PlannerError>;
}
