//! The agent: formalize the question into a task constraint, then plan,
//! call tools and compute under that constraint until an answer is bound.

mod answer;
mod attribution;
mod engine;
mod faults;
mod llm_planner;
mod planner;
mod scripted;
mod select;
mod trace;
mod workspace;

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::llm::LlmClient;
use crate::toolbox::{NoiseConfig, SceneSpec, SyntheticBackend, ToolFault, Toolbox};

pub use answer::{finalize_answer, format_quantity, Answer, FinalizeError, OPTION_LETTERS};
pub use attribution::{attribute_error, frames_match, stage_for_api, ErrorAttribution, Stage};
pub use engine::{
    bind_output, parse_constraint, resolve_args, run_compute_loop, run_formalize, ArgResolveError, FormalizeOutcome,
    LoopOutcome, DEFAULT_FORMALIZE_RETRIES, EXPR_PREFIX,
};
pub use faults::{FaultyPlanner, PlannerFault};
pub use llm_planner::LlmPlanner;
pub use planner::{
    CodeRequest, FormalizeDocs, PlanState, PlanStep, Planner, PlannerError, VarDoc, FINAL_ANSWER_API,
};
pub use scripted::{has_recipe, QueryTemplate, ScriptedPlanner, Tolerances};
pub use select::{detections_from_value, resolve_ambiguity, Detection, SelectError, Selector};
pub use trace::{BindingRecord, CallRecord, FailureEvent, FormalizeAttempt, StepRecord, Trace, TraceError};
pub use workspace::{Binding, Provenance, Workspace, WorkspaceError};

pub const DEFAULT_BUDGET: usize = 15;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerFormat {
    Free,
    Mcq(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QueryError {
    #[error("query text is empty")]
    EmptyQuery,
    #[error("a query needs at least one image or a scene")]
    NoVisualInput,
    #[error("multiple choice needs 2 to {max} options, got {got}")]
    OptionCount { got: usize, max: usize },
}

/// A question plus the visual input it is asked about.
#[derive(Debug, Clone)]
pub struct QueryContext {
    pub query: String,
    pub scene: Option<Arc<SceneSpec>>,
    /// Image references handed to vision-capable models.
    pub images: Vec<String>,
    pub format: AnswerFormat,
    /// Overrides the detectable entity list taken from the scene.
    pub entities: Option<Vec<String>>,
}

impl QueryContext {
    pub fn new(
        query: impl Into<String>,
        scene: Option<Arc<SceneSpec>>,
        images: Vec<String>,
        format: AnswerFormat,
    ) -> Result<Self, QueryError> {
        let query = query.into();
        if query.trim().is_empty() {
            return Err(QueryError::EmptyQuery);
        }
        if scene.is_none() && images.is_empty() {
            return Err(QueryError::NoVisualInput);
        }
        if let AnswerFormat::Mcq(o) = &format {
            if !(2..=OPTION_LETTERS.len()).contains(&o.len()) {
                return Err(QueryError::OptionCount {
                    got: o.len(),
                    max: OPTION_LETTERS.len(),
                });
            }
        }
        Ok(QueryContext {
            query,
            scene,
            images,
            format,
            entities: None,
        })
    }

    pub fn with_scene(query: impl Into<String>, scene: Arc<SceneSpec>, format: AnswerFormat) -> Result<Self, QueryError> {
        Self::new(query, Some(scene), vec![], format)
    }

    /// Question text with lettered options appended.
    pub fn prompt_text(&self) -> String {
        let mut s = self.query.clone();
        if let AnswerFormat::Mcq(options) = &self.format {
            for (l, o) in OPTION_LETTERS.iter().zip(options) {
                s.push_str(&format!("\n{l}. {o}"));
            }
        }
        s
    }

    /// Entities a frame or objective may name, when known.
    pub fn entity_names(&self) -> Option<Vec<String>> {
        if let Some(e) = &self.entities {
            return Some(e.clone());
        }
        let scene = self.scene.as_ref()?;
        let mut names: Vec<String> = Vec::new();
        for o in &scene.objects {
            if !names.contains(&o.class) {
                names.push(o.class.clone());
            }
        }
        Some(names)
    }

    pub fn camera_count(&self) -> usize {
        match &self.scene {
            Some(s) => s.cameras.len(),
            None => self.images.len(),
        }
    }
}

/// Builds a fresh planner per query.
pub type PlannerFactory = Arc<dyn Fn() -> Box<dyn Planner> + Send + Sync>;

#[derive(Clone)]
pub enum PlannerKind {
    Scripted,
    Llm(LlmClient),
    Custom(PlannerFactory),
}

#[derive(Clone)]
pub struct AgentConfig {
    pub budget: usize,
    pub formalize_retries: usize,
    pub planner: PlannerKind,
    pub noise: NoiseConfig,
    pub tool_fault: Option<ToolFault>,
    pub planner_fault: Option<PlannerFault>,
    pub tolerances: Tolerances,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            budget: DEFAULT_BUDGET,
            formalize_retries: DEFAULT_FORMALIZE_RETRIES,
            planner: PlannerKind::Scripted,
            noise: NoiseConfig::default(),
            tool_fault: None,
            planner_fault: None,
            tolerances: Tolerances::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AgentError {
    #[error("this configuration needs a scene to drive the synthetic tools")]
    NoScene,
    #[error("noise: {0}")]
    Noise(String),
}

/// Builds the planner and synthetic toolbox from `config` and runs the query.
pub fn run_query(ctx: &QueryContext, config: &AgentConfig) -> Result<Trace, AgentError> {
    let scene = ctx.scene.clone().ok_or(AgentError::NoScene)?;
    config.noise.validate().map_err(AgentError::Noise)?;
    let toolbox = Toolbox::new(Arc::new(SyntheticBackend::new(scene, config.noise, config.tool_fault)));
    let base: Box<dyn Planner> = match &config.planner {
        PlannerKind::Scripted => Box::new(ScriptedPlanner::new(config.tolerances)),
        PlannerKind::Llm(client) => Box::new(LlmPlanner::new(client.clone())),
        PlannerKind::Custom(make) => make(),
    };
    let mut planner: Box<dyn Planner> = match config.planner_fault {
        Some(f) => Box::new(FaultyPlanner::new(base, f)),
        None => base,
    };
    Ok(run_query_with(ctx, config.budget, config.formalize_retries, planner.as_mut(), &toolbox))
}

/// Formalize, then run the compute loop; failures are attributed.
pub fn run_query_with(
    ctx: &QueryContext,
    budget: usize,
    formalize_retries: usize,
    planner: &mut dyn Planner,
    toolbox: &Toolbox,
) -> Trace {
    let started = Instant::now();
    let formalized = run_formalize(ctx, planner, formalize_retries);
    let mut trace = Trace {
        query: ctx.prompt_text(),
        formalization: formalized.attempts,
        constraint: None,
        steps: vec![],
        answer: None,
        failure: None,
        attribution: None,
        turns: 0,
        budget,
        bindings: vec![],
        wall_ms: 0,
    };
    match formalized.constraint {
        Err(message) => trace.failure = Some(FailureEvent::Formalize { message }),
        Ok(tc) => {
            let outcome = run_compute_loop(&tc, ctx, planner, toolbox, budget);
            trace.constraint = Some(tc);
            trace.steps = outcome.steps;
            trace.answer = outcome.answer;
            trace.failure = outcome.failure;
            trace.turns = outcome.turns;
            trace.bindings = outcome
                .workspace
                .iter()
                .map(|(name, b)| BindingRecord {
                    name: name.to_string(),
                    type_name: b.value.type_name().to_string(),
                    summary: b.value.summary(),
                    provenance: b.provenance.clone(),
                })
                .collect();
        }
    }
    if trace.failure.is_some() {
        trace.attribution = Some(attribute_error(&trace, None));
    }
    trace.wall_ms = started.elapsed().as_millis() as u64;
    trace
}
