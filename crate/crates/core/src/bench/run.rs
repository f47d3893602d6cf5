//! Running suites through the agent and summarising the outcome.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::orchestrator::{
    attribute_error, run_query, AgentConfig, AnswerFormat, ErrorAttribution, PlannerFault, QueryContext, Stage, Trace,
};
use crate::toolbox::ToolFault;

use super::{Category, QuestionSpec, Suite};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultId {
    /// `reconstruct` raises.
    CorruptReconstruction,
    /// `reconstruct` silently turns the point cloud about gravity.
    CorruptReconstructionSkew,
    CorruptPose,
    DropDetections,
    BreakFormalizer,
    BreakCoder,
}

impl FaultId {
    pub const ALL: [FaultId; 6] = [
        FaultId::CorruptReconstruction,
        FaultId::CorruptReconstructionSkew,
        FaultId::CorruptPose,
        FaultId::DropDetections,
        FaultId::BreakFormalizer,
        FaultId::BreakCoder,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FaultId::CorruptReconstruction => "corrupt_reconstruction",
            FaultId::CorruptReconstructionSkew => "corrupt_reconstruction:skew",
            FaultId::CorruptPose => "corrupt_pose",
            FaultId::DropDetections => "drop_detections",
            FaultId::BreakFormalizer => "break_formalizer",
            FaultId::BreakCoder => "break_coder",
        }
    }

    /// The stage a failure under this fault must be blamed on.
    pub fn designated_stage(&self) -> Stage {
        match self {
            FaultId::CorruptReconstruction | FaultId::CorruptReconstructionSkew => Stage::Reconstruction,
            FaultId::CorruptPose => Stage::Orientation,
            FaultId::DropDetections => Stage::Detection,
            FaultId::BreakFormalizer => Stage::Formalize,
            FaultId::BreakCoder => Stage::Computation,
        }
    }

    /// Categories whose recipes touch the faulted component.
    pub fn categories(&self) -> &'static [Category] {
        use Category as C;
        match self {
            FaultId::CorruptReconstruction => &[C::RelativePosition, C::CardinalDirection, C::MetricDistance, C::PerspectiveTaking],
            FaultId::CorruptReconstructionSkew => &[C::PerspectiveTaking],
            FaultId::CorruptPose => &[C::RelativePosition],
            FaultId::DropDetections => &[
                C::RelativePosition,
                C::CardinalDirection,
                C::MultiViewCount,
                C::MetricDistance,
                C::PerspectiveTaking,
            ],
            FaultId::BreakFormalizer | FaultId::BreakCoder => &Category::ALL,
        }
    }
}

impl FromStr for FaultId {
    type Err = FaultError;

    fn from_str(s: &str) -> Result<Self, FaultError> {
        match s {
            "corrupt_reconstruction" | "corrupt_reconstruction:raise" => Ok(FaultId::CorruptReconstruction),
            other => FaultId::ALL
                .into_iter()
                .find(|f| f.as_str() == other)
                .ok_or_else(|| FaultError::Unknown(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FaultError {
    #[error("unknown fault `{0}`")]
    Unknown(String),
    #[error("a fault is already injected into this configuration")]
    AlreadyInjected,
}

/// Wires one fault into the tool backend or the planner.
pub fn inject_fault(config: &AgentConfig, fault: &str) -> Result<AgentConfig, FaultError> {
    let id: FaultId = fault.parse()?;
    if config.tool_fault.is_some() || config.planner_fault.is_some() {
        return Err(FaultError::AlreadyInjected);
    }
    let mut out = config.clone();
    match id {
        FaultId::CorruptReconstruction => out.tool_fault = Some(ToolFault::CorruptReconstructionRaise),
        FaultId::CorruptReconstructionSkew => out.tool_fault = Some(ToolFault::CorruptReconstructionSkew),
        FaultId::CorruptPose => out.tool_fault = Some(ToolFault::CorruptPose),
        FaultId::DropDetections => out.tool_fault = Some(ToolFault::DropDetections),
        FaultId::BreakFormalizer => out.planner_fault = Some(PlannerFault::BreakFormalizer),
        FaultId::BreakCoder => out.planner_fault = Some(PlannerFault::BreakCoder),
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryScore {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionResult {
    pub id: String,
    pub category: Category,
    pub expected: String,
    pub predicted: Option<String>,
    pub correct: bool,
    pub turns: usize,
    pub attribution: Option<ErrorAttribution>,
    /// File name of the question's trace.
    pub trace: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub per_category: BTreeMap<Category, CategoryScore>,
    pub correct: usize,
    pub total: usize,
    pub overall: f64,
    /// Wrong answers per blamed stage.
    pub attribution: BTreeMap<Stage, usize>,
    pub questions: Vec<QuestionResult>,
    /// Kept out of the JSON form so reports of equal runs compare equal.
    #[serde(skip)]
    pub wall_ms: u64,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

impl SuiteReport {
    pub fn from_results(questions: Vec<QuestionResult>, wall_ms: u64) -> Self {
        let mut per_category: BTreeMap<Category, CategoryScore> = BTreeMap::new();
        let mut attribution: BTreeMap<Stage, usize> = BTreeMap::new();
        for q in &questions {
            let s = per_category.entry(q.category).or_insert(CategoryScore {
                correct: 0,
                total: 0,
                accuracy: 0.0,
            });
            s.total += 1;
            s.correct += q.correct as usize;
            if !q.correct {
                let stage = q.attribution.as_ref().map(|a| a.stage).unwrap_or(Stage::Other);
                *attribution.entry(stage).or_default() += 1;
            }
        }
        for s in per_category.values_mut() {
            s.accuracy = ratio(s.correct, s.total);
        }
        let correct = questions.iter().filter(|q| q.correct).count();
        SuiteReport {
            per_category,
            correct,
            total: questions.len(),
            overall: ratio(correct, questions.len()),
            attribution,
            questions,
            wall_ms,
        }
    }

    pub fn failures(&self) -> usize {
        self.total - self.correct
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::from("| Category | Correct | Total | Accuracy |\n|---|---:|---:|---:|\n");
        for (c, score) in &self.per_category {
            let _ = writeln!(
                s,
                "| {c} | {} | {} | {:.1}% |",
                score.correct,
                score.total,
                100.0 * score.accuracy
            );
        }
        let _ = writeln!(s, "| **overall** | {} | {} | {:.1}% |", self.correct, self.total, 100.0 * self.overall);
        s.push('\n');
        s.push_str(&histogram_table(&self.attribution));
        s
    }
}

fn histogram_table(hist: &BTreeMap<Stage, usize>) -> String {
    let total: usize = hist.values().sum();
    let mut s = format!("Failures: {total}\n\n| Stage | Failures | Share |\n|---|---:|---:|\n");
    for stage in Stage::ALL {
        let n = hist.get(&stage).copied().unwrap_or(0);
        let _ = writeln!(s, "| {stage} | {n} | {:.1}% |", 100.0 * ratio(n, total));
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AttributionError {
    #[error("no reports to summarise")]
    Empty,
}

/// Stage breakdown of all failures across `reports`, as a markdown table.
pub fn attribution_report(reports: &[SuiteReport]) -> Result<String, AttributionError> {
    if reports.is_empty() {
        return Err(AttributionError::Empty);
    }
    let mut hist: BTreeMap<Stage, usize> = BTreeMap::new();
    for r in reports {
        for (stage, n) in &r.attribution {
            *hist.entry(*stage).or_default() += n;
        }
    }
    let questions: usize = reports.iter().map(|r| r.total).sum();
    Ok(format!("Questions: {questions}\n{}", histogram_table(&hist)))
}

pub struct SuiteRun {
    pub report: SuiteReport,
    /// `(question id, trace)` in suite order.
    pub traces: Vec<(String, Trace)>,
}

fn run_one(suite: &Suite, q: &QuestionSpec, config: &AgentConfig) -> (QuestionResult, Option<Trace>) {
    let mut cfg = config.clone();
    cfg.noise.seed = config.noise.seed ^ q.seed;
    let outcome = suite
        .scene_of(q)
        .ok_or_else(|| format!("scene `{}` is missing", q.scene))
        .and_then(|scene| {
            QueryContext::with_scene(q.query.clone(), scene.clone(), AnswerFormat::Mcq(q.options.clone()))
                .map_err(|e| e.to_string())
        })
        .and_then(|ctx| run_query(&ctx, &cfg).map_err(|e| e.to_string()));
    let expected = q.answer_letter().to_string();
    match outcome {
        Ok(trace) => {
            let predicted = trace.answer.as_ref().and_then(|a| a.option.clone());
            let correct = predicted.as_deref() == Some(expected.as_str());
            let attribution = (!correct).then(|| attribute_error(&trace, Some(&q.ground_truth)));
            (
                QuestionResult {
                    id: q.id.clone(),
                    category: q.category,
                    expected,
                    predicted,
                    correct,
                    turns: trace.turns,
                    attribution,
                    trace: format!("{}.jsonl", q.id),
                },
                Some(trace),
            )
        }
        Err(message) => (
            QuestionResult {
                id: q.id.clone(),
                category: q.category,
                expected,
                predicted: None,
                correct: false,
                turns: 0,
                attribution: Some(ErrorAttribution::new(Stage::Other, message)),
                trace: String::new(),
            },
            None,
        ),
    }
}

/// Runs every question, at most `parallelism` at a time, and scores exact
/// option matches.
pub fn run_suite(suite: &Suite, config: &AgentConfig, parallelism: usize) -> SuiteRun {
    let started = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .expect("thread pool builds");
    let results: Vec<(QuestionResult, Option<Trace>)> =
        pool.install(|| suite.questions.par_iter().map(|q| run_one(suite, q, config)).collect());
    let mut traces = Vec::new();
    let mut rows = Vec::new();
    for (r, t) in results {
        if let Some(t) = t {
            traces.push((r.id.clone(), t));
        }
        rows.push(r);
    }
    SuiteRun {
        report: SuiteReport::from_results(rows, started.elapsed().as_millis() as u64),
        traces,
    }
}
