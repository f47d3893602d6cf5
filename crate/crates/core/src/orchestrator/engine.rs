//! Formalize, then the budgeted plan/execute/bind loop.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use crate::constraint::{
    parse_formalization_doc, parse_frame_spec, validate_task_constraint, ObjectiveSpec, TaskConstraint,
};
use crate::geocalc::{self, render_knowledge, retrieve_knowledge, GeoValue, TypeTag};
use crate::toolbox::{ApiName, ToolArgs, ToolError, ToolOutput, ToolRequest, ToolStatus, Toolbox};

use super::answer::{finalize_answer, Answer};
use super::planner::{CodeRequest, FormalizeDocs, PlanState, Planner, PlannerError, VarDoc, FINAL_ANSWER_API};
use super::trace::{CallRecord, FailureEvent, FormalizeAttempt, StepRecord};
use super::workspace::{Provenance, Workspace};
use super::QueryContext;

pub const DEFAULT_FORMALIZE_RETRIES: usize = 2;

/// Prefix marking a string argument as a geocalc expression over the
/// workspace.
pub const EXPR_PREFIX: &str = "$expr ";

pub struct FormalizeOutcome {
    pub attempts: Vec<FormalizeAttempt>,
    pub constraint: Result<TaskConstraint, String>,
}

/// Parses and validates both formalization documents against the scene.
pub fn parse_constraint(docs: &FormalizeDocs, ctx: &QueryContext) -> Result<TaskConstraint, String> {
    let rdoc = parse_formalization_doc(&docs.reference).map_err(|e| format!("reference frame: {e}"))?;
    let reference = parse_frame_spec(&rdoc.formalization).map_err(|e| format!("reference frame: {e}"))?;
    let odoc = parse_formalization_doc(&docs.objective).map_err(|e| format!("objective: {e}"))?;
    let entities = ctx.entity_names();
    let objective = ObjectiveSpec::from_statement(&odoc.formalization, entities.as_deref().unwrap_or(&[]))
        .map_err(|e| format!("objective: {e}"))?;
    let tc = TaskConstraint {
        reference,
        objective,
        reasoning: format!("{}\n{}", rdoc.reasoning, odoc.reasoning),
    };
    if let Some(entities) = entities {
        let report = validate_task_constraint(&tc, &entities, Some(ctx.camera_count()));
        if !report.is_valid() {
            let flags: Vec<String> = report.flags.iter().map(|f| f.to_string()).collect();
            return Err(format!("invalid constraint: {}", flags.join("; ")));
        }
    }
    Ok(tc)
}

/// Up to `1 + retries` attempts; each retry sees the previous error.
pub fn run_formalize(ctx: &QueryContext, planner: &mut dyn Planner, retries: usize) -> FormalizeOutcome {
    let mut attempts = Vec::new();
    let mut feedback: Option<String> = None;
    for _ in 0..=retries {
        let (docs, result) = match planner.formalize(ctx, feedback.as_deref()) {
            Ok(docs) => {
                let r = parse_constraint(&docs, ctx);
                (Some(docs), r)
            }
            Err(e) => (None, Err(e.to_string())),
        };
        match result {
            Ok(tc) => {
                attempts.push(FormalizeAttempt { docs, error: None });
                return FormalizeOutcome {
                    attempts,
                    constraint: Ok(tc),
                };
            }
            Err(e) => {
                log::info!("formalization attempt {} failed: {e}", attempts.len() + 1);
                attempts.push(FormalizeAttempt {
                    docs,
                    error: Some(e.clone()),
                });
                feedback = Some(e);
            }
        }
    }
    let last = feedback.unwrap_or_default();
    FormalizeOutcome {
        constraint: Err(format!("no valid formalization after {} attempts: {last}", attempts.len())),
        attempts,
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ArgResolveError {
    #[error("argument `{name}`: {message}")]
    Expr {
        name: String,
        message: String,
        /// Referenced variables that hold an empty list.
        empty_inputs: Vec<String>,
    },
    #[error("argument `{0}` is null")]
    Null(String),
    #[error("arguments must be a JSON object")]
    NotObject,
}

fn json_to_value(
    name: &str,
    v: &serde_json::Value,
    ws: &Workspace,
    deps: &mut BTreeSet<String>,
) -> Result<GeoValue, ArgResolveError> {
    use serde_json::Value as J;
    Ok(match v {
        J::Null => return Err(ArgResolveError::Null(name.to_string())),
        J::Bool(b) => GeoValue::Bool(*b),
        J::Number(n) => GeoValue::Scalar(n.as_f64().unwrap_or(f64::NAN)),
        J::String(s) => match s.strip_prefix(EXPR_PREFIX) {
            Some(src) => {
                let fail = |message: String, names: &BTreeSet<String>| {
                    let empty_inputs = names
                        .iter()
                        .filter(|n| matches!(ws.value(n), Some(GeoValue::List(l)) if l.is_empty()))
                        .cloned()
                        .collect();
                    ArgResolveError::Expr {
                        name: name.to_string(),
                        message,
                        empty_inputs,
                    }
                };
                let expr = geocalc::parse_expression(src).map_err(|e| fail(e.to_string(), &BTreeSet::new()))?;
                let mut names = BTreeSet::new();
                expr.names(&mut names);
                deps.extend(names.iter().filter(|n| ws.contains(n)).cloned());
                geocalc::evaluate_expr(&expr, ws).map_err(|e| fail(e.to_string(), &names))?
            }
            None => GeoValue::Text(s.clone()),
        },
        J::Array(items) => GeoValue::List(
            items
                .iter()
                .enumerate()
                .map(|(i, x)| json_to_value(&format!("{name}[{i}]"), x, ws, deps))
                .collect::<Result<_, _>>()?,
        ),
        J::Object(map) => GeoValue::Record(
            map.iter()
                .map(|(k, x)| Ok((k.clone(), json_to_value(&format!("{name}.{k}"), x, ws, deps)?)))
                .collect::<Result<BTreeMap<_, _>, ArgResolveError>>()?,
        ),
    })
}

/// Tool arguments with `$expr` strings evaluated, plus the workspace
/// variables they read.
pub fn resolve_args(args: &serde_json::Value, ws: &Workspace) -> Result<(ToolArgs, Vec<String>), ArgResolveError> {
    let mut deps = BTreeSet::new();
    let map = match args {
        serde_json::Value::Object(m) => m,
        serde_json::Value::Null => return Ok((ToolArgs::new(), vec![])),
        _ => return Err(ArgResolveError::NotObject),
    };
    let mut out = ToolArgs::new();
    for (k, v) in map {
        out.insert(k.clone(), json_to_value(k, v, ws, &mut deps)?);
    }
    Ok((out, deps.into_iter().collect()))
}

/// Binds a successful response under the request's output name.
pub fn bind_output(
    ws: &mut Workspace,
    req: &ToolRequest,
    out: &ToolOutput,
    turn: usize,
    deps: Vec<String>,
) -> Result<(), super::workspace::WorkspaceError> {
    ws.bind(
        &req.output_variable,
        out.value.clone(),
        Provenance {
            turn,
            api: req.api.clone(),
            deps,
            perturbed: out.perturbed,
        },
    )
}

pub struct LoopOutcome {
    pub steps: Vec<StepRecord>,
    pub workspace: Workspace,
    pub answer: Option<Answer>,
    pub failure: Option<FailureEvent>,
    pub turns: usize,
}

enum CallResult {
    Done(CallRecord),
    Failed(CallRecord, FailureEvent),
    Final(CallRecord, Result<Answer, FailureEvent>),
}

fn record(request: &ToolRequest, deps: Vec<String>, status: ToolStatus, message: String, perturbed: bool) -> CallRecord {
    CallRecord {
        request: request.clone(),
        deps,
        program: None,
        status,
        message,
        perturbed,
    }
}

fn code_request(ctx: &QueryContext, tc: &TaskConstraint, args: &ToolArgs, ws: &Workspace) -> Result<CodeRequest, String> {
    let request = match args.get("request") {
        Some(GeoValue::Text(t)) => t.clone(),
        Some(other) => other.summary(),
        None => tc.objective.statement.clone(),
    };
    let names: Vec<String> = match args.get("variables") {
        Some(GeoValue::List(items)) => items
            .iter()
            .map(|i| i.as_text().map(str::to_string).ok_or("`variables` must list names".to_string()))
            .collect::<Result<_, _>>()?,
        Some(GeoValue::Text(t)) => vec![t.clone()],
        None => ws.names().to_vec(),
        Some(_) => return Err("`variables` must list names".into()),
    };
    let mut tags = BTreeSet::new();
    if tc.reference.cardinal.is_some() {
        tags.insert(TypeTag::CardinalBinding);
    }
    let mut variables = Vec::new();
    for n in &names {
        let b = ws.get(n).ok_or_else(|| format!("`{n}` is not in the workspace"))?;
        tags.extend(b.tag);
        variables.push(VarDoc {
            name: n.clone(),
            type_name: b.value.type_name().to_string(),
            producer: b.provenance.api.clone(),
            summary: b.value.summary(),
        });
    }
    Ok(CodeRequest {
        question: ctx.prompt_text(),
        constraint: tc.clone(),
        request,
        variables,
        knowledge: render_knowledge(&retrieve_knowledge(&tags)),
    })
}

#[allow(clippy::too_many_arguments)]
fn execute_call(
    req: &ToolRequest,
    turn: usize,
    ctx: &QueryContext,
    tc: &TaskConstraint,
    ws: &mut Workspace,
    planner: &mut dyn Planner,
    toolbox: &Toolbox,
) -> CallResult {
    let arg_fail = |deps: Vec<String>, message: String, blame: Option<String>| {
        CallResult::Failed(
            record(req, deps, ToolStatus::Error, message.clone(), false),
            FailureEvent::Argument {
                turn,
                api: req.api.clone(),
                message,
                blame,
            },
        )
    };
    let (args, deps) = match resolve_args(&req.args, ws) {
        Ok(x) => x,
        Err(e) => {
            let blame = match &e {
                ArgResolveError::Expr { empty_inputs, .. } => empty_inputs.first().cloned(),
                _ => None,
            };
            return arg_fail(vec![], e.to_string(), blame);
        }
    };

    if req.api == FINAL_ANSWER_API {
        let value = args
            .get("answer")
            .cloned()
            .unwrap_or_else(|| GeoValue::Record(args.clone()));
        return match finalize_answer(tc, ctx, &value) {
            Ok(a) => CallResult::Final(record(req, deps, ToolStatus::Ok, a.text.clone(), false), Ok(a)),
            Err(e) => CallResult::Final(
                record(req, deps, ToolStatus::Error, e.to_string(), false),
                Err(FailureEvent::Finalize { message: e.to_string() }),
            ),
        };
    }

    let tool_fail = |deps: Vec<String>, program: Option<String>, message: String| {
        let mut r = record(req, deps, ToolStatus::Error, message.clone(), false);
        r.program = program;
        CallResult::Failed(
            r,
            FailureEvent::Tool {
                turn,
                api: req.api.clone(),
                message,
            },
        )
    };
    let api: ApiName = match req.api.parse() {
        Ok(a) => a,
        Err(e) => return arg_fail(deps, ToolError::to_string(&e), None),
    };
    if ws.contains(&req.output_variable) || !crate::toolbox::is_identifier(&req.output_variable) {
        return arg_fail(deps, format!("cannot bind output `{}`: name is taken or invalid", req.output_variable), None);
    }

    let (result, program, deps) = if api == ApiName::Code {
        let creq = match code_request(ctx, tc, &args, ws) {
            Ok(c) => c,
            Err(m) => return arg_fail(deps, m, None),
        };
        let deps: Vec<String> = creq.variables.iter().map(|v| v.name.clone()).collect();
        let program = match planner.write_program(&creq) {
            Ok(p) => p,
            Err(e) => return tool_fail(deps, None, format!("coder: {e}")),
        };
        let vars = GeoValue::Record(
            deps.iter()
                .map(|n| (n.clone(), ws.value(n).cloned().expect("checked in code_request")))
                .collect(),
        );
        let code_args = ToolArgs::from([("program".to_string(), GeoValue::text(program.clone())), ("variables".to_string(), vars)]);
        (toolbox.call(api, &code_args), Some(program), deps)
    } else {
        (toolbox.call(api, &args), None, deps)
    };

    match result {
        Ok(out) => {
            if let Err(e) = bind_output(ws, req, &out, turn, deps.clone()) {
                return arg_fail(deps, e.to_string(), None);
            }
            let mut r = record(req, deps, ToolStatus::Ok, out.value.summary(), out.perturbed);
            r.program = program;
            CallResult::Done(r)
        }
        Err(e) => tool_fail(deps, program, e.to_string()),
    }
}

/// Runs until the planner finalizes, gives up, or the budget is spent.
/// `tc` is only ever read, so every step records the same digest.
pub fn run_compute_loop(
    tc: &TaskConstraint,
    ctx: &QueryContext,
    planner: &mut dyn Planner,
    toolbox: &Toolbox,
    budget: usize,
) -> LoopOutcome {
    let digest = tc.digest();
    let mut ws = Workspace::new();
    let mut steps: Vec<StepRecord> = Vec::new();
    let mut first_error: Option<FailureEvent> = None;
    let out = |steps, ws, answer, failure, turns| LoopOutcome {
        steps,
        workspace: ws,
        answer,
        failure,
        turns,
    };

    for turn in 1..=budget {
        let started = Instant::now();
        let state = PlanState {
            ctx,
            constraint: tc,
            workspace: &ws,
            history: &steps,
            turn,
            budget,
        };
        let step = match planner.next_step(&state) {
            Ok(s) => s,
            Err(e) => {
                let failure = match e {
                    PlannerError::Unusable { variable, reason } => FailureEvent::Planner {
                        turn,
                        message: format!("`{variable}` is unusable: {reason}"),
                        blame: Some(variable),
                    },
                    PlannerError::Abandon(m) => first_error.take().unwrap_or(FailureEvent::Planner {
                        turn,
                        message: m,
                        blame: None,
                    }),
                    other => FailureEvent::Planner {
                        turn,
                        message: other.to_string(),
                        blame: None,
                    },
                };
                return out(steps, ws, None, Some(failure), turn - 1);
            }
        };
        if step.tool_calls.is_empty() {
            let failure = FailureEvent::Planner {
                turn,
                message: "plan step has no tool calls".into(),
                blame: None,
            };
            return out(steps, ws, None, Some(failure), turn - 1);
        }

        let mut calls = Vec::new();
        let mut finished: Option<Result<Answer, FailureEvent>> = None;
        for req in &step.tool_calls {
            match execute_call(req, turn, ctx, tc, &mut ws, planner, toolbox) {
                CallResult::Done(r) => calls.push(r),
                CallResult::Failed(r, ev) => {
                    calls.push(r);
                    first_error.get_or_insert(ev);
                    break;
                }
                CallResult::Final(r, res) => {
                    calls.push(r);
                    finished = Some(res);
                    break;
                }
            }
        }
        steps.push(StepRecord {
            turn,
            step,
            calls,
            constraint_digest: digest.clone(),
            wall_ms: started.elapsed().as_millis() as u64,
        });
        match finished {
            Some(Ok(answer)) => return out(steps, ws, Some(answer), None, turn),
            Some(Err(ev)) => return out(steps, ws, None, Some(ev), turn),
            None => {}
        }
    }
    out(steps, ws, None, Some(FailureEvent::Budget { budget }), budget)
}
