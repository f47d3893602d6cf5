//! Planner backed by chat-completion calls on the shipped prompt templates.

use std::collections::BTreeMap;

use crate::llm::{extract_fenced_block, render_prompt, FenceTag, LlmClient, Role, TemplateId, FORMALIZE_EXAMPLES};
use crate::toolbox::API_DOCUMENTS;

use super::planner::{CodeRequest, FormalizeDocs, PlanState, PlanStep, Planner, PlannerError};
use super::QueryContext;

pub struct LlmPlanner {
    client: LlmClient,
}

impl LlmPlanner {
    pub fn new(client: LlmClient) -> Self {
        LlmPlanner { client }
    }

    fn ask(&self, role: Role, prompt: &str, images: &[String]) -> Result<String, PlannerError> {
        self.client
            .ask(role, prompt, images)
            .map(|c| c.text)
            .map_err(|e| PlannerError::Llm(e.to_string()))
    }
}

fn render(id: TemplateId, subs: &[(&'static str, String)]) -> Result<String, PlannerError> {
    let map: BTreeMap<&str, String> = subs.iter().cloned().collect();
    render_prompt(id, &map).map_err(|e| PlannerError::Malformed(e.to_string()))
}

fn with_feedback(prompt: String, feedback: Option<&str>) -> String {
    match feedback {
        Some(f) => format!("{prompt}\n\nYour previous answer could not be used: {f}\nFix it and answer again."),
        None => prompt,
    }
}

/// History block: question, constraint, current workspace and past steps.
fn history(state: &PlanState<'_>) -> String {
    let tc = state.constraint;
    let mut s = format!(
        "[Question]\n{}\n[Formalization]\nReference frame: {}\nObjective: {}\n[Workspace]\n",
        state.ctx.prompt_text(),
        tc.reference.render(),
        tc.objective.statement
    );
    if state.workspace.is_empty() {
        s.push_str("(empty)\n");
    }
    for (name, b) in state.workspace.iter() {
        s.push_str(&format!("- {name} ({}, from {}): {}\n", b.value.type_name(), b.provenance.api, b.value.summary()));
    }
    for r in state.history {
        s.push_str(&format!("[Step {}]\nanalysis: {}\n", r.turn, r.step.analysis));
        for c in &r.calls {
            s.push_str(&format!(
                "- {} -> {}: {:?} {}\n",
                c.request.api, c.request.output_variable, c.status, c.message
            ));
        }
    }
    s.push_str(&format!("Turns used: {} of {}.", state.turn - 1, state.budget));
    s
}

impl Planner for LlmPlanner {
    fn formalize(&mut self, ctx: &QueryContext, feedback: Option<&str>) -> Result<FormalizeDocs, PlannerError> {
        let question = ctx.prompt_text();
        let reference = render(
            TemplateId::FormalizeReference,
            &[("examples", FORMALIZE_EXAMPLES.to_string()), ("question", question.clone())],
        )?;
        let objective = render(TemplateId::FormalizeObjective, &[("question", question)])?;
        Ok(FormalizeDocs {
            reference: self.ask(Role::Analyst, &with_feedback(reference, feedback), &ctx.images)?,
            objective: self.ask(Role::Analyst, &with_feedback(objective, feedback), &ctx.images)?,
        })
    }

    fn next_step(&mut self, state: &PlanState<'_>) -> Result<PlanStep, PlannerError> {
        let prompt = render(
            TemplateId::Orchestration,
            &[("api_documents", API_DOCUMENTS.to_string()), ("history", history(state))],
        )?;
        let reply = self.ask(Role::Orchestrator, &prompt, &state.ctx.images)?;
        let body = extract_fenced_block(&reply, FenceTag::Json).map_err(|e| PlannerError::Malformed(e.to_string()))?;
        serde_json::from_str(&body).map_err(|e| PlannerError::Malformed(format!("plan step: {e}")))
    }

    fn write_program(&mut self, req: &CodeRequest) -> Result<String, PlannerError> {
        let subs = [
            ("question", req.question.clone()),
            ("formalization", req.constraint.reference.render()),
            ("objective", format!("{}\n{}", req.constraint.objective.statement, req.request)),
            ("var_docs", req.var_docs()),
            ("knowledge", req.knowledge.clone()),
            ("func_signature", req.func_signature()),
        ];
        let prompt = format!(
            "{}\n\n{}",
            render(TemplateId::Coder, &subs)?,
            render(TemplateId::CoderGeocalc, &subs)?
        );
        let reply = self.ask(Role::Coder, &prompt, &[])?;
        extract_fenced_block(&reply, FenceTag::Program).map_err(|e| PlannerError::Malformed(e.to_string()))
    }
}
