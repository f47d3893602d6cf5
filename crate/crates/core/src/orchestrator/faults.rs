//! Planner-side fault injection.

use serde::{Deserialize, Serialize};

use super::planner::{CodeRequest, FormalizeDocs, PlanState, PlanStep, Planner, PlannerError};
use super::QueryContext;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerFault {
    /// Formalization comes back as prose without the JSON block.
    BreakFormalizer,
    /// Generated programs lose their `return` statement.
    BreakCoder,
}

pub struct FaultyPlanner {
    inner: Box<dyn Planner>,
    fault: PlannerFault,
}

impl FaultyPlanner {
    pub fn new(inner: Box<dyn Planner>, fault: PlannerFault) -> Self {
        FaultyPlanner { inner, fault }
    }
}

fn prose(doc: &str) -> String {
    let text: String = doc.chars().filter(|c| !matches!(c, '{' | '}' | '`')).collect();
    format!("I think the answer depends on the layout. {}", text.trim())
}

impl Planner for FaultyPlanner {
    fn formalize(&mut self, ctx: &QueryContext, feedback: Option<&str>) -> Result<FormalizeDocs, PlannerError> {
        let docs = self.inner.formalize(ctx, feedback)?;
        Ok(match self.fault {
            PlannerFault::BreakFormalizer => FormalizeDocs {
                reference: prose(&docs.reference),
                objective: prose(&docs.objective),
            },
            PlannerFault::BreakCoder => docs,
        })
    }

    fn next_step(&mut self, state: &PlanState<'_>) -> Result<PlanStep, PlannerError> {
        self.inner.next_step(state)
    }

    fn write_program(&mut self, req: &CodeRequest) -> Result<String, PlannerError> {
        let program = self.inner.write_program(req)?;
        Ok(match self.fault {
            PlannerFault::BreakCoder => program
                .lines()
                .filter(|l| !l.trim_start().starts_with("return"))
                .collect::<Vec<_>>()
                .join("\n"),
            PlannerFault::BreakFormalizer => program,
        })
    }
}
