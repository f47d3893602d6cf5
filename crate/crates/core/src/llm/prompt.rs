//! Shipped prompt templates and placeholder substitution.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    FormalizeReference,
    FormalizeObjective,
    Orchestration,
    Coder,
    /// Appended to the coder prompt when programs run in geocalc.
    CoderGeocalc,
}

/// Every placeholder any template may contain.
pub const PLACEHOLDERS: [&str; 9] = [
    "question",
    "examples",
    "api_documents",
    "history",
    "var_docs",
    "knowledge",
    "objective",
    "formalization",
    "func_signature",
];

impl TemplateId {
    pub const ALL: [TemplateId; 5] = [
        TemplateId::FormalizeReference,
        TemplateId::FormalizeObjective,
        TemplateId::Orchestration,
        TemplateId::Coder,
        TemplateId::CoderGeocalc,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TemplateId::FormalizeReference => "formalize_reference",
            TemplateId::FormalizeObjective => "formalize_objective",
            TemplateId::Orchestration => "orchestration",
            TemplateId::Coder => "coder",
            TemplateId::CoderGeocalc => "coder_geocalc",
        }
    }

    pub fn text(&self) -> &'static str {
        match self {
            TemplateId::FormalizeReference => include_str!("../../assets/prompts/formalize_reference.txt"),
            TemplateId::FormalizeObjective => include_str!("../../assets/prompts/formalize_objective.txt"),
            TemplateId::Orchestration => include_str!("../../assets/prompts/orchestration.txt"),
            TemplateId::Coder => include_str!("../../assets/prompts/coder.txt"),
            TemplateId::CoderGeocalc => include_str!("../../assets/prompts/coder_geocalc.txt"),
        }
    }

    /// Placeholders present in the template, in order of first use.
    pub fn placeholders(&self) -> Vec<&'static str> {
        let text = self.text();
        let mut found: Vec<(usize, &'static str)> = PLACEHOLDERS
            .iter()
            .filter_map(|p| text.find(&format!("{{{p}}}")).map(|i| (i, *p)))
            .collect();
        found.sort();
        found.into_iter().map(|(_, p)| p).collect()
    }

    /// `[SECTION]` header lines, used for fidelity checks.
    pub fn section_headers(&self) -> Vec<&'static str> {
        self.text()
            .lines()
            .map(str::trim)
            .filter(|l| l.starts_with('[') && l.ends_with(']') && !l.contains('"'))
            .collect()
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("template `{template}` needs placeholder `{{{placeholder}}}`")]
pub struct MissingPlaceholder {
    pub template: TemplateId,
    pub placeholder: &'static str,
}

/// In-context examples for the reference-frame formalizer.
pub const FORMALIZE_EXAMPLES: &str = include_str!("../../assets/prompts/formalize_examples.txt");

/// Replaces each known `{name}`. Only known names are touched, so literal
/// JSON braces in the templates survive. Extra substitutions are ignored.
pub fn render_prompt(id: TemplateId, subs: &BTreeMap<&str, String>) -> Result<String, MissingPlaceholder> {
    let mut out = id.text().to_string();
    for p in id.placeholders() {
        let value = subs.get(p).ok_or(MissingPlaceholder {
            template: id,
            placeholder: p,
        })?;
        out = out.replace(&format!("{{{p}}}"), value);
    }
    Ok(out)
}
