//! Chat-completion gateway used by the LLM planner.

mod client;
mod extract;
mod profile;
mod prompt;

pub use client::{
    complete, Cassette, CassetteEntry, CassetteError, CassetteTransport, ChatExchange, ChatMessage, Completion,
    ContentPart, HttpTransport, LlmClient, LlmConfig, LlmError, MockTransport, RetryPolicy, Transport,
    TransportError,
};
pub use extract::{extract_fenced_block, ExtractError, FenceTag};
pub use profile::{Role, RoleProfile, MAX_TOKENS};
pub use prompt::{render_prompt, MissingPlaceholder, TemplateId, FORMALIZE_EXAMPLES, PLACEHOLDERS};
