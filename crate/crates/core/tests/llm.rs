mod common;

use std::collections::BTreeMap;
use std::sync::Arc;

use common::cassette;
use gca_core::llm::{
    complete, extract_fenced_block, render_prompt, Cassette, CassetteTransport, ChatMessage, FenceTag, LlmClient,
    LlmConfig, LlmError, MockTransport, RetryPolicy, Role, TemplateId, TransportError, PLACEHOLDERS,
};
use gca_core::orchestrator::{run_query, AgentConfig, PlannerKind};
use proptest::prelude::*;

/// Section headers of each template as they appear in the source prompts.
fn source_headers(id: TemplateId) -> &'static [&'static str] {
    match id {
        TemplateId::FormalizeReference => &["[CORE MISSION]", "[OUTPUT FORMAT]", "[FORMALIZATION]", "[EXAMPLES]", "[QUESTION]"],
        TemplateId::FormalizeObjective => &["[CORE MISSION]", "[OUTPUT FORMAT]", "[OBJECTIVE]", "[QUESTION]"],
        TemplateId::Orchestration => &["[CORE MISSION]", "[AVAILABLE APIS]", "[A TYPICAL WORKFLOW]", "[OUTPUT FORMAT]", "[HISTORY]"],
        TemplateId::Coder => &[
            "[CORE MISSION]",
            "[User's Question]",
            "[Reference Frame]",
            "[Objective]",
            "[Documentation of Available Variables]",
            "[Additional Knowledge]",
            "[Available Libraries]",
            "[Critical Rules and Output Format]",
        ],
        TemplateId::CoderGeocalc => &["[Execution Environment]"],
    }
}

fn all_subs() -> BTreeMap<&'static str, String> {
    PLACEHOLDERS.iter().map(|p| (*p, format!("<{p} value>"))).collect()
}

#[test]
fn rendered_templates_keep_every_section_header() {
    for id in TemplateId::ALL {
        let text = render_prompt(id, &all_subs()).unwrap();
        for h in source_headers(id) {
            assert!(text.contains(h), "{id} lost {h}");
        }
        for h in id.section_headers() {
            assert!(text.contains(h), "{id} lost {h}");
        }
        for p in id.placeholders() {
            assert!(!text.contains(&format!("{{{p}}}")), "{id} still has {{{p}}}");
            assert!(text.contains(&format!("<{p} value>")));
        }
    }
}

#[test]
fn formalize_template_with_question() {
    let mut subs = BTreeMap::new();
    subs.insert("question", "Is the chair west of the toaster?".to_string());
    subs.insert("examples", String::new());
    let text = render_prompt(TemplateId::FormalizeReference, &subs).unwrap();
    assert!(text.starts_with("[CORE MISSION]"));
    assert!(text.contains("Is the chair west of the toaster?"));
    subs.remove("question");
    let err = render_prompt(TemplateId::FormalizeReference, &subs).unwrap_err();
    assert_eq!(err.placeholder, "question");
}

#[test]
fn coder_prompt_carries_retrieved_knowledge() {
    let mock = Arc::new(MockTransport::new(|ex| Ok(cassette::authored_reply(ex))));
    let client = LlmClient::new(mock.clone(), LlmConfig::default());
    let cfg = AgentConfig {
        planner: PlannerKind::Llm(client),
        ..AgentConfig::default()
    };
    let t = run_query(&cassette::context(), &cfg).unwrap();
    assert!(t.succeeded(), "{:?}", t.failure);
    let coder: Vec<_> = mock.exchanges().into_iter().filter(|e| e.profile.role == Role::Coder).collect();
    assert_eq!(coder.len(), 1);
    let prompt = coder[0].messages[0].text();
    let knowledge = prompt.split("[Additional Knowledge]").nth(1).expect("knowledge section");
    // the pose came from predict_obj_pose, so its convention note must be there
    assert!(knowledge.contains("T_obj2world"), "{knowledge}");
    for ex in mock.exchanges() {
        let p = ex.profile;
        match p.role {
            Role::Coder => assert_eq!((p.temperature, p.max_tokens), (0.0, 32768)),
            _ => assert_eq!((p.temperature, p.top_p, p.max_tokens), (0.6, 0.95, 32768)),
        }
    }
}

#[test]
fn transient_failures_are_retried() {
    let client = LlmClient::new(Arc::new(MockTransport::echo()), LlmConfig::default());
    let ex = client.exchange(Role::Analyst, vec![ChatMessage::user("ping")]);
    assert_eq!(complete(&MockTransport::echo(), &ex).unwrap().text, "ping");

    let mut ex = ex;
    ex.retry = RetryPolicy::no_delay();
    let flaky = MockTransport::scripted(vec![
        Err(TransportError::Transient("503".into())),
        Err(TransportError::Transient("503".into())),
        Ok("pong".into()),
    ]);
    let c = complete(&flaky, &ex).unwrap();
    assert_eq!(c.text, "pong");
    assert_eq!(c.retries, 2);
    assert_eq!(flaky.exchanges().len(), 3);

    let dead = MockTransport::scripted((0..4).map(|_| Err(TransportError::Transient("503".into()))).collect());
    assert!(matches!(complete(&dead, &ex), Err(LlmError::Exhausted { .. })));
    assert_eq!(dead.exchanges().len(), 4);
}

#[test]
fn extraction_examples() {
    assert_eq!(extract_fenced_block("```json\n{\"a\": 1}\n```", FenceTag::Json).unwrap(), "{\"a\": 1}");
    assert_eq!(
        extract_fenced_block("```json\n{\"a\": 1}\n```\nand\n```json\n{\"b\": 2}\n```", FenceTag::Json).unwrap(),
        "{\"a\": 1}"
    );
    assert!(extract_fenced_block("no block at all", FenceTag::Json).is_err());
    assert_eq!(extract_fenced_block("answer: {\"a\": 1}", FenceTag::Json).unwrap(), "{\"a\": 1}");
}

proptest! {
    #[test]
    fn extraction_is_idempotent(inner in "[a-z0-9 =:,\\n]{1,60}", prose in "[A-Za-z .]{0,30}") {
        let inner = inner.trim().to_string();
        prop_assume!(!inner.is_empty());
        let text = format!("{prose}\n```program\n{inner}\n```\n{prose}");
        let once = extract_fenced_block(&text, FenceTag::Program).unwrap();
        prop_assert_eq!(&once, &inner);
        let wrapped = format!("```program\n{once}\n```");
        prop_assert_eq!(extract_fenced_block(&wrapped, FenceTag::Program).unwrap(), once);
    }
}

#[test]
fn cassette_replays_the_object_frame_case_offline() {
    let tape = Cassette::load(&cassette::fixture_path()).expect("fixture present");
    let client = LlmClient::new(Arc::new(CassetteTransport::replay(tape)), LlmConfig::default());
    let cfg = AgentConfig {
        planner: PlannerKind::Llm(client),
        ..AgentConfig::default()
    };
    let ctx = cassette::context();
    let t = run_query(&ctx, &cfg).unwrap();
    assert!(t.succeeded(), "{:?}", t.failure);
    assert_eq!(t.turns, 5);
    let answer = t.answer.unwrap();
    assert_eq!(answer.text.split_once(". ").unwrap().1, cassette::expected_option());
}

/// Rewrites the fixture from the authored replies:
/// `cargo test --test llm -- --ignored regenerate`.
#[test]
#[ignore]
fn regenerate_object_frame_cassette() {
    let recorder = Arc::new(CassetteTransport::record(Arc::new(MockTransport::new(|ex| Ok(cassette::authored_reply(ex))))));
    let cfg = AgentConfig {
        planner: PlannerKind::Llm(LlmClient::new(recorder.clone(), LlmConfig::default())),
        ..AgentConfig::default()
    };
    let t = run_query(&cassette::context(), &cfg).unwrap();
    assert!(t.succeeded(), "{:?}", t.failure);
    recorder.cassette().save(&cassette::fixture_path()).unwrap();
}
