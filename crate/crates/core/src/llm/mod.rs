//! Reasoning step: prompt assembly, chat-completion clients, and reply parsing.

mod client;
mod mock;
mod prompt;

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::classifier::{label_query, ComplexityLabel};
use crate::retrieval::{rendered_hops, SEPARATOR};

pub use client::{
    parse_chat_reply, ChatClient, ChatMessage, ChatRequest, GenerationParams, LlmClient, LlmError,
    RetryPolicy, Transport, UreqTransport,
};
pub use mock::{MockOracle, MOCK_UNKNOWN};
pub use prompt::{
    parse_prompt, render_prompt, ParsedPrompt, PromptKind, PromptTemplate, ANSWER_TEMPLATE,
    FEEDBACK_TEMPLATE, NO_PATHS,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub raw_text: String,
    /// Comma/semicolon separated items of the first non-empty reply line.
    pub extracted_answers: Vec<String>,
    /// For feedback prompts: the echoed path text, or `NO`.
    pub feedback_path: Option<String>,
}

fn leading_line(text: &str) -> &str {
    text.lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or("")
}

impl LlmResponse {
    pub fn answer(raw_text: String) -> Self {
        let extracted_answers = leading_line(&raw_text)
            .split([',', ';'])
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::to_string)
            .collect();
        Self {
            raw_text,
            extracted_answers,
            feedback_path: None,
        }
    }

    pub fn feedback(raw_text: String) -> Self {
        let feedback_path = extract_feedback_path(&raw_text);
        Self {
            raw_text,
            extracted_answers: Vec::new(),
            feedback_path,
        }
    }
}

fn extract_feedback_path(raw: &str) -> Option<String> {
    let first = leading_line(raw);
    if first
        .trim_end_matches(['.', '!'])
        .eq_ignore_ascii_case("no")
    {
        return Some("NO".to_string());
    }
    raw.lines()
        .map(str::trim)
        .find(|l| l.contains(SEPARATOR.trim()))
        .map(|l| {
            // tolerate an echoed "Correct reasoning path:" lead-in
            let l = match l.split_once(':') {
                Some((head, tail)) if head.to_ascii_lowercase().contains("path") => tail.trim(),
                _ => l,
            };
            l.to_string()
        })
}

/// Sends `prompt` and wraps the reply according to the prompt kind.
pub fn generate(
    client: &dyn LlmClient,
    prompt: &str,
    kind: PromptKind,
    params: &GenerationParams,
) -> Result<LlmResponse, LlmError> {
    let raw = client.complete(prompt, params)?;
    Ok(match kind {
        PromptKind::Answer => LlmResponse::answer(raw),
        PromptKind::Feedback => LlmResponse::feedback(raw),
    })
}

/// Refined label from the path the LLM picked: hop count = relation count.
/// `None` for a `NO` reply or anything that does not parse as a path.
pub fn parse_feedback(response: &LlmResponse, delta: usize) -> Option<ComplexityLabel> {
    let path = response.feedback_path.as_deref()?;
    if path == "NO" {
        return None;
    }
    rendered_hops(path).map(|hops| label_query(hops, delta))
}

/// Wraps a client and counts calls, so stages can report how many LLM
/// requests they issued.
pub struct CountingClient<'a> {
    inner: &'a dyn LlmClient,
    calls: AtomicUsize,
}

impl<'a> CountingClient<'a> {
    pub fn new(inner: &'a dyn LlmClient) -> Self {
        Self {
            inner,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl LlmClient for CountingClient<'_> {
    fn complete(&self, prompt: &str, params: &GenerationParams) -> Result<String, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(prompt, params)
    }
}
