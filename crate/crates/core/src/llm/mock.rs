use std::collections::HashMap;

use super::client::{GenerationParams, LlmClient, LlmError};
use super::prompt::{parse_prompt, PromptKind};
use crate::retrieval::rendered_terminal;

/// Reply of the mock when no listed path ends in a gold answer.
pub const MOCK_UNKNOWN: &str = "unknown";

/// Offline stand-in for an LLM that knows the gold answers.
///
/// For an answer prompt it replies with the terminal entity of the
/// highest-ranked path ending in a gold answer, else `unknown`. For a
/// feedback prompt it echoes that path, else `NO`. Questions are looked up
/// by their trimmed text.
#[derive(Debug, Clone, Default)]
pub struct MockOracle {
    gold: HashMap<String, Vec<String>>,
}

impl MockOracle {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, question: &str, answers: &[String]) {
        self.gold
            .entry(question.trim().to_string())
            .or_default()
            .extend(answers.iter().map(|a| a.trim().to_string()));
    }

    pub fn with_gold(mut self, question: &str, answers: &[&str]) -> Self {
        let answers: Vec<String> = answers.iter().map(|a| a.to_string()).collect();
        self.insert(question, &answers);
        self
    }

    fn reply(&self, prompt: &str) -> String {
        let Some(parsed) = parse_prompt(prompt) else {
            return MOCK_UNKNOWN.to_string();
        };
        let gold = self
            .gold
            .get(parsed.question.trim())
            .map(Vec::as_slice)
            .unwrap_or_default();
        let hit = parsed.paths.iter().find_map(|p| {
            rendered_terminal(p)
                .filter(|t| gold.iter().any(|g| g == t))
                .map(|t| (p.as_str(), t))
        });
        match (parsed.kind, hit) {
            (PromptKind::Answer, Some((_, terminal))) => terminal.to_string(),
            (PromptKind::Answer, None) => MOCK_UNKNOWN.to_string(),
            (PromptKind::Feedback, Some((path, _))) => path.to_string(),
            (PromptKind::Feedback, None) => "NO".to_string(),
        }
    }
}

impl LlmClient for MockOracle {
    fn complete(&self, prompt: &str, _params: &GenerationParams) -> Result<String, LlmError> {
        Ok(self.reply(prompt))
    }
}
