//! Zero-shot prompt templates and their inverse.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ranking::RankedPaths;

const PATHS_SLOT: &str = "{paths}";
const QUESTION_SLOT: &str = "{question}";

/// Rendered in place of the path list when retrieval found nothing.
pub const NO_PATHS: &str = "None";

pub const ANSWER_TEMPLATE: &str = "You are an expert reasoner with a deep understanding of logical connections and relationships. Your task is to analyze the given reasoning paths and provide clear and accurate answers to the questions based on these paths. Based on the reasoning paths, please answer the given question.\n\nReasoning Paths: {paths}\n\nQuestion: {question}";

pub const FEEDBACK_TEMPLATE: &str = "You are an expert reasoner with a deep understanding of logical connections and relationships. Your task is to analyze the given reasoning paths and provide accurate reasoning path to the questions based on these paths. Based on the reasoning paths, please extract the correct reasoning path. If NO correct reasoning path, please just reply NO.\n\nReasoning Paths: {paths}\n\nQuestion: {question}\n\nCorrect reasoning path:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptKind {
    Answer,
    Feedback,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub kind: PromptKind,
    pub body: String,
}

impl PromptTemplate {
    pub fn builtin(kind: PromptKind) -> Self {
        let body = match kind {
            PromptKind::Answer => ANSWER_TEMPLATE,
            PromptKind::Feedback => FEEDBACK_TEMPLATE,
        };
        Self {
            kind,
            body: body.to_string(),
        }
    }

    /// Custom template; must contain `{paths}` then `{question}`, once each.
    pub fn new(kind: PromptKind, body: impl Into<String>) -> Result<Self> {
        let t = Self {
            kind,
            body: body.into(),
        };
        t.pieces()?;
        Ok(t)
    }

    /// `(prefix, between, suffix)` around the two slots.
    fn pieces(&self) -> Result<(&str, &str, &str)> {
        let body = self.body.as_str();
        if body.matches(PATHS_SLOT).count() != 1 || body.matches(QUESTION_SLOT).count() != 1 {
            return Err(Error::Config(
                "prompt template needs exactly one {paths} and one {question} slot".into(),
            ));
        }
        let (prefix, rest) = body.split_once(PATHS_SLOT).expect("slot counted above");
        let (between, suffix) = rest.split_once(QUESTION_SLOT).ok_or_else(|| {
            Error::Config("prompt template must place {paths} before {question}".into())
        })?;
        Ok((prefix, between, suffix))
    }

    /// Substitutes both slots in one pass, so slot-like text inside the
    /// question or the paths is left alone.
    pub fn fill(&self, question: &str, paths: &[&str]) -> String {
        let (prefix, between, suffix) = self
            .pieces()
            .expect("templates are validated on construction");
        let block = if paths.is_empty() {
            NO_PATHS.to_string()
        } else {
            paths.join("\n")
        };
        let mut out = String::with_capacity(self.body.len() + block.len() + question.len());
        out.push_str(prefix);
        out.push_str(&block);
        out.push_str(between);
        out.push_str(question);
        out.push_str(suffix);
        out
    }

    /// Recovers `(paths, question)` from a prompt made by [`PromptTemplate::fill`].
    pub fn parse(&self, prompt: &str) -> Option<(Vec<String>, String)> {
        let (prefix, between, suffix) = self.pieces().ok()?;
        let rest = prompt.strip_prefix(prefix)?.strip_suffix(suffix)?;
        let (block, question) = rest.split_once(between)?;
        let paths = if block == NO_PATHS {
            Vec::new()
        } else {
            block.split('\n').map(str::to_string).collect()
        };
        Some((paths, question.to_string()))
    }
}

/// Builds the enriched prompt: ranked paths one per line, best first.
pub fn render_prompt(question: &str, ranked: &RankedPaths, kind: PromptKind) -> String {
    let paths: Vec<&str> = ranked.texts().collect();
    PromptTemplate::builtin(kind).fill(question.trim(), &paths)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedPrompt {
    pub kind: PromptKind,
    pub paths: Vec<String>,
    pub question: String,
}

/// Inverse of [`render_prompt`] for either built-in template.
pub fn parse_prompt(prompt: &str) -> Option<ParsedPrompt> {
    // the feedback template extends the answer template, so try it first
    [PromptKind::Feedback, PromptKind::Answer]
        .into_iter()
        .find_map(|kind| {
            PromptTemplate::builtin(kind)
                .parse(prompt)
                .map(|(paths, question)| ParsedPrompt {
                    kind,
                    paths,
                    question,
                })
        })
}
