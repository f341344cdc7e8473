//! Line-delimited JSON records for evaluation and feedback files.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::classifier::Complexity;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub question: String,
    pub question_entities: Vec<String>,
    #[serde(default)]
    pub answers: Vec<String>,
}

/// One refined label for classifier adaptation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub question: String,
    pub label: Complexity,
}

fn read_jsonl<T, R>(source: R) -> Result<Vec<(usize, T)>>
where
    T: for<'de> Deserialize<'de>,
    R: BufRead,
{
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| Error::Dataset {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push((i + 1, value));
    }
    Ok(out)
}

/// Reads records, enforcing unique ids and non-empty questions; with
/// `require_answers`, every record must carry at least one gold answer.
pub fn load_dataset<R: BufRead>(source: R, require_answers: bool) -> Result<Vec<DatasetRecord>> {
    let mut ids = HashSet::new();
    let mut records = Vec::new();
    for (line, record) in read_jsonl::<DatasetRecord, _>(source)? {
        let fail = |message: String| Error::Dataset { line, message };
        if record.question.trim().is_empty() {
            return Err(fail("empty question".into()));
        }
        if !ids.insert(record.id.clone()) {
            return Err(fail(format!("duplicate id `{}`", record.id)));
        }
        if require_answers && record.answers.is_empty() {
            return Err(fail(format!("record `{}` has no answers", record.id)));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn load_feedback<R: BufRead>(source: R) -> Result<Vec<FeedbackRecord>> {
    Ok(read_jsonl(source)?.into_iter().map(|(_, r)| r).collect())
}

pub fn write_jsonl<T: Serialize, W: Write>(items: &[T], mut out: W) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
