use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::run::{check_engine, run_query, Engine, QueryTrace, RouteMode};
use crate::classifier::{compute_min_hop, feedback_budget, ClassifierModel, Complexity};
use crate::dataset::DatasetRecord;
use crate::error::{Error, Result};
use crate::llm::LlmResponse;
use crate::par;
use crate::text::normalize;

/// True iff a normalized gold answer occurs, on word boundaries, in the
/// normalized first non-empty line of the reply.
pub fn hits_at_1(response: &LlmResponse, gold: &[String]) -> bool {
    let lead = response
        .raw_text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or("");
    let span = format!(" {} ", normalize(lead));
    gold.iter().any(|g| {
        let g = normalize(g);
        !g.is_empty() && span.contains(&format!(" {g} "))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HopBucket {
    pub count: usize,
    pub hits: usize,
    pub recalled: usize,
    pub hits_at_1: f64,
    pub recall_at_u: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub total: usize,
    pub hits: usize,
    pub hits_at_1: f64,
    /// Records with a gold-terminating path among the top `u`.
    pub recalled: usize,
    pub recall_at_u: f64,
    /// Keyed by the gold answer's minimum hop count, `unreachable` or
    /// `unlabeled`.
    pub per_hop: BTreeMap<String, HopBucket>,
    pub routed_simple: usize,
    pub routed_complex: usize,
    pub forced_route: Option<Complexity>,
    pub truncations: usize,
    pub empty_seed: usize,
    pub failed_queries: usize,
    pub llm_errors: usize,
    pub retrieval_llm_calls: usize,
    pub generation_llm_calls: usize,
    pub fast_adapt_calls: usize,
    pub feedback_labels: usize,
    pub model_version: Option<u64>,
    /// Not serialized, so reports of identical runs compare equal byte for byte.
    #[serde(skip)]
    pub wall_clock: Duration,
}

fn rate(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl EvalReport {
    pub fn from_traces(traces: &[QueryTrace]) -> Self {
        let mut r = EvalReport {
            total: traces.len(),
            ..Self::default()
        };
        for t in traces {
            let hit = t.hit == Some(true);
            let recalled = t.gold_in_ranked == Some(true);
            r.hits += usize::from(hit);
            r.recalled += usize::from(recalled);
            match t.route {
                Some(Complexity::Simple) => r.routed_simple += 1,
                Some(Complexity::Complex) => r.routed_complex += 1,
                None => {}
            }
            r.truncations += usize::from(t.truncated);
            r.empty_seed += usize::from(t.empty_seed);
            r.failed_queries += usize::from(!t.errors.is_empty());
            r.llm_errors += t.llm_errors();
            r.retrieval_llm_calls += t.retrieval_llm_calls;
            r.generation_llm_calls += t.generation_llm_calls;
            r.feedback_labels += usize::from(t.feedback_label.is_some());

            let key = match (t.gold_min_hop, t.seeds_found) {
                (Some(h), _) => h.to_string(),
                (None, 0) => "unlabeled".to_string(),
                (None, _) => "unreachable".to_string(),
            };
            let b = r.per_hop.entry(key).or_default();
            b.count += 1;
            b.hits += usize::from(hit);
            b.recalled += usize::from(recalled);
        }
        for b in r.per_hop.values_mut() {
            b.hits_at_1 = rate(b.hits, b.count);
            b.recall_at_u = rate(b.recalled, b.count);
        }
        r.hits_at_1 = rate(r.hits, r.total);
        r.recall_at_u = rate(r.recalled, r.total);
        r
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is plain data")
    }

    pub fn render_table(&self) -> String {
        let mut s = String::new();
        let row = |s: &mut String, k: &str, v: String| {
            let _ = writeln!(s, "{k:<24}{v:>12}");
        };
        row(&mut s, "queries", self.total.to_string());
        row(&mut s, "hits@1", format!("{:.4}", self.hits_at_1));
        row(&mut s, "recall@u", format!("{:.4}", self.recall_at_u));
        row(&mut s, "routed simple", self.routed_simple.to_string());
        row(&mut s, "routed complex", self.routed_complex.to_string());
        if let Some(r) = self.forced_route {
            row(&mut s, "forced route", r.to_string());
        }
        row(&mut s, "truncations", self.truncations.to_string());
        row(&mut s, "empty seed", self.empty_seed.to_string());
        row(&mut s, "failed queries", self.failed_queries.to_string());
        row(&mut s, "llm errors", self.llm_errors.to_string());
        row(
            &mut s,
            "retrieval llm calls",
            self.retrieval_llm_calls.to_string(),
        );
        row(
            &mut s,
            "generation llm calls",
            self.generation_llm_calls.to_string(),
        );
        row(
            &mut s,
            "fast_adapt calls",
            self.fast_adapt_calls.to_string(),
        );
        if let Some(v) = self.model_version {
            row(&mut s, "model version", v.to_string());
        }
        row(
            &mut s,
            "wall clock (s)",
            format!("{:.2}", self.wall_clock.as_secs_f64()),
        );
        let _ = writeln!(
            s,
            "\n{:<14}{:>8}{:>10}{:>10}",
            "min hop", "count", "hits@1", "recall"
        );
        for (k, b) in &self.per_hop {
            let _ = writeln!(
                s,
                "{k:<14}{:>8}{:>10.4}{:>10.4}",
                b.count, b.hits_at_1, b.recall_at_u
            );
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: EvalReport,
    /// In dataset order.
    pub traces: Vec<QueryTrace>,
    /// The classifier after any feedback adaptation.
    pub model: Option<ClassifierModel>,
}

fn annotate_min_hop(engine: &Engine, record: &DatasetRecord, trace: &mut QueryTrace) {
    if record.answers.is_empty() {
        return;
    }
    trace.gold_min_hop = compute_min_hop(engine.graph, &record.question_entities, &record.answers)
        .ok()
        .flatten();
}

/// Runs every record through the engine and aggregates a report.
///
/// With `feedback` enabled in the config, the first `⌈ratio·N⌉` records run
/// one at a time, each followed by a `fast_adapt` call on its refined label;
/// the rest run on `workers` threads against the adapted model.
pub fn evaluate(
    engine: &Engine,
    model: Option<ClassifierModel>,
    records: &[DatasetRecord],
    mode: RouteMode,
) -> Result<Evaluation> {
    check_engine(engine)?;
    if mode == RouteMode::Auto && model.is_none() {
        return Err(Error::Config(
            "automatic routing needs a classifier model".into(),
        ));
    }
    let start = Instant::now();
    let cfg = engine.config;
    let adapt = cfg.adapt_params();
    let budget = if cfg.feedback {
        feedback_budget(cfg.ratio, records.len())
    } else {
        0
    };

    let mut model = model;
    let mut fast_adapt_calls = 0;
    let mut traces = Vec::with_capacity(records.len());
    for record in &records[..budget] {
        let out = run_query(engine, model.as_ref(), record, mode, true);
        let mut trace = out.trace;
        annotate_min_hop(engine, record, &mut trace);
        traces.push(trace);
        if let Some(current) = &model {
            let fb: Vec<(String, Complexity)> = out
                .feedback
                .map(|l| (record.question.clone(), l.value))
                .into_iter()
                .collect();
            model = Some(current.fast_adapt(&fb, &adapt)?);
            fast_adapt_calls += 1;
        }
    }

    let frozen = model.as_ref();
    traces.extend(par::map(&records[budget..], cfg.workers, |record| {
        let mut trace = run_query(engine, frozen, record, mode, false).trace;
        annotate_min_hop(engine, record, &mut trace);
        trace
    }));

    let mut report = EvalReport::from_traces(&traces);
    report.forced_route = mode.forced();
    report.fast_adapt_calls = fast_adapt_calls;
    report.model_version = model.as_ref().map(|m| m.version);
    report.wall_clock = start.elapsed();
    Ok(Evaluation {
        report,
        traces,
        model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reply(s: &str) -> LlmResponse {
        LlmResponse::answer(s.to_string())
    }

    fn gold(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn containment_rule() {
        assert!(hits_at_1(&reply("The answer is Paris"), &gold(&["Paris"])));
        assert!(!hits_at_1(&reply("unknown"), &gold(&["Paris"])));
        assert!(hits_at_1(&reply("It is B."), &gold(&["A", "B"])));
    }

    #[test]
    fn only_leading_line_and_whole_words_count() {
        assert!(!hits_at_1(&reply("unknown\nParis"), &gold(&["Paris"])));
        assert!(!hits_at_1(&reply("Parisian"), &gold(&["Paris"])));
        assert!(hits_at_1(
            &reply("  \n new  YORK city"),
            &gold(&["New York"])
        ));
        assert!(!hits_at_1(&reply("anything"), &gold(&["  "])));
    }

    #[test]
    fn empty_report_rates_are_zero() {
        let r = EvalReport::from_traces(&[]);
        assert_eq!((r.hits_at_1, r.recall_at_u, r.total), (0.0, 0.0, 0));
    }
}
