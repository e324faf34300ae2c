//! Retrieval-level governance metrics.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::canonicalize::Schema;
use crate::governance::values_match;
use crate::model::{NuggetKey, ValidityInterval};

use super::corpus::{EvalQuery, GoldNugget};

/// One retrieved item as the metrics see it: key (if the predicate is
/// mapped), normalized value and the interval the system assigned.
#[derive(Debug, Clone, PartialEq)]
pub struct RetrievedNugget {
    pub key: Option<NuggetKey>,
    pub value: String,
    pub interval: ValidityInterval,
}

#[derive(Debug, Clone, Default)]
pub struct QueryRun {
    pub retrieved: Vec<RetrievedNugget>,
    pub context: String,
    pub latency: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub queries: usize,
    pub nugget_recall_at_k: f64,
    pub temporal_correctness: f64,
    /// Set when no retrieved nugget matched gold; TC is then reported as 1.0.
    pub temporal_correctness_undefined: bool,
    pub conflict_rate: f64,
    pub governance_score: f64,
    pub median_context_tokens: f64,
    pub latency_p50_ms: f64,
    pub latency_p95_ms: f64,
}

fn matches(r: &RetrievedNugget, key: &NuggetKey, value: &str) -> bool {
    r.key.as_ref() == Some(key) && values_match(&r.value, value)
}

/// True when two retrieved nuggets on one functional key disagree over
/// overlapping intervals.
pub fn has_conflict(retrieved: &[RetrievedNugget], schema: &Schema) -> bool {
    for (i, a) in retrieved.iter().enumerate() {
        let Some(ka) = &a.key else { continue };
        if !schema.cardinality(&ka.predicate).is_some_and(|c| c.is_functional()) {
            continue;
        }
        for b in &retrieved[i + 1..] {
            if b.key.as_ref() == Some(ka) && !values_match(&a.value, &b.value) && a.interval.overlaps(&b.interval) {
                return true;
            }
        }
    }
    false
}

pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Nearest-rank percentile of durations, in milliseconds.
pub fn percentile_ms(latencies: &[Duration], p: f64) -> f64 {
    if latencies.is_empty() {
        return 0.0;
    }
    let mut ms: Vec<f64> = latencies.iter().map(|d| d.as_secs_f64() * 1e3).collect();
    ms.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * ms.len() as f64).ceil().max(1.0) as usize;
    ms[rank.min(ms.len()) - 1]
}

pub fn context_tokens(context: &str) -> usize {
    context.split_whitespace().count()
}

pub fn compute_metrics(runs: &[QueryRun], queries: &[EvalQuery], gold: &[GoldNugget], schema: &Schema) -> MetricsReport {
    assert_eq!(runs.len(), queries.len(), "runs must align with queries");
    let mut recalled = 0usize;
    let (mut matched, mut correct) = (0usize, 0usize);
    let mut conflicted = 0usize;
    let mut tokens = Vec::with_capacity(runs.len());
    for (run, q) in runs.iter().zip(queries) {
        let g = &gold[q.gold];
        if run.retrieved.iter().any(|r| matches(r, &g.key, &g.value)) {
            recalled += 1;
        }
        for r in run.retrieved.iter().filter(|r| r.key.as_ref() == Some(&q.key)) {
            let segments: Vec<&GoldNugget> = gold.iter().filter(|s| s.key == q.key && values_match(&r.value, &s.value)).collect();
            if segments.is_empty() {
                continue;
            }
            matched += 1;
            if segments.iter().any(|s| s.validity.contains(q.at)) {
                correct += 1;
            }
        }
        if has_conflict(&run.retrieved, schema) {
            conflicted += 1;
        }
        tokens.push(context_tokens(&run.context) as f64);
    }
    let n = queries.len().max(1) as f64;
    let undefined = matched == 0;
    let tc = if undefined { 1.0 } else { correct as f64 / matched as f64 };
    let cr = conflicted as f64 / n;
    let latencies: Vec<Duration> = runs.iter().map(|r| r.latency).collect();
    MetricsReport {
        queries: queries.len(),
        nugget_recall_at_k: recalled as f64 / n,
        temporal_correctness: tc,
        temporal_correctness_undefined: undefined,
        conflict_rate: cr,
        governance_score: tc - cr,
        median_context_tokens: median(&mut tokens),
        latency_p50_ms: percentile_ms(&latencies, 50.0),
        latency_p95_ms: percentile_ms(&latencies, 95.0),
    }
}
