//! Query pipeline: validity/view filtering, BM25 and dense candidate
//! retrieval, per-channel min-max normalization, weighted fusion, top-K
//! and context formatting.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dates::Day;
use crate::error::{Error, Result};
use crate::governance::values_match;
use crate::index::Index;
use crate::model::{NuggetId, NuggetKey, NuggetRecord, Rank, Status, View};

pub const DEFAULT_K: usize = 20;
pub const MIN_FETCH_DEPTH: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Weights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            alpha: 0.4,
            beta: 0.5,
            gamma: 0.1,
        }
    }
}

impl Weights {
    /// Weights scaled to sum to one.
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let sum = alpha + beta + gamma;
        if [alpha, beta, gamma].iter().any(|w| !w.is_finite() || *w < 0.0) || sum <= 0.0 {
            return Err(Error::InvalidInput(format!("fusion weights must be non-negative with a positive sum, got ({alpha}, {beta}, {gamma})")));
        }
        Ok(Weights {
            alpha: alpha / sum,
            beta: beta / sum,
            gamma: gamma / sum,
        })
    }

    /// Weights with the dense term removed and the rest rescaled.
    pub fn lexical_only(&self) -> Self {
        let s = self.alpha + self.gamma;
        if s <= 0.0 {
            return Weights {
                alpha: 1.0,
                beta: 0.0,
                gamma: 0.0,
            };
        }
        Weights {
            alpha: self.alpha / s,
            beta: 0.0,
            gamma: self.gamma / s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub text: String,
    pub at: Day,
    #[serde(default)]
    pub view: View,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub weights: Weights,
}

fn default_k() -> usize {
    DEFAULT_K
}

impl Query {
    pub fn new(text: impl Into<String>, at: Day) -> Self {
        Query {
            text: text.into(),
            at,
            view: View::Active,
            k: DEFAULT_K,
            weights: Weights::default(),
        }
    }

    pub fn view(mut self, view: View) -> Self {
        self.view = view;
        self
    }

    pub fn k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidInput("k must be at least 1".into()));
        }
        Weights::new(self.weights.alpha, self.weights.beta, self.weights.gamma).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredNugget {
    pub nugget_id: NuggetId,
    pub score: f64,
    pub s_lex: f64,
    pub s_dense: f64,
    pub s_meta: f64,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub query: Query,
    pub results: Vec<ScoredNugget>,
}

/// Pipeline switches used by ablations and baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipelineOptions {
    pub validity_filter: bool,
    pub use_dense: bool,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            validity_filter: true,
            use_dense: true,
        }
    }
}

pub fn fuse_scores(s_lex: f64, s_dense: f64, s_meta: f64, w: &Weights) -> f64 {
    w.alpha * s_lex + w.beta * s_dense + w.gamma * s_meta
}

pub fn rank_weight(rank: Rank) -> f64 {
    match rank {
        Rank::Preferred => 1.0,
        Rank::Normal => 0.8,
        Rank::Deprecated => 0.0,
    }
}

pub fn s_meta(record: &NuggetRecord) -> f64 {
    record.epistemic.confidence * rank_weight(record.epistemic.rank)
}

/// Min-max scaling to [0,1]; a degenerate channel maps to 0.
pub fn min_max(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi.partial_cmp(&lo) != Some(std::cmp::Ordering::Greater) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

pub fn fetch_depth(k: usize) -> usize {
    (4 * k).max(MIN_FETCH_DEPTH)
}

pub fn retrieve(index: &Index, query: &Query) -> Result<RetrievalResult> {
    retrieve_with(index, query, PipelineOptions::default())
}

pub fn retrieve_with(index: &Index, query: &Query, opts: PipelineOptions) -> Result<RetrievalResult> {
    query.validate()?;
    let weights = Weights::new(query.weights.alpha, query.weights.beta, query.weights.gamma)?;
    let empty = RetrievalResult {
        query: query.clone(),
        results: Vec::new(),
    };
    let cands = index.candidates(opts.validity_filter.then_some(query.at), query.view);
    if cands.is_empty() {
        return Ok(empty);
    }
    let depth = fetch_depth(query.k);
    let lex = index.bm25(&query.text, &cands, depth);
    let dense_on = opts.use_dense && index.dense_enabled();
    let dense = if dense_on { index.dense(&query.text, &cands, depth)? } else { Vec::new() };
    let weights = if dense_on { weights } else { weights.lexical_only() };

    // pool = union of both channels, in first-seen order
    let mut slot: HashMap<u32, usize> = HashMap::with_capacity(lex.len() + dense.len());
    let mut pool: Vec<u32> = Vec::with_capacity(lex.len() + dense.len());
    for &(o, _) in lex.iter().chain(dense.iter()) {
        slot.entry(o).or_insert_with(|| {
            pool.push(o);
            pool.len() - 1
        });
    }
    if pool.is_empty() {
        return Ok(empty);
    }
    let channel = |hits: &[(u32, f64)]| {
        let norm = min_max(&hits.iter().map(|h| h.1).collect::<Vec<_>>());
        let mut out = vec![0.0; pool.len()];
        for (h, n) in hits.iter().zip(norm) {
            out[slot[&h.0]] = n;
        }
        out
    };
    let lex_n = channel(&lex);
    let dense_n = channel(&dense);
    let meta_n = min_max(&pool.iter().map(|&o| s_meta(index.record_at(o))).collect::<Vec<_>>());

    let mut scored: Vec<ScoredNugget> = pool
        .iter()
        .enumerate()
        .map(|(i, &o)| {
            let r = index.record_at(o);
            ScoredNugget {
                nugget_id: r.id,
                score: fuse_scores(lex_n[i], dense_n[i], meta_n[i], &weights),
                s_lex: lex_n[i],
                s_dense: dense_n[i],
                s_meta: meta_n[i],
                status: r.epistemic.status,
            }
        })
        .collect();
    scored.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.nugget_id.cmp(&b.nugget_id)));
    scored.truncate(query.k);
    Ok(RetrievalResult {
        query: query.clone(),
        results: scored,
    })
}

fn strip_period(text: &str) -> &str {
    text.trim().trim_end_matches('.')
}

/// Renders the context block handed to a generator.
///
/// ```text
/// Established facts:
/// - {text}
///
/// Disputed (sources disagree):
/// - {text}: Source {doc} says {value}, Source {doc} says {value}
/// ```
///
/// The disputed section appears only when Contested nuggets are present;
/// one line per key, listing each distinct value with the first evidence
/// document as its source label.
pub fn format_context<'a>(result: &RetrievalResult, lookup: impl Fn(NuggetId) -> Option<&'a NuggetRecord>) -> String {
    let records: Vec<&NuggetRecord> = result.results.iter().filter_map(|s| lookup(s.nugget_id)).collect();
    if records.is_empty() {
        return String::new();
    }
    let mut out = String::from("Established facts:\n");
    for r in records.iter().filter(|r| r.epistemic.status == Status::Active) {
        out.push_str("- ");
        out.push_str(r.text.trim());
        out.push('\n');
    }
    let mut groups: Vec<(NuggetKey, Vec<&NuggetRecord>)> = Vec::new();
    for r in records.iter().filter(|r| r.epistemic.status == Status::Contested) {
        let key = r.key();
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, g)) => g.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    if !groups.is_empty() {
        out.push_str("\nDisputed (sources disagree):\n");
        for (_, group) in groups {
            let mut values: Vec<&NuggetRecord> = Vec::new();
            for r in &group {
                if !values.iter().any(|v| values_match(&v.fact.object_norm, &r.fact.object_norm)) {
                    values.push(r);
                }
            }
            let claims: Vec<String> = values
                .iter()
                .map(|r| {
                    let source = r.provenance.evidence.first().map_or("unknown", |e| e.doc_id.as_str());
                    format!("Source {source} says {}", r.fact.object_raw.trim())
                })
                .collect();
            out.push_str(&format!("- {}: {}\n", strip_period(&group[0].text), claims.join(", ")));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::IndexConfig;
    use crate::model::fixtures::{day, record};

    #[test]
    fn fusion_examples() {
        let w = Weights::default();
        assert!((fuse_scores(1.0, 0.0, 0.0, &w) - 0.4).abs() < 1e-12);
        assert!((fuse_scores(1.0, 1.0, 1.0, &w) - 1.0).abs() < 1e-12);
        assert!((fuse_scores(0.5, 0.2, 1.0, &w) - 0.4).abs() < 1e-12);
        let lo = w.lexical_only();
        assert!((lo.alpha - 0.8).abs() < 1e-12 && (lo.gamma - 0.2).abs() < 1e-12);
    }

    #[test]
    fn weights_normalize_on_load() {
        let w = Weights::new(4.0, 5.0, 1.0).unwrap();
        assert!((w.alpha - 0.4).abs() < 1e-12);
        assert!(Weights::new(-1.0, 1.0, 1.0).is_err());
        assert!(Weights::new(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn s_meta_examples() {
        let mut r = record("a", "p", "x", "2019-01-01", None);
        assert!((s_meta(&r) - 0.4).abs() < 1e-12);
        r.epistemic.confidence = 1.0;
        r.epistemic.rank = Rank::Preferred;
        assert_eq!(s_meta(&r), 1.0);
        r.epistemic.set_status(Status::Deprecated);
        assert_eq!(s_meta(&r), 0.0);
    }

    #[test]
    fn min_max_degenerate() {
        assert_eq!(min_max(&[0.3, 0.3]), vec![0.0, 0.0]);
        assert_eq!(min_max(&[1.0, 3.0, 2.0]), vec![0.0, 1.0, 0.5]);
        assert!(min_max(&[]).is_empty());
    }

    fn two_record_index() -> (Index, NuggetRecord, NuggetRecord) {
        let mut idx = Index::new(IndexConfig::lexical_only());
        let mut a = record("acme", "ceo", "alice", "2019-01-01", None);
        a.text = "Alice Ng leads Acme".into();
        let mut b = record("globex", "ceo", "bob", "2019-01-01", None);
        b.text = "Bob Li runs Globex".into();
        idx.upsert(a.clone());
        idx.upsert(b.clone());
        (idx, a, b)
    }

    #[test]
    fn lexical_match_ranks_first() {
        let (idx, a, _) = two_record_index();
        let r = retrieve(&idx, &Query::new("who leads acme", day("2020-01-01"))).unwrap();
        assert_eq!(r.results[0].nugget_id, a.id);
        assert_eq!(r.results.len(), 1);
    }

    #[test]
    fn empty_when_nothing_valid() {
        let (mut idx, a, b) = two_record_index();
        assert!(retrieve(&idx, &Query::new("acme", day("2018-01-01"))).unwrap().results.is_empty());
        for mut r in [a, b] {
            r.epistemic.set_status(Status::Deprecated);
            idx.upsert(r);
        }
        assert!(retrieve(&idx, &Query::new("acme", day("2020-01-01"))).unwrap().results.is_empty());
    }

    #[test]
    fn k_zero_rejected() {
        let (idx, _, _) = two_record_index();
        assert!(retrieve(&idx, &Query::new("acme", day("2020-01-01")).k(0)).is_err());
    }

    #[test]
    fn context_blocks() {
        let (idx, a, b) = two_record_index();
        let lookup = |id| idx.get(id);
        let r = retrieve(&idx, &Query::new("acme globex", day("2020-01-01"))).unwrap();
        let ctx = format_context(&r, lookup);
        assert_eq!(ctx.lines().count(), 3);
        assert!(ctx.starts_with("Established facts:\n- "));
        assert!(!ctx.contains("Disputed"));
        let empty = RetrievalResult {
            query: r.query.clone(),
            results: Vec::new(),
        };
        assert_eq!(format_context(&empty, lookup), "");
        let _ = (a, b);
    }

    #[test]
    fn disputed_line_names_both_values() {
        let mut idx = Index::new(IndexConfig::lexical_only());
        let active = record("initech", "chiefExecutiveOfficer", "dana ito", "2019-01-01", None);
        let mut x = record("acme", "chiefExecutiveOfficer", "bob li", "2019-01-01", None);
        let mut y = record("acme", "chiefExecutiveOfficer", "carol wu", "2020-01-01", None);
        x.epistemic.set_status(Status::Contested);
        y.epistemic.set_status(Status::Contested);
        y.provenance.evidence[0].doc_id = "d2".into();
        for r in [&active, &x, &y] {
            idx.upsert(r.clone());
        }
        let q = Query::new("chiefExecutiveOfficer", day("2021-01-01")).view(View::ActivePlusContested);
        let r = retrieve(&idx, &q).unwrap();
        let ctx = format_context(&r, |id| idx.get(id));
        let lines: Vec<&str> = ctx.lines().collect();
        assert_eq!(lines[0], "Established facts:");
        assert_eq!(lines[1], "- initech chiefExecutiveOfficer dana ito.");
        assert_eq!(lines[2], "");
        assert_eq!(lines[3], "Disputed (sources disagree):");
        assert!(lines[4].contains("Source d1 says bob li") && lines[4].contains("Source d2 says carol wu"), "{}", lines[4]);
        assert_eq!(lines.len(), 5);

        let active_only = retrieve(&idx, &Query::new("chiefExecutiveOfficer", day("2021-01-01"))).unwrap();
        assert!(!format_context(&active_only, |id| idx.get(id)).contains("Disputed"));
    }
}
