//! Ungoverned comparison systems: plain propositions and whole-passage
//! BM25 with temporal variants.

use std::collections::HashMap;

use crate::canonicalize::{canonicalize, compute_key, AliasTable, PredicateMatch, Schema};
use crate::dates::{Day, End};
use crate::error::Result;
use crate::extraction::{extract_document, Document, Extractor};
use crate::index::sparse::{tokenize, SparseIndex, DEFAULT_B, DEFAULT_K1};
use crate::index::{Index, IndexConfig};
use crate::model::{EpistemicState, Evidence, FactTriple, NuggetId, NuggetKind, NuggetRecord, Provenance, ValidityInterval};
use crate::retrieval::fetch_depth;

use super::metrics::RetrievedNugget;

pub const TIME_WINDOW_DAYS: i64 = 180;
pub const RECENCY_LAMBDA: f64 = 0.001;

/// Interval given to facts from systems that infer none.
pub fn unbounded() -> ValidityInterval {
    ValidityInterval::new(Day::from_ymd(1, 1, 1).expect("date"), End::Open)
}

pub fn recency_multiplier(t: Day, t_doc: Day, lambda: f64) -> f64 {
    (-lambda * t.days_since(t_doc).abs() as f64).exp()
}

pub fn in_window(t: Day, t_doc: Day, window_days: i64) -> bool {
    t.days_since(t_doc).abs() <= window_days
}

/// Keeps only the newest document of each revision chain.
pub fn latest_snapshot(documents: &[Document]) -> Vec<Document> {
    let by_id: HashMap<&str, &Document> = documents.iter().map(|d| (d.doc_id.as_str(), d)).collect();
    let root = |d: &Document| {
        let mut cur = d;
        let mut hops = 0;
        while let Some(parent) = cur.revision_of.as_deref().and_then(|p| by_id.get(p)) {
            cur = parent;
            hops += 1;
            if hops > documents.len() {
                break;
            }
        }
        cur.doc_id.clone()
    };
    let mut newest: HashMap<String, &Document> = HashMap::new();
    for d in documents {
        let r = root(d);
        match newest.get(&r) {
            Some(cur) if (cur.timestamp, &cur.doc_id) >= (d.timestamp, &d.doc_id) => {}
            _ => {
                newest.insert(r, d);
            }
        }
    }
    let mut out: Vec<Document> = newest.into_values().cloned().collect();
    out.sort_by(|a, b| (a.timestamp, &a.doc_id).cmp(&(b.timestamp, &b.doc_id)));
    out
}

/// Propositions of one document as metric items with unbounded intervals.
fn propositions(doc: &Document, extractor: &dyn Extractor, schema: &Schema, aliases: &AliasTable) -> Result<Vec<(String, RetrievedNugget)>> {
    let mut out = Vec::new();
    for cand in extract_document(doc, extractor)? {
        let text = cand.text.clone();
        let c = canonicalize(cand, schema, aliases);
        let key = compute_key(&c.subject_norm, &c.predicate, &Default::default()).ok();
        out.push((
            text,
            RetrievedNugget {
                key,
                value: c.object_norm,
                interval: unbounded(),
            },
        ));
    }
    Ok(out)
}

/// Extraction output indexed as plain text: no dedup, no validity, no
/// lifecycle.
pub struct PropositionIndex {
    pub index: Index,
    items: Vec<RetrievedNugget>,
}

impl PropositionIndex {
    pub fn build(documents: &[Document], extractor: &dyn Extractor, schema: &Schema, aliases: &AliasTable, config: IndexConfig) -> Result<Self> {
        let mut index = Index::new(config);
        let mut items = Vec::new();
        for doc in documents {
            for (text, item) in propositions(doc, extractor, schema, aliases)? {
                let predicate = match &item.key {
                    Some(k) => k.predicate.clone(),
                    None => PredicateMatch::Unmapped.name().to_string(),
                };
                let subject = item.key.as_ref().map(|k| k.subject_norm.clone()).unwrap_or_default();
                index.upsert(NuggetRecord {
                    id: NuggetId(items.len() as u128),
                    kind: NuggetKind::SemanticFact,
                    fact: FactTriple {
                        subject_raw: subject.clone(),
                        subject_norm: subject,
                        predicate,
                        object_raw: item.value.clone(),
                        object_norm: item.value.clone(),
                    },
                    text,
                    validity: item.interval.clone(),
                    epistemic: EpistemicState::active(),
                    provenance: Provenance {
                        evidence: vec![Evidence {
                            doc_id: doc.doc_id.clone(),
                            revision_id: None,
                            span_start: 0,
                            span_end: 0,
                            doc_time: doc.timestamp,
                            source_type: doc.source_type,
                        }],
                        created_at: doc.timestamp,
                        extractor_id: extractor.id().to_string(),
                        parent_id: None,
                    },
                    access_count: 0,
                });
                items.push(item);
            }
        }
        Ok(PropositionIndex { index, items })
    }

    pub fn item(&self, id: NuggetId) -> &RetrievedNugget {
        &self.items[id.0 as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PassageMode {
    Plain,
    TimeFilter { window_days: i64 },
    RecencyRerank { lambda: f64 },
}

/// Whole documents under BM25, each mapped to its extracted propositions.
pub struct PassageIndex {
    documents: Vec<Document>,
    sparse: SparseIndex,
    props: Vec<Vec<RetrievedNugget>>,
}

impl PassageIndex {
    pub fn build(documents: Vec<Document>, extractor: &dyn Extractor, schema: &Schema, aliases: &AliasTable) -> Result<Self> {
        let mut sparse = SparseIndex::new(DEFAULT_K1, DEFAULT_B);
        let mut props = Vec::with_capacity(documents.len());
        for (i, d) in documents.iter().enumerate() {
            sparse.upsert(i as u32, &d.text);
            props.push(propositions(d, extractor, schema, aliases)?.into_iter().map(|(_, p)| p).collect());
        }
        Ok(PassageIndex { documents, sparse, props })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn document(&self, i: usize) -> &Document {
        &self.documents[i]
    }

    pub fn propositions(&self, i: usize) -> &[RetrievedNugget] {
        &self.props[i]
    }

    /// Top `k` documents for `query` at time `t`; ties by ascending doc id.
    pub fn search(&self, query: &str, t: Day, k: usize, mode: PassageMode) -> Vec<(usize, f64)> {
        let mask: Vec<bool> = match mode {
            PassageMode::TimeFilter { window_days } => self.documents.iter().map(|d| in_window(t, d.timestamp, window_days)).collect(),
            _ => vec![true; self.documents.len()],
        };
        let mut scored = self.sparse.score(&tokenize(query), &mask);
        let by_score = |v: &mut Vec<(u32, f64)>, docs: &[Document]| {
            v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| docs[a.0 as usize].doc_id.cmp(&docs[b.0 as usize].doc_id)));
        };
        by_score(&mut scored, &self.documents);
        if let PassageMode::RecencyRerank { lambda } = mode {
            scored.truncate(fetch_depth(k));
            for s in scored.iter_mut() {
                s.1 *= recency_multiplier(t, self.documents[s.0 as usize].timestamp, lambda);
            }
            by_score(&mut scored, &self.documents);
        }
        scored.truncate(k);
        scored.into_iter().map(|(i, s)| (i as usize, s)).collect()
    }

    /// Context block of the given passages.
    pub fn context(&self, hits: &[(usize, f64)]) -> String {
        hits.iter()
            .map(|&(i, _)| format!("[{}] {}", self.documents[i].doc_id, self.documents[i].text))
            .collect::<Vec<_>>()
            .join("\n\n")
    }
}
