//! In-memory indexes over the record set: records by ordinal, the
//! validity/state index, BM25 and the optional dense graph.

pub mod dense;
pub mod embed;
pub mod metadata;
pub mod sparse;
pub mod storage;

use std::collections::HashMap;
use std::sync::Arc;

use fnv::FnvHashMap;

use crate::dates::Day;
use crate::error::{Error, Result};
use crate::model::{NuggetId, NuggetKey, NuggetRecord, View};

use dense::{DenseIndex, HnswParams};
use embed::{Embedder, HashedTrigramEmbedder};
use metadata::MetadataIndex;
use sparse::{tokenize, SparseIndex};

#[derive(Debug, Clone, PartialEq)]
pub struct IndexConfig {
    pub dense_enabled: bool,
    pub dim: usize,
    pub hnsw: HnswParams,
    pub k1: f64,
    pub b: f64,
}

impl Default for IndexConfig {
    fn default() -> Self {
        IndexConfig {
            dense_enabled: true,
            dim: embed::REFERENCE_DIM,
            hnsw: HnswParams::default(),
            k1: sparse::DEFAULT_K1,
            b: sparse::DEFAULT_B,
        }
    }
}

impl IndexConfig {
    pub fn lexical_only() -> Self {
        IndexConfig {
            dense_enabled: false,
            ..Self::default()
        }
    }
}

/// Candidate set produced by filtering: ordinals plus a membership mask.
#[derive(Debug, Clone, Default)]
pub struct Candidates {
    pub ords: Vec<u32>,
    pub mask: Vec<bool>,
}

impl Candidates {
    pub fn len(&self) -> usize {
        self.ords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ords.is_empty()
    }

    fn from_ords(ords: Vec<u32>, n: usize) -> Self {
        let mut mask = vec![false; n];
        for &o in &ords {
            mask[o as usize] = true;
        }
        Candidates { ords, mask }
    }
}

pub struct Index {
    config: IndexConfig,
    records: Vec<NuggetRecord>,
    ords: FnvHashMap<NuggetId, u32>,
    by_key: HashMap<NuggetKey, Vec<u32>>,
    metadata: MetadataIndex,
    sparse: SparseIndex,
    dense: Option<DenseIndex>,
    embedder: Arc<dyn Embedder>,
}

impl Index {
    pub fn new(config: IndexConfig) -> Self {
        let embedder: Arc<dyn Embedder> = Arc::new(HashedTrigramEmbedder::new(config.dim));
        Self::with_embedder(config, embedder)
    }

    pub fn with_embedder(config: IndexConfig, embedder: Arc<dyn Embedder>) -> Self {
        let dense = config.dense_enabled.then(|| DenseIndex::new(embedder.dim(), config.hnsw));
        Index {
            sparse: SparseIndex::new(config.k1, config.b),
            config,
            records: Vec::new(),
            ords: FnvHashMap::default(),
            by_key: HashMap::new(),
            metadata: MetadataIndex::default(),
            dense,
            embedder,
        }
    }

    pub fn config(&self) -> &IndexConfig {
        &self.config
    }

    pub fn dense_enabled(&self) -> bool {
        self.dense.is_some()
    }

    pub fn embedder(&self) -> &Arc<dyn Embedder> {
        &self.embedder
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, id: NuggetId) -> Option<&NuggetRecord> {
        self.ords.get(&id).map(|&o| &self.records[o as usize])
    }

    pub fn ordinal(&self, id: NuggetId) -> Option<u32> {
        self.ords.get(&id).copied()
    }

    pub fn record_at(&self, ord: u32) -> &NuggetRecord {
        &self.records[ord as usize]
    }

    pub fn records(&self) -> impl Iterator<Item = &NuggetRecord> {
        self.records.iter()
    }

    /// Records sharing `key`, in ascending id order.
    pub fn same_key(&self, key: &NuggetKey) -> Vec<&NuggetRecord> {
        let mut v: Vec<&NuggetRecord> = self
            .by_key
            .get(key)
            .map(|ords| ords.iter().map(|&o| &self.records[o as usize]).collect())
            .unwrap_or_default();
        v.sort_by_key(|r| r.id);
        v
    }

    pub fn keys(&self) -> impl Iterator<Item = &NuggetKey> {
        self.by_key.keys()
    }

    /// Inserts or replaces a record and updates every index.
    pub fn upsert(&mut self, record: NuggetRecord) {
        let (ord, text_changed) = match self.ords.get(&record.id) {
            Some(&o) => (o, self.records[o as usize].text != record.text),
            None => {
                let o = self.records.len() as u32;
                self.ords.insert(record.id, o);
                self.by_key.entry(record.key()).or_default().push(o);
                self.records.push(record.clone());
                (o, true)
            }
        };
        self.metadata.upsert(ord, record.validity.t_start, record.validity.t_end, record.epistemic.status);
        if text_changed {
            self.sparse.upsert(ord, &record.text);
            if let Some(d) = self.dense.as_mut() {
                d.upsert(ord, &self.embedder.embed(&record.text));
            }
        }
        self.records[ord as usize] = record;
    }

    /// Candidates retrievable at `t` under `view`. `None` skips the
    /// temporal test (status filtering still applies).
    pub fn candidates(&self, t: Option<Day>, view: View) -> Candidates {
        let ords = match t {
            Some(t) => self.metadata.stab(t, view),
            None => self.metadata.all_visible(view),
        };
        Candidates::from_ords(ords, self.records.len())
    }

    /// Ids retrievable at `t` under `view`, ascending.
    pub fn filter_valid(&self, t: Day, view: View) -> Vec<NuggetId> {
        let mut ids: Vec<NuggetId> = self.metadata.stab(t, view).into_iter().map(|o| self.records[o as usize].id).collect();
        ids.sort();
        ids
    }

    fn rank(&self, mut scored: Vec<(u32, f64)>, k: usize) -> Vec<(u32, f64)> {
        scored.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| self.records[a.0 as usize].id.cmp(&self.records[b.0 as usize].id))
        });
        scored.truncate(k);
        scored
    }

    /// BM25 top `k` among the candidates, ties by ascending id.
    pub fn bm25(&self, query: &str, candidates: &Candidates, k: usize) -> Vec<(u32, f64)> {
        self.rank(self.sparse.score(&tokenize(query), &candidates.mask), k)
    }

    /// Cosine top `k` among the candidates, ties by ascending id.
    pub fn dense(&self, query: &str, candidates: &Candidates, k: usize) -> Result<Vec<(u32, f64)>> {
        let d = self.dense.as_ref().ok_or(Error::UnsupportedMode)?;
        let q = self.embedder.embed(query);
        let hits = d.filtered_search(&q, &candidates.ords, &candidates.mask, k);
        Ok(self.rank(hits.into_iter().map(|(o, s)| (o, s as f64)).collect(), k))
    }

    /// BM25 over an explicit candidate id set.
    pub fn bm25_search(&self, query: &str, candidate_ids: &[NuggetId], k: usize) -> Vec<(NuggetId, f64)> {
        let c = self.candidates_from_ids(candidate_ids);
        self.bm25(query, &c, k).into_iter().map(|(o, s)| (self.records[o as usize].id, s)).collect()
    }

    /// Dense search over an explicit candidate id set.
    pub fn dense_search(&self, query: &str, candidate_ids: &[NuggetId], k: usize) -> Result<Vec<(NuggetId, f64)>> {
        let c = self.candidates_from_ids(candidate_ids);
        Ok(self.dense(query, &c, k)?.into_iter().map(|(o, s)| (self.records[o as usize].id, s)).collect())
    }

    fn candidates_from_ids(&self, ids: &[NuggetId]) -> Candidates {
        let ords = ids.iter().filter_map(|id| self.ords.get(id).copied()).collect();
        Candidates::from_ords(ords, self.records.len())
    }

    pub fn sparse(&self) -> &SparseIndex {
        &self.sparse
    }

    pub fn dense_index(&self) -> Option<&DenseIndex> {
        self.dense.as_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dates::End;
    use crate::model::fixtures::{day, record};
    use crate::model::Status;

    #[test]
    fn filter_valid_examples() {
        let mut idx = Index::new(IndexConfig::lexical_only());
        assert!(idx.filter_valid(day("2020-06-01"), View::Active).is_empty());
        let a = record("a", "p", "x", "2019-01-01", Some("2020-01-01"));
        let b = record("b", "p", "x", "2020-01-01", None);
        let mut c = record("c", "p", "x", "2019-01-01", None);
        c.epistemic.set_status(Status::Deprecated);
        let mut d = record("d", "p", "x", "2019-01-01", None);
        d.epistemic.set_status(Status::Contested);
        for r in [&a, &b, &c] {
            idx.upsert(r.clone());
        }
        let t = day("2020-06-01");
        assert_eq!(idx.filter_valid(t, View::Active), vec![b.id]);
        idx.upsert(d.clone());
        let mut both = vec![b.id, d.id];
        both.sort();
        assert_eq!(idx.filter_valid(t, View::ActivePlusContested), both);
    }

    #[test]
    fn upsert_updates_state_and_key_groups() {
        let mut idx = Index::new(IndexConfig::default());
        let mut a = record("acme", "ceo", "alice", "2019-01-01", None);
        idx.upsert(a.clone());
        a.epistemic.set_status(Status::Deprecated);
        a.validity.t_end = End::At(day("2021-01-01"));
        idx.upsert(a.clone());
        assert_eq!(idx.len(), 1);
        assert_eq!(idx.get(a.id).unwrap(), &a);
        assert!(idx.filter_valid(day("2020-01-01"), View::ActivePlusContested).is_empty());
        assert_eq!(idx.same_key(&a.key()).len(), 1);
    }

    #[test]
    fn dense_disabled_is_unsupported() {
        let idx = Index::new(IndexConfig::lexical_only());
        assert!(matches!(idx.dense_search("x", &[], 3), Err(Error::UnsupportedMode)));
    }

    #[test]
    fn dense_self_similarity() {
        let mut idx = Index::new(IndexConfig::default());
        let a = record("acme", "ceo", "alice", "2019-01-01", None);
        let b = record("globex", "ceo", "bob", "2019-01-01", None);
        idx.upsert(a.clone());
        idx.upsert(b.clone());
        let hits = idx.dense_search(&a.text, &[a.id, b.id], 2).unwrap();
        assert_eq!(hits[0].0, a.id);
        assert!((hits[0].1 - 1.0).abs() < 1e-6);
    }
}
