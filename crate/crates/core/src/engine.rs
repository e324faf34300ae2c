//! The engine: ingest pipeline, persistence, review workflow and the read
//! path, behind a single-writer lock.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use fnv::FnvHashMap;
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use crate::canonicalize::{canonicalize, compute_key, AliasTable, Schema, UNMAPPED};
use crate::config::Config;
use crate::dates::{Day, End};
use crate::error::{Error, Result};
use crate::extraction::{extract_document, slice_chars, CandidateNugget, Document, Extractor, RuleExtractor};
use crate::governance::{
    flag_for_review, integrate, reconcile_contested, review_transition, Action, Decision, IntegrationOutcome, ReviewDecision, ReviewItem,
    ReviewReason,
};
use crate::index::storage::{FileStorage, MemoryStorage, Storage};
use crate::index::{Index, IndexConfig};
use crate::model::{
    compute_nugget_id, EpistemicState, Evidence, FactTriple, NuggetId, NuggetKey, NuggetRecord, Provenance, Scope, Status, ValidityInterval,
};
use crate::retrieval::{format_context, retrieve_with, PipelineOptions, Query, RetrievalResult, Weights};
use crate::validity::{infer_validity, refine_by_rivals, ValidityInput};

const NUGGET_PREFIX: &[u8] = b"n/";
const DOC_PREFIX: &[u8] = b"d/";
const REVIEW_PREFIX: &[u8] = b"r/";

pub const SYSTEM_ACTOR: &str = "system";

#[derive(Debug, Clone, PartialEq)]
pub struct EngineOptions {
    pub index: IndexConfig,
    pub weights: Weights,
    pub hot_threshold: u64,
    pub pipeline: PipelineOptions,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions {
            index: IndexConfig::default(),
            weights: Weights::default(),
            hot_threshold: crate::governance::DEFAULT_HOT_THRESHOLD,
            pipeline: PipelineOptions::default(),
        }
    }
}

impl EngineOptions {
    pub fn from_config(c: &Config) -> Self {
        EngineOptions {
            index: c.index_config(),
            weights: c.weights,
            hot_threshold: c.hot_threshold,
            pipeline: PipelineOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub documents: usize,
    pub candidates: usize,
    pub inserted: usize,
    pub merged: usize,
    pub deprecated: usize,
    pub contested: usize,
    pub quarantined: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TEndChange {
    pub from: End,
    pub to: End,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub ts: String,
    pub actor: String,
    pub nugget_id: NuggetId,
    pub from_status: Option<Status>,
    pub to_status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end_change: Option<TEndChange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// A quarantined candidate: the nugget record as far as it could be
/// built, plus the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuarantineEntry {
    #[serde(flatten)]
    pub record: NuggetRecord,
    pub error: String,
}

/// An open review item with the records a reviewer needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewEntry {
    #[serde(flatten)]
    pub item: ReviewItem,
    pub nugget: NuggetRecord,
    pub rivals: Vec<NuggetRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub records: usize,
    pub by_status: BTreeMap<String, usize>,
    pub open_reviews: usize,
    pub quarantined: usize,
    pub store_bytes: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionReport {
    #[serde(flatten)]
    pub outcome: IntegrationOutcome,
    pub warnings: Vec<String>,
}

enum Store {
    Memory(MemoryStorage),
    File(FileStorage),
}

impl Store {
    fn storage(&mut self) -> &mut dyn Storage {
        match self {
            Store::Memory(s) => s,
            Store::File(s) => s,
        }
    }

    fn read(&self) -> &dyn Storage {
        match self {
            Store::Memory(s) => s,
            Store::File(s) => s,
        }
    }

    fn size(&self) -> Option<u64> {
        match self {
            Store::Memory(_) => None,
            Store::File(s) => Some(s.size_bytes()),
        }
    }
}

struct State {
    index: Index,
    store: Store,
    schema: Option<Schema>,
    aliases: AliasTable,
    docs: HashMap<String, Document>,
    reviews: BTreeMap<(NuggetId, ReviewReason), ReviewItem>,
    audit: Vec<AuditEntry>,
    quarantine: Vec<QuarantineEntry>,
}

pub struct Engine {
    state: RwLock<State>,
    pending_access: Mutex<FnvHashMap<NuggetId, u64>>,
    extractor: Arc<dyn Extractor>,
    options: EngineOptions,
    audit_path: Option<PathBuf>,
    quarantine_path: Option<PathBuf>,
}

fn side_file(store: &Path, suffix: &str) -> PathBuf {
    let mut name = store.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    store.with_file_name(name)
}

fn now_ts() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn nugget_key(id: NuggetId) -> Vec<u8> {
    [NUGGET_PREFIX, id.to_string().as_bytes()].concat()
}

fn review_key(item: &ReviewItem) -> Vec<u8> {
    let reason = match item.reason {
        ReviewReason::Contested => "contested",
        ReviewReason::HighTrafficChange => "high_traffic_change",
    };
    [REVIEW_PREFIX, format!("{}/{reason}", item.nugget_id).as_bytes()].concat()
}

impl Engine {
    /// In-memory engine with the rule extractor.
    pub fn in_memory(options: EngineOptions, schema: Option<Schema>, aliases: AliasTable) -> Self {
        Self::build(options, Store::Memory(MemoryStorage::new()), schema, aliases, None).expect("empty memory store loads")
    }

    /// Opens (or creates) the store named by the config. Audit and
    /// quarantine logs are written next to the store file.
    pub fn open(config: &Config) -> Result<Self> {
        let schema = config.load_schema()?;
        let aliases = config.load_aliases()?;
        let options = EngineOptions::from_config(config);
        match &config.storage {
            None => Ok(Self::in_memory(options, schema, aliases)),
            Some(path) => {
                let store = Store::File(FileStorage::open(path)?);
                Self::build(options, store, schema, aliases, Some(path))
            }
        }
    }

    fn build(options: EngineOptions, store: Store, schema: Option<Schema>, aliases: AliasTable, path: Option<&Path>) -> Result<Self> {
        let mut index = Index::new(options.index.clone());
        let mut records: Vec<NuggetRecord> = Vec::new();
        for (_, v) in store.read().scan(NUGGET_PREFIX)? {
            records.push(bincode::deserialize(&v)?);
        }
        // insertion order does not affect results, but keep it stable
        records.sort_by_key(|r| (r.validity.t_start, r.id));
        for r in records {
            index.upsert(r);
        }
        let mut docs = HashMap::new();
        for (_, v) in store.read().scan(DOC_PREFIX)? {
            let d: Document = serde_json::from_slice(&v)?;
            docs.insert(d.doc_id.clone(), d);
        }
        let mut reviews = BTreeMap::new();
        for (_, v) in store.read().scan(REVIEW_PREFIX)? {
            let item: ReviewItem = bincode::deserialize(&v)?;
            reviews.insert((item.nugget_id, item.reason), item);
        }
        let state = State {
            index,
            store,
            schema,
            aliases,
            docs,
            reviews,
            audit: Vec::new(),
            quarantine: Vec::new(),
        };
        Ok(Engine {
            state: RwLock::new(state),
            pending_access: Mutex::new(FnvHashMap::default()),
            extractor: Arc::new(RuleExtractor),
            options,
            audit_path: path.map(|p| side_file(p, ".audit.jsonl")),
            quarantine_path: path.map(|p| side_file(p, ".quarantine.jsonl")),
        })
    }

    pub fn with_extractor(mut self, extractor: Arc<dyn Extractor>) -> Self {
        self.extractor = extractor;
        self
    }

    pub fn options(&self) -> &EngineOptions {
        &self.options
    }

    pub fn set_schema(&self, schema: Schema) {
        self.state.write().schema = Some(schema);
    }

    pub fn has_schema(&self) -> bool {
        self.state.read().schema.is_some()
    }

    pub fn len(&self) -> usize {
        self.state.read().index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Runs `f` against a read snapshot of the index.
    pub fn with_index<T>(&self, f: impl FnOnce(&Index) -> T) -> T {
        f(&self.state.read().index)
    }

    /// The record with pending read counts folded in.
    pub fn get(&self, id: NuggetId) -> Option<NuggetRecord> {
        let mut r = self.state.read().index.get(id).cloned()?;
        r.access_count += self.pending_access.lock().get(&id).copied().unwrap_or(0);
        Some(r)
    }

    pub fn records(&self) -> Vec<NuggetRecord> {
        let pending = self.pending_access.lock().clone();
        let st = self.state.read();
        let mut v: Vec<NuggetRecord> = st
            .index
            .records()
            .map(|r| {
                let mut r = r.clone();
                r.access_count += pending.get(&r.id).copied().unwrap_or(0);
                r
            })
            .collect();
        v.sort_by_key(|r| r.id);
        v
    }

    pub fn audit_log(&self) -> Vec<AuditEntry> {
        self.state.read().audit.clone()
    }

    pub fn quarantined(&self) -> Vec<QuarantineEntry> {
        self.state.read().quarantine.clone()
    }

    pub fn document(&self, doc_id: &str) -> Option<Document> {
        self.state.read().docs.get(doc_id).cloned()
    }

    // ------------------------------------------------------------------
    // read path
    // ------------------------------------------------------------------

    /// Retrieves under the engine's pipeline options with its fusion
    /// weights, counting a read for every returned record.
    pub fn retrieve(&self, query: &Query) -> Result<RetrievalResult> {
        let mut q = query.clone();
        q.weights = self.options.weights;
        self.retrieve_as_given(&q, self.options.pipeline)
    }

    /// Retrieves with the query's own weights and explicit options.
    pub fn retrieve_as_given(&self, query: &Query, opts: PipelineOptions) -> Result<RetrievalResult> {
        let result = {
            let st = self.state.read();
            retrieve_with(&st.index, query, opts)?
        };
        if !result.results.is_empty() {
            let mut pending = self.pending_access.lock();
            for s in &result.results {
                *pending.entry(s.nugget_id).or_insert(0) += 1;
            }
        }
        Ok(result)
    }

    pub fn format_context(&self, result: &RetrievalResult) -> String {
        let st = self.state.read();
        format_context(result, |id| st.index.get(id))
    }

    pub fn stats(&self) -> Stats {
        let st = self.state.read();
        let mut by_status: BTreeMap<String, usize> = ["Active", "Contested", "Deprecated"].iter().map(|s| (s.to_string(), 0)).collect();
        for r in st.index.records() {
            *by_status.entry(format!("{:?}", r.epistemic.status)).or_insert(0) += 1;
        }
        Stats {
            records: st.index.len(),
            by_status,
            open_reviews: st.reviews.values().filter(|i| !i.resolved).count(),
            quarantined: st.quarantine.len(),
            store_bytes: st.store.size(),
        }
    }

    /// Open review items, oldest first, with their records and same-key rivals.
    pub fn open_reviews(&self, limit: usize) -> Vec<ReviewEntry> {
        let st = self.state.read();
        let mut items: Vec<&ReviewItem> = st.reviews.values().filter(|i| !i.resolved).collect();
        items.sort_by_key(|i| (i.queued_at, i.nugget_id, i.reason as u8));
        items
            .into_iter()
            .filter_map(|item| {
                let nugget = st.index.get(item.nugget_id)?.clone();
                let rivals = st.index.same_key(&nugget.key()).into_iter().filter(|r| r.id != nugget.id).cloned().collect();
                Some(ReviewEntry {
                    item: item.clone(),
                    nugget,
                    rivals,
                })
            })
            .take(limit)
            .collect()
    }

    // ------------------------------------------------------------------
    // write path
    // ------------------------------------------------------------------

    /// Ingests documents in ascending timestamp order, then re-refines
    /// functional validity against later well-supported rivals.
    pub fn ingest(&self, documents: Vec<Document>) -> Result<IngestSummary> {
        let mut summary = IngestSummary::default();
        let mut docs = documents;
        for d in &docs {
            if d.text.trim().is_empty() {
                return Err(Error::InvalidInput(format!("document {:?} has empty text", d.doc_id)));
            }
        }
        docs.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.doc_id.cmp(&b.doc_id)));
        // extraction is pure; run it before taking the writer lock
        let mut extracted = Vec::with_capacity(docs.len());
        for d in &docs {
            extracted.push(extract_document(d, self.extractor.as_ref())?);
        }
        let mut st = self.state.write();
        self.flush_access(&mut st)?;
        if st.schema.is_none() && extracted.iter().any(|c| !c.is_empty()) {
            return Err(Error::SchemaMissing("no schema loaded while candidates exist".into()));
        }
        for d in &docs {
            st.docs.insert(d.doc_id.clone(), d.clone());
        }
        check_chains(&st.docs)?;
        let mut last = None;
        for (doc, cands) in docs.iter().zip(extracted) {
            summary.documents += 1;
            summary.candidates += cands.len();
            st.store.storage().put(&[DOC_PREFIX, doc.doc_id.as_bytes()].concat(), &serde_json::to_vec(doc)?)?;
            for cand in cands {
                self.integrate_candidate(&mut st, doc, cand, &mut summary)?;
            }
            st.store.storage().commit()?;
            last = Some(doc.timestamp);
        }
        if let Some(now) = last {
            self.refine_all(&mut st, now)?;
            st.store.storage().commit()?;
        }
        Ok(summary)
    }

    fn integrate_candidate(&self, st: &mut State, doc: &Document, cand: CandidateNugget, summary: &mut IngestSummary) -> Result<()> {
        let schema = st.schema.clone().expect("checked by caller");
        let root = chain_root(&st.docs, &doc.doc_id);
        let c = canonicalize(cand, &schema, &st.aliases);
        let scope = Scope::Global;
        let predicate = c.predicate.name().to_string();
        let fact = FactTriple {
            subject_raw: c.candidate.subject_raw.clone(),
            subject_norm: c.subject_norm.clone(),
            predicate: predicate.clone(),
            object_raw: c.candidate.object_raw.clone(),
            object_norm: c.object_norm.clone(),
        };
        let evidence = Evidence {
            doc_id: root.clone(),
            revision_id: (root != doc.doc_id).then(|| doc.doc_id.clone()),
            span_start: c.candidate.evidence_span.0,
            span_end: c.candidate.evidence_span.1,
            doc_time: doc.timestamp,
            source_type: doc.source_type,
        };
        let mut record = NuggetRecord {
            id: NuggetId(0),
            kind: c.candidate.kind_hint,
            fact,
            text: c.candidate.text.clone(),
            validity: ValidityInterval::new(doc.timestamp, End::Open),
            epistemic: EpistemicState::active(),
            provenance: Provenance {
                evidence: vec![evidence],
                created_at: doc.timestamp,
                extractor_id: self.extractor.id().to_string(),
                parent_id: None,
            },
            access_count: 0,
        };
        record.validity.source_type = doc.source_type;

        let key = match compute_key(&c.subject_norm, &c.predicate, &scope) {
            Ok(k) => k,
            Err(e) => return self.quarantine(st, record, e, summary),
        };
        let Some(cardinality) = schema.cardinality(&key.predicate) else {
            return self.quarantine(st, record, Error::SchemaMissing(format!("predicate {:?} is not in the schema", key.predicate)), summary);
        };
        let history = chain_docs(&st.docs, &root);
        let rivals: Vec<NuggetRecord> = st.index.same_key(&key).into_iter().cloned().collect();
        let rival_refs: Vec<&NuggetRecord> = rivals.iter().collect();
        let input = ValidityInput {
            text: &c.candidate.text,
            kind: record.kind,
            evidence_span: c.candidate.evidence_span,
            object_norm: &c.object_norm,
            scope: scope.clone(),
        };
        match infer_validity(&input, doc, &history, &rival_refs, cardinality) {
            Ok(v) => record.validity = v,
            Err(e) => return self.quarantine(st, record, e, summary),
        }
        record.id = record.computed_id()?;
        let decision = match integrate(record.clone(), &rivals, &schema) {
            Ok(d) => d,
            Err(e) => return self.quarantine(st, record, e, summary),
        };
        match decision.outcome.action {
            Action::MergedEvidence => summary.merged += 1,
            _ => summary.inserted += 1,
        }
        for w in &decision.warnings {
            log::info!("{w}");
        }
        let counts = self.apply(st, decision.writes, SYSTEM_ACTOR, None, doc.timestamp)?;
        summary.deprecated += counts.0;
        summary.contested += counts.1;
        Ok(())
    }

    fn quarantine(&self, st: &mut State, mut record: NuggetRecord, error: Error, summary: &mut IngestSummary) -> Result<()> {
        if record.fact.predicate.is_empty() {
            record.fact.predicate = UNMAPPED.into();
        }
        record.id = compute_nugget_id(record.kind, &record.fact, &record.validity.scope, record.validity.t_start).unwrap_or(NuggetId(0));
        log::warn!("quarantined {:?}: {error}", record.text);
        let entry = QuarantineEntry {
            record,
            error: error.to_string(),
        };
        if let Some(p) = &self.quarantine_path {
            append_jsonl(p, &entry)?;
        }
        st.quarantine.push(entry);
        summary.quarantined += 1;
        Ok(())
    }

    /// Persists `writes`, reindexes them, records audit rows for every
    /// status or `t_end` change and queues review items. Returns the
    /// number of transitions into Deprecated and into Contested.
    fn apply(&self, st: &mut State, writes: Vec<NuggetRecord>, actor: &str, note: Option<&str>, now: Day) -> Result<(usize, usize)> {
        let mut changes = Vec::new();
        for w in &writes {
            let before = st.index.get(w.id).map(|r| (r.epistemic.status, r.validity.t_end));
            st.store.storage().put(&nugget_key(w.id), &bincode::serialize(w)?)?;
            changes.push((before, w.epistemic.status, w.validity.t_end));
        }
        let mut counts = (0, 0);
        let ts = now_ts();
        let mut rows = Vec::new();
        for (w, (before, status, t_end)) in writes.iter().zip(changes) {
            let (from_status, from_end) = match before {
                Some((s, e)) => (Some(s), Some(e)),
                None => (None, None),
            };
            let status_changed = from_status != Some(status);
            let end_changed = from_end.is_some_and(|e| e != t_end);
            if !status_changed && !end_changed {
                continue;
            }
            if status_changed {
                match status {
                    Status::Deprecated => counts.0 += 1,
                    Status::Contested => counts.1 += 1,
                    Status::Active => {}
                }
            }
            rows.push(AuditEntry {
                ts: ts.clone(),
                actor: actor.to_string(),
                nugget_id: w.id,
                from_status,
                to_status: status,
                t_end_change: end_changed.then(|| TEndChange {
                    from: from_end.expect("known"),
                    to: t_end,
                }),
                note: note.map(str::to_string),
            });
            if from_status.is_some() || status == Status::Contested {
                if let Some(item) = flag_for_review(w, status, self.options.hot_threshold, now) {
                    let slot = (item.nugget_id, item.reason);
                    if st.reviews.get(&slot).is_none_or(|i| i.resolved) {
                        st.store.storage().put(&review_key(&item), &bincode::serialize(&item)?)?;
                        st.reviews.insert(slot, item);
                    }
                }
            }
        }
        // a contest that ended without a reviewer closes its review item
        let settled: Vec<NuggetId> = rows
            .iter()
            .filter(|r| actor == SYSTEM_ACTOR && r.from_status == Some(Status::Contested) && r.to_status != Status::Contested)
            .map(|r| r.nugget_id)
            .collect();
        if !settled.is_empty() {
            resolve_items(st, &settled, Some(ReviewReason::Contested))?;
        }
        for w in writes {
            st.index.upsert(w);
        }
        if let Some(p) = &self.audit_path {
            for row in &rows {
                append_jsonl(p, row)?;
            }
        }
        st.audit.extend(rows);
        Ok(counts)
    }

    /// Caps every functional record's end at the start of later,
    /// well-supported, different-valued rivals, then returns Contested
    /// records without a remaining overlapping rival to Active.
    fn refine_all(&self, st: &mut State, now: Day) -> Result<()> {
        let Some(schema) = st.schema.clone() else {
            return Ok(());
        };
        let mut keys: Vec<NuggetKey> = st.index.keys().cloned().collect();
        keys.sort_by(|a, b| (&a.subject_norm, &a.predicate, a.scope.to_string()).cmp(&(&b.subject_norm, &b.predicate, b.scope.to_string())));
        for key in keys {
            if !schema.cardinality(&key.predicate).is_some_and(|c| c.is_functional()) {
                continue;
            }
            let group: Vec<NuggetRecord> = st.index.same_key(&key).into_iter().cloned().collect();
            if group.len() < 2 {
                continue;
            }
            let refs: Vec<&NuggetRecord> = group.iter().collect();
            let mut writes = Vec::new();
            for r in group.iter().filter(|r| r.epistemic.status != Status::Deprecated) {
                let others: Vec<&NuggetRecord> = refs.iter().copied().filter(|o| o.id != r.id).collect();
                let end = refine_by_rivals(r.validity.t_start, r.validity.t_end, &r.fact.object_norm, &others);
                if end != r.validity.t_end {
                    let mut n = r.clone();
                    n.validity.t_end = end;
                    n.validity.end_inferred = true;
                    writes.push(n);
                }
            }
            if !writes.is_empty() {
                self.apply(st, writes, SYSTEM_ACTOR, Some("refined by later rival"), now)?;
            }
            let group: Vec<NuggetRecord> = st.index.same_key(&key).into_iter().cloned().collect();
            let d = reconcile_contested(&group);
            if !d.writes.is_empty() {
                let ids: Vec<NuggetId> = d.writes.iter().map(|w| w.id).collect();
                self.apply(st, d.writes, SYSTEM_ACTOR, Some("no overlapping rival remains"), now)?;
                resolve_items(st, &ids, Some(ReviewReason::Contested))?;
            }
        }
        Ok(())
    }

    fn flush_access(&self, st: &mut State) -> Result<()> {
        let pending = std::mem::take(&mut *self.pending_access.lock());
        if pending.is_empty() {
            return Ok(());
        }
        let mut ids: Vec<_> = pending.into_iter().collect();
        ids.sort();
        for (id, n) in ids {
            if let Some(mut r) = st.index.get(id).cloned() {
                r.access_count += n;
                st.store.storage().put(&nugget_key(id), &bincode::serialize(&r)?)?;
                st.index.upsert(r);
            }
        }
        st.store.storage().commit()
    }

    /// Writes pending read counts through to the store.
    pub fn flush(&self) -> Result<()> {
        let mut st = self.state.write();
        self.flush_access(&mut st)
    }

    /// Applies a reviewer decision to a nugget with an open review item.
    pub fn apply_review_decision(&self, id: NuggetId, decision: &ReviewDecision, note: Option<&str>, reviewer: &str) -> Result<DecisionReport> {
        let mut st = self.state.write();
        self.flush_access(&mut st)?;
        let target = st.index.get(id).cloned().ok_or(Error::NotFound(id))?;
        if !st.reviews.values().any(|i| i.nugget_id == id && !i.resolved) {
            return Err(Error::NoOpenReview(id));
        }
        let same_key: Vec<NuggetRecord> = st.index.same_key(&target.key()).into_iter().cloned().collect();
        let Decision { outcome, writes, warnings } = review_transition(&target, decision, &same_key)?;
        for w in &warnings {
            log::warn!("{w}");
        }
        let mut note_text = note.map(str::to_string);
        if writes.iter().any(|w| w.epistemic.status == Status::Deprecated) {
            let extra = "t_end unchanged by review";
            note_text = Some(match note_text {
                Some(n) if !n.is_empty() => format!("{n} ({extra})"),
                _ => extra.to_string(),
            });
        }
        let mut touched: Vec<NuggetId> = writes.iter().map(|w| w.id).collect();
        touched.push(id);
        let actor = format!("reviewer:{reviewer}");
        self.apply(&mut st, writes, &actor, note_text.as_deref(), Day::today())?;
        resolve_items(&mut st, &touched, None)?;
        st.store.storage().commit()?;
        Ok(DecisionReport { outcome, warnings })
    }

    /// Bulk-loads records (for example from an export), replacing records
    /// with the same id. No governance runs.
    pub fn import_records(&self, records: Vec<NuggetRecord>) -> Result<usize> {
        let mut st = self.state.write();
        let n = records.len();
        for r in &records {
            if r.validity.is_degenerate() {
                return Err(Error::DegenerateInterval(format!("record {}", r.id)));
            }
            st.store.storage().put(&nugget_key(r.id), &bincode::serialize(r)?)?;
        }
        st.store.storage().commit()?;
        for r in records {
            st.index.upsert(r);
        }
        Ok(n)
    }

    /// All records as JSONL, ascending id.
    pub fn export_jsonl(&self, out: &mut impl Write) -> Result<usize> {
        let records = self.records();
        for r in &records {
            serde_json::to_writer(&mut *out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(records.len())
    }

    /// Text of an evidence span, if the document is known.
    pub fn evidence_text(&self, e: &Evidence) -> Option<String> {
        let st = self.state.read();
        let doc = st.docs.get(e.revision_id.as_deref().unwrap_or(&e.doc_id))?;
        Some(slice_chars(&doc.text, e.span_start, e.span_end).to_string())
    }
}

/// Marks open items of `ids` resolved; `only` restricts to one reason.
fn resolve_items(st: &mut State, ids: &[NuggetId], only: Option<ReviewReason>) -> Result<()> {
    let set: HashSet<&NuggetId> = ids.iter().collect();
    let mut changed = Vec::new();
    for item in st.reviews.values_mut() {
        if !item.resolved && set.contains(&item.nugget_id) && only.is_none_or(|r| r == item.reason) {
            item.resolved = true;
            changed.push(item.clone());
        }
    }
    for item in changed {
        st.store.storage().put(&review_key(&item), &bincode::serialize(&item)?)?;
    }
    Ok(())
}

fn chain_root(docs: &HashMap<String, Document>, id: &str) -> String {
    let mut cur = id.to_string();
    let mut seen = HashSet::new();
    while let Some(parent) = docs.get(&cur).and_then(|d| d.revision_of.clone()) {
        if !seen.insert(cur.clone()) || !docs.contains_key(&parent) {
            // unknown parent: treat it as the root anyway so revisions of one
            // document still count once
            return parent;
        }
        cur = parent;
    }
    cur
}

/// Every known document of a revision chain, oldest first.
fn chain_docs<'a>(docs: &'a HashMap<String, Document>, root: &str) -> Vec<&'a Document> {
    let mut v: Vec<&Document> = docs.values().filter(|d| chain_root(docs, &d.doc_id) == root).collect();
    v.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.doc_id.cmp(&b.doc_id)));
    v
}

fn check_chains(docs: &HashMap<String, Document>) -> Result<()> {
    for d in docs.values() {
        let mut cur = d;
        let mut steps = 0;
        while let Some(p) = cur.revision_of.as_ref().and_then(|p| docs.get(p)) {
            steps += 1;
            if steps > docs.len() {
                return Err(Error::InvalidInput(format!("revision chain through {:?} is cyclic", d.doc_id)));
            }
            cur = p;
        }
    }
    Ok(())
}

fn append_jsonl(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    let mut line = serde_json::to_vec(value)?;
    line.push(b'\n');
    f.write_all(&line)?;
    Ok(())
}

/// Reads line-delimited JSON, skipping blank lines.
pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let f = std::fs::File::open(path)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::InvalidInput(format!("{}:{}: {e}", path.display(), i + 1)))?);
    }
    Ok(out)
}
