//! Evaluation harness: synthetic corpus, comparison systems, metrics and
//! the JSON report.

pub mod baselines;
pub mod corpus;
pub mod metrics;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::canonicalize::{AliasTable, Schema};
use crate::engine::{Engine, EngineOptions, IngestSummary};
use crate::error::{Error, Result};
use crate::extraction::{Extractor, RuleExtractor};
use crate::index::IndexConfig;
use crate::model::View;
use crate::retrieval::{retrieve_with, PipelineOptions, Query, RetrievalResult, Weights, DEFAULT_K};

use baselines::{latest_snapshot, PassageIndex, PassageMode, PropositionIndex, RECENCY_LAMBDA, TIME_WINDOW_DAYS};
use corpus::{generate_corpus, Corpus, SyntheticCorpusSpec};
use metrics::{compute_metrics, context_tokens, median, MetricsReport, QueryRun, RetrievedNugget};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum System {
    NuggetActive,
    NuggetFull,
    /// Governed store with the temporal filter switched off.
    NuggetNoValidity,
    NuggetLexical,
    NuggetDense,
    Proposition,
    PassageBm25,
    TimeFilter,
    RecencyRerank,
    LatestSnapshot,
}

impl System {
    pub const ALL: [System; 10] = [
        System::NuggetActive,
        System::NuggetFull,
        System::NuggetNoValidity,
        System::NuggetLexical,
        System::NuggetDense,
        System::Proposition,
        System::PassageBm25,
        System::TimeFilter,
        System::RecencyRerank,
        System::LatestSnapshot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            System::NuggetActive => "nugget_active",
            System::NuggetFull => "nugget_full",
            System::NuggetNoValidity => "nugget_no_validity",
            System::NuggetLexical => "nugget_lexical",
            System::NuggetDense => "nugget_dense",
            System::Proposition => "proposition",
            System::PassageBm25 => "passage_bm25",
            System::TimeFilter => "time_filter",
            System::RecencyRerank => "recency_rerank",
            System::LatestSnapshot => "latest_snapshot",
        }
    }

    /// Parses a comma-separated list; `all` expands to every system.
    pub fn parse_list(s: &str) -> Result<Vec<System>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part == "all" {
                out.extend(System::ALL);
            } else {
                out.push(part.parse()?);
            }
        }
        out.sort();
        out.dedup();
        if out.is_empty() {
            return Err(Error::InvalidInput("no systems given".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for System {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        System::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown system {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub k: usize,
    pub window_days: i64,
    pub recency_lambda: f64,
    /// Untimed queries run before latency measurement starts.
    pub warmup_queries: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            k: DEFAULT_K,
            window_days: TIME_WINDOW_DAYS,
            recency_lambda: RECENCY_LAMBDA,
            warmup_queries: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub documents: usize,
    pub gold_nuggets: usize,
    pub queries: usize,
    /// Share of gold evidence dated outside the time-filter window.
    pub evidence_outside_window: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub spec: SyntheticCorpusSpec,
    pub config: EvalConfig,
    pub corpus: CorpusStats,
    pub ingest: IngestSummary,
    pub systems: BTreeMap<String, MetricsReport>,
}

/// Builds each system's index on first use and replays the queries.
pub struct Harness {
    pub corpus: Corpus,
    pub config: EvalConfig,
    schema: Schema,
    aliases: AliasTable,
    extractor: Arc<dyn Extractor>,
    engine: Option<(Engine, IngestSummary)>,
    propositions: Option<PropositionIndex>,
    passages: Option<PassageIndex>,
    snapshot: Option<PassageIndex>,
}

impl Harness {
    pub fn new(corpus: Corpus, config: EvalConfig) -> Self {
        Harness {
            corpus,
            config,
            schema: Schema::reference(),
            aliases: AliasTable::default(),
            extractor: Arc::new(RuleExtractor),
            engine: None,
            propositions: None,
            passages: None,
            snapshot: None,
        }
    }

    pub fn from_spec(spec: &SyntheticCorpusSpec, config: EvalConfig) -> Result<Self> {
        Ok(Harness::new(generate_corpus(spec)?, config))
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    /// The governed engine over the corpus, ingested as one batch.
    pub fn engine(&mut self) -> Result<&Engine> {
        if self.engine.is_none() {
            let e = Engine::in_memory(EngineOptions::default(), Some(self.schema.clone()), self.aliases.clone())
                .with_extractor(self.extractor.clone());
            let summary = e.ingest(self.corpus.documents.clone())?;
            self.engine = Some((e, summary));
        }
        Ok(&self.engine.as_ref().expect("built").0)
    }

    pub fn ingest_summary(&mut self) -> Result<IngestSummary> {
        self.engine()?;
        Ok(self.engine.as_ref().expect("built").1)
    }

    fn proposition_index(&mut self) -> Result<&PropositionIndex> {
        if self.propositions.is_none() {
            self.propositions = Some(PropositionIndex::build(
                &self.corpus.documents,
                self.extractor.as_ref(),
                &self.schema,
                &self.aliases,
                IndexConfig::default(),
            )?);
        }
        Ok(self.propositions.as_ref().expect("built"))
    }

    pub fn passage_index(&mut self, snapshot: bool) -> Result<&PassageIndex> {
        let slot = if snapshot { &mut self.snapshot } else { &mut self.passages };
        if slot.is_none() {
            let docs = if snapshot { latest_snapshot(&self.corpus.documents) } else { self.corpus.documents.clone() };
            *slot = Some(PassageIndex::build(docs, self.extractor.as_ref(), &self.schema, &self.aliases)?);
        }
        Ok(slot.as_ref().expect("built"))
    }

    /// Runs every corpus query through `system`, timing each retrieval.
    pub fn run(&mut self, system: System) -> Result<Vec<QueryRun>> {
        let k = self.config.k;
        let queries = self.corpus.queries.clone();
        let warmup = self.config.warmup_queries.min(queries.len());
        match system {
            System::NuggetActive | System::NuggetFull | System::NuggetNoValidity | System::NuggetLexical | System::NuggetDense => {
                let (view, opts, weights) = match system {
                    System::NuggetFull => (View::ActivePlusContested, PipelineOptions::default(), Weights::default()),
                    System::NuggetNoValidity => (
                        View::Active,
                        PipelineOptions {
                            validity_filter: false,
                            ..Default::default()
                        },
                        Weights::default(),
                    ),
                    System::NuggetLexical => (
                        View::Active,
                        PipelineOptions {
                            use_dense: false,
                            ..Default::default()
                        },
                        Weights::default(),
                    ),
                    System::NuggetDense => (View::Active, PipelineOptions::default(), Weights::new(0.0, 1.0, 0.0)?),
                    _ => (View::Active, PipelineOptions::default(), Weights::default()),
                };
                let engine = self.engine()?;
                let make = |q: &corpus::EvalQuery| Query {
                    weights,
                    ..Query::new(q.text.clone(), q.at).view(view).k(k)
                };
                for q in &queries[..warmup] {
                    engine.retrieve_as_given(&make(q), opts)?;
                }
                queries
                    .iter()
                    .map(|q| {
                        let query = make(q);
                        let start = Instant::now();
                        let result = engine.retrieve_as_given(&query, opts)?;
                        let latency = start.elapsed();
                        Ok(QueryRun {
                            retrieved: governed_items(engine, &result),
                            context: engine.format_context(&result),
                            latency,
                        })
                    })
                    .collect()
            }
            System::Proposition => {
                let p = self.proposition_index()?;
                let opts = PipelineOptions {
                    validity_filter: false,
                    ..Default::default()
                };
                for q in &queries[..warmup] {
                    retrieve_with(&p.index, &Query::new(q.text.clone(), q.at).k(k), opts)?;
                }
                queries
                    .iter()
                    .map(|q| {
                        let start = Instant::now();
                        let result = retrieve_with(&p.index, &Query::new(q.text.clone(), q.at).k(k), opts)?;
                        let latency = start.elapsed();
                        Ok(QueryRun {
                            retrieved: result.results.iter().map(|s| p.item(s.nugget_id).clone()).collect(),
                            context: crate::retrieval::format_context(&result, |id| p.index.get(id)),
                            latency,
                        })
                    })
                    .collect()
            }
            System::PassageBm25 | System::TimeFilter | System::RecencyRerank | System::LatestSnapshot => {
                let mode = match system {
                    System::TimeFilter => PassageMode::TimeFilter {
                        window_days: self.config.window_days,
                    },
                    System::RecencyRerank => PassageMode::RecencyRerank {
                        lambda: self.config.recency_lambda,
                    },
                    _ => PassageMode::Plain,
                };
                let p = self.passage_index(system == System::LatestSnapshot)?;
                for q in &queries[..warmup] {
                    p.search(&q.text, q.at, k, mode);
                }
                Ok(queries
                    .iter()
                    .map(|q| {
                        let start = Instant::now();
                        let hits = p.search(&q.text, q.at, k, mode);
                        let latency = start.elapsed();
                        QueryRun {
                            retrieved: hits.iter().flat_map(|h| p.propositions(h.0).iter().cloned()).collect(),
                            context: p.context(&hits),
                            latency,
                        }
                    })
                    .collect())
            }
        }
    }

    pub fn metrics(&mut self, system: System) -> Result<MetricsReport> {
        let runs = self.run(system)?;
        Ok(compute_metrics(&runs, &self.corpus.queries, &self.corpus.gold, &self.schema))
    }

    /// Median token count of a plain-BM25 context made of the top
    /// `passages` documents.
    pub fn passage_context_tokens(&mut self, passages: usize) -> Result<f64> {
        let queries = self.corpus.queries.clone();
        let p = self.passage_index(false)?;
        let mut tokens: Vec<f64> = queries
            .iter()
            .map(|q| context_tokens(&p.context(&p.search(&q.text, q.at, passages, PassageMode::Plain))) as f64)
            .collect();
        Ok(median(&mut tokens))
    }

    pub fn report(&mut self, spec: &SyntheticCorpusSpec, systems: &[System]) -> Result<EvalReport> {
        let mut out = BTreeMap::new();
        for &s in systems {
            log::info!("evaluating {s}");
            out.insert(s.name().to_string(), self.metrics(s)?);
        }
        Ok(EvalReport {
            spec: spec.clone(),
            config: self.config.clone(),
            corpus: CorpusStats {
                documents: self.corpus.documents.len(),
                gold_nuggets: self.corpus.gold.len(),
                queries: self.corpus.queries.len(),
                evidence_outside_window: self.corpus.evidence_outside_window(self.config.window_days),
            },
            ingest: self.ingest_summary()?,
            systems: out,
        })
    }
}

fn governed_items(engine: &Engine, result: &RetrievalResult) -> Vec<RetrievedNugget> {
    engine.with_index(|idx| {
        result
            .results
            .iter()
            .filter_map(|s| idx.get(s.nugget_id))
            .map(|r| RetrievedNugget {
                key: Some(r.key()),
                value: r.fact.object_norm.clone(),
                interval: r.validity.clone(),
            })
            .collect()
    })
}

/// Generates the corpus for `spec` and evaluates `systems` on it.
pub fn evaluate(spec: &SyntheticCorpusSpec, systems: &[System], config: EvalConfig) -> Result<EvalReport> {
    let mut h = Harness::from_spec(spec, config)?;
    h.report(spec, systems)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SyntheticCorpusSpec {
        SyntheticCorpusSpec {
            n_entities: 6,
            changes_per_entity: 4,
            ..Default::default()
        }
    }

    #[test]
    fn system_names_round_trip() {
        for s in System::ALL {
            assert_eq!(s.name().parse::<System>().unwrap(), s);
        }
        assert_eq!(System::parse_list("proposition, nugget_active").unwrap(), vec![System::NuggetActive, System::Proposition]);
        assert_eq!(System::parse_list("all").unwrap().len(), System::ALL.len());
        assert!(System::parse_list("nope").is_err());
    }

    #[test]
    fn report_covers_requested_systems() {
        let r = evaluate(&small(), &System::ALL, EvalConfig::default()).unwrap();
        assert_eq!(r.systems.len(), System::ALL.len());
        assert_eq!(r.corpus.gold_nuggets, 24);
        for m in r.systems.values() {
            assert_eq!(m.queries, 24);
            assert!((m.governance_score - (m.temporal_correctness - m.conflict_rate)).abs() < 1e-12);
        }
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"nugget_active\""));
    }
}
