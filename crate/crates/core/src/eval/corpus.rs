//! Deterministic synthetic corpus: officeholder successions narrated by
//! timestamped documents, with stale restatements and revisions.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::canonicalize::fold;
use crate::dates::{long_form, Day, End};
use crate::error::{Error, Result};
use crate::extraction::Document;
use crate::model::{
    compute_nugget_id, EpistemicState, Evidence, FactTriple, NuggetKey, NuggetKind, NuggetRecord, Provenance, Scope, SourceType, Status,
    ValidityInterval,
};

pub const CEO_PREDICATE: &str = "chiefExecutiveOfficer";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticCorpusSpec {
    pub n_entities: usize,
    /// Value segments per entity.
    pub changes_per_entity: usize,
    /// Stale-restatement documents as a fraction of source documents.
    pub distractor_rate: f64,
    /// Fraction of source documents that get a later revision dropping
    /// the superseded sentence.
    pub revision_noise_rate: f64,
    pub date_range: (Day, Day),
    pub seed: u64,
    pub docs_per_segment: usize,
    pub filler_sentences: usize,
    /// Fraction of statements phrased with explicit dates.
    pub explicit_rate: f64,
}

impl Default for SyntheticCorpusSpec {
    fn default() -> Self {
        SyntheticCorpusSpec {
            n_entities: 50,
            changes_per_entity: 10,
            distractor_rate: 0.2,
            revision_noise_rate: 0.1,
            date_range: (Day::from_ymd(1990, 1, 1).expect("date"), Day::from_ymd(2024, 12, 31).expect("date")),
            seed: 42,
            docs_per_segment: 3,
            filler_sentences: 40,
            explicit_rate: 0.7,
        }
    }
}

impl SyntheticCorpusSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        if self.n_entities == 0 || self.n_entities > FIRST.len() * LAST.len() {
            return bad("n_entities must be between 1 and 900");
        }
        if self.changes_per_entity == 0 || self.changes_per_entity > ORGS.len() {
            return bad("changes_per_entity must be between 1 and 40");
        }
        if self.docs_per_segment == 0 {
            return bad("docs_per_segment must be positive");
        }
        for (name, r) in [
            ("distractor_rate", self.distractor_rate),
            ("revision_noise_rate", self.revision_noise_rate),
            ("explicit_rate", self.explicit_rate),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::InvalidInput(format!("{name} must be in [0, 1]")));
            }
        }
        let span = self.date_range.1.days_since(self.date_range.0);
        if span < 120 * self.changes_per_entity as i64 {
            return bad("date_range too short for the requested changes");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Vitality {
    Vital,
    Okay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldNugget {
    pub key: NuggetKey,
    pub value: String,
    pub validity: ValidityInterval,
    pub vitality: Vitality,
    /// Source documents stating this value (distractors excluded).
    pub evidence: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalQuery {
    pub id: usize,
    pub text: String,
    pub at: Day,
    pub key: NuggetKey,
    /// Index into `gold` of the segment containing `at`.
    pub gold: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub documents: Vec<Document>,
    pub gold: Vec<GoldNugget>,
    pub queries: Vec<EvalQuery>,
}

impl Corpus {
    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.doc_id == doc_id)
    }

    /// Fraction of (query, gold evidence document) pairs where the
    /// document is dated more than `window_days` from the query time.
    pub fn evidence_outside_window(&self, window_days: i64) -> f64 {
        let times: std::collections::HashMap<&str, Day> =
            self.documents.iter().map(|d| (d.doc_id.as_str(), d.timestamp)).collect();
        let (mut outside, mut total) = (0usize, 0usize);
        for q in &self.queries {
            for doc in &self.gold[q.gold].evidence {
                total += 1;
                if times[doc.as_str()].days_since(q.at).abs() > window_days {
                    outside += 1;
                }
            }
        }
        if total == 0 {
            0.0
        } else {
            outside as f64 / total as f64
        }
    }
}

const FIRST: [&str; 30] = [
    "Alice", "Bruno", "Chidi", "Dana", "Elif", "Farid", "Greta", "Hiro", "Ines", "Jonas", "Kavya", "Luca", "Mira", "Nadia",
    "Omar", "Priya", "Quinn", "Rosa", "Soren", "Tara", "Umar", "Vera", "Wendell", "Ximena", "Yusuf", "Zora", "Anders",
    "Beatriz", "Cyrus", "Delphine",
];
const LAST: [&str; 30] = [
    "Ng", "Okafor", "Lindqvist", "Moreau", "Tanaka", "Haddad", "Kowalski", "Ferreira", "Nakamura", "Osei", "Petrov",
    "Quispe", "Rahman", "Schultz", "Takahashi", "Ueda", "Varga", "Whitfield", "Xu", "Yilmaz", "Zhou", "Abara", "Brandt",
    "Castellano", "Dubois", "Eriksen", "Fontaine", "Galloway", "Holm", "Iqbal",
];
const ORGS: [&str; 40] = [
    "Acme", "Globex", "Initech", "Umbrella", "Hooli", "Vandelay", "Soylent", "Cyberdyne", "Tyrell", "Wonka", "Oscorp",
    "Aperture", "Nakatomi", "Weyland", "Virtucon", "Yoyodyne", "Monarch", "Roxxon", "Gringotts", "Kramerica", "Spacely",
    "Lacuna", "Bluthco", "Genco", "Zorgcorp", "Massive Dynamic", "Black Mesa", "Pied Piper", "Dunder Mifflin",
    "Sterling Cooper", "Prestige Worldwide", "Wernham Hogg", "Buy More", "Krustyco", "Duff", "Ollivanders", "Stark Tower",
    "Blue Sun", "Ingen", "Tessier Ashpool",
];
const TOPICS: [&str; 16] = [
    "supply chains", "cloud pricing", "battery research", "regional expansion", "customer retention", "hiring plans",
    "data privacy", "shipping delays", "product quality", "energy costs", "market volatility", "payment systems",
    "hardware margins", "partner networks", "export rules", "warehouse automation",
];
const SECTORS: [&str; 8] = ["retail", "logistics", "software", "energy", "mining", "media", "banking", "farming"];
const EVENTS: [&str; 6] = ["press briefing", "trade fair", "shareholder call", "industry panel", "town hall", "podcast"];

/// Filler clauses: no copulas, no extraction verbs, no dates, no digits.
fn filler(rng: &mut ChaCha8Rng, entity: &str, org: &str) -> String {
    let topic = TOPICS.choose(rng).expect("topics");
    let sector = SECTORS.choose(rng).expect("sectors");
    let event = EVENTS.choose(rng).expect("events");
    match rng.gen_range(0..8) {
        0 => format!("{entity} spoke with analysts about {topic} during a recent {event}."),
        1 => format!("Observers noted a gradual shift in {topic} across the {sector} sector."),
        2 => format!("The {sector} market saw renewed interest in {topic} over the past quarter."),
        3 => format!("{entity} outlined long term plans for {topic} at a {event}."),
        4 => format!("Critics questioned the pace of change around {topic} at {org}."),
        5 => format!("Several reports linked {org} to new thinking on {topic}."),
        6 => format!("Commentators debated how {topic} might reshape the {sector} industry."),
        _ => format!("A {event} hosted by {org} drew attention to {topic}."),
    }
}

struct Segment {
    entity: usize,
    org: &'static str,
    start: Day,
    /// `None` for the last segment of a timeline.
    end: Option<Day>,
}

/// Builds documents, gold segments and one query per segment.
pub fn generate_corpus(spec: &SyntheticCorpusSpec) -> Result<Corpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (range_start, range_end) = spec.date_range;
    let span = range_end.days_since(range_start);

    let mut names: Vec<String> = FIRST.iter().flat_map(|f| LAST.iter().map(move |l| format!("{f} {l}"))).collect();
    names.shuffle(&mut rng);
    names.truncate(spec.n_entities);

    let n = spec.changes_per_entity as i64;
    let slot = span / n;
    let mut segments = Vec::new();
    for e in 0..spec.n_entities {
        let mut orgs: Vec<&'static str> = ORGS.to_vec();
        orgs.shuffle(&mut rng);
        let bounds: Vec<Day> = (0..n)
            .map(|i| range_start.plus_days(i * slot + rng.gen_range(0..=slot / 3)))
            .collect();
        for i in 0..n as usize {
            segments.push(Segment {
                entity: e,
                org: orgs[i],
                start: bounds[i],
                end: bounds.get(i + 1).copied(),
            });
        }
    }

    let mut documents = Vec::new();
    let mut gold = Vec::new();
    let mut source_docs = Vec::new();
    for (si, seg) in segments.iter().enumerate() {
        let entity = &names[seg.entity];
        let seg_len = seg.end.unwrap_or(range_end).days_since(seg.start).max(1);
        let mut evidence = Vec::new();
        let mut explicit_docs = 0;
        for k in 0..spec.docs_per_segment {
            let doc_id = format!("e{:03}-s{:02}-d{}", seg.entity, si % spec.changes_per_entity, k);
            let explicit = rng.gen_bool(spec.explicit_rate);
            let retrospective = explicit && seg.end.is_some() && rng.gen_bool(0.3);
            let (timestamp, statement) = if retrospective {
                let end = seg.end.expect("checked");
                (
                    end.plus_days(rng.gen_range(0..60)),
                    format!("From {} to {}, {entity} was the CEO of {}.", long_form(seg.start), long_form(end), seg.org),
                )
            } else {
                let ts = seg.start.plus_days(rng.gen_range(0..seg_len.min(60)));
                let s = if explicit {
                    format!("Since {}, {entity} has been the CEO of {}.", long_form(seg.start), seg.org)
                } else {
                    format!("{entity} is the CEO of {}.", seg.org)
                };
                (ts, s)
            };
            explicit_docs += explicit as usize;
            let text = compose(&mut rng, spec.filler_sentences, entity, seg.org, &statement);
            evidence.push(doc_id.clone());
            source_docs.push((si, documents.len(), statement, retrospective));
            documents.push(Document {
                doc_id,
                timestamp,
                text,
                revision_of: None,
                source_type: SourceType::Primary,
            });
        }
        gold.push(GoldNugget {
            key: ceo_key(entity),
            value: fold(seg.org),
            validity: ValidityInterval::new(seg.start, seg.end.map(End::At).unwrap_or(End::Open)),
            vitality: if explicit_docs > 0 { Vitality::Vital } else { Vitality::Okay },
            evidence,
        });
    }

    // revisions dated after the next segment starts drop the statement
    let mut revisions = Vec::new();
    for &(si, di, ref statement, retrospective) in &source_docs {
        let seg = &segments[si];
        let Some(next_start) = seg.end else { continue };
        if retrospective || !rng.gen_bool(spec.revision_noise_rate) {
            continue;
        }
        let orig = &documents[di];
        let text = orig
            .text
            .replace(&format!(" {statement}"), "")
            .replace(&format!("{statement} "), "");
        revisions.push(Document {
            doc_id: format!("{}-r1", orig.doc_id),
            timestamp: next_start.plus_days(rng.gen_range(1..=60)).max(orig.timestamp.plus_days(1)),
            text,
            revision_of: Some(orig.doc_id.clone()),
            source_type: SourceType::Primary,
        });
    }
    documents.extend(revisions);

    // stale restatements: an earlier value, dateless, with a fresh timestamp
    let n_distractors = (spec.distractor_rate * source_docs.len() as f64).round() as usize;
    let per_entity = spec.changes_per_entity;
    if per_entity > 1 {
        for j in 0..n_distractors {
            let e = rng.gen_range(0..spec.n_entities);
            let later = rng.gen_range(1..per_entity);
            let stale = rng.gen_range(0..later);
            let seg = &segments[e * per_entity + later];
            let old = &segments[e * per_entity + stale];
            let seg_len = seg.end.unwrap_or(range_end).days_since(seg.start).max(1);
            let entity = &names[e];
            let statement = format!("{entity} is the CEO of {}.", old.org);
            let text = compose(&mut rng, spec.filler_sentences, entity, old.org, &statement);
            documents.push(Document {
                doc_id: format!("x{j:04}"),
                timestamp: seg.start.plus_days(rng.gen_range(0..seg_len)),
                text,
                revision_of: None,
                source_type: SourceType::Secondary,
            });
        }
    }
    documents.sort_by(|a, b| (a.timestamp, &a.doc_id).cmp(&(b.timestamp, &b.doc_id)));

    let mut queries = Vec::new();
    for (gi, seg) in segments.iter().enumerate() {
        let seg_len = seg.end.unwrap_or(range_end).days_since(seg.start).max(1);
        let entity = &names[seg.entity];
        queries.push(EvalQuery {
            id: gi,
            text: format!("{entity} CEO"),
            at: seg.start.plus_days(rng.gen_range(0..seg_len)),
            key: ceo_key(entity),
            gold: gi,
        });
    }
    Ok(Corpus {
        documents,
        gold,
        queries,
    })
}

pub fn ceo_key(entity: &str) -> NuggetKey {
    NuggetKey {
        subject_norm: fold(entity),
        predicate: CEO_PREDICATE.to_string(),
        scope: Scope::Global,
    }
}

fn compose(rng: &mut ChaCha8Rng, fillers: usize, entity: &str, org: &str, statement: &str) -> String {
    let mut sentences: Vec<String> = (0..fillers).map(|_| filler(rng, entity, org)).collect();
    let at = rng.gen_range(0..=sentences.len());
    sentences.insert(at, statement.to_string());
    sentences.join(" ")
}

/// A ready-made record set for load and size tests, with one text query
/// and time per `queries`.
pub struct SyntheticStore {
    pub records: Vec<NuggetRecord>,
    pub queries: Vec<(String, Day)>,
}

/// `n` CEO records over entities with ten successive values each; every
/// tenth record is Deprecated.
pub fn synthetic_store(n: usize, queries: usize, seed: u64) -> Result<SyntheticStore> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = Day::from_ymd(1980, 1, 1).expect("date");
    let per_entity = 10usize;
    let entities = n.div_ceil(per_entity);
    let mut names = Vec::with_capacity(entities);
    'outer: for f in FIRST {
        for m in 'A'..='Z' {
            for l in LAST {
                if names.len() == entities {
                    break 'outer;
                }
                names.push(format!("{f} {m}. {l}"));
            }
        }
    }
    if names.len() < entities {
        return Err(Error::InvalidInput(format!("at most {} records", FIRST.len() * 26 * LAST.len() * per_entity)));
    }
    let mut records = Vec::with_capacity(n);
    for (e, name) in names.iter().enumerate() {
        let mut t = start.plus_days(rng.gen_range(0..365));
        for i in 0..per_entity {
            if records.len() == n {
                break;
            }
            let org = ORGS[(e + i * 7) % ORGS.len()];
            let next = t.plus_days(rng.gen_range(400..1600));
            let mut validity = ValidityInterval::new(t, if i + 1 == per_entity { End::Open } else { End::At(next) });
            validity.scope = Scope::Global;
            let fact = FactTriple {
                subject_raw: name.clone(),
                subject_norm: fold(name),
                predicate: CEO_PREDICATE.to_string(),
                object_raw: org.to_string(),
                object_norm: fold(org),
            };
            let mut epistemic = EpistemicState::active();
            if records.len() % 10 == 9 {
                epistemic.set_status(Status::Deprecated);
            }
            let doc_id = format!("s{e:05}-{i}");
            records.push(NuggetRecord {
                id: compute_nugget_id(NuggetKind::SemanticFact, &fact, &validity.scope, t)?,
                kind: NuggetKind::SemanticFact,
                text: format!("Since {}, {name} has been the CEO of {org}.", long_form(t)),
                fact,
                validity,
                epistemic,
                provenance: Provenance {
                    evidence: vec![Evidence {
                        doc_id,
                        revision_id: None,
                        span_start: 0,
                        span_end: 40,
                        doc_time: t,
                        source_type: SourceType::Primary,
                    }],
                    created_at: t,
                    extractor_id: "synthetic".into(),
                    parent_id: None,
                },
                access_count: 0,
            });
            t = next;
        }
    }
    let end = start.plus_days(365 * 40);
    let queries = (0..queries)
        .map(|_| {
            let name = &names[rng.gen_range(0..names.len())];
            (format!("{name} CEO"), start.plus_days(rng.gen_range(0..end.days_since(start))))
        })
        .collect();
    Ok(SyntheticStore { records, queries })
}
