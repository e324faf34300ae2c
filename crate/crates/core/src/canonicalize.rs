//! Canonicalization: alias resolution, predicate schema mapping, object
//! normalization, nugget keys, and starter-schema discovery.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dates::{parse_date_phrase, Day};
use crate::error::{Error, Result};
use crate::extraction::{extract_document, CandidateNugget, Document, Extractor};
use crate::model::{NuggetKey, Scope};
use crate::validity::{tag_temporal_expressions, TemporalClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cardinality {
    Functional,
    MultiValued,
    EventLog,
}

impl Cardinality {
    /// Only functional predicates admit one value at a time.
    pub fn is_functional(self) -> bool {
        self == Cardinality::Functional
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateSchema {
    pub canonical_name: String,
    pub aliases: Vec<String>,
    pub subject_type: String,
    pub object_type: String,
    pub cardinality: Cardinality,
}

/// A loaded, validated predicate vocabulary.
#[derive(Debug, Clone, Default)]
pub struct Schema {
    entries: Vec<PredicateSchema>,
    by_name: HashMap<String, usize>,
    /// (normalized alias, entry index), longest alias first.
    aliases: Vec<(String, usize)>,
}

impl Schema {
    pub fn new(entries: Vec<PredicateSchema>) -> Result<Schema> {
        let mut by_name = HashMap::new();
        let mut aliases = Vec::new();
        let mut cleaned = Vec::with_capacity(entries.len());
        for (i, mut e) in entries.into_iter().enumerate() {
            if e.canonical_name.trim().is_empty() {
                return Err(Error::Config("schema entry with empty canonical_name".into()));
            }
            if by_name.insert(e.canonical_name.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate predicate {:?}", e.canonical_name)));
            }
            for a in &mut e.aliases {
                *a = a.to_lowercase();
            }
            for a in e.aliases.iter().chain(std::iter::once(&e.canonical_name)) {
                let norm = strip_auxiliaries(&a.to_lowercase());
                if !norm.is_empty() {
                    aliases.push((norm, i));
                }
            }
            cleaned.push(e);
        }
        aliases.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
        aliases.dedup();
        Ok(Schema {
            entries: cleaned,
            by_name,
            aliases,
        })
    }

    pub fn from_json(json: &str) -> Result<Schema> {
        Schema::new(serde_json::from_str(json)?)
    }

    pub fn load(path: &Path) -> Result<Schema> {
        Schema::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn entries(&self) -> &[PredicateSchema] {
        &self.entries
    }

    pub fn get(&self, canonical: &str) -> Option<&PredicateSchema> {
        self.by_name.get(canonical).map(|&i| &self.entries[i])
    }

    pub fn cardinality(&self, canonical: &str) -> Option<Cardinality> {
        self.get(canonical).map(|e| e.cardinality)
    }

    /// Returns a copy with one predicate's cardinality replaced.
    pub fn with_cardinality(&self, canonical: &str, cardinality: Cardinality) -> Result<Schema> {
        let mut entries = self.entries.clone();
        let e = entries
            .iter_mut()
            .find(|e| e.canonical_name == canonical)
            .ok_or_else(|| Error::Config(format!("unknown predicate {canonical:?}")))?;
        e.cardinality = cardinality;
        Schema::new(entries)
    }

    /// The vocabulary the synthetic corpus and fixtures use.
    pub fn reference() -> Schema {
        let entry = |name: &str, aliases: &[&str], s: &str, o: &str, c| PredicateSchema {
            canonical_name: name.into(),
            aliases: aliases.iter().map(|a| a.to_string()).collect(),
            subject_type: s.into(),
            object_type: o.into(),
            cardinality: c,
        };
        Schema::new(vec![
            entry(
                "chiefExecutiveOfficer",
                &["is the CEO of", "CEO of", "chief executive officer of", "chief executive of", "leader of"],
                "person",
                "org",
                Cardinality::Functional,
            ),
            entry("chiefTechnologyOfficer", &["is the CTO of", "CTO of"], "person", "org", Cardinality::Functional),
            entry("boardMember", &["is a board member of", "board member of", "director of"], "person", "org", Cardinality::MultiValued),
            entry("headquarteredIn", &["is headquartered in", "headquartered in"], "org", "place", Cardinality::Functional),
            entry("founded", &["founded"], "person", "org", Cardinality::EventLog),
            entry("acquired", &["acquired", "bought"], "org", "org", Cardinality::EventLog),
        ])
        .expect("reference schema is valid")
    }
}

/// Marker for predicates with no schema alias.
pub const UNMAPPED: &str = "UNMAPPED";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PredicateMatch {
    Mapped(String),
    Unmapped,
}

impl PredicateMatch {
    pub fn name(&self) -> &str {
        match self {
            PredicateMatch::Mapped(n) => n,
            PredicateMatch::Unmapped => UNMAPPED,
        }
    }
}

/// Surface form (case-folded) to canonical entity name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AliasTable {
    map: HashMap<String, String>,
}

impl AliasTable {
    pub fn new<I, K, V>(pairs: I) -> AliasTable
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut map = HashMap::new();
        for (k, v) in pairs {
            let canonical = fold(v.as_ref());
            map.insert(fold(k.as_ref()), canonical.clone());
            map.insert(canonical.clone(), canonical);
        }
        AliasTable { map }
    }

    pub fn from_json(json: &str) -> Result<AliasTable> {
        let m: BTreeMap<String, String> = serde_json::from_str(json)?;
        Ok(AliasTable::new(m))
    }

    pub fn load(path: &Path) -> Result<AliasTable> {
        AliasTable::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn resolve(&self, folded: &str) -> Option<&str> {
        self.map
            .get(folded)
            .or_else(|| self.map.get(folded.trim_end_matches(['.', ','])))
            .map(String::as_str)
    }

    pub fn contains(&self, folded: &str) -> bool {
        self.resolve(folded).is_some()
    }
}

/// Case-fold and collapse whitespace.
pub fn fold(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

pub fn normalize_subject(raw: &str, aliases: &AliasTable) -> String {
    let folded = fold(raw);
    match aliases.resolve(&folded) {
        Some(c) => c.to_string(),
        None => folded,
    }
}

const AUXILIARIES: [&str; 14] = [
    "has been", "have been", "had been", "is", "was", "are", "were", "became", "becomes", "remains", "remained", "be",
    "has", "had",
];
const ARTICLES: [&str; 3] = ["the", "a", "an"];

fn strip_auxiliaries(s: &str) -> String {
    let mut rest = s.trim();
    'outer: loop {
        for aux in AUXILIARIES.iter().chain(ARTICLES.iter()) {
            if let Some(r) = rest.strip_prefix(aux) {
                if r.is_empty() || r.starts_with(' ') {
                    rest = r.trim_start();
                    continue 'outer;
                }
            }
        }
        break;
    }
    rest.to_string()
}

fn contains_phrase(haystack: &str, needle: &str) -> bool {
    haystack == needle
        || haystack.starts_with(&format!("{needle} "))
        || haystack.ends_with(&format!(" {needle}"))
        || haystack.contains(&format!(" {needle} "))
}

/// Longest alias match after case-folding and stripping auxiliaries.
pub fn normalize_predicate(raw: &str, schema: &Schema) -> PredicateMatch {
    if schema.get(raw.trim()).is_some() {
        return PredicateMatch::Mapped(raw.trim().to_string());
    }
    let norm = strip_auxiliaries(&fold(raw));
    if norm.is_empty() {
        return PredicateMatch::Unmapped;
    }
    schema
        .aliases
        .iter()
        .find(|(alias, _)| contains_phrase(&norm, alias))
        .map(|&(_, i)| PredicateMatch::Mapped(schema.entries[i].canonical_name.clone()))
        .unwrap_or(PredicateMatch::Unmapped)
}

/// Date-like objects become ISO-8601; others resolve like subjects.
pub fn normalize_object(raw: &str, aliases: &AliasTable) -> String {
    let trimmed = raw.trim().trim_end_matches(['.', ',']);
    if let Some(d) = parse_date_phrase(trimmed) {
        return d.to_string();
    }
    normalize_subject(raw, aliases)
}

pub fn compute_key(subject_norm: &str, predicate: &PredicateMatch, scope: &Scope) -> Result<NuggetKey> {
    match predicate {
        PredicateMatch::Unmapped => Err(Error::KeyUnavailable(UNMAPPED.into())),
        PredicateMatch::Mapped(p) => {
            if subject_norm.is_empty() {
                return Err(Error::InvalidInput("empty subject".into()));
            }
            Ok(NuggetKey {
                subject_norm: subject_norm.to_string(),
                predicate: p.clone(),
                scope: scope.clone(),
            })
        }
    }
}

/// A candidate with normalized fields.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalCandidate {
    pub candidate: CandidateNugget,
    pub subject_norm: String,
    pub predicate: PredicateMatch,
    pub object_norm: String,
}

pub fn canonicalize(candidate: CandidateNugget, schema: &Schema, aliases: &AliasTable) -> CanonicalCandidate {
    CanonicalCandidate {
        subject_norm: normalize_subject(&candidate.subject_raw, aliases),
        predicate: normalize_predicate(&candidate.predicate_raw, schema),
        object_norm: normalize_object(&candidate.object_raw, aliases),
        candidate,
    }
}

// ---------------------------------------------------------------------------
// Schema discovery
// ---------------------------------------------------------------------------

pub const DEFAULT_MIN_SUPPORT: usize = 3;

const ORG_SUFFIXES: [&str; 12] = [
    "inc", "inc.", "corp", "corp.", "corporation", "ltd", "llc", "company", "group", "labs", "systems", "industries",
];
const PLACES: [&str; 16] = [
    "berlin", "paris", "london", "tokyo", "new york", "san francisco", "seattle", "boston", "chicago", "austin", "toronto",
    "sydney", "madrid", "rome", "dublin", "singapore",
];

/// Coarse entity-type tag: person, org, place, date or other.
pub fn entity_type(raw: &str, aliases: &AliasTable) -> &'static str {
    let trimmed = raw.trim().trim_end_matches(['.', ',']);
    if parse_date_phrase(trimmed).is_some() {
        return "date";
    }
    let folded = fold(trimmed);
    if PLACES.contains(&folded.as_str()) {
        return "place";
    }
    let words: Vec<&str> = trimmed.split_whitespace().collect();
    if words.last().is_some_and(|w| ORG_SUFFIXES.contains(&w.to_lowercase().as_str())) {
        return "org";
    }
    let capitalized = !words.is_empty() && words.iter().all(|w| w.chars().next().is_some_and(char::is_uppercase));
    match (capitalized, words.len()) {
        (true, 2 | 3) => "person",
        (true, 1) => "org",
        _ if aliases.contains(&folded) => "org",
        _ => "other",
    }
}

const PREPOSITIONS: [&str; 5] = ["of", "for", "at", "in", "to"];

fn stem(word: &str) -> String {
    let w = word.to_lowercase();
    w.strip_suffix('s').filter(|s| s.len() > 2).map(str::to_string).unwrap_or(w)
}

/// Head of a predicate phrase: last content word after dropping
/// auxiliaries, articles, and a trailing preposition; stemmed.
fn predicate_phrase(raw: &str) -> Vec<String> {
    let norm = strip_auxiliaries(&fold(raw));
    let mut words: Vec<&str> = norm.split_whitespace().collect();
    while words.last().is_some_and(|w| PREPOSITIONS.contains(w)) {
        words.pop();
    }
    words.iter().map(|w| w.to_string()).collect()
}

fn camel_case(words: &[String]) -> String {
    let mut out = String::new();
    for (i, w) in words.iter().enumerate() {
        let clean: String = w.chars().filter(|c| c.is_alphanumeric()).collect();
        if i == 0 {
            out.push_str(&clean);
        } else {
            let mut cs = clean.chars();
            if let Some(f) = cs.next() {
                out.extend(f.to_uppercase());
                out.push_str(cs.as_str());
            }
        }
    }
    out
}

struct Assertion {
    subject: String,
    object: String,
    start: Day,
    end: Option<Day>,
}

impl Assertion {
    /// Explicit intervals when both ends are stated, else a point at start.
    fn concurrent(&self, other: &Assertion) -> bool {
        let (a0, a1) = (self.start, self.end.unwrap_or(self.start.plus_days(1)));
        let (b0, b1) = (other.start, other.end.unwrap_or(other.start.plus_days(1)));
        a0 < b1 && b0 < a1
    }
}

/// Proposes a draft schema from a document sample. Never applied
/// automatically.
pub fn discover_schema(sample: &[Document], extractor: &dyn Extractor, aliases: &AliasTable, min_support: usize) -> Result<Vec<PredicateSchema>> {
    struct Group {
        phrase: Vec<String>,
        surface: BTreeSet<String>,
        count: usize,
        assertions: Vec<Assertion>,
    }
    let mut groups: BTreeMap<(String, &'static str, &'static str), Group> = BTreeMap::new();
    for doc in sample {
        for c in extract_document(doc, extractor)? {
            let phrase = predicate_phrase(&c.predicate_raw);
            let Some(head) = phrase.last().map(|w| stem(w)) else { continue };
            let st = entity_type(&c.subject_raw, aliases);
            let ot = entity_type(&c.object_raw, aliases);
            let g = groups.entry((head, st, ot)).or_insert_with(|| Group {
                phrase: phrase.clone(),
                surface: BTreeSet::new(),
                count: 0,
                assertions: Vec::new(),
            });
            g.surface.insert(fold(&c.predicate_raw));
            g.count += 1;
            let tags = tag_temporal_expressions(&c.text);
            let start = tags
                .iter()
                .find(|t| t.class == TemporalClass::Start)
                .or_else(|| tags.iter().find(|t| t.class == TemporalClass::Point))
                .map(|t| t.date)
                .unwrap_or(doc.timestamp);
            let end = tags.iter().find(|t| t.class == TemporalClass::End).map(|t| t.date);
            g.assertions.push(Assertion {
                subject: normalize_subject(&c.subject_raw, aliases),
                object: normalize_object(&c.object_raw, aliases),
                start,
                end,
            });
        }
    }
    let mut out = Vec::new();
    let mut used_names = BTreeSet::new();
    for ((_, st, ot), g) in groups {
        if g.count < min_support {
            continue;
        }
        let multi = g.assertions.iter().enumerate().any(|(i, a)| {
            g.assertions[i + 1..]
                .iter()
                .any(|b| a.subject == b.subject && a.object != b.object && a.concurrent(b))
        });
        let mut name = camel_case(&g.phrase);
        if !used_names.insert(name.clone()) {
            let mut words = g.phrase.clone();
            words.extend([st.to_string(), ot.to_string()]);
            name = camel_case(&words);
            used_names.insert(name.clone());
        }
        out.push(PredicateSchema {
            canonical_name: name,
            aliases: g.surface.into_iter().collect(),
            subject_type: st.into(),
            object_type: ot.into(),
            cardinality: if multi { Cardinality::MultiValued } else { Cardinality::Functional },
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extraction::RuleExtractor;
    use crate::model::SourceType;

    fn aliases() -> AliasTable {
        AliasTable::new([("USA", "United States"), ("Acme Corp.", "acme")])
    }

    #[test]
    fn subject_normalization() {
        let a = aliases();
        assert_eq!(normalize_subject("USA", &a), "united states");
        assert_eq!(normalize_subject("united states", &a), "united states");
        assert_eq!(normalize_subject("  Alice   Ng ", &a), "alice ng");
    }

    #[test]
    fn predicate_normalization() {
        let s = Schema::reference();
        assert_eq!(normalize_predicate("is the CEO of", &s), PredicateMatch::Mapped("chiefExecutiveOfficer".into()));
        assert_eq!(normalize_predicate("has been the CEO of", &s).name(), "chiefExecutiveOfficer");
        assert_eq!(normalize_predicate("chiefExecutiveOfficer", &s).name(), "chiefExecutiveOfficer");
        assert_eq!(normalize_predicate("collects stamps", &s), PredicateMatch::Unmapped);
        assert_eq!(normalize_predicate("is a board member of", &s).name(), "boardMember");
    }

    #[test]
    fn object_normalization() {
        let a = aliases();
        assert_eq!(normalize_object("March 5, 2020", &a), "2020-03-05");
        assert_eq!(normalize_object("Acme Corp.", &a), "acme");
        assert_eq!(normalize_object("2020", &a), "2020-01-01");
        assert_eq!(normalize_object("5 March 2020", &a), "2020-03-05");
    }

    #[test]
    fn keys_exclude_object_and_include_scope() {
        let p = PredicateMatch::Mapped("chiefExecutiveOfficer".into());
        let a = compute_key("alice ng", &p, &Scope::Global).unwrap();
        let b = compute_key("alice ng", &p, &Scope::Global).unwrap();
        assert_eq!(a, b);
        let u = compute_key("alice ng", &p, &Scope::User("7".into())).unwrap();
        assert_ne!(a, u);
        assert!(matches!(compute_key("alice ng", &PredicateMatch::Unmapped, &Scope::Global), Err(Error::KeyUnavailable(_))));
    }

    #[test]
    fn paraphrases_share_key() {
        let s = Schema::reference();
        let a = AliasTable::new([("Pichai", "Sundar Pichai")]);
        let k1 = compute_key(&normalize_subject("Sundar Pichai", &a), &normalize_predicate("is the CEO of", &s), &Scope::Global).unwrap();
        let k2 = compute_key(&normalize_subject("Pichai", &a), &normalize_predicate("leader of", &s), &Scope::Global).unwrap();
        assert_eq!(k1, k2);
    }

    #[test]
    fn schema_json_and_validation() {
        let json = r#"[{"canonical_name":"x","aliases":["Is X Of"],"subject_type":"person","object_type":"org","cardinality":"multi_valued"}]"#;
        let s = Schema::from_json(json).unwrap();
        assert_eq!(s.entries()[0].aliases, ["is x of"]);
        assert_eq!(s.cardinality("x"), Some(Cardinality::MultiValued));
        let dup = r#"[{"canonical_name":"x","aliases":[],"subject_type":"a","object_type":"b","cardinality":"functional"},
                      {"canonical_name":"x","aliases":[],"subject_type":"a","object_type":"b","cardinality":"event_log"}]"#;
        assert!(Schema::from_json(dup).is_err());
    }

    #[test]
    fn alias_idempotence() {
        let a = aliases();
        for x in ["USA", "Acme Corp.", "Bob", "  SOME  thing "] {
            let once = normalize_subject(x, &a);
            assert_eq!(normalize_subject(&once, &a), once);
        }
    }

    fn doc(id: &str, ts: &str, text: &str) -> Document {
        Document {
            doc_id: id.into(),
            timestamp: ts.parse().unwrap(),
            text: text.into(),
            revision_of: None,
            source_type: SourceType::Primary,
        }
    }

    #[test]
    fn discovers_functional_predicate() {
        // five docs, one CEO per subject per time
        let sample = vec![
            doc("1", "2015-01-01", "Alice Ng is CEO of Acme."),
            doc("2", "2016-01-01", "Bob Li is CEO of Globex."),
            doc("3", "2017-01-01", "Alice Ng is CEO of Initech."),
            doc("4", "2018-01-01", "Carol Wu is CEO of Hooli."),
            doc("5", "2019-01-01", "Bob Li is CEO of Umbrella."),
        ];
        let out = discover_schema(&sample, &RuleExtractor, &AliasTable::default(), DEFAULT_MIN_SUPPORT).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].canonical_name, "ceo");
        assert_eq!(out[0].aliases, ["is ceo of"]);
        assert_eq!((out[0].subject_type.as_str(), out[0].object_type.as_str()), ("person", "org"));
        assert_eq!(out[0].cardinality, Cardinality::Functional);
    }

    #[test]
    fn discovers_multi_valued_predicate() {
        let sample = vec![doc(
            "1",
            "2020-01-01",
            "Alice Ng is a board member of Acme. Alice Ng is a board member of Globex. Alice Ng is a board member of Initech. Dan Po collects stamps.",
        )];
        let out = discover_schema(&sample, &RuleExtractor, &AliasTable::default(), DEFAULT_MIN_SUPPORT).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].canonical_name, "boardMember");
        assert_eq!(out[0].cardinality, Cardinality::MultiValued);
    }

    #[test]
    fn discovery_excludes_rare_forms() {
        let sample = vec![doc("1", "2020-01-01", "Alice Ng is the CTO of Acme.")];
        assert!(discover_schema(&sample, &RuleExtractor, &AliasTable::default(), DEFAULT_MIN_SUPPORT).unwrap().is_empty());
        assert!(discover_schema(&[], &RuleExtractor, &AliasTable::default(), DEFAULT_MIN_SUPPORT).unwrap().is_empty());
    }

    #[test]
    fn entity_types() {
        let a = AliasTable::default();
        assert_eq!(entity_type("Alice Ng", &a), "person");
        assert_eq!(entity_type("Acme", &a), "org");
        assert_eq!(entity_type("Acme Corp.", &a), "org");
        assert_eq!(entity_type("Berlin", &a), "place");
        assert_eq!(entity_type("2020", &a), "date");
        assert_eq!(entity_type("blue", &a), "other");
    }
}
