//! The nugget record and its vocabulary.
//!
//! A nugget is an atomic fact triple with a half-open validity interval,
//! an epistemic state, and provenance back to source spans. Everything
//! downstream (governance, indexing, retrieval) consumes these types.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::dates::{Day, End};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NuggetKind {
    SemanticFact,
    EpisodicEvent,
    Instruction,
    UserPreference,
}

impl NuggetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NuggetKind::SemanticFact => "SemanticFact",
            NuggetKind::EpisodicEvent => "EpisodicEvent",
            NuggetKind::Instruction => "Instruction",
            NuggetKind::UserPreference => "UserPreference",
        }
    }
}

/// 128-bit content hash, rendered as 32 lowercase hex digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NuggetId(pub u128);

impl fmt::Display for NuggetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:032x}", self.0)
    }
}

impl FromStr for NuggetId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.len() != 32 {
            return Err(Error::InvalidInput(format!("nugget id must be 32 hex digits: {s:?}")));
        }
        u128::from_str_radix(s, 16)
            .map(NuggetId)
            .map_err(|_| Error::InvalidInput(format!("bad nugget id {s:?}")))
    }
}

impl Serialize for NuggetId {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NuggetId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactTriple {
    pub subject_raw: String,
    pub subject_norm: String,
    pub predicate: String,
    pub object_raw: String,
    pub object_norm: String,
}

/// Applicability scope of a fact; part of the nugget key.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum Scope {
    #[default]
    Global,
    User(String),
    Group(String),
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::Global => f.write_str("global"),
            Scope::User(id) => write!(f, "user:{id}"),
            Scope::Group(id) => write!(f, "group:{id}"),
        }
    }
}

impl FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s == "global" => Ok(Scope::Global),
            Some(("user", id)) if !id.is_empty() => Ok(Scope::User(id.to_string())),
            Some(("group", id)) if !id.is_empty() => Ok(Scope::Group(id.to_string())),
            _ => Err(Error::InvalidInput(format!("bad scope {s:?}"))),
        }
    }
}

impl Serialize for Scope {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Scope {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceType {
    #[default]
    Primary,
    Secondary,
    Derived,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityInterval {
    pub t_start: Day,
    pub t_end: End,
    #[serde(default)]
    pub scope: Scope,
    #[serde(default)]
    pub location: Option<String>,
    #[serde(default)]
    pub source_type: SourceType,
    #[serde(default)]
    pub start_inferred: bool,
    #[serde(default)]
    pub end_inferred: bool,
}

impl ValidityInterval {
    pub fn new(t_start: Day, t_end: End) -> Self {
        ValidityInterval {
            t_start,
            t_end,
            scope: Scope::Global,
            location: None,
            source_type: SourceType::Primary,
            start_inferred: false,
            end_inferred: false,
        }
    }

    pub fn contains(&self, t: Day) -> bool {
        self.t_start <= t && self.t_end.is_after(t)
    }

    /// Half-open intersection test.
    pub fn overlaps(&self, other: &ValidityInterval) -> bool {
        other.t_end.is_after(self.t_start) && self.t_end.is_after(other.t_start)
    }

    pub fn is_degenerate(&self) -> bool {
        !self.t_end.is_after(self.t_start)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Active,
    Deprecated,
    Contested,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rank {
    Preferred,
    Normal,
    Deprecated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpistemicState {
    pub status: Status,
    pub rank: Rank,
    pub confidence: f64,
}

pub const INITIAL_CONFIDENCE: f64 = 0.5;

impl EpistemicState {
    pub fn active() -> Self {
        EpistemicState {
            status: Status::Active,
            rank: Rank::Normal,
            confidence: INITIAL_CONFIDENCE,
        }
    }

    /// Sets the status, keeping `Deprecated => rank Deprecated`.
    pub fn set_status(&mut self, status: Status) {
        self.status = status;
        if status == Status::Deprecated {
            self.rank = Rank::Deprecated;
        } else if self.rank == Rank::Deprecated {
            self.rank = Rank::Normal;
        }
    }
}

/// Placeholder confidence rule: 0.5 plus 0.1 per additional evidence, capped.
pub fn confidence_for_evidence(evidence_count: usize) -> f64 {
    (INITIAL_CONFIDENCE + 0.1 * evidence_count.saturating_sub(1) as f64).min(1.0)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub doc_id: String,
    #[serde(default)]
    pub revision_id: Option<String>,
    pub span_start: usize,
    pub span_end: usize,
    pub doc_time: Day,
    #[serde(default)]
    pub source_type: SourceType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub evidence: Vec<Evidence>,
    pub created_at: Day,
    pub extractor_id: String,
    #[serde(default)]
    pub parent_id: Option<NuggetId>,
}

impl Provenance {
    /// Independent sources: distinct document ids. Revisions of one
    /// document share the chain root as `doc_id` and count once.
    pub fn independent_sources(&self) -> usize {
        let mut ids: Vec<&str> = self.evidence.iter().map(|e| e.doc_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NuggetRecord {
    pub id: NuggetId,
    pub kind: NuggetKind,
    pub fact: FactTriple,
    pub text: String,
    pub validity: ValidityInterval,
    pub epistemic: EpistemicState,
    pub provenance: Provenance,
    #[serde(default)]
    pub access_count: u64,
}

impl NuggetRecord {
    pub fn key(&self) -> NuggetKey {
        NuggetKey {
            subject_norm: self.fact.subject_norm.clone(),
            predicate: self.fact.predicate.clone(),
            scope: self.validity.scope.clone(),
        }
    }

    pub fn status(&self) -> Status {
        self.epistemic.status
    }

    pub fn evidence_count(&self) -> usize {
        self.provenance.independent_sources()
    }

    /// Recomputes the content id from the hashed fields.
    pub fn computed_id(&self) -> Result<NuggetId> {
        compute_nugget_id(self.kind, &self.fact, &self.validity.scope, self.validity.t_start)
    }
}

/// Conflict-detection join key. The object never participates.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NuggetKey {
    pub subject_norm: String,
    pub predicate: String,
    pub scope: Scope,
}

impl fmt::Display for NuggetKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.subject_norm, self.predicate, self.scope)
    }
}

/// Deterministic id over `kind|subject_norm|predicate|object_norm|scope|t_start`:
/// the first 128 bits of SHA-256.
pub fn compute_nugget_id(kind: NuggetKind, fact: &FactTriple, scope: &Scope, t_start: Day) -> Result<NuggetId> {
    if fact.subject_norm.is_empty() || fact.predicate.is_empty() {
        return Err(Error::InvalidInput("subject_norm and predicate must be non-empty".into()));
    }
    let material = format!(
        "{}|{}|{}|{}|{}|{}",
        kind.as_str(),
        fact.subject_norm,
        fact.predicate,
        fact.object_norm,
        scope,
        t_start
    );
    let digest = Sha256::digest(material.as_bytes());
    let mut bytes = [0u8; 16];
    bytes.copy_from_slice(&digest[..16]);
    Ok(NuggetId(u128::from_be_bytes(bytes)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum View {
    #[default]
    Active,
    ActivePlusContested,
}

impl FromStr for View {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "active" => Ok(View::Active),
            "active_plus_contested" | "active-plus-contested" => Ok(View::ActivePlusContested),
            _ => Err(Error::InvalidInput(format!("unknown view {s:?}"))),
        }
    }
}

pub fn status_visible(status: Status, view: View) -> bool {
    match status {
        Status::Active => true,
        Status::Contested => view == View::ActivePlusContested,
        Status::Deprecated => false,
    }
}

/// A record is retrievable at `t` iff `t` is in `[t_start, t_end)` and its
/// status is admitted by the view. Deprecated records never are.
pub fn is_retrievable(record: &NuggetRecord, t: Day, view: View) -> bool {
    record.validity.contains(t) && status_visible(record.epistemic.status, view)
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use proptest::prelude::*;

    fn fact(object_raw: &str, object_norm: &str) -> FactTriple {
        FactTriple {
            subject_raw: "Acme".into(),
            subject_norm: "acme".into(),
            predicate: "chiefExecutiveOfficer".into(),
            object_raw: object_raw.into(),
            object_norm: object_norm.into(),
        }
    }

    #[test]
    fn id_is_deterministic() {
        let t = day("2019-01-01");
        let a = compute_nugget_id(NuggetKind::SemanticFact, &fact("Alice", "alice"), &Scope::Global, t).unwrap();
        let b = compute_nugget_id(NuggetKind::SemanticFact, &fact("Alice", "alice"), &Scope::Global, t).unwrap();
        assert_eq!(a, b);
        // frozen value guards cross-platform stability of the serialization
        assert_eq!(a.to_string().len(), 32);
        assert_eq!(a.to_string().parse::<NuggetId>().unwrap(), a);
    }

    #[test]
    fn id_covers_object_norm_but_not_object_raw() {
        let t = day("2019-01-01");
        let a = compute_nugget_id(NuggetKind::SemanticFact, &fact("Alice", "alice"), &Scope::Global, t).unwrap();
        let b = compute_nugget_id(NuggetKind::SemanticFact, &fact("Alice", "bob"), &Scope::Global, t).unwrap();
        let c = compute_nugget_id(NuggetKind::SemanticFact, &fact("ALICE!", "alice"), &Scope::Global, t).unwrap();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn id_rejects_empty_key_fields() {
        let mut f = fact("Alice", "alice");
        f.predicate.clear();
        let err = compute_nugget_id(NuggetKind::SemanticFact, &f, &Scope::Global, day("2019-01-01"));
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn retrievability_rules() {
        let mut r = record("Acme", "chiefExecutiveOfficer", "Alice", "2019-01-01", None);
        assert!(is_retrievable(&r, day("2021-06-01"), View::Active));

        let closed = record("Acme", "chiefExecutiveOfficer", "Alice", "2019-01-01", Some("2020-01-01"));
        assert!(!is_retrievable(&closed, day("2020-01-01"), View::Active));
        assert!(is_retrievable(&closed, day("2019-01-01"), View::Active));

        r.epistemic.set_status(Status::Contested);
        assert!(!is_retrievable(&r, day("2021-06-01"), View::Active));
        assert!(is_retrievable(&r, day("2021-06-01"), View::ActivePlusContested));

        r.epistemic.set_status(Status::Deprecated);
        assert_eq!(r.epistemic.rank, Rank::Deprecated);
        assert!(!is_retrievable(&r, day("2021-06-01"), View::ActivePlusContested));
    }

    #[test]
    fn scope_round_trip() {
        for s in ["global", "user:7", "group:eng"] {
            assert_eq!(s.parse::<Scope>().unwrap().to_string(), s);
        }
        assert!("user:".parse::<Scope>().is_err());
    }

    #[test]
    fn export_json_shape() {
        let r = record("Acme", "chiefExecutiveOfficer", "Alice", "2019-01-01", None);
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["validity"]["t_end"], "OPEN");
        assert_eq!(v["validity"]["scope"], "global");
        assert_eq!(v["epistemic"]["status"], "Active");
        assert_eq!(v["kind"], "SemanticFact");
        assert!(v["fact"]["subject_norm"].is_string());
        assert!(v["provenance"]["parent_id"].is_null());
    }

    proptest! {
        #[test]
        fn half_open_boundaries(start in 0i64..20_000, len in 1i64..5_000) {
            let base = day("1970-01-01");
            let s = base.plus_days(start);
            let e = s.plus_days(len);
            let mut r = record("Acme", "p", "v", &s.to_string(), Some(&e.to_string()));
            prop_assert!(is_retrievable(&r, s, View::Active));
            prop_assert!(!is_retrievable(&r, e, View::Active));
            r.epistemic.set_status(Status::Deprecated);
            for view in [View::Active, View::ActivePlusContested] {
                prop_assert!(!is_retrievable(&r, s, view));
            }
        }

        #[test]
        fn id_survives_json_round_trip(subject in "[a-z]{1,12}", object in "[a-z ]{1,12}") {
            let r = record(&subject, "p", &object, "2020-02-02", None);
            let line = serde_json::to_string(&r).unwrap();
            let back: NuggetRecord = serde_json::from_str(&line).unwrap();
            prop_assert_eq!(back.id, r.id);
            prop_assert_eq!(back.computed_id().unwrap(), r.id);
        }
    }
}
