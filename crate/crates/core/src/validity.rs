//! Validity interval inference: temporal tagging, revision tightening and
//! conflict-based refinement of functional facts.

use std::sync::LazyLock;

use regex::Regex;

use crate::canonicalize::{fold, Cardinality};
use crate::dates::{parse_date_phrase, Day, End, DATE_PATTERN};
use crate::error::{Error, Result};
use crate::extraction::{char_offset, slice_chars, Document, Span};
use crate::governance::values_match;
use crate::model::{NuggetKind, NuggetRecord, Scope, Status, ValidityInterval};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemporalClass {
    Start,
    End,
    Point,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemporalExpression {
    /// Character span of the date inside the tagged text.
    pub span: Span,
    pub date: Day,
    pub class: TemporalClass,
}

static DATE_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(&DATE_PATTERN).expect("date regex"));
static START_TRIGGER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(?:since|from|starting|as of)\s+$").expect("start trigger"));
static END_TRIGGER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\b(?:until|through)\s+$").expect("end trigger"));
static TO_TRIGGER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\bto\s+$").expect("to trigger"));
static FROM_TRIGGER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)\bfrom\s+$").expect("from trigger"));

/// Finds date expressions and classifies each by its trigger word.
/// `to D` counts as an end only after a `from D`.
pub fn tag_temporal_expressions(text: &str) -> Vec<TemporalExpression> {
    let mut out = Vec::new();
    let mut seen_from = false;
    for m in DATE_RE.find_iter(text) {
        let Some(date) = parse_date_phrase(m.as_str()) else { continue };
        let before = &text[..m.start()];
        let class = if START_TRIGGER.is_match(before) {
            if FROM_TRIGGER.is_match(before) {
                seen_from = true;
            }
            TemporalClass::Start
        } else if END_TRIGGER.is_match(before) || (seen_from && TO_TRIGGER.is_match(before)) {
            TemporalClass::End
        } else {
            TemporalClass::Point
        };
        let start = char_offset(text, m.start());
        out.push(TemporalExpression {
            span: (start, start + m.as_str().chars().count()),
            date,
            class,
        });
    }
    out
}

/// What validity inference needs to know about one candidate.
#[derive(Debug, Clone)]
pub struct ValidityInput<'a> {
    /// Canonical statement text (pronouns substituted).
    pub text: &'a str,
    pub kind: NuggetKind,
    /// Character span of the evidence inside `document`.
    pub evidence_span: Span,
    pub object_norm: &'a str,
    pub scope: Scope,
}

/// Statement presence in a revision: folded substring containment.
fn present_in(revision: &Document, needle: &str) -> bool {
    !needle.is_empty() && fold(&revision.text).contains(needle)
}

/// Assigns `[t_start, t_end)` to a candidate.
///
/// 1. Explicit START (else POINT, else the document time) sets the start;
///    explicit END (else OPEN) sets the end.
/// 2. For each consecutive revision pair, a statement that disappears
///    pulls the end in to the later revision's time, and one that appears
///    pushes the start out to it.
/// 3. For functional predicates, every same-key rival with a different
///    value, a later start and at least two sources caps the end at the
///    rival's start.
///
/// `history` is the revision chain of `document`, time-ordered; `rivals`
/// are indexed records sharing the candidate's key.
pub fn infer_validity(
    input: &ValidityInput<'_>,
    document: &Document,
    history: &[&Document],
    rivals: &[&NuggetRecord],
    cardinality: Cardinality,
) -> Result<ValidityInterval> {
    let tags = tag_temporal_expressions(input.text);
    let first = |class| tags.iter().find(|t| t.class == class).map(|t| t.date);

    let (mut t_start, start_inferred) = match first(TemporalClass::Start).or_else(|| first(TemporalClass::Point)) {
        Some(d) => (d, false),
        None => (document.timestamp, true),
    };
    let (mut t_end, mut end_inferred) = match first(TemporalClass::End) {
        Some(d) => (End::At(d), false),
        None => (End::Open, true),
    };
    let point_only = first(TemporalClass::Start).is_none() && first(TemporalClass::Point).is_some();
    if input.kind == NuggetKind::EpisodicEvent && point_only && t_end == End::Open {
        t_end = End::At(t_start.plus_days(1));
        end_inferred = true;
    }

    if history.len() > 1 {
        let needle = fold(slice_chars(&document.text, input.evidence_span.0, input.evidence_span.1));
        for pair in history.windows(2) {
            let (older, newer) = (pair[0], pair[1]);
            let (was, is) = (present_in(older, &needle), present_in(newer, &needle));
            if was && !is {
                t_end = t_end.earlier(End::At(newer.timestamp));
            }
            if !was && is {
                t_start = t_start.max(newer.timestamp);
            }
        }
    }

    if cardinality.is_functional() {
        t_end = refine_by_rivals(t_start, t_end, input.object_norm, rivals);
    }

    let mut validity = ValidityInterval::new(t_start, t_end);
    validity.scope = input.scope.clone();
    validity.source_type = document.source_type;
    validity.start_inferred = start_inferred;
    validity.end_inferred = end_inferred;
    if validity.is_degenerate() {
        return Err(Error::DegenerateInterval(format!(
            "[{}, {}) for {:?}",
            validity.t_start, validity.t_end, input.text
        )));
    }
    Ok(validity)
}

/// Caps `t_end` at the start of the earliest later, well-supported rival
/// holding a different value. Deprecated rivals are ignored.
pub fn refine_by_rivals(t_start: Day, t_end: End, object_norm: &str, rivals: &[&NuggetRecord]) -> End {
    rivals
        .iter()
        .filter(|r| r.epistemic.status != Status::Deprecated)
        .filter(|r| !values_match(&r.fact.object_norm, object_norm))
        .filter(|r| r.validity.t_start > t_start && r.evidence_count() >= 2)
        .fold(t_end, |end, r| end.earlier(End::At(r.validity.t_start)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{day, record};
    use crate::model::{Evidence, SourceType};

    fn doc(id: &str, ts: &str, text: &str) -> Document {
        Document {
            doc_id: id.into(),
            timestamp: day(ts),
            text: text.into(),
            revision_of: None,
            source_type: SourceType::Primary,
        }
    }

    fn input<'a>(text: &'a str, span: Span) -> ValidityInput<'a> {
        ValidityInput {
            text,
            kind: NuggetKind::SemanticFact,
            evidence_span: span,
            object_norm: "acme",
            scope: Scope::Global,
        }
    }

    #[test]
    fn tags_since() {
        let t = tag_temporal_expressions("since 2019");
        assert_eq!(t, vec![TemporalExpression { span: (6, 10), date: day("2019-01-01"), class: TemporalClass::Start }]);
    }

    #[test]
    fn tags_from_to() {
        let t = tag_temporal_expressions("from 2018 to 2021");
        let got: Vec<_> = t.iter().map(|e| (e.date, e.class)).collect();
        assert_eq!(got, vec![(day("2018-01-01"), TemporalClass::Start), (day("2021-01-01"), TemporalClass::End)]);
    }

    #[test]
    fn tags_nothing_and_points() {
        assert!(tag_temporal_expressions("no dates here").is_empty());
        let t = tag_temporal_expressions("Acme moved to Berlin on March 5, 2020 and to Paris in 2021");
        assert!(t.iter().all(|e| e.class == TemporalClass::Point));
        let t = tag_temporal_expressions("until 5 March 2020");
        assert_eq!(t[0].class, TemporalClass::End);
        assert_eq!(t[0].date, day("2020-03-05"));
    }

    #[test]
    fn explicit_start_open_end() {
        let text = "Since 2019, Alice has been CEO of Acme";
        let d = doc("d", "2021-03-01", text);
        let v = infer_validity(&input(text, (0, 38)), &d, &[&d], &[], Cardinality::Functional).unwrap();
        assert_eq!((v.t_start, v.t_end), (day("2019-01-01"), End::Open));
        assert!(!v.start_inferred && v.end_inferred);
    }

    #[test]
    fn revision_drop_closes_interval() {
        let text = "Alice is the CEO of Acme.";
        let r1 = doc("d", "2021-03-01", "Alice is the CEO of Acme. Filler.");
        let r2 = doc("d2", "2022-01-15", "Filler.");
        let v = infer_validity(&input(text, (0, 25)), &r1, &[&r1, &r2], &[], Cardinality::Functional).unwrap();
        assert_eq!((v.t_start, v.t_end), (day("2021-03-01"), End::At(day("2022-01-15"))));
        assert!(v.start_inferred);
    }

    #[test]
    fn revision_appearance_moves_start() {
        let text = "Alice is the CEO of Acme.";
        let r1 = doc("d", "2021-03-01", "Filler.");
        let r2 = doc("d2", "2021-09-01", "Filler. Alice is the CEO of Acme.");
        let v = infer_validity(&input(text, (8, 33)), &r2, &[&r1, &r2], &[], Cardinality::Functional).unwrap();
        assert_eq!(v.t_start, day("2021-09-01"));
    }

    fn rival(start: &str, sources: usize) -> NuggetRecord {
        let mut r = record("Alice", "chiefExecutiveOfficer", "Globex", start, None);
        r.provenance.evidence = (0..sources)
            .map(|i| Evidence {
                doc_id: format!("src{i}"),
                revision_id: None,
                span_start: 0,
                span_end: 5,
                doc_time: day(start),
                source_type: SourceType::Primary,
            })
            .collect();
        r
    }

    #[test]
    fn conflict_refinement_needs_two_sources() {
        let text = "Since 2019, Alice has been CEO of Acme";
        let d = doc("d", "2019-03-01", text);
        let strong = rival("2022-06-01", 2);
        let v = infer_validity(&input(text, (0, 38)), &d, &[&d], &[&strong], Cardinality::Functional).unwrap();
        assert_eq!(v.t_end, End::At(day("2022-06-01")));

        let weak = rival("2022-06-01", 1);
        let v = infer_validity(&input(text, (0, 38)), &d, &[&d], &[&weak], Cardinality::Functional).unwrap();
        assert_eq!(v.t_end, End::Open);

        let v = infer_validity(&input(text, (0, 38)), &d, &[&d], &[&strong], Cardinality::MultiValued).unwrap();
        assert_eq!(v.t_end, End::Open);
    }

    #[test]
    fn episodic_point_spans_one_day() {
        let text = "Carol became CEO of Initech in 2020";
        let d = doc("d", "2021-01-01", text);
        let mut i = input(text, (0, 35));
        i.kind = NuggetKind::EpisodicEvent;
        let v = infer_validity(&i, &d, &[&d], &[], Cardinality::Functional).unwrap();
        assert_eq!((v.t_start, v.t_end), (day("2020-01-01"), End::At(day("2020-01-02"))));
        assert!(v.end_inferred);
    }

    #[test]
    fn degenerate_interval_is_an_error() {
        let text = "From 2021 to 2019, Alice was CEO of Acme";
        let d = doc("d", "2021-01-01", text);
        let err = infer_validity(&input(text, (0, 40)), &d, &[&d], &[], Cardinality::Functional);
        assert!(matches!(err, Err(Error::DegenerateInterval(_))));
    }

    #[test]
    fn tightening_is_monotone() {
        let text = "Since 2019, Alice has been CEO of Acme.";
        let r1 = doc("d", "2019-06-01", text);
        let r2 = doc("d2", "2023-01-01", "gone");
        let base = infer_validity(&input(text, (0, 39)), &r1, &[&r1], &[], Cardinality::Functional).unwrap();
        let strong = rival("2021-06-01", 3);
        let tight = infer_validity(&input(text, (0, 39)), &r1, &[&r1, &r2], &[&strong], Cardinality::Functional).unwrap();
        assert!(tight.t_start >= base.t_start);
        assert!(tight.t_end <= base.t_end);
        assert_eq!(tight.t_end, End::At(day("2021-06-01")));
    }
}
