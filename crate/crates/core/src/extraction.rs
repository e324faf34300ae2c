//! Sentence segmentation, sliding context windows, and candidate
//! extraction.
//!
//! Spans are character offsets (Unicode scalar values) into the source
//! document text.

use std::sync::{Condvar, LazyLock, Mutex};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::dates::{Day, DATE_PATTERN};
use crate::error::{Error, Result};
use crate::model::{NuggetKind, SourceType};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub timestamp: Day,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revision_of: Option<String>,
    #[serde(default)]
    pub source_type: SourceType,
}

pub type Span = (usize, usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextWindow {
    pub doc_id: String,
    pub sentence_index: usize,
    /// Preceding sentence (if any), a space, then the current sentence.
    pub text: String,
    /// Character span of the current sentence in the document.
    pub current_span: Span,
    /// Byte offset of the current sentence inside `text`.
    pub current_offset: usize,
}

impl ContextWindow {
    pub fn current(&self) -> &str {
        &self.text[self.current_offset..]
    }

    pub fn preceding(&self) -> Option<&str> {
        (self.current_offset > 0).then(|| self.text[..self.current_offset].trim_end())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateNugget {
    pub text: String,
    pub subject_raw: String,
    pub predicate_raw: String,
    pub object_raw: String,
    pub evidence_span: Span,
    pub doc_id: String,
    pub kind_hint: NuggetKind,
}

pub fn char_offset(text: &str, byte: usize) -> usize {
    text[..byte].chars().count()
}

/// Slices `text` by character offsets. Out-of-range offsets clamp.
pub fn slice_chars(text: &str, start: usize, end: usize) -> &str {
    let mut indices = text.char_indices().map(|(b, _)| b).chain(std::iter::once(text.len()));
    let b_start = indices.by_ref().nth(start).unwrap_or(text.len());
    let b_end = if end > start {
        indices.nth(end - start - 1).unwrap_or(text.len())
    } else {
        b_start
    };
    &text[b_start..b_end]
}

const ABBREVIATIONS: [&str; 6] = ["Mr.", "Dr.", "Inc.", "vs.", "e.g.", "i.e."];

fn ends_with_abbreviation(text: &str, dot_byte: usize) -> bool {
    let word_start = text[..dot_byte].rfind(char::is_whitespace).map(|i| i + 1).unwrap_or(0);
    let word = &text[word_start..=dot_byte];
    ABBREVIATIONS.contains(&word)
}

/// Splits on `. `, `? `, `! ` (terminator followed by whitespace or end of
/// text) and on newlines, except after a guarded abbreviation.
pub fn segment_sentences(text: &str) -> Vec<(String, Span)> {
    let mut out = Vec::new();
    let mut start = 0usize;
    let push = |from: usize, to: usize, out: &mut Vec<(String, Span)>| {
        let slice = &text[from..to];
        let trimmed_start = from + (slice.len() - slice.trim_start().len());
        let trimmed = slice.trim();
        if !trimmed.is_empty() {
            let cs = char_offset(text, trimmed_start);
            out.push((trimmed.to_string(), (cs, cs + trimmed.chars().count())));
        }
    };
    let bytes = text.as_bytes();
    for (i, ch) in text.char_indices() {
        match ch {
            '\n' => {
                push(start, i, &mut out);
                start = i + 1;
            }
            '.' | '?' | '!' => {
                let next = bytes.get(i + 1).copied();
                let at_boundary = next.is_none_or(|b| b == b' ' || b == b'\t' || b == b'\n' || b == b'\r');
                if at_boundary && !(ch == '.' && ends_with_abbreviation(text, i)) {
                    push(start, i + 1, &mut out);
                    start = i + 1;
                }
            }
            _ => {}
        }
    }
    push(start, text.len(), &mut out);
    out
}

pub fn build_windows(doc_id: &str, sentences: &[(String, Span)]) -> Vec<ContextWindow> {
    sentences
        .iter()
        .enumerate()
        .map(|(i, (sentence, span))| {
            let (text, current_offset) = match i.checked_sub(1).map(|p| &sentences[p].0) {
                Some(prev) => (format!("{prev} {sentence}"), prev.len() + 1),
                None => (sentence.clone(), 0),
            };
            ContextWindow {
                doc_id: doc_id.to_string(),
                sentence_index: i,
                text,
                current_span: *span,
                current_offset,
            }
        })
        .collect()
}

pub fn windows_for(doc: &Document) -> Vec<ContextWindow> {
    build_windows(&doc.doc_id, &segment_sentences(&doc.text))
}

pub trait Extractor: Send + Sync {
    fn id(&self) -> &str;
    fn extract(&self, doc: &Document, window: &ContextWindow) -> Result<Vec<CandidateNugget>>;
}

pub fn extract_candidates(doc: &Document, window: &ContextWindow, extractor: &dyn Extractor) -> Result<Vec<CandidateNugget>> {
    extractor.extract(doc, window)
}

/// Runs the extractor over every window of a document.
pub fn extract_document(doc: &Document, extractor: &dyn Extractor) -> Result<Vec<CandidateNugget>> {
    let mut out = Vec::new();
    for window in windows_for(doc) {
        out.extend(extractor.extract(doc, &window)?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Deterministic rule extractor
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
struct Parsed {
    subject: String,
    predicate: String,
    object: String,
    kind: NuggetKind,
    /// Byte range of the subject inside the trimmed clause.
    subject_range: (usize, usize),
}

static LEADING_TEMPORAL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(
        r"^(?i:since|from|as of|starting|until|through|in|on) {d}(?: (?i:to|until|through) {d})?, ",
        d = *DATE_PATTERN
    ))
    .expect("leading temporal regex")
});

static TRAILING_TEMPORAL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(
        r" (?i:since|from|as of|starting|until|through|in|on) {d}(?: (?i:to|until|through) {d})?$",
        d = *DATE_PATTERN
    ))
    .expect("trailing temporal regex")
});

static ROLE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"^(?P<s>[^,]+?) (?P<aux>is|was|are|were|has been|had been|have been|remains|remained|became|becomes) (?P<p>(?:(?:the|a|an) )?[^,]+? (?:of|for|at)) (?P<o>.+)$",
    )
    .expect("role regex")
});

const EVENT_VERBS: &str = "announced|founded|launched|acquired|joined|left|appointed|hired|married|signed|released|resigned from|retired from|opened|closed|sold|bought|won|lost|moved to";
const STATE_VERBS: &str = "is headquartered in|was headquartered in|led|headed|leads|heads|owns|owned";

static VERB: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(
        r"^(?P<s>[^,]+?) (?P<v>{STATE_VERBS}|{EVENT_VERBS}) (?P<o>.+)$"
    ))
    .expect("verb regex")
});

static COPULA: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(?P<s>[^,]+?) (?P<aux>is|was|are|were) (?P<o>[^,]+)$").expect("copula regex"));

const PRONOUNS: [&str; 4] = ["he", "she", "it", "they"];
const MAX_SUBJECT_WORDS: usize = 8;

fn is_pronoun(s: &str) -> bool {
    PRONOUNS.contains(&s.to_lowercase().as_str())
}

fn strip_terminal(s: &str) -> &str {
    s.trim().trim_end_matches(['.', '!', '?', ';', ':', ',']).trim_end()
}

/// Parses one clause into a single triple, ignoring temporal phrases.
fn parse_clause(clause: &str) -> Option<Parsed> {
    let body = strip_terminal(clause);
    let lead = LEADING_TEMPORAL.find(body).map(|m| m.end()).unwrap_or(0);
    let mut core = &body[lead..];
    if let Some(m) = TRAILING_TEMPORAL.find(core) {
        core = &core[..m.start()];
    }
    let core = core.trim();
    let offset = lead + (body[lead..].len() - body[lead..].trim_start().len());

    let build = |s: regex::Match, predicate: String, o: &str, kind: NuggetKind| {
        let subject = s.as_str().trim();
        let object = strip_terminal(o);
        if subject.is_empty() || object.is_empty() || subject.split_whitespace().count() > MAX_SUBJECT_WORDS {
            return None;
        }
        Some(Parsed {
            subject: subject.to_string(),
            predicate,
            object: object.to_string(),
            kind,
            subject_range: (offset + s.start(), offset + s.end()),
        })
    };

    if let Some(c) = ROLE.captures(core) {
        let aux = &c["aux"];
        let kind = if aux.starts_with("became") || aux.starts_with("becomes") {
            NuggetKind::EpisodicEvent
        } else {
            NuggetKind::SemanticFact
        };
        return build(c.name("s")?, format!("{aux} {}", &c["p"]), &c["o"], kind);
    }
    if let Some(c) = VERB.captures(core) {
        let verb = &c["v"];
        let kind = if EVENT_VERBS.split('|').any(|v| v == verb) {
            NuggetKind::EpisodicEvent
        } else {
            NuggetKind::SemanticFact
        };
        return build(c.name("s")?, verb.to_string(), &c["o"], kind);
    }
    if let Some(c) = COPULA.captures(core) {
        return build(c.name("s")?, c["aux"].to_string(), &c["o"], NuggetKind::SemanticFact);
    }
    None
}

/// Byte ranges of conjunction-separated parts (`" and "`, `"; "`).
fn split_conjunctions(sentence: &str) -> Vec<(usize, usize)> {
    let mut parts = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < sentence.len() {
        let rest = &sentence[i..];
        let sep = if rest.starts_with(" and ") {
            Some(5)
        } else if rest.starts_with("; ") {
            Some(2)
        } else {
            None
        };
        match sep {
            Some(n) => {
                parts.push((start, i));
                start = i + n;
                i += n;
            }
            None => i += rest.chars().next().map(char::len_utf8).unwrap_or(1),
        }
    }
    parts.push((start, sentence.len()));
    parts
}

/// Pattern-based extractor; the offline reference implementation.
#[derive(Debug, Default, Clone)]
pub struct RuleExtractor;

impl RuleExtractor {
    pub const ID: &'static str = "rule-v1";

    fn candidate(&self, window: &ContextWindow, part: (usize, usize), parsed: Parsed, prev_subject: Option<&str>) -> Option<CandidateNugget> {
        let sentence = window.current();
        let raw = &sentence[part.0..part.1];
        let lead_ws = raw.len() - raw.trim_start().len();
        let trimmed = raw.trim();
        let (b0, b1) = (part.0 + lead_ws, part.0 + lead_ws + trimmed.len());
        let start = window.current_span.0 + char_offset(sentence, b0);
        let end = window.current_span.0 + char_offset(sentence, b1);

        let mut text = trimmed.to_string();
        let mut subject = parsed.subject.clone();
        if is_pronoun(&subject) {
            let antecedent = prev_subject.filter(|s| !is_pronoun(s))?;
            let (s0, s1) = parsed.subject_range;
            text.replace_range(s0..s1, antecedent);
            subject = antecedent.to_string();
        }
        Some(CandidateNugget {
            text,
            subject_raw: subject,
            predicate_raw: parsed.predicate,
            object_raw: parsed.object,
            evidence_span: (start, end),
            doc_id: window.doc_id.clone(),
            kind_hint: parsed.kind,
        })
    }
}

impl Extractor for RuleExtractor {
    fn id(&self) -> &str {
        Self::ID
    }

    fn extract(&self, _doc: &Document, window: &ContextWindow) -> Result<Vec<CandidateNugget>> {
        let sentence = window.current();
        let prev_subject = window.preceding().and_then(|p| {
            let parts = split_conjunctions(p);
            parse_clause(&p[parts[0].0..parts[0].1]).or_else(|| parse_clause(p)).map(|x| x.subject)
        });

        let parts = split_conjunctions(sentence);
        if parts.len() > 1 {
            let parsed: Vec<_> = parts.iter().map(|&(a, b)| parse_clause(&sentence[a..b])).collect();
            if parsed.iter().all(Option::is_some) {
                return Ok(parts
                    .into_iter()
                    .zip(parsed)
                    .filter_map(|(part, p)| self.candidate(window, part, p?, prev_subject.as_deref()))
                    .collect());
            }
        }
        let whole = (0, sentence.len());
        Ok(parse_clause(sentence)
            .and_then(|p| self.candidate(window, whole, p, prev_subject.as_deref()))
            .into_iter()
            .collect())
    }
}

// ---------------------------------------------------------------------------
// External completion-endpoint extractor
// ---------------------------------------------------------------------------

pub const EXTRACTION_PROMPT_V1: &str = include_str!("../assets/extraction_prompt_v1.txt");

/// Transport to a hosted completion model. Implementations own the
/// network details; errors are treated as retryable.
pub trait CompletionClient: Send + Sync {
    fn complete(&self, prompt: &str) -> std::result::Result<String, String>;
}

#[derive(Debug, Deserialize)]
struct ExtractedFact {
    subject: String,
    predicate: String,
    object: String,
    statement: String,
    span_hint: String,
}

/// Counting gate bounding concurrent requests.
struct InFlight {
    limit: usize,
    used: Mutex<usize>,
    freed: Condvar,
}

impl InFlight {
    fn acquire(&self) -> InFlightGuard<'_> {
        let mut used = self.used.lock().unwrap_or_else(|e| e.into_inner());
        while *used >= self.limit {
            used = self.freed.wait(used).unwrap_or_else(|e| e.into_inner());
        }
        *used += 1;
        InFlightGuard(self)
    }
}

struct InFlightGuard<'a>(&'a InFlight);

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        let mut used = self.0.used.lock().unwrap_or_else(|e| e.into_inner());
        *used -= 1;
        self.0.freed.notify_one();
    }
}

pub struct CompletionExtractor<C> {
    client: C,
    id: String,
    gate: InFlight,
}

impl<C: CompletionClient> CompletionExtractor<C> {
    pub fn new(client: C, model_id: &str, max_in_flight: usize) -> Self {
        CompletionExtractor {
            client,
            id: format!("completion-v1:{model_id}"),
            gate: InFlight {
                limit: max_in_flight.max(1),
                used: Mutex::new(0),
                freed: Condvar::new(),
            },
        }
    }

    pub fn prompt_for(window: &ContextWindow) -> String {
        EXTRACTION_PROMPT_V1
            .replace("{context}", window.preceding().unwrap_or(""))
            .replace("{sentence}", window.current())
    }

    /// Turns a raw model response into candidates. Malformed output or
    /// ungrounded span hints are skipped with a diagnostic.
    pub fn parse_response(doc: &Document, window: &ContextWindow, response: &str) -> Vec<CandidateNugget> {
        let facts: Vec<serde_json::Value> = match serde_json::from_str(response.trim()) {
            Ok(serde_json::Value::Array(items)) => items,
            _ => {
                log::warn!("{}#{}: extractor output is not a JSON array", window.doc_id, window.sentence_index);
                return Vec::new();
            }
        };
        let mut out = Vec::new();
        for item in facts {
            let fact: ExtractedFact = match serde_json::from_value(item) {
                Ok(f) => f,
                Err(e) => {
                    log::warn!("{}#{}: skipping malformed fact: {e}", window.doc_id, window.sentence_index);
                    continue;
                }
            };
            if fact.subject.trim().is_empty() || fact.object.trim().is_empty() || fact.statement.trim().is_empty() {
                log::warn!("{}#{}: skipping fact with empty fields", window.doc_id, window.sentence_index);
                continue;
            }
            let Some(byte) = doc.text.find(fact.span_hint.trim()).filter(|_| !fact.span_hint.trim().is_empty()) else {
                log::warn!("{}#{}: span hint not found in document", window.doc_id, window.sentence_index);
                continue;
            };
            let start = char_offset(&doc.text, byte);
            out.push(CandidateNugget {
                text: fact.statement.trim().to_string(),
                subject_raw: fact.subject.trim().to_string(),
                predicate_raw: fact.predicate.trim().to_string(),
                object_raw: fact.object.trim().to_string(),
                evidence_span: (start, start + fact.span_hint.trim().chars().count()),
                doc_id: window.doc_id.clone(),
                kind_hint: NuggetKind::SemanticFact,
            });
        }
        out
    }
}

impl<C: CompletionClient> Extractor for CompletionExtractor<C> {
    fn id(&self) -> &str {
        &self.id
    }

    fn extract(&self, doc: &Document, window: &ContextWindow) -> Result<Vec<CandidateNugget>> {
        let response = {
            let _slot = self.gate.acquire();
            self.client.complete(&Self::prompt_for(window))
        };
        match response {
            Ok(text) => Ok(Self::parse_response(doc, window, &text)),
            Err(detail) => Err(Error::Transport {
                doc_id: window.doc_id.clone(),
                sentence_index: window.sentence_index,
                detail,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc(text: &str) -> Document {
        Document {
            doc_id: "d1".into(),
            timestamp: "2021-03-01".parse().unwrap(),
            text: text.into(),
            revision_of: None,
            source_type: SourceType::Primary,
        }
    }

    fn extract(text: &str) -> Vec<CandidateNugget> {
        extract_document(&doc(text), &RuleExtractor).unwrap()
    }

    #[test]
    fn segments_terminal_periods() {
        let s = segment_sentences("A. B.");
        assert_eq!(s.len(), 2);
        assert_eq!(s[0], ("A.".to_string(), (0, 2)));
        assert_eq!(s[1], ("B.".to_string(), (3, 5)));
    }

    #[test]
    fn abbreviation_guard() {
        assert_eq!(segment_sentences("Dr. Smith arrived.").len(), 1);
        assert_eq!(segment_sentences("Acme Inc. hired Bob. He left.").len(), 2);
        assert_eq!(segment_sentences("Cats vs. dogs, e.g. here.").len(), 1);
    }

    #[test]
    fn segments_empty_and_newlines() {
        assert!(segment_sentences("").is_empty());
        assert!(segment_sentences("   \n ").is_empty());
        let s = segment_sentences("first line\nsecond? third! fourth");
        let texts: Vec<_> = s.iter().map(|x| x.0.as_str()).collect();
        assert_eq!(texts, ["first line", "second?", "third!", "fourth"]);
    }

    #[test]
    fn windows_pair_previous_sentence() {
        let s = segment_sentences("One. Two. Three.");
        let w = build_windows("d", &s);
        assert_eq!(w.len(), 3);
        assert_eq!(w[0].text, "One.");
        assert_eq!(w[2].text, "Two. Three.");
        assert_eq!(w[2].current(), "Three.");
        assert_eq!(w[2].preceding(), Some("Two."));
        assert_eq!(w[2].current_span, s[2].1);
    }

    #[test]
    fn since_pattern() {
        let c = extract("Since 2019, Alice Ng has been the CEO of Acme.");
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].subject_raw, "Alice Ng");
        assert_eq!(c[0].predicate_raw, "has been the CEO of");
        assert_eq!(c[0].object_raw, "Acme");
        assert_eq!(c[0].text, "Since 2019, Alice Ng has been the CEO of Acme.");
        assert_eq!(c[0].kind_hint, NuggetKind::SemanticFact);
    }

    #[test]
    fn conjunction_split() {
        let c = extract("The sky is blue and grass is green.");
        assert_eq!(c.len(), 2);
        assert_eq!((c[0].subject_raw.as_str(), c[0].object_raw.as_str()), ("The sky", "blue"));
        assert_eq!((c[1].subject_raw.as_str(), c[1].object_raw.as_str()), ("grass", "green"));
        assert_eq!(c[0].text, "The sky is blue");
        assert_eq!(c[1].text, "grass is green.");
    }

    #[test]
    fn no_pattern_no_candidates() {
        assert!(extract("Analysts expect steady demand across regional markets.").is_empty());
    }

    #[test]
    fn other_pattern_families() {
        let c = extract("From 2018 to 2021, Bob Li was the CTO of Globex.");
        assert_eq!(c[0].subject_raw, "Bob Li");
        assert_eq!(c[0].predicate_raw, "was the CTO of");
        assert_eq!(c[0].object_raw, "Globex");

        let c = extract("Carol Wu became CEO of Initech in 2020.");
        assert_eq!(c[0].kind_hint, NuggetKind::EpisodicEvent);
        assert_eq!(c[0].predicate_raw, "became CEO of");
        assert_eq!(c[0].object_raw, "Initech");

        let c = extract("Umbrella acquired Hooli on March 5, 2020.");
        assert_eq!(c[0].predicate_raw, "acquired");
        assert_eq!(c[0].object_raw, "Hooli");
        assert_eq!(c[0].kind_hint, NuggetKind::EpisodicEvent);

        let c = extract("Alice Ng is the CEO of Acme.");
        assert_eq!(c[0].predicate_raw, "is the CEO of");
    }

    #[test]
    fn pronoun_resolution() {
        let text = "Alice Ng is the CEO of Acme. She founded Initech in 2010.";
        let c = extract(text);
        assert_eq!(c.len(), 2);
        assert_eq!(c[1].subject_raw, "Alice Ng");
        assert_eq!(c[1].text, "Alice Ng founded Initech in 2010.");
        assert_eq!(slice_chars(text, c[1].evidence_span.0, c[1].evidence_span.1), "She founded Initech in 2010.");
    }

    #[test]
    fn unresolved_pronoun_skipped() {
        assert!(extract("He founded Initech in 2010.").is_empty());
    }

    #[test]
    fn completion_response_parsing() {
        let d = doc("Since 2019, Alice Ng has been the CEO of Acme.");
        let w = &windows_for(&d)[0];
        let ok = r#"[{"subject":"Alice Ng","predicate":"has been the CEO of","object":"Acme","statement":"Since 2019, Alice Ng has been the CEO of Acme.","span_hint":"Alice Ng has been the CEO of Acme"}]"#;
        let c = CompletionExtractor::<NullClient>::parse_response(&d, w, ok);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].evidence_span, (12, 45));
        assert!(CompletionExtractor::<NullClient>::parse_response(&d, w, "not json").is_empty());
        let bad = r#"[{"subject":"x"}, {"subject":"A","predicate":"p","object":"o","statement":"s","span_hint":"absent text"}]"#;
        assert!(CompletionExtractor::<NullClient>::parse_response(&d, w, bad).is_empty());
    }

    struct NullClient;
    impl CompletionClient for NullClient {
        fn complete(&self, _prompt: &str) -> std::result::Result<String, String> {
            Err("offline".into())
        }
    }

    #[test]
    fn transport_failure_carries_window() {
        let d = doc("Alice Ng is the CEO of Acme.");
        let ex = CompletionExtractor::new(NullClient, "none", 2);
        let err = extract_document(&d, &ex).unwrap_err();
        assert!(matches!(err, Error::Transport { sentence_index: 0, .. }));
        assert!(CompletionExtractor::<NullClient>::prompt_for(&windows_for(&d)[0]).contains("SENTENCE: Alice Ng is the CEO of Acme."));
    }

    fn normalize_ws(s: &str) -> String {
        s.split_whitespace().collect::<Vec<_>>().join(" ")
    }

    proptest! {
        #[test]
        fn evidence_is_grounded(
            names in proptest::collection::vec("[A-Z][a-z]{2,6} [A-Z][a-z]{2,6}", 1..5),
            orgs in proptest::collection::vec("[A-Z][a-z]{3,8}", 1..5),
            pronoun in any::<bool>(),
            year in 1990u32..2024,
        ) {
            let mut text = String::new();
            for (i, (n, o)) in names.iter().zip(orgs.iter()).enumerate() {
                text.push_str(&format!("Since {year}, {n} has been the CEO of {o}. "));
                if pronoun && i == 0 {
                    text.push_str(&format!("She founded {o} Labs in {year}. "));
                }
                text.push_str("Analysts expect demand to hold. ");
            }
            let d = doc(&text);
            let first = extract_document(&d, &RuleExtractor).unwrap();
            let second = extract_document(&d, &RuleExtractor).unwrap();
            prop_assert_eq!(&first, &second);
            for c in &first {
                let span = slice_chars(&text, c.evidence_span.0, c.evidence_span.1);
                prop_assert!(!span.is_empty());
                let expected = if span.starts_with("She ") {
                    span.replacen("She", &c.subject_raw, 1)
                } else {
                    span.to_string()
                };
                prop_assert_eq!(normalize_ws(&expected), normalize_ws(&c.text));
                prop_assert!(!c.text.contains(" and ") && !c.text.contains("; "));
            }
        }
    }
}
