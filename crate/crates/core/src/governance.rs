//! Deduplication, conflict detection and lifecycle-state assignment, plus
//! contested resolution, review flagging and reviewer decisions.
//!
//! The functions here are pure: they take the candidate and the records
//! sharing its key and return the records to write together with an
//! [`IntegrationOutcome`] describing every state change. The engine owns
//! persistence and the audit log.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::canonicalize::{fold, Schema};
use crate::dates::{Day, End};
use crate::error::{Error, Result};
use crate::model::{confidence_for_evidence, NuggetId, NuggetRecord, Rank, Status};

pub const DEFAULT_NGRAM: usize = 3;
pub const MERGE_THRESHOLD: f64 = 0.85;
pub const DEPRECATE_MIN_SOURCES: usize = 2;
pub const RESOLVE_MIN_SOURCES: usize = 3;
pub const DEFAULT_HOT_THRESHOLD: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    InsertedActive,
    MergedEvidence,
    DeprecatedExisting,
    DeprecatedCandidate,
    ContestedBoth,
    InsertedSuccession,
    /// Reviewer decision or post-ingest reconciliation.
    Reviewed,
    Unchanged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Affected {
    pub id: NuggetId,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end: Option<End>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrationOutcome {
    pub action: Action,
    pub affected: Vec<Affected>,
}

/// Result of a governance step: what happened and what to persist.
#[derive(Debug, Clone)]
pub struct Decision {
    pub outcome: IntegrationOutcome,
    pub writes: Vec<NuggetRecord>,
    pub warnings: Vec<String>,
}

/// Jaccard similarity over the sets of character n-grams of the folded
/// inputs. Inputs shorter than `n` characters compare by equality.
pub fn jaccard_ngrams(a: &str, b: &str, n: usize) -> f64 {
    let (a, b) = (fold(a), fold(b));
    let (ca, cb): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
    if ca.len() < n || cb.len() < n {
        return if a == b { 1.0 } else { 0.0 };
    }
    let grams = |cs: &[char]| cs.windows(n).map(|w| w.iter().collect::<String>()).collect::<HashSet<_>>();
    let (ga, gb) = (grams(&ca), grams(&cb));
    let inter = ga.intersection(&gb).count();
    let union = ga.len() + gb.len() - inter;
    inter as f64 / union as f64
}

pub fn jaccard_value_similarity(a: &str, b: &str) -> f64 {
    jaccard_ngrams(a, b, DEFAULT_NGRAM)
}

/// Near-duplicate object values.
pub fn values_match(a: &str, b: &str) -> bool {
    jaccard_value_similarity(a, b) >= MERGE_THRESHOLD
}

fn affected(r: &NuggetRecord, t_end_changed: bool) -> Affected {
    Affected {
        id: r.id,
        status: r.epistemic.status,
        t_end: t_end_changed.then_some(r.validity.t_end),
    }
}

/// Unions provenance. An open-ended target also takes an explicitly
/// stated end from the merged evidence; returns whether `t_end` changed.
fn merge_evidence(target: &mut NuggetRecord, from: &NuggetRecord) -> bool {
    for e in &from.provenance.evidence {
        if !target.provenance.evidence.contains(e) {
            target.provenance.evidence.push(e.clone());
        }
    }
    target.epistemic.confidence = target.epistemic.confidence.max(confidence_for_evidence(target.evidence_count()));
    let stated_end = match from.validity.t_end {
        End::At(d) if !from.validity.end_inferred && d > target.validity.t_start => Some(End::At(d)),
        _ => None,
    };
    match stated_end {
        Some(end) if target.validity.t_end == End::Open => {
            target.validity.t_end = end;
            target.validity.end_inferred = false;
            true
        }
        _ => false,
    }
}

fn sort_records(records: &mut [NuggetRecord]) {
    records.sort_by_key(|r| r.id);
}

/// Integrates one candidate against the records sharing its key.
///
/// Branches, in order:
/// 1. no record shares the key: insert Active;
/// 2. some record (ascending id) has a near-duplicate value: merge the
///    candidate's evidence into it (an open end takes a stated end from
///    the candidate); once it has two or more sources,
///    earlier overlapping rivals are capped at its start, then any
///    remaining contest goes to resolution;
/// 3. no non-deprecated record overlaps in time, or the predicate is not
///    functional: insert Active (succession / concurrency);
/// 4. a candidate with fewer than two sources that an overlapping record
///    with two or more sources starts after is Deprecated, ending at the
///    earliest such start, and nothing else changes; otherwise, for each
///    overlapping record, a candidate with two or more sources and a later
///    start deprecates it, and any other pair (also when both sides have
///    two or more sources) becomes Contested. The candidate is Contested
///    if any pair is, else Active.
pub fn integrate(candidate: NuggetRecord, same_key: &[NuggetRecord], schema: &Schema) -> Result<Decision> {
    let cardinality = schema
        .cardinality(&candidate.fact.predicate)
        .ok_or_else(|| Error::SchemaMissing(format!("predicate {:?} is not in the schema", candidate.fact.predicate)))?;
    let mut cand = candidate;
    let key = cand.key();
    let mut existing: Vec<NuggetRecord> = same_key.iter().filter(|r| r.key() == key && r.id != cand.id).cloned().collect();
    sort_records(&mut existing);

    // an identical id is the same nugget re-extracted: always a merge
    if let Some(same) = same_key.iter().find(|r| r.id == cand.id) {
        let mut target = same.clone();
        let end_changed = merge_evidence(&mut target, &cand);
        return Ok(after_merge(target, existing, cardinality.is_functional(), end_changed));
    }

    if existing.is_empty() {
        cand.epistemic.set_status(Status::Active);
        return Ok(Decision {
            outcome: IntegrationOutcome {
                action: Action::InsertedActive,
                affected: vec![affected(&cand, false)],
            },
            writes: vec![cand],
            warnings: Vec::new(),
        });
    }

    if let Some(pos) = existing.iter().position(|n| values_match(&n.fact.object_norm, &cand.fact.object_norm)) {
        let mut target = existing.remove(pos);
        let end_changed = merge_evidence(&mut target, &cand);
        return Ok(after_merge(target, existing, cardinality.is_functional(), end_changed));
    }

    let overlapping: Vec<usize> = existing
        .iter()
        .enumerate()
        .filter(|(_, n)| n.epistemic.status != Status::Deprecated && n.validity.overlaps(&cand.validity))
        .map(|(i, _)| i)
        .collect();

    if cand.provenance.parent_id.is_none() {
        cand.provenance.parent_id = existing
            .iter()
            .filter(|n| n.validity.t_start <= cand.validity.t_start)
            .max_by_key(|n| (n.validity.t_start, n.id))
            .map(|n| n.id);
    }

    if overlapping.is_empty() || !cardinality.is_functional() {
        cand.epistemic.set_status(Status::Active);
        return Ok(Decision {
            outcome: IntegrationOutcome {
                action: Action::InsertedSuccession,
                affected: vec![affected(&cand, false)],
            },
            writes: vec![cand],
            warnings: Vec::new(),
        });
    }

    let mut writes = Vec::new();
    let mut changed = Vec::new();
    let mut warnings = Vec::new();
    let cand_sources = cand.evidence_count();
    // a weak candidate superseded by a later well-supported record changes
    // nothing else
    let superseded_at = overlapping
        .iter()
        .map(|&i| &existing[i])
        .filter(|n| cand_sources < DEPRECATE_MIN_SOURCES && n.evidence_count() >= DEPRECATE_MIN_SOURCES && n.validity.t_start > cand.validity.t_start)
        .map(|n| n.validity.t_start)
        .min();
    let mut cand_end_changed = false;
    let cand_status = if let Some(start) = superseded_at {
        cand.validity.t_end = End::At(start);
        cand_end_changed = true;
        Status::Deprecated
    } else {
        let mut contested = false;
        for i in overlapping {
            let n = &mut existing[i];
            let n_sources = n.evidence_count();
            let before = (n.epistemic.status, n.validity.t_end);
            if cand_sources >= DEPRECATE_MIN_SOURCES && n_sources >= DEPRECATE_MIN_SOURCES {
                warnings.push(format!("{} and candidate {} both have >= 2 sources; contested", n.id, cand.id));
                n.epistemic.set_status(Status::Contested);
                contested = true;
            } else if cand_sources >= DEPRECATE_MIN_SOURCES && cand.validity.t_start > n.validity.t_start {
                n.epistemic.set_status(Status::Deprecated);
                n.validity.t_end = End::At(cand.validity.t_start);
            } else {
                n.epistemic.set_status(Status::Contested);
                contested = true;
            }
            if (n.epistemic.status, n.validity.t_end) != before {
                changed.push(affected(n, n.validity.t_end != before.1));
                writes.push(n.clone());
            }
        }
        if contested {
            Status::Contested
        } else {
            Status::Active
        }
    };
    cand.epistemic.set_status(cand_status);
    let action = match cand_status {
        Status::Active => Action::DeprecatedExisting,
        Status::Deprecated => Action::DeprecatedCandidate,
        Status::Contested => Action::ContestedBoth,
    };
    let mut all = vec![affected(&cand, cand_end_changed)];
    all.extend(changed);
    writes.insert(0, cand);
    Ok(Decision {
        outcome: IntegrationOutcome { action, affected: all },
        writes,
        warnings,
    })
}

/// Replaces or appends `r` in the write set and the affected list.
fn record_change(writes: &mut Vec<NuggetRecord>, outcome: &mut IntegrationOutcome, r: NuggetRecord, a: Affected) {
    match writes.iter_mut().find(|x| x.id == r.id) {
        Some(slot) => *slot = r,
        None => writes.push(r),
    }
    let t_end = outcome.affected.iter().find(|x| x.id == a.id).and_then(|x| x.t_end);
    outcome.affected.retain(|x| x.id != a.id);
    outcome.affected.push(Affected {
        t_end: a.t_end.or(t_end),
        ..a
    });
}

/// Conflict tightening once a merge gives `target` two or more sources:
/// overlapping rivals that start earlier end where it starts, contests
/// left without an overlapping rival return to Active, and any remaining
/// contest goes to resolution.
fn after_merge(target: NuggetRecord, mut others: Vec<NuggetRecord>, functional: bool, end_changed: bool) -> Decision {
    let mut outcome = IntegrationOutcome {
        action: Action::MergedEvidence,
        affected: vec![affected(&target, end_changed)],
    };
    let mut writes = vec![target.clone()];
    let mut target = target;
    if functional && target.epistemic.status != Status::Deprecated && target.evidence_count() >= DEPRECATE_MIN_SOURCES {
        for o in others.iter_mut() {
            if o.epistemic.status == Status::Deprecated
                || values_match(&o.fact.object_norm, &target.fact.object_norm)
                || o.validity.t_start >= target.validity.t_start
                || !o.validity.overlaps(&target.validity)
            {
                continue;
            }
            o.validity.t_end = o.validity.t_end.earlier(End::At(target.validity.t_start));
            o.validity.end_inferred = true;
            record_change(&mut writes, &mut outcome, o.clone(), affected(o, true));
        }
        let mut group = others.clone();
        group.push(target.clone());
        for w in reconcile_contested(&group).writes {
            if w.id == target.id {
                target = w.clone();
            } else if let Some(o) = others.iter_mut().find(|o| o.id == w.id) {
                *o = w.clone();
            }
            let a = affected(&w, false);
            record_change(&mut writes, &mut outcome, w, a);
        }
    }
    if target.epistemic.status == Status::Contested {
        others.push(target);
        for w in resolve_contested(&others).writes {
            let changed = others.iter().find(|o| o.id == w.id).is_some_and(|o| o.validity.t_end != w.validity.t_end);
            let a = affected(&w, changed);
            record_change(&mut writes, &mut outcome, w, a);
        }
    }
    Decision {
        outcome,
        writes,
        warnings: Vec::new(),
    }
}

/// Resolves a contested group when exactly one record has at least three
/// sources and strictly more than every other contested record of the
/// key. Overlapping rivals are deprecated, truncated at the winner's start
/// when the winner starts later.
pub fn resolve_contested(same_key: &[NuggetRecord]) -> Decision {
    let contested: Vec<&NuggetRecord> = same_key.iter().filter(|r| r.epistemic.status == Status::Contested).collect();
    let unchanged = Decision {
        outcome: IntegrationOutcome {
            action: Action::Unchanged,
            affected: Vec::new(),
        },
        writes: Vec::new(),
        warnings: Vec::new(),
    };
    if contested.len() < 2 {
        return unchanged;
    }
    let best = contested.iter().map(|r| r.evidence_count()).max().unwrap_or(0);
    let leaders: Vec<&&NuggetRecord> = contested.iter().filter(|r| r.evidence_count() == best).collect();
    if best < RESOLVE_MIN_SOURCES || leaders.len() != 1 {
        return unchanged;
    }
    let mut winner = (*leaders[0]).clone();
    winner.epistemic.set_status(Status::Active);
    let mut affected_list = vec![affected(&winner, false)];
    let mut writes = vec![winner.clone()];
    for r in contested {
        if r.id == winner.id || !r.validity.overlaps(&winner.validity) {
            continue;
        }
        let mut loser = r.clone();
        loser.epistemic.set_status(Status::Deprecated);
        let truncate = winner.validity.t_start > loser.validity.t_start;
        if truncate {
            loser.validity.t_end = End::At(winner.validity.t_start);
        }
        affected_list.push(affected(&loser, truncate));
        writes.push(loser);
    }
    Decision {
        outcome: IntegrationOutcome {
            action: Action::Reviewed,
            affected: affected_list,
        },
        writes,
        warnings: Vec::new(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewReason {
    Contested,
    HighTrafficChange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub nugget_id: NuggetId,
    pub reason: ReviewReason,
    pub queued_at: Day,
    pub resolved: bool,
}

/// Queues review for contested assignments and for changes to records
/// read at least `hot_threshold` times.
pub fn flag_for_review(record: &NuggetRecord, new_status: Status, hot_threshold: u64, now: Day) -> Option<ReviewItem> {
    let reason = if new_status == Status::Contested {
        ReviewReason::Contested
    } else if record.access_count >= hot_threshold {
        ReviewReason::HighTrafficChange
    } else {
        return None;
    };
    Some(ReviewItem {
        nugget_id: record.id,
        reason,
        queued_at: now,
        resolved: false,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum ReviewDecision {
    ConfirmActive,
    Deprecate,
    MarkPreferred,
    ResolveTo { winner_id: NuggetId },
}

/// Applies a reviewer decision to `target` (and, for `ResolveTo`, its
/// same-key rivals). Reviewer deprecations keep `t_end` unchanged.
/// Decisions that match the current state are no-ops with a warning.
pub fn review_transition(target: &NuggetRecord, decision: &ReviewDecision, same_key: &[NuggetRecord]) -> Result<Decision> {
    let mut writes = Vec::new();
    let mut affected_list = Vec::new();
    let mut warnings = Vec::new();
    let mut set = |r: &NuggetRecord, status: Status, writes: &mut Vec<NuggetRecord>, warnings: &mut Vec<String>| {
        if r.epistemic.status == status {
            warnings.push(format!("{} is already {status:?}", r.id));
            return;
        }
        let mut r = r.clone();
        r.epistemic.set_status(status);
        affected_list.push(affected(&r, false));
        writes.push(r);
    };
    match decision {
        ReviewDecision::ConfirmActive => set(target, Status::Active, &mut writes, &mut warnings),
        ReviewDecision::Deprecate => set(target, Status::Deprecated, &mut writes, &mut warnings),
        ReviewDecision::MarkPreferred => {
            if target.epistemic.status == Status::Deprecated {
                warnings.push(format!("{} is Deprecated; cannot mark Preferred", target.id));
            } else if target.epistemic.rank == Rank::Preferred {
                warnings.push(format!("{} is already Preferred", target.id));
            } else {
                let mut r = target.clone();
                r.epistemic.rank = Rank::Preferred;
                affected_list.push(affected(&r, false));
                writes.push(r);
            }
        }
        ReviewDecision::ResolveTo { winner_id } => {
            let winner = if *winner_id == target.id {
                target
            } else {
                same_key
                    .iter()
                    .find(|r| r.id == *winner_id && r.key() == target.key())
                    .ok_or(Error::NotFound(*winner_id))?
            };
            set(winner, Status::Active, &mut writes, &mut warnings);
            let mut rivals: Vec<&NuggetRecord> = same_key
                .iter()
                .chain(std::iter::once(target))
                .filter(|r| r.id != winner.id && r.key() == winner.key())
                .filter(|r| r.epistemic.status != Status::Deprecated)
                .filter(|r| r.validity.overlaps(&winner.validity))
                .filter(|r| !values_match(&r.fact.object_norm, &winner.fact.object_norm))
                .collect();
            rivals.sort_by_key(|r| r.id);
            rivals.dedup_by_key(|r| r.id);
            for r in rivals {
                set(r, Status::Deprecated, &mut writes, &mut warnings);
            }
        }
    }
    let action = if writes.is_empty() { Action::Unchanged } else { Action::Reviewed };
    Ok(Decision {
        outcome: IntegrationOutcome {
            action,
            affected: affected_list,
        },
        writes,
        warnings,
    })
}

/// After batch refinement, a Contested record with no overlapping
/// non-deprecated rival of a different value has lost the basis for its
/// state and returns to Active.
pub fn reconcile_contested(same_key: &[NuggetRecord]) -> Decision {
    let mut writes = Vec::new();
    let mut affected_list = Vec::new();
    for r in same_key.iter().filter(|r| r.epistemic.status == Status::Contested) {
        let still = same_key.iter().any(|o| {
            o.id != r.id
                && o.epistemic.status != Status::Deprecated
                && o.validity.overlaps(&r.validity)
                && !values_match(&o.fact.object_norm, &r.fact.object_norm)
        });
        if !still {
            let mut r = r.clone();
            r.epistemic.set_status(Status::Active);
            affected_list.push(affected(&r, false));
            writes.push(r);
        }
    }
    let action = if writes.is_empty() { Action::Unchanged } else { Action::Reviewed };
    Decision {
        outcome: IntegrationOutcome {
            action,
            affected: affected_list,
        },
        writes,
        warnings: Vec::new(),
    }
}
