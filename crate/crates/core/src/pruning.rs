//! Rule-based and confidence-based pruning of generated queries.
//!
//! Single-object journalism questions are checked against a 24-cell
//! interrogative × object-type table. Why/How pair questions are checked
//! against per-verb (subject type, object type) frames; How shares Why's
//! frames. Queries whose best answer falls below θ are marked nonsense and
//! logged in a history so later reclassifications can be counted.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::answer::AnswerCandidate;
use crate::error::{Error, Result};
use crate::lexicon::parse_tsv;
use crate::objects::ObjectTable;
use crate::querygen::{ComparativeLexicon, Query, QueryState, VerbLexicon};
use crate::types::{Interrogative, ObjectType, QueryKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PruneDecision {
    Keep,
    /// Removed by a rule; the string names the rule cell.
    Prune(String),
    /// No answer reached the confidence threshold.
    Nonsense,
}

impl PruneDecision {
    pub fn is_keep(&self) -> bool {
        matches!(self, PruneDecision::Keep)
    }

    /// State a generated query takes under this decision.
    pub fn state(&self) -> QueryState {
        match self {
            PruneDecision::Keep => QueryState::Generated,
            PruneDecision::Prune(reason) => QueryState::Pruned(reason.clone()),
            PruneDecision::Nonsense => QueryState::Nonsense,
        }
    }
}

/// Keep/prune decision for each (interrogative, object type) cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PruneRuleTable {
    prune: BTreeMap<(Interrogative, ObjectType), bool>,
}

impl Default for PruneRuleTable {
    fn default() -> Self {
        use Interrogative::*;
        use ObjectType::*;
        let pruned = [
            (Who, Object),
            (Who, Location),
            (Who, Concept),
            (What, Person),
            (Why, Person),
            (Why, Object),
            (Why, Location),
            (Where, Concept),
        ];
        let mut prune = BTreeMap::new();
        for &q in Interrogative::ALL {
            for &t in ObjectType::ALL {
                prune.insert((q, t), pruned.contains(&(q, t)));
            }
        }
        PruneRuleTable { prune }
    }
}

impl PruneRuleTable {
    /// Parses `interrogative<TAB>type<TAB>keep|prune`; all 24 cells must be
    /// present exactly once.
    pub fn from_tsv(text: &str, source: &Path) -> Result<Self> {
        let mut prune = BTreeMap::new();
        let mut last_line = 0;
        for row in parse_tsv(text, source, 3)? {
            last_line = row.line;
            let err = |m: String| Error::parse(source, row.line, m);
            let q: Interrogative = row.fields[0].parse().map_err(err)?;
            let t: ObjectType = row.fields[1].parse().map_err(err)?;
            let decision = parse_keep_prune(row.fields[2]).map_err(err)?;
            if prune.insert((q, t), decision).is_some() {
                return Err(err(format!("duplicate cell {q}×{t}")));
            }
        }
        if prune.len() != Interrogative::ALL.len() * ObjectType::ALL.len() {
            return Err(Error::parse(
                source,
                last_line,
                format!("expected 24 cells, found {}", prune.len()),
            ));
        }
        Ok(PruneRuleTable { prune })
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("# interrogative\ttype\tkeep|prune\n");
        for (&(q, t), &p) in &self.prune {
            let _ = writeln!(out, "{q}\t{t}\t{}", if p { "prune" } else { "keep" });
        }
        out
    }

    pub fn prunes(&self, q: Interrogative, t: ObjectType) -> bool {
        self.prune[&(q, t)]
    }

    pub fn cells(&self) -> impl Iterator<Item = (Interrogative, ObjectType, bool)> + '_ {
        self.prune.iter().map(|(&(q, t), &p)| (q, t, p))
    }
}

fn parse_keep_prune(s: &str) -> std::result::Result<bool, String> {
    match s.to_lowercase().as_str() {
        "keep" => Ok(false),
        "prune" => Ok(true),
        other => Err(format!("expected keep or prune, got `{other}`")),
    }
}

/// Allowed (subject type, object type) pairs for each verb.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerbFrameTable {
    frames: BTreeMap<String, BTreeSet<(ObjectType, ObjectType)>>,
}

impl VerbFrameTable {
    /// Frames implied by a verb lexicon: every listed subject type with
    /// every listed object type.
    pub fn from_lexicon(verbs: &VerbLexicon) -> Self {
        let frames = verbs
            .entries()
            .iter()
            .map(|v| {
                let allowed = v
                    .subject_types
                    .iter()
                    .flat_map(|&s| v.object_types.iter().map(move |&o| (s, o)))
                    .collect();
                (v.lemma.clone(), allowed)
            })
            .collect();
        VerbFrameTable { frames }
    }

    /// Parses `verb<TAB>subject_type<TAB>object_type<TAB>keep|prune`; each
    /// verb must list all 16 type pairs.
    pub fn from_tsv(text: &str, source: &Path) -> Result<Self> {
        let mut cells: BTreeMap<String, BTreeMap<(ObjectType, ObjectType), bool>> =
            BTreeMap::new();
        let mut first_line: BTreeMap<String, usize> = BTreeMap::new();
        for row in parse_tsv(text, source, 4)? {
            let err = |m: String| Error::parse(source, row.line, m);
            let verb = row.fields[0].to_lowercase();
            let s: ObjectType = row.fields[1].parse().map_err(err)?;
            let o: ObjectType = row.fields[2].parse().map_err(err)?;
            let pruned = parse_keep_prune(row.fields[3]).map_err(err)?;
            first_line.entry(verb.clone()).or_insert(row.line);
            if cells.entry(verb.clone()).or_default().insert((s, o), pruned).is_some() {
                return Err(err(format!("duplicate frame {verb}({s},{o})")));
            }
        }
        let mut frames = BTreeMap::new();
        for (verb, grid) in cells {
            if grid.len() != 16 {
                return Err(Error::parse(
                    source,
                    first_line[&verb],
                    format!("verb `{verb}` lists {} of 16 type pairs", grid.len()),
                ));
            }
            let allowed = grid.into_iter().filter(|(_, p)| !p).map(|(k, _)| k).collect();
            frames.insert(verb, allowed);
        }
        Ok(VerbFrameTable { frames })
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("# verb\tsubject_type\tobject_type\tkeep|prune\n");
        for (verb, allowed) in &self.frames {
            for &s in ObjectType::ALL {
                for &o in ObjectType::ALL {
                    let d = if allowed.contains(&(s, o)) { "keep" } else { "prune" };
                    let _ = writeln!(out, "{verb}\t{s}\t{o}\t{d}");
                }
            }
        }
        out
    }

    pub fn allows(&self, verb: &str, subject: ObjectType, object: ObjectType) -> Result<bool> {
        self.frames
            .get(verb)
            .map(|allowed| allowed.contains(&(subject, object)))
            .ok_or_else(|| Error::MissingVerbFrame(verb.to_string()))
    }

    pub fn verbs(&self) -> impl Iterator<Item = &str> {
        self.frames.keys().map(String::as_str)
    }
}

/// Table lookup for a single-object journalism question.
pub fn prune_interrogative_type(
    q: &Query,
    objects: &ObjectTable,
    table: &PruneRuleTable,
) -> Result<PruneDecision> {
    let interrogative = match (q.kind, q.interrogative) {
        (QueryKind::ObjectJournalism, Some(i)) => i,
        _ => {
            return Err(Error::InvalidArgument(format!(
                "query {} is not a single-object journalism question",
                q.query_id
            )))
        }
    };
    let t = objects.get(&q.subject)?.object_type;
    Ok(if table.prunes(interrogative, t) {
        PruneDecision::Prune(format!("{interrogative}×{t}"))
    } else {
        PruneDecision::Keep
    })
}

/// Frame check for a pair question. When and Where questions carry no verb
/// and are always kept.
pub fn prune_pair_frame(
    q: &Query,
    objects: &ObjectTable,
    frames: &VerbFrameTable,
) -> Result<PruneDecision> {
    if q.kind != QueryKind::PairJournalism {
        return Err(Error::InvalidArgument(format!(
            "query {} is not a pair question",
            q.query_id
        )));
    }
    let Some(verb) = q.verb.as_deref() else {
        return Ok(PruneDecision::Keep);
    };
    let s = objects.get(&q.subject)?.object_type;
    let o = objects.get(q.object2.as_deref().unwrap_or_default())?.object_type;
    Ok(if frames.allows(verb, s, o)? {
        PruneDecision::Keep
    } else {
        PruneDecision::Prune(format!("{verb}({s},{o})"))
    })
}

/// Re-checks a comparative's adjective constraint against the lexicon in
/// effect, which may be stricter than the one used for generation.
pub fn prune_comparative(
    q: &Query,
    objects: &ObjectTable,
    adjectives: &ComparativeLexicon,
) -> Result<PruneDecision> {
    let form = match (q.kind, q.adjective.as_deref()) {
        (QueryKind::Comparative, Some(f)) => f,
        _ => {
            return Err(Error::InvalidArgument(format!(
                "query {} is not a comparative",
                q.query_id
            )))
        }
    };
    let entry = adjectives
        .get(form)
        .ok_or_else(|| Error::MissingAdjective(form.to_string()))?;
    let s = objects.get(&q.subject)?.object_type;
    let o = objects.get(q.object2.as_deref().unwrap_or_default())?.object_type;
    Ok(if entry.allows(s, o) {
        PruneDecision::Keep
    } else {
        PruneDecision::Prune(format!("{form}({s},{o})"))
    })
}

/// Applies whichever rule table governs the query's kind. Analogy and
/// correlation questions have no rule table and are kept.
pub fn prune_by_rules(
    q: &Query,
    objects: &ObjectTable,
    table: &PruneRuleTable,
    frames: &VerbFrameTable,
    adjectives: &ComparativeLexicon,
) -> Result<PruneDecision> {
    match q.kind {
        QueryKind::ObjectJournalism => prune_interrogative_type(q, objects, table),
        QueryKind::PairJournalism => prune_pair_frame(q, objects, frames),
        QueryKind::Comparative => prune_comparative(q, objects, adjectives),
        QueryKind::Analogy | QueryKind::AnalogyExtension | QueryKind::Correlation => {
            objects.get(&q.subject)?;
            Ok(PruneDecision::Keep)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    #[serde(rename = "nonsense")]
    Nonsense,
    #[serde(rename = "non-nonsense")]
    NonNonsense,
}

/// One line of the history log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub query_id: String,
    pub ts: u64,
    #[serde(rename = "class")]
    pub classification: Classification,
    pub max_conf: f64,
}

/// Per-query nonsense classifications over time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NonsenseHistory {
    log: Vec<HistoryRecord>,
    by_query: BTreeMap<String, Vec<usize>>,
}

impl NonsenseHistory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Replays a log, validating timestamp order per query.
    pub fn from_records(records: impl IntoIterator<Item = HistoryRecord>) -> Result<Self> {
        let mut h = NonsenseHistory::new();
        for r in records {
            h.push(r)?;
        }
        Ok(h)
    }

    pub fn record(
        &mut self,
        query_id: &str,
        ts: u64,
        max_conf: f64,
        theta: f64,
    ) -> Result<Classification> {
        let classification = if max_conf < theta {
            Classification::Nonsense
        } else {
            Classification::NonNonsense
        };
        self.push(HistoryRecord {
            query_id: query_id.to_string(),
            ts,
            classification,
            max_conf,
        })?;
        Ok(classification)
    }

    fn push(&mut self, r: HistoryRecord) -> Result<()> {
        if let Some(last) = self.latest(&r.query_id) {
            if r.ts <= last.ts {
                return Err(Error::NonMonotonicTimestamp {
                    query_id: r.query_id,
                    ts: r.ts,
                    last: last.ts,
                });
            }
        }
        self.by_query
            .entry(r.query_id.clone())
            .or_default()
            .push(self.log.len());
        self.log.push(r);
        Ok(())
    }

    pub fn latest(&self, query_id: &str) -> Option<&HistoryRecord> {
        self.by_query
            .get(query_id)
            .and_then(|ix| ix.last())
            .map(|&i| &self.log[i])
    }

    pub fn trajectory(&self, query_id: &str) -> impl Iterator<Item = &HistoryRecord> {
        self.by_query
            .get(query_id)
            .into_iter()
            .flatten()
            .map(|&i| &self.log[i])
    }

    /// Records in append order.
    pub fn records(&self) -> &[HistoryRecord] {
        &self.log
    }

    pub fn max_ts(&self) -> u64 {
        self.log.iter().map(|r| r.ts).max().unwrap_or(0)
    }

    pub fn query_count(&self) -> usize {
        self.by_query.len()
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&theta) {
        Ok(())
    } else {
        Err(Error::Threshold(theta))
    }
}

/// Marks the query nonsense when no candidate reaches `theta` and records
/// the classification at time `ts`.
pub fn prune_by_confidence(
    q: &Query,
    candidates: &[AnswerCandidate],
    theta: f64,
    history: &mut NonsenseHistory,
    ts: u64,
) -> Result<PruneDecision> {
    let max = candidates.iter().map(|c| c.confidence).fold(0.0, f64::max);
    prune_by_max_confidence(q, max, theta, history, ts)
}

/// As [`prune_by_confidence`], for answers already reduced to their best
/// confidence (analogy and correlation answers are objects, not sentences).
pub fn prune_by_max_confidence(
    q: &Query,
    max_confidence: f64,
    theta: f64,
    history: &mut NonsenseHistory,
    ts: u64,
) -> Result<PruneDecision> {
    check_theta(theta)?;
    if q.state.is_pruned() {
        return Err(Error::InvalidArgument(format!(
            "query {} was already pruned",
            q.query_id
        )));
    }
    Ok(match history.record(&q.query_id, ts, max_confidence, theta)? {
        Classification::Nonsense => PruneDecision::Nonsense,
        Classification::NonNonsense => PruneDecision::Keep,
    })
}

/// Fraction of queries ever classified nonsense that were later classified
/// non-nonsense. Zero when no query was ever nonsense.
pub fn nonsense_reclassification_rate(history: &NonsenseHistory) -> f64 {
    let mut ever = 0usize;
    let mut flipped = 0usize;
    for ix in history.by_query.values() {
        let mut seen_nonsense = false;
        let mut did_flip = false;
        for &i in ix {
            match history.log[i].classification {
                Classification::Nonsense => seen_nonsense = true,
                Classification::NonNonsense if seen_nonsense => did_flip = true,
                Classification::NonNonsense => {}
            }
        }
        if seen_nonsense {
            ever += 1;
            if did_flip {
                flipped += 1;
            }
        }
    }
    if ever == 0 {
        0.0
    } else {
        flipped as f64 / ever as f64
    }
}
