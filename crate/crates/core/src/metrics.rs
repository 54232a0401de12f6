//! Coverage, precision, review sampling, utility categories and gap reports.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::answer::QueryAnswer;
use crate::error::{Error, Result};
use crate::querygen::Query;
use crate::types::QueryKind;

pub const DEFAULT_Z: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    UsefulInteresting,
    UsefulNotInteresting,
    Nonsensical,
}

impl Category {
    pub const ALL: &'static [Category] = &[
        Category::UsefulInteresting,
        Category::UsefulNotInteresting,
        Category::Nonsensical,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::UsefulInteresting => "UsefulInteresting",
            Category::UsefulNotInteresting => "UsefulNotInteresting",
            Category::Nonsensical => "Nonsensical",
        }
    }
}

impl std::str::FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Category::ALL
            .iter()
            .copied()
            .find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown category `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Label {
    pub query_id: String,
    pub category: Category,
    #[serde(default)]
    pub answer_correct: Option<bool>,
    pub reviewer: String,
    pub ts: u64,
}

/// The latest label per (query, reviewer) in log order, sorted by query id
/// then reviewer.
pub fn live_labels(labels: &[Label]) -> Vec<Label> {
    let mut live: BTreeMap<(&str, &str), &Label> = BTreeMap::new();
    for l in labels {
        live.insert((&l.query_id, &l.reviewer), l);
    }
    live.into_values().cloned().collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KindCoverage {
    pub total: usize,
    pub answered: usize,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub total_queries: usize,
    pub answered_high_conf: usize,
    pub coverage: f64,
    pub no_live_queries: bool,
    pub theta: f64,
    pub per_kind: BTreeMap<QueryKind, KindCoverage>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn top_confidences(answers: &[QueryAnswer]) -> HashMap<&str, f64> {
    answers
        .iter()
        .map(|a| (a.query_id.as_str(), a.top_confidence()))
        .collect()
}

/// Share of live (not rule-pruned) queries whose best answer reaches θ.
pub fn coverage(queries: &[Query], answers: &[QueryAnswer], theta: f64) -> CoverageReport {
    let top = top_confidences(answers);
    let mut per_kind: BTreeMap<QueryKind, KindCoverage> = BTreeMap::new();
    for q in queries.iter().filter(|q| q.is_live()) {
        let row = per_kind.entry(q.kind).or_default();
        row.total += 1;
        if top.get(q.query_id.as_str()).copied().unwrap_or(0.0) >= theta {
            row.answered += 1;
        }
    }
    for row in per_kind.values_mut() {
        row.coverage = ratio(row.answered, row.total);
    }
    let total: usize = per_kind.values().map(|r| r.total).sum();
    let answered: usize = per_kind.values().map(|r| r.answered).sum();
    CoverageReport {
        total_queries: total,
        answered_high_conf: answered,
        coverage: ratio(answered, total),
        no_live_queries: total == 0,
        theta,
        per_kind,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionEstimate {
    pub attempted: usize,
    pub correct: usize,
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
    pub z: f64,
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::NoJudgments);
    }
    if k > n || !z.is_finite() || z < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "wilson interval needs k <= n and z >= 0 (k={k}, n={n}, z={z})"
        )));
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    let lo = (center - half).clamp(0.0, 1.0).min(p);
    let hi = (center + half).clamp(0.0, 1.0).max(p);
    Ok((lo, hi))
}

/// Precision over live labels that judged a shown answer.
pub fn precision_with_interval(labels: &[Label], z: f64) -> Result<PrecisionEstimate> {
    let judged: Vec<bool> = live_labels(labels)
        .iter()
        .filter_map(|l| l.answer_correct)
        .collect();
    let attempted = judged.len();
    let correct = judged.iter().filter(|&&c| c).count();
    let (lo, hi) = wilson_interval(correct, attempted, z)?;
    Ok(PrecisionEstimate {
        attempted,
        correct,
        point: ratio(correct, attempted),
        lo,
        hi,
        z,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub seed: u64,
    pub stratified: bool,
    /// True when fewer queries were available than requested and the whole
    /// population was returned.
    pub exhausted: bool,
    pub query_ids: Vec<String>,
}

/// Splits `n` across strata in proportion to their sizes, handing leftover
/// units to the largest remainders (earlier strata win ties).
pub fn largest_remainder(sizes: &[usize], n: usize) -> Vec<usize> {
    let total: usize = sizes.iter().sum();
    if total == 0 {
        return vec![0; sizes.len()];
    }
    let n = n.min(total);
    let mut alloc: Vec<usize> = sizes.iter().map(|&s| s * n / total).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(sizes[i] * n % total));
    let mut left = n - alloc.iter().sum::<usize>();
    for i in order {
        if left == 0 {
            break;
        }
        if alloc[i] < sizes[i] {
            alloc[i] += 1;
            left -= 1;
        }
    }
    alloc
}

/// Seeded sample of live queries for human review.
pub fn sample_for_review(queries: &[Query], n: usize, seed: u64, stratify: bool) -> Result<Sample> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be at least 1".into()));
    }
    let mut population: Vec<&Query> = queries.iter().filter(|q| q.is_live()).collect();
    population.sort_by(|a, b| a.query_id.cmp(&b.query_id));
    let exhausted = n >= population.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut picked: Vec<String> = if exhausted {
        population.iter().map(|q| q.query_id.clone()).collect()
    } else if stratify {
        let mut strata: BTreeMap<QueryKind, Vec<String>> = BTreeMap::new();
        for q in &population {
            strata.entry(q.kind).or_default().push(q.query_id.clone());
        }
        let sizes: Vec<usize> = strata.values().map(Vec::len).collect();
        let alloc = largest_remainder(&sizes, n);
        let mut out = Vec::with_capacity(n);
        for (mut ids, take) in strata.into_values().zip(alloc) {
            ids.shuffle(&mut rng);
            out.extend(ids.into_iter().take(take));
        }
        out
    } else {
        let mut ids: Vec<String> = population.iter().map(|q| q.query_id.clone()).collect();
        ids.shuffle(&mut rng);
        ids.truncate(n);
        ids
    };
    picked.shuffle(&mut rng);
    Ok(Sample {
        seed,
        stratified: stratify,
        exhausted,
        query_ids: picked,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UtilityBreakdown {
    pub total: usize,
    pub counts: BTreeMap<Category, usize>,
    pub fractions: BTreeMap<Category, f64>,
}

pub fn utility_breakdown(labels: &[Label]) -> UtilityBreakdown {
    let live = live_labels(labels);
    let mut counts: BTreeMap<Category, usize> = BTreeMap::new();
    for l in &live {
        *counts.entry(l.category).or_default() += 1;
    }
    let total = live.len();
    let fractions = counts.iter().map(|(&c, &k)| (c, ratio(k, total))).collect();
    UtilityBreakdown {
        total,
        counts,
        fractions,
    }
}

/// Live labels marking as nonsensical a query that the rule tables kept.
pub fn rule_disagreements(labels: &[Label], queries: &[Query]) -> usize {
    let kept: HashMap<&str, bool> = queries
        .iter()
        .map(|q| (q.query_id.as_str(), !q.state.is_pruned()))
        .collect();
    live_labels(labels)
        .iter()
        .filter(|l| l.category == Category::Nonsensical)
        .filter(|l| kept.get(l.query_id.as_str()).copied().unwrap_or(false))
        .count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRecord {
    pub query_id: String,
    pub surface: String,
    pub best_confidence: f64,
    pub subject: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object2: Option<String>,
}

/// Live queries whose best answer falls below θ, by subject then
/// confidence.
pub fn gap_report(queries: &[Query], answers: &[QueryAnswer], theta: f64) -> Vec<GapRecord> {
    let top = top_confidences(answers);
    let mut gaps: Vec<GapRecord> = queries
        .iter()
        .filter(|q| q.is_live())
        .filter_map(|q| {
            let best = top.get(q.query_id.as_str()).copied().unwrap_or(0.0);
            (best < theta).then(|| GapRecord {
                query_id: q.query_id.clone(),
                surface: q.surface.clone(),
                best_confidence: best,
                subject: q.subject.clone(),
                object2: q.object2.clone(),
            })
        })
        .collect();
    gaps.sort_by(|a, b| {
        a.subject
            .cmp(&b.subject)
            .then_with(|| a.best_confidence.total_cmp(&b.best_confidence))
            .then_with(|| a.query_id.cmp(&b.query_id))
    });
    gaps
}

/// Renders rows as left-aligned columns separated by two spaces.
pub fn aligned(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for r in rows {
        let mut line = String::new();
        for (c, cell) in r.iter().enumerate() {
            if c + 1 == r.len() {
                line.push_str(cell);
            } else {
                let _ = write!(line, "{:<w$}  ", cell, w = widths[c]);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

pub fn coverage_text(r: &CoverageReport) -> String {
    let mut rows = vec![vec![
        "kind".to_string(),
        "total".into(),
        "answered".into(),
        "coverage".into(),
    ]];
    for (k, row) in &r.per_kind {
        rows.push(vec![
            k.to_string(),
            row.total.to_string(),
            row.answered.to_string(),
            format!("{:.4}", row.coverage),
        ]);
    }
    rows.push(vec![
        "all".into(),
        r.total_queries.to_string(),
        r.answered_high_conf.to_string(),
        format!("{:.4}", r.coverage),
    ]);
    let mut out = format!("coverage at theta {:.2}\n", r.theta);
    if r.no_live_queries {
        out.push_str("no live queries\n");
    }
    out + &aligned(&rows)
}

pub fn precision_text(p: &PrecisionEstimate) -> String {
    aligned(&[
        vec!["attempted".into(), "correct".into(), "precision".into(), "lo".into(), "hi".into(), "z".into()],
        vec![
            p.attempted.to_string(),
            p.correct.to_string(),
            format!("{:.4}", p.point),
            format!("{:.4}", p.lo),
            format!("{:.4}", p.hi),
            format!("{:.2}", p.z),
        ],
    ])
}

pub fn utility_text(u: &UtilityBreakdown) -> String {
    if u.total == 0 {
        return "no labels\n".to_string();
    }
    let mut rows = vec![vec!["category".to_string(), "count".into(), "fraction".into()]];
    for c in Category::ALL {
        let n = u.counts.get(c).copied().unwrap_or(0);
        rows.push(vec![c.as_str().into(), n.to_string(), format!("{:.4}", ratio(n, u.total))]);
    }
    rows.push(vec!["all".into(), u.total.to_string(), "1.0000".into()]);
    aligned(&rows)
}

pub fn gaps_text(gaps: &[GapRecord]) -> String {
    let mut rows = vec![vec!["query_id".to_string(), "confidence".into(), "surface".into()]];
    for g in gaps {
        rows.push(vec![
            g.query_id.clone(),
            format!("{:.4}", g.best_confidence),
            g.surface.clone(),
        ]);
    }
    aligned(&rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::querygen::QueryState;

    fn label(q: &str, cat: Category, correct: Option<bool>, who: &str) -> Label {
        Label {
            query_id: q.into(),
            category: cat,
            answer_correct: correct,
            reviewer: who.into(),
            ts: 0,
        }
    }

    fn query(id: &str, kind: QueryKind, state: QueryState) -> Query {
        Query {
            query_id: id.into(),
            kind,
            interrogative: None,
            subject: format!("s{}", &id[..1]),
            object2: None,
            verb: None,
            adjective: None,
            surface: format!("{id}?"),
            state,
        }
    }

    fn answer(id: &str, conf: f64) -> QueryAnswer {
        let mut a = QueryAnswer::new(id);
        a.related.push(crate::answer::RelatedObject {
            object_id: "x".into(),
            score: conf,
        });
        a
    }

    #[test]
    fn wilson_reference_values() {
        let (lo, hi) = wilson_interval(15, 20, 1.96).unwrap();
        assert!((lo - 0.5313).abs() < 1e-3 && (hi - 0.8881).abs() < 1e-3);
        let (lo, hi) = wilson_interval(1, 1, 1.96).unwrap();
        assert!(lo > 0.0 && lo < 1.0 && hi == 1.0);
        assert_eq!(wilson_interval(7, 10, 0.0).unwrap(), (0.7, 0.7));
        assert!(matches!(wilson_interval(0, 0, 1.96), Err(Error::NoJudgments)));
    }

    #[test]
    fn precision_counts_only_judged_live_labels() {
        let labels = vec![
            label("a", Category::UsefulInteresting, Some(false), "r"),
            label("a", Category::UsefulInteresting, Some(true), "r"),
            label("b", Category::Nonsensical, None, "r"),
            label("c", Category::UsefulNotInteresting, Some(false), "r"),
        ];
        let p = precision_with_interval(&labels, DEFAULT_Z).unwrap();
        assert_eq!((p.attempted, p.correct), (2, 1));
        assert!(precision_with_interval(&labels[2..3], DEFAULT_Z).is_err());
    }

    #[test]
    fn coverage_and_gaps_partition_live_queries() {
        let mut qs: Vec<Query> = (0..10)
            .map(|i| query(&format!("{i}q"), QueryKind::ObjectJournalism, QueryState::Answered))
            .collect();
        qs.push(query("xp", QueryKind::ObjectJournalism, QueryState::Pruned("Who×Concept".into())));
        let answers: Vec<QueryAnswer> = (0..10)
            .map(|i| answer(&format!("{i}q"), if i < 6 { 0.9 } else { 0.1 }))
            .collect();
        let c = coverage(&qs, &answers, 0.35);
        assert_eq!((c.total_queries, c.answered_high_conf), (10, 6));
        assert!((c.coverage - 0.6).abs() < 1e-12);
        let gaps = gap_report(&qs, &answers, 0.35);
        assert_eq!(gaps.len() + c.answered_high_conf, c.total_queries);

        let pruned = vec![qs[10].clone()];
        let c = coverage(&pruned, &[], 0.35);
        assert!(c.no_live_queries && c.coverage == 0.0);
    }

    #[test]
    fn largest_remainder_examples() {
        assert_eq!(largest_remainder(&[60, 30, 10], 10), [6, 3, 1]);
        assert_eq!(largest_remainder(&[1, 1, 1], 2), [1, 1, 0]);
        assert_eq!(largest_remainder(&[5, 0], 9), [5, 0]);
    }

    #[test]
    fn sampling_is_seeded_and_stratified() {
        let mut qs = Vec::new();
        for (kind, n) in [
            (QueryKind::ObjectJournalism, 60),
            (QueryKind::PairJournalism, 30),
            (QueryKind::Analogy, 10),
        ] {
            for i in 0..n {
                qs.push(query(&format!("{}{kind}{i}", i % 10), kind, QueryState::Answered));
            }
        }
        let a = sample_for_review(&qs, 10, 7, true).unwrap();
        assert_eq!(a, sample_for_review(&qs, 10, 7, true).unwrap());
        let kinds: Vec<QueryKind> = a
            .query_ids
            .iter()
            .map(|id| qs.iter().find(|q| &q.query_id == id).unwrap().kind)
            .collect();
        let count = |k| kinds.iter().filter(|&&x| x == k).count();
        assert_eq!(count(QueryKind::ObjectJournalism), 6);
        assert_eq!(count(QueryKind::PairJournalism), 3);
        assert_eq!(count(QueryKind::Analogy), 1);
        let all = sample_for_review(&qs, 500, 7, false).unwrap();
        assert!(all.exhausted && all.query_ids.len() == 100);
        assert!(sample_for_review(&qs, 0, 7, false).is_err());
    }

    #[test]
    fn utility_breakdown_uses_live_labels() {
        assert_eq!(utility_breakdown(&[]).total, 0);
        let labels = vec![
            label("a", Category::UsefulInteresting, None, "r"),
            label("b", Category::UsefulInteresting, None, "r"),
            label("c", Category::Nonsensical, None, "r"),
            label("c", Category::UsefulNotInteresting, None, "r"),
            label("c", Category::Nonsensical, None, "s"),
        ];
        let u = utility_breakdown(&labels);
        assert_eq!(u.total, 4);
        assert_eq!(u.fractions[&Category::UsefulInteresting], 0.5);
        assert_eq!(u.fractions[&Category::UsefulNotInteresting], 0.25);
        assert_eq!(u.fractions[&Category::Nonsensical], 0.25);
    }

    #[test]
    fn disagreements_need_a_rule_kept_query() {
        let qs = vec![
            query("a", QueryKind::ObjectJournalism, QueryState::Answered),
            query("b", QueryKind::ObjectJournalism, QueryState::Pruned("What×Person".into())),
        ];
        let labels = vec![
            label("a", Category::Nonsensical, None, "r"),
            label("b", Category::Nonsensical, None, "r"),
        ];
        assert_eq!(rule_disagreements(&labels, &qs), 1);
    }

    #[test]
    fn text_tables_align() {
        let t = aligned(&[vec!["a".into(), "bbb".into()], vec!["cccc".into(), "d".into()]]);
        assert_eq!(t, "a     bbb\ncccc  d\n");
    }
}
