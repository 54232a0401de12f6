//! Corpus pairing: score each pair of corpuses by how many of their
//! cross-corpus questions survive pruning and get answered, then merge
//! pairs above a threshold into groups.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::answer::{build_index, query_terms, retrieve};
use crate::error::{Error, Result};
use crate::ingest::Corpus;
use crate::lexicon::Lexicons;
use crate::objects::{CanonicalObject, ObjectTable};
use crate::pruning::prune_by_rules;
use crate::querygen::{gen_cross_queries, truncate_by_id, Query};

pub const DEFAULT_TAU: f64 = 0.2;
pub const DEFAULT_BUDGET: usize = 5000;

/// A corpus and the objects extracted from it.
#[derive(Debug, Clone)]
pub struct CorpusObjects {
    pub corpus: Corpus,
    pub objects: Vec<CanonicalObject>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub corpus1: String,
    pub corpus2: String,
    pub generated: usize,
    pub useful: usize,
    pub u: f64,
}

/// Cross queries for every (A, B) with A from one corpus and B from the
/// other, in both orders, deduplicated and capped at `budget` by id.
pub fn cross_queries(c1: &CorpusObjects, c2: &CorpusObjects, lex: &Lexicons, budget: usize) -> Vec<Query> {
    let mut pairs = Vec::new();
    for a in &c1.objects {
        for b in &c2.objects {
            pairs.push((a, b));
            pairs.push((b, a));
        }
    }
    let mut seen = BTreeSet::new();
    let queries: Vec<Query> = gen_cross_queries(&pairs, &lex.verbs, &lex.comparatives)
        .into_iter()
        .filter(|q| seen.insert(q.query_id.clone()))
        .collect();
    truncate_by_id(queries, budget)
}

/// Share of cross queries kept by the rule tables and answered at θ or
/// above, using an index over both corpuses.
pub fn usefulness_score(
    c1: &CorpusObjects,
    c2: &CorpusObjects,
    lex: &Lexicons,
    theta: f64,
    budget: usize,
) -> Result<PairScore> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::Threshold(theta));
    }
    if budget == 0 {
        return Err(Error::InvalidArgument("budget must be at least 1".into()));
    }
    let queries = cross_queries(c1, c2, lex, budget);
    let table = ObjectTable::new(c1.objects.iter().chain(&c2.objects).cloned());
    let index = build_index(&[c1.corpus.clone(), c2.corpus.clone()]);
    let mut useful = 0;
    for q in &queries {
        let decision = prune_by_rules(q, &table, &lex.prune_rules, &lex.verb_frames, &lex.comparatives)?;
        if !decision.is_keep() {
            continue;
        }
        let best = retrieve(&query_terms(q, &table, &lex.tagger)?, &index, 1)
            .first()
            .map_or(0.0, |c| c.confidence);
        if best >= theta {
            useful += 1;
        }
    }
    let (corpus1, corpus2) = ordered(&c1.corpus.corpus_id, &c2.corpus.corpus_id);
    Ok(PairScore {
        corpus1,
        corpus2,
        generated: queries.len(),
        useful,
        u: if queries.is_empty() { 0.0 } else { useful as f64 / queries.len() as f64 },
    })
}

fn ordered(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// Scores every unordered pair of the named corpuses.
pub fn score_all(
    corpora: &[CorpusObjects],
    ids: &[String],
    lex: &Lexicons,
    theta: f64,
    budget: usize,
) -> Result<Vec<PairScore>> {
    let by_id: BTreeMap<&str, &CorpusObjects> =
        corpora.iter().map(|c| (c.corpus.corpus_id.as_str(), c)).collect();
    let picked: Vec<&CorpusObjects> = ids
        .iter()
        .map(|id| {
            by_id
                .get(id.as_str())
                .copied()
                .ok_or_else(|| Error::UnknownCorpus(id.clone()))
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for i in 0..picked.len() {
        for j in i + 1..picked.len() {
            out.push(usefulness_score(picked[i], picked[j], lex, theta, budget)?);
        }
    }
    out.sort_by(|a, b| (&a.corpus1, &a.corpus2).cmp(&(&b.corpus1, &b.corpus2)));
    Ok(out)
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

/// Connected components of the graph joining corpuses whose pair score is
/// at least `tau`. Every unordered pair must be scored. Groups are sorted,
/// and listed by their first member.
pub fn group_corpuses(ids: &[String], scores: &[PairScore], tau: f64) -> Result<Vec<Vec<String>>> {
    let ids: Vec<String> = ids.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let pos: BTreeMap<&str, usize> = ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut u: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for s in scores {
        let (Some(&a), Some(&b)) = (pos.get(s.corpus1.as_str()), pos.get(s.corpus2.as_str())) else {
            continue;
        };
        u.insert((a.min(b), a.max(b)), s.u);
    }
    let mut uf = UnionFind::new(ids.len());
    for i in 0..ids.len() {
        for j in i + 1..ids.len() {
            let score = u
                .get(&(i, j))
                .ok_or_else(|| Error::MissingPairScore(ids[i].clone(), ids[j].clone()))?;
            if *score >= tau {
                uf.union(i, j);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for (i, id) in ids.iter().enumerate() {
        groups.entry(uf.find(i)).or_default().push(id.clone());
    }
    let mut out: Vec<Vec<String>> = groups.into_values().collect();
    out.sort();
    Ok(out)
}

pub fn pairs_tsv(scores: &[PairScore]) -> String {
    let mut out = String::from("# version 1\n# corpus1\tcorpus2\tgenerated\tuseful\tu\n");
    for s in scores {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{:.6}",
            s.corpus1, s.corpus2, s.generated, s.useful, s.u
        );
    }
    out
}
