#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use autoquery::ingest::{corpus_from_str, Corpus};
use autoquery::lexicon::Lexicons;
use autoquery::objects::Extraction;
use autoquery::pipeline::Settings;
use autoquery::workspace::Workspace;
use autoquery::QueryKind;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub const FIXTURES: &[(&str, &str)] = &[
    ("civil_war.txt", "civil-war"),
    ("kitchen.jsonl", "kitchen"),
    ("astronomy.txt", "astronomy"),
];

pub fn corpus(id: &str, text: &str, lex: &Lexicons) -> Corpus {
    corpus_from_str(id, text, false, id, Path::new("test"), &lex.tagger).unwrap()
}

/// Ingests the three fixture corpora and runs every stage once.
pub fn build_workspace(root: &Path) -> Workspace {
    let ws = Workspace::create(root).unwrap();
    let cfg = ws.config().unwrap();
    let lex = ws.lexicons(&cfg).unwrap();
    for (file, id) in FIXTURES {
        ws.ingest(&fixture(file), id, &lex).unwrap();
    }
    run_stages(&ws);
    ws
}

pub fn run_stages(ws: &Workspace) {
    let cfg = ws.config().unwrap();
    let lex = ws.lexicons(&cfg).unwrap();
    let s: Settings = cfg.settings.clone();
    ws.objects_stage(&lex).unwrap();
    ws.generate_stage(&lex, QueryKind::ALL.iter().copied().collect(), s.max_queries)
        .unwrap();
    ws.prune_stage(&lex, &s).unwrap();
    ws.answer_stage(&lex, &s).unwrap();
    ws.coverage_report(s.theta).unwrap();
    ws.gaps_report(s.theta).unwrap();
    ws.pair_stage(&lex, &s).unwrap();
    ws.sample_stage(20, 7, true).unwrap();
}

/// Every file under `root`, keyed by relative path.
pub fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}

const NOUNS: &[&str] = &[
    "river", "bridge", "farmer", "market", "harvest", "storm", "wagon", "mill", "tax", "road",
];
const ADJS: &[&str] = &["old", "new", "small", "large", "red", ""];
const PLACES: &[&str] = &["Boston", "Denver", "Paris", "Lisbon"];
const VERBS: &[&str] = &["crossed", "visited", "watched", "built", "repaired"];

/// A random corpus of `n` short sentences over a small vocabulary, so
/// objects recur and share contexts.
pub fn random_corpus(rng: &mut ChaCha8Rng, id: &str, n: usize, lex: &Lexicons) -> Corpus {
    let mut text = String::new();
    for _ in 0..n {
        let adj = ADJS.choose(rng).unwrap();
        let subject = NOUNS.choose(rng).unwrap();
        let verb = VERBS.choose(rng).unwrap();
        let object = NOUNS.choose(rng).unwrap();
        let mut s = if adj.is_empty() {
            format!("The {subject} {verb} the {object}")
        } else {
            format!("The {adj} {subject} {verb} the {object}")
        };
        if rng.random_bool(0.5) {
            s.push_str(&format!(" near {}", PLACES.choose(rng).unwrap()));
        }
        s.push_str(". ");
        text.push_str(&s);
    }
    corpus(id, &text, lex)
}

/// Brute-force co-occurrence statistics, computed densely from the
/// extraction's mentions.
pub struct Oracle {
    pub objects: Vec<String>,
    pub canonical: BTreeMap<String, String>,
    pub lemmas: Vec<String>,
    pub ppmi: BTreeMap<String, Vec<f64>>,
    pub presence: BTreeMap<String, Vec<bool>>,
}

impl Oracle {
    pub fn new(corpora: &[Corpus], ex: &Extraction, min_count: usize) -> Oracle {
        let mut keys = Vec::new();
        let mut sent_lemmas = Vec::new();
        for c in corpora {
            for s in c.sentences() {
                keys.push((c.corpus_id.clone(), s.doc_id.clone(), s.index));
                sent_lemmas.push(s.content_lemmas());
            }
        }
        let mut objects: Vec<String> = ex
            .objects
            .iter()
            .filter(|o| o.mention_count >= min_count)
            .map(|o| o.object_id.clone())
            .collect();
        objects.sort();
        let canonical: BTreeMap<String, String> = ex
            .objects
            .iter()
            .map(|o| (o.object_id.clone(), o.canonical.clone()))
            .collect();
        let mut presence = BTreeMap::new();
        for o in &objects {
            let mut v = vec![false; keys.len()];
            for m in ex.mentions.iter().filter(|m| &m.object_id == o) {
                let k = (m.corpus_id.clone(), m.doc_id.clone(), m.sent_index);
                let i = keys.iter().position(|x| *x == k).unwrap();
                v[i] = true;
            }
            presence.insert(o.clone(), v);
        }
        let lemmas: Vec<String> = sent_lemmas
            .iter()
            .flatten()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();

        let mut counts: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for o in &objects {
            let own: Vec<String> = canonical[o].split(' ').map(|w| w.to_lowercase()).collect();
            let row: Vec<f64> = lemmas
                .iter()
                .map(|l| {
                    if own.contains(l) {
                        return 0.0;
                    }
                    (0..keys.len())
                        .filter(|&i| presence[o][i] && sent_lemmas[i].contains(l))
                        .count() as f64
                })
                .collect();
            counts.insert(o.clone(), row);
        }
        let total: f64 = counts.values().flatten().sum();
        let col: Vec<f64> = (0..lemmas.len())
            .map(|j| counts.values().map(|r| r[j]).sum())
            .collect();
        let mut ppmi = BTreeMap::new();
        for (o, row) in &counts {
            let row_total: f64 = row.iter().sum();
            let v: Vec<f64> = row
                .iter()
                .enumerate()
                .map(|(j, &n)| {
                    if n == 0.0 {
                        return 0.0;
                    }
                    let p_oc = n / total;
                    let p_o = row_total / total;
                    let p_c = col[j] / total;
                    (p_oc / (p_o * p_c)).ln().max(0.0)
                })
                .collect();
            ppmi.insert(o.clone(), v);
        }
        Oracle {
            objects,
            canonical,
            lemmas,
            ppmi,
            presence,
        }
    }

    pub fn similarity(&self, a: &str, b: &str) -> f64 {
        let (va, vb) = (&self.ppmi[a], &self.ppmi[b]);
        let dot: f64 = va.iter().zip(vb).map(|(x, y)| x * y).sum();
        let na = va.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = vb.iter().map(|x| x * x).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            0.0
        } else {
            (dot / (na * nb)).clamp(0.0, 1.0)
        }
    }

    /// All other objects ranked by similarity to `a`, scores rounded so
    /// that values equal up to float noise tie.
    pub fn ranking(&self, a: &str) -> Vec<(String, f64)> {
        let mut v: Vec<(String, f64)> = self
            .objects
            .iter()
            .filter(|b| b.as_str() != a)
            .map(|b| (b.clone(), self.similarity(a, b)))
            .collect();
        let key = |s: f64| (s * 1e9).round() as i64;
        v.sort_by(|(x, sx), (y, sy)| {
            key(*sy)
                .cmp(&key(*sx))
                .then_with(|| self.canonical[x].cmp(&self.canonical[y]))
                .then_with(|| x.cmp(y))
        });
        v
    }

    pub fn reverse_check(&self, a: &str, b: &str, k: usize) -> bool {
        self.ranking(b).iter().take(k).any(|(o, _)| o == a)
    }

    /// Pearson correlation of the two presence vectors.
    pub fn phi(&self, a: &str, b: &str) -> Option<f64> {
        let xa: Vec<f64> = self.presence[a].iter().map(|&p| p as u8 as f64).collect();
        let xb: Vec<f64> = self.presence[b].iter().map(|&p| p as u8 as f64).collect();
        let n = xa.len() as f64;
        let ma = xa.iter().sum::<f64>() / n;
        let mb = xb.iter().sum::<f64>() / n;
        let cov: f64 = xa.iter().zip(&xb).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = xa.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = xb.iter().map(|y| (y - mb).powi(2)).sum();
        if va == 0.0 || vb == 0.0 {
            None
        } else {
            Some(cov / (va * vb).sqrt())
        }
    }
}

/// Components of the graph with an edge wherever `u[i][j] >= tau`, found
/// by breadth-first search.
pub fn reachability_groups(ids: &[String], u: &[Vec<f64>], tau: f64) -> Vec<Vec<String>> {
    let n = ids.len();
    let mut seen = vec![false; n];
    let mut groups = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        let mut group = vec![];
        let mut queue = std::collections::VecDeque::from([start]);
        seen[start] = true;
        while let Some(i) = queue.pop_front() {
            group.push(ids[i].clone());
            for j in 0..n {
                if !seen[j] && i != j && u[i][j] >= tau {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        group.sort();
        groups.push(group);
    }
    groups.sort();
    groups
}

pub fn random_scores(rng: &mut ChaCha8Rng, n: usize) -> (Vec<String>, Vec<Vec<f64>>, Vec<autoquery::pairing::PairScore>) {
    let ids: Vec<String> = (0..n).map(|i| format!("c{i}")).collect();
    let mut u = vec![vec![0.0; n]; n];
    let mut scores = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            // Coarse values make exact-threshold ties common.
            let x = (rng.random_range(0..=20) as f64) / 20.0;
            u[i][j] = x;
            u[j][i] = x;
            scores.push(autoquery::pairing::PairScore {
                corpus1: ids[i].clone(),
                corpus2: ids[j].clone(),
                generated: 20,
                useful: (x * 20.0).round() as usize,
                u: x,
            });
        }
    }
    (ids, u, scores)
}
