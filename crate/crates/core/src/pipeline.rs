//! In-memory pipeline stages shared by the CLI, the service and the FFI.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::answer::{
    build_cooccurrence_model, build_index, query_terms, retrieve, CooccurrenceModel, QueryAnswer,
    SentenceIndex,
};
use crate::error::{Error, Result};
use crate::ingest::Corpus;
use crate::lexicon::Lexicons;
use crate::objects::{extract_from, Extraction, ObjectTable};
use crate::pruning::{prune_by_max_confidence, prune_by_rules, Classification, NonsenseHistory, PruneDecision};
use crate::querygen::{gen_analogy_extensions, generate, GenerationConfig, Query, QueryState, Tense};
use crate::types::QueryKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub theta: f64,
    pub tau: f64,
    pub topk: usize,
    pub min_count: usize,
    pub max_queries: usize,
    pub budget: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            theta: 0.35,
            tau: crate::pairing::DEFAULT_TAU,
            topk: 5,
            min_count: 2,
            max_queries: 100_000,
            budget: crate::pairing::DEFAULT_BUDGET,
        }
    }
}

impl Settings {
    pub fn validate(&self) -> Result<()> {
        for v in [self.theta, self.tau] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Threshold(v));
            }
        }
        if self.topk == 0 || self.budget == 0 {
            return Err(Error::InvalidArgument("topk and budget must be at least 1".into()));
        }
        Ok(())
    }
}

/// Everything needed to answer queries over a set of corpora.
pub struct Answerer<'a> {
    pub lex: &'a Lexicons,
    pub table: ObjectTable,
    pub index: SentenceIndex,
    pub model: CooccurrenceModel,
    pub topk: usize,
}

impl<'a> Answerer<'a> {
    pub fn new(lex: &'a Lexicons, corpora: &[Corpus], extraction: &Extraction, settings: &Settings) -> Self {
        Answerer {
            lex,
            table: extraction.table(),
            index: build_index(corpora),
            model: build_cooccurrence_model(corpora, extraction, settings.min_count),
            topk: settings.topk,
        }
    }

    /// Retrieval for sentence-answered kinds; the co-occurrence model for
    /// analogy (nearest objects plus a reverse check) and correlation.
    pub fn answer(&self, q: &Query) -> Result<QueryAnswer> {
        let mut a = QueryAnswer::new(&q.query_id);
        match q.kind {
            QueryKind::Analogy => {
                self.table.get(&q.subject)?;
                if self.model.contains(&q.subject) {
                    a.related = self.model.nearest(&q.subject, self.topk)?;
                    if let Some(best) = a.related.first() {
                        a.reverse_check =
                            Some(self.model.reverse_check(&q.subject, &best.object_id, self.topk)?);
                    }
                }
            }
            QueryKind::Correlation => {
                self.table.get(&q.subject)?;
                if self.model.contains(&q.subject) {
                    let mut related = self.model.correlate(&q.subject)?;
                    related.truncate(self.topk);
                    a.related = related;
                }
            }
            _ => {
                let terms = query_terms(q, &self.table, &self.lex.tagger)?;
                a.candidates = retrieve(&terms, &self.index, self.topk);
            }
        }
        Ok(a)
    }
}

pub fn extract(corpora: &[Corpus], lex: &Lexicons) -> Extraction {
    extract_from(corpora, &lex.gazetteer)
}

pub fn generate_queries(
    corpora: &[Corpus],
    extraction: &Extraction,
    lex: &Lexicons,
    techniques: BTreeSet<QueryKind>,
    max_queries: usize,
) -> Vec<Query> {
    let config = GenerationConfig {
        techniques,
        max_queries,
        tense: Tense::of_corpora(corpora),
    };
    generate(&extraction.objects, &lex.verbs, &lex.comparatives, &config)
}

/// Records the query's confidence at `ts` unless its latest history entry
/// already holds the same value and class, so unchanged reruns leave the
/// history untouched.
fn classify(
    q: &Query,
    confidence: f64,
    theta: f64,
    history: &mut NonsenseHistory,
    ts: u64,
) -> Result<PruneDecision> {
    let class = if confidence < theta {
        Classification::Nonsense
    } else {
        Classification::NonNonsense
    };
    if let Some(last) = history.latest(&q.query_id) {
        if last.max_conf == confidence && last.classification == class {
            return Ok(match class {
                Classification::Nonsense => PruneDecision::Nonsense,
                Classification::NonNonsense => PruneDecision::Keep,
            });
        }
    }
    prune_by_max_confidence(q, confidence, theta, history, ts)
}

/// Rule pruning, then confidence pruning of the survivors. Returns the
/// queries with updated states.
pub fn prune(
    generated: &[Query],
    answerer: &Answerer,
    theta: f64,
    history: &mut NonsenseHistory,
) -> Result<Vec<Query>> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::Threshold(theta));
    }
    let ts = history.max_ts() + 1;
    let lex = answerer.lex;
    let mut out = Vec::with_capacity(generated.len());
    for q in generated {
        let mut q = q.clone();
        if q.state != QueryState::Generated {
            out.push(q);
            continue;
        }
        let rule = prune_by_rules(&q, &answerer.table, &lex.prune_rules, &lex.verb_frames, &lex.comparatives)?;
        let decision = if rule.is_keep() {
            let conf = answerer.answer(&q)?.top_confidence();
            classify(&q, conf, theta, history, ts)?
        } else {
            rule
        };
        if !decision.is_keep() {
            q.transition(decision.state())?;
        }
        out.push(q);
    }
    Ok(out)
}

/// Answers every live query, marks those reaching θ as answered, and adds
/// the follow-up questions for answered analogies. Returns queries and
/// answers sorted by query id.
pub fn answer_all(
    pruned: &[Query],
    answerer: &Answerer,
    theta: f64,
    history: &mut NonsenseHistory,
) -> Result<(Vec<Query>, Vec<QueryAnswer>)> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::Threshold(theta));
    }
    let ts = history.max_ts() + 1;
    let mut queries = Vec::with_capacity(pruned.len());
    let mut answers = Vec::new();
    let mut extensions = Vec::new();
    for q in pruned {
        let mut q = q.clone();
        if q.is_live() {
            let a = answerer.answer(&q)?;
            let conf = a.top_confidence();
            if q.state == QueryState::Generated && conf >= theta {
                q.transition(QueryState::Answered)?;
            }
            if q.kind == QueryKind::Analogy && q.state == QueryState::Answered {
                if let Some(best) = a.related.first() {
                    let subject = answerer.table.get(&q.subject)?;
                    let target = answerer.table.get(&best.object_id)?;
                    extensions.extend(gen_analogy_extensions(&q, subject, target, best.score, theta)?);
                }
            }
            answers.push(a);
        }
        queries.push(q);
    }
    let known: BTreeSet<String> = queries.iter().map(|q| q.query_id.clone()).collect();
    for mut q in extensions {
        if known.contains(&q.query_id) {
            continue;
        }
        let a = answerer.answer(&q)?;
        let decision = classify(&q, a.top_confidence(), theta, history, ts)?;
        q.transition(if decision.is_keep() { QueryState::Answered } else { decision.state() })?;
        answers.push(a);
        queries.push(q);
    }
    queries.sort_by(|a, b| a.query_id.cmp(&b.query_id));
    queries.dedup_by(|a, b| a.query_id == b.query_id);
    crate::answer::sort_answers(&mut answers);
    answers.dedup_by(|a, b| a.query_id == b.query_id);
    Ok((queries, answers))
}

/// Result of running every stage in memory.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub extraction: Extraction,
    pub generated: Vec<Query>,
    pub pruned: Vec<Query>,
    pub queries: Vec<Query>,
    pub answers: Vec<QueryAnswer>,
    pub history: NonsenseHistory,
}

pub fn run(corpora: &[Corpus], lex: &Lexicons, settings: &Settings) -> Result<RunOutput> {
    settings.validate()?;
    let extraction = extract(corpora, lex);
    let generated = generate_queries(
        corpora,
        &extraction,
        lex,
        QueryKind::ALL.iter().copied().collect(),
        settings.max_queries,
    );
    let answerer = Answerer::new(lex, corpora, &extraction, settings);
    let mut history = NonsenseHistory::new();
    let pruned = prune(&generated, &answerer, settings.theta, &mut history)?;
    let (queries, answers) = answer_all(&pruned, &answerer, settings.theta, &mut history)?;
    Ok(RunOutput {
        extraction,
        generated,
        pruned,
        queries,
        answers,
        history,
    })
}
