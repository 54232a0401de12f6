//! Baseline answering: sentence retrieval scored by a set cosine, and an
//! object co-occurrence model for analogy and correlation questions.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{analyze_sentence, Corpus, TaggerLexicon};
use crate::objects::{Extraction, ObjectTable};
use crate::querygen::Query;
use crate::types::ObjectType;

/// A sentence address. Orders by document, then position, then corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SentId {
    pub doc_id: String,
    pub index: usize,
    pub corpus_id: String,
}

impl fmt::Display for SentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}#{}", self.corpus_id, self.doc_id, self.index)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexedSentence {
    pub id: SentId,
    pub text: String,
    pub lemmas: BTreeSet<String>,
}

/// Inverted index from content lemma to sentences.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SentenceIndex {
    sentences: Vec<IndexedSentence>,
    postings: BTreeMap<String, Vec<usize>>,
    by_id: HashMap<SentId, usize>,
}

impl SentenceIndex {
    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn sentences(&self) -> &[IndexedSentence] {
        &self.sentences
    }

    pub fn get(&self, id: &SentId) -> Option<&IndexedSentence> {
        self.by_id.get(id).map(|&i| &self.sentences[i])
    }

    /// Sentences containing `lemma`, in [`SentId`] order.
    pub fn postings(&self, lemma: &str) -> impl Iterator<Item = &SentId> {
        self.postings
            .get(lemma)
            .into_iter()
            .flatten()
            .map(|&i| &self.sentences[i].id)
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }
}

pub fn build_index(corpora: &[Corpus]) -> SentenceIndex {
    let mut sentences: Vec<IndexedSentence> = corpora
        .iter()
        .flat_map(|c| {
            c.sentences().map(move |s| IndexedSentence {
                id: SentId {
                    doc_id: s.doc_id.clone(),
                    index: s.index,
                    corpus_id: c.corpus_id.clone(),
                },
                text: s.text.clone(),
                lemmas: s.content_lemmas(),
            })
        })
        .collect();
    sentences.sort_by(|a, b| a.id.cmp(&b.id));
    sentences.dedup_by(|a, b| a.id == b.id);
    let mut postings: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, s) in sentences.iter().enumerate() {
        for l in &s.lemmas {
            postings.entry(l.clone()).or_default().push(i);
        }
    }
    let by_id = sentences.iter().enumerate().map(|(i, s)| (s.id.clone(), i)).collect();
    SentenceIndex {
        sentences,
        postings,
        by_id,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerCandidate {
    pub sent_id: SentId,
    pub confidence: f64,
    #[serde(rename = "matched")]
    pub matched_terms: BTreeSet<String>,
}

/// An object offered as the answer to an analogy or correlation question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelatedObject {
    pub object_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryAnswer {
    pub query_id: String,
    pub candidates: Vec<AnswerCandidate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub related: Vec<RelatedObject>,
    /// For analogies: whether the subject is among its answer's own
    /// nearest neighbours.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reverse_check: Option<bool>,
}

impl QueryAnswer {
    pub fn new(query_id: &str) -> Self {
        QueryAnswer {
            query_id: query_id.to_string(),
            candidates: Vec::new(),
            related: Vec::new(),
            reverse_check: None,
        }
    }

    /// Best confidence across evidence sentences and related objects.
    /// Negative correlations count as zero.
    pub fn top_confidence(&self) -> f64 {
        self.candidates
            .iter()
            .map(|c| c.confidence)
            .chain(self.related.iter().map(|r| r.score))
            .fold(0.0, f64::max)
    }
}

/// Set cosine between query and sentence lemma sets.
pub fn confidence(query: &BTreeSet<String>, sentence: &BTreeSet<String>) -> f64 {
    if query.is_empty() || sentence.is_empty() {
        return 0.0;
    }
    let shared = query.intersection(sentence).count() as f64;
    (shared / ((query.len() * sentence.len()) as f64).sqrt()).min(1.0)
}

/// Content lemmas of a query's slots: the subject and second object
/// canonical forms, the verb lemma and the comparative adjective.
pub fn query_terms(q: &Query, objects: &ObjectTable, lex: &TaggerLexicon) -> Result<BTreeSet<String>> {
    let mut terms = analyze_sentence(&objects.get(&q.subject)?.canonical, lex).content_lemmas();
    if let Some(o2) = &q.object2 {
        terms.extend(analyze_sentence(&objects.get(o2)?.canonical, lex).content_lemmas());
    }
    for word in q.verb.iter().chain(q.adjective.iter()) {
        let lower = word.to_lowercase();
        if !lex.is_stopword(&lower) {
            terms.insert(lower);
        }
    }
    Ok(terms)
}

/// Top `k` sentences sharing at least one term with `terms`, by confidence
/// and then sentence id.
pub fn retrieve(terms: &BTreeSet<String>, index: &SentenceIndex, k: usize) -> Vec<AnswerCandidate> {
    let hits: BTreeSet<usize> = terms
        .iter()
        .filter_map(|t| index.postings.get(t))
        .flatten()
        .copied()
        .collect();
    let mut scored: Vec<AnswerCandidate> = hits
        .into_iter()
        .map(|i| {
            let s = &index.sentences[i];
            AnswerCandidate {
                sent_id: s.id.clone(),
                confidence: confidence(terms, &s.lemmas),
                matched_terms: terms.intersection(&s.lemmas).cloned().collect(),
            }
        })
        .collect();
    scored.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then_with(|| a.sent_id.cmp(&b.sent_id))
    });
    scored.truncate(k);
    scored
}

pub fn answer_query(
    q: &Query,
    objects: &ObjectTable,
    lex: &TaggerLexicon,
    index: &SentenceIndex,
    k: usize,
) -> Result<Vec<AnswerCandidate>> {
    Ok(retrieve(&query_terms(q, objects, lex)?, index, k))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelObject {
    pub canonical: String,
    pub eligible: bool,
}

/// PPMI-weighted object × context-lemma matrix over sentence windows, with
/// per-object sentence incidence.
///
/// Counts `n(o, c)` are the number of sentences that mention `o` and
/// contain content lemma `c`, excluding the words of `o` itself.
/// Probabilities are taken over the matrix total.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CooccurrenceModel {
    pub min_count: usize,
    pub sentence_count: usize,
    vocab: BTreeMap<String, ModelObject>,
    counts: BTreeMap<String, BTreeMap<String, usize>>,
    vectors: BTreeMap<String, BTreeMap<String, f64>>,
    incidence: BTreeMap<String, Vec<usize>>,
}

pub fn build_cooccurrence_model(
    corpora: &[Corpus],
    extraction: &Extraction,
    min_count: usize,
) -> CooccurrenceModel {
    let mut sentence_ix: HashMap<(&str, &str, usize), usize> = HashMap::new();
    let mut lemmas: Vec<BTreeSet<String>> = Vec::new();
    for c in corpora {
        for s in c.sentences() {
            let key = (c.corpus_id.as_str(), s.doc_id.as_str(), s.index);
            if let std::collections::hash_map::Entry::Vacant(e) = sentence_ix.entry(key) {
                e.insert(lemmas.len());
                lemmas.push(s.content_lemmas());
            }
        }
    }

    let vocab: BTreeMap<String, ModelObject> = extraction
        .objects
        .iter()
        .filter(|o| o.mention_count >= min_count)
        .map(|o| {
            (
                o.object_id.clone(),
                ModelObject {
                    canonical: o.canonical.clone(),
                    eligible: o.quantified || o.object_type == ObjectType::Concept,
                },
            )
        })
        .collect();

    let mut incidence: BTreeMap<String, BTreeSet<usize>> = BTreeMap::new();
    for m in &extraction.mentions {
        if !vocab.contains_key(&m.object_id) {
            continue;
        }
        if let Some(&i) = sentence_ix.get(&(m.corpus_id.as_str(), m.doc_id.as_str(), m.sent_index)) {
            incidence.entry(m.object_id.clone()).or_default().insert(i);
        }
    }

    let mut counts: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for (oid, sents) in &incidence {
        let own: BTreeSet<String> = vocab[oid]
            .canonical
            .split_whitespace()
            .map(str::to_lowercase)
            .collect();
        let row = counts.entry(oid.clone()).or_default();
        for &i in sents {
            for l in lemmas[i].difference(&own) {
                *row.entry(l.clone()).or_default() += 1;
            }
        }
    }
    counts.retain(|_, row| !row.is_empty());

    let total: usize = counts.values().flat_map(|r| r.values()).sum();
    let mut col: BTreeMap<&str, usize> = BTreeMap::new();
    for row in counts.values() {
        for (c, &n) in row {
            *col.entry(c.as_str()).or_default() += n;
        }
    }
    let mut vectors = BTreeMap::new();
    for (oid, row) in &counts {
        let row_total: usize = row.values().sum();
        let v: BTreeMap<String, f64> = row
            .iter()
            .filter_map(|(c, &n)| {
                let ppmi = ppmi(n, row_total, col[c.as_str()], total);
                (ppmi > 0.0).then(|| (c.clone(), ppmi))
            })
            .collect();
        if !v.is_empty() {
            vectors.insert(oid.clone(), v);
        }
    }

    CooccurrenceModel {
        min_count,
        sentence_count: lemmas.len(),
        vocab,
        counts,
        vectors,
        incidence: incidence
            .into_iter()
            .map(|(k, v)| (k, v.into_iter().collect()))
            .collect(),
    }
}

fn ppmi(joint: usize, row: usize, col: usize, total: usize) -> f64 {
    let pmi = ((joint as f64 * total as f64) / (row as f64 * col as f64)).ln();
    pmi.max(0.0)
}

impl CooccurrenceModel {
    pub fn contains(&self, object_id: &str) -> bool {
        self.vocab.contains_key(object_id)
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = (&str, &ModelObject)> {
        self.vocab.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Nonzero PPMI weights, or `None` when the object has no contexts.
    pub fn vector(&self, object_id: &str) -> Option<&BTreeMap<String, f64>> {
        self.vectors.get(object_id)
    }

    pub fn count(&self, object_id: &str, lemma: &str) -> usize {
        self.counts
            .get(object_id)
            .and_then(|r| r.get(lemma))
            .copied()
            .unwrap_or(0)
    }

    /// Sorted indices of the sentences mentioning the object.
    pub fn incidence(&self, object_id: &str) -> &[usize] {
        self.incidence.get(object_id).map_or(&[], Vec::as_slice)
    }

    fn check(&self, object_id: &str) -> Result<&ModelObject> {
        self.vocab
            .get(object_id)
            .ok_or_else(|| Error::NotInModel(object_id.to_string()))
    }

    pub fn similarity(&self, a: &str, b: &str) -> Result<f64> {
        self.check(a)?;
        self.check(b)?;
        let (Some(va), Some(vb)) = (self.vectors.get(a), self.vectors.get(b)) else {
            return Ok(0.0);
        };
        let dot: f64 = va
            .iter()
            .filter_map(|(c, x)| vb.get(c).map(|y| x * y))
            .sum();
        let norm = |v: &BTreeMap<String, f64>| v.values().map(|x| x * x).sum::<f64>().sqrt();
        let denom = norm(va) * norm(vb);
        Ok(if denom == 0.0 { 0.0 } else { (dot / denom).clamp(0.0, 1.0) })
    }

    fn ranked(&self, mut scored: Vec<(&str, f64)>, k: usize) -> Vec<RelatedObject> {
        scored.sort_by(|(a, sa), (b, sb)| {
            sb.total_cmp(sa)
                .then_with(|| self.vocab[*a].canonical.cmp(&self.vocab[*b].canonical))
                .then_with(|| a.cmp(b))
        });
        scored
            .into_iter()
            .take(k)
            .map(|(id, score)| RelatedObject {
                object_id: id.to_string(),
                score,
            })
            .collect()
    }

    /// The `k` objects most similar to `a`, excluding `a`.
    pub fn nearest(&self, a: &str, k: usize) -> Result<Vec<RelatedObject>> {
        self.check(a)?;
        let mut scored = Vec::with_capacity(self.vocab.len());
        for b in self.vocab.keys().filter(|b| b.as_str() != a) {
            scored.push((b.as_str(), self.similarity(a, b)?));
        }
        Ok(self.ranked(scored, k))
    }

    /// True when `a` is among the `k` nearest neighbours of `b`.
    pub fn reverse_check(&self, a: &str, b: &str, k: usize) -> Result<bool> {
        self.check(a)?;
        Ok(self.nearest(b, k)?.iter().any(|r| r.object_id == a))
    }

    /// Phi coefficient between the sentence incidences of two objects.
    /// `None` when a marginal of the contingency table is zero.
    pub fn phi(&self, a: &str, b: &str) -> Option<f64> {
        let ia = self.incidence(a);
        let ib = self.incidence(b);
        let n = self.sentence_count;
        let n11 = ia.iter().filter(|i| ib.binary_search(i).is_ok()).count();
        phi_from_counts(n11, ia.len() - n11, ib.len() - n11, n + n11 - ia.len() - ib.len())
    }

    /// Every other correlatable object ranked by phi with `a`.
    pub fn correlate(&self, a: &str) -> Result<Vec<RelatedObject>> {
        if !self.check(a)?.eligible {
            return Err(Error::NotCorrelatable(a.to_string()));
        }
        let scored: Vec<(&str, f64)> = self
            .vocab
            .iter()
            .filter(|(b, m)| b.as_str() != a && m.eligible)
            .filter_map(|(b, _)| self.phi(a, b).map(|p| (b.as_str(), p)))
            .collect();
        let n = scored.len();
        Ok(self.ranked(scored, n))
    }
}

/// Phi over a 2×2 table; `None` when any marginal is zero.
pub fn phi_from_counts(n11: usize, n10: usize, n01: usize, n00: usize) -> Option<f64> {
    let (n11, n10, n01, n00) = (n11 as f64, n10 as f64, n01 as f64, n00 as f64);
    let marginals = [n11 + n10, n01 + n00, n11 + n01, n10 + n00];
    if marginals.contains(&0.0) {
        return None;
    }
    let denom = marginals.iter().product::<f64>().sqrt();
    Some(((n11 * n00 - n10 * n01) / denom).clamp(-1.0, 1.0))
}

/// Orders answers as they are written out: by query id.
pub fn sort_answers(answers: &mut [QueryAnswer]) {
    answers.sort_by(|a, b| a.query_id.cmp(&b.query_id));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::corpus_from_str;
    use crate::lexicon::Lexicons;
    use crate::objects::extract_objects;
    use crate::querygen::{gen_object_queries, Tense};
    use std::path::Path;

    fn corpus(id: &str, text: &str) -> Corpus {
        let lex = Lexicons::builtin();
        corpus_from_str(id, text, false, "doc", Path::new("t"), &lex.tagger).unwrap()
    }

    fn set(words: &[&str]) -> BTreeSet<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn grant_index_and_confidence() {
        let lex = Lexicons::builtin();
        let c = corpus("grant", "General Grant was in the US Civil War.");
        let index = build_index(std::slice::from_ref(&c));
        assert_eq!(
            index.vocabulary().collect::<Vec<_>>(),
            ["civil", "general", "grant", "us", "war"]
        );
        let ex = extract_objects(&c, &lex.gazetteer);
        let table = ex.table();
        let qs = gen_object_queries(&ex.objects, Tense::Past);
        let who = qs.iter().find(|q| q.surface == "Who was General Grant?").unwrap();
        let terms = query_terms(who, &table, &lex.tagger).unwrap();
        assert_eq!(terms, set(&["general", "grant"]));
        let cands = answer_query(who, &table, &lex.tagger, &index, 5).unwrap();
        assert_eq!(cands.len(), 1);
        assert!((cands[0].confidence - 2.0 / 10f64.sqrt()).abs() < 1e-12);
        assert_eq!(cands[0].matched_terms, terms);
    }

    #[test]
    fn empty_index_and_disjoint_terms() {
        let empty = build_index(&[]);
        assert!(empty.is_empty());
        assert!(retrieve(&set(&["war"]), &empty, 3).is_empty());
        let c = corpus("c", "The cat sat on the mat.");
        let index = build_index(&[c]);
        assert!(retrieve(&set(&["dog"]), &index, 3).is_empty());
        let exact = retrieve(&set(&["cat", "sat", "mat"]), &index, 3);
        assert_eq!(exact[0].confidence, 1.0);
    }

    #[test]
    fn ties_break_by_sentence_id() {
        let a = corpus("a", "Cats purr loudly. Cats purr softly.");
        let b = corpus("b", "Cats purr loudly.");
        let index = build_index(&[b, a]);
        let got = retrieve(&set(&["cat", "purr"]), &index, 10);
        let ids: Vec<String> = got.iter().map(|c| c.sent_id.to_string()).collect();
        assert_eq!(ids, ["a/doc#0", "b/doc#0", "a/doc#1"]);
    }

    #[test]
    fn phi_hand_values() {
        let p = phi_from_counts(3, 1, 1, 5).unwrap();
        assert!((p - 14.0 / 24.0).abs() < 1e-12);
        assert_eq!(phi_from_counts(4, 0, 0, 6), Some(1.0));
        assert!(phi_from_counts(0, 2, 3, 5).unwrap() < 0.0);
        assert_eq!(phi_from_counts(0, 0, 3, 5), None);
    }

    #[test]
    fn model_thresholds_and_neighbours() {
        let lex = Lexicons::builtin();
        let c = corpus(
            "m",
            "The cat chased a mouse. The cat ate cheese. A dog chased a mouse. \
             The dog ate cheese. The fox barked.",
        );
        let ex = extract_objects(&c, &lex.gazetteer);
        let m = build_cooccurrence_model(std::slice::from_ref(&c), &ex, 2);
        let id = |name: &str| ex.objects.iter().find(|o| o.canonical == name).unwrap().object_id.clone();
        assert!(!m.contains(&id("fox")));
        let (cat, dog) = (id("cat"), id("dog"));
        assert!((m.similarity(&cat, &dog).unwrap() - m.similarity(&dog, &cat).unwrap()).abs() < 1e-12);
        assert!((m.similarity(&cat, &cat).unwrap() - 1.0).abs() < 1e-9);
        assert!(matches!(m.similarity(&cat, &id("fox")), Err(Error::NotInModel(_))));
        let near = m.nearest(&cat, 10).unwrap();
        assert!(near.iter().all(|r| r.object_id != cat));
        assert_eq!(near.len(), m.vocabulary().count() - 1);
    }
}
