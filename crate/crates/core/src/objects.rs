//! Object extraction: noun-phrase chunks become canonical objects, each
//! assigned one of the four object types.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::stable_id;
use crate::ingest::{noun_lemma, Chunk, Corpus, Token};
use crate::lexicon::parse_tsv;
use crate::types::{ObjectType, PosTag};

/// One occurrence of an object in a sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectMention {
    pub corpus_id: String,
    pub doc_id: String,
    pub sent_index: usize,
    pub chunk: Chunk,
    pub surface: String,
    pub object_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalObject {
    pub object_id: String,
    pub canonical: String,
    #[serde(rename = "type")]
    pub object_type: ObjectType,
    pub mention_count: usize,
    pub quantified: bool,
    /// Article most often seen in front of the mentions, used when the
    /// object is realized inside a question ("the US Civil War").
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub article: Option<String>,
}

impl CanonicalObject {
    /// Builds an object from its canonical form, classifying it with `gaz`.
    pub fn new(canonical: &str, gaz: &TypeGazetteer) -> Self {
        let class = classify(canonical, gaz);
        CanonicalObject {
            object_id: object_id(canonical),
            canonical: canonical.to_string(),
            object_type: class.object_type,
            mention_count: 1,
            quantified: class.quantified,
            article: None,
        }
    }

    pub fn with_article(mut self, article: &str) -> Self {
        self.article = Some(article.to_string());
        self
    }

    /// The canonical form with its article, for use mid-sentence.
    pub fn phrase(&self) -> String {
        match &self.article {
            Some(a) => format!("{a} {}", self.canonical),
            None => self.canonical.clone(),
        }
    }
}

pub fn object_id(canonical: &str) -> String {
    stable_id(&["object", canonical])
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TypeGazetteer {
    pub person_titles: BTreeSet<String>,
    pub person_names: BTreeSet<String>,
    pub location_terms: BTreeSet<String>,
    pub location_suffixes: BTreeSet<String>,
    pub concept_terms: BTreeSet<String>,
    pub concept_suffixes: BTreeSet<String>,
    pub quantified_terms: BTreeSet<String>,
}

impl TypeGazetteer {
    /// Parses `term<TAB>category` rows. A term may appear under only one
    /// category; terms other than titles are lowercased.
    pub fn from_tsv(text: &str, source: &Path) -> Result<Self> {
        let mut gaz = TypeGazetteer::default();
        let mut seen: BTreeMap<String, String> = BTreeMap::new();
        for row in parse_tsv(text, source, 2)? {
            let category = row.fields[1].to_lowercase();
            let term = if category == "title" {
                row.fields[0].to_string()
            } else {
                row.fields[0].to_lowercase()
            };
            if let Some(prev) = seen.get(&term) {
                if *prev != category {
                    return Err(Error::parse(
                        source,
                        row.line,
                        format!("term `{term}` already listed as `{prev}`"),
                    ));
                }
            }
            seen.insert(term.clone(), category.clone());
            let set = match category.as_str() {
                "title" => &mut gaz.person_titles,
                "person" => &mut gaz.person_names,
                "location" => &mut gaz.location_terms,
                "location_suffix" => &mut gaz.location_suffixes,
                "concept" => &mut gaz.concept_terms,
                "concept_suffix" => &mut gaz.concept_suffixes,
                "quantified" => &mut gaz.quantified_terms,
                other => {
                    return Err(Error::parse(
                        source,
                        row.line,
                        format!("unknown gazetteer category `{other}`"),
                    ))
                }
            };
            set.insert(term);
        }
        Ok(gaz)
    }

    /// Lowercase names that mark a sentence-initial capitalized word as a
    /// proper noun.
    pub fn proper_noun_terms(&self) -> impl Iterator<Item = String> + '_ {
        self.person_names
            .iter()
            .chain(self.location_terms.iter())
            .cloned()
    }
}

fn is_capitalized(word: &str) -> bool {
    word.chars().next().is_some_and(char::is_uppercase)
}

fn suffix_hit(word: &str, suffixes: &BTreeSet<String>) -> bool {
    suffixes
        .iter()
        .any(|s| word.len() >= s.len() + 3 && word.ends_with(s.as_str()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Classification {
    pub object_type: ObjectType,
    pub quantified: bool,
}

/// Assigns a type by fixed priority: Person, Location, Concept, an
/// all-proper multiword fallback to Person, and finally Object.
pub fn classify(canonical: &str, gaz: &TypeGazetteer) -> Classification {
    let words: Vec<&str> = canonical.split_whitespace().collect();
    let Some(&last) = words.last() else {
        return Classification {
            object_type: ObjectType::Object,
            quantified: false,
        };
    };
    let head = last.trim_end_matches('.').to_lowercase();
    let lower = |w: &str| w.trim_end_matches('.').to_lowercase();
    let capitalized_hit =
        |set: &BTreeSet<String>| words.iter().any(|w| is_capitalized(w) && set.contains(&lower(w)));

    let titled = words.len() > 1 && gaz.person_titles.contains(words[0]);
    let object_type = if titled
        || capitalized_hit(&gaz.person_names)
        || gaz.person_names.contains(&head)
    {
        ObjectType::Person
    } else if gaz.location_terms.contains(&head)
        || capitalized_hit(&gaz.location_terms)
        || (is_capitalized(last) && suffix_hit(&head, &gaz.location_suffixes))
    {
        ObjectType::Location
    } else if gaz.concept_terms.contains(&head) || suffix_hit(&head, &gaz.concept_suffixes) {
        ObjectType::Concept
    } else if words.len() > 1 && words.iter().all(|w| is_capitalized(w)) {
        ObjectType::Person
    } else {
        ObjectType::Object
    };
    Classification {
        object_type,
        quantified: object_type == ObjectType::Concept || gaz.quantified_terms.contains(&head),
    }
}

pub fn classify_type(obj: &CanonicalObject, gaz: &TypeGazetteer) -> ObjectType {
    classify(&obj.canonical, gaz).object_type
}

/// Canonical tokens of a chunk: leading determiners dropped, non-proper
/// tokens lowercased and the head noun lemmatized.
pub fn canonicalize(tokens: &[Token]) -> Vec<Token> {
    let body: Vec<&Token> = tokens.iter().skip_while(|t| t.pos == PosTag::Det).collect();
    let n = body.len();
    body.into_iter()
        .enumerate()
        .map(|(i, t)| {
            let mut t = t.clone();
            if t.pos != PosTag::Propn {
                let lower = t.surface.to_lowercase();
                t.surface = if i + 1 == n && t.pos == PosTag::Noun {
                    noun_lemma(&lower)
                } else {
                    lower
                };
                t.lemma = t.surface.clone();
            }
            t
        })
        .collect()
}

pub fn canonical_form(tokens: &[Token]) -> String {
    tokens
        .iter()
        .map(|t| t.surface.as_str())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Objects and their mentions; objects are ordered by canonical form.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Extraction {
    pub objects: Vec<CanonicalObject>,
    pub mentions: Vec<ObjectMention>,
}

impl Extraction {
    pub fn table(&self) -> ObjectTable {
        ObjectTable::new(self.objects.iter().cloned())
    }
}

/// Objects keyed by id, for slot lookups during pruning and answering.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObjectTable {
    by_id: BTreeMap<String, CanonicalObject>,
}

impl ObjectTable {
    pub fn new(objects: impl IntoIterator<Item = CanonicalObject>) -> Self {
        ObjectTable {
            by_id: objects
                .into_iter()
                .map(|o| (o.object_id.clone(), o))
                .collect(),
        }
    }

    pub fn get(&self, object_id: &str) -> Result<&CanonicalObject> {
        self.by_id
            .get(object_id)
            .ok_or_else(|| Error::UnknownObject(object_id.to_string()))
    }

    pub fn contains(&self, object_id: &str) -> bool {
        self.by_id.contains_key(object_id)
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &CanonicalObject> {
        self.by_id.values()
    }
}

pub fn extract_objects(corpus: &Corpus, gaz: &TypeGazetteer) -> Extraction {
    extract_from(std::slice::from_ref(corpus), gaz)
}

/// Extracts objects across several corpuses, merging identical canonical
/// forms.
pub fn extract_from(corpora: &[Corpus], gaz: &TypeGazetteer) -> Extraction {
    let mut mentions = Vec::new();
    // canonical -> article counts (None counted under "")
    let mut articles: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    for corpus in corpora {
        for sentence in corpus.sentences() {
            for &chunk in &sentence.chunks {
                let tokens = sentence.chunk_tokens(chunk);
                let canonical = canonical_form(&canonicalize(tokens));
                let article = tokens
                    .first()
                    .filter(|t| t.pos == PosTag::Det)
                    .map(|t| t.surface.to_lowercase())
                    .filter(|a| matches!(a.as_str(), "the" | "a" | "an"))
                    .unwrap_or_default();
                *articles
                    .entry(canonical.clone())
                    .or_default()
                    .entry(article)
                    .or_default() += 1;
                mentions.push(ObjectMention {
                    corpus_id: corpus.corpus_id.clone(),
                    doc_id: sentence.doc_id.clone(),
                    sent_index: sentence.index,
                    chunk,
                    surface: sentence.chunk_text(chunk).to_string(),
                    object_id: object_id(&canonical),
                });
            }
        }
    }
    let objects = articles
        .into_iter()
        .map(|(canonical, counts)| {
            let total = counts.values().sum();
            // Most frequent article; ties go to the lexicographically first.
            let (best, _) = counts
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
                .expect("at least one mention");
            let mut obj = CanonicalObject::new(&canonical, gaz);
            obj.mention_count = total;
            obj.article = (!best.is_empty()).then(|| best.clone());
            obj
        })
        .collect();
    Extraction { objects, mentions }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{analyze_sentence, corpus_from_str};
    use crate::lexicon::Lexicons;

    fn corpus(text: &str) -> Corpus {
        let lex = Lexicons::builtin();
        corpus_from_str("c", text, false, "d", Path::new("t.txt"), &lex.tagger).unwrap()
    }

    #[test]
    fn grant_sentence_yields_two_objects() {
        let lex = Lexicons::builtin();
        let ex = extract_objects(
            &corpus("General Grant was in the US Civil War."),
            &lex.gazetteer,
        );
        let names: Vec<&str> = ex.objects.iter().map(|o| o.canonical.as_str()).collect();
        assert_eq!(names, vec!["General Grant", "US Civil War"]);
        assert_eq!(ex.objects[0].object_type, ObjectType::Person);
        assert_eq!(ex.objects[1].object_type, ObjectType::Concept);
        assert_eq!(ex.objects[1].article.as_deref(), Some("the"));
        assert_eq!(ex.objects[0].article, None);
    }

    #[test]
    fn repeated_mentions_are_merged() {
        let lex = Lexicons::builtin();
        let ex = extract_objects(&corpus("the cat saw the cat"), &lex.gazetteer);
        assert_eq!(ex.objects.len(), 1);
        assert_eq!(ex.objects[0].canonical, "cat");
        assert_eq!(ex.objects[0].mention_count, 2);
        assert_eq!(ex.mentions.len(), 2);
    }

    #[test]
    fn head_noun_is_lemmatized() {
        let lex = Lexicons::builtin();
        let ex = extract_objects(&corpus("the wars ended"), &lex.gazetteer);
        assert_eq!(ex.objects[0].canonical, "war");
        assert_eq!(ex.objects[0].object_type, ObjectType::Concept);
    }

    #[test]
    fn classification_examples() {
        let gaz = Lexicons::builtin().gazetteer;
        let t = |s: &str| classify(s, &gaz);
        assert_eq!(t("General Grant").object_type, ObjectType::Person);
        assert_eq!(t("US Civil War").object_type, ObjectType::Concept);
        assert_eq!(t("kitchen table").object_type, ObjectType::Object);
        assert!(!t("kitchen table").quantified);
        assert_eq!(t("France").object_type, ObjectType::Location);
        assert_eq!(t("Mississippi River").object_type, ObjectType::Location);
        assert_eq!(t("Maryland").object_type, ObjectType::Location);
        assert_eq!(t("nationalism").object_type, ObjectType::Concept);
        assert_eq!(t("Ulysses Hiram").object_type, ObjectType::Person);
        let oil = t("Oil Production");
        assert_eq!(oil.object_type, ObjectType::Concept);
        assert!(oil.quantified);
        let price = t("oil price");
        assert_eq!(price.object_type, ObjectType::Object);
        assert!(price.quantified);
    }

    #[test]
    fn title_beats_other_categories() {
        // "Washington" alone is a person name here; the title makes the
        // multiword reading unambiguous.
        let gaz = Lexicons::builtin().gazetteer;
        assert_eq!(classify("President Lincoln", &gaz).object_type, ObjectType::Person);
    }

    #[test]
    fn canonicalization_is_idempotent_on_examples() {
        let lex = Lexicons::builtin();
        for text in ["the old red barns", "General Grant", "the US Civil War", "a paper clip"] {
            let s = analyze_sentence(text, &lex.tagger);
            let once = canonicalize(s.chunk_tokens(s.chunks[0]));
            let twice = canonicalize(&once);
            assert_eq!(canonical_form(&once), canonical_form(&twice));
        }
    }

    #[test]
    fn gazetteer_rejects_conflicting_categories() {
        let err = TypeGazetteer::from_tsv("war\tconcept\nwar\tperson\n", Path::new("g.tsv"))
            .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = TypeGazetteer::from_tsv("war\tthing\n", Path::new("g.tsv")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn ids_depend_only_on_canonical_form() {
        let gaz = Lexicons::builtin().gazetteer;
        let a = CanonicalObject::new("US Civil War", &gaz);
        let b = CanonicalObject::new("US Civil War", &gaz).with_article("the");
        assert_eq!(a.object_id, b.object_id);
        assert_ne!(a.object_id, CanonicalObject::new("war", &gaz).object_id);
    }
}
