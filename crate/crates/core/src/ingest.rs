//! Corpus loading, sentence segmentation, tagging and noun-phrase chunking.
//!
//! Tagging is a fixed priority cascade: closed-class lexicon, then
//! capitalization, then suffix rules, then `NOUN`. Chunks are maximal
//! `DET? ADJ* (NOUN|PROPN)+` spans.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::parse_tsv;
use crate::types::PosTag;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub corpus_id: String,
    pub documents: Vec<Document>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    #[serde(default)]
    pub title: String,
    pub text: String,
    #[serde(default)]
    pub sentences: Vec<Sentence>,
}

/// A segmented, tagged and chunked sentence.
///
/// `start..end` are byte offsets into the owning document's text. Token
/// offsets are relative to `text`. A sentence-final `.`, `?` or `!` run
/// (with any closing quotes) is part of `text` but not of `tokens`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub doc_id: String,
    pub index: usize,
    pub start: usize,
    pub end: usize,
    pub text: String,
    pub tokens: Vec<Token>,
    pub chunks: Vec<Chunk>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub lemma: String,
    pub pos: PosTag,
    pub is_stopword: bool,
    pub start: usize,
    pub end: usize,
}

/// A noun-phrase chunk as a half-open token range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Chunk {
    pub start: usize,
    pub end: usize,
}

impl Token {
    /// True for tokens that carry retrieval content: not a stopword and
    /// containing at least one alphanumeric character.
    pub fn is_content(&self) -> bool {
        !self.is_stopword && self.surface.chars().any(char::is_alphanumeric)
    }

    /// Lowercased lemma, the key used by the retrieval index.
    pub fn index_key(&self) -> String {
        self.lemma.to_lowercase()
    }
}

impl Sentence {
    pub fn chunk_tokens(&self, chunk: Chunk) -> &[Token] {
        &self.tokens[chunk.start..chunk.end]
    }

    pub fn chunk_text(&self, chunk: Chunk) -> &str {
        let first = &self.tokens[chunk.start];
        let last = &self.tokens[chunk.end - 1];
        &self.text[first.start..last.end]
    }

    /// Lowercased lemmas of the content tokens.
    pub fn content_lemmas(&self) -> BTreeSet<String> {
        self.tokens
            .iter()
            .filter(|t| t.is_content())
            .map(Token::index_key)
            .collect()
    }
}

impl Corpus {
    pub fn sentences(&self) -> impl Iterator<Item = &Sentence> {
        self.documents.iter().flat_map(|d| d.sentences.iter())
    }

    pub fn sentence_count(&self) -> usize {
        self.documents.iter().map(|d| d.sentences.len()).sum()
    }
}

/// Word lists the tagger and segmenter consult.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TaggerLexicon {
    stopwords: BTreeSet<String>,
    closed_class: BTreeMap<String, PosTag>,
    abbreviations: BTreeSet<String>,
    proper_nouns: BTreeSet<String>,
}

impl TaggerLexicon {
    /// Parses the stopword, closed-class and abbreviation tables. Each
    /// argument is the file text together with the path used in errors.
    pub fn from_tsv(
        stopwords: (&str, &Path),
        closed_class: (&str, &Path),
        abbreviations: (&str, &Path),
    ) -> Result<Self> {
        let mut lex = TaggerLexicon::default();
        for row in parse_tsv(stopwords.0, stopwords.1, 1)? {
            lex.stopwords.insert(row.fields[0].to_lowercase());
        }
        for row in parse_tsv(closed_class.0, closed_class.1, 2)? {
            let tag: PosTag = row.fields[1]
                .parse()
                .map_err(|m: String| Error::parse(closed_class.1, row.line, m))?;
            lex.closed_class.insert(row.fields[0].to_lowercase(), tag);
        }
        for row in parse_tsv(abbreviations.0, abbreviations.1, 1)? {
            let term = row.fields[0].to_lowercase();
            if !term.ends_with('.') {
                return Err(Error::parse(
                    abbreviations.1,
                    row.line,
                    format!("abbreviation `{term}` must end with `.`"),
                ));
            }
            lex.abbreviations.insert(term);
        }
        Ok(lex)
    }

    /// Adds lowercase proper-noun terms that license a sentence-initial
    /// capitalized word as `PROPN`.
    pub fn with_proper_nouns(mut self, terms: impl IntoIterator<Item = String>) -> Self {
        self.proper_nouns.extend(terms);
        self
    }

    pub fn is_stopword(&self, lower: &str) -> bool {
        self.stopwords.contains(lower)
    }

    pub fn is_abbreviation(&self, lower: &str) -> bool {
        self.abbreviations.contains(lower)
    }

    pub fn stopword_count(&self) -> usize {
        self.stopwords.len()
    }
}

/// Raw token before tagging; offsets are absolute within the scanned text.
#[derive(Debug, Clone, Copy)]
struct Span {
    start: usize,
    end: usize,
}

fn is_joiner(c: char) -> bool {
    matches!(c, '-' | '\'' | '\u{2019}')
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '?' | '!')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}')
}

/// Splits `text` into word and punctuation spans. Hyphenated words stay
/// whole; a possessive `'s` becomes its own token; a word followed by `.`
/// keeps the period when the result is a known abbreviation or a dotted
/// acronym such as `U.S.`.
fn scan(text: &str, lex: &TaggerLexicon) -> Vec<Span> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let byte_at = |i: usize| chars.get(i).map_or(text.len(), |&(b, _)| b);
    let mut spans = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i].1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_alphanumeric() {
            i += 1;
            loop {
                match chars.get(i).map(|&(_, c)| c) {
                    Some(c) if c.is_alphanumeric() => i += 1,
                    Some(j) if is_joiner(j) => {
                        let next = chars.get(i + 1).map(|&(_, c)| c);
                        let is_possessive = j != '-'
                            && matches!(next, Some('s') | Some('S'))
                            && !chars
                                .get(i + 2)
                                .is_some_and(|&(_, c)| c.is_alphanumeric());
                        if is_possessive {
                            break;
                        }
                        if next.is_some_and(char::is_alphanumeric) {
                            i += 2;
                        } else {
                            break;
                        }
                    }
                    Some('.') => {
                        let next = chars.get(i + 1).map(|&(_, c)| c);
                        let word = &text[byte_at(start)..byte_at(i)];
                        let numeric = word.chars().all(|c| c.is_ascii_digit());
                        let dotted = word
                            .rsplit('.')
                            .next()
                            .is_some_and(|seg| seg.chars().count() == 1);
                        if numeric && next.is_some_and(|c| c.is_ascii_digit()) {
                            i += 2;
                        } else if dotted && next.is_some_and(char::is_alphabetic)
                            && !chars.get(i + 2).is_some_and(|&(_, c)| c.is_alphanumeric())
                        {
                            // U.S -> continue the acronym one letter at a time.
                            i += 2;
                        } else {
                            let with_dot = text[byte_at(start)..byte_at(i + 1)].to_lowercase();
                            if word.contains('.') || lex.is_abbreviation(&with_dot) {
                                i += 1;
                            }
                            break;
                        }
                    }
                    _ => break,
                }
            }
        } else if is_joiner(c)
            && chars.get(i + 1).is_some_and(|&(_, n)| n == 's' || n == 'S')
            && !chars.get(i + 2).is_some_and(|&(_, n)| n.is_alphanumeric())
            && !spans.is_empty()
        {
            i += 2;
        } else {
            i += 1;
            while chars.get(i).is_some_and(|&(_, n)| n == c) {
                i += 1;
            }
        }
        spans.push(Span {
            start: byte_at(start),
            end: byte_at(i),
        });
    }
    spans
}

/// Byte ranges of sentences within `text`, each ending after its terminator
/// run and closing quotes (or at the end of text).
fn segment(text: &str, spans: &[Span]) -> Vec<(usize, usize, usize)> {
    // (first span index, one-past-last span index, end byte)
    let mut out = Vec::new();
    let mut first = 0;
    let mut i = 0;
    while i < spans.len() {
        let s = &text[spans[i].start..spans[i].end];
        let mut boundary = None;
        if s.chars().all(is_terminator) {
            let mut j = i + 1;
            while j < spans.len()
                && spans[j].start == spans[j - 1].end
                && text[spans[j].start..spans[j].end].chars().all(is_closer)
            {
                j += 1;
            }
            let end = spans[j - 1].end;
            match spans.get(j) {
                None => boundary = Some((j, end)),
                Some(next) => {
                    let gap = &text[end..next.start];
                    let capital = text[next.start..]
                        .chars()
                        .find(|c| !is_closer(*c) && *c != '(' && *c != '"')
                        .is_some_and(char::is_uppercase);
                    if !gap.is_empty() && gap.chars().all(char::is_whitespace) && capital {
                        boundary = Some((j, end));
                    }
                }
            }
        }
        match boundary {
            Some((j, end)) => {
                out.push((first, j, end));
                first = j;
                i = j;
            }
            None => i += 1,
        }
    }
    if first < spans.len() {
        out.push((first, spans.len(), spans[spans.len() - 1].end));
    }
    out
}

const NOUN_EXCEPTIONS: &[(&str, &str)] = &[
    ("men", "man"),
    ("women", "woman"),
    ("children", "child"),
    ("people", "person"),
    ("feet", "foot"),
    ("teeth", "tooth"),
    ("mice", "mouse"),
    ("geese", "goose"),
    ("oxen", "ox"),
    ("lives", "life"),
    ("wives", "wife"),
    ("knives", "knife"),
    ("leaves", "leaf"),
    ("wolves", "wolf"),
    ("halves", "half"),
    ("criteria", "criterion"),
    ("phenomena", "phenomenon"),
    ("news", "news"),
    ("series", "series"),
    ("species", "species"),
    ("physics", "physics"),
    ("mathematics", "mathematics"),
    ("politics", "politics"),
    ("economics", "economics"),
    ("gas", "gas"),
    ("bus", "bus"),
    ("lens", "lens"),
];

/// Singular form of a lowercase common noun: exception list, then suffix
/// stripping. Idempotent on its own output.
pub fn noun_lemma(word: &str) -> String {
    if let Some((_, lemma)) = NOUN_EXCEPTIONS.iter().find(|(w, _)| *w == word) {
        return (*lemma).to_string();
    }
    if NOUN_EXCEPTIONS.iter().any(|(_, l)| *l == word) {
        return word.to_string();
    }
    let n = word.chars().count();
    if n <= 3 || !word.chars().all(|c| c.is_alphabetic() || c == '-') {
        return word.to_string();
    }
    if let Some(stem) = word.strip_suffix("ies") {
        if n > 4 {
            return format!("{stem}y");
        }
    }
    for suffix in ["sses", "xes", "ches", "shes", "zzes"] {
        if word.ends_with(suffix) {
            return word[..word.len() - 2].to_string();
        }
    }
    if word.ends_with('s') && !["ss", "us", "is"].iter().any(|s| word.ends_with(s)) {
        return word[..word.len() - 1].to_string();
    }
    word.to_string()
}

fn is_capitalized(s: &str) -> bool {
    s.chars().next().is_some_and(char::is_uppercase)
}

fn is_acronym(s: &str) -> bool {
    let letters: Vec<char> = s.chars().filter(|c| c.is_alphabetic()).collect();
    letters.len() >= 2 && letters.iter().all(|c| c.is_uppercase())
}

fn is_numeric(s: &str) -> bool {
    s.chars().next().is_some_and(|c| c.is_ascii_digit())
        && s.chars().all(|c| c.is_ascii_digit() || c == '.' || c == ',')
}

fn suffix_tag(lower: &str) -> Option<PosTag> {
    let n = lower.chars().count();
    let rules: [(&str, PosTag); 7] = [
        ("ly", PosTag::Other),
        ("ing", PosTag::Verb),
        ("ed", PosTag::Verb),
        ("tion", PosTag::Noun),
        ("ism", PosTag::Noun),
        ("ness", PosTag::Noun),
        ("ity", PosTag::Noun),
    ];
    rules
        .iter()
        .find(|(suffix, _)| lower.ends_with(suffix) && n >= suffix.len() + 3)
        .map(|&(_, tag)| tag)
}

fn tag_word(surfaces: &[&str], i: usize, lex: &TaggerLexicon, known_proper: &BTreeSet<String>) -> PosTag {
    let surface = surfaces[i];
    if !surface.chars().any(char::is_alphanumeric) {
        return PosTag::Other;
    }
    if is_numeric(surface) {
        return PosTag::Num;
    }
    let lower = surface.to_lowercase();
    let acronym = is_acronym(surface);
    let listed = if acronym {
        None
    } else {
        lex.closed_class.get(&lower).copied()
    };
    if let Some(tag) = listed.filter(|t| *t != PosTag::Adj) {
        return tag;
    }
    if is_capitalized(surface) {
        if i > 0 || acronym {
            return PosTag::Propn;
        }
        let next_capitalized = surfaces
            .get(1)
            .is_some_and(|n| is_capitalized(n) && n.chars().any(char::is_alphabetic));
        let key = lower.trim_end_matches('.');
        if next_capitalized || lex.proper_nouns.contains(key) || known_proper.contains(key) {
            return PosTag::Propn;
        }
    }
    if let Some(tag) = listed {
        return tag;
    }
    suffix_tag(&lower).unwrap_or(PosTag::Noun)
}

/// In a sentence with no verb, the first noun after a nominal that ends in a
/// plain `-s` or is followed by a determiner or pronoun is taken as the verb
/// ("Gravity holds ...", "Vicksburg split the ...").
fn promote_verb(surfaces: &[&str], tags: &mut [PosTag]) {
    if tags.contains(&PosTag::Verb) {
        return;
    }
    for i in 1..tags.len() {
        // Adverbs may sit between the subject and the verb.
        let mut j = i - 1;
        while j > 0 && tags[j] == PosTag::Other {
            j -= 1;
        }
        if tags[i] != PosTag::Noun || !tags[j].is_nominal() {
            continue;
        }
        let lower = surfaces[i].to_lowercase();
        let plain_s = lower.chars().count() > 3
            && lower.ends_with('s')
            && !["ss", "us", "is"].iter().any(|s| lower.ends_with(s));
        let before_object = matches!(tags.get(i + 1), Some(PosTag::Det | PosTag::Pron | PosTag::Num));
        if plain_s || before_object {
            tags[i] = PosTag::Verb;
            return;
        }
    }
}

/// Lowercase forms that occur capitalized mid-sentence and never in
/// lowercase, so a sentence-initial occurrence can be read as a name.
fn document_proper_nouns(text: &str, spans: &[Span], bounds: &[(usize, usize, usize)]) -> BTreeSet<String> {
    let mut capital = BTreeSet::new();
    let mut lower_seen = BTreeSet::new();
    for &(first, last, _) in bounds {
        for (k, s) in spans[first..last].iter().enumerate() {
            let w = &text[s.start..s.end];
            if !w.chars().any(char::is_alphabetic) {
                continue;
            }
            if is_capitalized(w) {
                if k > 0 && !is_acronym(w) {
                    capital.insert(w.to_lowercase());
                }
            } else {
                lower_seen.insert(w.to_lowercase());
            }
        }
    }
    capital.retain(|w| !lower_seen.contains(w));
    capital
}

fn make_token(surface: &str, pos: PosTag, start: usize, end: usize, lex: &TaggerLexicon) -> Token {
    let lower = surface.to_lowercase();
    let clitic = matches!(lower.as_str(), "'s" | "\u{2019}s");
    let lemma = match pos {
        PosTag::Propn => surface.to_string(),
        PosTag::Noun => noun_lemma(&lower),
        _ => lower.clone(),
    };
    Token {
        surface: surface.to_string(),
        lemma,
        pos,
        is_stopword: clitic || (pos != PosTag::Propn && lex.is_stopword(&lower)),
        start,
        end,
    }
}

/// Maximal `DET? ADJ* (NOUN|PROPN)+` spans, scanned left to right.
pub fn chunk(tokens: &[Token]) -> Vec<Chunk> {
    let mut chunks = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let mut j = i;
        if tokens[j].pos == PosTag::Det {
            j += 1;
        }
        while j < tokens.len() && tokens[j].pos == PosTag::Adj {
            j += 1;
        }
        let head_start = j;
        while j < tokens.len() && tokens[j].pos.is_nominal() {
            j += 1;
        }
        if j > head_start {
            chunks.push(Chunk { start: i, end: j });
            i = j;
        } else {
            i += 1;
        }
    }
    chunks
}

fn build_sentence(
    doc_text: &str,
    doc_id: &str,
    index: usize,
    spans: &[Span],
    end: usize,
    lex: &TaggerLexicon,
    known_proper: &BTreeSet<String>,
) -> Sentence {
    let start = spans[0].start;
    // Drop a trailing terminator run and the closers attached to it.
    let mut body = spans.len();
    while body > 0 && doc_text[spans[body - 1].start..spans[body - 1].end].chars().all(is_closer) {
        body -= 1;
    }
    if body > 0 && doc_text[spans[body - 1].start..spans[body - 1].end].chars().all(is_terminator) {
        body -= 1;
    } else {
        body = spans.len();
    }
    let word_spans = &spans[..body];
    let surfaces: Vec<&str> = word_spans.iter().map(|s| &doc_text[s.start..s.end]).collect();
    let mut tags: Vec<PosTag> = (0..surfaces.len())
        .map(|i| tag_word(&surfaces, i, lex, known_proper))
        .collect();
    promote_verb(&surfaces, &mut tags);
    let tokens: Vec<Token> = word_spans
        .iter()
        .zip(tags)
        .enumerate()
        .map(|(i, (s, pos))| make_token(surfaces[i], pos, s.start - start, s.end - start, lex))
        .collect();
    let chunks = chunk(&tokens);
    Sentence {
        doc_id: doc_id.to_string(),
        index,
        start,
        end,
        text: doc_text[start..end].to_string(),
        tokens,
        chunks,
    }
}

/// Segments a document's text into analyzed sentences.
pub fn split_sentences(doc_id: &str, text: &str, lex: &TaggerLexicon) -> Vec<Sentence> {
    let spans = scan(text, lex);
    let bounds = segment(text, &spans);
    let known = document_proper_nouns(text, &spans, &bounds);
    bounds
        .into_iter()
        .enumerate()
        .map(|(index, (first, last, end))| {
            build_sentence(text, doc_id, index, &spans[first..last], end, lex, &known)
        })
        .collect()
}

/// Tags and chunks `text` as a single sentence; no segmentation is applied.
pub fn analyze_sentence(text: &str, lex: &TaggerLexicon) -> Sentence {
    let spans = scan(text, lex);
    if spans.is_empty() {
        return Sentence {
            doc_id: String::new(),
            index: 0,
            start: 0,
            end: text.len(),
            text: text.to_string(),
            tokens: Vec::new(),
            chunks: Vec::new(),
        };
    }
    let mut sentence = build_sentence(text, "", 0, &spans, text.len(), lex, &BTreeSet::new());
    // Keep offsets relative to the caller's text.
    let shift = sentence.start;
    sentence.start = 0;
    sentence.text = text.to_string();
    for t in &mut sentence.tokens {
        t.start += shift;
        t.end += shift;
    }
    sentence
}

/// Builds a document, segmenting its text. Returns `None` when the text is
/// blank after whitespace normalization.
pub fn make_document(doc_id: &str, title: &str, text: &str, lex: &TaggerLexicon) -> Option<Document> {
    if text.trim().is_empty() {
        return None;
    }
    Some(Document {
        doc_id: doc_id.to_string(),
        title: title.to_string(),
        text: text.to_string(),
        sentences: split_sentences(doc_id, text, lex),
    })
}

#[derive(Deserialize)]
struct JsonlRecord {
    doc_id: String,
    #[serde(default)]
    title: String,
    text: String,
}

/// Builds a corpus from in-memory text: JSONL records when `jsonl` is set,
/// otherwise a single document named `default_doc_id`.
pub fn corpus_from_str(
    corpus_id: &str,
    content: &str,
    jsonl: bool,
    default_doc_id: &str,
    source: &Path,
    lex: &TaggerLexicon,
) -> Result<Corpus> {
    if corpus_id.trim().is_empty() {
        return Err(Error::InvalidArgument("corpus id must be nonempty".into()));
    }
    let mut documents = Vec::new();
    if jsonl {
        let mut seen = BTreeSet::new();
        for (i, line) in content.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: JsonlRecord = serde_json::from_str(line)
                .map_err(|e| Error::parse(source, i + 1, format!("malformed record: {e}")))?;
            if !seen.insert(record.doc_id.clone()) {
                return Err(Error::parse(
                    source,
                    i + 1,
                    format!("duplicate doc_id `{}`", record.doc_id),
                ));
            }
            let doc = make_document(&record.doc_id, &record.title, &record.text, lex)
                .ok_or_else(|| Error::parse(source, i + 1, "document text is empty"))?;
            documents.push(doc);
        }
    } else if let Some(doc) = make_document(default_doc_id, "", content, lex) {
        documents.push(doc);
    }
    if documents.is_empty() {
        return Err(Error::EmptyCorpus(corpus_id.to_string()));
    }
    Ok(Corpus {
        corpus_id: corpus_id.to_string(),
        documents,
    })
}

/// Loads a corpus file. Files with a `.jsonl` extension hold one
/// `{"doc_id", "title", "text"}` record per line; anything else is a single
/// plain-text document named after the file stem.
pub fn ingest_corpus(path: &Path, corpus_id: &str, lex: &TaggerLexicon) -> Result<Corpus> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let content = String::from_utf8(bytes)
        .map_err(|e| Error::parse(path, 0, format!("file is not UTF-8: {e}")))?;
    let jsonl = path.extension().is_some_and(|e| e == "jsonl");
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| corpus_id.to_string());
    corpus_from_str(corpus_id, &content, jsonl, &stem, path, lex)
}
