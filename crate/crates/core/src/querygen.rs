//! Query generation from canonical objects.
//!
//! Six template families are supported: journalism questions on single
//! objects and on ordered object pairs, comparative adjectives, analogies,
//! analogy follow-ups and correlations. Realization is deterministic and
//! query ids depend only on the filled slots.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::ids::stable_id;
use crate::ingest::Corpus;
use crate::lexicon::parse_tsv;
use crate::objects::CanonicalObject;
use crate::types::{parse_type_list, Interrogative, ObjectType, QueryKind};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum QueryState {
    Generated,
    Pruned(String),
    Answered,
    Nonsense,
}

impl QueryState {
    pub fn is_pruned(&self) -> bool {
        matches!(self, QueryState::Pruned(_))
    }

    /// Name without the prune reason, as used by the query listing filter.
    pub fn name(&self) -> &'static str {
        match self {
            QueryState::Generated => "generated",
            QueryState::Pruned(_) => "pruned",
            QueryState::Answered => "answered",
            QueryState::Nonsense => "nonsense",
        }
    }
}

impl fmt::Display for QueryState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QueryState::Pruned(reason) => write!(f, "pruned:{reason}"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for QueryState {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "generated" => Ok(QueryState::Generated),
            "answered" => Ok(QueryState::Answered),
            "nonsense" => Ok(QueryState::Nonsense),
            _ => s
                .strip_prefix("pruned:")
                .map(|r| QueryState::Pruned(r.to_string()))
                .ok_or_else(|| format!("unknown query state `{s}`")),
        }
    }
}

impl Serialize for QueryState {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for QueryState {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub query_id: String,
    pub kind: QueryKind,
    pub interrogative: Option<Interrogative>,
    pub subject: String,
    pub object2: Option<String>,
    pub verb: Option<String>,
    pub adjective: Option<String>,
    pub surface: String,
    pub state: QueryState,
}

pub fn query_id(
    kind: QueryKind,
    interrogative: Option<Interrogative>,
    subject: &str,
    object2: Option<&str>,
    verb: Option<&str>,
    adjective: Option<&str>,
) -> String {
    stable_id(&[
        "query",
        kind.as_str(),
        interrogative.map_or("", Interrogative::as_str),
        subject,
        object2.unwrap_or(""),
        verb.unwrap_or(""),
        adjective.unwrap_or(""),
    ])
}

impl Query {
    fn new(
        kind: QueryKind,
        interrogative: Option<Interrogative>,
        subject: &CanonicalObject,
        object2: Option<&CanonicalObject>,
        verb: Option<&str>,
        adjective: Option<&str>,
        surface: String,
    ) -> Self {
        let object2 = object2.map(|o| o.object_id.clone());
        Query {
            query_id: query_id(
                kind,
                interrogative,
                &subject.object_id,
                object2.as_deref(),
                verb,
                adjective,
            ),
            kind,
            interrogative,
            subject: subject.object_id.clone(),
            object2,
            verb: verb.map(str::to_string),
            adjective: adjective.map(str::to_string),
            surface,
            state: QueryState::Generated,
        }
    }

    /// Moves a generated query to `to`. Only `Generated` may transition.
    pub fn transition(&mut self, to: QueryState) -> Result<()> {
        if self.state != QueryState::Generated || to == QueryState::Generated {
            return Err(Error::InvalidArgument(format!(
                "query {} cannot move from {} to {}",
                self.query_id, self.state, to
            )));
        }
        self.state = to;
        Ok(())
    }

    pub fn is_live(&self) -> bool {
        !self.state.is_pruned()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerbEntry {
    pub lemma: String,
    pub past: String,
    pub subject_types: Vec<ObjectType>,
    pub object_types: Vec<ObjectType>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerbLexicon {
    entries: Vec<VerbEntry>,
}

impl VerbLexicon {
    pub fn new(entries: Vec<VerbEntry>) -> Result<Self> {
        for e in &entries {
            if e.lemma.is_empty() || e.past.is_empty() {
                return Err(Error::InvalidArgument("verb forms must be nonempty".into()));
            }
            if e.subject_types.is_empty() || e.object_types.is_empty() {
                return Err(Error::InvalidArgument(format!(
                    "verb `{}` needs at least one subject and object type",
                    e.lemma
                )));
            }
        }
        Ok(VerbLexicon { entries })
    }

    /// Parses `lemma<TAB>past<TAB>subject_types<TAB>object_types`.
    pub fn from_tsv(text: &str, source: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        for row in parse_tsv(text, source, 4)? {
            let types = |col: usize| {
                parse_type_list(row.fields[col]).map_err(|m| Error::parse(source, row.line, m))
            };
            entries.push(VerbEntry {
                lemma: row.fields[0].to_lowercase(),
                past: row.fields[1].to_lowercase(),
                subject_types: types(2)?,
                object_types: types(3)?,
            });
        }
        VerbLexicon::new(entries)
    }

    pub fn entries(&self) -> &[VerbEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, lemma: &str) -> Option<&VerbEntry> {
        self.entries.iter().find(|e| e.lemma == lemma)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComparativeEntry {
    pub form: String,
    pub types: Vec<ObjectType>,
    pub cross_type: bool,
}

impl ComparativeEntry {
    /// Whether "Is A <form> than B?" is licensed for these object types:
    /// both types allowed, and either equal or cross-type comparisons on.
    pub fn allows(&self, a: ObjectType, b: ObjectType) -> bool {
        self.types.contains(&a) && self.types.contains(&b) && (a == b || self.cross_type)
    }
}

const IRREGULAR_COMPARATIVES: &[&str] = &["better", "worse", "less", "more"];

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ComparativeLexicon {
    entries: Vec<ComparativeEntry>,
}

impl ComparativeLexicon {
    pub fn new(entries: Vec<ComparativeEntry>) -> Result<Self> {
        for e in &entries {
            if !(e.form.ends_with("er") || IRREGULAR_COMPARATIVES.contains(&e.form.as_str())) {
                return Err(Error::InvalidArgument(format!(
                    "`{}` is not a comparative form",
                    e.form
                )));
            }
        }
        Ok(ComparativeLexicon { entries })
    }

    /// Parses `form<TAB>types<TAB>cross_type(0|1)`.
    pub fn from_tsv(text: &str, source: &Path) -> Result<Self> {
        let mut entries = Vec::new();
        for row in parse_tsv(text, source, 3)? {
            let types =
                parse_type_list(row.fields[1]).map_err(|m| Error::parse(source, row.line, m))?;
            let cross_type = match row.fields[2] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::parse(
                        source,
                        row.line,
                        format!("cross_type must be 0 or 1, got `{other}`"),
                    ))
                }
            };
            let form = row.fields[0].to_lowercase();
            if !(form.ends_with("er") || IRREGULAR_COMPARATIVES.contains(&form.as_str())) {
                return Err(Error::parse(
                    source,
                    row.line,
                    format!("`{form}` is not a comparative form"),
                ));
            }
            entries.push(ComparativeEntry {
                form,
                types,
                cross_type,
            });
        }
        ComparativeLexicon::new(entries)
    }

    pub fn entries(&self) -> &[ComparativeEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, form: &str) -> Option<&ComparativeEntry> {
        self.entries.iter().find(|e| e.form == form)
    }
}

/// Copula used by single-object journalism questions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tense {
    #[default]
    Past,
    Present,
}

impl Tense {
    pub fn copula(self) -> &'static str {
        match self {
            Tense::Past => "was",
            Tense::Present => "is",
        }
    }

    /// Present only when present-tense copulas outnumber past ones.
    pub fn of_corpora(corpora: &[Corpus]) -> Tense {
        let (mut present, mut past) = (0usize, 0usize);
        for token in corpora.iter().flat_map(|c| c.sentences()).flat_map(|s| &s.tokens) {
            match token.lemma.as_str() {
                "is" | "are" | "am" => present += 1,
                "was" | "were" => past += 1,
                _ => {}
            }
        }
        if present > past {
            Tense::Present
        } else {
            Tense::Past
        }
    }
}

pub fn gen_object_queries(objects: &[CanonicalObject], tense: Tense) -> Vec<Query> {
    let mut out = Vec::with_capacity(objects.len() * Interrogative::ALL.len());
    for obj in objects {
        for &q in Interrogative::ALL {
            let surface = format!("{q} {} {}?", tense.copula(), obj.phrase());
            out.push(Query::new(
                QueryKind::ObjectJournalism,
                Some(q),
                obj,
                None,
                None,
                None,
                surface,
            ));
        }
    }
    out
}

fn ordered_pairs(objects: &[CanonicalObject]) -> impl Iterator<Item = (&CanonicalObject, &CanonicalObject)> {
    objects.iter().flat_map(move |a| {
        objects
            .iter()
            .filter(move |b| b.object_id != a.object_id)
            .map(move |b| (a, b))
    })
}

/// Collects generated queries. In id-only mode nothing is realized; with a
/// keep mask, only the queries at the marked emission positions are.
#[derive(Default)]
struct Sink<'k> {
    out: Vec<Query>,
    ids: Option<Vec<String>>,
    keep: Option<&'k [bool]>,
    emitted: usize,
}

impl<'k> Sink<'k> {
    fn ids_only() -> Self {
        Sink {
            ids: Some(Vec::new()),
            ..Sink::default()
        }
    }

    fn keeping(keep: &'k [bool]) -> Self {
        Sink {
            keep: Some(keep),
            ..Sink::default()
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn emit(
        &mut self,
        kind: QueryKind,
        interrogative: Option<Interrogative>,
        a: &CanonicalObject,
        b: &CanonicalObject,
        verb: Option<&str>,
        adjective: Option<&str>,
        surface: impl FnOnce() -> String,
    ) {
        let position = self.emitted;
        self.emitted += 1;
        if self.keep.is_some_and(|k| !k[position]) {
            return;
        }
        let id = query_id(kind, interrogative, &a.object_id, Some(&b.object_id), verb, adjective);
        if let Some(ids) = &mut self.ids {
            ids.push(id);
            return;
        }
        self.out.push(Query {
            query_id: id,
            kind,
            interrogative,
            subject: a.object_id.clone(),
            object2: Some(b.object_id.clone()),
            verb: verb.map(str::to_string),
            adjective: adjective.map(str::to_string),
            surface: surface(),
            state: QueryState::Generated,
        });
    }
}

fn pair_queries(a: &CanonicalObject, b: &CanonicalObject, verbs: &VerbLexicon, sink: &mut Sink) {
    let (pa, pb) = (a.phrase(), b.phrase());
    let kind = QueryKind::PairJournalism;
    sink.emit(kind, Some(Interrogative::When), a, b, None, None, || {
        format!("Was {pa} after {pb}?")
    });
    sink.emit(kind, Some(Interrogative::Where), a, b, None, None, || {
        format!("Where is {pa} located relative to {pb}?")
    });
    for q in [Interrogative::Why, Interrogative::How] {
        for v in verbs.entries() {
            sink.emit(kind, Some(q), a, b, Some(&v.lemma), None, || {
                format!("{q} did {pa} {} {pb}?", v.lemma)
            });
        }
    }
}

fn comparative_queries(a: &CanonicalObject, b: &CanonicalObject, adjectives: &ComparativeLexicon, sink: &mut Sink) {
    for adj in adjectives.entries() {
        if adj.allows(a.object_type, b.object_type) {
            sink.emit(QueryKind::Comparative, None, a, b, None, Some(&adj.form), || {
                format!("Is {} {} than {}?", a.phrase(), adj.form, b.phrase())
            });
        }
    }
}

/// When and Where questions plus one Why and one How question per verb for
/// every ordered pair of distinct objects.
pub fn gen_pair_queries(objects: &[CanonicalObject], verbs: &VerbLexicon) -> Vec<Query> {
    let mut sink = Sink::default();
    for (a, b) in ordered_pairs(objects) {
        pair_queries(a, b, verbs, &mut sink);
    }
    sink.out
}

pub fn gen_comparative_queries(
    objects: &[CanonicalObject],
    adjectives: &ComparativeLexicon,
) -> Vec<Query> {
    let mut sink = Sink::default();
    for (a, b) in ordered_pairs(objects) {
        comparative_queries(a, b, adjectives, &mut sink);
    }
    sink.out
}

/// Pair and comparative queries for explicit ordered pairs, used when
/// scoring corpus pairs.
pub fn gen_cross_queries(
    pairs: &[(&CanonicalObject, &CanonicalObject)],
    verbs: &VerbLexicon,
    adjectives: &ComparativeLexicon,
) -> Vec<Query> {
    let mut sink = Sink::default();
    for (a, b) in pairs {
        if a.object_id == b.object_id {
            continue;
        }
        pair_queries(a, b, verbs, &mut sink);
        comparative_queries(a, b, adjectives, &mut sink);
    }
    sink.out
}

pub fn gen_analogy_queries(objects: &[CanonicalObject]) -> Vec<Query> {
    objects
        .iter()
        .map(|obj| {
            let q = if obj.object_type == ObjectType::Person {
                Interrogative::Who
            } else {
                Interrogative::What
            };
            Query::new(
                QueryKind::Analogy,
                Some(q),
                obj,
                None,
                None,
                None,
                format!("{q} is most like {}?", obj.phrase()),
            )
        })
        .collect()
}

/// Follow-up questions for an analogy answered with `answer` at
/// `confidence`: why the answer is most like the subject, and what the
/// evidence is. Both carry the subject and the answer as slots.
pub fn gen_analogy_extensions(
    analogy: &Query,
    subject: &CanonicalObject,
    answer: &CanonicalObject,
    confidence: f64,
    theta: f64,
) -> Result<Vec<Query>> {
    if analogy.kind != QueryKind::Analogy
        || analogy.state != QueryState::Answered
        || confidence < theta
    {
        return Err(Error::NotAnswered(analogy.query_id.clone()));
    }
    if subject.object_id != analogy.subject {
        return Err(Error::InvalidArgument(format!(
            "object {} is not the subject of query {}",
            subject.object_id, analogy.query_id
        )));
    }
    if answer.object_id == subject.object_id {
        return Err(Error::InvalidArgument(
            "an analogy answer cannot be its own subject".into(),
        ));
    }
    Ok(vec![
        Query::new(
            QueryKind::AnalogyExtension,
            Some(Interrogative::Why),
            subject,
            Some(answer),
            None,
            None,
            format!("Why is {} most like {}?", answer.phrase(), subject.phrase()),
        ),
        Query::new(
            QueryKind::AnalogyExtension,
            Some(Interrogative::What),
            subject,
            Some(answer),
            None,
            None,
            "What is the evidence and reasoning for that choice?".to_string(),
        ),
    ])
}

/// One correlation question per quantified or Concept object.
pub fn gen_correlation_queries(objects: &[CanonicalObject]) -> Vec<Query> {
    objects
        .iter()
        .filter(|o| o.quantified || o.object_type == ObjectType::Concept)
        .map(|obj| {
            Query::new(
                QueryKind::Correlation,
                Some(Interrogative::What),
                obj,
                None,
                None,
                None,
                format!("What is most strongly correlated with {}?", obj.phrase()),
            )
        })
        .collect()
}

/// Parses a technique list: `all`, or comma-separated names such as
/// `object,pair,comparative,analogy,extension,correlation`.
pub fn parse_techniques(s: &str) -> Result<BTreeSet<QueryKind>> {
    if s.trim().eq_ignore_ascii_case("all") {
        return Ok(QueryKind::ALL.iter().copied().collect());
    }
    let mut out = BTreeSet::new();
    for name in s.split(',').map(str::trim).filter(|n| !n.is_empty()) {
        let kind = match name.to_lowercase().as_str() {
            "object" | "objects" | "objectjournalism" => QueryKind::ObjectJournalism,
            "pair" | "pairs" | "pairjournalism" => QueryKind::PairJournalism,
            "comparative" | "comparatives" => QueryKind::Comparative,
            "analogy" | "analogies" => QueryKind::Analogy,
            "extension" | "extensions" | "analogyextension" => QueryKind::AnalogyExtension,
            "correlation" | "correlations" => QueryKind::Correlation,
            other => {
                return Err(Error::InvalidArgument(format!("unknown technique `{other}`")))
            }
        };
        out.insert(kind);
    }
    if out.is_empty() {
        return Err(Error::InvalidArgument("no techniques selected".into()));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct GenerationConfig {
    pub techniques: BTreeSet<QueryKind>,
    pub max_queries: usize,
    pub tense: Tense,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            techniques: QueryKind::ALL.iter().copied().collect(),
            max_queries: 100_000,
            tense: Tense::Past,
        }
    }
}

/// Runs every selected technique except analogy extensions (which need
/// answers). When the total exceeds `max_queries`, the queries with the
/// smallest ids are kept, in generation order.
pub fn generate(
    objects: &[CanonicalObject],
    verbs: &VerbLexicon,
    adjectives: &ComparativeLexicon,
    config: &GenerationConfig,
) -> Vec<Query> {
    let on = |k| config.techniques.contains(&k);
    let pairwise = |sink: &mut Sink| {
        if on(QueryKind::PairJournalism) {
            for (a, b) in ordered_pairs(objects) {
                pair_queries(a, b, verbs, sink);
            }
        }
        if on(QueryKind::Comparative) {
            for (a, b) in ordered_pairs(objects) {
                comparative_queries(a, b, adjectives, sink);
            }
        }
    };
    let head = if on(QueryKind::ObjectJournalism) {
        gen_object_queries(objects, config.tense)
    } else {
        Vec::new()
    };
    let mut tail = Vec::new();
    if on(QueryKind::Analogy) {
        tail.extend(gen_analogy_queries(objects));
    }
    if on(QueryKind::Correlation) {
        tail.extend(gen_correlation_queries(objects));
    }

    // Pairwise templates dominate the count, so their ids are ranked before
    // any surface is realized.
    let mut probe = Sink::ids_only();
    pairwise(&mut probe);
    let ids = probe.ids.unwrap_or_default();
    let total = head.len() + ids.len() + tail.len();
    if total <= config.max_queries {
        let mut sink = Sink::default();
        pairwise(&mut sink);
        return head.into_iter().chain(sink.out).chain(tail).collect();
    }
    let mut ranked: Vec<&str> = ids
        .iter()
        .chain(head.iter().chain(&tail).map(|q| &q.query_id))
        .map(String::as_str)
        .collect();
    ranked.sort_unstable();
    ranked.truncate(config.max_queries);
    let keep: BTreeSet<&str> = ranked.into_iter().collect();
    let mask: Vec<bool> = ids.iter().map(|id| keep.contains(id.as_str())).collect();
    let mut sink = Sink::keeping(&mask);
    pairwise(&mut sink);
    let kept = |q: &Query| keep.contains(q.query_id.as_str());
    head.iter()
        .filter(|q| kept(q))
        .cloned()
        .chain(sink.out)
        .chain(tail.iter().filter(|q| kept(q)).cloned())
        .collect()
}

/// Keeps the `cap` queries with the smallest ids, preserving order.
pub fn truncate_by_id(queries: Vec<Query>, cap: usize) -> Vec<Query> {
    if queries.len() <= cap {
        return queries;
    }
    let mut ids: Vec<&str> = queries.iter().map(|q| q.query_id.as_str()).collect();
    ids.sort_unstable();
    let keep: BTreeSet<String> = ids[..cap].iter().map(|s| s.to_string()).collect();
    queries
        .into_iter()
        .filter(|q| keep.contains(&q.query_id))
        .collect()
}
