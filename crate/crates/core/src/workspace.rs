//! On-disk workspace: one directory per stage, JSONL and TSV artifacts that
//! each carry a format version, and an optional `key=value` config file.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::answer::{build_index, QueryAnswer, SentId};
use crate::error::{Error, Result};
use crate::ingest::{ingest_corpus, Corpus, Document};
use crate::lexicon::Lexicons;
use crate::metrics::{self, Category, CoverageReport, GapRecord, Label, PrecisionEstimate, Sample, UtilityBreakdown};
use crate::objects::{extract_objects, CanonicalObject, Extraction, ObjectMention};
use crate::pairing::{self, CorpusObjects, PairScore};
use crate::pipeline::{self, Answerer, Settings};
use crate::pruning::{HistoryRecord, NonsenseHistory};
use crate::querygen::Query;
use crate::types::QueryKind;

pub const FORMAT_VERSION: u32 = 1;
pub const CONFIG_FILE: &str = "autoquery.conf";
pub const STAGE_DIRS: &[&str] = &["corpora", "objects", "queries", "answers", "labels", "reports", "lexicons"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
}

fn header_line(format: &str) -> String {
    let h = Header {
        format: format.to_string(),
        version: FORMAT_VERSION,
    };
    serde_json::to_string(&h).expect("header serializes")
}

/// Serializes `items` as JSONL behind a header line.
pub fn jsonl_string<'a, T: Serialize + 'a>(format: &str, items: impl IntoIterator<Item = &'a T>) -> Result<String> {
    let mut out = header_line(format);
    out.push('\n');
    for item in items {
        out.push_str(&serde_json::to_string(item)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_jsonl<'a, T: Serialize + 'a>(
    path: &Path,
    format: &str,
    items: impl IntoIterator<Item = &'a T>,
) -> Result<()> {
    write_file(path, &jsonl_string(format, items)?)
}

/// Reads a JSONL artifact, checking its header.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path, format: &str) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_jsonl(&text, path, format)
}

pub fn parse_jsonl<T: DeserializeOwned>(text: &str, path: &Path, format: &str) -> Result<Vec<T>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((_, first)) = lines.next() else {
        return Err(Error::parse(path, 1, "missing header line"));
    };
    let header: Header = serde_json::from_str(first)
        .map_err(|e| Error::parse(path, 1, format!("bad header: {e}")))?;
    if header.format != format || header.version != FORMAT_VERSION {
        return Err(Error::parse(
            path,
            1,
            format!(
                "expected format `{format}` version {FORMAT_VERSION}, found `{}` version {}",
                header.format, header.version
            ),
        ));
    }
    lines
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse(path, i + 1, e.to_string())))
        .collect()
}

/// Appends one record, writing the header first when the file is new.
pub fn append_jsonl<T: Serialize>(path: &Path, format: &str, item: &T) -> Result<()> {
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut chunk = String::new();
    if fresh {
        chunk.push_str(&header_line(format));
        chunk.push('\n');
    }
    chunk.push_str(&serde_json::to_string(item)?);
    chunk.push('\n');
    f.write_all(chunk.as_bytes()).map_err(|e| Error::io(path, e))?;
    f.sync_data().map_err(|e| Error::io(path, e))
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    data: T,
}

pub fn write_json<T: Serialize>(path: &Path, format: &str, data: &T) -> Result<()> {
    let env = Envelope {
        format: format.to_string(),
        version: FORMAT_VERSION,
        data,
    };
    let mut text = serde_json::to_string_pretty(&env)?;
    text.push('\n');
    write_file(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path, format: &str) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let env: Envelope<T> = serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
    if env.format != format || env.version != FORMAT_VERSION {
        return Err(Error::parse(path, 1, format!("expected format `{format}` version {FORMAT_VERSION}")));
    }
    Ok(env.data)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Settings plus where to find lexicon overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub settings: Settings,
    pub lexicon_dir: PathBuf,
}

/// Parses `key=value` lines. Keys: theta, tau, topk, min_count,
/// max_queries, budget, lexicons (a directory, relative to `root`).
pub fn parse_config(text: &str, source: &Path, root: &Path) -> Result<Config> {
    let mut cfg = Config {
        settings: Settings::default(),
        lexicon_dir: root.join("lexicons"),
    };
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |m: String| Error::parse(source, i + 1, m);
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err("expected key=value".into()))?;
        let (key, value) = (key.trim(), value.trim());
        let float = || value.parse::<f64>().map_err(|e| err(format!("{key}: {e}")));
        let int = || value.parse::<usize>().map_err(|e| err(format!("{key}: {e}")));
        let s = &mut cfg.settings;
        match key {
            "theta" => s.theta = float()?,
            "tau" => s.tau = float()?,
            "topk" => s.topk = int()?,
            "min_count" => s.min_count = int()?,
            "max_queries" => s.max_queries = int()?,
            "budget" => s.budget = int()?,
            "lexicons" => cfg.lexicon_dir = root.join(value),
            other => return Err(err(format!("unknown key `{other}`"))),
        }
    }
    cfg.settings.validate()?;
    Ok(cfg)
}

/// What a reviewer is shown for one sampled query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewItem {
    pub query_id: String,
    pub surface: String,
    pub kind: QueryKind,
    pub state: String,
    /// Rule or confidence decision that shaped the query's state.
    pub rule: String,
    pub answer: Option<ReviewAnswer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reverse_check: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewAnswer {
    /// Evidence sentence text, or the canonical form of a related object.
    pub text: String,
    pub confidence: f64,
    #[serde(default)]
    pub matched_terms: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sent_id: Option<SentId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleHeader {
    pub seed: u64,
    pub stratified: bool,
    pub exhausted: bool,
}

#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    /// Creates the stage directories and default lexicon files if missing.
    pub fn create(root: &Path) -> Result<Self> {
        for d in STAGE_DIRS {
            let p = root.join(d);
            fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        }
        Lexicons::write_defaults(&root.join("lexicons"))?;
        Ok(Workspace { root: root.to_path_buf() })
    }

    /// Opens an existing workspace.
    pub fn open(root: &Path) -> Result<Self> {
        if !root.is_dir() {
            return Err(Error::io(
                root,
                std::io::Error::new(std::io::ErrorKind::NotFound, "workspace directory not found"),
            ));
        }
        Ok(Workspace { root: root.to_path_buf() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn config(&self) -> Result<Config> {
        let p = self.path(CONFIG_FILE);
        match fs::read_to_string(&p) {
            Ok(text) => parse_config(&text, &p, &self.root),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => parse_config("", &p, &self.root),
            Err(e) => Err(Error::io(&p, e)),
        }
    }

    pub fn lexicons(&self, cfg: &Config) -> Result<Lexicons> {
        if cfg.lexicon_dir.is_dir() {
            Lexicons::load_dir(&cfg.lexicon_dir)
        } else {
            Ok(Lexicons::builtin())
        }
    }

    // corpora

    fn corpus_path(&self, id: &str) -> PathBuf {
        self.path(&format!("corpora/{id}.jsonl"))
    }

    pub fn ingest(&self, source: &Path, corpus_id: &str, lex: &Lexicons) -> Result<Corpus> {
        let valid = !corpus_id.is_empty()
            && corpus_id
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.')
            && !corpus_id.starts_with('.');
        if !valid {
            return Err(Error::InvalidArgument(format!(
                "corpus id `{corpus_id}` must use letters, digits, `-`, `_` or `.`"
            )));
        }
        let corpus = ingest_corpus(source, corpus_id, &lex.tagger)?;
        write_jsonl(&self.corpus_path(corpus_id), "corpus", &corpus.documents)?;
        Ok(corpus)
    }

    pub fn corpus_ids(&self) -> Result<Vec<String>> {
        let dir = self.path("corpora");
        let mut ids = Vec::new();
        let entries = match fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(ids),
            Err(e) => return Err(Error::io(&dir, e)),
        };
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(&dir, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if let Some(id) = name.strip_suffix(".jsonl") {
                ids.push(id.to_string());
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn corpus(&self, id: &str) -> Result<Corpus> {
        let p = self.corpus_path(id);
        if !p.exists() {
            return Err(Error::UnknownCorpus(id.to_string()));
        }
        Ok(Corpus {
            corpus_id: id.to_string(),
            documents: read_jsonl::<Document>(&p, "corpus")?,
        })
    }

    pub fn corpora(&self) -> Result<Vec<Corpus>> {
        self.corpus_ids()?.iter().map(|id| self.corpus(id)).collect()
    }

    // objects

    pub fn objects_stage(&self, lex: &Lexicons) -> Result<Extraction> {
        let corpora = self.corpora()?;
        if corpora.is_empty() {
            return Err(Error::EmptyCorpus("workspace has no corpora".into()));
        }
        for c in &corpora {
            let ex = extract_objects(c, &lex.gazetteer);
            write_jsonl(
                &self.path(&format!("objects/by_corpus/{}.jsonl", c.corpus_id)),
                "objects",
                &ex.objects,
            )?;
        }
        let all = pipeline::extract(&corpora, lex);
        write_jsonl(&self.path("objects/all.jsonl"), "objects", &all.objects)?;
        write_jsonl(&self.path("objects/mentions.jsonl"), "mentions", &all.mentions)?;
        Ok(all)
    }

    pub fn extraction(&self) -> Result<Extraction> {
        Ok(Extraction {
            objects: read_jsonl::<CanonicalObject>(&self.path("objects/all.jsonl"), "objects")?,
            mentions: read_jsonl::<ObjectMention>(&self.path("objects/mentions.jsonl"), "mentions")?,
        })
    }

    pub fn corpus_objects(&self, id: &str) -> Result<Vec<CanonicalObject>> {
        read_jsonl(&self.path(&format!("objects/by_corpus/{id}.jsonl")), "objects")
    }

    // queries

    pub fn generate_stage(&self, lex: &Lexicons, techniques: BTreeSet<QueryKind>, max_queries: usize) -> Result<Vec<Query>> {
        let corpora = self.corpora()?;
        let extraction = self.extraction()?;
        let qs = pipeline::generate_queries(&corpora, &extraction, lex, techniques, max_queries);
        write_jsonl(&self.path("queries/generated.jsonl"), "queries", &qs)?;
        Ok(qs)
    }

    pub fn history(&self) -> Result<NonsenseHistory> {
        let p = self.path("answers/nonsense_history.jsonl");
        if !p.exists() {
            return Ok(NonsenseHistory::new());
        }
        NonsenseHistory::from_records(read_jsonl::<HistoryRecord>(&p, "nonsense_history")?)
    }

    fn write_history(&self, h: &NonsenseHistory) -> Result<()> {
        write_jsonl(&self.path("answers/nonsense_history.jsonl"), "nonsense_history", h.records())
    }

    fn answerer_inputs(&self) -> Result<(Vec<Corpus>, Extraction)> {
        Ok((self.corpora()?, self.extraction()?))
    }

    pub fn prune_stage(&self, lex: &Lexicons, settings: &Settings) -> Result<Vec<Query>> {
        settings.validate()?;
        let generated: Vec<Query> = read_jsonl(&self.path("queries/generated.jsonl"), "queries")?;
        let (corpora, extraction) = self.answerer_inputs()?;
        let answerer = Answerer::new(lex, &corpora, &extraction, settings);
        let mut history = self.history()?;
        let pruned = pipeline::prune(&generated, &answerer, settings.theta, &mut history)?;
        write_jsonl(&self.path("queries/pruned.jsonl"), "queries", &pruned)?;
        self.write_history(&history)?;
        Ok(pruned)
    }

    pub fn answer_stage(&self, lex: &Lexicons, settings: &Settings) -> Result<(Vec<Query>, Vec<QueryAnswer>)> {
        settings.validate()?;
        let pruned: Vec<Query> = read_jsonl(&self.path("queries/pruned.jsonl"), "queries")?;
        let (corpora, extraction) = self.answerer_inputs()?;
        let answerer = Answerer::new(lex, &corpora, &extraction, settings);
        let mut history = self.history()?;
        let (queries, answers) = pipeline::answer_all(&pruned, &answerer, settings.theta, &mut history)?;
        write_jsonl(&self.path("queries/queries.jsonl"), "queries", &queries)?;
        write_jsonl(&self.path("answers/answers.jsonl"), "answers", &answers)?;
        self.write_history(&history)?;
        Ok((queries, answers))
    }

    pub fn queries(&self) -> Result<Vec<Query>> {
        read_jsonl(&self.path("queries/queries.jsonl"), "queries")
    }

    pub fn answers(&self) -> Result<Vec<QueryAnswer>> {
        read_jsonl(&self.path("answers/answers.jsonl"), "answers")
    }

    // reports

    pub fn coverage_report(&self, theta: f64) -> Result<CoverageReport> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::Threshold(theta));
        }
        let r = metrics::coverage(&self.queries()?, &self.answers()?, theta);
        write_json(&self.path("reports/coverage.json"), "coverage", &r)?;
        write_file(&self.path("reports/coverage.txt"), &metrics::coverage_text(&r))?;
        Ok(r)
    }

    pub fn precision_report(&self, z: f64) -> Result<PrecisionEstimate> {
        let p = metrics::precision_with_interval(&self.labels()?, z)?;
        write_json(&self.path("reports/precision.json"), "precision", &p)?;
        write_file(&self.path("reports/precision.txt"), &metrics::precision_text(&p))?;
        Ok(p)
    }

    pub fn utility_report(&self) -> Result<UtilityBreakdown> {
        let u = metrics::utility_breakdown(&self.labels()?);
        write_json(&self.path("reports/utility.json"), "utility", &u)?;
        write_file(&self.path("reports/utility.txt"), &metrics::utility_text(&u))?;
        Ok(u)
    }

    pub fn gaps_report(&self, theta: f64) -> Result<Vec<GapRecord>> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::Threshold(theta));
        }
        let g = metrics::gap_report(&self.queries()?, &self.answers()?, theta);
        write_json(&self.path("reports/gaps.json"), "gaps", &g)?;
        write_file(&self.path("reports/gaps.txt"), &metrics::gaps_text(&g))?;
        Ok(g)
    }

    pub fn pair_stage(&self, lex: &Lexicons, settings: &Settings) -> Result<(Vec<PairScore>, Vec<Vec<String>>)> {
        settings.validate()?;
        let ids = self.corpus_ids()?;
        let corpora: Vec<CorpusObjects> = ids
            .iter()
            .map(|id| {
                Ok(CorpusObjects {
                    corpus: self.corpus(id)?,
                    objects: self.corpus_objects(id)?,
                })
            })
            .collect::<Result<_>>()?;
        let scores = pairing::score_all(&corpora, &ids, lex, settings.theta, settings.budget)?;
        let groups = pairing::group_corpuses(&ids, &scores, settings.tau)?;
        write_file(&self.path("reports/pairs.tsv"), &pairing::pairs_tsv(&scores))?;
        write_json(&self.path("reports/groups.json"), "groups", &groups)?;
        Ok((scores, groups))
    }

    // review

    pub fn sample_stage(&self, n: usize, seed: u64, stratify: bool) -> Result<(Sample, Vec<ReviewItem>)> {
        let queries = self.queries()?;
        let answers = self.answers()?;
        let sample = metrics::sample_for_review(&queries, n, seed, stratify)?;
        let corpora = self.corpora()?;
        let index = build_index(&corpora);
        let objects: HashMap<String, String> = self
            .extraction()?
            .objects
            .into_iter()
            .map(|o| (o.object_id, o.canonical))
            .collect();
        let by_q: HashMap<&str, &Query> = queries.iter().map(|q| (q.query_id.as_str(), q)).collect();
        let by_a: HashMap<&str, &QueryAnswer> = answers.iter().map(|a| (a.query_id.as_str(), a)).collect();
        let mut items = Vec::with_capacity(sample.query_ids.len());
        for id in &sample.query_ids {
            let q = by_q[id.as_str()];
            let a = by_a.get(id.as_str());
            let answer = a.and_then(|a| {
                if let Some(c) = a.candidates.first() {
                    index.get(&c.sent_id).map(|s| ReviewAnswer {
                        text: s.text.clone(),
                        confidence: c.confidence,
                        matched_terms: c.matched_terms.clone(),
                        sent_id: Some(c.sent_id.clone()),
                        object_id: None,
                    })
                } else {
                    a.related.first().map(|r| ReviewAnswer {
                        text: objects.get(&r.object_id).cloned().unwrap_or_default(),
                        confidence: r.score,
                        matched_terms: BTreeSet::new(),
                        sent_id: None,
                        object_id: Some(r.object_id.clone()),
                    })
                }
            });
            items.push(ReviewItem {
                query_id: q.query_id.clone(),
                surface: q.surface.clone(),
                kind: q.kind,
                state: q.state.name().to_string(),
                rule: match &q.state {
                    crate::querygen::QueryState::Nonsense => "below-threshold".to_string(),
                    _ => "kept".to_string(),
                },
                answer,
                reverse_check: a.and_then(|a| a.reverse_check),
            });
        }
        let header = SampleHeader {
            seed,
            stratified: stratify,
            exhausted: sample.exhausted,
        };
        write_json(&self.path("labels/sample_info.json"), "sample_info", &header)?;
        write_jsonl(&self.path("labels/sample.jsonl"), "review_items", &items)?;
        Ok((sample, items))
    }

    pub fn review_items(&self) -> Result<Vec<ReviewItem>> {
        let p = self.path("labels/sample.jsonl");
        if !p.exists() {
            return Err(Error::NoSample);
        }
        read_jsonl(&p, "review_items")
    }

    fn labels_path(&self) -> PathBuf {
        self.path("labels/labels.jsonl")
    }

    pub fn labels(&self) -> Result<Vec<Label>> {
        let p = self.labels_path();
        if !p.exists() {
            return Ok(Vec::new());
        }
        read_jsonl(&p, "labels")
    }

    pub fn append_label(&self, label: &Label) -> Result<()> {
        append_jsonl(&self.labels_path(), "labels", label)
    }

    /// Appends labels from a CSV file with columns query_id, category,
    /// answer_correct, reviewer, ts. Every row is validated before any is
    /// written.
    pub fn import_labels_csv(&self, path: &Path) -> Result<usize> {
        let sampled: BTreeSet<String> = self.review_items()?.into_iter().map(|i| i.query_id).collect();
        let labels = parse_labels_csv(path)?;
        for (i, l) in labels.iter().enumerate() {
            if !sampled.contains(&l.query_id) {
                return Err(Error::parse(path, i + 2, format!("query `{}` is not in the sample", l.query_id)));
            }
        }
        for l in &labels {
            self.append_label(l)?;
        }
        Ok(labels.len())
    }
}

#[derive(Deserialize)]
struct CsvLabel {
    query_id: String,
    category: String,
    #[serde(default)]
    answer_correct: String,
    reviewer: String,
    #[serde(default)]
    ts: String,
}

pub fn parse_labels_csv(path: &Path) -> Result<Vec<Label>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::parse(path, 0, e.to_string()))?;
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<CsvLabel>().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::parse(path, line, e.to_string()))?;
        let category: Category = row.category.parse().map_err(|e| Error::parse(path, line, e))?;
        let answer_correct = match row.answer_correct.to_lowercase().as_str() {
            "" => None,
            "true" | "1" | "yes" => Some(true),
            "false" | "0" | "no" => Some(false),
            other => return Err(Error::parse(path, line, format!("bad answer_correct `{other}`"))),
        };
        let ts = if row.ts.is_empty() {
            0
        } else {
            row.ts
                .parse()
                .map_err(|e| Error::parse(path, line, format!("bad ts: {e}")))?
        };
        if row.reviewer.is_empty() || row.query_id.is_empty() {
            return Err(Error::parse(path, line, "query_id and reviewer are required"));
        }
        out.push(Label {
            query_id: row.query_id,
            category,
            answer_correct,
            reviewer: row.reviewer,
            ts,
        });
    }
    Ok(out)
}

/// Counts of what each artifact holds, for the `status` command.
pub fn status(ws: &Workspace) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    let count = |rel: &str| {
        fs::read_to_string(ws.path(rel))
            .map(|t| t.lines().filter(|l| !l.trim().is_empty()).count().saturating_sub(1))
            .ok()
    };
    out.insert("corpora".into(), ws.corpus_ids().map(|v| v.len()).unwrap_or(0));
    for (name, rel) in [
        ("objects", "objects/all.jsonl"),
        ("generated", "queries/generated.jsonl"),
        ("pruned", "queries/pruned.jsonl"),
        ("queries", "queries/queries.jsonl"),
        ("answers", "answers/answers.jsonl"),
        ("sample", "labels/sample.jsonl"),
        ("labels", "labels/labels.jsonl"),
    ] {
        if let Some(n) = count(rel) {
            out.insert(name.into(), n);
        }
    }
    out
}
