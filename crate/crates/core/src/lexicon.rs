//! Tab-separated lexicon files and the bundle of tables a run uses.
//!
//! Every table ships with a built-in default compiled into the binary. A
//! workspace may override any of them by placing a file with the same name
//! under its `lexicons/` directory.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::ingest::TaggerLexicon;
use crate::objects::TypeGazetteer;
use crate::pruning::{PruneRuleTable, VerbFrameTable};
use crate::querygen::{ComparativeLexicon, VerbLexicon};

pub const STOPWORDS_FILE: &str = "stopwords.tsv";
pub const CLOSED_CLASS_FILE: &str = "closed_class.tsv";
pub const ABBREVIATIONS_FILE: &str = "abbreviations.tsv";
pub const TYPES_FILE: &str = "types.tsv";
pub const VERBS_FILE: &str = "verbs.tsv";
pub const COMPARATIVES_FILE: &str = "comparatives.tsv";
pub const PRUNE_RULES_FILE: &str = "prune_rules.tsv";
pub const VERB_FRAMES_FILE: &str = "verb_frames.tsv";

pub(crate) const BUILTIN_STOPWORDS: &str = include_str!("../data/stopwords.tsv");
pub(crate) const BUILTIN_CLOSED_CLASS: &str = include_str!("../data/closed_class.tsv");
pub(crate) const BUILTIN_ABBREVIATIONS: &str = include_str!("../data/abbreviations.tsv");
pub(crate) const BUILTIN_TYPES: &str = include_str!("../data/types.tsv");
pub(crate) const BUILTIN_VERBS: &str = include_str!("../data/verbs.tsv");
pub(crate) const BUILTIN_COMPARATIVES: &str = include_str!("../data/comparatives.tsv");
pub(crate) const BUILTIN_PRUNE_RULES: &str = include_str!("../data/prune_rules.tsv");

/// One non-comment line of a TSV file.
#[derive(Debug, Clone)]
pub struct TsvRow<'a> {
    pub line: usize,
    pub fields: Vec<&'a str>,
}

/// Splits `text` into rows, skipping blank lines and `#` comments. Rows with
/// fewer than `min_fields` columns are an error.
pub fn parse_tsv<'a>(text: &'a str, source: &Path, min_fields: usize) -> Result<Vec<TsvRow<'a>>> {
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() < min_fields || fields.iter().take(min_fields).any(|f| f.is_empty()) {
            return Err(Error::parse(
                source,
                i + 1,
                format!("expected {min_fields} tab-separated columns"),
            ));
        }
        rows.push(TsvRow { line: i + 1, fields });
    }
    Ok(rows)
}

/// All tables a pipeline run consults.
#[derive(Debug, Clone)]
pub struct Lexicons {
    pub tagger: TaggerLexicon,
    pub gazetteer: TypeGazetteer,
    pub verbs: VerbLexicon,
    pub comparatives: ComparativeLexicon,
    pub prune_rules: PruneRuleTable,
    pub verb_frames: VerbFrameTable,
}

impl Lexicons {
    pub fn builtin() -> Self {
        let builtin = Path::new("<builtin>");
        let gazetteer =
            TypeGazetteer::from_tsv(BUILTIN_TYPES, builtin).expect("builtin gazetteer parses");
        let tagger = TaggerLexicon::from_tsv(
            (BUILTIN_STOPWORDS, builtin),
            (BUILTIN_CLOSED_CLASS, builtin),
            (BUILTIN_ABBREVIATIONS, builtin),
        )
        .expect("builtin tagger lexicon parses")
        .with_proper_nouns(gazetteer.proper_noun_terms());
        let verbs = VerbLexicon::from_tsv(BUILTIN_VERBS, builtin).expect("builtin verbs parse");
        let verb_frames = VerbFrameTable::from_lexicon(&verbs);
        Lexicons {
            tagger,
            gazetteer,
            comparatives: ComparativeLexicon::from_tsv(BUILTIN_COMPARATIVES, builtin)
                .expect("builtin comparatives parse"),
            prune_rules: PruneRuleTable::from_tsv(BUILTIN_PRUNE_RULES, builtin)
                .expect("builtin prune rules parse"),
            verbs,
            verb_frames,
        }
    }

    /// Loads tables from `dir`, falling back to the built-in default for
    /// any file that is absent. A missing verb frame file is derived from
    /// the verb lexicon in effect.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let read = |name: &str, builtin: &'static str| -> Result<(String, PathBuf)> {
            let path = dir.join(name);
            if path.exists() {
                let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                Ok((text, path))
            } else {
                Ok((builtin.to_string(), PathBuf::from("<builtin>").join(name)))
            }
        };
        let (stop, stop_path) = read(STOPWORDS_FILE, BUILTIN_STOPWORDS)?;
        let (closed, closed_path) = read(CLOSED_CLASS_FILE, BUILTIN_CLOSED_CLASS)?;
        let (abbrev, abbrev_path) = read(ABBREVIATIONS_FILE, BUILTIN_ABBREVIATIONS)?;
        let (types, types_path) = read(TYPES_FILE, BUILTIN_TYPES)?;
        let (verbs, verbs_path) = read(VERBS_FILE, BUILTIN_VERBS)?;
        let (comps, comps_path) = read(COMPARATIVES_FILE, BUILTIN_COMPARATIVES)?;
        let (rules, rules_path) = read(PRUNE_RULES_FILE, BUILTIN_PRUNE_RULES)?;

        let gazetteer = TypeGazetteer::from_tsv(&types, &types_path)?;
        let tagger = TaggerLexicon::from_tsv(
            (&stop, &stop_path),
            (&closed, &closed_path),
            (&abbrev, &abbrev_path),
        )?
            .with_proper_nouns(gazetteer.proper_noun_terms());
        let verbs = VerbLexicon::from_tsv(&verbs, &verbs_path)?;
        let frames_path = dir.join(VERB_FRAMES_FILE);
        let verb_frames = if frames_path.exists() {
            let text = fs::read_to_string(&frames_path).map_err(|e| Error::io(&frames_path, e))?;
            VerbFrameTable::from_tsv(&text, &frames_path)?
        } else {
            VerbFrameTable::from_lexicon(&verbs)
        };
        Ok(Lexicons {
            tagger,
            gazetteer,
            verbs,
            comparatives: ComparativeLexicon::from_tsv(&comps, &comps_path)?,
            prune_rules: PruneRuleTable::from_tsv(&rules, &rules_path)?,
            verb_frames,
        })
    }

    /// Writes the built-in tables into `dir` so they can be edited in place.
    /// Existing files are left untouched.
    pub fn write_defaults(dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let defaults = Lexicons::builtin();
        let files: [(&str, String); 8] = [
            (STOPWORDS_FILE, BUILTIN_STOPWORDS.to_string()),
            (CLOSED_CLASS_FILE, BUILTIN_CLOSED_CLASS.to_string()),
            (ABBREVIATIONS_FILE, BUILTIN_ABBREVIATIONS.to_string()),
            (TYPES_FILE, BUILTIN_TYPES.to_string()),
            (VERBS_FILE, BUILTIN_VERBS.to_string()),
            (COMPARATIVES_FILE, BUILTIN_COMPARATIVES.to_string()),
            (PRUNE_RULES_FILE, BUILTIN_PRUNE_RULES.to_string()),
            (VERB_FRAMES_FILE, defaults.verb_frames.to_tsv()),
        ];
        for (name, body) in files {
            let path = dir.join(name);
            if !path.exists() {
                fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
            }
        }
        Ok(())
    }
}
