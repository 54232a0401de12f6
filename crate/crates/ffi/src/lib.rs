//! C ABI over the autoquery pipeline.
//!
//! Functions return an [`AqStatus`]. On failure, [`aq_last_error`] gives a
//! message for the calling thread. Strings handed out by the library must
//! be released with [`aq_string_free`]; pipelines with
//! [`aq_pipeline_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use autoquery::ingest::{analyze_sentence, make_document, Corpus};
use autoquery::lexicon::Lexicons;
use autoquery::metrics::{coverage, wilson_interval};
use autoquery::pipeline::{run, RunOutput, Settings};
use autoquery::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    DataError = 4,
    /// The pipeline has not been run since its inputs last changed.
    NotReady = 5,
    Panic = 6,
}

/// Opaque pipeline handle.
pub struct AqPipeline {
    lex: Lexicons,
    corpora: Vec<Corpus>,
    output: Option<RunOutput>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

struct Fail(AqStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::InvalidArgument(_) | Error::Threshold(_) => AqStatus::InvalidArgument,
            _ => AqStatus::DataError,
        };
        Fail(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> AqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            AqStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            AqStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(AqStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(AqStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a>(p: *mut AqPipeline) -> Result<&'a mut AqPipeline, Fail> {
    p.as_mut()
        .ok_or_else(|| Fail(AqStatus::NullPointer, "pipeline is null".into()))
}

fn out_ptr<T>(p: *mut T) -> Result<(), Fail> {
    if p.is_null() {
        Err(Fail(AqStatus::NullPointer, "output pointer is null".into()))
    } else {
        Ok(())
    }
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .map(CString::into_raw)
        .unwrap_or(ptr::null_mut())
}

/// Creates a pipeline with the built-in lexicons.
#[no_mangle]
pub extern "C" fn aq_pipeline_new() -> *mut AqPipeline {
    catch_unwind(|| {
        Box::into_raw(Box::new(AqPipeline {
            lex: Lexicons::builtin(),
            corpora: Vec::new(),
            output: None,
        }))
    })
    .unwrap_or(ptr::null_mut())
}

/// # Safety
/// `p` must come from [`aq_pipeline_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn aq_pipeline_free(p: *mut AqPipeline) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Adds `text` as a new document of corpus `corpus_id`, creating the
/// corpus on first use.
///
/// # Safety
/// Pointers must be valid; strings must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn aq_pipeline_add_text(
    p: *mut AqPipeline,
    corpus_id: *const c_char,
    body: *const c_char,
) -> AqStatus {
    guard(|| {
        let pl = handle(p)?;
        let id = text(corpus_id, "corpus_id")?;
        let body = text(body, "text")?;
        if id.trim().is_empty() {
            return Err(Fail(AqStatus::InvalidArgument, "corpus_id is empty".into()));
        }
        let pos = match pl.corpora.iter().position(|c| c.corpus_id == id) {
            Some(i) => i,
            None => {
                pl.corpora.push(Corpus {
                    corpus_id: id.to_string(),
                    documents: Vec::new(),
                });
                pl.corpora.len() - 1
            }
        };
        let corpus = &mut pl.corpora[pos];
        let doc_id = format!("doc{}", corpus.documents.len());
        let doc = make_document(&doc_id, "", body, &pl.lex.tagger)
            .ok_or_else(|| Fail(AqStatus::InvalidArgument, "text is blank".into()))?;
        corpus.documents.push(doc);
        pl.output = None;
        Ok(())
    })
}

/// Runs every stage with threshold `theta` and `topk` answers per query.
///
/// # Safety
/// `p` must be a live pipeline.
#[no_mangle]
pub unsafe extern "C" fn aq_pipeline_run(p: *mut AqPipeline, theta: f64, topk: usize) -> AqStatus {
    guard(|| {
        let pl = handle(p)?;
        if pl.corpora.is_empty() {
            return Err(Fail(AqStatus::DataError, "no text added".into()));
        }
        let settings = Settings {
            theta,
            topk,
            ..Settings::default()
        };
        pl.output = Some(run(&pl.corpora, &pl.lex, &settings)?);
        Ok(())
    })
}

fn output(pl: &AqPipeline) -> Result<&RunOutput, Fail> {
    pl.output
        .as_ref()
        .ok_or_else(|| Fail(AqStatus::NotReady, "pipeline has not been run".into()))
}

/// Number of queries after pruning and answering.
///
/// # Safety
/// `p` must be a live pipeline and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn aq_pipeline_query_count(p: *mut AqPipeline, out: *mut usize) -> AqStatus {
    guard(|| {
        out_ptr(out)?;
        *out = output(handle(p)?)?.queries.len();
        Ok(())
    })
}

/// Queries as a JSON array. Free the result with [`aq_string_free`].
///
/// # Safety
/// `p` must be a live pipeline and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn aq_pipeline_queries_json(p: *mut AqPipeline, out: *mut *mut c_char) -> AqStatus {
    guard(|| {
        out_ptr(out)?;
        let json = serde_json::to_string(&output(handle(p)?)?.queries)
            .map_err(|e| Fail(AqStatus::DataError, e.to_string()))?;
        *out = to_c_string(json);
        Ok(())
    })
}

/// Share of live queries answered at or above `theta`.
///
/// # Safety
/// `p` must be a live pipeline and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn aq_pipeline_coverage(p: *mut AqPipeline, theta: f64, out: *mut f64) -> AqStatus {
    guard(|| {
        out_ptr(out)?;
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::Threshold(theta).into());
        }
        let o = output(handle(p)?)?;
        *out = coverage(&o.queries, &o.answers, theta).coverage;
        Ok(())
    })
}

/// Wilson score interval for `k` successes out of `n`.
///
/// # Safety
/// `lo` and `hi` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aq_wilson_interval(k: usize, n: usize, z: f64, lo: *mut f64, hi: *mut f64) -> AqStatus {
    guard(|| {
        out_ptr(lo)?;
        out_ptr(hi)?;
        let (l, h) = wilson_interval(k, n, z)?;
        *lo = l;
        *hi = h;
        Ok(())
    })
}

/// Tokens, tags and chunks of one sentence as JSON. Free the result with
/// [`aq_string_free`].
///
/// # Safety
/// `sentence` must be NUL-terminated and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn aq_analyze_sentence_json(sentence: *const c_char, out: *mut *mut c_char) -> AqStatus {
    guard(|| {
        out_ptr(out)?;
        let s = text(sentence, "sentence")?;
        let analyzed = analyze_sentence(s, &Lexicons::builtin().tagger);
        let json = serde_json::to_string(&analyzed).map_err(|e| Fail(AqStatus::DataError, e.to_string()))?;
        *out = to_c_string(json);
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn aq_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message for the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn aq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}
