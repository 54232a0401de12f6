//! Automatic query generation over ingested text corpuses.
//!
//! The pipeline runs in stages: [`ingest`] segments and tags text,
//! [`objects`] extracts and types canonical noun phrases, [`querygen`]
//! realizes questions from six template families, [`pruning`] removes
//! nonsensical ones, [`answer`] scores them against the corpus, and
//! [`metrics`] / [`pairing`] summarize coverage, precision and corpus
//! groupings. [`workspace`] and [`service`] persist artifacts and expose
//! the review API.

pub mod answer;
pub mod error;
pub mod ids;
pub mod ingest;
pub mod lexicon;
pub mod metrics;
pub mod objects;
pub mod pairing;
pub mod pipeline;
pub mod pruning;
pub mod querygen;
pub mod service;
pub mod types;
pub mod workspace;

pub use error::{Error, Result};
pub use types::{Interrogative, ObjectType, PosTag, QueryKind};
