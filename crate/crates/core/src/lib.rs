//! Conversational passage search.
//!
//! A session of utterances is answered turn by turn: the utterance is expanded
//! with keywords from earlier turns ([`hqe`]) and, when it contains a pronoun,
//! with pseudo-relevance feedback terms ([`pqe`]); the expanded bag of words
//! retrieves documents by BM25 ([`index`]); those are chunked into passages,
//! and a reranker orders the passages for a rewritten form of the utterance
//! ([`stages`]). [`pipeline`] wires the stages together, [`eval`] scores TREC
//! runs and [`tuner`] searches the HQE cutoffs.

pub mod error;
pub mod eval;
pub mod hqe;
pub mod index;
pub mod pipeline;
pub mod pqe;
pub mod ranking;
pub mod serde_float;
pub mod stages;
pub mod tokenize;
pub mod tuner;

pub use error::{Error, Result};
pub use eval::{evaluate_run, Metric, MetricsReport, Qrels, QueryMetrics, RunFile};
pub use hqe::{hqe_expand, ExpandedQuery, HqeConfig, Provenance, SessionState};
pub use index::{build_index, Bm25Params, Document, InvertedIndex};
pub use pipeline::{Pipeline, PipelineConfig, Topic, Turn, TurnResult};
pub use pqe::{pqe_expand, PqeConfig, PronounList};
pub use ranking::{RankedList, Scored};
pub use stages::{Passage, StageError};
pub use tokenize::tokenize;
pub use tuner::{greedy_tune, SearchSpace, TuneOptions, TuneResult};
