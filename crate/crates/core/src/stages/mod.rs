//! Stages that run after first-stage retrieval: chunking retrieved documents
//! into passages, rewriting the utterance with its history, and reranking.
//!
//! Rewriting and reranking are plugins. The in-process defaults are
//! deterministic; the `http` variants delegate to an external model server
//! speaking a small JSON protocol (see [`http`]).

mod chunk;
pub mod http;
mod rerank;
mod rewrite;

pub use chunk::{chunk_document, ChunkConfig, Passage};
pub use rerank::{LexicalReranker, Reranker, RerankerSpec};
pub use rewrite::{ConcatRewriter, PassthroughRewriter, RewriteRequest, Rewriter, RewriterSpec, HISTORY_SEPARATOR};

#[derive(Debug, thiserror::Error)]
pub enum StageError {
    #[error("model server request failed: {0}")]
    Transport(String),
    #[error("model server returned status {0}")]
    Status(u16),
    #[error("model server response rejected: {0}")]
    InvalidResponse(String),
}
