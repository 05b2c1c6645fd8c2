use serde::{Deserialize, Serialize};

use super::http::HttpRewriter;
use super::StageError;

/// Joins history turns and the current utterance for the `concat` plugin and
/// for model servers that take a single flattened input.
pub const HISTORY_SEPARATOR: &str = " ||| ";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteRequest {
    pub history: Vec<String>,
    pub current: String,
}

pub trait Rewriter: Send + Sync {
    fn rewrite(&self, req: &RewriteRequest) -> Result<String, StageError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PassthroughRewriter;

impl Rewriter for PassthroughRewriter {
    fn rewrite(&self, req: &RewriteRequest) -> Result<String, StageError> {
        Ok(req.current.clone())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ConcatRewriter;

impl Rewriter for ConcatRewriter {
    fn rewrite(&self, req: &RewriteRequest) -> Result<String, StageError> {
        let mut parts: Vec<&str> = req.history.iter().map(String::as_str).collect();
        parts.push(&req.current);
        Ok(parts.join(HISTORY_SEPARATOR))
    }
}

/// Rewriter selection as it appears in configuration files.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RewriterSpec {
    #[default]
    Passthrough,
    Concat,
    Http {
        url: String,
        #[serde(default = "super::http::default_timeout_ms")]
        timeout_ms: u64,
    },
}

impl RewriterSpec {
    pub fn build(&self) -> Box<dyn Rewriter> {
        match self {
            RewriterSpec::Passthrough => Box::new(PassthroughRewriter),
            RewriterSpec::Concat => Box::new(ConcatRewriter),
            RewriterSpec::Http { url, timeout_ms } => Box::new(HttpRewriter::new(url, *timeout_ms)),
        }
    }
}
