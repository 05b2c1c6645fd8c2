use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tokenize::tokens_with_spans;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChunkConfig {
    /// Tokens per passage.
    pub window: usize,
    /// Tokens between the starts of consecutive passages.
    pub stride: usize,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        Self {
            window: 128,
            stride: 64,
        }
    }
}

impl ChunkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 || self.window < self.stride {
            return Err(Error::InvalidConfig(format!(
                "chunking needs window >= stride >= 1, got window={} stride={}",
                self.window, self.stride
            )));
        }
        Ok(())
    }
}

/// A window of a document. `char_span` is a byte range into the raw text and
/// `text` is exactly that slice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub passage_id: String,
    pub doc_id: String,
    pub text: String,
    pub char_span: (usize, usize),
}

impl Passage {
    pub fn chunk_index(&self) -> usize {
        self.passage_id
            .rsplit_once('#')
            .and_then(|(_, i)| i.parse().ok())
            .unwrap_or(0)
    }
}

/// Splits a document into sliding windows of analyzed tokens. The last window
/// may be shorter; every token lands in at least one passage.
///
/// Panics if the config violates `window >= stride >= 1`.
pub fn chunk_document(doc_id: &str, text: &str, config: ChunkConfig) -> Vec<Passage> {
    assert!(
        config.stride >= 1 && config.window >= config.stride,
        "invalid chunk config {config:?}"
    );
    let tokens = tokens_with_spans(text);
    let mut out = Vec::new();
    let mut start = 0;
    while start < tokens.len() {
        let end = (start + config.window).min(tokens.len());
        let span = (tokens[start].start, tokens[end - 1].end);
        out.push(Passage {
            passage_id: format!("{doc_id}#{}", out.len()),
            doc_id: doc_id.to_string(),
            text: text[span.0..span.1].to_string(),
            char_span: span,
        });
        if end == tokens.len() {
            break;
        }
        start += config.stride;
    }
    out
}
