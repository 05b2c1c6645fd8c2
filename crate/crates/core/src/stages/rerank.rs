use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::http::HttpReranker;
use super::{Passage, StageError};
use crate::index::{term_weight, Bm25Params, InvertedIndex};
use crate::ranking::RankedList;
use crate::tokenize::tokenize;

/// Orders passages by relevance to `query`, best first, keeping at most `k`.
/// Output ids are a subset of the input ids.
pub trait Reranker: Send + Sync {
    fn rerank(
        &self,
        index: &InvertedIndex,
        query: &str,
        passages: &[Passage],
        k: usize,
    ) -> Result<RankedList, StageError>;
}

/// BM25 over the candidate passages: term frequencies and lengths come from
/// the passages themselves (average length over the candidate set), IDF from
/// the full index.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalReranker {
    pub params: Bm25Params,
}

impl LexicalReranker {
    pub fn new(params: Bm25Params) -> Self {
        Self { params }
    }
}

impl Reranker for LexicalReranker {
    fn rerank(
        &self,
        index: &InvertedIndex,
        query: &str,
        passages: &[Passage],
        k: usize,
    ) -> Result<RankedList, StageError> {
        if passages.is_empty() {
            return Ok(RankedList::empty(k));
        }
        let query_terms = tokenize(query);
        let idf: Vec<f64> = query_terms.iter().map(|t| index.idf(t)).collect();
        let analyzed: Vec<Vec<String>> = passages.iter().map(|p| tokenize(&p.text)).collect();
        let total: usize = analyzed.iter().map(Vec::len).sum();
        let avg_len = total as f64 / passages.len() as f64;

        let scored = passages.iter().zip(&analyzed).map(|(p, terms)| {
            let mut tf: HashMap<&str, usize> = HashMap::new();
            for t in terms {
                *tf.entry(t.as_str()).or_default() += 1;
            }
            let len = terms.len() as f64;
            let mut score = 0.0;
            for (term, idf) in query_terms.iter().zip(&idf) {
                if let Some(&f) = tf.get(term.as_str()) {
                    score += term_weight(self.params, *idf, f as f64, len, avg_len);
                }
            }
            (p.passage_id.clone(), score)
        });
        Ok(RankedList::from_candidates(scored, k))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum RerankerSpec {
    #[default]
    Lexical,
    Http {
        url: String,
        #[serde(default = "super::http::default_timeout_ms")]
        timeout_ms: u64,
    },
}

impl RerankerSpec {
    /// `params` configures the lexical plugin; the HTTP plugin ignores it.
    pub fn build(&self, params: Bm25Params) -> Box<dyn Reranker> {
        match self {
            RerankerSpec::Lexical => Box::new(LexicalReranker::new(params)),
            RerankerSpec::Http { url, timeout_ms } => Box::new(HttpReranker::new(url, *timeout_ms)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::{build_index, Document};
    use crate::stages::{chunk_document, ChunkConfig};

    fn passage(id: &str, text: &str) -> Passage {
        Passage {
            passage_id: id.to_string(),
            doc_id: id.split('#').next().unwrap().to_string(),
            text: text.to_string(),
            char_span: (0, text.len()),
        }
    }

    fn index() -> InvertedIndex {
        build_index(vec![
            Document::new("a", "lobular carcinoma situ"),
            Document::new("b", "ear infection"),
            Document::new("c", "cancer treatment options"),
        ])
        .unwrap()
    }

    #[test]
    fn single_passage() {
        let out = LexicalReranker::default()
            .rerank(&index(), "anything", &[passage("a#0", "ear")], 3)
            .unwrap();
        assert_eq!(out.ids().collect::<Vec<_>>(), ["a#0"]);
    }

    #[test]
    fn matching_passage_beats_non_matching() {
        let ps = [passage("a#0", "garden roses"), passage("b#0", "lobular carcinoma")];
        let out = LexicalReranker::default()
            .rerank(&index(), "lobular carcinoma", &ps, 5)
            .unwrap();
        assert_eq!(out.ids().collect::<Vec<_>>(), ["b#0", "a#0"]);
        assert_eq!(out.entries[1].score, 0.0);
    }

    #[test]
    fn truncates_to_k() {
        let idx = index();
        let doc = "lobular carcinoma situ ear infection cancer treatment options";
        let ps = chunk_document("a", doc, ChunkConfig { window: 2, stride: 1 });
        let out = LexicalReranker::default().rerank(&idx, "cancer", &ps, 3).unwrap();
        assert_eq!(out.len(), 3);
        assert!(out.is_well_formed());
    }

    #[test]
    fn empty_input() {
        let out = LexicalReranker::default().rerank(&index(), "cancer", &[], 3).unwrap();
        assert!(out.is_empty());
    }
}
