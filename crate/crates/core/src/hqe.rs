//! Historical query expansion.
//!
//! Every token of every utterance is scored by its importance: the BM25 score
//! of the token against its best document. Tokens clearing the session cutoff
//! join the session keyword set, which expands every later turn (and the turn
//! they came from). Tokens clearing the query cutoff are remembered per turn and
//! only expand a later turn whose own best BM25 score falls below the ambiguity
//! threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::{term_weight, Bm25Params, InvertedIndex};
use crate::serde_float;
use crate::tokenize::tokenize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HqeConfig {
    /// Session keyword cutoff.
    #[serde(with = "serde_float::real")]
    pub q_s: f64,
    /// Query keyword cutoff.
    #[serde(with = "serde_float::real")]
    pub q_t: f64,
    /// Ambiguity threshold: below it, earlier query keywords are added.
    #[serde(with = "serde_float::real")]
    pub theta: f64,
    /// Use `>` instead of `>=` when comparing importance to the cutoffs.
    pub strict_cutoffs: bool,
}

impl Default for HqeConfig {
    fn default() -> Self {
        Self {
            q_s: 4.0,
            q_t: 4.0,
            theta: 10.0,
            strict_cutoffs: false,
        }
    }
}

impl HqeConfig {
    pub fn new(q_s: f64, q_t: f64, theta: f64) -> Self {
        Self {
            q_s,
            q_t,
            theta,
            strict_cutoffs: false,
        }
    }

    /// Infinite cutoffs are allowed (they switch a keyword class off); NaN is not.
    pub fn validate(&self) -> Result<()> {
        if self.q_s.is_nan() || self.q_t.is_nan() || self.theta.is_nan() {
            return Err(Error::InvalidConfig("HQE cutoffs must not be NaN".into()));
        }
        Ok(())
    }

    fn clears(&self, importance: f64, cutoff: f64) -> bool {
        if self.strict_cutoffs {
            importance > cutoff
        } else {
            importance >= cutoff
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Original,
    Session,
    Query,
    Pqe,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Original => "original",
            Provenance::Session => "session",
            Provenance::Query => "query",
            Provenance::Pqe => "pqe",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpandedTerm {
    pub term: String,
    pub provenance: Provenance,
}

/// A turn's utterance with its expansion terms.
///
/// Original tokens come first, in utterance order; no term appears twice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpandedQuery {
    pub raw: String,
    pub terms: Vec<ExpandedTerm>,
}

impl ExpandedQuery {
    pub fn from_utterance(utterance: &str) -> Self {
        let mut q = Self {
            raw: utterance.to_string(),
            terms: Vec::new(),
        };
        for t in tokenize(utterance) {
            q.push(t, Provenance::Original);
        }
        q
    }

    pub fn contains(&self, term: &str) -> bool {
        self.terms.iter().any(|t| t.term == term)
    }

    /// Appends `term` unless it is already present. Returns whether it was added.
    pub fn push(&mut self, term: impl Into<String>, provenance: Provenance) -> bool {
        let term = term.into();
        if self.contains(&term) {
            return false;
        }
        self.terms.push(ExpandedTerm { term, provenance });
        true
    }

    /// All terms, for use as a bag-of-words query.
    pub fn bag(&self) -> Vec<String> {
        self.terms.iter().map(|t| t.term.clone()).collect()
    }

    pub fn with_provenance(&self, provenance: Provenance) -> impl Iterator<Item = &str> {
        self.terms
            .iter()
            .filter(move |t| t.provenance == provenance)
            .map(|t| t.term.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub turns: Vec<String>,
    /// Insertion-ordered and duplicate free; only ever grows.
    pub session_keywords: Vec<String>,
    /// Query keywords of each past turn, parallel to `turns`.
    pub query_keywords_by_turn: Vec<Vec<String>>,
}

impl SessionState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_session_keywords<'a>(&mut self, kws: impl IntoIterator<Item = &'a String>) {
        for kw in kws {
            if !self.session_keywords.contains(kw) {
                self.session_keywords.push(kw.clone());
            }
        }
    }

    pub fn record_turn(&mut self, utterance: &str, query_keywords: Vec<String>) {
        self.turns.push(utterance.to_string());
        self.query_keywords_by_turn.push(query_keywords);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Keywords {
    pub session: Vec<String>,
    pub query: Vec<String>,
}

/// Highest single-term BM25 score that any document achieves for `term`.
pub fn keyword_importance(index: &InvertedIndex, params: Bm25Params, term: &str) -> f64 {
    let idf = index.idf(term);
    index
        .postings(term)
        .iter()
        .map(|p| {
            let len = index.doc_len_at(p.doc as usize) as f64;
            term_weight(params, idf, p.tf as f64, len, index.avg_doc_len())
        })
        .fold(0.0, f64::max)
}

pub fn extract_keywords(index: &InvertedIndex, params: Bm25Params, utterance: &str, config: &HqeConfig) -> Keywords {
    let mut out = Keywords::default();
    let mut seen = std::collections::HashSet::new();
    for token in tokenize(utterance) {
        if !seen.insert(token.clone()) {
            continue;
        }
        let importance = keyword_importance(index, params, &token);
        if config.clears(importance, config.q_s) {
            out.session.push(token.clone());
        }
        if config.clears(importance, config.q_t) {
            out.query.push(token);
        }
    }
    out
}

/// Score of the utterance's best document; low means the utterance is
/// underspecified on its own.
pub fn ambiguity_score(index: &InvertedIndex, params: Bm25Params, utterance: &str) -> f64 {
    index
        .search(params, &tokenize(utterance), 1)
        .top()
        .map_or(0.0, |s| s.score)
}

/// Expands `utterance` with keywords mined from the session so far and
/// records the turn in `state`.
pub fn hqe_expand(
    state: &mut SessionState,
    utterance: &str,
    index: &InvertedIndex,
    params: Bm25Params,
    config: &HqeConfig,
) -> ExpandedQuery {
    let keywords = extract_keywords(index, params, utterance, config);
    state.add_session_keywords(&keywords.session);

    let mut query = ExpandedQuery::from_utterance(utterance);
    for kw in &state.session_keywords {
        query.push(kw.as_str(), Provenance::Session);
    }
    if ambiguity_score(index, params, utterance) < config.theta {
        for kw in state.query_keywords_by_turn.iter().flatten() {
            query.push(kw.as_str(), Provenance::Query);
        }
    }

    state.record_turn(utterance, keywords.query);
    query
}
