//! Pseudo-relevance feedback expansion.
//!
//! Runs only for utterances containing a pronoun. The documents retrieved for
//! the HQE-expanded query are concatenated into one feedback text, its tokens
//! are scored by TF-IDF (IDF over the whole index) and the best few that pass
//! the document-frequency band and are not pure numbers are appended.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hqe::{ExpandedQuery, Provenance};
use crate::index::{Bm25Params, InvertedIndex};
use crate::tokenize::{tokenize, words};

const BUILTIN_PRONOUNS: &str = include_str!("../data/pronouns.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PronounList(BTreeSet<String>);

impl PronounList {
    /// Parses the pronoun file format: one word per line, `#` comments.
    pub fn parse(text: &str) -> Self {
        Self(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        std::fs::read_to_string(path)
            .map(|t| Self::parse(&t))
            .map_err(|e| Error::io(path, e))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for PronounList {
    fn default() -> Self {
        Self::parse(BUILTIN_PRONOUNS)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PqeConfig {
    /// Feedback documents retrieved per query.
    pub top_docs: usize,
    /// Terms appended per query.
    pub top_tokens: usize,
    /// Inclusive lower bound on a candidate's document-frequency fraction.
    pub df_min: f64,
    /// Exclusive upper bound on a candidate's document-frequency fraction.
    pub df_max: f64,
    #[serde(skip)]
    pub pronouns: PronounList,
}

impl Default for PqeConfig {
    fn default() -> Self {
        Self {
            top_docs: 5,
            top_tokens: 3,
            df_min: 0.001,
            df_max: 0.2,
            pronouns: PronounList::default(),
        }
    }
}

impl PqeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.top_docs == 0 || self.top_tokens == 0 {
            return Err(Error::InvalidConfig(
                "PQE top_docs and top_tokens must be positive".into(),
            ));
        }
        if !(0.0 <= self.df_min && self.df_min < self.df_max && self.df_max <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "PQE DF band must satisfy 0 <= df_min < df_max <= 1, got [{}, {})",
                self.df_min, self.df_max
            )));
        }
        Ok(())
    }

    fn in_band(&self, df_fraction: f64) -> bool {
        self.df_min <= df_fraction && df_fraction < self.df_max
    }
}

/// True when any word of the utterance, stopwords included, is a pronoun.
pub fn has_pronoun(utterance: &str, pronouns: &PronounList) -> bool {
    words(utterance).iter().any(|w| pronouns.contains(&w.term))
}

fn is_number(term: &str) -> bool {
    term.chars().all(char::is_numeric)
}

/// The best `top_tokens` feedback terms by TF-IDF, ties broken alphabetically.
pub fn tfidf_rank(index: &InvertedIndex, feedback_docs: &[&str], config: &PqeConfig) -> Result<Vec<String>> {
    if feedback_docs.is_empty() {
        return Err(Error::EmptyFeedback);
    }
    let mut tf: HashMap<String, usize> = HashMap::new();
    for doc in feedback_docs {
        for term in tokenize(doc) {
            *tf.entry(term).or_default() += 1;
        }
    }
    let mut scored: Vec<(String, f64)> = tf
        .into_iter()
        .filter(|(term, _)| !is_number(term) && config.in_band(index.df_fraction(term)))
        .map(|(term, count)| {
            let score = count as f64 * index.idf(&term);
            (term, score)
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(config.top_tokens);
    Ok(scored.into_iter().map(|(t, _)| t).collect())
}

/// Appends feedback terms to `query` when `raw_utterance` contains a pronoun.
/// A query that retrieves nothing is returned unchanged.
pub fn pqe_expand(
    index: &InvertedIndex,
    params: Bm25Params,
    query: &ExpandedQuery,
    raw_utterance: &str,
    config: &PqeConfig,
) -> ExpandedQuery {
    let mut out = query.clone();
    if !has_pronoun(raw_utterance, &config.pronouns) {
        return out;
    }
    let hits = index.search(params, &query.bag(), config.top_docs);
    let feedback: Vec<&str> = hits.ids().filter_map(|id| index.raw_text(id)).collect();
    let Ok(terms) = tfidf_rank(index, &feedback, config) else {
        return out;
    };
    for term in terms {
        out.push(term, Provenance::Pqe);
    }
    out
}
