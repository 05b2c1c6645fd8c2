//! Text analysis shared by indexing, query processing and passage chunking.
//!
//! The analyzer is fixed: split on every non-alphanumeric character, lowercase
//! each segment, then drop the words in [`STOPWORDS`]. Digit-only terms are
//! kept; pseudo-relevance feedback removes them on its own.

/// Bumped whenever [`STOPWORDS`] or the splitting rules change, since indexes
/// built with a different analyzer are not comparable.
pub const ANALYZER_VERSION: u32 = 1;

/// The classic English stopword set used by Lucene's `EnglishAnalyzer`.
pub const STOPWORDS: [&str; 33] = [
    "a", "an", "and", "are", "as", "at", "be", "but", "by", "for", "if", "in", "into", "is", "it", "no", "not", "of",
    "on", "or", "such", "that", "the", "their", "then", "there", "these", "they", "this", "to", "was", "will", "with",
];

pub fn is_stopword(term: &str) -> bool {
    STOPWORDS.contains(&term)
}

/// A lowercased word together with the byte range it occupies in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub term: String,
    pub start: usize,
    pub end: usize,
}

/// Every alphanumeric run in `text`, lowercased, including stopwords.
pub fn words(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut start = None;
    for (pos, ch) in text.char_indices() {
        match (ch.is_alphanumeric(), start) {
            (true, None) => start = Some(pos),
            (false, Some(s)) => {
                out.push(make_token(text, s, pos));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push(make_token(text, s, text.len()));
    }
    out
}

fn make_token(text: &str, start: usize, end: usize) -> Token {
    Token {
        term: text[start..end].to_lowercase(),
        start,
        end,
    }
}

/// Indexed tokens of `text` with their source spans (stopwords removed).
pub fn tokens_with_spans(text: &str) -> Vec<Token> {
    words(text).into_iter().filter(|t| !is_stopword(&t.term)).collect()
}

pub fn tokenize(text: &str) -> Vec<String> {
    tokens_with_spans(text).into_iter().map(|t| t.term).collect()
}
