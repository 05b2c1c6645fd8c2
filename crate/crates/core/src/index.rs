//! In-memory inverted index with raw-document retention and Okapi BM25 scoring.
//!
//! Documents are stored in ascending `doc_id` order and addressed internally by
//! their position in that order, so postings sorted by ordinal are also sorted
//! by id and ordinal order doubles as the rank tie-break.
//!
//! # Serialization
//!
//! [`InvertedIndex::save`] writes a single JSON object:
//!
//! ```text
//! {
//!   "format": "convsearch-index",
//!   "version": 1,
//!   "analyzer_version": 1,
//!   "doc_ids": ["d1", "d2", ...],          // ascending
//!   "texts": ["raw text of d1", ...],       // verbatim input
//!   "doc_lengths": [12, 40, ...],           // analyzed token counts
//!   "postings": { "term": [[ordinal, tf], ...], ... }
//! }
//! ```
//!
//! Ordinals index into `doc_ids`. Document frequencies and the average length
//! are derived on load.

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ranking::{RankedList, Scored};
use crate::tokenize::{tokenize, ANALYZER_VERSION};

const FORMAT_NAME: &str = "convsearch-index";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    #[serde(rename = "id")]
    pub doc_id: String,
    #[serde(rename = "contents")]
    pub text: String,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            doc_id: doc_id.into(),
            text: text.into(),
        }
    }

    pub fn token_count(&self) -> usize {
        tokenize(&self.text).len()
    }
}

/// Reads a jsonl collection: one `{"id": ..., "contents": ...}` object per line.
/// Blank lines are skipped; errors carry the 1-based line number.
pub fn read_jsonl(reader: impl BufRead) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::parse(lineno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line).map_err(|e| Error::parse(lineno, e.to_string()))?;
        if doc.doc_id.is_empty() {
            return Err(Error::parse(lineno, "empty document id"));
        }
        docs.push(doc);
    }
    Ok(docs)
}

pub fn read_jsonl_file(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_jsonl(std::io::BufReader::new(file))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Bm25Params {
    /// Parameters of the first submitted run (also the usual toolkit default).
    pub const RUN_1: Bm25Params = Bm25Params { k1: 0.9, b: 0.4 };
    /// Parameters of the second submitted run (classic Robertson values).
    pub const RUN_2: Bm25Params = Bm25Params { k1: 1.2, b: 0.75 };

    pub fn new(k1: f64, b: f64) -> Result<Self> {
        let params = Self { k1, b };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k1.is_finite() && self.k1 >= 0.0) {
            return Err(Error::InvalidParams(format!("k1 must be >= 0, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::InvalidParams(format!("b must be in [0, 1], got {}", self.b)));
        }
        Ok(())
    }
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self::RUN_2
    }
}

/// `ln(1 + (N - df + 0.5) / (df + 0.5))`, positive for every `df <= N`.
pub fn idf(doc_count: usize, df: usize) -> f64 {
    let n = doc_count as f64;
    let df = df as f64;
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

/// One summand of the BM25 sum.
pub fn term_weight(params: Bm25Params, idf: f64, tf: f64, len: f64, avg_len: f64) -> f64 {
    let rel_len = if avg_len > 0.0 { len / avg_len } else { 1.0 };
    let norm = params.k1 * (1.0 - params.b + params.b * rel_len);
    idf * tf * (params.k1 + 1.0) / (tf + norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(u32, u32)", into = "(u32, u32)")]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

impl From<(u32, u32)> for Posting {
    fn from((doc, tf): (u32, u32)) -> Self {
        Self { doc, tf }
    }
}

impl From<Posting> for (u32, u32) {
    fn from(p: Posting) -> Self {
        (p.doc, p.tf)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    doc_ids: Vec<String>,
    texts: Vec<String>,
    doc_lengths: Vec<u32>,
    postings: BTreeMap<String, Vec<Posting>>,
    avg_doc_len: f64,
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    format: String,
    version: u32,
    analyzer_version: u32,
    doc_ids: Vec<String>,
    texts: Vec<String>,
    doc_lengths: Vec<u32>,
    postings: BTreeMap<String, Vec<Posting>>,
}

pub fn build_index(docs: impl IntoIterator<Item = Document>) -> Result<InvertedIndex> {
    let mut docs: Vec<Document> = docs.into_iter().collect();
    if docs.is_empty() {
        return Err(Error::EmptyCollection);
    }
    docs.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    if let Some(w) = docs.windows(2).find(|w| w[0].doc_id == w[1].doc_id) {
        return Err(Error::DuplicateDocId(w[0].doc_id.clone()));
    }

    let mut postings: HashMap<String, Vec<Posting>> = HashMap::new();
    let mut doc_lengths = Vec::with_capacity(docs.len());
    for (ord, doc) in docs.iter().enumerate() {
        let terms = tokenize(&doc.text);
        doc_lengths.push(terms.len() as u32);
        let mut tf: HashMap<String, u32> = HashMap::new();
        for term in terms {
            *tf.entry(term).or_default() += 1;
        }
        for (term, count) in tf {
            postings.entry(term).or_default().push(Posting {
                doc: ord as u32,
                tf: count,
            });
        }
    }

    let (doc_ids, texts) = docs.into_iter().map(|d| (d.doc_id, d.text)).unzip();
    Ok(InvertedIndex::assemble(
        doc_ids,
        texts,
        doc_lengths,
        postings.into_iter().collect(),
    ))
}

impl InvertedIndex {
    fn assemble(
        doc_ids: Vec<String>,
        texts: Vec<String>,
        doc_lengths: Vec<u32>,
        postings: BTreeMap<String, Vec<Posting>>,
    ) -> Self {
        let total: u64 = doc_lengths.iter().map(|&l| l as u64).sum();
        let avg_doc_len = total as f64 / doc_lengths.len() as f64;
        Self {
            doc_ids,
            texts,
            doc_lengths,
            postings,
            avg_doc_len,
        }
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.avg_doc_len
    }

    pub fn vocabulary_size(&self) -> usize {
        self.postings.len()
    }

    pub fn ordinal(&self, doc_id: &str) -> Option<usize> {
        self.doc_ids.binary_search_by(|probe| probe.as_str().cmp(doc_id)).ok()
    }

    pub fn doc_id(&self, ordinal: usize) -> &str {
        &self.doc_ids[ordinal]
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    /// The original text of a document, verbatim.
    pub fn raw_text(&self, doc_id: &str) -> Option<&str> {
        self.ordinal(doc_id).map(|o| self.texts[o].as_str())
    }

    pub fn doc_len(&self, doc_id: &str) -> Option<u32> {
        self.ordinal(doc_id).map(|o| self.doc_lengths[o])
    }

    pub fn doc_len_at(&self, ordinal: usize) -> u32 {
        self.doc_lengths[ordinal]
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map_or(&[], Vec::as_slice)
    }

    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.postings.keys().map(String::as_str)
    }

    pub fn idf(&self, term: &str) -> f64 {
        idf(self.doc_count(), self.doc_freq(term))
    }

    /// Fraction of documents containing `term`; 0 for unseen terms.
    pub fn df_fraction(&self, term: &str) -> f64 {
        self.doc_freq(term) as f64 / self.doc_count() as f64
    }

    fn tf(&self, term: &str, ordinal: u32) -> u32 {
        let list = self.postings(term);
        list.binary_search_by_key(&ordinal, |p| p.doc).map_or(0, |i| list[i].tf)
    }

    /// BM25 of one document for a bag of query terms. A term repeated in the
    /// query contributes once per repetition.
    pub fn bm25_score(&self, params: Bm25Params, query_terms: &[String], doc_id: &str) -> Result<f64> {
        let ord = self
            .ordinal(doc_id)
            .ok_or_else(|| Error::UnknownDocId(doc_id.to_string()))?;
        let len = self.doc_lengths[ord] as f64;
        let mut score = 0.0;
        for term in query_terms {
            let tf = self.tf(term, ord as u32);
            if tf > 0 {
                score += term_weight(params, self.idf(term), tf as f64, len, self.avg_doc_len);
            }
        }
        Ok(score)
    }

    /// The `k` best documents among those containing at least one query term.
    pub fn search(&self, params: Bm25Params, query_terms: &[String], k: usize) -> RankedList {
        let mut acc = vec![0.0f64; self.doc_count()];
        let mut touched: Vec<u32> = Vec::new();
        let mut hit = vec![false; self.doc_count()];
        for term in query_terms {
            let list = self.postings(term);
            if list.is_empty() {
                continue;
            }
            let idf = idf(self.doc_count(), list.len());
            for p in list {
                let d = p.doc as usize;
                acc[d] += term_weight(params, idf, p.tf as f64, self.doc_lengths[d] as f64, self.avg_doc_len);
                if !hit[d] {
                    hit[d] = true;
                    touched.push(p.doc);
                }
            }
        }

        let cmp = |a: &u32, b: &u32| acc[*b as usize].total_cmp(&acc[*a as usize]).then_with(|| a.cmp(b));
        if touched.len() > k && k > 0 {
            touched.select_nth_unstable_by(k - 1, cmp);
        }
        touched.truncate(k);
        touched.sort_unstable_by(cmp);

        RankedList {
            entries: touched
                .into_iter()
                .map(|d| Scored {
                    id: self.doc_ids[d as usize].clone(),
                    score: acc[d as usize],
                })
                .collect(),
            k,
        }
    }

    pub fn write_json(&self, out: impl Write) -> Result<()> {
        let file = IndexFile {
            format: FORMAT_NAME.to_string(),
            version: FORMAT_VERSION,
            analyzer_version: ANALYZER_VERSION,
            doc_ids: self.doc_ids.clone(),
            texts: self.texts.clone(),
            doc_lengths: self.doc_lengths.clone(),
            postings: self.postings.clone(),
        };
        serde_json::to_writer(out, &file)?;
        Ok(())
    }

    pub fn read_json(input: impl std::io::Read) -> Result<Self> {
        let file: IndexFile = serde_json::from_reader(input)?;
        let bad = |msg: String| Error::InvalidConfig(format!("corrupt index: {msg}"));
        if file.format != FORMAT_NAME || file.version != FORMAT_VERSION {
            return Err(bad(format!("unsupported format {} v{}", file.format, file.version)));
        }
        if file.analyzer_version != ANALYZER_VERSION {
            return Err(bad(format!(
                "built with analyzer v{}, this build uses v{ANALYZER_VERSION}",
                file.analyzer_version
            )));
        }
        let n = file.doc_ids.len();
        if n == 0 {
            return Err(Error::EmptyCollection);
        }
        if file.texts.len() != n || file.doc_lengths.len() != n {
            return Err(bad("column lengths differ".into()));
        }
        if file.doc_ids.windows(2).any(|w| w[0] >= w[1]) {
            return Err(bad("document ids not strictly ascending".into()));
        }
        for (term, list) in &file.postings {
            let sorted = list.windows(2).all(|w| w[0].doc < w[1].doc);
            if list.is_empty() || !sorted || list.iter().any(|p| p.doc as usize >= n || p.tf == 0) {
                return Err(bad(format!("bad postings for `{term}`")));
            }
        }
        Ok(Self::assemble(
            file.doc_ids,
            file.texts,
            file.doc_lengths,
            file.postings,
        ))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        self.write_json(&mut out)?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_json(std::io::BufReader::new(file))
    }
}
