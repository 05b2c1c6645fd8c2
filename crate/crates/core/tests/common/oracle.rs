//! Brute-force scorers and random generators, independent of the index.

use std::collections::HashMap;

use convsearch_core::{tokenize, Bm25Params, Document};
use rand::seq::SliceRandom;
use rand::Rng;

pub const PRONOUNS: [&str; 6] = ["it", "they", "this", "she", "them", "its"];

pub fn word(i: usize) -> String {
    format!("w{i}")
}

/// Picks a vocabulary index with a skew towards small indices, so that
/// document frequencies spread from very common to very rare.
fn skewed(rng: &mut impl Rng, vocab: usize) -> usize {
    let u: f64 = rng.random();
    ((u * u * vocab as f64) as usize).min(vocab - 1)
}

/// Between 1 and `max_docs` documents over `vocab` words, in shuffled order.
/// Some documents carry numbers and stopwords.
pub fn random_corpus(rng: &mut impl Rng, max_docs: usize, vocab: usize) -> Vec<Document> {
    let n = rng.random_range(1..=max_docs);
    let mut docs: Vec<Document> = (0..n)
        .map(|i| {
            let len = rng.random_range(1..=30);
            let mut words: Vec<String> = (0..len).map(|_| word(skewed(rng, vocab))).collect();
            if rng.random_bool(0.2) {
                words.push(rng.random_range(0..500).to_string());
            }
            if rng.random_bool(0.3) {
                words.insert(0, "The".into());
            }
            Document::new(format!("d{i:03}"), words.join(" "))
        })
        .collect();
    docs.shuffle(rng);
    docs
}

/// One to five terms, possibly repeated, possibly absent from the corpus.
pub fn random_query(rng: &mut impl Rng, vocab: usize) -> Vec<String> {
    let len = rng.random_range(1..=5);
    (0..len)
        .map(|_| {
            if rng.random_bool(0.1) {
                "absent".to_string()
            } else {
                word(rng.random_range(0..vocab))
            }
        })
        .collect()
}

/// A session of utterances mixing vocabulary words, pronouns, stopwords and
/// numbers. Utterances may be empty.
pub fn random_session(rng: &mut impl Rng, vocab: usize) -> Vec<String> {
    let turns = rng.random_range(1..=6);
    (0..turns)
        .map(|_| {
            let len = rng.random_range(0..=6);
            let mut words: Vec<String> = (0..len)
                .map(|_| match rng.random_range(0..10) {
                    0 => PRONOUNS[rng.random_range(0..PRONOUNS.len())].to_string(),
                    1 => "is".to_string(),
                    2 => rng.random_range(0..50).to_string(),
                    _ => word(rng.random_range(0..vocab)),
                })
                .collect();
            if rng.random_bool(0.5) {
                words.push("?".into());
            }
            words.join(" ")
        })
        .collect()
}

pub struct Brute {
    ids: Vec<String>,
    docs: Vec<Vec<String>>,
}

impl Brute {
    pub fn new(docs: &[Document]) -> Self {
        Self {
            ids: docs.iter().map(|d| d.doc_id.clone()).collect(),
            docs: docs.iter().map(|d| tokenize(&d.text)).collect(),
        }
    }

    fn avg_len(&self) -> f64 {
        self.docs.iter().map(Vec::len).sum::<usize>() as f64 / self.docs.len() as f64
    }

    fn df(&self, term: &str) -> usize {
        self.docs.iter().filter(|d| d.iter().any(|t| t == term)).count()
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.docs.len() as f64;
        let df = self.df(term) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    pub fn score(&self, params: Bm25Params, query: &[String], doc: usize) -> f64 {
        let idf: HashMap<&str, f64> = query.iter().map(|q| (q.as_str(), self.idf(q))).collect();
        self.score_with(params, query, doc, &idf, self.avg_len())
    }

    fn score_with(&self, params: Bm25Params, query: &[String], doc: usize, idf: &HashMap<&str, f64>, avg: f64) -> f64 {
        let terms = &self.docs[doc];
        let len = terms.len() as f64;
        let rel = if avg > 0.0 { len / avg } else { 1.0 };
        let mut total = 0.0;
        for q in query {
            let tf = terms.iter().filter(|t| *t == q).count() as f64;
            if tf > 0.0 {
                total +=
                    idf[q.as_str()] * tf * (params.k1 + 1.0) / (tf + params.k1 * (1.0 - params.b + params.b * rel));
            }
        }
        total
    }

    /// Every document matching at least one query term, best first, ties by id.
    pub fn search(&self, params: Bm25Params, query: &[String], k: usize) -> Vec<(String, f64)> {
        let idf: HashMap<&str, f64> = query.iter().map(|q| (q.as_str(), self.idf(q))).collect();
        let avg = self.avg_len();
        let mut hits: Vec<(String, f64)> = (0..self.docs.len())
            .filter(|&i| self.docs[i].iter().any(|t| query.contains(t)))
            .map(|i| (self.ids[i].clone(), self.score_with(params, query, i, &idf, avg)))
            .collect();
        hits.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        hits.truncate(k);
        hits
    }
}

/// Compares an engine ranking with the brute-force one: same ids in the same
/// order and scores within `1e-9`.
pub fn same_ranking(got: &[(String, f64)], want: &[(String, f64)]) -> Result<(), String> {
    if got.len() != want.len() {
        return Err(format!("{} hits, expected {}", got.len(), want.len()));
    }
    for (i, (g, w)) in got.iter().zip(want).enumerate() {
        if g.0 != w.0 {
            return Err(format!("rank {}: {} vs {}", i + 1, g.0, w.0));
        }
        if (g.1 - w.1).abs() > 1e-9 {
            return Err(format!("{}: score {} vs {}", g.0, g.1, w.1));
        }
    }
    Ok(())
}

/// Straightforward metric definitions used to cross-check the engine.
pub mod metrics {
    use super::HashMap;

    pub fn ndcg(ranking: &[String], judged: &HashMap<String, u32>, k: usize) -> f64 {
        let gain = |g: u32| 2f64.powi(g as i32) - 1.0;
        let mut ideal: Vec<u32> = judged.values().copied().filter(|&g| g > 0).collect();
        ideal.sort_unstable_by(|a, b| b.cmp(a));
        let idcg: f64 = ideal
            .iter()
            .take(k)
            .enumerate()
            .map(|(i, &g)| gain(g) / ((i + 2) as f64).log2())
            .sum();
        if idcg == 0.0 {
            return 0.0;
        }
        let dcg: f64 = ranking
            .iter()
            .take(k)
            .enumerate()
            .map(|(i, p)| gain(*judged.get(p).unwrap_or(&0)) / ((i + 2) as f64).log2())
            .sum();
        dcg / idcg
    }

    pub fn ap(ranking: &[String], judged: &HashMap<String, u32>, k: usize) -> f64 {
        let relevant = judged.values().filter(|&&g| g >= 1).count();
        if relevant == 0 {
            return 0.0;
        }
        let mut hits = 0;
        let mut sum = 0.0;
        for (i, p) in ranking.iter().take(k).enumerate() {
            if judged.get(p).is_some_and(|&g| g >= 1) {
                hits += 1;
                sum += hits as f64 / (i + 1) as f64;
            }
        }
        sum / relevant as f64
    }

    pub fn precision(ranking: &[String], judged: &HashMap<String, u32>, k: usize) -> f64 {
        ranking
            .iter()
            .take(k)
            .filter(|p| judged.get(*p).is_some_and(|&g| g >= 1))
            .count() as f64
            / k as f64
    }
}
