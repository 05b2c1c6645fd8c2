//! Synthetic workloads shared by the benchmarks.

use convsearch_core::{build_index, Document, InvertedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `docs` documents of 20 to 120 words drawn from a Zipf-like vocabulary.
pub fn corpus(docs: usize, vocab: usize, seed: u64) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..docs)
        .map(|i| {
            let len = rng.random_range(20..=120);
            let words: Vec<String> = (0..len).map(|_| word(&mut rng, vocab)).collect();
            Document::new(format!("doc{i:06}"), words.join(" "))
        })
        .collect()
}

pub fn index(docs: usize, vocab: usize, seed: u64) -> InvertedIndex {
    build_index(corpus(docs, vocab, seed)).expect("synthetic corpus is valid")
}

pub fn queries(n: usize, len: usize, vocab: usize, seed: u64) -> Vec<Vec<String>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..len).map(|_| word(&mut rng, vocab)).collect())
        .collect()
}

fn word(rng: &mut ChaCha8Rng, vocab: usize) -> String {
    let u: f64 = rng.random();
    format!("w{}", ((u * u * u) * vocab as f64) as usize)
}
