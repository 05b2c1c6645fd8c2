//! Batch commands behind the `convsearch` binary.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use convsearch_core::eval::{evaluate_run_with, EvalOptions};
use convsearch_core::index::read_jsonl_file;
use convsearch_core::pipeline::{load_topics, to_run_file};
use convsearch_core::tuner::TuneOptions;
use convsearch_core::*;

#[derive(Debug, Clone, PartialEq)]
pub struct IndexSummary {
    pub documents: usize,
    pub terms: usize,
    pub avg_doc_len: f64,
}

pub fn build(input: &Path, output: &Path) -> Result<IndexSummary> {
    let docs = read_jsonl_file(input).with_context(|| format!("reading {}", input.display()))?;
    let index = build_index(docs).with_context(|| format!("indexing {}", input.display()))?;
    index.save(output)?;
    Ok(IndexSummary {
        documents: index.doc_count(),
        terms: index.vocabulary_size(),
        avg_doc_len: index.avg_doc_len(),
    })
}

pub fn load_index(path: &Path) -> Result<InvertedIndex> {
    InvertedIndex::load(path).with_context(|| format!("loading index {}", path.display()))
}

/// The config at `path` (defaults when absent), with the pronoun list
/// replaced when `pronouns` is given.
pub fn load_config(path: Option<&Path>, pronouns: Option<&Path>) -> Result<PipelineConfig> {
    let mut cfg = match path {
        Some(p) => PipelineConfig::load(p).with_context(|| format!("loading config {}", p.display()))?,
        None => PipelineConfig::default(),
    };
    if let Some(p) = pronouns {
        cfg.pqe.pronouns = PronounList::load(p).with_context(|| format!("loading pronouns {}", p.display()))?;
    }
    Ok(cfg)
}

pub fn explain_line(turn: &TurnResult) -> String {
    let terms: Vec<String> = turn
        .expanded
        .terms
        .iter()
        .map(|t| format!("{}:{}", t.term, t.provenance.as_str()))
        .collect();
    format!("{}\t{}", turn.turn_id, terms.join(" "))
}

/// Runs every topic and writes a TREC run file. With `explain`, each turn's
/// expansion is written to `out`.
pub fn run(
    index: &InvertedIndex,
    topics_path: &Path,
    cfg: PipelineConfig,
    output: &Path,
    explain: bool,
    out: &mut impl Write,
) -> Result<RunFile> {
    let topics = load_topics(topics_path).with_context(|| format!("loading topics {}", topics_path.display()))?;
    let tag = cfg.run_tag.clone();
    let pipeline = Pipeline::new(cfg)?;
    let results = pipeline.run_topics_detailed(&topics, index)?;
    let turns: Vec<&TurnResult> = results.iter().flatten().collect();
    for t in &turns {
        if explain {
            writeln!(out, "{}", explain_line(t))?;
        }
        if let Some(reason) = &t.diagnostics.rewrite_fallback {
            tracing::warn!(turn_id = %t.turn_id, %reason, "rewriter failed, used the raw utterance");
        }
        if let Some(reason) = &t.diagnostics.rerank_fallback {
            tracing::warn!(turn_id = %t.turn_id, %reason, "reranker failed, kept first-stage order");
        }
    }
    let run = to_run_file(turns, &tag);
    let mut file = BufWriter::new(File::create(output).with_context(|| format!("creating {}", output.display()))?);
    file.write_all(run.to_trec_string().as_bytes())?;
    file.flush()?;
    Ok(run)
}

pub fn eval(run_path: &Path, qrels_path: &Path, threshold: u32) -> Result<MetricsReport> {
    let run = RunFile::load(run_path).with_context(|| format!("reading run {}", run_path.display()))?;
    let qrels = Qrels::load(qrels_path).with_context(|| format!("reading qrels {}", qrels_path.display()))?;
    Ok(evaluate_run_with(
        &run,
        &qrels,
        EvalOptions {
            relevance_threshold: threshold,
        },
    ))
}

pub struct TuneInputs<'a> {
    pub index: &'a InvertedIndex,
    pub topics: &'a Path,
    pub qrels: &'a Path,
    pub space: &'a Path,
}

pub fn tune(inputs: TuneInputs<'_>, base: &PipelineConfig, options: TuneOptions) -> Result<TuneResult> {
    let topics = load_topics(inputs.topics).with_context(|| format!("loading topics {}", inputs.topics.display()))?;
    let qrels = Qrels::load(inputs.qrels).with_context(|| format!("reading qrels {}", inputs.qrels.display()))?;
    let text = std::fs::read_to_string(inputs.space).with_context(|| format!("reading {}", inputs.space.display()))?;
    let space: SearchSpace =
        serde_json::from_str(&text).with_context(|| format!("parsing search space {}", inputs.space.display()))?;
    Ok(greedy_tune(&topics, &qrels, &space, base, inputs.index, options)?)
}

fn show(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v}")
    }
}

/// Trace table followed by the chosen values.
pub fn tune_table(result: &TuneResult) -> String {
    let mut out = format!(
        "{:<6}{:<8}{:>10}{:>10}{:>10}\n",
        "phase", "param", "value", "metric", "score"
    );
    for e in &result.trace {
        out += &format!(
            "{:<6}{:<8}{:>10}{:>10}{:>10.4}\n",
            e.phase,
            e.param,
            show(e.value),
            e.metric.name(),
            e.score
        );
    }
    out += &format!(
        "chosen q_s={} q_t={} theta={} k1={} b={}\n",
        show(result.hqe.q_s),
        show(result.hqe.q_t),
        show(result.hqe.theta),
        result.bm25.k1,
        result.bm25.b
    );
    out
}
