//! Per-turn orchestration: HQE → PQE → BM25 first stage → chunking →
//! rewriting → reranking.

use std::collections::{HashMap, HashSet};
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::eval::{RunEntry, RunFile};
use crate::hqe::{hqe_expand, ExpandedQuery, HqeConfig, SessionState};
use crate::index::{Bm25Params, InvertedIndex};
use crate::pqe::{pqe_expand, PqeConfig};
use crate::ranking::{RankedList, Scored};
use crate::stages::{
    chunk_document, ChunkConfig, Passage, PassthroughRewriter, Reranker, RerankerSpec, RewriteRequest, Rewriter,
    RewriterSpec,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub bm25: Bm25Params,
    pub enable_hqe: bool,
    pub hqe: HqeConfig,
    pub enable_pqe: bool,
    pub pqe: PqeConfig,
    /// Documents taken from first-stage retrieval.
    pub first_stage_depth: usize,
    /// Passages handed to the reranker, in first-stage order.
    pub rerank_depth: usize,
    /// Passages kept per turn.
    pub output_k: usize,
    pub chunk: ChunkConfig,
    pub rewriter: RewriterSpec,
    pub reranker: RerankerSpec,
    /// Last column of emitted run files.
    pub run_tag: String,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            bm25: Bm25Params::default(),
            enable_hqe: true,
            hqe: HqeConfig::default(),
            enable_pqe: true,
            pqe: PqeConfig::default(),
            first_stage_depth: 100,
            rerank_depth: 500,
            output_k: 500,
            chunk: ChunkConfig::default(),
            rewriter: RewriterSpec::default(),
            reranker: RerankerSpec::default(),
            run_tag: "convsearch".to_string(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.bm25.validate()?;
        self.hqe.validate()?;
        self.pqe.validate()?;
        self.chunk.validate()?;
        if self.first_stage_depth == 0 || self.rerank_depth == 0 || self.output_k == 0 {
            return Err(Error::InvalidConfig("depths must be positive".into()));
        }
        if self.output_k > self.rerank_depth {
            return Err(Error::InvalidConfig(format!(
                "output_k ({}) must not exceed rerank_depth ({})",
                self.output_k, self.rerank_depth
            )));
        }
        if self.run_tag.is_empty() || self.run_tag.contains(char::is_whitespace) {
            return Err(Error::InvalidConfig("run_tag must be a single non-empty word".into()));
        }
        Ok(())
    }

    /// Loads TOML (`.toml`) or JSON (anything else). Missing fields take
    /// their defaults.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?
        } else {
            serde_json::from_str(&text)?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Writes TOML or JSON, chosen by extension as in [`PipelineConfig::load`].
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = if path.extension().is_some_and(|e| e == "toml") {
            toml::to_string_pretty(self).map_err(|e| Error::InvalidConfig(e.to_string()))?
        } else {
            serde_json::to_string_pretty(self)? + "\n"
        };
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub hqe_us: u64,
    pub pqe_us: u64,
    pub first_stage_us: u64,
    pub chunk_us: u64,
    pub rewrite_us: u64,
    pub rerank_us: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub timings: StageTimings,
    /// Set when the rewriter failed and the raw utterance was used instead.
    pub rewrite_fallback: Option<String>,
    /// Set when the reranker failed and first-stage order was kept.
    pub rerank_fallback: Option<String>,
    pub first_stage_hits: usize,
    pub candidate_passages: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnResult {
    pub turn_id: String,
    pub expanded: ExpandedQuery,
    pub rewritten: String,
    pub ranking: RankedList,
    /// The passages of `ranking`, in the same order.
    pub passages: Vec<Passage>,
    pub diagnostics: Diagnostics,
}

impl TurnResult {
    pub fn degraded(&self) -> bool {
        self.diagnostics.rewrite_fallback.is_some() || self.diagnostics.rerank_fallback.is_some()
    }
}

fn id_string<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<String, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Id {
        Str(String),
        Int(i64),
    }
    Ok(match Id::deserialize(d)? {
        Id::Str(s) => s,
        Id::Int(i) => i.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    #[serde(deserialize_with = "id_string")]
    pub turn_id: String,
    pub raw_utterance: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topic {
    #[serde(deserialize_with = "id_string")]
    pub topic_id: String,
    pub turns: Vec<Turn>,
}

impl Topic {
    pub fn query_id(&self, turn: &Turn) -> String {
        format!("{}_{}", self.topic_id, turn.turn_id)
    }
}

pub fn load_topics(path: impl AsRef<Path>) -> Result<Vec<Topic>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

fn micros(d: Duration) -> u64 {
    d.as_micros().min(u64::MAX as u128) as u64
}

/// A configured pipeline with its plugins instantiated.
pub struct Pipeline {
    cfg: PipelineConfig,
    rewriter: Box<dyn Rewriter>,
    reranker: Box<dyn Reranker>,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        let rewriter = cfg.rewriter.build();
        let reranker = cfg.reranker.build(cfg.bm25);
        Ok(Self {
            cfg,
            rewriter,
            reranker,
        })
    }

    /// Uses caller-supplied plugins instead of the ones named in `cfg`.
    pub fn with_plugins(cfg: PipelineConfig, rewriter: Box<dyn Rewriter>, reranker: Box<dyn Reranker>) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            rewriter,
            reranker,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn run_turn(
        &self,
        state: &mut SessionState,
        turn_id: &str,
        utterance: &str,
        index: &InvertedIndex,
    ) -> TurnResult {
        let cfg = &self.cfg;
        let mut diag = Diagnostics::default();
        let history = state.turns.clone();

        let t = Instant::now();
        let hqe_query = if cfg.enable_hqe {
            hqe_expand(state, utterance, index, cfg.bm25, &cfg.hqe)
        } else {
            state.record_turn(utterance, Vec::new());
            ExpandedQuery::from_utterance(utterance)
        };
        diag.timings.hqe_us = micros(t.elapsed());

        if utterance.trim().is_empty() {
            return TurnResult {
                turn_id: turn_id.to_string(),
                expanded: hqe_query,
                rewritten: String::new(),
                ranking: RankedList::empty(cfg.output_k),
                passages: Vec::new(),
                diagnostics: diag,
            };
        }

        let t = Instant::now();
        let expanded = if cfg.enable_pqe {
            pqe_expand(index, cfg.bm25, &hqe_query, utterance, &cfg.pqe)
        } else {
            hqe_query
        };
        diag.timings.pqe_us = micros(t.elapsed());

        let t = Instant::now();
        let first_stage = index.search(cfg.bm25, &expanded.bag(), cfg.first_stage_depth);
        diag.timings.first_stage_us = micros(t.elapsed());
        diag.first_stage_hits = first_stage.len();

        let t = Instant::now();
        let mut candidates: Vec<Passage> = Vec::new();
        for hit in &first_stage.entries {
            if candidates.len() >= cfg.rerank_depth {
                break;
            }
            let text = index.raw_text(&hit.id).unwrap_or_default();
            candidates.extend(chunk_document(&hit.id, text, cfg.chunk));
        }
        candidates.truncate(cfg.rerank_depth);
        diag.timings.chunk_us = micros(t.elapsed());
        diag.candidate_passages = candidates.len();

        let t = Instant::now();
        let request = RewriteRequest {
            history,
            current: utterance.to_string(),
        };
        let rewritten = self.rewriter.rewrite(&request).unwrap_or_else(|e| {
            diag.rewrite_fallback = Some(e.to_string());
            PassthroughRewriter
                .rewrite(&request)
                .unwrap_or_else(|_| request.current.clone())
        });
        diag.timings.rewrite_us = micros(t.elapsed());

        let t = Instant::now();
        let ranking = match self.reranker.rerank(index, &rewritten, &candidates, cfg.output_k) {
            Ok(r) => r,
            Err(e) => {
                diag.rerank_fallback = Some(e.to_string());
                first_stage_order(&candidates, cfg.output_k)
            }
        };
        diag.timings.rerank_us = micros(t.elapsed());

        let by_id: HashMap<&str, &Passage> = candidates.iter().map(|p| (p.passage_id.as_str(), p)).collect();
        let passages = ranking
            .ids()
            .filter_map(|id| by_id.get(id).map(|p| (*p).clone()))
            .collect();

        TurnResult {
            turn_id: turn_id.to_string(),
            expanded,
            rewritten,
            ranking,
            passages,
            diagnostics: diag,
        }
    }

    /// Runs every topic in a fresh session. Topics run in parallel; turns of a
    /// topic run in order. Results keep the input topic order.
    pub fn run_topics_detailed(&self, topics: &[Topic], index: &InvertedIndex) -> Result<Vec<Vec<TurnResult>>> {
        let mut ids = HashSet::new();
        for topic in topics {
            for turn in &topic.turns {
                let qid = topic.query_id(turn);
                if !ids.insert(qid.clone()) {
                    return Err(Error::DuplicateTurnId(qid));
                }
            }
        }
        Ok(topics
            .par_iter()
            .map(|topic| {
                let mut state = SessionState::new();
                topic
                    .turns
                    .iter()
                    .map(|turn| self.run_turn(&mut state, &topic.query_id(turn), &turn.raw_utterance, index))
                    .collect()
            })
            .collect())
    }

    pub fn run_topics(&self, topics: &[Topic], index: &InvertedIndex) -> Result<RunFile> {
        let results = self.run_topics_detailed(topics, index)?;
        Ok(to_run_file(results.iter().flatten(), &self.cfg.run_tag))
    }
}

/// Fallback ranking: first-stage order with strictly decreasing synthetic scores.
fn first_stage_order(candidates: &[Passage], k: usize) -> RankedList {
    let n = candidates.len();
    RankedList {
        entries: candidates
            .iter()
            .take(k)
            .enumerate()
            .map(|(i, p)| Scored {
                id: p.passage_id.clone(),
                score: (n - i) as f64,
            })
            .collect(),
        k,
    }
}

pub fn to_run_file<'a>(turns: impl IntoIterator<Item = &'a TurnResult>, tag: &str) -> RunFile {
    let entries = turns
        .into_iter()
        .flat_map(|t| {
            t.ranking.entries.iter().enumerate().map(|(i, e)| RunEntry {
                query_id: t.turn_id.clone(),
                passage_id: e.id.clone(),
                rank: i + 1,
                score: e.score,
                tag: tag.to_string(),
            })
        })
        .collect();
    RunFile { entries }
}

pub fn run_turn(
    state: &mut SessionState,
    turn_id: &str,
    utterance: &str,
    cfg: &PipelineConfig,
    index: &InvertedIndex,
) -> Result<TurnResult> {
    Ok(Pipeline::new(cfg.clone())?.run_turn(state, turn_id, utterance, index))
}

pub fn run_topics(topics: &[Topic], cfg: &PipelineConfig, index: &InvertedIndex) -> Result<RunFile> {
    Pipeline::new(cfg.clone())?.run_topics(topics, index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::index::{build_index, Document};
    use crate::stages::StageError;

    struct Failing;

    impl Rewriter for Failing {
        fn rewrite(&self, _: &RewriteRequest) -> std::result::Result<String, StageError> {
            Err(StageError::Status(500))
        }
    }

    impl Reranker for Failing {
        fn rerank(
            &self,
            _: &InvertedIndex,
            _: &str,
            _: &[Passage],
            _: usize,
        ) -> std::result::Result<RankedList, StageError> {
            Err(StageError::Transport("connection refused".into()))
        }
    }

    fn index() -> InvertedIndex {
        build_index(vec![
            Document::new("d1", "breast cancer biopsy types"),
            Document::new("d2", "lobular carcinoma situ survival rates are high"),
            Document::new("d3", "ear infection symptoms"),
        ])
        .unwrap()
    }

    fn topic(id: &str, utterances: &[&str]) -> Topic {
        Topic {
            topic_id: id.to_string(),
            turns: utterances
                .iter()
                .enumerate()
                .map(|(i, u)| Turn {
                    turn_id: (i + 1).to_string(),
                    raw_utterance: u.to_string(),
                })
                .collect(),
        }
    }

    #[test]
    fn empty_utterance_still_records_turn() {
        let p = Pipeline::new(PipelineConfig::default()).unwrap();
        let mut state = SessionState::new();
        let r = p.run_turn(&mut state, "t_1", "", &index());
        assert!(r.ranking.is_empty());
        assert_eq!(state.turns, [""]);
    }

    #[test]
    fn single_doc_corpus() {
        let idx = build_index(vec![Document::new("only", "lobular carcinoma")]).unwrap();
        let p = Pipeline::new(PipelineConfig::default()).unwrap();
        let r = p.run_turn(&mut SessionState::new(), "t_1", "lobular carcinoma", &idx);
        assert_eq!(r.ranking.ids().collect::<Vec<_>>(), ["only#0"]);
        assert_eq!(r.passages[0].text, "lobular carcinoma");
    }

    #[test]
    fn plugin_failures_degrade() {
        let p = Pipeline::with_plugins(PipelineConfig::default(), Box::new(Failing), Box::new(Failing)).unwrap();
        let r = p.run_turn(&mut SessionState::new(), "t_1", "cancer biopsy", &index());
        assert!(r.degraded());
        assert_eq!(r.rewritten, "cancer biopsy");
        assert_eq!(r.ranking.ids().collect::<Vec<_>>(), ["d1#0"]);
        assert!(r.ranking.is_well_formed());
    }

    #[test]
    fn duplicate_turn_ids_rejected() {
        let mut t = topic("7", &["a", "b"]);
        t.turns[1].turn_id = "1".into();
        let err = run_topics(&[t], &PipelineConfig::default(), &index()).unwrap_err();
        assert!(matches!(err, Error::DuplicateTurnId(ref id) if id == "7_1"));
    }

    #[test]
    fn no_topics_no_entries() {
        let run = run_topics(&[], &PipelineConfig::default(), &index()).unwrap();
        assert!(run.entries.is_empty());
    }

    #[test]
    fn identical_topics_rank_identically() {
        let utterances = ["breast cancer biopsy", "how deadly is it", "lobular carcinoma"];
        let p = Pipeline::new(PipelineConfig::default()).unwrap();
        let out = p
            .run_topics_detailed(&[topic("a", &utterances), topic("b", &utterances)], &index())
            .unwrap();
        for (x, y) in out[0].iter().zip(&out[1]) {
            assert_eq!(x.ranking, y.ranking);
            assert_eq!(x.expanded, y.expanded);
        }
    }

    #[test]
    fn config_validation() {
        let cfg = PipelineConfig {
            output_k: 600,
            ..PipelineConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = PipelineConfig {
            run_tag: "two words".into(),
            ..PipelineConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_from_toml() {
        let text = r#"
            first_stage_depth = 50
            [bm25]
            k1 = 1.2
            b = 0.75
            [hqe]
            q_t = "inf"
            [reranker]
            kind = "http"
            url = "http://127.0.0.1:9/rerank"
        "#;
        let cfg: PipelineConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.bm25, Bm25Params::RUN_2);
        assert_eq!(cfg.hqe.q_s, 4.0);
        assert_eq!(cfg.hqe.q_t, f64::INFINITY);
        assert_eq!(cfg.first_stage_depth, 50);
        assert!(matches!(cfg.reranker, RerankerSpec::Http { .. }));
    }

    #[test]
    fn config_save_load_roundtrip() {
        let mut cfg = PipelineConfig::default();
        cfg.hqe.q_t = f64::INFINITY;
        cfg.first_stage_depth = 7;
        let dir = std::env::temp_dir().join(format!("convsearch-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        for name in ["cfg.toml", "cfg.json"] {
            let path = dir.join(name);
            cfg.save(&path).unwrap();
            assert_eq!(PipelineConfig::load(&path).unwrap(), cfg, "{name}");
        }
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn topics_accept_numeric_ids() {
        let t: Vec<Topic> =
            serde_json::from_str(r#"[{"topic_id": 106, "turns": [{"turn_id": 1, "raw_utterance": "x"}]}]"#).unwrap();
        assert_eq!(t[0].query_id(&t[0].turns[0]), "106_1");
    }
}
