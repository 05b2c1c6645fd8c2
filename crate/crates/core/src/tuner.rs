//! Greedy coordinate line search over the HQE cutoffs.
//!
//! Phase 1 tunes `q_s` with query expansion switched off (`q_t = θ = +inf`).
//! Phase 2 fixes `q_t` one grid step above the tuned `q_s` and tunes `θ`.
//! Phase 3 tunes `q_t` (or, with [`Phase3Target::Qs`], re-tunes `q_s`). When
//! the space carries `k1`/`b` grids, two more phases tune those in turn.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{evaluate_run, Metric, Qrels};
use crate::hqe::HqeConfig;
use crate::index::{Bm25Params, InvertedIndex};
use crate::pipeline::{Pipeline, PipelineConfig, Topic};
use crate::serde_float;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    #[serde(with = "serde_float::reals")]
    pub q_s: Vec<f64>,
    #[serde(with = "serde_float::reals")]
    pub q_t: Vec<f64>,
    #[serde(with = "serde_float::reals")]
    pub theta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k1: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<f64>>,
}

impl SearchSpace {
    /// The same candidate list for all three cutoffs.
    pub fn uniform(values: &[f64]) -> Self {
        Self {
            q_s: values.to_vec(),
            q_t: values.to_vec(),
            theta: values.to_vec(),
            k1: None,
            b: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lists = [
            ("q_s", Some(&self.q_s)),
            ("q_t", Some(&self.q_t)),
            ("theta", Some(&self.theta)),
            ("k1", self.k1.as_ref()),
            ("b", self.b.as_ref()),
        ];
        for (name, list) in lists {
            let Some(list) = list else { continue };
            if list.is_empty() {
                return Err(Error::EmptyCandidates(name.to_string()));
            }
            if list.iter().any(|v| v.is_nan()) {
                return Err(Error::InvalidConfig(format!("NaN candidate for `{name}`")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase3Target {
    /// Tune the query keyword cutoff, which the first two phases never touch.
    #[default]
    Qt,
    /// Re-tune the session cutoff.
    Qs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TuneOptions {
    pub metric: Metric,
    pub phase3: Phase3Target,
}

impl Default for TuneOptions {
    fn default() -> Self {
        Self {
            metric: Metric::Ndcg3,
            phase3: Phase3Target::Qt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub phase: u8,
    pub param: String,
    #[serde(with = "serde_float::real")]
    pub value: f64,
    pub metric: Metric,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseChoice {
    pub phase: u8,
    pub param: String,
    #[serde(with = "serde_float::real")]
    pub value: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub hqe: HqeConfig,
    pub bm25: Bm25Params,
    pub phases: Vec<PhaseChoice>,
    pub trace: Vec<TraceEntry>,
}

/// Best candidate and its score; among equal scores the smallest value wins.
pub fn line_search<F>(objective: F, candidates: &[f64]) -> Option<(f64, f64)>
where
    F: Fn(f64) -> f64 + Sync,
{
    let scores: Vec<f64> = candidates.par_iter().map(|&v| objective(v)).collect();
    best_of(candidates.iter().copied().zip(scores))
}

fn best_of(points: impl IntoIterator<Item = (f64, f64)>) -> Option<(f64, f64)> {
    points.into_iter().fold(None, |best, (v, s)| match best {
        None => Some((v, s)),
        Some((bv, bs)) => {
            if s > bs || (s == bs && v < bv) {
                Some((v, s))
            } else {
                Some((bv, bs))
            }
        }
    })
}

/// Smallest candidate strictly above `value`; otherwise `value + 1`.
fn next_grid_step(candidates: &[f64], value: f64) -> f64 {
    candidates
        .iter()
        .copied()
        .filter(|&c| c > value)
        .min_by(f64::total_cmp)
        .unwrap_or(value + 1.0)
}

struct Tuner<'a> {
    topics: &'a [Topic],
    qrels: &'a Qrels,
    index: &'a InvertedIndex,
    base: &'a PipelineConfig,
    metric: Metric,
    trace: Vec<TraceEntry>,
    phases: Vec<PhaseChoice>,
}

impl Tuner<'_> {
    fn score(&self, hqe: HqeConfig, bm25: Bm25Params) -> f64 {
        let cfg = PipelineConfig {
            hqe,
            bm25,
            ..self.base.clone()
        };
        // Candidate configs are validated up front, so construction cannot fail
        // for HQE changes; an invalid BM25 candidate scores as the worst value.
        let Ok(pipeline) = Pipeline::new(cfg) else {
            return f64::NEG_INFINITY;
        };
        match pipeline.run_topics(self.topics, self.index) {
            Ok(run) => evaluate_run(&run, self.qrels).mean.get(self.metric),
            Err(_) => f64::NEG_INFINITY,
        }
    }

    fn phase<F>(&mut self, phase: u8, param: &str, candidates: &[f64], make: F) -> f64
    where
        F: Fn(f64) -> (HqeConfig, Bm25Params) + Sync,
    {
        let scores: Vec<f64> = candidates
            .par_iter()
            .map(|&v| {
                let (hqe, bm25) = make(v);
                self.score(hqe, bm25)
            })
            .collect();
        for (&value, &score) in candidates.iter().zip(&scores) {
            self.trace.push(TraceEntry {
                phase,
                param: param.to_string(),
                value,
                metric: self.metric,
                score,
            });
        }
        let (value, score) = best_of(candidates.iter().copied().zip(scores)).expect("validated non-empty");
        self.phases.push(PhaseChoice {
            phase,
            param: param.to_string(),
            value,
            score,
        });
        value
    }
}

pub fn greedy_tune(
    train_topics: &[Topic],
    qrels: &Qrels,
    space: &SearchSpace,
    base: &PipelineConfig,
    index: &InvertedIndex,
    options: TuneOptions,
) -> Result<TuneResult> {
    if train_topics.iter().all(|t| t.turns.is_empty()) {
        return Err(Error::EmptyTrainingSet);
    }
    space.validate()?;
    base.validate()?;

    let strict = base.hqe.strict_cutoffs;
    let hqe = |q_s, q_t, theta| HqeConfig {
        q_s,
        q_t,
        theta,
        strict_cutoffs: strict,
    };
    let bm25 = base.bm25;
    let inf = f64::INFINITY;
    let mut t = Tuner {
        topics: train_topics,
        qrels,
        index,
        base,
        metric: options.metric,
        trace: Vec::new(),
        phases: Vec::new(),
    };

    let mut q_s = t.phase(1, "q_s", &space.q_s, |v| (hqe(v, inf, inf), bm25));
    let mut q_t = next_grid_step(&space.q_s, q_s);
    let theta = t.phase(2, "theta", &space.theta, |v| (hqe(q_s, q_t, v), bm25));
    match options.phase3 {
        Phase3Target::Qt => q_t = t.phase(3, "q_t", &space.q_t, |v| (hqe(q_s, v, theta), bm25)),
        Phase3Target::Qs => q_s = t.phase(3, "q_s", &space.q_s, |v| (hqe(v, q_t, theta), bm25)),
    }
    let tuned = hqe(q_s, q_t, theta);

    let mut params = bm25;
    if let Some(k1s) = &space.k1 {
        params.k1 = t.phase(4, "k1", k1s, |v| (tuned, Bm25Params { k1: v, ..params }));
    }
    if let Some(bs) = &space.b {
        params.b = t.phase(5, "b", bs, |v| (tuned, Bm25Params { b: v, ..params }));
    }

    Ok(TuneResult {
        hqe: tuned,
        bm25: params,
        phases: t.phases,
        trace: t.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_candidate() {
        assert_eq!(line_search(|_| 0.5, &[7.0]), Some((7.0, 0.5)));
        assert_eq!(line_search(|_| 0.5, &[]), None);
    }

    #[test]
    fn analytic_argmax() {
        let xs: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(line_search(|x| -(x - 4.0).abs(), &xs).unwrap().0, 4.0);
    }

    #[test]
    fn ties_pick_smallest_value() {
        assert_eq!(line_search(|_| 1.0, &[8.0, 2.0, f64::INFINITY, 4.0]).unwrap().0, 2.0);
        // Plateau around the optimum.
        let f = |x: f64| if (2.0..=6.0).contains(&x) { 1.0 } else { 0.0 };
        assert_eq!(line_search(f, &[10.0, 6.0, 4.0, 2.0, 0.0]).unwrap().0, 2.0);
    }

    #[test]
    fn grid_step() {
        let grid = [0.0, 2.0, 4.0, 8.0, f64::INFINITY];
        assert_eq!(next_grid_step(&grid, 2.0), 4.0);
        assert_eq!(next_grid_step(&grid, 8.0), f64::INFINITY);
        assert_eq!(next_grid_step(&[1.0, 3.0], 3.0), 4.0);
        assert_eq!(next_grid_step(&grid, f64::INFINITY), f64::INFINITY);
    }

    #[test]
    fn space_validation() {
        let mut s = SearchSpace::uniform(&[1.0]);
        assert!(s.validate().is_ok());
        s.theta.clear();
        assert!(matches!(s.validate(), Err(Error::EmptyCandidates(ref p)) if p == "theta"));
        let s = SearchSpace::uniform(&[f64::NAN]);
        assert!(s.validate().is_err());
    }

    #[test]
    fn space_json_with_infinity() {
        let s: SearchSpace =
            serde_json::from_str(r#"{"q_s":[0,2,"inf"],"q_t":[4],"theta":[10,"inf"],"k1":[0.9,1.2]}"#).unwrap();
        assert_eq!(s.q_s, [0.0, 2.0, f64::INFINITY]);
        assert_eq!(s.k1, Some(vec![0.9, 1.2]));
        assert!(s.b.is_none());
    }
}
