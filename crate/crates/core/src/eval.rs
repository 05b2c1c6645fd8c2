//! TREC run files, qrels and the metric suite (NDCG@3/5/500, AP@500, P@5).
//!
//! Gain is `2^grade - 1` with a `log2(rank + 1)` discount; the ideal ordering
//! uses every judged grade of the query. Passages without a judgment count as
//! grade 0. AP and P use binary relevance `grade >= threshold` (default 1).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub query_id: String,
    pub passage_id: String,
    pub rank: usize,
    pub score: f64,
    pub tag: String,
}

/// A TREC run: `qid Q0 pid rank score tag`, one line per entry.
///
/// Per query, ranks run 1..=n, scores never increase with rank, and passage
/// ids are unique.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunFile {
    pub entries: Vec<RunEntry>,
}

impl RunFile {
    /// Scores are written with six decimals so files are byte-stable.
    pub fn to_trec_string(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{} Q0 {} {} {:.6} {}",
                e.query_id, e.passage_id, e.rank, e.score, e.tag
            );
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        let mut lines = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 6 {
                return Err(Error::parse(
                    lineno,
                    format!("expected 6 columns, found {}", cols.len()),
                ));
            }
            let rank: usize = cols[3]
                .parse()
                .map_err(|_| Error::parse(lineno, format!("bad rank `{}`", cols[3])))?;
            let score: f64 = cols[4]
                .parse()
                .ok()
                .filter(|s: &f64| s.is_finite())
                .ok_or_else(|| Error::parse(lineno, format!("bad score `{}`", cols[4])))?;
            entries.push(RunEntry {
                query_id: cols[0].to_string(),
                passage_id: cols[2].to_string(),
                rank,
                score,
                tag: cols[5].to_string(),
            });
            lines.push(lineno);
        }
        let run = Self { entries };
        run.check(&lines)?;
        Ok(run)
    }

    fn check(&self, lines: &[usize]) -> Result<()> {
        let mut by_query: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, e) in self.entries.iter().enumerate() {
            by_query.entry(&e.query_id).or_default().push(i);
        }
        for (qid, mut idx) in by_query {
            let mut seen = HashSet::new();
            for &i in &idx {
                if !seen.insert(self.entries[i].passage_id.as_str()) {
                    return Err(Error::parse(
                        lines[i],
                        format!("passage `{}` repeated for query `{qid}`", self.entries[i].passage_id),
                    ));
                }
            }
            idx.sort_by_key(|&i| self.entries[i].rank);
            for (pos, &i) in idx.iter().enumerate() {
                if self.entries[i].rank != pos + 1 {
                    return Err(Error::parse(
                        lines[i],
                        format!("ranks of query `{qid}` are not contiguous from 1"),
                    ));
                }
                if pos > 0 && self.entries[i].score > self.entries[idx[pos - 1]].score {
                    return Err(Error::parse(
                        lines[i],
                        format!("score increases with rank for query `{qid}`"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Passage ids per query, in rank order.
    pub fn rankings(&self) -> BTreeMap<String, Vec<String>> {
        let mut grouped: BTreeMap<String, Vec<(usize, String)>> = BTreeMap::new();
        for e in &self.entries {
            grouped
                .entry(e.query_id.clone())
                .or_default()
                .push((e.rank, e.passage_id.clone()));
        }
        grouped
            .into_iter()
            .map(|(q, mut v)| {
                v.sort();
                (q, v.into_iter().map(|(_, p)| p).collect())
            })
            .collect()
    }
}

pub type Judgments = HashMap<String, u32>;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Qrels {
    pub judgments: BTreeMap<String, Judgments>,
}

impl Qrels {
    /// Parses `qid 0 pid grade` lines. A repeated pair keeps the last grade.
    pub fn parse(text: &str) -> Result<Self> {
        let mut judgments: BTreeMap<String, Judgments> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            if cols.len() != 4 {
                return Err(Error::parse(
                    lineno,
                    format!("expected 4 columns, found {}", cols.len()),
                ));
            }
            let grade: u32 = cols[3].parse().map_err(|_| {
                Error::parse(
                    lineno,
                    format!("bad grade `{}` (must be a non-negative integer)", cols[3]),
                )
            })?;
            judgments
                .entry(cols[0].to_string())
                .or_default()
                .insert(cols[2].to_string(), grade);
        }
        Ok(Self { judgments })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn get(&self, query_id: &str) -> Option<&Judgments> {
        self.judgments.get(query_id)
    }
}

fn grade_of(judged: &Judgments, id: &str) -> u32 {
    judged.get(id).copied().unwrap_or(0)
}

fn gain(grade: u32) -> f64 {
    2f64.powi(grade as i32) - 1.0
}

fn discount(rank: usize) -> f64 {
    ((rank + 1) as f64).log2()
}

pub fn ndcg_at_k<S: AsRef<str>>(ranking: &[S], judged: &Judgments, k: usize) -> f64 {
    let mut ideal: Vec<u32> = judged.values().copied().filter(|&g| g > 0).collect();
    if ideal.is_empty() {
        return 0.0;
    }
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| gain(g) / discount(i + 1))
        .sum();
    let dcg: f64 = ranking
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, id)| gain(grade_of(judged, id.as_ref())) / discount(i + 1))
        .sum();
    dcg / idcg
}

pub fn ap_at_k<S: AsRef<str>>(ranking: &[S], judged: &Judgments, k: usize, threshold: u32) -> f64 {
    let total_relevant = judged.values().filter(|&&g| g >= threshold).count();
    if total_relevant == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, id) in ranking.iter().take(k).enumerate() {
        if grade_of(judged, id.as_ref()) >= threshold {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / total_relevant as f64
}

pub fn precision_at_k<S: AsRef<str>>(ranking: &[S], judged: &Judgments, k: usize, threshold: u32) -> f64 {
    let hits = ranking
        .iter()
        .take(k)
        .filter(|id| grade_of(judged, id.as_ref()) >= threshold)
        .count();
    hits as f64 / k as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "ndcg@3")]
    Ndcg3,
    #[serde(rename = "ndcg@5")]
    Ndcg5,
    #[serde(rename = "ndcg@500")]
    Ndcg500,
    #[serde(rename = "ap@500")]
    Ap500,
    #[serde(rename = "p@5")]
    P5,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::Ndcg3, Metric::Ndcg5, Metric::Ndcg500, Metric::Ap500, Metric::P5];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Ndcg3 => "ndcg@3",
            Metric::Ndcg5 => "ndcg@5",
            Metric::Ndcg500 => "ndcg@500",
            Metric::Ap500 => "ap@500",
            Metric::P5 => "p@5",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown metric `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics {
    #[serde(rename = "ndcg@3")]
    pub ndcg_3: f64,
    #[serde(rename = "ndcg@5")]
    pub ndcg_5: f64,
    #[serde(rename = "ndcg@500")]
    pub ndcg_500: f64,
    #[serde(rename = "ap@500")]
    pub ap_500: f64,
    #[serde(rename = "p@5")]
    pub p_5: f64,
}

impl QueryMetrics {
    pub fn compute<S: AsRef<str>>(ranking: &[S], judged: &Judgments, threshold: u32) -> Self {
        Self {
            ndcg_3: ndcg_at_k(ranking, judged, 3),
            ndcg_5: ndcg_at_k(ranking, judged, 5),
            ndcg_500: ndcg_at_k(ranking, judged, 500),
            ap_500: ap_at_k(ranking, judged, 500, threshold),
            p_5: precision_at_k(ranking, judged, 5, threshold),
        }
    }

    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Ndcg3 => self.ndcg_3,
            Metric::Ndcg5 => self.ndcg_5,
            Metric::Ndcg500 => self.ndcg_500,
            Metric::Ap500 => self.ap_500,
            Metric::P5 => self.p_5,
        }
    }

    fn values(&self) -> [f64; 5] {
        Metric::ALL.map(|m| self.get(m))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_query: BTreeMap<String, QueryMetrics>,
    /// Arithmetic means over evaluated queries; all zero when none were.
    pub mean: QueryMetrics,
    pub evaluated: usize,
    /// Run queries without any judgments.
    pub skipped: Vec<String>,
}

impl MetricsReport {
    /// Fixed-width table, one row per query plus the mean row.
    pub fn to_table(&self) -> String {
        let mut out = format!("{:<16}", "query");
        for m in Metric::ALL {
            let _ = write!(out, "{:>10}", m.name());
        }
        out.push('\n');
        let mut row = |name: &str, values: [f64; 5]| {
            let _ = write!(out, "{name:<16}");
            for v in values {
                let _ = write!(out, "{v:>10.4}");
            }
            out.push('\n');
        };
        for (qid, m) in &self.per_query {
            row(qid, m.values());
        }
        row("all", self.mean.values());
        let _ = writeln!(out, "evaluated {} skipped {}", self.evaluated, self.skipped.len());
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    pub relevance_threshold: u32,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { relevance_threshold: 1 }
    }
}

pub fn evaluate_run(run: &RunFile, qrels: &Qrels) -> MetricsReport {
    evaluate_run_with(run, qrels, EvalOptions::default())
}

pub fn evaluate_run_with(run: &RunFile, qrels: &Qrels, options: EvalOptions) -> MetricsReport {
    let mut report = MetricsReport::default();
    for (qid, ranking) in run.rankings() {
        match qrels.get(&qid) {
            Some(judged) => {
                let m = QueryMetrics::compute(&ranking, judged, options.relevance_threshold);
                report.per_query.insert(qid, m);
            }
            None => report.skipped.push(qid),
        }
    }
    report.evaluated = report.per_query.len();
    if report.evaluated > 0 {
        let n = report.evaluated as f64;
        let mut sums = [0.0; 5];
        for m in report.per_query.values() {
            for (s, v) in sums.iter_mut().zip(m.values()) {
                *s += v;
            }
        }
        let [ndcg_3, ndcg_5, ndcg_500, ap_500, p_5] = sums.map(|s| s / n);
        report.mean = QueryMetrics {
            ndcg_3,
            ndcg_5,
            ndcg_500,
            ap_500,
            p_5,
        };
    }
    report
}
