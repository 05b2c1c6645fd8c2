//! Client side of the model-server protocol.
//!
//! Both calls are JSON `POST`s:
//!
//! * rewrite: `{"history": [...], "current": "..."}` → `{"rewrite": "..."}`
//! * rerank: `{"query": "...", "passages": [{"id": ..., "text": ...}, ...]}` →
//!   `{"order": [id, ...]}`
//!
//! A reranker answer must name only ids it was sent, each at most once.

use std::collections::HashSet;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Passage, Reranker, RewriteRequest, Rewriter, StageError};
use crate::index::InvertedIndex;
use crate::ranking::{RankedList, Scored};

pub fn default_timeout_ms() -> u64 {
    5_000
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteResponse {
    pub rewrite: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WirePassage {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RerankRequest {
    pub query: String,
    pub passages: Vec<WirePassage>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RerankResponse {
    pub order: Vec<String>,
}

fn agent(timeout_ms: u64) -> ureq::Agent {
    ureq::Agent::config_builder()
        .timeout_global(Some(Duration::from_millis(timeout_ms)))
        .http_status_as_error(false)
        .build()
        .into()
}

fn post<Req: Serialize, Resp: for<'de> Deserialize<'de>>(
    agent: &ureq::Agent,
    url: &str,
    body: &Req,
) -> Result<Resp, StageError> {
    let mut resp = agent
        .post(url)
        .send_json(body)
        .map_err(|e| StageError::Transport(e.to_string()))?;
    let status = resp.status().as_u16();
    if !(200..300).contains(&status) {
        return Err(StageError::Status(status));
    }
    resp.body_mut()
        .read_json()
        .map_err(|e| StageError::InvalidResponse(e.to_string()))
}

pub struct HttpRewriter {
    url: String,
    agent: ureq::Agent,
}

impl HttpRewriter {
    pub fn new(url: impl Into<String>, timeout_ms: u64) -> Self {
        Self {
            url: url.into(),
            agent: agent(timeout_ms),
        }
    }
}

impl Rewriter for HttpRewriter {
    fn rewrite(&self, req: &RewriteRequest) -> Result<String, StageError> {
        post::<_, RewriteResponse>(&self.agent, &self.url, req).map(|r| r.rewrite)
    }
}

pub struct HttpReranker {
    url: String,
    agent: ureq::Agent,
}

impl HttpReranker {
    pub fn new(url: impl Into<String>, timeout_ms: u64) -> Self {
        Self {
            url: url.into(),
            agent: agent(timeout_ms),
        }
    }
}

/// Turns a server's ordering into a ranked list. The server sends no scores,
/// so rank `i` (0-based) of `n` gets score `n - i`.
pub fn order_to_ranking(order: &[String], passages: &[Passage], k: usize) -> Result<RankedList, StageError> {
    let known: HashSet<&str> = passages.iter().map(|p| p.passage_id.as_str()).collect();
    let mut seen = HashSet::new();
    for id in order {
        if !known.contains(id.as_str()) {
            return Err(StageError::InvalidResponse(format!("unknown passage id `{id}`")));
        }
        if !seen.insert(id.as_str()) {
            return Err(StageError::InvalidResponse(format!("passage id `{id}` repeated")));
        }
    }
    let n = order.len();
    Ok(RankedList {
        entries: order
            .iter()
            .take(k)
            .enumerate()
            .map(|(i, id)| Scored {
                id: id.clone(),
                score: (n - i) as f64,
            })
            .collect(),
        k,
    })
}

impl Reranker for HttpReranker {
    fn rerank(
        &self,
        _index: &InvertedIndex,
        query: &str,
        passages: &[Passage],
        k: usize,
    ) -> Result<RankedList, StageError> {
        let body = RerankRequest {
            query: query.to_string(),
            passages: passages
                .iter()
                .map(|p| WirePassage {
                    id: p.passage_id.clone(),
                    text: p.text.clone(),
                })
                .collect(),
        };
        let resp: RerankResponse = post(&self.agent, &self.url, &body)?;
        order_to_ranking(&resp.order, passages, k)
    }
}
