//! Deterministic stand-in for a model server, speaking the rewrite/rerank
//! protocol of [`convsearch_core::stages::http`].
//!
//! The rewrite is the current utterance in upper case; the rerank order is
//! the reverse of the order the passages were sent in.

use axum::routing::post;
use axum::{Json, Router};
use convsearch_core::stages::http::{RerankRequest, RerankResponse, RewriteResponse};
use convsearch_core::stages::RewriteRequest;

pub fn router() -> Router {
    Router::new()
        .route("/rewrite", post(rewrite))
        .route("/rerank", post(rerank))
}

async fn rewrite(Json(req): Json<RewriteRequest>) -> Json<RewriteResponse> {
    Json(RewriteResponse {
        rewrite: req.current.to_uppercase(),
    })
}

async fn rerank(Json(req): Json<RerankRequest>) -> Json<RerankResponse> {
    Json(RerankResponse {
        order: req.passages.into_iter().rev().map(|p| p.id).collect(),
    })
}
