//! Expansion invariants, each checked on one generated input.

use std::collections::BTreeSet;

use convsearch_core::hqe::ambiguity_score;
use convsearch_core::pqe::has_pronoun;
use convsearch_core::{
    hqe_expand, pqe_expand, Bm25Params, ExpandedQuery, HqeConfig, InvertedIndex, PqeConfig, Provenance, SessionState,
};

pub type Check = Result<(), String>;

fn replay(
    index: &InvertedIndex,
    params: Bm25Params,
    utterances: &[String],
    cfg: &HqeConfig,
) -> (Vec<ExpandedQuery>, Vec<Vec<String>>) {
    let mut state = SessionState::new();
    let mut queries = Vec::new();
    let mut keywords = Vec::new();
    for u in utterances {
        queries.push(hqe_expand(&mut state, u, index, params, cfg));
        keywords.push(state.session_keywords.clone());
    }
    (queries, keywords)
}

pub fn session_monotonicity(
    index: &InvertedIndex,
    params: Bm25Params,
    utterances: &[String],
    cfg: &HqeConfig,
) -> Check {
    let (_, keywords) = replay(index, params, utterances, cfg);
    for (turn, pair) in keywords.windows(2).enumerate() {
        if pair[1].len() < pair[0].len() || !pair[1].starts_with(&pair[0]) {
            return Err(format!("session keywords shrank after turn {}", turn + 1));
        }
    }
    Ok(())
}

/// Lowering `q_s` to `lower` never loses a session keyword.
pub fn cutoff_monotonicity(
    index: &InvertedIndex,
    params: Bm25Params,
    utterances: &[String],
    cfg: &HqeConfig,
    lower: f64,
) -> Check {
    let relaxed = HqeConfig {
        q_s: lower.min(cfg.q_s),
        ..*cfg
    };
    let (_, strict) = replay(index, params, utterances, cfg);
    let (_, loose) = replay(index, params, utterances, &relaxed);
    for (turn, (s, l)) in strict.iter().zip(&loose).enumerate() {
        let l: BTreeSet<&String> = l.iter().collect();
        if let Some(missing) = s.iter().find(|k| !l.contains(k)) {
            return Err(format!(
                "turn {}: `{missing}` lost when q_s lowered to {}",
                turn + 1,
                relaxed.q_s
            ));
        }
    }
    Ok(())
}

pub fn theta_gating(index: &InvertedIndex, params: Bm25Params, utterances: &[String], cfg: &HqeConfig) -> Check {
    let (queries, _) = replay(index, params, utterances, cfg);
    for (turn, (u, q)) in utterances.iter().zip(&queries).enumerate() {
        let ambiguity = ambiguity_score(index, params, u);
        if ambiguity >= cfg.theta && q.with_provenance(Provenance::Query).next().is_some() {
            return Err(format!(
                "turn {}: query keywords despite ambiguity {ambiguity} >= {}",
                turn + 1,
                cfg.theta
            ));
        }
    }
    Ok(())
}

pub fn turn1_neutrality(index: &InvertedIndex, params: Bm25Params, utterances: &[String], cfg: &HqeConfig) -> Check {
    let (queries, _) = replay(index, params, utterances, cfg);
    match queries.first() {
        Some(q) if q.with_provenance(Provenance::Query).next().is_some() => {
            Err("first turn carries query keywords".to_string())
        }
        _ => Ok(()),
    }
}

pub fn replay_determinism(index: &InvertedIndex, params: Bm25Params, utterances: &[String], cfg: &HqeConfig) -> Check {
    let first = replay(index, params, utterances, cfg);
    let second = replay(index, params, utterances, cfg);
    if first == second {
        Ok(())
    } else {
        Err("replaying the session changed its expansions".to_string())
    }
}

fn added_terms(before: &ExpandedQuery, after: &ExpandedQuery) -> Vec<String> {
    after
        .with_provenance(Provenance::Pqe)
        .map(str::to_string)
        .filter(|t| !before.contains(t))
        .collect()
}

pub fn pqe_gate_soundness(index: &InvertedIndex, params: Bm25Params, query: &ExpandedQuery, cfg: &PqeConfig) -> Check {
    let out = pqe_expand(index, params, query, &query.raw, cfg);
    if out != *query && !has_pronoun(&query.raw, &cfg.pronouns) {
        return Err(format!("`{}` has no pronoun but was expanded", query.raw));
    }
    if out.terms[..query.terms.len()] != query.terms[..] {
        return Err("existing terms were altered".to_string());
    }
    Ok(())
}

pub fn pqe_bound(index: &InvertedIndex, params: Bm25Params, query: &ExpandedQuery, cfg: &PqeConfig) -> Check {
    let out = pqe_expand(index, params, query, &query.raw, cfg);
    let added = added_terms(query, &out);
    if added.len() > cfg.top_tokens {
        return Err(format!("{} terms added, bound {}", added.len(), cfg.top_tokens));
    }
    Ok(())
}

pub fn pqe_df_band(index: &InvertedIndex, params: Bm25Params, query: &ExpandedQuery, cfg: &PqeConfig) -> Check {
    let out = pqe_expand(index, params, query, &query.raw, cfg);
    for t in added_terms(query, &out) {
        let f = index.df_fraction(&t);
        if !(cfg.df_min <= f && f < cfg.df_max) {
            return Err(format!(
                "`{t}` has df fraction {f} outside [{}, {})",
                cfg.df_min, cfg.df_max
            ));
        }
    }
    Ok(())
}

pub fn pqe_no_digits(index: &InvertedIndex, params: Bm25Params, query: &ExpandedQuery, cfg: &PqeConfig) -> Check {
    let out = pqe_expand(index, params, query, &query.raw, cfg);
    match added_terms(query, &out)
        .into_iter()
        .find(|t| t.chars().all(|c| c.is_ascii_digit()))
    {
        Some(t) => Err(format!("numeric term `{t}` added")),
        None => Ok(()),
    }
}
