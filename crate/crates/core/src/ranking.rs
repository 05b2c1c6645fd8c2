use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub id: String,
    pub score: f64,
}

/// Best-first list of ids with scores.
///
/// Scores are non-increasing, equal scores are ordered by ascending id, ids
/// are unique and there are at most `k` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub entries: Vec<Scored>,
    pub k: usize,
}

/// Descending score, then ascending id.
pub fn rank_order(a_score: f64, a_id: &str, b_score: f64, b_id: &str) -> Ordering {
    b_score.total_cmp(&a_score).then_with(|| a_id.cmp(b_id))
}

impl RankedList {
    pub fn empty(k: usize) -> Self {
        Self { entries: Vec::new(), k }
    }

    /// Sorts `candidates` into rank order and keeps the best `k`.
    /// Later duplicates of an id are discarded.
    pub fn from_candidates(candidates: impl IntoIterator<Item = (String, f64)>, k: usize) -> Self {
        let mut seen = std::collections::HashSet::new();
        let mut entries: Vec<Scored> = candidates
            .into_iter()
            .filter(|(id, _)| seen.insert(id.clone()))
            .map(|(id, score)| Scored { id, score })
            .collect();
        entries.sort_by(|a, b| rank_order(a.score, &a.id, b.score, &b.id));
        entries.truncate(k);
        Self { entries, k }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.id.as_str())
    }

    pub fn top(&self) -> Option<&Scored> {
        self.entries.first()
    }

    /// Checks every ordering invariant; used by tests and by callers that
    /// accept rankings from outside the process.
    pub fn is_well_formed(&self) -> bool {
        let mut seen = std::collections::HashSet::new();
        self.entries.len() <= self.k
            && self.entries.iter().all(|e| seen.insert(e.id.as_str()))
            && self
                .entries
                .windows(2)
                .all(|w| rank_order(w[0].score, &w[0].id, w[1].score, &w[1].id) == Ordering::Less)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_break_by_ascending_id() {
        let list = RankedList::from_candidates(vec![("b".into(), 1.0), ("a".into(), 1.0), ("c".into(), 2.0)], 10);
        assert_eq!(list.ids().collect::<Vec<_>>(), ["c", "a", "b"]);
        assert!(list.is_well_formed());
    }

    #[test]
    fn truncates_and_dedups() {
        let list = RankedList::from_candidates(
            vec![
                ("a".into(), 3.0),
                ("a".into(), 9.0),
                ("b".into(), 2.0),
                ("c".into(), 1.0),
            ],
            2,
        );
        assert_eq!(list.ids().collect::<Vec<_>>(), ["a", "b"]);
        assert_eq!(list.entries[0].score, 3.0);
    }

    #[test]
    fn detects_bad_order() {
        let list = RankedList {
            entries: vec![
                Scored {
                    id: "a".into(),
                    score: 1.0,
                },
                Scored {
                    id: "b".into(),
                    score: 2.0,
                },
            ],
            k: 5,
        };
        assert!(!list.is_well_formed());
    }
}
