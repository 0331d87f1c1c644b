//! Ranked per-query result lists.
//!
//! Every stage of a pipeline produces a [`ScoredList`]: scores are
//! non-increasing, ids are unique, and equal scores are ordered by ascending
//! passage id so that rankings are a total order and fully reproducible.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDoc {
    pub id: String,
    pub score: f64,
}

impl ScoredDoc {
    pub fn new(id: impl Into<String>, score: f64) -> Self {
        Self {
            id: id.into(),
            score,
        }
    }
}

/// Ranking order: higher score first, then ascending id. Scores are never NaN.
pub fn rank_order(a: &ScoredDoc, b: &ScoredDoc) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.id.cmp(&b.id))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoredList {
    pub query_id: String,
    entries: Vec<ScoredDoc>,
}

impl ScoredList {
    pub fn empty(query_id: impl Into<String>) -> Self {
        Self {
            query_id: query_id.into(),
            entries: Vec::new(),
        }
    }

    /// Ranks `candidates` and keeps the best `depth`. Ids must be unique.
    pub fn from_candidates(
        query_id: impl Into<String>,
        mut candidates: Vec<ScoredDoc>,
        depth: usize,
    ) -> Self {
        if depth == 0 {
            candidates.clear();
        } else if candidates.len() > depth {
            candidates.select_nth_unstable_by(depth - 1, rank_order);
            candidates.truncate(depth);
        }
        candidates.sort_unstable_by(rank_order);
        debug_assert!(
            candidates.windows(2).all(|w| w[0].id != w[1].id),
            "duplicate ids in scored list"
        );
        Self {
            query_id: query_id.into(),
            entries: candidates,
        }
    }

    pub fn entries(&self) -> &[ScoredDoc] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<ScoredDoc> {
        self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.id.as_str()).collect()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, ScoredDoc> {
        self.entries.iter()
    }

    /// Replaces every score via `f` while keeping the current order.
    /// `f` must be monotone non-decreasing for the list invariants to survive.
    pub(crate) fn map_scores(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self {
            query_id: self.query_id.clone(),
            entries: self
                .entries
                .iter()
                .map(|e| ScoredDoc::new(e.id.clone(), f(e.score)))
                .collect(),
        }
    }
}

impl<'a> IntoIterator for &'a ScoredList {
    type Item = &'a ScoredDoc;
    type IntoIter = std::slice::Iter<'a, ScoredDoc>;

    fn into_iter(self) -> Self::IntoIter {
        self.entries.iter()
    }
}
