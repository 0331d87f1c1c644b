//! Linear interpolation of a sparse and a dense ranking:
//!
//! ```text
//! s(p) = λ · ŝ_sparse(p) + (1 − λ) · s_dense(p)
//! ```
//!
//! Each list is normalized per query first (min-max by default, since BM25,
//! impact and inner-product scores live on unrelated scales). The candidate
//! set is the union of both lists; a passage missing from one list takes a
//! substitute score for it, or is dropped under [`MissingPolicy::Skip`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scored::{ScoredDoc, ScoredList};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    None,
    #[default]
    MinMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissingPolicy {
    /// Absent passages take the list's minimum (0 after min-max).
    #[default]
    Min,
    /// Only passages present in both lists survive.
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    pub lambda: f64,
    pub normalization: Normalization,
    pub missing: MissingPolicy,
    pub output_depth: usize,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            lambda: 0.5,
            normalization: Normalization::MinMax,
            missing: MissingPolicy::Min,
            output_depth: 1000,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!(
                "lambda must lie in [0, 1], got {}",
                self.lambda
            )));
        }
        if self.output_depth == 0 {
            return Err(Error::Config(
                "fusion output depth must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

pub fn normalize(list: &ScoredList, mode: Normalization) -> ScoredList {
    match mode {
        Normalization::None => list.clone(),
        Normalization::MinMax => {
            let (Some(first), Some(last)) = (list.entries().first(), list.entries().last()) else {
                return list.clone();
            };
            let (max, min) = (first.score, last.score);
            let range = max - min;
            if range > 0.0 {
                list.map_scores(|s| (s - min) / range)
            } else {
                list.map_scores(|_| 1.0)
            }
        }
    }
}

fn substitute(normalized: &ScoredList, mode: Normalization) -> f64 {
    match mode {
        Normalization::MinMax => 0.0,
        Normalization::None => normalized.entries().last().map_or(0.0, |e| e.score),
    }
}

pub fn interpolate(
    sparse: &ScoredList,
    dense: &ScoredList,
    cfg: &FusionConfig,
) -> Result<ScoredList> {
    if sparse.query_id != dense.query_id {
        return Err(Error::QueryMismatch(
            sparse.query_id.clone(),
            dense.query_id.clone(),
        ));
    }
    cfg.validate()?;
    let sparse_n = normalize(sparse, cfg.normalization);
    let dense_n = normalize(dense, cfg.normalization);

    let mut union: BTreeMap<&str, (Option<f64>, Option<f64>)> = BTreeMap::new();
    for e in &sparse_n {
        union.entry(e.id.as_str()).or_default().0 = Some(e.score);
    }
    for e in &dense_n {
        union.entry(e.id.as_str()).or_default().1 = Some(e.score);
    }

    let sparse_sub = substitute(&sparse_n, cfg.normalization);
    let dense_sub = substitute(&dense_n, cfg.normalization);
    let lambda = cfg.lambda;
    let candidates = union
        .into_iter()
        .filter_map(|(id, scores)| {
            let (s, d) = match (cfg.missing, scores) {
                (_, (Some(s), Some(d))) => (s, d),
                (MissingPolicy::Skip, _) => return None,
                (MissingPolicy::Min, (s, d)) => (s.unwrap_or(sparse_sub), d.unwrap_or(dense_sub)),
            };
            Some(ScoredDoc::new(id, lambda * s + (1.0 - lambda) * d))
        })
        .collect();
    Ok(ScoredList::from_candidates(
        sparse.query_id.clone(),
        candidates,
        cfg.output_depth,
    ))
}
