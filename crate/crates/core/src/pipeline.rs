//! Retrieval flows: sparse-only, dense-only, dense with vector PRF, and
//! sparse/dense interpolation placed before PRF, after it, or both.
//!
//! | stage  | PRF | flow                                                              |
//! |--------|-----|-------------------------------------------------------------------|
//! | `none` | off | dense round 1 (or sparse round 1 when dense is disabled)          |
//! | `none` | on  | dense 1 → feedback from dense 1 → dense 2                          |
//! | `fuse` | off | fuse(sparse, dense 1)                                              |
//! | `pre`  | on  | fuse(sparse, dense 1) → feedback from fused → dense 2              |
//! | `post` | on  | dense 1 → feedback from dense 1 → dense 2 → fuse(sparse, dense 2)  |
//! | `both` | on  | fuse(sparse, dense 1) → feedback from fused → dense 2 → fuse(sparse, dense 2) |
//!
//! The sparse ranking is computed once per query and reused by every fusion.
//! Feedback always uses the dense vectors of the selected passages, and the
//! second round only ever queries the dense store.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dense::{DenseStore, DenseVector, Similarity};
use crate::error::{Error, Result};
use crate::fusion::{interpolate, FusionConfig};
use crate::io::{Query, RunEntry};
use crate::prf::{rocchio_update_with, select_feedback, PrfConfig};
use crate::scored::ScoredList;
use crate::sparse::{
    query_weights_from_text, search_bm25, search_impact, Bm25Params, ImpactIndex, InvertedIndex,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    #[default]
    None,
    Fuse,
    Pre,
    Post,
    Both,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::None => "none",
            Stage::Fuse => "fuse",
            Stage::Pre => "pre",
            Stage::Post => "post",
            Stage::Both => "both",
        }
    }

    fn fuses_round1(self) -> bool {
        matches!(self, Stage::Fuse | Stage::Pre | Stage::Both)
    }

    fn fuses_round2(self) -> bool {
        matches!(self, Stage::Post | Stage::Both)
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Stage::None),
            "fuse" => Ok(Stage::Fuse),
            "pre" => Ok(Stage::Pre),
            "post" => Ok(Stage::Post),
            "both" => Ok(Stage::Both),
            other => Err(Error::Config(format!("unknown stage `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SparseBackend {
    #[default]
    Bm25,
    Impact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub stage: Stage,
    pub use_prf: bool,
    pub dense_enabled: bool,
    pub retrieval_depth: usize,
    pub sparse_backend: SparseBackend,
    pub similarity: Similarity,
    pub bm25: Bm25Params,
    pub fusion: FusionConfig,
    pub prf: PrfConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            stage: Stage::None,
            use_prf: false,
            dense_enabled: true,
            retrieval_depth: 1000,
            sparse_backend: SparseBackend::Bm25,
            similarity: Similarity::Dot,
            bm25: Bm25Params::default(),
            fusion: FusionConfig::default(),
            prf: PrfConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.bm25.validate()?;
        self.fusion.validate()?;
        self.prf.validate()?;
        if self.retrieval_depth == 0 {
            return Err(Error::Config("retrieval depth must be at least 1".into()));
        }
        match self.stage {
            Stage::Pre | Stage::Post | Stage::Both if !self.use_prf => {
                return Err(Error::Config(format!(
                    "stage `{}` interpolates around PRF and requires PRF to be on",
                    self.stage
                )));
            }
            Stage::Fuse if self.use_prf => {
                return Err(Error::Config(
                    "stage `fuse` is interpolation without PRF; use pre, post or both with PRF"
                        .into(),
                ));
            }
            _ => {}
        }
        if !self.dense_enabled && (self.stage != Stage::None || self.use_prf) {
            return Err(Error::Config(
                "disabling dense retrieval only applies to stage `none` without PRF".into(),
            ));
        }
        if self.use_prf && self.retrieval_depth < self.prf.depth_k {
            return Err(Error::Config(format!(
                "retrieval depth {} is smaller than PRF depth {}",
                self.retrieval_depth, self.prf.depth_k
            )));
        }
        Ok(())
    }

    pub fn needs_sparse(&self) -> bool {
        !self.dense_enabled || self.stage != Stage::None
    }

    pub fn needs_dense(&self) -> bool {
        self.dense_enabled
    }

    /// Run tag: stage, PRF switch, and a short hash over the full configuration.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let hash = Sha256::digest(canonical.as_bytes());
        let hex: String = hash[..4].iter().map(|b| format!("{b:02x}")).collect();
        let prf = if self.use_prf { "prf" } else { "noprf" };
        format!("fuseprf.{}.{prf}.{hex}", self.stage)
    }
}

#[derive(Debug, Default)]
pub struct Indexes {
    pub bm25: Option<InvertedIndex>,
    pub impact: Option<ImpactIndex>,
    pub dense: Option<DenseStore>,
}

/// Everything the pipeline knows about one query.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryInput {
    pub query: Query,
    pub vector: Option<DenseVector>,
    /// Encoder-produced impact weights; term counts of the text are used when absent.
    pub impact_weights: Option<BTreeMap<String, f64>>,
}

impl QueryInput {
    pub fn new(query: Query, vector: Option<DenseVector>) -> Self {
        Self {
            query,
            vector,
            impact_weights: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryWeightSource {
    Provided,
    TermCounts,
}

/// Final ranking plus every intermediate list, for inspection and testing.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineResult {
    pub final_list: ScoredList,
    pub round1_sparse: Option<ScoredList>,
    pub round1_dense: Option<ScoredList>,
    pub round1_fused: Option<ScoredList>,
    pub feedback_ids: Option<Vec<String>>,
    pub prf_query: Option<DenseVector>,
    pub round2_dense: Option<ScoredList>,
    pub query_weight_source: Option<QueryWeightSource>,
}

fn check_indexes(cfg: &PipelineConfig, indexes: &Indexes) -> Result<()> {
    if cfg.needs_sparse() {
        match cfg.sparse_backend {
            SparseBackend::Bm25 if indexes.bm25.is_none() => {
                return Err(Error::MissingIndex("BM25"))
            }
            SparseBackend::Impact if indexes.impact.is_none() => {
                return Err(Error::MissingIndex("impact"))
            }
            _ => {}
        }
    }
    if cfg.needs_dense() && indexes.dense.is_none() {
        return Err(Error::MissingIndex("dense"));
    }
    Ok(())
}

fn sparse_round(
    input: &QueryInput,
    cfg: &PipelineConfig,
    indexes: &Indexes,
) -> Result<(ScoredList, Option<QueryWeightSource>)> {
    match cfg.sparse_backend {
        SparseBackend::Bm25 => {
            let index = indexes.bm25.as_ref().ok_or(Error::MissingIndex("BM25"))?;
            Ok((
                search_bm25(index, cfg.bm25, &input.query, cfg.retrieval_depth),
                None,
            ))
        }
        SparseBackend::Impact => {
            let index = indexes
                .impact
                .as_ref()
                .ok_or(Error::MissingIndex("impact"))?;
            let (weights, source) = match &input.impact_weights {
                Some(w) => (w.clone(), QueryWeightSource::Provided),
                None => (
                    query_weights_from_text(&input.query.text),
                    QueryWeightSource::TermCounts,
                ),
            };
            let list = search_impact(index, &input.query.id, &weights, cfg.retrieval_depth);
            Ok((list, Some(source)))
        }
    }
}

pub fn run_query(
    input: &QueryInput,
    cfg: &PipelineConfig,
    indexes: &Indexes,
) -> Result<PipelineResult> {
    cfg.validate()?;
    check_indexes(cfg, indexes)?;
    let qid = input.query.id.as_str();

    let (round1_sparse, query_weight_source) = if cfg.needs_sparse() {
        let (list, source) = sparse_round(input, cfg, indexes)?;
        (Some(list), source)
    } else {
        (None, None)
    };

    if !cfg.dense_enabled {
        return Ok(PipelineResult {
            final_list: round1_sparse.clone().expect("sparse list computed"),
            round1_sparse,
            round1_dense: None,
            round1_fused: None,
            feedback_ids: None,
            prf_query: None,
            round2_dense: None,
            query_weight_source,
        });
    }

    let store = indexes.dense.as_ref().ok_or(Error::MissingIndex("dense"))?;
    let q_vec = input
        .vector
        .as_ref()
        .ok_or_else(|| Error::MissingQueryVector(qid.to_string()))?;
    let round1_dense = store.top_k_with(qid, q_vec, cfg.retrieval_depth, cfg.similarity)?;

    let round1_fused = if cfg.stage.fuses_round1() {
        let sparse = round1_sparse.as_ref().expect("sparse list computed");
        Some(interpolate(sparse, &round1_dense, &cfg.fusion)?)
    } else {
        None
    };

    let mut feedback_ids = None;
    let mut prf_query = None;
    let mut round2_dense = None;
    if cfg.use_prf {
        let source = round1_fused.as_ref().unwrap_or(&round1_dense);
        let ids = select_feedback(source, cfg.prf.depth_k)?;
        let feedback = store.fetch_vectors(&ids)?;
        let revised = rocchio_update_with(
            q_vec,
            &feedback,
            cfg.prf.alpha,
            cfg.prf.beta,
            cfg.prf.aggregation,
        )?;
        round2_dense =
            Some(store.top_k_with(qid, &revised, cfg.retrieval_depth, cfg.similarity)?);
        feedback_ids = Some(ids);
        prf_query = Some(revised);
    }

    let final_list = if cfg.stage.fuses_round2() {
        let sparse = round1_sparse.as_ref().expect("sparse list computed");
        interpolate(
            sparse,
            round2_dense.as_ref().expect("second round ran"),
            &cfg.fusion,
        )?
    } else if let Some(second) = &round2_dense {
        second.clone()
    } else if let Some(fused) = &round1_fused {
        fused.clone()
    } else {
        round1_dense.clone()
    };

    Ok(PipelineResult {
        final_list,
        round1_sparse,
        round1_dense: Some(round1_dense),
        round1_fused,
        feedback_ids,
        prf_query,
        round2_dense,
        query_weight_source,
    })
}

/// Ranks every query and returns results in input order. `threads` bounds
/// parallelism (`None` = all cores); output never depends on it.
pub fn run_all(
    inputs: &[QueryInput],
    cfg: &PipelineConfig,
    indexes: &Indexes,
    threads: Option<usize>,
) -> Result<Vec<PipelineResult>> {
    cfg.validate()?;
    check_indexes(cfg, indexes)?;
    if cfg.needs_dense() {
        if let Some(missing) = inputs.iter().find(|i| i.vector.is_none()) {
            return Err(Error::MissingQueryVector(missing.query.id.clone()));
        }
    }
    let work = || -> Result<Vec<PipelineResult>> {
        inputs
            .par_iter()
            .map(|input| run_query(input, cfg, indexes))
            .collect()
    };
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    }
}

/// Run-file entries for `results`, ranks assigned from list order.
pub fn to_run_entries(results: &[PipelineResult], tag: &str) -> Vec<RunEntry> {
    results
        .iter()
        .flat_map(|r| {
            r.final_list.iter().enumerate().map(move |(i, e)| {
                RunEntry::new(
                    r.final_list.query_id.clone(),
                    e.id.clone(),
                    i + 1,
                    e.score,
                    tag,
                )
            })
        })
        .collect()
}

pub fn run_batch(
    inputs: &[QueryInput],
    cfg: &PipelineConfig,
    indexes: &Indexes,
    threads: Option<usize>,
) -> Result<Vec<RunEntry>> {
    let results = run_all(inputs, cfg, indexes, threads)?;
    Ok(to_run_entries(&results, &cfg.digest()))
}
