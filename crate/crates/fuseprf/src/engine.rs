//! Loading indexes and query inputs for a configuration.

use std::collections::BTreeMap;

use fuseprf_core::io::{detect_dim, load_corpus, load_queries, load_term_weights, load_vectors};
use fuseprf_core::persist::{load_bm25, load_dense, load_impact};
use fuseprf_core::pipeline::SparseBackend;
use fuseprf_core::sparse::{ImpactIndex, InvertedIndex};
use fuseprf_core::{DenseStore, Indexes, PipelineConfig, QueryInput, Result};

use crate::config::DataPaths;

/// Which indexes to load.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Needs {
    pub bm25: bool,
    pub impact: bool,
    pub dense: bool,
}

impl Needs {
    pub fn for_config(cfg: &PipelineConfig) -> Self {
        let sparse = cfg.needs_sparse();
        Self {
            bm25: sparse && cfg.sparse_backend == SparseBackend::Bm25,
            impact: sparse && cfg.sparse_backend == SparseBackend::Impact,
            dense: cfg.needs_dense(),
        }
    }

    /// Everything whose source exists under `paths`.
    pub fn available(paths: &DataPaths) -> Self {
        Self {
            bm25: paths.bm25_index.is_some() || paths.corpus.exists(),
            impact: paths.impact_index.is_some() || paths.doc_weights.exists(),
            dense: paths.dense_index.is_some() || paths.doc_vectors.exists(),
        }
    }
}

/// Loads persisted indexes where configured, building from raw files otherwise.
pub fn load_indexes(paths: &DataPaths, needs: Needs) -> Result<Indexes> {
    let bm25 = if needs.bm25 {
        Some(match &paths.bm25_index {
            Some(dir) => load_bm25(dir)?,
            None => InvertedIndex::build(&load_corpus(&paths.corpus)?)?,
        })
    } else {
        None
    };
    let impact = if needs.impact {
        Some(match &paths.impact_index {
            Some(dir) => load_impact(dir)?,
            None => ImpactIndex::build(&load_term_weights(&paths.doc_weights)?)?,
        })
    } else {
        None
    };
    let dense = if needs.dense {
        Some(match &paths.dense_index {
            Some(dir) => load_dense(dir)?,
            None => {
                let dim = match paths.dim {
                    Some(d) => d,
                    None => detect_dim(&paths.doc_vectors)?,
                };
                DenseStore::new(dim, load_vectors(&paths.doc_vectors, dim)?)?
            }
        })
    } else {
        None
    };
    Ok(Indexes {
        bm25,
        impact,
        dense,
    })
}

/// Queries with whatever side inputs the configuration uses attached.
pub fn load_inputs(
    paths: &DataPaths,
    cfg: &PipelineConfig,
    indexes: &Indexes,
) -> Result<Vec<QueryInput>> {
    let queries = load_queries(&paths.queries)?;
    let mut vectors = if cfg.needs_dense() {
        let dim = indexes.dense.as_ref().map(DenseStore::dim);
        let dim = match dim.or(paths.dim) {
            Some(d) => d,
            None => detect_dim(&paths.query_vectors)?,
        };
        load_vectors(&paths.query_vectors, dim)?
    } else {
        BTreeMap::new()
    };
    let mut weights: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    if Needs::for_config(cfg).impact {
        if let Some(path) = paths.query_weights_file() {
            weights = load_term_weights(path)?
                .into_iter()
                .map(|d| (d.id, d.weights))
                .collect();
        }
    }
    Ok(queries
        .into_iter()
        .map(|q| {
            let vector = vectors.remove(&q.id);
            let impact_weights = weights.remove(&q.id);
            QueryInput {
                query: q,
                vector,
                impact_weights,
            }
        })
        .collect())
}
