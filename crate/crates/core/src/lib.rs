//! Hybrid sparse/dense passage retrieval with vector pseudo-relevance
//! feedback, score interpolation, and TREC-style evaluation.

pub mod dense;
pub mod error;
pub mod eval;
pub mod fixture;
pub mod fusion;
pub mod io;
pub mod persist;
pub mod pipeline;
pub mod prf;
pub mod scored;
pub mod sparse;

pub use dense::{DenseStore, DenseVector, Similarity};
pub use error::{Error, Result};
pub use fusion::{interpolate, normalize, FusionConfig, MissingPolicy, Normalization};
pub use pipeline::{
    run_all, run_batch, run_query, Indexes, PipelineConfig, PipelineResult, QueryInput, Stage,
};
pub use prf::{rocchio_update, select_feedback, PrfConfig};
pub use scored::{ScoredDoc, ScoredList};
