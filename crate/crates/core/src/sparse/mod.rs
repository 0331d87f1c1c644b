//! Exact-match sparse retrieval: a BM25 inverted index built from passage
//! text and an impact index over precomputed term weights.

mod bm25;
mod impact;
mod tokenize;

pub use bm25::{bm25_score, search_bm25, Bm25Params, InvertedIndex, Posting};
pub use impact::{query_weights_from_text, search_impact, ImpactIndex, ImpactPosting};
pub use tokenize::tokenize;

/// Unique terms in first-occurrence order.
pub(crate) fn unique_terms<S: AsRef<str>>(terms: &[S]) -> Vec<&str> {
    let mut seen = std::collections::HashSet::new();
    terms
        .iter()
        .map(AsRef::as_ref)
        .filter(|t| seen.insert(*t))
        .collect()
}
