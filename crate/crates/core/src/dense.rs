//! Exact dense retrieval over precomputed passage vectors.
//!
//! Vectors are stored as `f32`. Dot products accumulate in `f64` and the
//! result is rounded back to `f32` precision, so scores carry 32-bit
//! precision while ties are resolved deterministically by passage id.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scored::{ScoredDoc, ScoredList};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DenseVector(Vec<f32>);

impl DenseVector {
    pub fn new(values: Vec<f32>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &[f32]) -> f64 {
        dot(&self.0, other)
    }
}

impl From<Vec<f32>> for DenseVector {
    fn from(values: Vec<f32>) -> Self {
        Self(values)
    }
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0, |acc, (x, y)| acc + f64::from(*x) * f64::from(*y))
}

fn to_f32_precision(x: f64) -> f64 {
    f64::from(x as f32)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Similarity {
    #[default]
    Dot,
    Cosine,
}

/// Immutable passage-vector store with ids kept in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseStore {
    dim: usize,
    ids: Vec<String>,
    data: Vec<f32>,
    rows: HashMap<String, usize>,
}

impl DenseStore {
    pub fn new(dim: usize, vectors: BTreeMap<String, DenseVector>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("vector dimension must be positive".into()));
        }
        let mut ids = Vec::with_capacity(vectors.len());
        let mut data = Vec::with_capacity(vectors.len() * dim);
        for (id, v) in vectors {
            if v.dim() != dim {
                return Err(Error::DimensionMismatch {
                    id,
                    expected: dim,
                    found: v.dim(),
                });
            }
            if !v.is_finite() {
                return Err(Error::Config(format!(
                    "vector `{id}` has a non-finite entry"
                )));
            }
            data.extend_from_slice(v.values());
            ids.push(id);
        }
        let rows = ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        Ok(Self {
            dim,
            ids,
            data,
            rows,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.rows.get(id).map(|&i| self.row(i))
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = (&str, &[f32])> {
        self.ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), self.row(i)))
    }

    /// Exact top-`depth` by inner product.
    pub fn top_k(&self, query_id: &str, q: &DenseVector, depth: usize) -> Result<ScoredList> {
        self.top_k_with(query_id, q, depth, Similarity::Dot)
    }

    pub fn top_k_with(
        &self,
        query_id: &str,
        q: &DenseVector,
        depth: usize,
        similarity: Similarity,
    ) -> Result<ScoredList> {
        if q.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                id: query_id.to_string(),
                expected: self.dim,
                found: q.dim(),
            });
        }
        let q_norm = match similarity {
            Similarity::Dot => 1.0,
            Similarity::Cosine => q.dot(q.values()).sqrt(),
        };
        let candidates = self
            .iter()
            .map(|(id, row)| {
                let raw = q.dot(row);
                let score = match similarity {
                    Similarity::Dot => raw,
                    Similarity::Cosine => {
                        let denom = q_norm * dot(row, row).sqrt();
                        if denom > 0.0 {
                            raw / denom
                        } else {
                            0.0
                        }
                    }
                };
                ScoredDoc::new(id, to_f32_precision(score))
            })
            .collect();
        Ok(ScoredList::from_candidates(query_id, candidates, depth))
    }

    /// Vectors for `ids`, in the order given.
    pub fn fetch_vectors<S: AsRef<str>>(&self, ids: &[S]) -> Result<Vec<DenseVector>> {
        ids.iter()
            .map(|id| {
                self.get(id.as_ref())
                    .map(|row| DenseVector::new(row.to_vec()))
                    .ok_or_else(|| Error::MissingId(id.as_ref().to_string()))
            })
            .collect()
    }
}
