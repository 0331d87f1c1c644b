//! Rocchio pseudo-relevance feedback in embedding space.
//!
//! The revised query is `α · q + β · centroid(feedback)`, where the feedback
//! vectors are the dense vectors of the top-k passages of a first-round
//! ranking. There is no negative-feedback term.

use serde::{Deserialize, Serialize};

use crate::dense::DenseVector;
use crate::error::{Error, Result};
use crate::scored::ScoredList;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeedbackAggregation {
    #[default]
    Mean,
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrfConfig {
    pub alpha: f64,
    pub beta: f64,
    pub depth_k: usize,
    pub aggregation: FeedbackAggregation,
}

impl Default for PrfConfig {
    fn default() -> Self {
        Self {
            alpha: 0.4,
            beta: 0.6,
            depth_k: 3,
            aggregation: FeedbackAggregation::Mean,
        }
    }
}

impl PrfConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() || !self.beta.is_finite() {
            return Err(Error::Config("alpha and beta must be finite".into()));
        }
        if self.depth_k == 0 {
            return Err(Error::Config("PRF depth must be at least 1".into()));
        }
        Ok(())
    }
}

/// `α · q + β · mean(feedback)`, element-wise.
pub fn rocchio_update(
    q: &DenseVector,
    feedback: &[DenseVector],
    alpha: f64,
    beta: f64,
) -> Result<DenseVector> {
    rocchio_update_with(q, feedback, alpha, beta, FeedbackAggregation::Mean)
}

pub fn rocchio_update_with(
    q: &DenseVector,
    feedback: &[DenseVector],
    alpha: f64,
    beta: f64,
    aggregation: FeedbackAggregation,
) -> Result<DenseVector> {
    if feedback.is_empty() {
        return Err(Error::EmptyFeedback);
    }
    if let Some((i, f)) = feedback
        .iter()
        .enumerate()
        .find(|(_, f)| f.dim() != q.dim())
    {
        return Err(Error::DimensionMismatch {
            id: format!("feedback[{i}]"),
            expected: q.dim(),
            found: f.dim(),
        });
    }
    let divisor = match aggregation {
        FeedbackAggregation::Mean => feedback.len() as f64,
        FeedbackAggregation::Sum => 1.0,
    };
    let values: Vec<f32> = (0..q.dim())
        .map(|i| {
            let total = feedback
                .iter()
                .fold(0.0, |acc, f| acc + f64::from(f.values()[i]));
            (alpha * f64::from(q.values()[i]) + beta * (total / divisor)) as f32
        })
        .collect();
    let revised = DenseVector::new(values);
    if !revised.is_finite() {
        return Err(Error::Config("feedback update overflowed f32 range".into()));
    }
    Ok(revised)
}

/// The first `min(k, len)` passage ids of `ranked`, in rank order.
pub fn select_feedback(ranked: &ScoredList, k: usize) -> Result<Vec<String>> {
    if ranked.is_empty() {
        return Err(Error::EmptyFeedback);
    }
    Ok(ranked.iter().take(k).map(|e| e.id.clone()).collect())
}
