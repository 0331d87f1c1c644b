use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t_statistic: f64,
    pub df: usize,
    pub p_value: f64,
    /// The differences have zero variance, so the statistic is 0 or ±∞ and
    /// the p-value is the limit (1 or 0) rather than a tail probability.
    pub degenerate: bool,
}

/// Two-tailed paired t-test on per-query values aligned by query id.
pub fn paired_t_test(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> Result<TTest> {
    if a.len() != b.len() || a.keys().zip(b.keys()).any(|(x, y)| x != y) {
        return Err(Error::Config(
            "paired t-test needs both runs evaluated on the same queries".into(),
        ));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Config(format!(
            "paired t-test needs at least 2 queries, got {n}"
        )));
    }
    let diffs: Vec<f64> = a.values().zip(b.values()).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let df = n - 1;

    if var == 0.0 {
        return Ok(if mean == 0.0 {
            TTest {
                t_statistic: 0.0,
                df,
                p_value: 1.0,
                degenerate: true,
            }
        } else {
            TTest {
                t_statistic: f64::INFINITY.copysign(mean),
                df,
                p_value: 0.0,
                degenerate: true,
            }
        });
    }

    let t = mean / (var / n as f64).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("df >= 1");
    let p = (2.0 * dist.sf(t.abs())).clamp(0.0, 1.0);
    Ok(TTest {
        t_statistic: t,
        df,
        p_value: p,
        degenerate: false,
    })
}
