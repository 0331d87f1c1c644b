//! TREC-style effectiveness metrics.
//!
//! Binary metrics (AP, recall) count a passage as relevant when its grade is
//! at least 2; grade 1 is treated as not relevant. nDCG uses the raw grade as
//! a linear gain with a `log2(rank + 1)` discount. Metrics read the rank
//! field of a run, never its scores.
//!
//! A query contributes to a mean only if it can score above zero: at least
//! one relevant passage for AP and recall, a positive ideal DCG for nDCG.
//! Such queries that are absent from the run score 0.

mod ttest;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use ttest::{paired_t_test, TTest};

use crate::error::{Error, Result};
use crate::io::{group_run, Qrels, RunEntry};

pub const RELEVANCE_THRESHOLD: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gain {
    #[default]
    Linear,
    /// `2^grade − 1`
    Exponential,
}

impl Gain {
    fn of(self, grade: u8) -> f64 {
        match self {
            Gain::Linear => f64::from(grade),
            Gain::Exponential => 2f64.powi(i32::from(grade)) - 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Map,
    Ndcg(usize),
    Recall(usize),
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Map => "map",
            Metric::Ndcg(_) => "ndcg",
            Metric::Recall(_) => "recall",
        }
    }

    pub fn cutoff(&self) -> Option<usize> {
        match self {
            Metric::Map => None,
            Metric::Ndcg(k) | Metric::Recall(k) => Some(*k),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.cutoff() {
            Some(k) => write!(f, "{}@{k}", self.name()),
            None => f.write_str(self.name()),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, cutoff) = match s.split_once('@') {
            Some((name, k)) => {
                let k: usize = k
                    .parse()
                    .ok()
                    .filter(|k| *k >= 1)
                    .ok_or_else(|| Error::Config(format!("bad cutoff in metric `{s}`")))?;
                (name, Some(k))
            }
            None => (s, None),
        };
        match (name, cutoff) {
            ("map", None) => Ok(Metric::Map),
            ("ndcg", Some(k)) => Ok(Metric::Ndcg(k)),
            ("ndcg", None) => Ok(Metric::Ndcg(10)),
            ("recall", Some(k)) => Ok(Metric::Recall(k)),
            ("recall", None) => Ok(Metric::Recall(1000)),
            _ => Err(Error::Config(format!("unknown metric `{s}`"))),
        }
    }
}

pub fn parse_metrics(list: &str) -> Result<Vec<Metric>> {
    let metrics: Vec<Metric> = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    if metrics.is_empty() {
        return Err(Error::Config("no metrics requested".into()));
    }
    Ok(metrics)
}

/// Grades `>= threshold` become 1, everything else 0.
pub fn binarize(qrels: &Qrels, threshold: u8) -> Qrels {
    Qrels {
        judgments: qrels
            .judgments
            .iter()
            .map(|(q, docs)| {
                let docs = docs
                    .iter()
                    .map(|(d, &g)| (d.clone(), u8::from(g >= threshold)))
                    .collect();
                (q.clone(), docs)
            })
            .collect(),
    }
}

fn relevant_set(judged: &BTreeMap<String, u8>) -> HashSet<&str> {
    judged
        .iter()
        .filter(|(_, &g)| g > 0)
        .map(|(d, _)| d.as_str())
        .collect()
}

/// AP over the whole ranking against binary judgments; 0 when nothing is relevant.
pub fn average_precision<S: AsRef<str>>(ranking: &[S], binary: &BTreeMap<String, u8>) -> f64 {
    let relevant = relevant_set(binary);
    if relevant.is_empty() {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, doc) in ranking.iter().enumerate() {
        if relevant.contains(doc.as_ref()) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / relevant.len() as f64
}

pub fn ndcg_at<S: AsRef<str>>(
    ranking: &[S],
    graded: &BTreeMap<String, u8>,
    cutoff: usize,
    gain: Gain,
) -> f64 {
    let discount = |i: usize| ((i + 2) as f64).log2();
    let dcg: f64 = ranking
        .iter()
        .take(cutoff)
        .enumerate()
        .map(|(i, d)| {
            let grade = graded.get(d.as_ref()).copied().unwrap_or(0);
            gain.of(grade) / discount(i)
        })
        .sum();
    let mut ideal: Vec<u8> = graded.values().copied().filter(|&g| g > 0).collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal
        .iter()
        .take(cutoff)
        .enumerate()
        .map(|(i, &g)| gain.of(g) / discount(i))
        .sum();
    if idcg > 0.0 {
        dcg / idcg
    } else {
        0.0
    }
}

pub fn recall_at<S: AsRef<str>>(
    ranking: &[S],
    binary: &BTreeMap<String, u8>,
    cutoff: usize,
) -> f64 {
    let relevant = relevant_set(binary);
    if relevant.is_empty() {
        return 0.0;
    }
    let found = ranking
        .iter()
        .take(cutoff)
        .filter(|d| relevant.contains(d.as_ref()))
        .count();
    found as f64 / relevant.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric_name: String,
    pub cutoff: Option<usize>,
    pub per_query: BTreeMap<String, f64>,
    pub mean: f64,
}

impl MetricReport {
    pub fn label(&self) -> String {
        match self.cutoff {
            Some(k) => format!("{}@{k}", self.metric_name),
            None => self.metric_name.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub threshold: u8,
    pub gain: Gain,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            threshold: RELEVANCE_THRESHOLD,
            gain: Gain::Linear,
        }
    }
}

pub fn evaluate(run: &[RunEntry], qrels: &Qrels, metric: Metric) -> MetricReport {
    evaluate_with(run, qrels, metric, EvalOptions::default())
}

pub fn evaluate_with(
    run: &[RunEntry],
    qrels: &Qrels,
    metric: Metric,
    opts: EvalOptions,
) -> MetricReport {
    let grouped = group_run(run);
    let binary = binarize(qrels, opts.threshold);
    let mut per_query = BTreeMap::new();
    for (qid, graded) in &qrels.judgments {
        let ranking: Vec<&str> = grouped
            .get(qid.as_str())
            .map(|rows| rows.iter().map(|e| e.doc_id.as_str()).collect())
            .unwrap_or_default();
        let bin = &binary.judgments[qid];
        let value = match metric {
            Metric::Map | Metric::Recall(_) if relevant_set(bin).is_empty() => continue,
            Metric::Ndcg(_) if relevant_set(graded).is_empty() => continue,
            Metric::Map => average_precision(&ranking, bin),
            Metric::Recall(k) => recall_at(&ranking, bin, k),
            Metric::Ndcg(k) => ndcg_at(&ranking, graded, k, opts.gain),
        };
        per_query.insert(qid.clone(), value);
    }
    let mean = if per_query.is_empty() {
        0.0
    } else {
        per_query.values().sum::<f64>() / per_query.len() as f64
    };
    MetricReport {
        metric_name: metric.name().to_string(),
        cutoff: metric.cutoff(),
        per_query,
        mean,
    }
}

#[derive(Debug, Clone, Serialize)]
struct ReportLine<'a> {
    run: &'a str,
    metric: String,
    query: &'a str,
    value: f64,
}

/// JSON lines: one record per (metric, query) plus an `all` record holding the mean.
pub fn report_jsonl(run_name: &str, reports: &[MetricReport]) -> String {
    let mut out = String::new();
    for report in reports {
        let metric = report.label();
        let rows = report
            .per_query
            .iter()
            .map(|(q, v)| (q.as_str(), *v))
            .chain(std::iter::once(("all", report.mean)));
        for (query, value) in rows {
            let line = ReportLine {
                run: run_name,
                metric: metric.clone(),
                query,
                value,
            };
            out.push_str(&serde_json::to_string(&line).expect("report line serializes"));
            out.push('\n');
        }
    }
    out
}

/// Aligned text table of means. With a second run, adds its means and the
/// paired t-test p-value per metric.
pub fn report_table(
    reports: &[MetricReport],
    compare: Option<(&[MetricReport], &[TTest])>,
) -> String {
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut header = vec![
        "metric".to_string(),
        "queries".to_string(),
        "run".to_string(),
    ];
    if compare.is_some() {
        header.extend(["compare".to_string(), "p-value".to_string()]);
    }
    rows.push(header);
    for (i, r) in reports.iter().enumerate() {
        let mut row = vec![
            r.label(),
            r.per_query.len().to_string(),
            format!("{:.4}", r.mean),
        ];
        if let Some((other, tests)) = compare {
            row.push(format!("{:.4}", other[i].mean));
            let t = &tests[i];
            row.push(if t.degenerate {
                format!("{:.4}*", t.p_value)
            } else {
                format!("{:.4}", t.p_value)
            });
        }
        rows.push(row);
    }
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in &rows {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, cell)| {
                if c == 0 {
                    format!("{cell:<w$}", w = widths[c])
                } else {
                    format!("{cell:>w$}", w = widths[c])
                }
            })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
    }
    out
}
