use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::for_each_line;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunEntry {
    pub query_id: String,
    pub doc_id: String,
    pub rank: usize,
    pub score: f64,
    pub tag: String,
}

impl RunEntry {
    pub fn new(
        query_id: impl Into<String>,
        doc_id: impl Into<String>,
        rank: usize,
        score: f64,
        tag: impl Into<String>,
    ) -> Self {
        Self {
            query_id: query_id.into(),
            doc_id: doc_id.into(),
            rank,
            score,
            tag: tag.into(),
        }
    }

    /// `qid Q0 docid rank score tag` with the score at six decimals.
    pub fn to_line(&self) -> String {
        format!(
            "{} Q0 {} {} {:.6} {}",
            self.query_id, self.doc_id, self.rank, self.score, self.tag
        )
    }
}

pub fn write_run(entries: &[RunEntry], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for entry in entries {
        writeln!(out, "{}", entry.to_line()).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Loads a TREC run and checks that every query's ranks are `1..=n`, scores
/// do not increase with rank, and no passage repeats.
pub fn load_run(path: impl AsRef<Path>) -> Result<Vec<RunEntry>> {
    let path = path.as_ref();
    let mut entries = Vec::new();
    let mut first_line: HashMap<String, usize> = HashMap::new();
    for_each_line(path, |lineno, line| {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [qid, _q0, docid, rank, score, tag] = fields[..] else {
            return Err(Error::parse(
                path,
                lineno,
                format!(
                    "expected 6 fields `qid Q0 docid rank score tag`, found {}",
                    fields.len()
                ),
            ));
        };
        let rank: usize = rank.parse().ok().filter(|r| *r >= 1).ok_or_else(|| {
            Error::parse(
                path,
                lineno,
                format!("rank `{rank}` is not a positive integer"),
            )
        })?;
        let score: f64 = score
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite())
            .ok_or_else(|| {
                Error::parse(
                    path,
                    lineno,
                    format!("score `{score}` is not a finite number"),
                )
            })?;
        first_line.entry(qid.to_string()).or_insert(lineno);
        entries.push(RunEntry::new(qid, docid, rank, score, tag));
        Ok(())
    })?;

    for (qid, rows) in group_run(&entries) {
        let line = first_line[qid];
        let mut seen = HashSet::new();
        for (i, e) in rows.iter().enumerate() {
            if e.rank != i + 1 {
                return Err(Error::parse(
                    path,
                    line,
                    format!("query `{qid}`: ranks are not 1..n without gaps"),
                ));
            }
            if !seen.insert(e.doc_id.as_str()) {
                return Err(Error::parse(
                    path,
                    line,
                    format!("query `{qid}`: passage `{}` appears twice", e.doc_id),
                ));
            }
            if i > 0 && e.score > rows[i - 1].score {
                return Err(Error::parse(
                    path,
                    line,
                    format!("query `{qid}`: score increases at rank {}", e.rank),
                ));
            }
        }
    }
    Ok(entries)
}

/// Groups run entries per query, each group sorted by rank.
pub fn group_run(entries: &[RunEntry]) -> BTreeMap<&str, Vec<&RunEntry>> {
    let mut grouped: BTreeMap<&str, Vec<&RunEntry>> = BTreeMap::new();
    for e in entries {
        grouped.entry(e.query_id.as_str()).or_default().push(e);
    }
    for rows in grouped.values_mut() {
        rows.sort_by_key(|e| e.rank);
    }
    grouped
}
