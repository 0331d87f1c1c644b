use std::collections::BTreeMap;
use std::path::Path;

use super::for_each_line;
use crate::error::{Error, Result};

/// Graded judgments: query id → passage id → grade in 0..=3.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Qrels {
    pub judgments: BTreeMap<String, BTreeMap<String, u8>>,
}

impl Qrels {
    pub fn get(&self, query_id: &str) -> Option<&BTreeMap<String, u8>> {
        self.judgments.get(query_id)
    }

    pub fn insert(&mut self, query_id: &str, doc_id: &str, grade: u8) {
        self.judgments
            .entry(query_id.to_string())
            .or_default()
            .insert(doc_id.to_string(), grade);
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }
}

/// Loads TREC qrels (`qid iter docid grade`). The iteration column is ignored.
pub fn load_qrels(path: impl AsRef<Path>) -> Result<Qrels> {
    let path = path.as_ref();
    let mut qrels = Qrels::default();
    for_each_line(path, |lineno, line| {
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [qid, _iter, docid, grade] = fields[..] else {
            return Err(Error::parse(
                path,
                lineno,
                format!(
                    "expected 4 fields `qid iter docid grade`, found {}",
                    fields.len()
                ),
            ));
        };
        let grade: i64 = grade.parse().map_err(|_| {
            Error::parse(path, lineno, format!("grade `{grade}` is not an integer"))
        })?;
        if !(0..=3).contains(&grade) {
            return Err(Error::GradeRange {
                path: path.to_path_buf(),
                line: lineno,
                grade,
            });
        }
        let per_query = qrels.judgments.entry(qid.to_string()).or_default();
        if per_query.insert(docid.to_string(), grade as u8).is_some() {
            return Err(Error::parse(
                path,
                lineno,
                format!("duplicate judgment for ({qid}, {docid})"),
            ));
        }
        Ok(())
    })?;
    Ok(qrels)
}
