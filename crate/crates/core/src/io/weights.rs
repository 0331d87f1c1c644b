use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::for_each_line;
use crate::error::{Error, Result};

/// Precomputed term weights for one passage or query.
///
/// On disk this is one JSON object per line: `{"id": "...", "vector": {"term": weight, ...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermWeightDoc {
    pub id: String,
    #[serde(rename = "vector")]
    pub weights: BTreeMap<String, f64>,
}

pub fn load_term_weights(path: impl AsRef<Path>) -> Result<Vec<TermWeightDoc>> {
    let path = path.as_ref();
    let mut docs = Vec::new();
    let mut seen = HashSet::new();
    for_each_line(path, |lineno, line| {
        let doc: TermWeightDoc = serde_json::from_str(line).map_err(|e| {
            Error::parse(path, lineno, format!("malformed term-weight record: {e}"))
        })?;
        if doc.id.is_empty() {
            return Err(Error::parse(path, lineno, "empty id"));
        }
        if let Some((term, w)) = doc
            .weights
            .iter()
            .find(|(t, w)| t.is_empty() || !w.is_finite() || **w < 0.0)
        {
            return Err(Error::parse(
                path,
                lineno,
                format!("invalid term weight `{term}`: {w}"),
            ));
        }
        if !seen.insert(doc.id.clone()) {
            return Err(Error::DuplicateId(doc.id));
        }
        docs.push(doc);
        Ok(())
    })?;
    Ok(docs)
}

pub fn write_term_weights(path: impl AsRef<Path>, docs: &[TermWeightDoc]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for doc in docs {
        let line = serde_json::to_string(doc).expect("term weights serialize");
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
