//! Readers and writers for the on-disk formats: JSON-lines corpora and
//! term weights, TSV queries, TREC qrels and runs, and dense vector files.
//!
//! Every loader reports malformed input with the offending line number and
//! rejects anything outside its grammar instead of guessing.

mod corpus;
mod qrels;
mod run;
mod vectors;
mod weights;

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

pub use corpus::{check_empty_passages, load_corpus, load_queries, Passage, Query};
pub use qrels::{load_qrels, Qrels};
pub use run::{group_run, load_run, write_run, RunEntry};
pub use vectors::{
    detect_dim, load_vectors, write_vectors_binary, write_vectors_text, VECTOR_MAGIC,
};
pub use weights::{load_term_weights, write_term_weights, TermWeightDoc};

use crate::error::{Error, Result};

/// Calls `f` with each (1-based line number, line) of a UTF-8 text file.
pub(crate) fn for_each_line(
    path: &Path,
    mut f: impl FnMut(usize, &str) -> Result<()>,
) -> Result<()> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| match e.kind() {
            std::io::ErrorKind::InvalidData => {
                Error::parse(path, lineno, "line is not valid UTF-8")
            }
            _ => Error::io(path, e),
        })?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        f(lineno, line)?;
    }
    Ok(())
}
