use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::for_each_line;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Passage {
    pub id: String,
    #[serde(rename = "contents")]
    pub text: String,
}

impl Passage {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub id: String,
    pub text: String,
}

impl Query {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
        }
    }
}

/// Loads a JSON-lines corpus where each line carries `id` and `contents`.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Passage>> {
    let path = path.as_ref();
    let mut passages = Vec::new();
    let mut seen = HashSet::new();
    for_each_line(path, |lineno, line| {
        let passage: Passage = serde_json::from_str(line)
            .map_err(|e| Error::parse(path, lineno, format!("malformed corpus record: {e}")))?;
        if passage.id.is_empty() {
            return Err(Error::parse(path, lineno, "empty passage id"));
        }
        if !seen.insert(passage.id.clone()) {
            return Err(Error::DuplicateId(passage.id));
        }
        passages.push(passage);
        Ok(())
    })?;
    Ok(passages)
}

/// Loads `id<TAB>text` queries.
pub fn load_queries(path: impl AsRef<Path>) -> Result<Vec<Query>> {
    let path = path.as_ref();
    let mut queries = Vec::new();
    let mut seen = HashSet::new();
    for_each_line(path, |lineno, line| {
        let (id, text) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, lineno, "expected `id<TAB>text`"))?;
        if id.is_empty() {
            return Err(Error::parse(path, lineno, "empty query id"));
        }
        if !seen.insert(id.to_string()) {
            return Err(Error::DuplicateId(id.to_string()));
        }
        queries.push(Query::new(id, text));
        Ok(())
    })?;
    Ok(queries)
}

/// Passages with empty text are only legal when a term-weight record exists for them.
pub fn check_empty_passages<'a>(
    passages: &[Passage],
    weighted_ids: impl IntoIterator<Item = &'a str>,
) -> Result<()> {
    let weighted: HashSet<&str> = weighted_ids.into_iter().collect();
    match passages
        .iter()
        .find(|p| p.text.is_empty() && !weighted.contains(p.id.as_str()))
    {
        Some(p) => Err(Error::Config(format!(
            "passage `{}` has empty text and no term-weight record",
            p.id
        ))),
        None => Ok(()),
    }
}
