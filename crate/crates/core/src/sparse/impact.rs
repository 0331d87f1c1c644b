use std::collections::{BTreeMap, HashMap};

use super::tokenize;
use crate::error::{Error, Result};
use crate::io::TermWeightDoc;
use crate::scored::{ScoredDoc, ScoredList};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpactPosting {
    pub doc: u32,
    pub weight: f64,
}

/// Inverted index over learned, precomputed term weights. Scores are the dot
/// product of query and passage weight maps.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactIndex {
    pub(crate) doc_ids: Vec<String>,
    pub(crate) postings: BTreeMap<String, Vec<ImpactPosting>>,
}

impl ImpactIndex {
    pub fn build(docs: &[TermWeightDoc]) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut postings: BTreeMap<String, Vec<ImpactPosting>> = BTreeMap::new();
        let mut doc_ids = Vec::with_capacity(docs.len());
        let mut seen = std::collections::HashSet::new();
        for (ordinal, doc) in docs.iter().enumerate() {
            if !seen.insert(doc.id.as_str()) {
                return Err(Error::DuplicateId(doc.id.clone()));
            }
            doc_ids.push(doc.id.clone());
            for (term, &weight) in &doc.weights {
                if term.is_empty() || !weight.is_finite() || weight < 0.0 {
                    return Err(Error::Config(format!(
                        "passage `{}`: invalid weight {weight} for term `{term}`",
                        doc.id
                    )));
                }
                // zero weights never contribute to a dot product
                if weight > 0.0 {
                    postings
                        .entry(term.clone())
                        .or_default()
                        .push(ImpactPosting {
                            doc: ordinal as u32,
                            weight,
                        });
                }
            }
        }
        Ok(Self { doc_ids, postings })
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn doc_id(&self, ordinal: usize) -> Option<&str> {
        self.doc_ids.get(ordinal).map(String::as_str)
    }

    pub fn postings(&self, term: &str) -> &[ImpactPosting] {
        self.postings.get(term).map_or(&[], Vec::as_slice)
    }

    pub fn term_count(&self) -> usize {
        self.postings.len()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let n = self.doc_ids.len();
        if n == 0 {
            return Err(Error::Format("impact index has no documents".into()));
        }
        for (term, list) in &self.postings {
            let sorted = list.windows(2).all(|w| w[0].doc < w[1].doc);
            let valid = list
                .iter()
                .all(|p| (p.doc as usize) < n && p.weight.is_finite() && p.weight >= 0.0);
            if term.is_empty() || !sorted || !valid {
                return Err(Error::Format(format!(
                    "bad impact postings for term `{term}`"
                )));
            }
        }
        Ok(())
    }
}

/// Term counts of the tokenized query text, used when no encoder-produced
/// query weights are available.
pub fn query_weights_from_text(text: &str) -> BTreeMap<String, f64> {
    let mut weights = BTreeMap::new();
    for token in tokenize(text) {
        *weights.entry(token).or_insert(0.0) += 1.0;
    }
    weights
}

/// Ranks passages by `Σ_t query_weights[t] · passage_weight[t]`. Query weights
/// are expected to be non-negative; passages scoring zero are left out.
pub fn search_impact(
    index: &ImpactIndex,
    query_id: &str,
    query_weights: &BTreeMap<String, f64>,
    depth: usize,
) -> ScoredList {
    let mut acc: HashMap<u32, f64> = HashMap::new();
    for (term, &qw) in query_weights {
        if qw == 0.0 {
            continue;
        }
        for p in index.postings(term) {
            *acc.entry(p.doc).or_insert(0.0) += qw * p.weight;
        }
    }
    let candidates = acc
        .into_iter()
        .filter(|(_, s)| *s > 0.0)
        .map(|(doc, s)| ScoredDoc::new(index.doc_ids[doc as usize].clone(), s))
        .collect();
    ScoredList::from_candidates(query_id, candidates, depth)
}
