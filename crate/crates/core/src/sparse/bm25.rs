use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{tokenize, unique_terms};
use crate::error::{Error, Result};
use crate::io::{Passage, Query};
use crate::scored::{ScoredDoc, ScoredList};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

/// Term → postings over passage ordinals, plus the length statistics BM25 needs.
#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    pub(crate) doc_ids: Vec<String>,
    pub(crate) doc_lengths: Vec<u32>,
    pub(crate) postings: BTreeMap<String, Vec<Posting>>,
    pub(crate) total_len: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 0.9, b: 0.4 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1.is_finite() && self.k1 >= 0.0) {
            return Err(Error::Config(format!(
                "k1 must be non-negative, got {}",
                self.k1
            )));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::Config(format!(
                "b must lie in [0, 1], got {}",
                self.b
            )));
        }
        Ok(())
    }
}

impl InvertedIndex {
    pub fn build(corpus: &[Passage]) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut doc_ids = Vec::with_capacity(corpus.len());
        let mut doc_lengths = Vec::with_capacity(corpus.len());
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut total_len = 0u64;
        let mut tf: HashMap<String, u32> = HashMap::new();
        for (ordinal, passage) in corpus.iter().enumerate() {
            let tokens = tokenize(&passage.text);
            doc_ids.push(passage.id.clone());
            doc_lengths.push(tokens.len() as u32);
            total_len += tokens.len() as u64;
            tf.clear();
            for token in tokens {
                *tf.entry(token).or_insert(0) += 1;
            }
            for (term, count) in tf.drain() {
                postings.entry(term).or_default().push(Posting {
                    doc: ordinal as u32,
                    tf: count,
                });
            }
        }
        if total_len == 0 {
            return Err(Error::Config(
                "corpus contains no indexable terms; average passage length is undefined".into(),
            ));
        }
        Ok(Self {
            doc_ids,
            doc_lengths,
            postings,
            total_len,
        })
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.total_len as f64 / self.doc_ids.len() as f64
    }

    pub fn doc_id(&self, ordinal: usize) -> Option<&str> {
        self.doc_ids.get(ordinal).map(String::as_str)
    }

    pub fn doc_length(&self, ordinal: usize) -> Option<u32> {
        self.doc_lengths.get(ordinal).copied()
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map_or(&[], Vec::as_slice)
    }

    pub fn term_count(&self) -> usize {
        self.postings.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&str, &[Posting])> {
        self.postings
            .iter()
            .map(|(t, p)| (t.as_str(), p.as_slice()))
    }

    fn idf(&self, df: usize) -> f64 {
        let n = self.doc_count() as f64;
        let df = df as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn term_weight(&self, params: Bm25Params, idf: f64, tf: u32, doc: usize) -> f64 {
        let tf = f64::from(tf);
        let dl = f64::from(self.doc_lengths[doc]);
        let norm = params.k1 * (1.0 - params.b + params.b * dl / self.avg_doc_len());
        idf * tf / (tf + norm)
    }

    /// Checks the structural invariants; used after loading from disk.
    pub(crate) fn validate(&self) -> Result<()> {
        let n = self.doc_ids.len();
        if n == 0 || self.doc_lengths.len() != n {
            return Err(Error::Format(
                "document table is empty or inconsistent".into(),
            ));
        }
        if self.doc_lengths.iter().map(|&l| u64::from(l)).sum::<u64>() != self.total_len
            || self.total_len == 0
        {
            return Err(Error::Format(
                "document lengths do not match the stored total".into(),
            ));
        }
        for (term, list) in &self.postings {
            let sorted = list.windows(2).all(|w| w[0].doc < w[1].doc);
            let in_range = list.iter().all(|p| (p.doc as usize) < n && p.tf > 0);
            if term.is_empty() || list.is_empty() || !sorted || !in_range {
                return Err(Error::Format(format!("bad posting list for term `{term}`")));
            }
        }
        Ok(())
    }
}

/// BM25 with Lucene's non-negative idf and no `(k1 + 1)` factor in the numerator.
pub fn bm25_score<S: AsRef<str>>(
    index: &InvertedIndex,
    params: Bm25Params,
    query_terms: &[S],
    doc: usize,
) -> Result<f64> {
    if doc >= index.doc_count() {
        return Err(Error::UnknownOrdinal(doc));
    }
    let mut score = 0.0;
    for term in unique_terms(query_terms) {
        let list = index.postings(term);
        if let Ok(pos) = list.binary_search_by_key(&(doc as u32), |p| p.doc) {
            score += index.term_weight(params, index.idf(list.len()), list[pos].tf, doc);
        }
    }
    Ok(score)
}

pub fn search_bm25(
    index: &InvertedIndex,
    params: Bm25Params,
    query: &Query,
    depth: usize,
) -> ScoredList {
    let terms = tokenize(&query.text);
    let mut acc: HashMap<u32, f64> = HashMap::new();
    for term in unique_terms(&terms) {
        let list = index.postings(term);
        if list.is_empty() {
            continue;
        }
        let idf = index.idf(list.len());
        for p in list {
            *acc.entry(p.doc).or_insert(0.0) +=
                index.term_weight(params, idf, p.tf, p.doc as usize);
        }
    }
    let candidates = acc
        .into_iter()
        .filter(|(_, s)| *s > 0.0)
        .map(|(doc, s)| ScoredDoc::new(index.doc_ids[doc as usize].clone(), s))
        .collect();
    ScoredList::from_candidates(query.id.clone(), candidates, depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    /// Index-free BM25 evaluated straight from passage text.
    fn oracle(corpus: &[Passage], k1: f64, b: f64, query: &str, doc: usize) -> f64 {
        let docs: Vec<Vec<String>> = corpus.iter().map(|p| tokenize(&p.text)).collect();
        let n = docs.len() as f64;
        let avgdl = docs.iter().map(Vec::len).sum::<usize>() as f64 / n;
        let mut q = tokenize(query);
        let mut seen = std::collections::HashSet::new();
        q.retain(|t| seen.insert(t.clone()));
        let mut score = 0.0;
        for t in &q {
            let tf = docs[doc].iter().filter(|w| *w == t).count() as f64;
            if tf == 0.0 {
                continue;
            }
            let df = docs.iter().filter(|d| d.contains(t)).count() as f64;
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            let dl = docs[doc].len() as f64;
            score += idf * tf / (tf + k1 * (1.0 - b + b * dl / avgdl));
        }
        score
    }

    fn corpus(texts: &[&str]) -> Vec<Passage> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| Passage::new(format!("d{}", i + 1), *t))
            .collect()
    }

    #[test]
    fn hand_counted_postings() {
        let idx = InvertedIndex::build(&corpus(&["cat dog", "cat"])).unwrap();
        assert_eq!(
            idx.postings("cat"),
            &[Posting { doc: 0, tf: 1 }, Posting { doc: 1, tf: 1 }]
        );
        assert_eq!(idx.postings("dog"), &[Posting { doc: 0, tf: 1 }]);
        assert_eq!(idx.avg_doc_len(), 1.5);

        let idx = InvertedIndex::build(&corpus(&["a a a"])).unwrap();
        assert_eq!(idx.postings("a"), &[Posting { doc: 0, tf: 3 }]);
        assert_eq!(idx.avg_doc_len(), 3.0);
    }

    #[test]
    fn empty_corpus_rejected() {
        assert!(matches!(InvertedIndex::build(&[]), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn postings_match_naive_counts() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let vocab = ["a", "b", "c", "d", "e", "f", "g", "h"];
        let texts: Vec<String> = (0..100)
            .map(|_| {
                let len = rng.random_range(1..8);
                (0..len)
                    .map(|_| vocab[rng.random_range(0..vocab.len())])
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();
        let c: Vec<Passage> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Passage::new(format!("p{i}"), t.as_str()))
            .collect();
        let idx = InvertedIndex::build(&c).unwrap();
        let mut total = 0;
        for term in vocab {
            let expected: Vec<Posting> = texts
                .iter()
                .enumerate()
                .filter_map(|(i, t)| {
                    let tf = t.split(' ').filter(|w| *w == term).count() as u32;
                    (tf > 0).then_some(Posting { doc: i as u32, tf })
                })
                .collect();
            total += expected.len();
            assert_eq!(idx.postings(term), expected.as_slice(), "term {term}");
        }
        assert_eq!(idx.terms().map(|(_, p)| p.len()).sum::<usize>(), total);
        idx.validate().unwrap();
    }

    #[test]
    fn hand_evaluated_single_term() {
        let c = corpus(&["cat dog", "cat"]);
        let idx = InvertedIndex::build(&c).unwrap();
        let got = bm25_score(&idx, Bm25Params::default(), &["dog"], 0).unwrap();
        let expected = 2f64.ln() * (1.0 / (1.0 + 0.9 * (0.6 + 0.4 * (2.0 / 1.5))));
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
        assert_eq!(
            bm25_score(&idx, Bm25Params::default(), &["dog"], 1).unwrap(),
            0.0
        );
        assert_eq!(
            bm25_score(&idx, Bm25Params::default(), &["zebra"], 0).unwrap(),
            0.0
        );
        assert!(matches!(
            bm25_score(&idx, Bm25Params::default(), &["dog"], 2),
            Err(Error::UnknownOrdinal(2))
        ));
    }

    #[test]
    fn search_edge_cases() {
        let c = corpus(&["cat dog", "cat", "bird"]);
        let idx = InvertedIndex::build(&c).unwrap();
        let p = Bm25Params::default();
        assert!(search_bm25(&idx, p, &Query::new("q", "zebra"), 10).is_empty());
        let top = search_bm25(&idx, p, &Query::new("q", "dog cat"), 1);
        assert_eq!(top.ids(), vec!["d1"]);
        let all = search_bm25(&idx, p, &Query::new("q", "dog cat"), 10);
        assert_eq!(all.ids(), vec!["d1", "d2"]);
    }

    fn arb_corpus() -> impl Strategy<Value = Vec<String>> {
        proptest::collection::vec(
            proptest::collection::vec(
                proptest::sample::select(vec!["x", "y", "z", "w", "v"]),
                1..6,
            )
            .prop_map(|w| w.join(" ")),
            1..12,
        )
    }

    proptest! {
        #[test]
        fn index_scores_equal_oracle(texts in arb_corpus(), query in "[xyzwvu ]{0,12}", k1 in 0.0f64..3.0, b in 0.0f64..=1.0) {
            let c: Vec<Passage> = texts.iter().enumerate().map(|(i, t)| Passage::new(format!("p{i}"), t.as_str())).collect();
            let idx = InvertedIndex::build(&c).unwrap();
            let params = Bm25Params { k1, b };
            let terms = tokenize(&query);
            for d in 0..c.len() {
                let got = bm25_score(&idx, params, &terms, d).unwrap();
                prop_assert!((got - oracle(&c, k1, b, &query, d)).abs() < 1e-9);
            }
        }

        #[test]
        fn search_is_exhaustive_and_prefix_closed(texts in arb_corpus(), query in "[xyzwv ]{1,10}", n in 1usize..5) {
            let c: Vec<Passage> = texts.iter().enumerate().map(|(i, t)| Passage::new(format!("p{i:02}"), t.as_str())).collect();
            let idx = InvertedIndex::build(&c).unwrap();
            let p = Bm25Params::default();
            let q = Query::new("q", query.as_str());
            let full = search_bm25(&idx, p, &q, c.len() + 5);
            let mut expected: Vec<(String, f64)> = (0..c.len())
                .map(|d| (c[d].id.clone(), oracle(&c, 0.9, 0.4, &query, d)))
                .filter(|(_, s)| *s > 0.0)
                .collect();
            expected.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            prop_assert_eq!(full.len(), expected.len());
            for (got, (id, s)) in full.iter().zip(&expected) {
                prop_assert_eq!(&got.id, id);
                prop_assert!((got.score - s).abs() < 1e-9);
            }
            let short = search_bm25(&idx, p, &q, n);
            prop_assert_eq!(short.entries(), &full.entries()[..n.min(full.len())]);
        }

        #[test]
        fn unrelated_passage_only_shifts_statistics(texts in arb_corpus(), query in "[xyz ]{1,8}") {
            let mut c: Vec<Passage> = texts.iter().enumerate().map(|(i, t)| Passage::new(format!("p{i}"), t.as_str())).collect();
            let terms = tokenize(&query);
            c.push(Passage::new("extra", "unrelated filler words"));
            let idx = InvertedIndex::build(&c).unwrap();
            for d in 0..c.len() - 1 {
                let got = bm25_score(&idx, Bm25Params::default(), &terms, d).unwrap();
                prop_assert!((got - oracle(&c, 0.9, 0.4, &query, d)).abs() < 1e-9);
            }
            prop_assert_eq!(bm25_score(&idx, Bm25Params::default(), &terms, c.len() - 1).unwrap(), 0.0);
        }
    }
}
