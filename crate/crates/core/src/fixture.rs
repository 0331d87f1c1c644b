//! Seeded synthetic test collection in which lexical and embedding scores
//! carry complementary evidence.
//!
//! Each query owns three topic terms and a unit direction `u` in embedding
//! space, and five kinds of passage:
//!
//! | kind      | text                         | vector          | grade |
//! |-----------|------------------------------|-----------------|-------|
//! | relevant  | two or three topic terms     | `0.7u + noise`  | 2–3   |
//! | marginal  | one topic term               | `0.5u + noise`  | 1     |
//! | lexical   | topic terms repeated         | `-0.3u + noise` | 0     |
//! | semantic  | no topic terms               | `0.85u + noise` | 0     |
//! | filler    | filler words only            | random          | -     |
//!
//! Lexical distractors top the sparse ranking and semantic distractors top
//! the dense ranking; only passages strong on both signals rise under an
//! even interpolation.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::dense::{DenseStore, DenseVector};
use crate::error::{Error, Result};
use crate::io::{write_term_weights, write_vectors_text, Passage, Qrels, Query, TermWeightDoc};
use crate::pipeline::{Indexes, QueryInput};
use crate::sparse::{ImpactIndex, InvertedIndex};

pub const DEFAULT_SEED: u64 = 20220701;

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const QUERIES_FILE: &str = "queries.tsv";
pub const DOC_VECTORS_FILE: &str = "doc_vectors.txt";
pub const QUERY_VECTORS_FILE: &str = "query_vectors.txt";
pub const QRELS_FILE: &str = "qrels.txt";
pub const DOC_WEIGHTS_FILE: &str = "doc_weights.jsonl";
pub const QUERY_WEIGHTS_FILE: &str = "query_weights.jsonl";

const QUERIES: usize = 15;
const DOCS: usize = 200;
const DIM: usize = 16;
const RELEVANT: usize = 4;
const LEXICAL: usize = 3;
const SEMANTIC: usize = 3;
const FILLER_VOCAB: usize = 150;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCollection {
    pub dim: usize,
    pub passages: Vec<Passage>,
    pub queries: Vec<Query>,
    pub doc_vectors: Vec<(String, DenseVector)>,
    pub query_vectors: Vec<(String, DenseVector)>,
    pub qrels: Qrels,
    pub doc_weights: Vec<TermWeightDoc>,
    pub query_weights: Vec<TermWeightDoc>,
}

const SYLLABLES: [&str; 16] = [
    "ka", "lo", "mi", "ne", "ru", "sa", "ti", "vo", "be", "da", "fu", "go", "hi", "ja", "pe", "zu",
];

fn filler_word(i: usize) -> String {
    format!(
        "{}{}{}",
        SYLLABLES[i % 16],
        SYLLABLES[(i / 16) % 16],
        SYLLABLES[(i * 7 + 3) % 16]
    )
}

fn topic_term(q: usize, j: usize) -> String {
    format!("topic{q}{}", ["alpha", "beta", "gamma"][j])
}

struct Gen {
    rng: ChaCha8Rng,
    filler: Vec<String>,
}

impl Gen {
    fn gaussian(&mut self, sigma: f64) -> Vec<f64> {
        (0..DIM)
            .map(|_| sigma * self.rng.sample::<f64, _>(StandardNormal) / (DIM as f64).sqrt())
            .collect()
    }

    fn unit(&mut self) -> Vec<f64> {
        let v = self.gaussian(1.0);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.into_iter().map(|x| x / norm).collect()
    }

    fn along(&mut self, u: &[f64], scale: f64, sigma: f64) -> DenseVector {
        let noise = self.gaussian(sigma);
        DenseVector::new(
            u.iter()
                .zip(noise)
                .map(|(a, n)| (scale * a + n) as f32)
                .collect(),
        )
    }

    fn text(&mut self, extra: &[String]) -> String {
        let n = self.rng.random_range(8..16);
        let mut words: Vec<String> = (0..n)
            .map(|_| self.filler.choose(&mut self.rng).unwrap().clone())
            .collect();
        for w in extra {
            let at = self.rng.random_range(0..=words.len());
            words.insert(at, w.clone());
        }
        words.join(" ")
    }

    fn weights(&mut self, id: &str, text: &str) -> TermWeightDoc {
        let mut tf = std::collections::BTreeMap::<String, f64>::new();
        for t in crate::sparse::tokenize(text) {
            *tf.entry(t).or_default() += 1.0;
        }
        let weights = tf
            .into_iter()
            .map(|(t, c)| {
                let w = (1.0 + f64::ln(c)) * self.rng.random_range(0.8..1.2);
                (t, (w * 1000.0).round() / 1000.0)
            })
            .collect();
        TermWeightDoc {
            id: id.to_string(),
            weights,
        }
    }
}

impl SyntheticCollection {
    pub fn generate(seed: u64) -> Self {
        let mut g = Gen {
            rng: ChaCha8Rng::seed_from_u64(seed),
            filler: (0..FILLER_VOCAB).map(filler_word).collect(),
        };
        let mut docs: Vec<(Passage, DenseVector)> = Vec::with_capacity(DOCS);
        let mut queries = Vec::new();
        let mut query_vectors = Vec::new();
        let mut query_weights = Vec::new();
        let mut qrels = Qrels::default();

        for q in 0..QUERIES {
            let qid = format!("q{q:02}");
            let terms: Vec<String> = (0..3).map(|j| topic_term(q, j)).collect();
            let u = g.unit();
            queries.push(Query::new(&qid, format!("what about {}", terms.join(" "))));
            query_vectors.push((
                qid.clone(),
                DenseVector::new(u.iter().map(|&x| x as f32).collect()),
            ));
            query_weights.push(TermWeightDoc {
                id: qid.clone(),
                weights: terms.iter().map(|t| (t.clone(), 1.0)).collect(),
            });

            let mut add = |g: &mut Gen,
                           text_terms: Vec<String>,
                           scale: f64,
                           sigma: f64,
                           grade: Option<u8>| {
                let text = g.text(&text_terms);
                let vector = g.along(&u, scale, sigma);
                let id = format!("p{:03}", docs.len());
                if let Some(grade) = grade {
                    qrels.insert(&qid, &id, grade);
                }
                docs.push((Passage::new(&id, text), vector));
            };
            for _ in 0..RELEVANT {
                let grade = g.rng.random_range(2..=3);
                let mut some = terms.clone();
                if g.rng.random_bool(0.4) {
                    some.remove(g.rng.random_range(0..some.len()));
                }
                add(&mut g, some, 0.7, 0.5, Some(grade));
            }
            let one = terms.choose(&mut g.rng).unwrap().clone();
            add(&mut g, vec![one], 0.5, 0.5, Some(1));
            for _ in 0..LEXICAL {
                let mut repeated = Vec::new();
                for t in &terms {
                    for _ in 0..g.rng.random_range(2..=3) {
                        repeated.push(t.clone());
                    }
                }
                add(&mut g, repeated, -0.3, 0.5, Some(0));
            }
            for _ in 0..SEMANTIC {
                add(&mut g, Vec::new(), 0.85, 0.3, Some(0));
            }
        }
        while docs.len() < DOCS {
            let text = g.text(&[]);
            let u = g.unit();
            let vector = g.along(&u, 0.3, 0.25);
            docs.push((Passage::new(format!("p{:03}", docs.len()), text), vector));
        }

        // shuffle so passage ids carry no information about their role
        let mut order: Vec<usize> = (0..docs.len()).collect();
        rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut g.rng);
        let renamed: std::collections::BTreeMap<String, String> = order
            .iter()
            .enumerate()
            .map(|(new, &old)| (format!("p{old:03}"), format!("p{new:03}")))
            .collect();
        let mut passages = Vec::with_capacity(DOCS);
        let mut doc_vectors = Vec::with_capacity(DOCS);
        for (p, v) in docs {
            let id = renamed[&p.id].clone();
            passages.push(Passage::new(&id, p.text));
            doc_vectors.push((id, v));
        }
        passages.sort_by(|a, b| a.id.cmp(&b.id));
        doc_vectors.sort_by(|a, b| a.0.cmp(&b.0));
        let mut renamed_qrels = Qrels::default();
        for (q, judged) in &qrels.judgments {
            for (d, &grade) in judged {
                renamed_qrels.insert(q, &renamed[d], grade);
            }
        }
        let doc_weights = passages.iter().map(|p| g.weights(&p.id, &p.text)).collect();

        Self {
            dim: DIM,
            passages,
            queries,
            doc_vectors,
            query_vectors,
            qrels: renamed_qrels,
            doc_weights,
            query_weights,
        }
    }

    pub fn indexes(&self) -> Result<Indexes> {
        Ok(Indexes {
            bm25: Some(InvertedIndex::build(&self.passages)?),
            impact: Some(ImpactIndex::build(&self.doc_weights)?),
            dense: Some(DenseStore::new(
                self.dim,
                self.doc_vectors.iter().cloned().collect(),
            )?),
        })
    }

    /// Queries with their vectors and encoder-style term weights attached.
    pub fn inputs(&self) -> Vec<QueryInput> {
        self.queries
            .iter()
            .zip(&self.query_vectors)
            .zip(&self.query_weights)
            .map(|((q, (_, v)), w)| QueryInput {
                query: q.clone(),
                vector: Some(v.clone()),
                impact_weights: Some(w.weights.clone()),
            })
            .collect()
    }

    /// Writes the collection's files into `dir`, creating it if needed.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

        let mut corpus = String::new();
        for p in &self.passages {
            corpus.push_str(&serde_json::to_string(p).expect("passage serializes"));
            corpus.push('\n');
        }
        write_file(&dir.join(CORPUS_FILE), &corpus)?;

        let queries: String = self
            .queries
            .iter()
            .map(|q| format!("{}\t{}\n", q.id, q.text))
            .collect();
        write_file(&dir.join(QUERIES_FILE), &queries)?;

        let mut qrels = String::new();
        for (q, judged) in &self.qrels.judgments {
            for (d, g) in judged {
                qrels.push_str(&format!("{q} 0 {d} {g}\n"));
            }
        }
        write_file(&dir.join(QRELS_FILE), &qrels)?;

        write_vectors_text(
            dir.join(DOC_VECTORS_FILE),
            self.doc_vectors.iter().map(|(id, v)| (id.as_str(), v)),
        )?;
        write_vectors_text(
            dir.join(QUERY_VECTORS_FILE),
            self.query_vectors.iter().map(|(id, v)| (id.as_str(), v)),
        )?;
        write_term_weights(dir.join(DOC_WEIGHTS_FILE), &self.doc_weights)?;
        write_term_weights(dir.join(QUERY_WEIGHTS_FILE), &self.query_weights)
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    out.write_all(text.as_bytes())
        .map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}
