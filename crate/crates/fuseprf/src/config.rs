//! TOML configuration files and data-path resolution.
//!
//! ```toml
//! data_dir = "data"
//! threads = 4
//!
//! [paths]
//! corpus = "data/corpus.jsonl"
//! query_vectors = "data/query_vectors.txt"
//!
//! [pipeline]
//! stage = "both"
//! use_prf = true
//!
//! [pipeline.fusion]
//! lambda = 0.5
//!
//! [eval]
//! metrics = "map,ndcg@10,recall@1000"
//!
//! [serve]
//! port = 8080
//! ```
//!
//! Command-line flags take precedence over the file, and the file over
//! built-in defaults.

use std::path::{Path, PathBuf};

use fuseprf_core::fixture;
use fuseprf_core::PipelineConfig;
use serde::Deserialize;

pub const DATA_DIR_ENV: &str = "FUSEPRF_DATA_DIR";

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub data_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub paths: PathsFile,
    pub pipeline: PipelineConfig,
    pub eval: EvalFile,
    pub serve: ServeFile,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsFile {
    pub corpus: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub query_vectors: Option<PathBuf>,
    pub doc_vectors: Option<PathBuf>,
    pub doc_weights: Option<PathBuf>,
    pub query_weights: Option<PathBuf>,
    pub qrels: Option<PathBuf>,
    pub bm25_index: Option<PathBuf>,
    pub impact_index: Option<PathBuf>,
    pub dense_index: Option<PathBuf>,
    pub dim: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalFile {
    pub metrics: Option<String>,
    pub exponential_gain: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeFile {
    pub host: Option<String>,
    pub port: Option<u16>,
}

/// Marks an error as a usage or configuration problem (exit status 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn load_file_config(path: Option<&Path>) -> anyhow::Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| fuseprf_core::Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Every input location a command may need, after flags, file and defaults
/// have been combined.
#[derive(Debug, Clone)]
pub struct DataPaths {
    pub data_dir: PathBuf,
    pub corpus: PathBuf,
    pub queries: PathBuf,
    pub query_vectors: PathBuf,
    pub doc_vectors: PathBuf,
    pub doc_weights: PathBuf,
    /// `None` means "use the default file if it exists".
    pub query_weights: Option<PathBuf>,
    pub default_query_weights: PathBuf,
    pub qrels: PathBuf,
    pub bm25_index: Option<PathBuf>,
    pub impact_index: Option<PathBuf>,
    pub dense_index: Option<PathBuf>,
    pub dim: Option<usize>,
}

/// Flag-level overrides for [`DataPaths`].
#[derive(Debug, Clone, Default, clap::Args)]
pub struct PathArgs {
    /// Passage corpus (JSON lines with `id` and `contents`)
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Queries (`id<TAB>text`)
    #[arg(long)]
    pub queries: Option<PathBuf>,
    /// Query vectors (text or binary vector file)
    #[arg(long)]
    pub qvecs: Option<PathBuf>,
    /// Passage vectors (text or binary vector file)
    #[arg(long)]
    pub doc_vectors: Option<PathBuf>,
    /// Passage term weights for the impact index (JSON lines)
    #[arg(long)]
    pub doc_weights: Option<PathBuf>,
    /// Encoder-produced query term weights (JSON lines)
    #[arg(long)]
    pub query_weights: Option<PathBuf>,
    /// Persisted BM25 index directory
    #[arg(long)]
    pub bm25_index: Option<PathBuf>,
    /// Persisted impact index directory
    #[arg(long)]
    pub impact_index: Option<PathBuf>,
    /// Persisted dense store directory
    #[arg(long)]
    pub dense_index: Option<PathBuf>,
    /// Vector dimension; detected from the vector file when omitted
    #[arg(long)]
    pub dim: Option<usize>,
}

pub fn resolve_data_dir(flag: Option<&Path>, file: &FileConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| file.data_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."))
}

impl DataPaths {
    pub fn resolve(data_dir: PathBuf, args: &PathArgs, file: &PathsFile) -> Self {
        let pick = |flag: &Option<PathBuf>, from_file: &Option<PathBuf>, name: &str| {
            flag.clone()
                .or_else(|| from_file.clone())
                .unwrap_or_else(|| data_dir.join(name))
        };
        let index = |flag: &Option<PathBuf>, from_file: &Option<PathBuf>, name: &str| {
            flag.clone().or_else(|| from_file.clone()).or_else(|| {
                let dir = data_dir.join("index").join(name);
                dir.join("meta.json").exists().then_some(dir)
            })
        };
        Self {
            corpus: pick(&args.corpus, &file.corpus, fixture::CORPUS_FILE),
            queries: pick(&args.queries, &file.queries, fixture::QUERIES_FILE),
            query_vectors: pick(
                &args.qvecs,
                &file.query_vectors,
                fixture::QUERY_VECTORS_FILE,
            ),
            doc_vectors: pick(
                &args.doc_vectors,
                &file.doc_vectors,
                fixture::DOC_VECTORS_FILE,
            ),
            doc_weights: pick(
                &args.doc_weights,
                &file.doc_weights,
                fixture::DOC_WEIGHTS_FILE,
            ),
            query_weights: args
                .query_weights
                .clone()
                .or_else(|| file.query_weights.clone()),
            default_query_weights: data_dir.join(fixture::QUERY_WEIGHTS_FILE),
            qrels: file
                .qrels
                .clone()
                .unwrap_or_else(|| data_dir.join(fixture::QRELS_FILE)),
            bm25_index: index(&args.bm25_index, &file.bm25_index, "bm25"),
            impact_index: index(&args.impact_index, &file.impact_index, "impact"),
            dense_index: index(&args.dense_index, &file.dense_index, "dense"),
            dim: args.dim.or(file.dim),
            data_dir,
        }
    }

    /// The query-weight file to use, if any: an explicit one must exist, the
    /// default one is used only when present.
    pub fn query_weights_file(&self) -> Option<&Path> {
        match &self.query_weights {
            Some(p) => Some(p),
            None => self
                .default_query_weights
                .exists()
                .then_some(self.default_query_weights.as_path()),
        }
    }
}
