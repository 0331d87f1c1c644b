//! On-disk index directories.
//!
//! Every index directory holds `meta.json` plus one data file:
//!
//! ```text
//! meta.json       {"format":"fuseprf-index","version":1,"kind":"bm25"|"impact"|"dense",
//!                  "documents":N,"terms":T,"dim":D}
//! postings.bin    bm25 and impact
//! vectors.bin     dense, in the binary vector format of `io::write_vectors_binary`
//! ```
//!
//! `postings.bin` is little-endian throughout. Strings are a `u32` byte length
//! followed by UTF-8 bytes.
//!
//! ```text
//! magic[8]  version:u32  documents:u64
//! documents × (id:string  [bm25 only] length:u32)
//! terms:u64
//! terms × (term:string  count:u32  count × (doc:u32  tf:u32 | weight:f64))
//! ```
//!
//! `meta.json` is written last, so an interrupted build never looks complete.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dense::{DenseStore, DenseVector};
use crate::error::{Error, Result};
use crate::io::{load_vectors, write_vectors_binary};
use crate::sparse::{ImpactIndex, ImpactPosting, InvertedIndex, Posting};

pub const FORMAT_NAME: &str = "fuseprf-index";
pub const FORMAT_VERSION: u32 = 1;

const META_FILE: &str = "meta.json";
const POSTINGS_FILE: &str = "postings.bin";
const VECTORS_FILE: &str = "vectors.bin";
const BM25_MAGIC: &[u8; 8] = b"FPRFBM25";
const IMPACT_MAGIC: &[u8; 8] = b"FPRFIMPT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexKind {
    Bm25,
    Impact,
    Dense,
}

impl IndexKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            IndexKind::Bm25 => "bm25",
            IndexKind::Impact => "impact",
            IndexKind::Dense => "dense",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexMeta {
    pub format: String,
    pub version: u32,
    pub kind: IndexKind,
    pub documents: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terms: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
}

impl IndexMeta {
    fn new(kind: IndexKind, documents: usize) -> Self {
        Self {
            format: FORMAT_NAME.to_string(),
            version: FORMAT_VERSION,
            kind,
            documents,
            terms: None,
            dim: None,
        }
    }
}

/// Creates `dir`, refusing to reuse an existing path unless `force` is set.
fn prepare_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        if !force {
            return Err(Error::OutputExists(dir.to_path_buf()));
        }
        if !dir.is_dir() {
            return Err(Error::Config(format!(
                "{} is not a directory",
                dir.display()
            )));
        }
        let meta = dir.join(META_FILE);
        if meta.exists() {
            fs::remove_file(&meta).map_err(|e| Error::io(&meta, e))?;
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_meta(dir: &Path, meta: &IndexMeta) -> Result<()> {
    let path = dir.join(META_FILE);
    let mut text = serde_json::to_string_pretty(meta).expect("meta serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

pub fn read_meta(dir: impl AsRef<Path>) -> Result<IndexMeta> {
    let path = dir.as_ref().join(META_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let meta: IndexMeta =
        serde_json::from_str(&text).map_err(|e| Error::parse(&path, e.line(), e.to_string()))?;
    if meta.format != FORMAT_NAME || meta.version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported format {} version {}",
            path.display(),
            meta.format,
            meta.version
        )));
    }
    Ok(meta)
}

fn expect_kind(dir: &Path, kind: IndexKind) -> Result<IndexMeta> {
    let meta = read_meta(dir)?;
    if meta.kind != kind {
        return Err(Error::Format(format!(
            "{} holds a {} index, expected {}",
            dir.display(),
            meta.kind.as_str(),
            kind.as_str()
        )));
    }
    Ok(meta)
}

struct Writer {
    path: PathBuf,
    out: BufWriter<File>,
}

impl Writer {
    fn create(path: PathBuf) -> Result<Self> {
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            path,
            out: BufWriter::new(file),
        })
    }

    fn bytes(&mut self, b: &[u8]) -> Result<()> {
        self.out.write_all(b).map_err(|e| Error::io(&self.path, e))
    }

    fn u32(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v).map_err(|_| Error::Format(format!("{v} exceeds u32")))?;
        self.bytes(&v.to_le_bytes())
    }

    fn u64(&mut self, v: usize) -> Result<()> {
        self.bytes(&(v as u64).to_le_bytes())
    }

    fn str(&mut self, s: &str) -> Result<()> {
        self.u32(s.len())?;
        self.bytes(s.as_bytes())
    }

    fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

struct Reader {
    path: PathBuf,
    input: BufReader<File>,
}

impl Reader {
    fn open(path: PathBuf) -> Result<Self> {
        let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            path,
            input: BufReader::new(file),
        })
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.input
            .read_exact(&mut buf)
            .map_err(|e| self.truncated(e))?;
        Ok(buf)
    }

    fn truncated(&self, e: std::io::Error) -> Error {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Format(format!("{}: truncated", self.path.display()))
        } else {
            Error::io(&self.path, e)
        }
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }

    fn str(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let mut buf = Vec::new();
        (&mut self.input)
            .take(len as u64)
            .read_to_end(&mut buf)
            .map_err(|e| Error::io(&self.path, e))?;
        if buf.len() != len {
            return Err(Error::Format(format!("{}: truncated", self.path.display())));
        }
        String::from_utf8(buf)
            .map_err(|_| Error::Format(format!("{}: invalid UTF-8 string", self.path.display())))
    }

    fn header(&mut self, magic: &[u8; 8]) -> Result<()> {
        if &self.array::<8>()? != magic {
            return Err(Error::Format(format!("{}: bad magic", self.path.display())));
        }
        let version = self.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "{}: unsupported version {version}",
                self.path.display()
            )));
        }
        Ok(())
    }

    fn count(&mut self, bound: u64) -> Result<usize> {
        let n = self.u64()?;
        if n > bound {
            return Err(Error::Format(format!(
                "{}: implausible count {n}",
                self.path.display()
            )));
        }
        Ok(n as usize)
    }

    fn expect_end(&mut self) -> Result<()> {
        let mut rest = [0u8; 1];
        match self
            .input
            .read(&mut rest)
            .map_err(|e| Error::io(&self.path, e))?
        {
            0 => Ok(()),
            _ => Err(Error::Format(format!(
                "{}: trailing bytes",
                self.path.display()
            ))),
        }
    }
}

fn file_len(path: &Path) -> Result<u64> {
    fs::metadata(path)
        .map(|m| m.len())
        .map_err(|e| Error::io(path, e))
}

pub fn save_bm25(index: &InvertedIndex, dir: impl AsRef<Path>, force: bool) -> Result<IndexMeta> {
    let dir = dir.as_ref();
    prepare_dir(dir, force)?;
    let mut w = Writer::create(dir.join(POSTINGS_FILE))?;
    w.bytes(BM25_MAGIC)?;
    w.bytes(&FORMAT_VERSION.to_le_bytes())?;
    w.u64(index.doc_ids.len())?;
    for (id, &len) in index.doc_ids.iter().zip(&index.doc_lengths) {
        w.str(id)?;
        w.u32(len as usize)?;
    }
    w.u64(index.postings.len())?;
    for (term, list) in &index.postings {
        w.str(term)?;
        w.u32(list.len())?;
        for p in list {
            w.u32(p.doc as usize)?;
            w.u32(p.tf as usize)?;
        }
    }
    w.finish()?;
    let mut meta = IndexMeta::new(IndexKind::Bm25, index.doc_count());
    meta.terms = Some(index.term_count());
    write_meta(dir, &meta)?;
    Ok(meta)
}

pub fn load_bm25(dir: impl AsRef<Path>) -> Result<InvertedIndex> {
    let dir = dir.as_ref();
    let meta = expect_kind(dir, IndexKind::Bm25)?;
    let path = dir.join(POSTINGS_FILE);
    let bound = file_len(&path)?;
    let mut r = Reader::open(path)?;
    r.header(BM25_MAGIC)?;
    let n = r.count(bound)?;
    let mut doc_ids = Vec::with_capacity(n);
    let mut doc_lengths = Vec::with_capacity(n);
    for _ in 0..n {
        doc_ids.push(r.str()?);
        doc_lengths.push(r.u32()?);
    }
    let terms = r.count(bound)?;
    let mut postings = BTreeMap::new();
    for _ in 0..terms {
        let term = r.str()?;
        let count = r.u32()? as usize;
        let mut list = Vec::with_capacity(count.min(n));
        for _ in 0..count {
            list.push(Posting {
                doc: r.u32()?,
                tf: r.u32()?,
            });
        }
        if postings.insert(term.clone(), list).is_some() {
            return Err(Error::Format(format!("duplicate term `{term}`")));
        }
    }
    r.expect_end()?;
    let total_len = doc_lengths.iter().map(|&l| u64::from(l)).sum();
    let index = InvertedIndex {
        doc_ids,
        doc_lengths,
        postings,
        total_len,
    };
    index.validate()?;
    check_count(&meta, index.doc_count())?;
    Ok(index)
}

pub fn save_impact(index: &ImpactIndex, dir: impl AsRef<Path>, force: bool) -> Result<IndexMeta> {
    let dir = dir.as_ref();
    prepare_dir(dir, force)?;
    let mut w = Writer::create(dir.join(POSTINGS_FILE))?;
    w.bytes(IMPACT_MAGIC)?;
    w.bytes(&FORMAT_VERSION.to_le_bytes())?;
    w.u64(index.doc_ids.len())?;
    for id in &index.doc_ids {
        w.str(id)?;
    }
    w.u64(index.postings.len())?;
    for (term, list) in &index.postings {
        w.str(term)?;
        w.u32(list.len())?;
        for p in list {
            w.u32(p.doc as usize)?;
            w.bytes(&p.weight.to_le_bytes())?;
        }
    }
    w.finish()?;
    let mut meta = IndexMeta::new(IndexKind::Impact, index.doc_count());
    meta.terms = Some(index.term_count());
    write_meta(dir, &meta)?;
    Ok(meta)
}

pub fn load_impact(dir: impl AsRef<Path>) -> Result<ImpactIndex> {
    let dir = dir.as_ref();
    let meta = expect_kind(dir, IndexKind::Impact)?;
    let path = dir.join(POSTINGS_FILE);
    let bound = file_len(&path)?;
    let mut r = Reader::open(path)?;
    r.header(IMPACT_MAGIC)?;
    let n = r.count(bound)?;
    let mut doc_ids = Vec::with_capacity(n);
    for _ in 0..n {
        doc_ids.push(r.str()?);
    }
    let terms = r.count(bound)?;
    let mut postings = BTreeMap::new();
    for _ in 0..terms {
        let term = r.str()?;
        let count = r.u32()? as usize;
        let mut list = Vec::with_capacity(count.min(n));
        for _ in 0..count {
            list.push(ImpactPosting {
                doc: r.u32()?,
                weight: r.f64()?,
            });
        }
        if postings.insert(term.clone(), list).is_some() {
            return Err(Error::Format(format!("duplicate term `{term}`")));
        }
    }
    r.expect_end()?;
    let index = ImpactIndex { doc_ids, postings };
    index.validate()?;
    check_count(&meta, index.doc_count())?;
    Ok(index)
}

pub fn save_dense(store: &DenseStore, dir: impl AsRef<Path>, force: bool) -> Result<IndexMeta> {
    let dir = dir.as_ref();
    prepare_dir(dir, force)?;
    let rows: Vec<(&str, DenseVector)> = store
        .iter()
        .map(|(id, row)| (id, DenseVector::new(row.to_vec())))
        .collect();
    write_vectors_binary(
        dir.join(VECTORS_FILE),
        store.dim(),
        rows.iter().map(|(id, v)| (*id, v)),
    )?;
    let mut meta = IndexMeta::new(IndexKind::Dense, store.len());
    meta.dim = Some(store.dim());
    write_meta(dir, &meta)?;
    Ok(meta)
}

pub fn load_dense(dir: impl AsRef<Path>) -> Result<DenseStore> {
    let dir = dir.as_ref();
    let meta = expect_kind(dir, IndexKind::Dense)?;
    let dim = meta
        .dim
        .ok_or_else(|| Error::Format("dense index meta lacks `dim`".into()))?;
    let store = DenseStore::new(dim, load_vectors(dir.join(VECTORS_FILE), dim)?)?;
    check_count(&meta, store.len())?;
    Ok(store)
}

fn check_count(meta: &IndexMeta, found: usize) -> Result<()> {
    if meta.documents != found {
        return Err(Error::Format(format!(
            "meta.json lists {} documents, data holds {found}",
            meta.documents
        )));
    }
    Ok(())
}
