//! Dense vector files.
//!
//! Text form, one record per line: `id v1 v2 ... vd`.
//!
//! Binary form (little-endian):
//!
//! ```text
//! magic   8 bytes  "FPRFVEC\0"
//! version u32      1
//! dim     u32
//! count   u64
//! count × { id_len u32, id bytes (UTF-8), dim × f32 }
//! ```
//!
//! [`load_vectors`] detects the binary form by its magic.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::for_each_line;
use crate::dense::DenseVector;
use crate::error::{Error, Result};

pub const VECTOR_MAGIC: &[u8; 8] = b"FPRFVEC\0";
const VECTOR_VERSION: u32 = 1;

pub fn load_vectors(path: impl AsRef<Path>, dim: usize) -> Result<BTreeMap<String, DenseVector>> {
    let path = path.as_ref();
    if dim == 0 {
        return Err(Error::Config("vector dimension must be positive".into()));
    }
    let mut head = [0u8; 8];
    let is_binary = {
        let mut f = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut filled = 0;
        while filled < head.len() {
            match f
                .read(&mut head[filled..])
                .map_err(|e| Error::io(path, e))?
            {
                0 => break,
                n => filled += n,
            }
        }
        filled == head.len() && &head == VECTOR_MAGIC
    };
    if is_binary {
        load_binary(path, dim)
    } else {
        load_text(path, dim)
    }
}

/// Dimension of a vector file: the binary header's value, or the field count
/// of the first text record minus one.
pub fn detect_dim(path: impl AsRef<Path>) -> Result<usize> {
    let path = path.as_ref();
    let mut f = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let mut head = Vec::new();
    (&mut f)
        .take(16)
        .read_to_end(&mut head)
        .map_err(|e| Error::io(path, e))?;
    if head.len() == 16 && &head[..8] == VECTOR_MAGIC {
        return Ok(u32::from_le_bytes(head[12..16].try_into().unwrap()) as usize);
    }
    let mut dim = None;
    let result = for_each_line(path, |_, line| {
        if dim.is_none() && !line.trim().is_empty() {
            dim = Some(line.split_whitespace().count() - 1);
        }
        Ok(())
    });
    match (dim, result) {
        (Some(d), _) if d > 0 => Ok(d),
        (_, Err(e)) => Err(e),
        _ => Err(Error::Format(format!(
            "{}: no vector records",
            path.display()
        ))),
    }
}

fn load_text(path: &Path, dim: usize) -> Result<BTreeMap<String, DenseVector>> {
    let mut out = BTreeMap::new();
    for_each_line(path, |lineno, line| {
        let mut fields = line.split_whitespace();
        let id = fields
            .next()
            .ok_or_else(|| Error::parse(path, lineno, "empty vector record"))?;
        let values = fields
            .map(|v| {
                v.parse::<f32>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| {
                        Error::parse(path, lineno, format!("`{v}` is not a finite number"))
                    })
            })
            .collect::<Result<Vec<f32>>>()?;
        if values.len() != dim {
            return Err(Error::DimensionMismatch {
                id: id.to_string(),
                expected: dim,
                found: values.len(),
            });
        }
        if out
            .insert(id.to_string(), DenseVector::new(values))
            .is_some()
        {
            return Err(Error::DuplicateId(id.to_string()));
        }
        Ok(())
    })?;
    Ok(out)
}

fn read_exact(r: &mut impl Read, buf: &mut [u8], path: &Path, what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => {
            Error::Format(format!("{}: truncated {what}", path.display()))
        }
        _ => Error::io(path, e),
    })
}

fn load_binary(path: &Path, dim: usize) -> Result<BTreeMap<String, DenseVector>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut header = [0u8; 24];
    read_exact(&mut r, &mut header, path, "header")?;
    let version = u32::from_le_bytes(header[8..12].try_into().unwrap());
    if version != VECTOR_VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported vector file version {version}",
            path.display()
        )));
    }
    let file_dim = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    if file_dim != dim {
        return Err(Error::Format(format!(
            "{}: file dimension {file_dim}, expected {dim}",
            path.display()
        )));
    }
    let count = u64::from_le_bytes(header[16..24].try_into().unwrap());

    let mut out = BTreeMap::new();
    let mut len_buf = [0u8; 4];
    let mut values_buf = vec![0u8; dim * 4];
    for _ in 0..count {
        read_exact(&mut r, &mut len_buf, path, "record id length")?;
        let mut id_buf = vec![0u8; u32::from_le_bytes(len_buf) as usize];
        read_exact(&mut r, &mut id_buf, path, "record id")?;
        let id = String::from_utf8(id_buf)
            .map_err(|_| Error::Format(format!("{}: id is not UTF-8", path.display())))?;
        read_exact(&mut r, &mut values_buf, path, "record values")?;
        let values: Vec<f32> = values_buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format(format!(
                "vector `{id}` has a non-finite entry"
            )));
        }
        if out.insert(id.clone(), DenseVector::new(values)).is_some() {
            return Err(Error::DuplicateId(id));
        }
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing).map_err(|e| Error::io(path, e))? != 0 {
        return Err(Error::Format(format!(
            "{}: trailing bytes after {count} records",
            path.display()
        )));
    }
    Ok(out)
}

pub fn write_vectors_text<'a>(
    path: impl AsRef<Path>,
    records: impl IntoIterator<Item = (&'a str, &'a DenseVector)>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for (id, v) in records {
        let mut line = String::from(id);
        for x in v.values() {
            line.push(' ');
            line.push_str(&x.to_string());
        }
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_vectors_binary<'a>(
    path: impl AsRef<Path>,
    dim: usize,
    records: impl ExactSizeIterator<Item = (&'a str, &'a DenseVector)>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    out.write_all(VECTOR_MAGIC).map_err(io)?;
    out.write_all(&VECTOR_VERSION.to_le_bytes()).map_err(io)?;
    out.write_all(&(dim as u32).to_le_bytes()).map_err(io)?;
    out.write_all(&(records.len() as u64).to_le_bytes())
        .map_err(io)?;
    for (id, v) in records {
        if v.dim() != dim {
            return Err(Error::DimensionMismatch {
                id: id.to_string(),
                expected: dim,
                found: v.dim(),
            });
        }
        out.write_all(&(id.len() as u32).to_le_bytes())
            .map_err(io)?;
        out.write_all(id.as_bytes()).map_err(io)?;
        for x in v.values() {
            out.write_all(&x.to_le_bytes()).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}
