//! Binary interchange format for precomputed token embeddings.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! header:  magic [8]u8 = "SAMEMBED" | version u32 = 1 | dim u32
//! record:  id_len u16 | doc_id [id_len]u8 (UTF-8) | section_index u32 |
//!          token_count u32 | values [token_count * dim]f32 (row-major)
//! ```
//!
//! Records follow the header back to back until end of file.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use super::{EmbedError, EmbeddingSource};
use crate::corpus::SectionKey;
use crate::tagging::Token;

pub const MAGIC: &[u8; 8] = b"SAMEMBED";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub key: SectionKey,
    pub vectors: Array2<f32>,
}

/// Embeddings loaded from disk, keyed by section.
#[derive(Debug, Clone, PartialEq)]
pub struct FileEmbeddings {
    dim: usize,
    records: HashMap<SectionKey, Array2<f32>>,
}

impl FileEmbeddings {
    pub fn get(&self, key: &SectionKey) -> Option<&Array2<f32>> {
        self.records.get(key)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn keys(&self) -> impl Iterator<Item = &SectionKey> {
        self.records.keys()
    }
}

impl EmbeddingSource for FileEmbeddings {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, key: &SectionKey, tokens: &[Token]) -> Result<Array2<f32>, EmbedError> {
        let stored = self
            .records
            .get(key)
            .ok_or_else(|| EmbedError::MissingSection { key: key.clone() })?;
        if stored.nrows() != tokens.len() {
            return Err(EmbedError::TokenCountMismatch {
                key: key.clone(),
                stored: stored.nrows(),
                expected: tokens.len(),
            });
        }
        Ok(stored.clone())
    }
}

pub fn write_embedding_file(path: &Path, dim: usize, records: &[EmbeddingRecord]) -> Result<(), EmbedError> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(dim as u32).to_le_bytes());
    for rec in records {
        assert_eq!(rec.vectors.ncols(), dim, "record width differs from file dim");
        let id = rec.key.doc_id.as_bytes();
        buf.extend_from_slice(&(id.len() as u16).to_le_bytes());
        buf.extend_from_slice(id);
        buf.extend_from_slice(&(rec.key.index as u32).to_le_bytes());
        buf.extend_from_slice(&(rec.vectors.nrows() as u32).to_le_bytes());
        for v in rec.vectors.iter() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a str,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], EmbedError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(EmbedError::Truncated {
                path: self.path.to_string(),
                offset: self.bytes.len(),
            }),
        }
    }

    fn u16(&mut self) -> Result<u16, EmbedError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, EmbedError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn load_embedding_file(path: &Path) -> Result<FileEmbeddings, EmbedError> {
    let bytes = std::fs::read(path)?;
    parse_embedding_bytes(&bytes, &path.display().to_string())
}

pub(crate) fn parse_embedding_bytes(bytes: &[u8], path: &str) -> Result<FileEmbeddings, EmbedError> {
    let mut cur = Cursor { bytes, pos: 0, path };
    if cur.take(8).ok() != Some(MAGIC.as_slice()) {
        return Err(EmbedError::BadMagic { path: path.to_string() });
    }
    let version = cur.u32()?;
    if version != FORMAT_VERSION {
        return Err(EmbedError::BadVersion {
            path: path.to_string(),
            version,
        });
    }
    let dim = cur.u32()? as usize;
    if dim == 0 {
        return Err(EmbedError::BadRecord {
            path: path.to_string(),
            offset: 12,
            message: "dim is zero".into(),
        });
    }
    let mut records = HashMap::new();
    while cur.pos < bytes.len() {
        let record_at = cur.pos;
        let id_len = cur.u16()? as usize;
        let id = std::str::from_utf8(cur.take(id_len)?).map_err(|_| EmbedError::BadRecord {
            path: path.to_string(),
            offset: record_at,
            message: "doc id is not UTF-8".into(),
        })?;
        let key = SectionKey {
            doc_id: id.to_string(),
            index: cur.u32()? as usize,
        };
        let rows = cur.u32()? as usize;
        let values_at = cur.pos;
        let raw = cur.take(rows * dim * 4)?;
        let mut values = Vec::with_capacity(rows * dim);
        for (i, chunk) in raw.chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().unwrap());
            if !v.is_finite() {
                return Err(EmbedError::NonFinite {
                    path: path.to_string(),
                    key,
                    offset: values_at + 4 * i,
                });
            }
            values.push(v);
        }
        let matrix = Array2::from_shape_vec((rows, dim), values).expect("shape matches byte count");
        if records.insert(key.clone(), matrix).is_some() {
            return Err(EmbedError::BadRecord {
                path: path.to_string(),
                offset: record_at,
                message: format!("duplicate record for {key}"),
            });
        }
    }
    Ok(FileEmbeddings { dim, records })
}
