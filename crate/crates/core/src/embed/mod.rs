//! Frozen per-token embedding sources.

mod file;

use std::path::PathBuf;
use std::str::FromStr;

use ndarray::{concatenate, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::SectionKey;
use crate::tagging::Token;

pub use file::{load_embedding_file, write_embedding_file, EmbeddingRecord, FileEmbeddings, FORMAT_VERSION, MAGIC};

/// Default piece length for encoders with a bounded input size.
pub const DEFAULT_MAX_LEN: usize = 512;

#[derive(Debug, thiserror::Error)]
pub enum EmbedError {
    #[error("{path}: bad magic bytes")]
    BadMagic { path: String },
    #[error("{path}: unsupported format version {version}")]
    BadVersion { path: String, version: u32 },
    #[error("{path}: truncated file at byte {offset}")]
    Truncated { path: String, offset: usize },
    #[error("{path}: non-finite value in record {key} at byte {offset}")]
    NonFinite { path: String, key: SectionKey, offset: usize },
    #[error("{path}: invalid record at byte {offset}: {message}")]
    BadRecord { path: String, offset: usize, message: String },
    #[error("{key}: embedding file has {stored} tokens, tokenizer produced {expected}")]
    TokenCountMismatch { key: SectionKey, stored: usize, expected: usize },
    #[error("{key}: no embeddings stored for this section")]
    MissingSection { key: SectionKey },
    #[error("embedding function returned {got} rows for {expected} tokens")]
    RowCount { got: usize, expected: usize },
    #[error("bad embedding spec `{0}` (expected hash:DIM:SEED or file:PATH)")]
    BadSpec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A frozen token embedder. Implementations are read-only after construction.
pub trait EmbeddingSource: Send + Sync {
    fn dim(&self) -> usize;

    /// One row per token of the given section.
    fn embed(&self, key: &SectionKey, tokens: &[Token]) -> Result<Array2<f32>, EmbedError>;
}

/// Deterministic, context-free stand-in for a pretrained encoder: every
/// token maps to a pseudo-random unit vector seeded by its lowercased text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashEmbedder {
    pub dim: usize,
    pub seed: u64,
    pub max_len: usize,
}

impl HashEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim >= 1, "embedding dim must be positive");
        Self {
            dim,
            seed,
            max_len: DEFAULT_MAX_LEN,
        }
    }
}

impl EmbeddingSource for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, _key: &SectionKey, tokens: &[Token]) -> Result<Array2<f32>, EmbedError> {
        let texts: Vec<&str> = tokens.iter().map(|t| t.text.as_str()).collect();
        embed_piecewise(|piece: &[&str]| Ok(hash_embed(piece, self.dim, self.seed)), &texts, self.max_len)
    }
}

fn fnv1a(bytes: &[u8], seed: u64) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// `[n_tokens x dim]` matrix of unit-norm rows.
pub fn hash_embed<S: AsRef<str>>(tokens: &[S], dim: usize, seed: u64) -> Array2<f32> {
    let mut out = Array2::<f32>::zeros((tokens.len(), dim));
    for (mut row, tok) in out.rows_mut().into_iter().zip(tokens) {
        let lower = tok.as_ref().to_lowercase();
        let mut rng = ChaCha8Rng::seed_from_u64(fnv1a(lower.as_bytes(), seed));
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        for (dst, x) in row.iter_mut().zip(&v) {
            *dst = (x / norm) as f32;
        }
    }
    out
}

/// Embeds consecutive pieces of at most `max_len` tokens independently and
/// stacks the results.
pub fn embed_piecewise<T, F>(mut embed_fn: F, tokens: &[T], max_len: usize) -> Result<Array2<f32>, EmbedError>
where
    F: FnMut(&[T]) -> Result<Array2<f32>, EmbedError>,
{
    assert!(max_len >= 1, "max_len must be positive");
    if tokens.len() <= max_len {
        let out = embed_fn(tokens)?;
        return check_rows(out, tokens.len());
    }
    let pieces = tokens
        .chunks(max_len)
        .map(|piece| embed_fn(piece).and_then(|m| check_rows(m, piece.len())))
        .collect::<Result<Vec<_>, _>>()?;
    let views: Vec<_> = pieces.iter().map(|p| p.view()).collect();
    Ok(concatenate(Axis(0), &views).expect("pieces share the embedding width"))
}

fn check_rows(m: Array2<f32>, expected: usize) -> Result<Array2<f32>, EmbedError> {
    if m.nrows() == expected {
        Ok(m)
    } else {
        Err(EmbedError::RowCount {
            got: m.nrows(),
            expected,
        })
    }
}

/// `hash:DIM:SEED` or `file:PATH`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EmbeddingSpec {
    Hash { dim: usize, seed: u64 },
    File(PathBuf),
}

impl FromStr for EmbeddingSpec {
    type Err = EmbedError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || EmbedError::BadSpec(s.to_string());
        if let Some(path) = s.strip_prefix("file:") {
            return Ok(EmbeddingSpec::File(PathBuf::from(path)));
        }
        let rest = s.strip_prefix("hash:").ok_or_else(bad)?;
        let (dim, seed) = rest.split_once(':').ok_or_else(bad)?;
        let dim: usize = dim.parse().map_err(|_| bad())?;
        if dim == 0 {
            return Err(bad());
        }
        Ok(EmbeddingSpec::Hash {
            dim,
            seed: seed.parse().map_err(|_| bad())?,
        })
    }
}

impl std::fmt::Display for EmbeddingSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EmbeddingSpec::Hash { dim, seed } => write!(f, "hash:{dim}:{seed}"),
            EmbeddingSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl EmbeddingSpec {
    pub fn open(&self) -> Result<Box<dyn EmbeddingSource>, EmbedError> {
        Ok(match self {
            EmbeddingSpec::Hash { dim, seed } => Box::new(HashEmbedder::new(*dim, *seed)),
            EmbeddingSpec::File(path) => Box::new(load_embedding_file(path)?),
        })
    }
}
