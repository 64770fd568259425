use std::borrow::Cow;
use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Source of pre-trained token vectors.
pub trait EmbeddingProvider: Send + Sync {
    fn dimension(&self) -> usize;

    /// `None` for out-of-vocabulary tokens.
    fn lookup(&self, token: &str) -> Option<Cow<'_, [f64]>>;
}

/// Token vectors loaded from a text table.
///
/// Format: first line `DIM <d>`, then one `token<TAB>v1 v2 ... vd` per line.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dimension: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            vectors: HashMap::new(),
        }
    }

    pub fn insert(&mut self, token: impl Into<String>, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dimension {
            return Err(Error::shape(
                "embedding insert",
                (1, self.dimension),
                (1, vector.len()),
            ));
        }
        self.vectors.insert(token.into(), vector);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, first) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "missing \"DIM <d>\" header".into(),
        })?;
        let dimension = first
            .trim()
            .strip_prefix("DIM")
            .and_then(|d| d.trim().parse::<usize>().ok())
            .filter(|&d| d > 0)
            .ok_or_else(|| Error::Parse {
                line: 1,
                message: format!("expected \"DIM <d>\", found {first:?}"),
            })?;
        let mut table = Self::new(dimension);
        for (i, line) in lines {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                line: line_no,
                message,
            };
            let (token, values) = line
                .split_once('\t')
                .ok_or_else(|| err("expected token, TAB, values".into()))?;
            if token.is_empty() {
                return Err(err("empty token".into()));
            }
            let vector = values
                .split_whitespace()
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|e| err(format!("bad value {v:?}: {e}")))
                })
                .collect::<Result<Vec<f64>>>()?;
            if vector.len() != dimension {
                return Err(err(format!(
                    "expected {dimension} values, found {}",
                    vector.len()
                )));
            }
            if vector.iter().any(|v| !v.is_finite()) {
                return Err(err("non-finite value".into()));
            }
            if table.vectors.insert(token.to_string(), vector).is_some() {
                return Err(err(format!("duplicate token {token:?}")));
            }
        }
        Ok(table)
    }

    pub fn to_text(&self) -> String {
        let mut tokens: Vec<&String> = self.vectors.keys().collect();
        tokens.sort();
        let mut out = format!("DIM {}\n", self.dimension);
        for t in tokens {
            let values: Vec<String> = self.vectors[t].iter().map(|v| format!("{v:?}")).collect();
            out.push_str(t);
            out.push('\t');
            out.push_str(&values.join(" "));
            out.push('\n');
        }
        out
    }
}

impl EmbeddingProvider for EmbeddingTable {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn lookup(&self, token: &str) -> Option<Cow<'_, [f64]>> {
        self.vectors.get(token).map(|v| Cow::Borrowed(v.as_slice()))
    }
}

pub fn load_embedding_table(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    EmbeddingTable::parse(&fs::read_to_string(path)?)
}

/// Deterministic stand-in for a pre-trained table: every token maps to a
/// unit-norm vector drawn from a generator seeded by SHA-256(seed, token).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashEmbedder {
    dimension: usize,
    seed: u64,
}

impl HashEmbedder {
    pub fn new(dimension: usize, seed: u64) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        Self { dimension, seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn vector(&self, token: &str) -> Vec<f64> {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update((self.dimension as u64).to_le_bytes());
        hasher.update(token.as_bytes());
        let digest: [u8; 32] = hasher.finalize().into();
        let mut rng = ChaCha8Rng::from_seed(digest);
        loop {
            let v: Vec<f64> = (0..self.dimension)
                .map(|_| rng.gen_range(-1.0..1.0))
                .collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                return v.into_iter().map(|x| x / norm).collect();
            }
        }
    }
}

pub fn hash_embedder(dimension: usize, seed: u64) -> HashEmbedder {
    HashEmbedder::new(dimension, seed)
}

impl EmbeddingProvider for HashEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn lookup(&self, token: &str) -> Option<Cow<'_, [f64]>> {
        Some(Cow::Owned(self.vector(token)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_embedder_is_deterministic_unit_norm() {
        let e = hash_embedder(128, 7);
        let a = e.lookup("love").unwrap().into_owned();
        let b = e.lookup("love").unwrap().into_owned();
        assert_eq!(a, b);
        assert_eq!(a.len(), 128);
        let norm: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        assert_ne!(a, e.vector("hate"));
        assert_ne!(a, hash_embedder(128, 8).vector("love"));
    }

    #[test]
    fn parses_table() {
        let values: Vec<String> = (0..128).map(|i| format!("{}", i as f64 * 0.01)).collect();
        let text = format!("DIM 128\nlove\t{}\n", values.join(" "));
        let t = EmbeddingTable::parse(&text).unwrap();
        let v = t.lookup("love").unwrap();
        assert_eq!(v.len(), 128);
        assert_eq!(v[2], 0.02);
        assert!(t.lookup("hate").is_none());
        assert_eq!(EmbeddingTable::parse(&t.to_text()).unwrap(), t);
    }

    #[test]
    fn table_errors_carry_line_numbers() {
        let bad_header = EmbeddingTable::parse("DIMENSION 3\n").unwrap_err();
        assert!(matches!(bad_header, Error::Parse { line: 1, .. }));
        let short = EmbeddingTable::parse("DIM 3\na\t1 2 3\n\nb\t1 2\n").unwrap_err();
        assert!(matches!(short, Error::Parse { line: 4, .. }), "{short}");
        let bad = EmbeddingTable::parse("DIM 2\na\t1 x\n").unwrap_err();
        assert!(matches!(bad, Error::Parse { line: 2, .. }));
        let dup = EmbeddingTable::parse("DIM 1\na\t1\na\t2\n").unwrap_err();
        assert!(matches!(dup, Error::Parse { line: 3, .. }));
    }
}
