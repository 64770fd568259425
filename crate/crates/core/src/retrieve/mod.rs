//! Content-embedding store and exact cosine top-k search.
//!
//! Store file layout, integers little-endian:
//!
//! ```text
//! "SAGS" | version u32 | dimension u32 | count u64
//! count × ( metadata length u32 | metadata JSON | dimension × f64 )
//! CRC-32 of all preceding bytes
//! ```

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{prepare_record, Corpus, EmbeddingProvider};
use crate::persist::{check_header, seal, unseal, write_atomic, Reader};
use crate::train::Checkpoint;

pub const STORE_MAGIC: &[u8; 4] = b"SAGS";
pub const STORE_VERSION: u32 = 1;
/// Retrieval depth used when the caller does not choose one.
pub const DEFAULT_K: usize = 4;

/// Descriptive fields stored alongside each vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrackMeta {
    pub artist: String,
    pub title: String,
    pub genre: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoreEntry {
    pub id: String,
    pub meta: TrackMeta,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryHit {
    pub id: String,
    pub artist: String,
    pub title: String,
    pub genre: String,
    pub similarity: f64,
}

/// Hits ordered by descending similarity, ties by ascending id.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct QueryResult {
    pub hits: Vec<QueryHit>,
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape(
            "cosine_similarity",
            (1, a.len()),
            (1, b.len()),
        ));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Metric("cosine similarity of a zero vector".into()));
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dimension: usize,
    entries: Vec<StoreEntry>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct EntryHeader {
    id: String,
    #[serde(flatten)]
    meta: TrackMeta,
}

impl EmbeddingStore {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            entries: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[StoreEntry] {
        &self.entries
    }

    pub fn get(&self, id: &str) -> Option<&StoreEntry> {
        self.index.get(id).map(|&i| &self.entries[i])
    }

    pub fn add(&mut self, id: impl Into<String>, meta: TrackMeta, vector: Vec<f64>) -> Result<()> {
        let id = id.into();
        if vector.len() != self.dimension {
            return Err(Error::shape(
                "store add",
                (1, self.dimension),
                (1, vector.len()),
            ));
        }
        if self.index.contains_key(&id) {
            return Err(Error::Store(format!("duplicate id {id:?}")));
        }
        if vector.iter().all(|&v| v == 0.0) {
            return Err(Error::Metric(format!("entry {id:?} has a zero vector")));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::Store(format!("entry {id:?} has non-finite values")));
        }
        self.index.insert(id.clone(), self.entries.len());
        self.entries.push(StoreEntry { id, meta, vector });
        Ok(())
    }

    /// Exact top-k by cosine similarity over every entry. `exclude` drops
    /// one id (typically the query's own). `k` larger than the store
    /// returns everything ranked.
    pub fn top_k(&self, query: &[f64], k: usize, exclude: Option<&str>) -> Result<QueryResult> {
        if k == 0 {
            return Err(Error::Contract("k must be at least 1".into()));
        }
        if self.entries.is_empty() {
            return Err(Error::Store("store is empty".into()));
        }
        if query.len() != self.dimension {
            return Err(Error::shape(
                "top_k query",
                (1, query.len()),
                (1, self.dimension),
            ));
        }
        let mut scored = self
            .entries
            .iter()
            .filter(|e| Some(e.id.as_str()) != exclude)
            .map(|e| Ok((cosine_similarity(query, &e.vector)?, e)))
            .collect::<Result<Vec<_>>>()?;
        scored.sort_by(|(sa, a), (sb, b)| {
            sb.partial_cmp(sa)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.id.cmp(&b.id))
        });
        scored.truncate(k);
        Ok(QueryResult {
            hits: scored
                .into_iter()
                .map(|(similarity, e)| QueryHit {
                    id: e.id.clone(),
                    artist: e.meta.artist.clone(),
                    title: e.meta.title.clone(),
                    genre: e.meta.genre.clone(),
                    similarity,
                })
                .collect(),
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let dim = u32::try_from(self.dimension)
            .map_err(|_| Error::Store("dimension exceeds u32".into()))?;
        let mut out = Vec::with_capacity(20 + self.entries.len() * (64 + 8 * self.dimension));
        out.extend_from_slice(STORE_MAGIC);
        out.extend_from_slice(&STORE_VERSION.to_le_bytes());
        out.extend_from_slice(&dim.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        for e in &self.entries {
            let header = EntryHeader {
                id: e.id.clone(),
                meta: e.meta.clone(),
            };
            let json = serde_json::to_vec(&header).map_err(|err| Error::Format(err.to_string()))?;
            let len = u32::try_from(json.len())
                .map_err(|_| Error::Store(format!("metadata of {:?} too large", e.id)))?;
            out.extend_from_slice(&len.to_le_bytes());
            out.extend_from_slice(&json);
            for v in &e.vector {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(seal(out))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        check_header(&mut Reader::new(bytes), STORE_MAGIC, STORE_VERSION)?;
        let body = unseal(bytes)?;
        let mut r = Reader::new(body);
        check_header(&mut r, STORE_MAGIC, STORE_VERSION)?;
        let dimension = r.u32()? as usize;
        let count = r.u64()?;
        let mut store = Self::new(dimension);
        for _ in 0..count {
            let len = r.u32()? as usize;
            let header: EntryHeader = serde_json::from_slice(r.take(len)?)
                .map_err(|e| Error::Integrity(format!("bad entry metadata: {e}")))?;
            let vector = r.f64s(dimension)?;
            store
                .add(header.id, header.meta, vector)
                .map_err(|e| Error::Integrity(e.to_string()))?;
        }
        if r.remaining() != 0 {
            return Err(Error::Integrity(format!(
                "{} trailing bytes",
                r.remaining()
            )));
        }
        Ok(store)
    }
}

pub fn save_store(store: &EmbeddingStore, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path, &store.to_bytes()?)
}

pub fn load_store(path: impl AsRef<Path>) -> Result<EmbeddingStore> {
    EmbeddingStore::from_bytes(&fs::read(path)?)
}

/// Content embedding of every admitted corpus record.
pub fn build_store(
    checkpoint: &Checkpoint,
    corpus: &Corpus,
    provider: &dyn EmbeddingProvider,
) -> Result<EmbeddingStore> {
    use rayon::prelude::*;

    let model = checkpoint.model();
    let shape = checkpoint.config.input_shape();
    let admitted: Vec<_> = corpus.admitted().collect();
    if admitted.is_empty() {
        return Err(Error::Config(
            "no corpus records pass the admission filters".into(),
        ));
    }
    let vectors = admitted
        .par_iter()
        .map(|r| {
            let input = prepare_record(r, provider, shape)?;
            Ok(model.forward(&input)?.content.into_vec())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut store = EmbeddingStore::new(checkpoint.config.content_dim());
    for (r, v) in admitted.into_iter().zip(vectors) {
        let meta = TrackMeta {
            artist: r.artist().to_string(),
            title: r.title().to_string(),
            genre: r.genre().to_string(),
        };
        store.add(r.id(), meta, v)?;
    }
    Ok(store)
}
