//! Sentence-embedding store and its `BLME` binary format: magic, then
//! `u32` version, count and dim (little-endian), then `count` records of
//! `u16` id length, id bytes and `dim` little-endian `f32`s.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

pub const STORE_MAGIC: &[u8; 4] = b"BLME";
pub const STORE_VERSION: u32 = 1;

/// Id-addressed embedding vectors of one fixed dimension, kept in insertion
/// order so that serialization is reproducible.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    ids: Vec<String>,
    data: Vec<f32>,
    index: HashMap<String, usize>,
}

impl EmbeddingStore {
    pub fn new(dim: usize) -> Self {
        EmbeddingStore { dim, ids: Vec::new(), data: Vec::new(), index: HashMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.index.get(id).map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.ids.iter().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.ids.iter().map(String::as_str).zip(self.data.chunks(self.dim.max(1)))
    }

    pub fn insert(&mut self, id: impl Into<String>, vector: &[f32]) -> Result<()> {
        let id = id.into();
        if vector.len() != self.dim {
            return Err(Error::Data(format!("vector for {id} has length {}, store dim is {}", vector.len(), self.dim)));
        }
        if id.len() > u16::MAX as usize {
            return Err(Error::Data(format!("sentence id longer than {} bytes", u16::MAX)));
        }
        if self.index.contains_key(&id) {
            return Err(Error::Data(format!("duplicate sentence id {id}")));
        }
        self.index.insert(id.clone(), self.ids.len());
        self.ids.push(id);
        self.data.extend_from_slice(vector);
        Ok(())
    }

    /// Ids from `wanted` that the store cannot resolve, deduplicated, in
    /// first-seen order.
    pub fn missing<'a>(&self, wanted: impl IntoIterator<Item = &'a str>) -> Vec<String> {
        let mut seen = std::collections::HashSet::new();
        wanted.into_iter().filter(|id| !self.contains(id) && seen.insert(*id)).map(str::to_string).collect()
    }

    pub fn encode(&self) -> Vec<u8> {
        let ids: usize = self.ids.iter().map(|s| 2 + s.len()).sum();
        let mut out = Vec::with_capacity(16 + ids + 4 * self.data.len());
        out.extend_from_slice(STORE_MAGIC);
        out.extend_from_slice(&STORE_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for (id, v) in self.iter() {
            out.extend_from_slice(&(id.len() as u16).to_le_bytes());
            out.extend_from_slice(id.as_bytes());
            for x in v {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    /// Parse store bytes; `path` is only used in error messages.
    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let fail = |at: usize, what: &str| Error::format(path, format!("{what} at byte {at}"));
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            if bytes.len() - pos < n {
                return Err(fail(pos, "truncated store"));
            }
            pos += n;
            Ok(&bytes[pos - n..pos])
        };
        if take(4)? != STORE_MAGIC {
            return Err(fail(0, "bad magic"));
        }
        let u32_at = |b: &[u8]| u32::from_le_bytes(b.try_into().unwrap());
        let version = u32_at(take(4)?);
        if version != STORE_VERSION {
            return Err(fail(4, &format!("unsupported version {version}")));
        }
        let count = u32_at(take(4)?) as usize;
        let dim = u32_at(take(4)?) as usize;
        let mut store = EmbeddingStore::new(dim);
        let mut v = vec![0f32; dim];
        for _ in 0..count {
            let n = u16::from_le_bytes(take(2)?.try_into().unwrap()) as usize;
            let id =
                std::str::from_utf8(take(n)?).map_err(|_| Error::format(path, "sentence id is not UTF-8"))?.to_string();
            for (x, c) in v.iter_mut().zip(take(4 * dim)?.chunks_exact(4)) {
                *x = f32::from_le_bytes(c.try_into().unwrap());
            }
            store.insert(id, &v).map_err(|e| Error::format(path, e.to_string()))?;
        }
        if pos != bytes.len() {
            return Err(fail(pos, "trailing bytes"));
        }
        Ok(store)
    }
}

pub fn write_store(path: &Path, store: &EmbeddingStore) -> Result<()> {
    std::fs::write(path, store.encode()).map_err(|e| Error::io(path, e))
}

pub fn read_store(path: &Path) -> Result<EmbeddingStore> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    EmbeddingStore::decode(&bytes, path)
}
