//! Episode manifests: one JSON object per line,
//! `{"data_type":"I","context":[7 ids],"candidates":[{"id":..,"category":..}, 6 of them]}`.
//! The embeddings live next to the manifest with the extension `.blme`.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use super::episode::{BlmEpisode, DataType};
use super::store::{read_store, EmbeddingStore};
use crate::error::{Error, Result};
use crate::model::EMBED_DIM;

pub fn read_manifest(path: &Path) -> Result<Vec<BlmEpisode>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let ep: BlmEpisode =
            serde_json::from_str(&line).map_err(|e| Error::format(path, format!("line {}: {e}", n + 1)))?;
        ep.validate().map_err(|e| Error::format(path, format!("line {}: {e}", n + 1)))?;
        out.push(ep);
    }
    Ok(out)
}

pub fn write_manifest(path: &Path, episodes: &[BlmEpisode]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for ep in episodes {
        let line = serde_json::to_string(ep).expect("episodes always serialize");
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// The store path that accompanies a manifest.
pub fn store_path_for(manifest: &Path) -> PathBuf {
    manifest.with_extension("blme")
}

/// Manifest path of a data type inside a data directory.
pub fn manifest_path(data_dir: &Path, data_type: DataType) -> PathBuf {
    data_dir.join(format!("type_{}.jsonl", data_type.name()))
}

/// Check every referenced sentence resolves and the dimension is right.
pub fn check_integrity(episodes: &[BlmEpisode], store: &EmbeddingStore, path: &Path) -> Result<()> {
    if store.dim() != EMBED_DIM {
        return Err(Error::format(path, format!("embedding dim {} but the models expect {EMBED_DIM}", store.dim())));
    }
    let missing = store.missing(episodes.iter().flat_map(BlmEpisode::sentence_ids));
    if !missing.is_empty() {
        return Err(Error::Integrity { missing });
    }
    Ok(())
}

/// Load a manifest and its embedding store with full validation.
pub fn load_dataset(manifest: &Path) -> Result<(Vec<BlmEpisode>, EmbeddingStore)> {
    let episodes = read_manifest(manifest)?;
    let store_path = store_path_for(manifest);
    let store = read_store(&store_path)?;
    check_integrity(&episodes, &store, &store_path)?;
    Ok((episodes, store))
}
