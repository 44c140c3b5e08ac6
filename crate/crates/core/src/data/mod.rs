//! Episodes, embedding stores, manifests, splits and the synthetic generator.

mod episode;
mod manifest;
mod reshape;
mod split;
mod store;
pub mod synthetic;

pub use episode::{BlmEpisode, Candidate, Category, DataType, CANDIDATES, CONTEXT_LEN};
pub use manifest::{check_integrity, load_dataset, manifest_path, read_manifest, store_path_for, write_manifest};
pub use reshape::{flatten_embedding, reshape_embedding};
pub use split::{dev_size, split_dataset, subsample_train, test_size, DataSplit, RESTRICTED_TOTAL};
pub use store::{read_store, write_store, EmbeddingStore, STORE_MAGIC, STORE_VERSION};
pub use synthetic::generate_synthetic;
