//! Synthetic stores and a lifecycle simulator used as a test oracle.
//!
//! Generated stores are structurally conforming (signatures, page sizes,
//! size-marker framing, zlib payloads, name tables) but the bytes inside
//! each record are a synthetic encoding, see [`record`].

mod model;
pub mod pages;
pub mod record;
mod unalloc;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use model::{FileEvent, FreedPage, LivePage, LoggedEvent, RecordDelta, Slot, StoreModel};
pub use unalloc::{export_unallocated, plant, Placement, UnallocatedImage};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SynthError {
    #[error("store needs more than {budget} data pages")]
    SpecTooLarge { budget: usize },
    #[error("no live item at {0:?}")]
    UnknownTarget(String),
    #[error("{0:?} already exists")]
    DuplicateName(String),
    #[error("invalid item name {0:?}")]
    InvalidName(String),
    #[error("unknown attribute {0:?}")]
    UnknownAttribute(String),
    #[error("attribute {0:?} is set by the generator")]
    ReservedAttribute(String),
    #[error("value for {0:?} cannot be stored as a record string")]
    UnstorableValue(String),
    #[error("record for {0:?} does not fit in one page")]
    RecordTooLarge(String),
    #[error("folder {0:?} is not empty")]
    FolderNotEmpty(String),
}

pub type Result<T, E = SynthError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileSpec {
    pub name: String,
    /// Slash-separated folder path; empty for the volume root.
    #[serde(default)]
    pub parent: String,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FolderSpec {
    pub name: String,
    #[serde(default)]
    pub parent: String,
    #[serde(default)]
    pub attributes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreSpec {
    #[serde(default)]
    pub files: Vec<FileSpec>,
    #[serde(default)]
    pub folders: Vec<FolderSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_volume_name")]
    pub volume_name: String,
}

fn default_volume_name() -> String {
    "Untitled".to_owned()
}

impl StoreSpec {
    pub fn empty(seed: u64) -> Self {
        Self {
            seed,
            volume_name: default_volume_name(),
            ..Self::default()
        }
    }
}

/// Records a store holding `files` files and `folders` folders contains.
pub fn expected_record_count(files: usize, folders: usize) -> usize {
    files + folders + 2
}

/// Builds the `store.db` image for `spec`.
pub fn build_store(spec: &StoreSpec) -> Result<Vec<u8>> {
    Ok(StoreModel::from_spec(spec)?.emit())
}

/// Joins a parent folder path and a name.
pub fn join_path(parent: &str, name: &str) -> String {
    let parent = normalize_path(parent);
    if parent.is_empty() {
        name.to_owned()
    } else {
        format!("{parent}/{name}")
    }
}

/// Strips leading and trailing slashes; the root becomes `""`.
pub fn normalize_path(path: &str) -> String {
    path.trim_matches('/').to_owned()
}
