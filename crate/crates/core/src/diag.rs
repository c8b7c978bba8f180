use serde::Serialize;
use std::fmt;

/// Recoverable structural anomaly found while reading a store or table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub offset: u64,
    pub kind: WarningKind,
    pub message: String,
}

impl Diagnostic {
    pub fn new(offset: u64, kind: WarningKind, message: impl Into<String>) -> Self {
        Self {
            offset,
            kind,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "@{:#x} {:?}: {}", self.offset, self.kind, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningKind {
    NonCanonicalHeaderSize,
    VolumePathSuffix,
    MissingMap,
    NonCanonicalPageSize,
    MapCountMismatch,
    EntryRegionTruncated,
    MapInconsistent,
    AlternateDataMagic,
    TruncatedStore,
    Slack,
    MalformedEntry,
}

/// A value together with the warnings raised while producing it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Checked<T> {
    pub value: T,
    pub warnings: Vec<Diagnostic>,
}

impl<T> Checked<T> {
    pub fn clean(value: T) -> Self {
        Self {
            value,
            warnings: Vec::new(),
        }
    }
}
