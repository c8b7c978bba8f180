//! Synthetic record bodies and the name tables they refer to.
//!
//! The body layout imitates what live records look like (binary fields up
//! front, then strings closed by `0x00` and introduced by `0x01`) but is our
//! own invention:
//!
//! ```text
//! 02 <kind>
//! 1B <cnid u64 BE> 1C <parent cnid u64 BE> 1D <uti u32 BE> 1E <time f64 LE> 1F
//! ( 01 <attr tag> <utf-8 value> 00 )*
//! ```
//!
//! Every binary field is followed by a marker byte that is neither
//! printable nor a terminator, so no binary field can be mistaken for a
//! string.

use crate::codec::{AttributeEntry, UtiEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Configuration,
    Root,
    Folder,
    File,
}

impl RecordKind {
    fn code(self) -> u8 {
        match self {
            Self::Configuration => 2,
            Self::Root => 3,
            Self::Folder => 4,
            Self::File => 5,
        }
    }
}

/// `(record number, name)`; record numbers double as string tags in
/// record bodies, so they stay within 1..=30.
pub const ATTRIBUTES: &[(u32, &str)] = &[
    (1, "kMDItemFSName"),
    (2, "kMDItemDisplayName"),
    (3, "kMDItemContentType"),
    (4, "kMDItemKind"),
    (5, "kMDItemAuthors"),
    (6, "kMDItemTitle"),
    (7, "kMDItemSubject"),
    (8, "kMDItemKeywords"),
    (9, "kMDItemComment"),
    (10, "kMDItemOrganizations"),
    (11, "kMDItemCreator"),
    (12, "kMDItemWhereFroms"),
    (13, "kMDItemVersion"),
    (14, "kMDStoreConfiguration"),
];

pub const ATTR_FS_NAME: u32 = 1;
pub const ATTR_CONTENT_TYPE: u32 = 3;
pub const ATTR_STORE_CONFIGURATION: u32 = 14;

/// Flag bytes written for every attribute entry. Opaque to readers.
pub const ATTRIBUTE_FLAGS: [u8; 2] = [0x00, 0x04];

pub fn attribute_number(name: &str) -> Option<u32> {
    ATTRIBUTES.iter().find(|(_, n)| *n == name).map(|(i, _)| *i)
}

pub fn attribute_entries() -> Vec<AttributeEntry> {
    ATTRIBUTES
        .iter()
        .map(|&(record_number, name)| AttributeEntry {
            record_number,
            flags: ATTRIBUTE_FLAGS.to_vec(),
            name: name.to_owned(),
        })
        .collect()
}

/// `(record number, uti, language code)`.
pub const UTIS: &[(u32, &str, Option<&str>)] = &[
    (1, "public.message", None),
    (2, "com.apple.mail.emlx", None),
    (3, "public.folder", None),
    (4, "public.plain-text", None),
    (5, "org.openxmlformats.wordprocessingml.document", None),
    (6, "public.jpeg", None),
    (7, "com.adobe.pdf", None),
    (8, "com.apple.property-list", None),
    (9, "public.data", None),
    (10, "com.apple.application-bundle", Some("en")),
    (11, "public.volume", Some("en_GB")),
];

pub const UTI_FOLDER: u32 = 3;
pub const UTI_PROPERTY_LIST: u32 = 8;
pub const UTI_DATA: u32 = 9;
pub const UTI_VOLUME: u32 = 11;

pub fn uti_entries() -> Vec<UtiEntry> {
    UTIS.iter()
        .map(|&(record_number, uti, lang)| UtiEntry {
            record_number,
            uti: uti.to_owned(),
            language_code: lang.map(str::to_owned),
        })
        .collect()
}

pub fn uti_name(number: u32) -> &'static str {
    UTIS.iter()
        .find(|(n, _, _)| *n == number)
        .map_or("public.data", |(_, u, _)| u)
}

pub fn uti_for_name(name: &str) -> u32 {
    let ext = name.rsplit_once('.').map(|(_, e)| e.to_ascii_lowercase());
    match ext.as_deref() {
        Some("eml") => 1,
        Some("emlx") => 2,
        Some("txt") => 4,
        Some("docx") => 5,
        Some("jpg" | "jpeg") => 6,
        Some("pdf") => 7,
        Some("plist") => 8,
        Some("app") => 10,
        _ => UTI_DATA,
    }
}

/// Whether `value` can be stored as a record string.
pub fn is_storable(value: &str) -> bool {
    !value.is_empty() && value.chars().all(|c| !c.is_control())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthRecord {
    pub kind: RecordKind,
    pub cnid: u64,
    pub parent_cnid: u64,
    pub uti: u32,
    /// Seconds since 2001-01-01.
    pub timestamp: f64,
    /// `(attribute number, value)`, encoded in this order.
    pub strings: Vec<(u32, String)>,
}

impl SynthRecord {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(48 + self.strings.iter().map(|(_, s)| s.len() + 3).sum::<usize>());
        out.extend([0x02, self.kind.code(), 0x1b]);
        out.extend(self.cnid.to_be_bytes());
        out.push(0x1c);
        out.extend(self.parent_cnid.to_be_bytes());
        out.push(0x1d);
        out.extend(self.uti.to_be_bytes());
        out.push(0x1e);
        out.extend(self.timestamp.to_le_bytes());
        out.push(0x1f);
        for (attr, value) in &self.strings {
            debug_assert!((1..=30).contains(attr));
            out.push(0x01);
            out.push(*attr as u8 + 1);
            out.extend(value.as_bytes());
            out.push(0x00);
        }
        out
    }
}

/// Single-line property list carried by the configuration record.
pub fn configuration_plist(guid: &str) -> String {
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?><!DOCTYPE plist PUBLIC \"-//Apple//DTD PLIST 1.0//EN\" \
         \"http://www.apple.com/DTDs/PropertyList-1.0.dtd\"><plist version=\"1.0\"><dict>\
         <key>StoreUUID</key><string>{guid}</string><key>Version</key><integer>2</integer>\
         </dict></plist>"
    )
}
