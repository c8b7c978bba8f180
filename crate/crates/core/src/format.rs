//! On-disk vocabulary of a Store-V2 `store.db`.
//!
//! A store is a sequence of pages. Each page starts with a 4-byte
//! signature at relative offset 0:
//!
//! | tag    | page        | notes                                   |
//! |--------|-------------|-----------------------------------------|
//! | `8tsd` | header      | 4096 bytes, size at offset 36, path at 324 |
//! | `2mbd` | map         | page directory, 16-byte entries from 32 |
//! | `2pbd` | data        | 16,384 bytes, 20-byte header            |
//!
//! All fixed fields are little-endian.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const HEADER_MAGIC: [u8; 4] = *b"8tsd";
pub const MAP_MAGIC: [u8; 4] = *b"2mbd";
pub const DATA_MAGIC: [u8; 4] = *b"2pbd";

/// Canonical header page length.
pub const HEADER_PAGE_SIZE: u32 = 4096;
/// Canonical map and data page length.
pub const DATA_PAGE_SIZE: u32 = 16_384;
/// Value of the map page's type field.
pub const MAP_PAGE_TYPE: u32 = 12;

pub const HEADER_SIZE_OFFSET: usize = 36;
pub const HEADER_PATH_OFFSET: usize = 324;

pub const MAP_PAGE_SIZE_OFFSET: usize = 4;
pub const MAP_PAGE_COUNT_OFFSET: usize = 8;
pub const MAP_PAGE_TYPE_OFFSET: usize = 12;
pub const MAP_ENTRIES_OFFSET: usize = 32;
pub const MAP_ENTRY_LEN: usize = 16;

pub const DATA_PHYSICAL_SIZE_OFFSET: usize = 4;
pub const DATA_ALLOCATED_SIZE_OFFSET: usize = 8;
pub const DATA_SUBTYPE_OFFSET: usize = 12;
pub const DATA_SIZE2_OFFSET: usize = 16;
pub const DATA_PAYLOAD_OFFSET: usize = 20;

/// Attribute-name and UTI tables keep their entries from this page offset.
pub const TABLE_ENTRIES_OFFSET: usize = 32;

/// Bytes needed to classify a page.
pub const CLASSIFY_LEN: usize = 20;

/// Number of map entries that fit in a canonical map page.
pub const MAP_CAPACITY: usize = (DATA_PAGE_SIZE as usize - MAP_ENTRIES_OFFSET) / MAP_ENTRY_LEN;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("input too short: need {needed} bytes, got {got}")]
    InputTooShort { needed: usize, got: usize },
    #[error("read of 4 bytes at offset {offset} is out of bounds (length {len})")]
    OutOfBounds { offset: usize, len: usize },
    #[error("not a header page")]
    NotAHeader,
    #[error("not a map page")]
    NotAMap,
    #[error("not a data page")]
    NotADataPage,
}

pub type Result<T, E = FormatError> = std::result::Result<T, E>;

/// Reads a little-endian `u32` at `offset`.
pub fn read_u32_le(bytes: &[u8], offset: usize) -> Result<u32> {
    let end = offset
        .checked_add(4)
        .filter(|&end| end <= bytes.len())
        .ok_or(FormatError::OutOfBounds {
            offset,
            len: bytes.len(),
        })?;
    let mut word = [0u8; 4];
    word.copy_from_slice(&bytes[offset..end]);
    Ok(u32::from_le_bytes(word))
}

pub(crate) fn put_u32_le(buf: &mut [u8], offset: usize, value: u32) {
    buf[offset..offset + 4].copy_from_slice(&value.to_le_bytes());
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PageSignature {
    Header,
    Map,
    Data,
}

impl PageSignature {
    pub fn from_tag(tag: &[u8]) -> Option<Self> {
        match tag.get(..4)? {
            t if t == HEADER_MAGIC => Some(Self::Header),
            t if t == MAP_MAGIC => Some(Self::Map),
            t if t == DATA_MAGIC => Some(Self::Data),
            _ => None,
        }
    }

    pub fn tag(self) -> [u8; 4] {
        match self {
            Self::Header => HEADER_MAGIC,
            Self::Map => MAP_MAGIC,
            Self::Data => DATA_MAGIC,
        }
    }
}

/// Role of a data page, taken from offset 12.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Subtype {
    MetadataRecords,
    AttributeTable,
    UtiTable,
    Unknown(u32),
}

impl Subtype {
    pub fn from_raw(raw: u32) -> Self {
        match raw {
            9 => Self::MetadataRecords,
            17 => Self::AttributeTable,
            33 => Self::UtiTable,
            other => Self::Unknown(other),
        }
    }

    pub fn raw(self) -> u32 {
        match self {
            Self::MetadataRecords => 9,
            Self::AttributeTable => 17,
            Self::UtiTable => 33,
            Self::Unknown(other) => other,
        }
    }
}

impl Serialize for Subtype {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_u32(self.raw())
    }
}

impl<'de> Deserialize<'de> for Subtype {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        u32::deserialize(d).map(Self::from_raw)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PageKind {
    Header,
    Map,
    Data(Subtype),
    NotAPage,
}

/// A classification plus whether a data page was recognised through the
/// map signature (`2mbd` with a page type other than 12).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Classification {
    pub kind: PageKind,
    pub map_magic_data: bool,
}

/// Classifies a page from its first 20 bytes.
pub fn classify_page(bytes: &[u8]) -> Result<PageKind> {
    classify_page_detailed(bytes).map(|c| c.kind)
}

pub fn classify_page_detailed(bytes: &[u8]) -> Result<Classification> {
    if bytes.len() < CLASSIFY_LEN {
        return Err(FormatError::InputTooShort {
            needed: CLASSIFY_LEN,
            got: bytes.len(),
        });
    }
    // bounds were checked above
    let word12 = read_u32_le(bytes, DATA_SUBTYPE_OFFSET)?;
    let (kind, map_magic_data) = match PageSignature::from_tag(bytes) {
        Some(PageSignature::Header) => (PageKind::Header, false),
        Some(PageSignature::Data) => (PageKind::Data(Subtype::from_raw(word12)), false),
        Some(PageSignature::Map) if word12 == MAP_PAGE_TYPE => (PageKind::Map, false),
        Some(PageSignature::Map) => (PageKind::Data(Subtype::from_raw(word12)), true),
        None => (PageKind::NotAPage, false),
    };
    Ok(Classification {
        kind,
        map_magic_data,
    })
}

/// Decoded header page.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoreHeader {
    pub header_page_size: u32,
    /// Path to the store on its volume; undecodable bytes appear as `\xNN`.
    pub volume_path: Option<String>,
    /// Everything after the path terminator up to the end of the header page.
    pub raw_tail: Vec<u8>,
}

impl StoreHeader {
    /// Serializes into a page of `header_page_size` bytes (at least large
    /// enough to hold the path and tail).
    pub fn encode(&self) -> Vec<u8> {
        let path = self
            .volume_path
            .as_deref()
            .map(unescape_path)
            .unwrap_or_default();
        let needed = HEADER_PATH_OFFSET + path.len() + 1 + self.raw_tail.len();
        let len = (self.header_page_size as usize).max(needed);
        let mut page = vec![0u8; len];
        page[..4].copy_from_slice(&HEADER_MAGIC);
        put_u32_le(&mut page, HEADER_SIZE_OFFSET, self.header_page_size);
        let mut cursor = HEADER_PATH_OFFSET;
        page[cursor..cursor + path.len()].copy_from_slice(&path);
        cursor += path.len() + 1;
        page[cursor..cursor + self.raw_tail.len()].copy_from_slice(&self.raw_tail);
        page
    }
}

/// Decodes a terminator-delimited byte string. Printable ASCII is kept,
/// everything else is written as `\xNN`; a literal backslash becomes `\\`.
pub fn decode_path_bytes(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len());
    for &b in bytes {
        match b {
            b'\\' => out.push_str("\\\\"),
            0x20..=0x7e => out.push(b as char),
            _ => out.push_str(&format!("\\x{b:02x}")),
        }
    }
    out
}

fn unescape_path(text: &str) -> Vec<u8> {
    let bytes = text.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'\\' {
            if bytes.get(i + 1) == Some(&b'\\') {
                out.push(b'\\');
                i += 2;
                continue;
            }
            if bytes.get(i + 1) == Some(&b'x') {
                if let Some(v) = text
                    .get(i + 2..i + 4)
                    .and_then(|h| u8::from_str_radix(h, 16).ok())
                {
                    out.push(v);
                    i += 4;
                    continue;
                }
            }
        }
        out.push(bytes[i]);
        i += 1;
    }
    out
}

/// One 16-byte page-directory entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MapEntry {
    pub data_page_size: u32,
    /// Undeciphered; carried through untouched.
    pub unknown: [u8; 12],
}

impl MapEntry {
    pub fn decode(bytes: &[u8; MAP_ENTRY_LEN]) -> Self {
        let mut unknown = [0u8; 12];
        unknown.copy_from_slice(&bytes[4..]);
        Self {
            data_page_size: u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]),
            unknown,
        }
    }

    pub fn encode(&self) -> [u8; MAP_ENTRY_LEN] {
        let mut out = [0u8; MAP_ENTRY_LEN];
        out[..4].copy_from_slice(&self.data_page_size.to_le_bytes());
        out[4..].copy_from_slice(&self.unknown);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageMap {
    pub page_size: u32,
    pub page_count: u32,
    pub page_type: u32,
    pub entries: Vec<MapEntry>,
}

impl PageMap {
    pub fn new(entries: Vec<MapEntry>) -> Self {
        Self {
            page_size: DATA_PAGE_SIZE,
            page_count: entries.len() as u32,
            page_type: MAP_PAGE_TYPE,
            entries,
        }
    }

    /// Serializes into a page of `page_size` bytes, growing if the entries
    /// do not fit.
    pub fn encode(&self) -> Vec<u8> {
        let needed = MAP_ENTRIES_OFFSET + self.entries.len() * MAP_ENTRY_LEN;
        let mut page = vec![0u8; (self.page_size as usize).max(needed)];
        page[..4].copy_from_slice(&MAP_MAGIC);
        put_u32_le(&mut page, MAP_PAGE_SIZE_OFFSET, self.page_size);
        put_u32_le(&mut page, MAP_PAGE_COUNT_OFFSET, self.page_count);
        put_u32_le(&mut page, MAP_PAGE_TYPE_OFFSET, self.page_type);
        for (i, entry) in self.entries.iter().enumerate() {
            let at = MAP_ENTRIES_OFFSET + i * MAP_ENTRY_LEN;
            page[at..at + MAP_ENTRY_LEN].copy_from_slice(&entry.encode());
        }
        page
    }
}

/// The fixed 20-byte prefix of a data page.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DataPageHeader {
    /// `Data` normally; `Map` when the page carried the `2mbd` tag.
    pub magic: PageSignature,
    pub physical_size: u32,
    pub allocated_size: u32,
    pub subtype: Subtype,
    /// Offset-16 field. Reported, never interpreted.
    pub size2: u32,
}

impl DataPageHeader {
    pub fn new(subtype: Subtype, allocated_size: u32, size2: u32) -> Self {
        Self {
            magic: PageSignature::Data,
            physical_size: DATA_PAGE_SIZE,
            allocated_size,
            subtype,
            size2,
        }
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        let class = classify_page_detailed(bytes)?;
        let PageKind::Data(subtype) = class.kind else {
            return Err(FormatError::NotADataPage);
        };
        Ok(Self {
            magic: if class.map_magic_data {
                PageSignature::Map
            } else {
                PageSignature::Data
            },
            physical_size: read_u32_le(bytes, DATA_PHYSICAL_SIZE_OFFSET)?,
            allocated_size: read_u32_le(bytes, DATA_ALLOCATED_SIZE_OFFSET)?,
            subtype,
            size2: read_u32_le(bytes, DATA_SIZE2_OFFSET)?,
        })
    }

    pub fn encode(&self) -> [u8; DATA_PAYLOAD_OFFSET] {
        let mut out = [0u8; DATA_PAYLOAD_OFFSET];
        out[..4].copy_from_slice(&self.magic.tag());
        put_u32_le(&mut out, DATA_PHYSICAL_SIZE_OFFSET, self.physical_size);
        put_u32_le(&mut out, DATA_ALLOCATED_SIZE_OFFSET, self.allocated_size);
        put_u32_le(&mut out, DATA_SUBTYPE_OFFSET, self.subtype.raw());
        put_u32_le(&mut out, DATA_SIZE2_OFFSET, self.size2);
        out
    }
}

/// One data page as found in a store or carved from an image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataPage {
    /// Ordinal of the page in its store (header is 0, map is 1).
    pub index: usize,
    /// Byte offset of the page in its source.
    pub offset: u64,
    pub header: DataPageHeader,
    /// The full page, header included. Shorter than `physical_size` when
    /// the source was truncated.
    pub bytes: Vec<u8>,
}

impl DataPage {
    pub fn from_bytes(index: usize, offset: u64, bytes: Vec<u8>) -> Result<Self> {
        let header = DataPageHeader::parse(&bytes)?;
        Ok(Self {
            index,
            offset,
            header,
            bytes,
        })
    }

    pub fn subtype(&self) -> Subtype {
        self.header.subtype
    }

    pub fn payload(&self) -> &[u8] {
        &self.bytes[DATA_PAYLOAD_OFFSET.min(self.bytes.len())..]
    }

    pub fn is_truncated(&self) -> bool {
        self.bytes.len() < self.header.physical_size as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_magic_classifies_as_header() {
        let mut bytes = [0u8; 20];
        bytes[..4].copy_from_slice(&[0x38, 0x74, 0x73, 0x64]);
        assert_eq!(classify_page(&bytes), Ok(PageKind::Header));
    }

    #[test]
    fn decompressed_page_dump_first_row() {
        // first 20 bytes of a decompressed subtype-9 page dump
        let row = [
            0x32, 0x70, 0x62, 0x64, 0x00, 0x40, 0x00, 0x00, 0x02, 0x11, 0x00, 0x00, 0x09, 0x00,
            0x00, 0x00, 0x70, 0x35, 0x20, 0x34,
        ];
        assert_eq!(
            classify_page(&row),
            Ok(PageKind::Data(Subtype::MetadataRecords))
        );
        let header = DataPageHeader::parse(&row).unwrap();
        assert_eq!(header.physical_size, 16384);
        assert_eq!(header.allocated_size, 0x1102);
        assert_eq!(header.size2, 0x3420_3570);
    }

    #[test]
    fn zeros_are_not_a_page() {
        assert_eq!(classify_page(&[0u8; 20]), Ok(PageKind::NotAPage));
    }

    #[test]
    fn short_input_is_rejected() {
        assert_eq!(
            classify_page(&[0x32, 0x70, 0x62, 0x64]),
            Err(FormatError::InputTooShort { needed: 20, got: 4 })
        );
    }

    #[test]
    fn map_tag_with_page_type_12_is_map() {
        let mut bytes = [0u8; 20];
        bytes[..4].copy_from_slice(&MAP_MAGIC);
        bytes[12] = 12;
        assert_eq!(classify_page(&bytes), Ok(PageKind::Map));
        bytes[12] = 9;
        let c = classify_page_detailed(&bytes).unwrap();
        assert_eq!(c.kind, PageKind::Data(Subtype::MetadataRecords));
        assert!(c.map_magic_data);
    }

    #[test]
    fn little_endian_fields() {
        assert_eq!(read_u32_le(&[0x8a, 0x08, 0x00, 0x00], 0), Ok(2186));
        assert_eq!(read_u32_le(&[0x00, 0x40, 0x00, 0x00], 0), Ok(16384));
        assert_eq!(read_u32_le(&[0, 0, 0, 0], 0), Ok(0));
        assert_eq!(
            read_u32_le(&[0, 0, 0, 0], 1),
            Err(FormatError::OutOfBounds { offset: 1, len: 4 })
        );
        assert!(read_u32_le(&[0; 4], usize::MAX).is_err());
    }

    #[test]
    fn subtype_roles() {
        assert_eq!(Subtype::from_raw(9), Subtype::MetadataRecords);
        assert_eq!(Subtype::from_raw(17), Subtype::AttributeTable);
        assert_eq!(Subtype::from_raw(33), Subtype::UtiTable);
        assert_eq!(Subtype::from_raw(5), Subtype::Unknown(5));
    }

    #[test]
    fn path_escaping_round_trips() {
        let raw = b"/Vol\\ume/\xff\x01store.db";
        let text = decode_path_bytes(raw);
        assert_eq!(text, "/Vol\\\\ume/\\xff\\x01store.db");
        assert_eq!(unescape_path(&text), raw.to_vec());
    }

    proptest! {
        #[test]
        fn map_entry_preserves_all_sixteen_bytes(raw in proptest::array::uniform16(any::<u8>())) {
            prop_assert_eq!(MapEntry::decode(&raw).encode(), raw);
        }

        #[test]
        fn classification_is_total(bytes in proptest::collection::vec(any::<u8>(), 20..64)) {
            prop_assert!(classify_page(&bytes).is_ok());
        }
    }
}
