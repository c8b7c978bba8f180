//! Record-level decoding of data pages.
//!
//! Subtype-9 pages hold a zlib stream. Inflated, it is a run of records laid
//! back to back, each prefixed by a little-endian `u32` size marker:
//!
//! ```text
//! [size0][body0 ...size0 bytes][size1][body1 ...][0000 zero fill ...]
//! ```
//!
//! Subtype-17 and subtype-33 pages are uncompressed tables; see [`tables`].

mod fields;
mod search;
pub mod tables;

use std::io::{Read, Write};

use flate2::read::ZlibDecoder;
use flate2::write::ZlibEncoder;
use flate2::Compression;
use md5::{Digest, Md5};
use serde::Serialize;
use thiserror::Error;

use crate::format::{DataPage, Subtype, DATA_PAYLOAD_OFFSET};

pub use fields::{extract_fields, ByteOrder, IdCandidate, RecordFields, MIN_STRING_LEN};
pub use search::{search_records, Hit};
pub use tables::{parse_attribute_page, parse_uti_page, AttributeEntry, UtiEntry};

/// Size markers above this are treated as corruption.
pub const MAX_RECORD_SIZE: u32 = 1 << 24;

/// Inflation stops here; bounds memory on hostile carved input.
pub const MAX_INFLATED_LEN: u64 = 64 << 20;

/// Where the record walk starts when the inflated stream repeats the
/// 20-byte page header.
pub const ECHOED_HEADER_WALK_START: usize = DATA_PAYLOAD_OFFSET;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("page {page_index} has subtype {found}, expected {expected}")]
    WrongSubtype {
        page_index: usize,
        expected: u32,
        found: u32,
    },
    #[error("page {page_index}: zlib stream is corrupt: {message}")]
    Decompress { page_index: usize, message: String },
    #[error("page {page_index}: inflated bytes do not start a record walk")]
    NoPlausibleWalk { page_index: usize },
}

pub type Result<T, E = CodecError> = std::result::Result<T, E>;

/// Content digest of a record body (MD5).
pub type RecordDigest = [u8; 16];

pub fn digest(body: &[u8]) -> RecordDigest {
    Md5::digest(body).into()
}

pub fn digest_hex(digest: &RecordDigest) -> String {
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Inflated {
    pub bytes: Vec<u8>,
    /// 0 normally, 20 when the stream carries a copy of the page header.
    pub walk_start: usize,
}

/// Inflates a subtype-9 payload and locates the start of its record walk.
pub fn inflate_payload(page: &DataPage) -> Result<Inflated> {
    if page.subtype() != Subtype::MetadataRecords {
        return Err(CodecError::WrongSubtype {
            page_index: page.index,
            expected: Subtype::MetadataRecords.raw(),
            found: page.subtype().raw(),
        });
    }
    let bytes = inflate(page.payload()).map_err(|e| CodecError::Decompress {
        page_index: page.index,
        message: e.to_string(),
    })?;
    let walk_start =
        probe_walk_start(&bytes).ok_or(CodecError::NoPlausibleWalk {
            page_index: page.index,
        })?;
    Ok(Inflated { bytes, walk_start })
}

pub(crate) fn inflate(compressed: &[u8]) -> std::io::Result<Vec<u8>> {
    let mut out = Vec::new();
    ZlibDecoder::new(compressed)
        .take(MAX_INFLATED_LEN)
        .read_to_end(&mut out)?;
    Ok(out)
}

/// Zlib-compresses at the default level.
pub fn deflate(bytes: &[u8]) -> Vec<u8> {
    let mut enc = ZlibEncoder::new(Vec::with_capacity(bytes.len() / 2), Compression::default());
    enc.write_all(bytes).expect("writing to a Vec cannot fail");
    enc.finish().expect("writing to a Vec cannot fail")
}

fn probe_walk_start(stream: &[u8]) -> Option<usize> {
    let marker_at = |at: usize| -> Option<u32> {
        stream
            .get(at..at + 4)
            .map(|w| u32::from_le_bytes([w[0], w[1], w[2], w[3]]))
    };
    let plausible = |at: usize| match marker_at(at) {
        // an empty page is a valid walk of zero records
        None | Some(0) => stream.len() <= at || stream[at..].iter().all(|&b| b == 0),
        Some(size) => size <= MAX_RECORD_SIZE && at + 4 + size as usize <= stream.len(),
    };
    if plausible(0) {
        Some(0)
    } else if stream.len() >= ECHOED_HEADER_WALK_START && plausible(ECHOED_HEADER_WALK_START) {
        Some(ECHOED_HEADER_WALK_START)
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RawRecord {
    pub page_index: usize,
    pub slot_index: usize,
    /// Offset of the size marker within the walked stream.
    pub stream_offset: usize,
    pub declared_size: u32,
    #[serde(skip)]
    pub body: Vec<u8>,
    #[serde(serialize_with = "serialize_digest")]
    pub digest: RecordDigest,
    /// Set when the stream ended before `declared_size` bytes.
    pub truncated: bool,
}

fn serialize_digest<S: serde::Serializer>(
    d: &RecordDigest,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&digest_hex(d))
}

impl RawRecord {
    pub fn new(page_index: usize, slot_index: usize, stream_offset: usize, body: Vec<u8>) -> Self {
        Self {
            page_index,
            slot_index,
            stream_offset,
            declared_size: body.len() as u32,
            digest: digest(&body),
            body,
            truncated: false,
        }
    }

    /// Bytes the record occupies in its stream, marker included.
    pub fn footprint(&self) -> usize {
        4 + self.declared_size as usize
    }

    pub fn digest_hex(&self) -> String {
        digest_hex(&self.digest)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Truncation {
    pub slot_index: usize,
    pub declared: u32,
    pub available: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordWalk {
    pub records: Vec<RawRecord>,
    /// Last record ran past the end of the stream, or had an absurd marker.
    pub truncation: Option<Truncation>,
    /// Bytes after the terminating zero marker (or a short tail).
    pub trailing_len: usize,
    pub trailing_nonzero: usize,
}

/// Walks size-prefixed records from the start of `stream`.
pub fn split_records(stream: &[u8], page_index: usize) -> RecordWalk {
    let mut records = Vec::new();
    let mut truncation = None;
    let mut cursor = 0usize;
    while cursor + 4 <= stream.len() {
        let size = u32::from_le_bytes([
            stream[cursor],
            stream[cursor + 1],
            stream[cursor + 2],
            stream[cursor + 3],
        ]);
        if size == 0 {
            break;
        }
        let body_start = cursor + 4;
        let available = stream.len() - body_start;
        if size > MAX_RECORD_SIZE || size as usize > available {
            let slot_index = records.len();
            let body = stream[body_start..].to_vec();
            records.push(RawRecord {
                page_index,
                slot_index,
                stream_offset: cursor,
                declared_size: size,
                digest: digest(&body),
                body,
                truncated: true,
            });
            truncation = Some(Truncation {
                slot_index,
                declared: size,
                available,
            });
            cursor = stream.len();
            break;
        }
        let body_end = body_start + size as usize;
        let slot = records.len();
        records.push(RawRecord::new(
            page_index,
            slot,
            cursor,
            stream[body_start..body_end].to_vec(),
        ));
        cursor = body_end;
    }
    let tail = &stream[cursor.min(stream.len())..];
    RecordWalk {
        records,
        truncation,
        trailing_len: tail.len(),
        trailing_nonzero: tail.iter().filter(|&&b| b != 0).count(),
    }
}

/// Concatenates size-prefixed bodies; the inverse of [`split_records`].
pub fn frame_records<B: AsRef<[u8]>>(bodies: &[B]) -> Vec<u8> {
    let total: usize = bodies.iter().map(|b| 4 + b.as_ref().len()).sum();
    let mut out = Vec::with_capacity(total);
    for body in bodies {
        let body = body.as_ref();
        out.extend_from_slice(&(body.len() as u32).to_le_bytes());
        out.extend_from_slice(body);
    }
    out
}

/// Inflates and walks one subtype-9 page.
pub fn page_records(page: &DataPage) -> Result<RecordWalk> {
    let inflated = inflate_payload(page)?;
    Ok(split_records(
        &inflated.bytes[inflated.walk_start..],
        page.index,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::format::DataPageHeader;
    use proptest::prelude::*;

    fn record_page(stream: &[u8]) -> DataPage {
        let compressed = deflate(stream);
        let header = DataPageHeader::new(
            Subtype::MetadataRecords,
            (DATA_PAYLOAD_OFFSET + compressed.len()) as u32,
            0,
        );
        let mut bytes = vec![0u8; 16384];
        bytes[..20].copy_from_slice(&header.encode());
        bytes[20..20 + compressed.len()].copy_from_slice(&compressed);
        DataPage::from_bytes(8, 0, bytes).unwrap()
    }

    #[test]
    fn walk_reads_second_marker_at_2190() {
        let mut stream = vec![0x8a, 0x08, 0x00, 0x00];
        stream.extend((0..2186).map(|i| (i % 200 + 2) as u8));
        stream.extend(7u32.to_le_bytes());
        stream.extend(b"seventh");
        let walk = split_records(&stream, 0);
        assert_eq!(walk.records.len(), 2);
        assert_eq!(walk.records[0].declared_size, 2186);
        assert_eq!(walk.records[0].body.len(), 2186);
        assert_eq!(walk.records[1].stream_offset, 2190);
        assert_eq!(walk.records[1].body, b"seventh");
        assert!(walk.truncation.is_none());
    }

    #[test]
    fn empty_stream_has_no_records() {
        let walk = split_records(&[], 0);
        assert!(walk.records.is_empty());
        assert_eq!(walk.trailing_len, 0);
    }

    #[test]
    fn oversized_marker_truncates() {
        let mut stream = 100u32.to_le_bytes().to_vec();
        stream.extend([9u8; 40]);
        let walk = split_records(&stream, 3);
        assert_eq!(walk.records.len(), 1);
        assert!(walk.records[0].truncated);
        assert_eq!(walk.records[0].body.len(), 40);
        assert_eq!(
            walk.truncation,
            Some(Truncation {
                slot_index: 0,
                declared: 100,
                available: 40
            })
        );
    }

    #[test]
    fn absurd_marker_is_corruption() {
        let mut stream = (MAX_RECORD_SIZE + 1).to_le_bytes().to_vec();
        stream.extend([1u8; 16]);
        let walk = split_records(&stream, 0);
        assert!(walk.truncation.is_some());
    }

    #[test]
    fn inflated_walk_starts_at_first_marker() {
        let mut stream = frame_records(&[b"first".as_slice(), b"second", b"third"]);
        stream.resize(4096, 0);
        let page = record_page(&stream);
        let inflated = inflate_payload(&page).unwrap();
        assert_eq!(inflated.walk_start, 0);
        assert_eq!(&inflated.bytes[..4], &5u32.to_le_bytes());
        let walk = page_records(&page).unwrap();
        assert_eq!(walk.records.len(), 3);
        assert_eq!(walk.records[2].body, b"third");
        assert_eq!(walk.trailing_nonzero, 0);
    }

    #[test]
    fn echoed_header_layout_is_detected() {
        let echo = DataPageHeader::new(Subtype::MetadataRecords, 0, 0x3420_3570).encode();
        let mut stream = echo.to_vec();
        stream.extend(frame_records(&[b"alpha".as_slice(), b"beta"]));
        stream.resize(2048, 0);
        let page = record_page(&stream);
        let inflated = inflate_payload(&page).unwrap();
        assert_eq!(inflated.walk_start, 20);
        let walk = page_records(&page).unwrap();
        assert_eq!(walk.records.len(), 2);
        assert_eq!(walk.records[1].body, b"beta");
    }

    #[test]
    fn implausible_stream_is_reported() {
        let page = record_page(&[0xff; 64]);
        assert_eq!(
            inflate_payload(&page),
            Err(CodecError::NoPlausibleWalk { page_index: 8 })
        );
    }

    #[test]
    fn emptied_page_walks_to_nothing() {
        let page = record_page(&[0u8; 16300]);
        assert!(page_records(&page).unwrap().records.is_empty());
    }

    #[test]
    fn flipped_byte_is_a_decompress_error() {
        let bodies: Vec<Vec<u8>> = (0..40)
            .map(|i| format!("record number {i} with some text").into_bytes())
            .collect();
        let mut stream = frame_records(&bodies);
        stream.resize(8000, 0);
        let mut page = record_page(&stream);
        let len = page.header.allocated_size as usize;
        page.bytes[(20 + len) / 2] ^= 0xff;
        assert!(matches!(
            inflate_payload(&page),
            Err(CodecError::Decompress { page_index: 8, .. })
        ));
    }

    #[test]
    fn wrong_subtype_is_rejected() {
        let mut page = record_page(&[0u8; 32]);
        page.header.subtype = Subtype::UtiTable;
        assert!(matches!(
            inflate_payload(&page),
            Err(CodecError::WrongSubtype { found: 33, .. })
        ));
    }

    proptest! {
        #[test]
        fn framing_round_trips(
            bodies in proptest::collection::vec(proptest::collection::vec(any::<u8>(), 1..300), 0..40),
            fill in 0usize..64,
        ) {
            let mut stream = frame_records(&bodies);
            stream.resize(stream.len() + fill, 0);
            let walk = split_records(&stream, 0);
            let got: Vec<Vec<u8>> = walk.records.iter().map(|r| r.body.clone()).collect();
            prop_assert_eq!(&got, &bodies);
            let footprint: usize = walk.records.iter().map(RawRecord::footprint).sum();
            prop_assert_eq!(footprint + walk.trailing_len, stream.len());
            prop_assert_eq!(walk.trailing_nonzero, 0);
        }

        #[test]
        fn differing_bodies_have_differing_digests(
            body in proptest::collection::vec(any::<u8>(), 1..512),
            at in any::<prop::sample::Index>(),
            flip in 1u8..=255,
        ) {
            let mut other = body.clone();
            let i = at.index(other.len());
            other[i] ^= flip;
            prop_assert_ne!(digest(&body), digest(&other));
            prop_assert_eq!(digest(&body), digest(&body.clone()));
        }
    }
}
