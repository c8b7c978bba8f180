//! Splits a `store.db` byte stream into header, map and data pages.
//!
//! Data pages are located through the map first. When the map is missing,
//! disagrees with the bytes, or leaves bytes unaccounted for, the remainder
//! is scanned for page signatures at 4-byte alignment. Every input byte ends
//! up attributed to exactly one [`Extent`].

use std::collections::BTreeMap;
use std::io::Read;

use serde::Serialize;
use thiserror::Error;

use crate::diag::{Checked, Diagnostic, WarningKind};
use crate::format::{
    classify_page, classify_page_detailed, decode_path_bytes, read_u32_le, DataPage, FormatError,
    MapEntry, PageKind, PageMap, StoreHeader, Subtype, CLASSIFY_LEN, DATA_PAGE_SIZE,
    DATA_PHYSICAL_SIZE_OFFSET, HEADER_PAGE_SIZE, HEADER_PATH_OFFSET, HEADER_SIZE_OFFSET,
    MAP_ENTRIES_OFFSET, MAP_ENTRY_LEN, MAP_PAGE_COUNT_OFFSET, MAP_PAGE_SIZE_OFFSET,
    MAP_PAGE_TYPE_OFFSET,
};

const SCAN_ALIGN: usize = 4;

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("input is empty")]
    Empty,
    #[error("not a Store-V2 store: offset 0 does not carry the header signature")]
    NotAStore,
    #[error("not a header page")]
    NotAHeader,
    #[error("not a map page")]
    NotAMap,
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("read failed: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "role", content = "page", rename_all = "snake_case")]
pub enum ExtentRole {
    Header,
    Map,
    /// Index into [`ParsedStore::pages`].
    Page(usize),
    Slack,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Extent {
    pub offset: u64,
    pub len: u64,
    #[serde(flatten)]
    pub role: ExtentRole,
}

#[derive(Debug, Clone)]
pub struct ParsedStore {
    pub header: StoreHeader,
    pub map: Option<PageMap>,
    pub pages: Vec<DataPage>,
    pub layout: Vec<Extent>,
    pub warnings: Vec<Diagnostic>,
    pub input_len: u64,
}

impl ParsedStore {
    /// Header, map (when present) and data pages.
    pub fn total_page_count(&self) -> usize {
        1 + usize::from(self.map.is_some()) + self.pages.len()
    }

    pub fn pages_of(&self, subtype: Subtype) -> impl Iterator<Item = &DataPage> {
        self.pages.iter().filter(move |p| p.subtype() == subtype)
    }

    /// Data-page count keyed by raw subtype.
    pub fn subtype_histogram(&self) -> BTreeMap<u32, usize> {
        let mut hist = BTreeMap::new();
        for page in &self.pages {
            *hist.entry(page.subtype().raw()).or_insert(0) += 1;
        }
        hist
    }

    pub fn slack_bytes(&self) -> u64 {
        self.layout
            .iter()
            .filter(|e| e.role == ExtentRole::Slack)
            .map(|e| e.len)
            .sum()
    }
}

/// Reads a whole stream and parses it.
pub fn parse_store_reader<R: Read>(mut reader: R) -> Result<ParsedStore, ParseError> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    parse_store(&bytes)
}

pub fn parse_store(bytes: &[u8]) -> Result<ParsedStore, ParseError> {
    if bytes.is_empty() {
        return Err(ParseError::Empty);
    }
    if bytes.len() < CLASSIFY_LEN || classify_page(bytes)? != PageKind::Header {
        return Err(ParseError::NotAStore);
    }

    let mut warnings = Vec::new();
    let mut layout = Vec::new();
    let mut pages = Vec::new();

    let header_len = header_extent(bytes);
    let header = parse_header_page(&bytes[..header_len])?;
    warnings.extend(header.warnings);
    if header_len as u64 != u64::from(header.value.header_page_size) {
        warnings.push(Diagnostic::new(
            HEADER_SIZE_OFFSET as u64,
            WarningKind::NonCanonicalHeaderSize,
            format!(
                "declared header size {} unusable, assumed {header_len}",
                header.value.header_page_size
            ),
        ));
    }
    layout.push(Extent {
        offset: 0,
        len: header_len as u64,
        role: ExtentRole::Header,
    });

    let mut cursor = header_len;
    let mut map = None;
    if bytes.len() >= cursor + CLASSIFY_LEN && classify_page(&bytes[cursor..])? == PageKind::Map {
        let declared = read_u32_le(bytes, cursor + MAP_PAGE_SIZE_OFFSET)? as usize;
        let remaining = bytes.len() - cursor;
        let map_len = if declared >= MAP_ENTRIES_OFFSET && declared <= remaining {
            declared
        } else {
            let fallback = remaining.min(DATA_PAGE_SIZE as usize);
            warnings.push(Diagnostic::new(
                cursor as u64,
                WarningKind::NonCanonicalPageSize,
                format!("map declares page size {declared}, assumed {fallback}"),
            ));
            fallback
        };
        let parsed = parse_map_page(&bytes[cursor..cursor + map_len])?;
        warnings.extend(parsed.warnings.into_iter().map(|mut w| {
            w.offset += cursor as u64;
            w
        }));
        layout.push(Extent {
            offset: cursor as u64,
            len: map_len as u64,
            role: ExtentRole::Map,
        });
        cursor += map_len;
        map = Some(parsed.value);
    } else {
        warnings.push(Diagnostic::new(
            cursor as u64,
            WarningKind::MissingMap,
            "no map page after the header; locating pages by signature",
        ));
    }
    let first_index = 1 + usize::from(map.is_some());

    if let Some(map) = &map {
        cursor = locate_by_map(
            bytes,
            cursor,
            &map.entries,
            first_index,
            &mut pages,
            &mut layout,
            &mut warnings,
        );
    }
    scan_remainder(
        bytes,
        cursor,
        first_index,
        &mut pages,
        &mut layout,
        &mut warnings,
    );

    Ok(ParsedStore {
        header: header.value,
        map,
        pages,
        layout,
        warnings,
        input_len: bytes.len() as u64,
    })
}

fn header_extent(bytes: &[u8]) -> usize {
    match read_u32_le(bytes, HEADER_SIZE_OFFSET) {
        Ok(size) if size as usize >= CLASSIFY_LEN && size as usize <= bytes.len() => size as usize,
        _ => bytes.len().min(HEADER_PAGE_SIZE as usize),
    }
}

fn locate_by_map(
    bytes: &[u8],
    mut cursor: usize,
    entries: &[MapEntry],
    first_index: usize,
    pages: &mut Vec<DataPage>,
    layout: &mut Vec<Extent>,
    warnings: &mut Vec<Diagnostic>,
) -> usize {
    for (i, entry) in entries.iter().enumerate() {
        let size = entry.data_page_size as usize;
        if cursor == bytes.len() {
            warnings.push(Diagnostic::new(
                cursor as u64,
                WarningKind::TruncatedStore,
                format!(
                    "map lists {} data pages but the input ends after {i}",
                    entries.len()
                ),
            ));
            break;
        }
        let at_page = bytes.len() >= cursor + CLASSIFY_LEN
            && matches!(classify_page(&bytes[cursor..]), Ok(PageKind::Data(_)));
        if size < CLASSIFY_LEN || !at_page {
            warnings.push(Diagnostic::new(
                cursor as u64,
                WarningKind::MapInconsistent,
                format!("map entry {i} does not line up with a data page; scanning"),
            ));
            break;
        }
        let end = (cursor + size).min(bytes.len());
        if end < cursor + size {
            warnings.push(Diagnostic::new(
                cursor as u64,
                WarningKind::TruncatedStore,
                format!("page of {size} bytes cut short at {} bytes", end - cursor),
            ));
        }
        push_page(bytes, cursor, end, first_index, pages, layout, warnings);
        cursor = end;
    }
    cursor
}

fn scan_remainder(
    bytes: &[u8],
    start: usize,
    first_index: usize,
    pages: &mut Vec<DataPage>,
    layout: &mut Vec<Extent>,
    warnings: &mut Vec<Diagnostic>,
) {
    let mut slack_start: Option<usize> = None;
    let mut cursor = start;
    let flush = |slack_start: &mut Option<usize>,
                 end: usize,
                 layout: &mut Vec<Extent>,
                 warnings: &mut Vec<Diagnostic>| {
        if let Some(s) = slack_start.take() {
            layout.push(Extent {
                offset: s as u64,
                len: (end - s) as u64,
                role: ExtentRole::Slack,
            });
            warnings.push(Diagnostic::new(
                s as u64,
                WarningKind::Slack,
                format!("{} bytes not attributable to any page", end - s),
            ));
        }
    };

    while cursor + CLASSIFY_LEN <= bytes.len() {
        if let Ok(PageKind::Data(_)) = classify_page(&bytes[cursor..]) {
            let declared = read_u32_le(bytes, cursor + DATA_PHYSICAL_SIZE_OFFSET).unwrap_or(0);
            let size = if declared as usize >= CLASSIFY_LEN {
                declared as usize
            } else {
                DATA_PAGE_SIZE as usize
            };
            let end = (cursor + size).min(bytes.len());
            if end < cursor + size {
                warnings.push(Diagnostic::new(
                    cursor as u64,
                    WarningKind::TruncatedStore,
                    format!("page of {size} bytes cut short at {} bytes", end - cursor),
                ));
            }
            flush(&mut slack_start, cursor, layout, warnings);
            push_page(bytes, cursor, end, first_index, pages, layout, warnings);
            cursor = end;
            continue;
        }
        slack_start.get_or_insert(cursor);
        cursor += SCAN_ALIGN;
    }
    if cursor < bytes.len() {
        slack_start.get_or_insert(cursor);
    }
    flush(&mut slack_start, bytes.len(), layout, warnings);
}

fn push_page(
    bytes: &[u8],
    start: usize,
    end: usize,
    first_index: usize,
    pages: &mut Vec<DataPage>,
    layout: &mut Vec<Extent>,
    warnings: &mut Vec<Diagnostic>,
) {
    let slice = &bytes[start..end];
    if classify_page_detailed(slice).is_ok_and(|c| c.map_magic_data) {
        warnings.push(Diagnostic::new(
            start as u64,
            WarningKind::AlternateDataMagic,
            "data page carries the map signature",
        ));
    }
    let index = first_index + pages.len();
    let page = DataPage::from_bytes(index, start as u64, slice.to_vec())
        .expect("caller classified this as a data page");
    layout.push(Extent {
        offset: start as u64,
        len: (end - start) as u64,
        role: ExtentRole::Page(pages.len()),
    });
    pages.push(page);
}

/// Parses a header page. `bytes` should cover the header page only.
pub fn parse_header_page(bytes: &[u8]) -> Result<Checked<StoreHeader>, ParseError> {
    if bytes.len() < CLASSIFY_LEN || classify_page(bytes)? != PageKind::Header {
        return Err(ParseError::NotAHeader);
    }
    let mut warnings = Vec::new();
    let header_page_size = read_u32_le(bytes, HEADER_SIZE_OFFSET).unwrap_or(0);
    if header_page_size != HEADER_PAGE_SIZE {
        warnings.push(Diagnostic::new(
            HEADER_SIZE_OFFSET as u64,
            WarningKind::NonCanonicalHeaderSize,
            format!("header page size {header_page_size}, expected {HEADER_PAGE_SIZE}"),
        ));
    }
    let extent = bytes.len().min(header_page_size.max(1) as usize);
    let extent = if extent <= HEADER_PATH_OFFSET {
        bytes.len()
    } else {
        extent
    };

    let (volume_path, raw_tail) = if extent > HEADER_PATH_OFFSET {
        let region = &bytes[HEADER_PATH_OFFSET..extent];
        let path_len = region.iter().position(|&b| b == 0).unwrap_or(region.len());
        let path = (path_len > 0).then(|| decode_path_bytes(&region[..path_len]));
        let tail_start = (path_len + 1).min(region.len());
        (path, region[tail_start..].to_vec())
    } else {
        (None, Vec::new())
    };
    if let Some(path) = &volume_path {
        if !path.ends_with("store.db") {
            warnings.push(Diagnostic::new(
                HEADER_PATH_OFFSET as u64,
                WarningKind::VolumePathSuffix,
                format!("volume path {path:?} does not name a store.db"),
            ));
        }
    }
    Ok(Checked {
        value: StoreHeader {
            header_page_size,
            volume_path,
            raw_tail,
        },
        warnings,
    })
}

/// Parses a map page. `bytes` should cover the map page only; entries past
/// its end are dropped with a warning.
pub fn parse_map_page(bytes: &[u8]) -> Result<Checked<PageMap>, ParseError> {
    if bytes.len() < CLASSIFY_LEN || classify_page(bytes)? != PageKind::Map {
        return Err(ParseError::NotAMap);
    }
    let mut warnings = Vec::new();
    let page_size = read_u32_le(bytes, MAP_PAGE_SIZE_OFFSET)?;
    let page_count = read_u32_le(bytes, MAP_PAGE_COUNT_OFFSET)?;
    let page_type = read_u32_le(bytes, MAP_PAGE_TYPE_OFFSET)?;
    if page_size != DATA_PAGE_SIZE {
        warnings.push(Diagnostic::new(
            MAP_PAGE_SIZE_OFFSET as u64,
            WarningKind::NonCanonicalPageSize,
            format!("map page size {page_size}, expected {DATA_PAGE_SIZE}"),
        ));
    }
    let available = bytes.len().saturating_sub(MAP_ENTRIES_OFFSET) / MAP_ENTRY_LEN;
    let count = (page_count as usize).min(available);
    if count < page_count as usize {
        warnings.push(Diagnostic::new(
            MAP_ENTRIES_OFFSET as u64,
            WarningKind::EntryRegionTruncated,
            format!("map declares {page_count} entries but only {count} fit"),
        ));
    }
    let entries = bytes[MAP_ENTRIES_OFFSET..]
        .chunks_exact(MAP_ENTRY_LEN)
        .take(count)
        .map(|chunk| MapEntry::decode(chunk.try_into().expect("16-byte chunk")))
        .collect();
    Ok(Checked {
        value: PageMap {
            page_size,
            page_count,
            page_type,
            entries,
        },
        warnings,
    })
}
