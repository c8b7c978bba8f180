//! Byte images of generated pages and whole stores.

use crate::codec::{deflate, frame_records, AttributeEntry, UtiEntry};
use crate::format::{
    DataPageHeader, MapEntry, PageMap, StoreHeader, Subtype, DATA_PAGE_SIZE, DATA_PAYLOAD_OFFSET,
    HEADER_PAGE_SIZE, HEADER_PATH_OFFSET, TABLE_ENTRIES_OFFSET,
};

/// Inflated length of every generated record region. Chosen so that even an
/// incompressible region still fits the page once deflated.
pub const RECORD_REGION_LEN: usize = DATA_PAGE_SIZE as usize - DATA_PAYLOAD_OFFSET - 64;

/// Bookkeeping pages between the tables and the first record page.
pub const RESERVED_SUBTYPES: [u32; 4] = [1, 2, 3, 4];

/// Builds a subtype-9 page from record bodies. The inflated region is
/// always [`RECORD_REGION_LEN`] bytes: records back to back, then zeros.
pub fn record_page<B: AsRef<[u8]>>(bodies: &[B]) -> Vec<u8> {
    let mut region = frame_records(bodies);
    let used = region.len();
    assert!(used <= RECORD_REGION_LEN, "records overflow the page region");
    region.resize(RECORD_REGION_LEN, 0);
    compressed_page(&region, used as u32)
}

/// Builds a subtype-9 page around an arbitrary inflated region.
pub fn compressed_page(region: &[u8], size2: u32) -> Vec<u8> {
    let compressed = deflate(region);
    let allocated = DATA_PAYLOAD_OFFSET + compressed.len();
    assert!(allocated <= DATA_PAGE_SIZE as usize, "compressed region overflows the page");
    let mut page = vec![0u8; DATA_PAGE_SIZE as usize];
    let header = DataPageHeader::new(Subtype::MetadataRecords, allocated as u32, size2);
    page[..DATA_PAYLOAD_OFFSET].copy_from_slice(&header.encode());
    page[DATA_PAYLOAD_OFFSET..allocated].copy_from_slice(&compressed);
    page
}

/// Packs encoded table entries into as many pages as needed.
pub fn table_pages(subtype: Subtype, entries: &[Vec<u8>]) -> Vec<Vec<u8>> {
    let room = DATA_PAGE_SIZE as usize - TABLE_ENTRIES_OFFSET;
    let mut pages = Vec::new();
    let mut current: Vec<u8> = Vec::new();
    for entry in entries {
        if !current.is_empty() && current.len() + entry.len() > room {
            pages.push(table_page(subtype, &current));
            current.clear();
        }
        current.extend_from_slice(entry);
    }
    if !current.is_empty() || pages.is_empty() {
        pages.push(table_page(subtype, &current));
    }
    pages
}

fn table_page(subtype: Subtype, body: &[u8]) -> Vec<u8> {
    let mut page = vec![0u8; DATA_PAGE_SIZE as usize];
    let allocated = TABLE_ENTRIES_OFFSET + body.len();
    page[..DATA_PAYLOAD_OFFSET]
        .copy_from_slice(&DataPageHeader::new(subtype, allocated as u32, 0).encode());
    page[TABLE_ENTRIES_OFFSET..allocated].copy_from_slice(body);
    page
}

pub fn attribute_pages(entries: &[AttributeEntry]) -> Vec<Vec<u8>> {
    let encoded: Vec<Vec<u8>> = entries.iter().map(AttributeEntry::encode).collect();
    table_pages(Subtype::AttributeTable, &encoded)
}

pub fn uti_pages(entries: &[UtiEntry]) -> Vec<Vec<u8>> {
    let encoded: Vec<Vec<u8>> = entries.iter().map(UtiEntry::encode).collect();
    table_pages(Subtype::UtiTable, &encoded)
}

pub fn reserved_page(subtype: u32) -> Vec<u8> {
    let mut page = vec![0u8; DATA_PAGE_SIZE as usize];
    page[..DATA_PAYLOAD_OFFSET].copy_from_slice(
        &DataPageHeader::new(Subtype::from_raw(subtype), DATA_PAYLOAD_OFFSET as u32, 0).encode(),
    );
    page
}

pub fn header_page(volume_path: &str) -> Vec<u8> {
    let tail_len = HEADER_PAGE_SIZE as usize - HEADER_PATH_OFFSET - volume_path.len() - 1;
    StoreHeader {
        header_page_size: HEADER_PAGE_SIZE,
        volume_path: Some(volume_path.to_owned()),
        raw_tail: vec![0; tail_len],
    }
    .encode()
}

/// Map entry for the `ordinal`-th data page. The twelve undeciphered bytes
/// are filled with the ordinal, subtype and allocated size.
pub fn map_entry(ordinal: usize, page: &[u8]) -> MapEntry {
    let header = DataPageHeader::parse(page).expect("generated page");
    let mut unknown = [0u8; 12];
    unknown[..4].copy_from_slice(&(ordinal as u32).to_le_bytes());
    unknown[4..8].copy_from_slice(&header.subtype.raw().to_le_bytes());
    unknown[8..].copy_from_slice(&header.allocated_size.to_le_bytes());
    MapEntry {
        data_page_size: page.len() as u32,
        unknown,
    }
}

pub fn map_page(data_pages: &[Vec<u8>]) -> Vec<u8> {
    PageMap::new(
        data_pages
            .iter()
            .enumerate()
            .map(|(i, p)| map_entry(i, p))
            .collect(),
    )
    .encode()
}

/// Header, map, then data pages in order.
pub fn assemble(volume_path: &str, data_pages: &[Vec<u8>]) -> Vec<u8> {
    let header = header_page(volume_path);
    let map = map_page(data_pages);
    let mut out = Vec::with_capacity(
        header.len() + map.len() + data_pages.len() * DATA_PAGE_SIZE as usize,
    );
    out.extend(header);
    out.extend(map);
    for page in data_pages {
        out.extend_from_slice(page);
    }
    out
}
