//! Attribute-name (subtype 17) and UTI (subtype 33) tables.
//!
//! Both are uncompressed. Entries start at page offset 32:
//!
//! ```text
//! attribute: [record_number u32][flags ...][name][0x00]
//! uti:       [record_number u32][uti][0x00]([language][0x00])?
//! ```
//!
//! The width of the attribute flags is not known up front. It is taken from
//! the first well-formed entry of each page and held for the rest of it.

use serde::Serialize;

use super::fields::printable_char_len;
use super::{CodecError, Result};
use crate::diag::{Checked, Diagnostic, WarningKind};
use crate::format::{read_u32_le, DataPage, Subtype, TABLE_ENTRIES_OFFSET};

const MAX_FLAGS_WIDTH: usize = 16;
/// Resync accepts a record number at most this far past the last good one.
const RESYNC_REACH: u32 = 4096;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AttributeEntry {
    pub record_number: u32,
    pub flags: Vec<u8>,
    pub name: String,
}

impl AttributeEntry {
    /// Encodes one entry; used to build table pages.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = self.record_number.to_le_bytes().to_vec();
        out.extend_from_slice(&self.flags);
        out.extend_from_slice(self.name.as_bytes());
        out.push(0);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UtiEntry {
    pub record_number: u32,
    pub uti: String,
    pub language_code: Option<String>,
}

impl UtiEntry {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = self.record_number.to_le_bytes().to_vec();
        out.extend_from_slice(self.uti.as_bytes());
        out.push(0);
        if let Some(lang) = &self.language_code {
            out.extend_from_slice(lang.as_bytes());
            out.push(0);
        }
        out
    }
}

fn table_region(page: &DataPage, subtype: Subtype) -> Result<(usize, usize)> {
    if page.subtype() != subtype {
        return Err(CodecError::WrongSubtype {
            page_index: page.index,
            expected: subtype.raw(),
            found: page.subtype().raw(),
        });
    }
    let allocated = page.header.allocated_size as usize;
    let end = if allocated > TABLE_ENTRIES_OFFSET && allocated <= page.bytes.len() {
        allocated
    } else {
        page.bytes.len()
    };
    Ok((TABLE_ENTRIES_OFFSET.min(end), end))
}

/// Reads a NUL-terminated printable string at `start`; returns the string
/// and the offset just past the terminator.
fn terminated_string(bytes: &[u8], start: usize, end: usize) -> Option<(String, usize)> {
    let mut i = start;
    while i < end {
        if bytes[i] == 0 {
            return (i > start).then(|| {
                (
                    String::from_utf8_lossy(&bytes[start..i]).into_owned(),
                    i + 1,
                )
            });
        }
        i += printable_char_len(&bytes[i..end])?;
    }
    None
}

#[derive(Debug, PartialEq, Eq)]
enum EntryFault {
    Unterminated,
    Malformed,
}

fn entry_fault(bytes: &[u8], start: usize, end: usize) -> EntryFault {
    if bytes[start..end].contains(&0) {
        EntryFault::Malformed
    } else {
        EntryFault::Unterminated
    }
}

fn record_number_ok(number: u32, prev: Option<u32>) -> bool {
    number != 0 && prev.map_or(true, |p| number > p)
}

fn is_zero_fill(bytes: &[u8]) -> bool {
    bytes.iter().all(|&b| b == 0)
}

pub fn parse_attribute_page(page: &DataPage) -> Result<Checked<Vec<AttributeEntry>>> {
    let (start, end) = table_region(page, Subtype::AttributeTable)?;
    let bytes = &page.bytes;
    let mut entries: Vec<AttributeEntry> = Vec::new();
    let mut warnings = Vec::new();
    let mut flags_width: Option<usize> = None;

    let parse_at = |at: usize, width: Option<usize>, prev: Option<u32>| {
        let number = read_u32_le(&bytes[..end], at).ok()?;
        if !record_number_ok(number, prev) {
            return None;
        }
        let name_at = at + 4;
        let widths: Vec<usize> = match width {
            Some(w) => vec![w],
            None => (0..=MAX_FLAGS_WIDTH).collect(),
        };
        widths.into_iter().find_map(|w| {
            let flags_end = name_at + w;
            if flags_end >= end {
                return None;
            }
            // flags are opaque but never start the name
            if w > 0 && printable_char_len(&bytes[flags_end - 1..end]).is_some() && width.is_none()
            {
                return None;
            }
            let (name, next) = terminated_string(bytes, flags_end, end)?;
            Some((
                AttributeEntry {
                    record_number: number,
                    flags: bytes[name_at..flags_end].to_vec(),
                    name,
                },
                next,
                w,
            ))
        })
    };

    let mut cursor = start;
    while cursor + 4 <= end && !is_zero_fill(&bytes[cursor..end]) {
        let prev = entries.last().map(|e| e.record_number);
        if let Some((entry, next, w)) = parse_at(cursor, flags_width, prev) {
            flags_width.get_or_insert(w);
            entries.push(entry);
            cursor = next;
            continue;
        }
        let fault = entry_fault(bytes, (cursor + 4).min(end), end);
        warnings.push(Diagnostic::new(
            page.offset + cursor as u64,
            WarningKind::MalformedEntry,
            format!("attribute entry at page offset {cursor}: {fault:?}"),
        ));
        if fault == EntryFault::Unterminated {
            break;
        }
        let resync = (cursor + 1..end.saturating_sub(4)).find(|&at| {
            read_u32_le(bytes, at).is_ok_and(|n| {
                prev.map_or(true, |p| n > p && n - p <= RESYNC_REACH)
            }) && parse_at(at, flags_width, prev).is_some()
        });
        match resync {
            Some(at) => cursor = at,
            None => break,
        }
    }
    Ok(Checked {
        value: entries,
        warnings,
    })
}

pub fn parse_uti_page(page: &DataPage) -> Result<Checked<Vec<UtiEntry>>> {
    let (start, end) = table_region(page, Subtype::UtiTable)?;
    let bytes = &page.bytes;
    let mut entries: Vec<UtiEntry> = Vec::new();
    let mut warnings = Vec::new();

    let parse_at = |at: usize, prev: Option<u32>| {
        let number = read_u32_le(&bytes[..end], at).ok()?;
        if !record_number_ok(number, prev) {
            return None;
        }
        let (uti, mut next) = terminated_string(bytes, at + 4, end)?;
        let follows = read_u32_le(&bytes[..end], next).ok();
        let mut language_code = None;
        if follows != Some(number.wrapping_add(1)) {
            if let Some((lang, after)) = terminated_string(bytes, next, end) {
                if lang.chars().count() >= 2 {
                    language_code = Some(lang);
                    next = after;
                }
            }
        }
        Some((
            UtiEntry {
                record_number: number,
                uti,
                language_code,
            },
            next,
        ))
    };

    let mut cursor = start;
    while cursor + 4 <= end && !is_zero_fill(&bytes[cursor..end]) {
        let prev = entries.last().map(|e| e.record_number);
        if let Some((entry, next)) = parse_at(cursor, prev) {
            entries.push(entry);
            cursor = next;
            continue;
        }
        let fault = entry_fault(bytes, (cursor + 4).min(end), end);
        warnings.push(Diagnostic::new(
            page.offset + cursor as u64,
            WarningKind::MalformedEntry,
            format!("uti entry at page offset {cursor}: {fault:?}"),
        ));
        if fault == EntryFault::Unterminated {
            break;
        }
        let resync = (cursor + 1..end.saturating_sub(4)).find(|&at| {
            read_u32_le(bytes, at).is_ok_and(|n| {
                prev.map_or(true, |p| n > p && n - p <= RESYNC_REACH)
            }) && parse_at(at, prev).is_some()
        });
        match resync {
            Some(at) => cursor = at,
            None => break,
        }
    }
    Ok(Checked {
        value: entries,
        warnings,
    })
}
