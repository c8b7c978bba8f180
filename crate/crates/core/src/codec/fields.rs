//! String and identifier extraction from record bodies.
//!
//! Records have no field landmarks. Values sit back to back as printable
//! strings closed by `0x00` or `0x01`, among binary fields. Catalog node
//! identifiers are located heuristically and reported as candidates only.

use serde::Serialize;

/// Shortest printable run reported as a string, in characters.
pub const MIN_STRING_LEN: usize = 3;

/// Candidates are kept within this many bytes of a timestamp-like value
/// when the record has one.
const ANCHOR_REACH: usize = 64;
/// A parent candidate must start within this many bytes after its child.
const PARENT_REACH: usize = 16;
/// Plausible Mac absolute time (seconds since 2001-01-01): 2004 to 2064.
const TIMESTAMP_RANGE: std::ops::RangeInclusive<f64> = 1.0e8..=2.0e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ByteOrder {
    Big,
    Little,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IdCandidate {
    pub offset: usize,
    pub value: u64,
    pub order: ByteOrder,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RecordFields {
    pub strings: Vec<String>,
    /// Heuristic. Never treat one of these as the definitive identifier.
    pub cnid_candidates: Vec<IdCandidate>,
    pub parent_cnid_candidates: Vec<IdCandidate>,
}

pub fn extract_fields(body: &[u8]) -> RecordFields {
    let strings = printable_runs(body);
    let (cnid_candidates, parent_cnid_candidates) = id_candidates(body);
    RecordFields {
        strings,
        cnid_candidates,
        parent_cnid_candidates,
    }
}

/// Width of the printable character starting at `bytes[0]`, if any.
/// Printable means visible ASCII or a valid non-control UTF-8 sequence.
pub(crate) fn printable_char_len(bytes: &[u8]) -> Option<usize> {
    let lead = *bytes.first()?;
    let width = match lead {
        0x20..=0x7e => return Some(1),
        0xc2..=0xdf => 2,
        0xe0..=0xef => 3,
        0xf0..=0xf4 => 4,
        _ => return None,
    };
    let c = std::str::from_utf8(bytes.get(..width)?)
        .ok()?
        .chars()
        .next()?;
    (!c.is_control()).then_some(width)
}

fn printable_runs(body: &[u8]) -> Vec<String> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < body.len() {
        let start = i;
        let mut chars = 0;
        while let Some(w) = printable_char_len(&body[i..]) {
            i += w;
            chars += 1;
        }
        if chars == 0 {
            i += 1;
            continue;
        }
        if chars >= MIN_STRING_LEN && matches!(body.get(i), Some(0x00 | 0x01)) {
            // runs are built from validated characters
            out.push(String::from_utf8_lossy(&body[start..i]).into_owned());
        }
    }
    out
}

fn timestamp_anchors(body: &[u8]) -> Vec<usize> {
    body.windows(8)
        .enumerate()
        .filter(|(_, w)| {
            let v = f64::from_le_bytes((*w).try_into().expect("8-byte window"));
            v.is_finite() && TIMESTAMP_RANGE.contains(&v)
        })
        .map(|(i, _)| i)
        .collect()
}

fn plausible_id(window: &[u8], order: ByteOrder) -> Option<u64> {
    let w: [u8; 8] = window.try_into().ok()?;
    let value = match order {
        ByteOrder::Big => u64::from_be_bytes(w),
        ByteOrder::Little => u64::from_le_bytes(w),
    };
    (value >= 1 && value <= u64::from(u32::MAX)).then_some(value)
}

fn id_candidates(body: &[u8]) -> (Vec<IdCandidate>, Vec<IdCandidate>) {
    let anchors = timestamp_anchors(body);
    let near_anchor = |offset: usize| {
        anchors.is_empty()
            || anchors
                .iter()
                .any(|&a| a.abs_diff(offset) <= ANCHOR_REACH && !(a < offset + 8 && offset < a + 8))
    };

    // big-endian claims windows first, little-endian fills the gaps
    let mut claimed = vec![false; body.len()];
    let mut found = Vec::new();
    for order in [ByteOrder::Big, ByteOrder::Little] {
        let mut i = 0;
        while i + 8 <= body.len() {
            if claimed[i..i + 8].iter().any(|&c| c) || !near_anchor(i) {
                i += 1;
                continue;
            }
            if let Some(value) = plausible_id(&body[i..i + 8], order) {
                claimed[i..i + 8].iter_mut().for_each(|c| *c = true);
                found.push(IdCandidate {
                    offset: i,
                    value,
                    order,
                });
                i += 8;
            } else {
                i += 1;
            }
        }
    }
    found.sort_by_key(|c| c.offset);

    let mut cnids: Vec<IdCandidate> = Vec::new();
    let mut parents = Vec::new();
    for cand in found {
        match cnids.last() {
            Some(prev)
                if cand.offset - prev.offset <= PARENT_REACH
                    && cand.value < prev.value
                    && parents.last().map_or(true, |p: &IdCandidate| p.offset < prev.offset) =>
            {
                parents.push(cand)
            }
            _ => cnids.push(cand),
        }
    }
    (cnids, parents)
}
