//! Signature carving of store pages out of flat byte streams.
//!
//! The image is read in chunks that overlap by one page, so a page
//! straddling a chunk seam is still seen whole. Hits inside a chunk are
//! validated in parallel; overlap resolution then runs in offset order,
//! which keeps the output independent of chunk size and worker count.

mod report;

use std::io::{self, Read};

use memchr::memchr2_iter;
use rayon::prelude::*;
use serde::Serialize;

use crate::codec::{page_records, CodecError, RawRecord, Truncation};
use crate::format::{
    classify_page, read_u32_le, DataPage, PageKind, Subtype, DATA_PAGE_SIZE,
    DATA_PHYSICAL_SIZE_OFFSET, HEADER_PAGE_SIZE, HEADER_SIZE_OFFSET, MAP_PAGE_SIZE_OFFSET,
};

pub use report::{carve_report, dump_file_name, REPORT_VERSION, CarveReport, CarveTotals, ConfidenceCounts, PageSummary, ScanParameters};

pub const DEFAULT_SECTOR_SIZE: usize = 512;
const DEFAULT_CHUNK_SIZE: usize = 8 << 20;
const READ_BLOCK: usize = 64 << 10;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CarveError {
    #[error("sector size {sector} must be non-zero and divide the page size {page}")]
    BadSectorSize { sector: usize, page: usize },
    #[error("page size {0} is too small to hold a page header")]
    BadPageSize(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScanOptions {
    pub sector_size: usize,
    pub page_size: usize,
    /// Test every byte offset instead of sector boundaries only.
    pub byte_granular: bool,
    /// Bytes of fresh input per chunk. Does not affect results.
    pub chunk_size: usize,
    /// Worker threads for validation; `None` uses the global pool.
    pub workers: Option<usize>,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            sector_size: DEFAULT_SECTOR_SIZE,
            page_size: DATA_PAGE_SIZE as usize,
            byte_granular: false,
            chunk_size: DEFAULT_CHUNK_SIZE,
            workers: None,
        }
    }
}

impl ScanOptions {
    pub fn check(&self) -> Result<(), CarveError> {
        if self.page_size < HEADER_PAGE_SIZE as usize {
            return Err(CarveError::BadPageSize(self.page_size));
        }
        if self.sector_size == 0 || self.page_size % self.sector_size != 0 {
            return Err(CarveError::BadSectorSize {
                sector: self.sector_size,
                page: self.page_size,
            });
        }
        Ok(())
    }

    fn step(&self) -> usize {
        if self.byte_granular {
            1
        } else {
            self.sector_size
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    Confirmed,
    /// Signature and size field check out but the payload would not inflate.
    Candidate,
    Rejected,
}

/// Outcome of validating the bytes at one signature hit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Validation {
    pub kind: PageKind,
    pub confidence: Confidence,
    /// Bytes the page claims, used for overlap resolution.
    pub extent: usize,
    pub records: Vec<RawRecord>,
    pub truncation: Option<Truncation>,
    pub error: Option<String>,
}

impl Validation {
    fn rejected(kind: PageKind, why: impl Into<String>) -> Self {
        Self {
            kind,
            confidence: Confidence::Rejected,
            extent: 0,
            records: Vec::new(),
            truncation: None,
            error: Some(why.into()),
        }
    }

    fn accepted(kind: PageKind, confidence: Confidence, extent: usize) -> Self {
        Self {
            kind,
            confidence,
            extent,
            records: Vec::new(),
            truncation: None,
            error: None,
        }
    }
}

/// Grades `bytes`, which start at a signature, as a page of `page_size`.
pub fn validate_page(bytes: &[u8], page_size: usize) -> Validation {
    let Ok(kind) = classify_page(bytes) else {
        return Validation::rejected(PageKind::NotAPage, "shorter than a page header");
    };
    match kind {
        PageKind::NotAPage => Validation::rejected(kind, "no page signature"),
        PageKind::Header => match read_u32_le(bytes, HEADER_SIZE_OFFSET) {
            Ok(HEADER_PAGE_SIZE) if bytes.len() >= HEADER_PAGE_SIZE as usize => {
                Validation::accepted(kind, Confidence::Confirmed, HEADER_PAGE_SIZE as usize)
            }
            Ok(HEADER_PAGE_SIZE) => Validation::accepted(kind, Confidence::Candidate, bytes.len()),
            Ok(size) => Validation::rejected(kind, format!("header size field {size}")),
            Err(_) => Validation::rejected(kind, "header cut short"),
        },
        PageKind::Map => match read_u32_le(bytes, MAP_PAGE_SIZE_OFFSET) {
            Ok(size) if size as usize == page_size => {
                let confidence = if bytes.len() >= page_size {
                    Confidence::Confirmed
                } else {
                    Confidence::Candidate
                };
                Validation::accepted(kind, confidence, page_size)
            }
            Ok(size) => Validation::rejected(kind, format!("map page size field {size}")),
            Err(_) => Validation::rejected(kind, "map cut short"),
        },
        PageKind::Data(subtype) => {
            let size = read_u32_le(bytes, DATA_PHYSICAL_SIZE_OFFSET).unwrap_or(0);
            if size as usize != page_size {
                return Validation::rejected(kind, format!("physical size field {size}"));
            }
            let len = bytes.len().min(page_size);
            if subtype != Subtype::MetadataRecords {
                let confidence = if len == page_size {
                    Confidence::Confirmed
                } else {
                    Confidence::Candidate
                };
                return Validation::accepted(kind, confidence, page_size);
            }
            let page = DataPage::from_bytes(0, 0, bytes[..len].to_vec())
                .expect("classified as a data page");
            match page_records(&page) {
                Ok(walk) => Validation {
                    records: walk.records,
                    truncation: walk.truncation,
                    ..Validation::accepted(kind, Confidence::Confirmed, page_size)
                },
                Err(e @ (CodecError::Decompress { .. } | CodecError::NoPlausibleWalk { .. })) => {
                    Validation {
                        error: Some(e.to_string()),
                        ..Validation::accepted(kind, Confidence::Candidate, page_size)
                    }
                }
                Err(e) => Validation::rejected(kind, e.to_string()),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CarvedPage {
    pub source_offset: u64,
    pub kind: PageKind,
    pub confidence: Confidence,
    /// Records walked; 0 unless a subtype-9 page inflated.
    pub record_count: usize,
    pub records: Vec<RawRecord>,
    pub truncation: Option<Truncation>,
    pub error: Option<String>,
    /// Page bytes as carved (may be short at the end of the image).
    pub bytes: Vec<u8>,
}

impl CarvedPage {
    pub fn is_data(&self) -> bool {
        matches!(self.kind, PageKind::Data(_))
    }

    pub fn subtype(&self) -> Option<Subtype> {
        match self.kind {
            PageKind::Data(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Suppressed {
    pub offset: u64,
    /// Start of the page that already claimed this offset.
    pub inside: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Region {
    pub offset: u64,
    pub len: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScanOutcome {
    /// Confirmed and Candidate pages, ordered by offset.
    pub pages: Vec<CarvedPage>,
    /// Signature hits that failed validation.
    pub rejected: Vec<u64>,
    pub suppressed: Vec<Suppressed>,
    /// Input ranges that could not be read and were scanned as zeros.
    pub unreadable: Vec<Region>,
    pub bytes_scanned: u64,
}

/// Scans an in-memory image.
pub fn scan_image(bytes: &[u8], options: &ScanOptions) -> Result<ScanOutcome, CarveError> {
    scan_reader(bytes, options)
}

/// Scans a stream with memory bounded by the chunk size plus one page.
///
/// A failed read is logged as an unreadable region of one read block,
/// scanned as zeros, and reading resumes; the reader is assumed to have
/// moved past the failed block.
pub fn scan_reader<R: Read>(mut reader: R, options: &ScanOptions) -> Result<ScanOutcome, CarveError> {
    options.check()?;
    let pool = options.workers.map(|n| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool")
    });
    let chunk = options.chunk_size.max(options.page_size);
    let overlap = options.page_size;
    let mut out = ScanOutcome::default();
    let mut window: Vec<u8> = Vec::with_capacity(chunk + overlap);
    let mut base = 0u64;
    let mut claimed_until = 0u64;
    let mut claimed_by = 0u64;
    let mut eof = false;

    loop {
        while !eof && window.len() < chunk + overlap {
            let want = (chunk + overlap - window.len()).min(READ_BLOCK);
            let start = window.len();
            window.resize(start + want, 0);
            match reader.read(&mut window[start..]) {
                Ok(0) => {
                    window.truncate(start);
                    eof = true;
                }
                Ok(n) => window.truncate(start + n),
                Err(e) if e.kind() == io::ErrorKind::Interrupted => window.truncate(start),
                Err(e) => {
                    let offset = base + start as u64;
                    log::warn!("unreadable region at {offset:#x}+{want:#x}: {e}");
                    window[start..].fill(0);
                    out.unreadable.push(Region {
                        offset,
                        len: want as u64,
                    });
                }
            }
        }
        let scan_end = if eof { window.len() } else { chunk };
        let hits = signature_hits(&window, scan_end, base, options.step());
        let validate = || -> Vec<(usize, Validation)> {
            hits.par_iter()
                .map(|&at| {
                    let end = (at + options.page_size).min(window.len());
                    (at, validate_page(&window[at..end], options.page_size))
                })
                .collect()
        };
        let validated = match &pool {
            Some(pool) => pool.install(validate),
            None => validate(),
        };
        for (at, v) in validated {
            let offset = base + at as u64;
            if offset < claimed_until {
                log::debug!("suppressed hit at {offset:#x} inside page at {claimed_by:#x}");
                out.suppressed.push(Suppressed {
                    offset,
                    inside: claimed_by,
                });
                continue;
            }
            if v.confidence == Confidence::Rejected {
                out.rejected.push(offset);
                continue;
            }
            claimed_until = offset + v.extent as u64;
            claimed_by = offset;
            let end = (at + v.extent).min(window.len());
            out.pages.push(CarvedPage {
                source_offset: offset,
                kind: v.kind,
                confidence: v.confidence,
                record_count: v.records.len(),
                records: v.records,
                truncation: v.truncation,
                error: v.error,
                bytes: window[at..end].to_vec(),
            });
        }
        window.drain(..scan_end);
        base += scan_end as u64;
        if eof {
            break;
        }
    }
    out.bytes_scanned = base;
    for (i, page) in out.pages.iter_mut().enumerate() {
        for r in &mut page.records {
            r.page_index = i;
        }
    }
    Ok(out)
}

/// Offsets in `window[..scan_end]` that carry a page tag and sit on the
/// scan grid.
fn signature_hits(window: &[u8], scan_end: usize, base: u64, step: usize) -> Vec<usize> {
    let is_tag = |at: usize| {
        window
            .get(at..at + 4)
            .is_some_and(|t| crate::format::PageSignature::from_tag(t).is_some())
    };
    if step == 1 {
        return memchr2_iter(b'8', b'2', &window[..scan_end])
            .filter(|&at| is_tag(at))
            .collect();
    }
    let first = ((step as u64 - base % step as u64) % step as u64) as usize;
    (first..scan_end).step_by(step).filter(|&at| is_tag(at)).collect()
}
