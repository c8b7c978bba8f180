use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::{Confidence, Region, ScanOptions, ScanOutcome};
use crate::format::{PageKind, Subtype};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScanParameters {
    pub sector_size: usize,
    pub page_size: usize,
    pub byte_granular: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PageSummary {
    pub source_offset: u64,
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subtype: Option<Subtype>,
    pub confidence: Confidence,
    pub record_count: usize,
    pub truncated_record: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ConfidenceCounts {
    pub confirmed: usize,
    pub candidate: usize,
    pub rejected: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CarveTotals {
    /// Confirmed data pages.
    pub pages_recovered: usize,
    /// Records on Confirmed subtype-9 pages.
    pub records_recovered: usize,
    pub header_pages: usize,
    pub map_pages: usize,
    /// Confirmed and Candidate data pages by subtype.
    pub per_subtype: BTreeMap<u32, usize>,
    pub per_confidence: ConfidenceCounts,
    pub suppressed_hits: usize,
    pub unreadable: Vec<Region>,
    pub bytes_scanned: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CarveReport {
    pub version: u32,
    pub parameters: ScanParameters,
    pub pages: Vec<PageSummary>,
    pub totals: CarveTotals,
}

pub fn carve_report(outcome: &ScanOutcome, options: &ScanOptions) -> CarveReport {
    let mut totals = CarveTotals {
        suppressed_hits: outcome.suppressed.len(),
        unreadable: outcome.unreadable.clone(),
        bytes_scanned: outcome.bytes_scanned,
        ..CarveTotals::default()
    };
    totals.per_confidence.rejected = outcome.rejected.len();
    let mut pages = Vec::with_capacity(outcome.pages.len());
    for page in &outcome.pages {
        let confirmed = page.confidence == Confidence::Confirmed;
        match page.confidence {
            Confidence::Confirmed => totals.per_confidence.confirmed += 1,
            Confidence::Candidate => totals.per_confidence.candidate += 1,
            Confidence::Rejected => totals.per_confidence.rejected += 1,
        }
        let kind = match page.kind {
            PageKind::Header => {
                totals.header_pages += 1;
                "header"
            }
            PageKind::Map => {
                totals.map_pages += 1;
                "map"
            }
            PageKind::Data(subtype) => {
                *totals.per_subtype.entry(subtype.raw()).or_default() += 1;
                if confirmed {
                    totals.pages_recovered += 1;
                    if subtype == Subtype::MetadataRecords {
                        totals.records_recovered += page.record_count;
                    }
                }
                "data"
            }
            PageKind::NotAPage => "none",
        };
        pages.push(PageSummary {
            source_offset: page.source_offset,
            kind,
            subtype: page.subtype(),
            confidence: page.confidence,
            record_count: page.record_count,
            truncated_record: page.truncation.is_some(),
            error: page.error.clone(),
        });
    }
    CarveReport {
        version: REPORT_VERSION,
        parameters: ScanParameters {
            sector_size: options.sector_size,
            page_size: options.page_size,
            byte_granular: options.byte_granular,
        },
        pages,
        totals,
    }
}

/// File name for a dumped page.
pub fn dump_file_name(offset: u64) -> String {
    format!("page_{offset}.bin")
}

impl CarveReport {
    /// Plain-text summary, one row of totals then one row per page.
    pub fn to_table(&self) -> String {
        let t = &self.totals;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<16} {:<20} {:<11} {:<9} {:<8} {:<5}",
            "Pages recovered", "Unallocated records", "Candidates", "Rejected", "Headers", "Maps"
        );
        let _ = writeln!(
            out,
            "{:<16} {:<20} {:<11} {:<9} {:<8} {:<5}",
            t.pages_recovered,
            t.records_recovered,
            t.per_confidence.candidate,
            t.per_confidence.rejected,
            t.header_pages,
            t.map_pages
        );
        if !self.pages.is_empty() {
            let _ = writeln!(out);
            let _ = writeln!(
                out,
                "{:<14} {:<7} {:<8} {:<10} {:<8}",
                "offset", "kind", "subtype", "confidence", "records"
            );
            for p in &self.pages {
                let subtype = p.subtype.map_or_else(|| "-".to_owned(), |s| s.raw().to_string());
                let confidence = match p.confidence {
                    Confidence::Confirmed => "confirmed",
                    Confidence::Candidate => "candidate",
                    Confidence::Rejected => "rejected",
                };
                let _ = writeln!(
                    out,
                    "{:<14} {:<7} {:<8} {:<10} {:<8}",
                    p.source_offset, p.kind, subtype, confidence, p.record_count
                );
            }
        }
        out.lines().map(|l| format!("{}\n", l.trim_end())).collect()
    }
}
