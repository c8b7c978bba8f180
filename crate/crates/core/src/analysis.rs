//! Record-level comparisons and counts across stores and carved images.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::carver::ScanOutcome;
use crate::codec::{digest_hex, extract_fields, page_records, search_records, ByteOrder, RawRecord};
use crate::format::Subtype;
use crate::parser::ParsedStore;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PageError {
    pub page_index: usize,
    pub offset: u64,
    pub message: String,
}

/// Every record a store's subtype-9 pages yield, plus the pages that
/// could not be walked.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StoreRecords {
    pub records: Vec<RawRecord>,
    pub errors: Vec<PageError>,
}

pub fn collect_records(store: &ParsedStore) -> StoreRecords {
    let mut out = StoreRecords::default();
    for page in store.pages_of(Subtype::MetadataRecords) {
        match page_records(page) {
            Ok(walk) => out.records.extend(walk.records),
            Err(e) => out.errors.push(PageError {
                page_index: page.index,
                offset: page.offset,
                message: e.to_string(),
            }),
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PageCount {
    pub page_index: usize,
    pub offset: u64,
    pub records: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RecordCount {
    pub total: usize,
    /// Subtype-9 pages that walked cleanly.
    pub per_page: Vec<PageCount>,
    /// Pages of each subtype, records or not.
    pub pages_per_subtype: BTreeMap<u32, usize>,
    pub errors: Vec<PageError>,
}

pub fn count_records(store: &ParsedStore) -> RecordCount {
    let mut out = RecordCount {
        pages_per_subtype: store.subtype_histogram(),
        ..RecordCount::default()
    };
    for page in store.pages_of(Subtype::MetadataRecords) {
        match page_records(page) {
            Ok(walk) => {
                out.total += walk.records.len();
                out.per_page.push(PageCount {
                    page_index: page.index,
                    offset: page.offset,
                    records: walk.records.len(),
                });
            }
            Err(e) => out.errors.push(PageError {
                page_index: page.index,
                offset: page.offset,
                message: e.to_string(),
            }),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffMethod {
    /// Records are identical when their bodies hash the same.
    DigestMultiset,
    /// Records are matched on an extracted CNID. Heuristic.
    CnidHeuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffStatus {
    Added,
    Removed,
    Changed,
}

/// One CSV row of a diff.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DiffEntry {
    pub status: DiffStatus,
    pub page: usize,
    pub slot: usize,
    pub digest: String,
    pub first_string: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DiffReport {
    pub method: DiffMethod,
    /// Records only in the second store.
    pub added: Vec<DiffEntry>,
    /// Records only in the first store.
    pub removed: Vec<DiffEntry>,
    /// CNID mode only: same CNID, different body (second store's side).
    pub changed: Vec<DiffEntry>,
    pub unchanged_count: usize,
}

impl DiffReport {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty() && self.changed.is_empty()
    }

    /// All entries in (status, page, slot) order.
    pub fn rows(&self) -> impl Iterator<Item = &DiffEntry> {
        self.removed.iter().chain(&self.added).chain(&self.changed)
    }
}

fn entry(status: DiffStatus, r: &RawRecord) -> DiffEntry {
    DiffEntry {
        status,
        page: r.page_index,
        slot: r.slot_index,
        digest: r.digest_hex(),
        first_string: extract_fields(&r.body).strings.into_iter().next().unwrap_or_default(),
    }
}

/// Multiset difference of two record lists by body digest. Duplicates
/// count separately; the later occurrences are the ones reported.
pub fn diff_records(a: &[RawRecord], b: &[RawRecord]) -> DiffReport {
    let mut sorted_a: Vec<&RawRecord> = a.iter().collect();
    let mut sorted_b: Vec<&RawRecord> = b.iter().collect();
    sorted_a.sort_by_key(|r| (r.page_index, r.slot_index));
    sorted_b.sort_by_key(|r| (r.page_index, r.slot_index));

    let tally = |records: &[&RawRecord]| {
        let mut counts: HashMap<[u8; 16], usize> = HashMap::new();
        for r in records {
            *counts.entry(r.digest).or_default() += 1;
        }
        counts
    };
    let surplus = |records: &[&RawRecord], mut other: HashMap<[u8; 16], usize>, status| {
        let mut out = Vec::new();
        for r in records {
            match other.get_mut(&r.digest) {
                Some(n) if *n > 0 => *n -= 1,
                _ => out.push(entry(status, r)),
            }
        }
        out
    };
    let added = surplus(&sorted_b, tally(&sorted_a), DiffStatus::Added);
    let removed = surplus(&sorted_a, tally(&sorted_b), DiffStatus::Removed);
    DiffReport {
        method: DiffMethod::DigestMultiset,
        unchanged_count: a.len() - removed.len(),
        added,
        removed,
        changed: Vec::new(),
    }
}

pub fn diff_stores(a: &ParsedStore, b: &ParsedStore) -> DiffReport {
    diff_records(&collect_records(a).records, &collect_records(b).records)
}

/// First big-endian CNID candidate, else the first little-endian one.
pub fn record_cnid(r: &RawRecord) -> Option<u64> {
    let fields = extract_fields(&r.body);
    let pick = |order| fields.cnid_candidates.iter().find(|c| c.order == order).map(|c| c.value);
    pick(ByteOrder::Big).or_else(|| pick(ByteOrder::Little))
}

fn key_by_cnid(records: &[RawRecord]) -> (BTreeMap<u64, &RawRecord>, Vec<RawRecord>) {
    let mut seen: BTreeMap<u64, Vec<&RawRecord>> = BTreeMap::new();
    let mut rest = Vec::new();
    for r in records {
        match record_cnid(r) {
            Some(id) => seen.entry(id).or_default().push(r),
            None => rest.push(r.clone()),
        }
    }
    let mut unique = BTreeMap::new();
    for (id, rs) in seen {
        if let [one] = rs[..] {
            unique.insert(id, one);
        } else {
            rest.extend(rs.into_iter().cloned());
        }
    }
    (unique, rest)
}

/// Matches records on their extracted CNID. Records without one, and
/// CNIDs occurring more than once in a store, fall back to digests.
pub fn diff_records_by_cnid(a: &[RawRecord], b: &[RawRecord]) -> DiffReport {
    let (ka, rest_a) = key_by_cnid(a);
    let (kb, rest_b) = key_by_cnid(b);
    let mut report = diff_records(&rest_a, &rest_b);
    report.method = DiffMethod::CnidHeuristic;
    for (id, ra) in &ka {
        match kb.get(id) {
            None => report.removed.push(entry(DiffStatus::Removed, ra)),
            Some(rb) if rb.digest != ra.digest => report.changed.push(entry(DiffStatus::Changed, rb)),
            Some(_) => report.unchanged_count += 1,
        }
    }
    for (id, rb) in &kb {
        if !ka.contains_key(id) {
            report.added.push(entry(DiffStatus::Added, rb));
        }
    }
    for list in [&mut report.added, &mut report.removed, &mut report.changed] {
        list.sort_by_key(|e| (e.page, e.slot));
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    LiveRecord,
    CarvedOnly,
    NotFound,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PersistenceRow {
    pub name: String,
    pub verdict: Verdict,
    pub live_hits: usize,
    pub carved_hits: usize,
}

/// Looks each name up as a byte substring of live and carved records.
/// Rows are sorted by name.
pub fn persistence_check_records<S: AsRef<str>>(
    live: &[RawRecord],
    carved: &[RawRecord],
    names: &[S],
) -> Vec<PersistenceRow> {
    let keys: Vec<&str> = names.iter().map(AsRef::as_ref).collect();
    let live_hits = search_records(live, &keys);
    let carved_hits = search_records(carved, &keys);
    let count = |hits: &[crate::codec::Hit], name: &str| {
        let mut records: Vec<_> = hits
            .iter()
            .filter(|h| h.keyword == name)
            .map(|h| (h.page_index, h.slot_index))
            .collect();
        records.dedup();
        records.len()
    };
    let mut rows: Vec<PersistenceRow> = names
        .iter()
        .map(|n| {
            let name = n.as_ref();
            let live_hits = count(&live_hits, name);
            let carved_hits = count(&carved_hits, name);
            let verdict = if live_hits > 0 {
                Verdict::LiveRecord
            } else if carved_hits > 0 {
                Verdict::CarvedOnly
            } else {
                Verdict::NotFound
            };
            PersistenceRow {
                name: name.to_owned(),
                verdict,
                live_hits,
                carved_hits,
            }
        })
        .collect();
    rows.sort_by(|a, b| a.name.cmp(&b.name));
    rows.dedup_by(|a, b| a.name == b.name);
    rows
}

pub fn persistence_check<S: AsRef<str>>(
    live: &ParsedStore,
    carved: &ScanOutcome,
    names: &[S],
) -> Vec<PersistenceRow> {
    let live = collect_records(live).records;
    let carved: Vec<RawRecord> = carved.pages.iter().flat_map(|p| p.records.iter().cloned()).collect();
    persistence_check_records(&live, &carved, names)
}

/// Hex digests of a record list, for callers comparing against an oracle.
pub fn digests(records: &[RawRecord]) -> Vec<String> {
    records.iter().map(|r| digest_hex(&r.digest)).collect()
}
