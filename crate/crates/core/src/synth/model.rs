use std::collections::{BTreeMap, HashSet};
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pages::{self, RECORD_REGION_LEN, RESERVED_SUBTYPES};
use super::record::{
    self, RecordKind, SynthRecord, ATTR_FS_NAME, ATTR_STORE_CONFIGURATION, UTI_FOLDER,
    UTI_PROPERTY_LIST, UTI_VOLUME,
};
use super::{join_path, normalize_path, Result, StoreSpec, SynthError};
use crate::codec::{digest, RecordDigest};
use crate::format::MAP_CAPACITY;

const MARKER_LEN: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FileEvent {
    Create {
        path: String,
        #[serde(default)]
        folder: bool,
        #[serde(default)]
        attributes: BTreeMap<String, String>,
    },
    Delete {
        path: String,
    },
    /// Removes a folder with everything below it, or a single file, in one
    /// sweep. Every page holding an affected record is released whole.
    MassDelete {
        path: String,
    },
    IndexReset,
}

impl FileEvent {
    pub fn create(path: impl Into<String>) -> Self {
        Self::Create {
            path: path.into(),
            folder: false,
            attributes: BTreeMap::new(),
        }
    }

    pub fn create_folder(path: impl Into<String>) -> Self {
        Self::Create {
            path: path.into(),
            folder: true,
            attributes: BTreeMap::new(),
        }
    }

    pub fn delete(path: impl Into<String>) -> Self {
        Self::Delete { path: path.into() }
    }

    pub fn mass_delete(path: impl Into<String>) -> Self {
        Self::MassDelete { path: path.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Slot {
    /// Offset of the size marker within the inflated region.
    pub offset: usize,
    pub body_len: usize,
    pub cnid: u64,
}

impl Slot {
    fn footprint(&self) -> usize {
        MARKER_LEN + self.body_len
    }
}

/// A subtype-9 page in use. The inflated region is the source of truth;
/// deletions shift later records down and wipe the vacated tail.
#[derive(Debug, Clone, PartialEq)]
pub struct LivePage {
    region: Vec<u8>,
    slots: Vec<Slot>,
}

impl LivePage {
    fn new() -> Self {
        Self {
            region: vec![0; RECORD_REGION_LEN],
            slots: Vec::new(),
        }
    }

    pub fn region(&self) -> &[u8] {
        &self.region
    }

    pub fn slots(&self) -> &[Slot] {
        &self.slots
    }

    pub fn used(&self) -> usize {
        self.slots.last().map_or(0, |s| s.offset + s.footprint())
    }

    pub fn free_len(&self) -> usize {
        RECORD_REGION_LEN - self.used()
    }

    pub fn body(&self, slot: usize) -> &[u8] {
        let s = self.slots[slot];
        &self.region[s.offset + MARKER_LEN..s.offset + s.footprint()]
    }

    pub fn bodies(&self) -> impl Iterator<Item = &[u8]> + '_ {
        (0..self.slots.len()).map(|i| self.body(i))
    }

    fn fits(&self, body_len: usize) -> bool {
        MARKER_LEN + body_len <= self.free_len()
    }

    fn push(&mut self, cnid: u64, body: &[u8]) {
        let offset = self.used();
        self.region[offset..offset + MARKER_LEN].copy_from_slice(&(body.len() as u32).to_le_bytes());
        self.region[offset + MARKER_LEN..offset + MARKER_LEN + body.len()].copy_from_slice(body);
        self.slots.push(Slot {
            offset,
            body_len: body.len(),
            cnid,
        });
    }

    fn remove(&mut self, slot: usize) -> Vec<u8> {
        let used = self.used();
        let gone = self.slots.remove(slot);
        let start = gone.offset;
        let end = start + gone.footprint();
        let body = self.region[start + MARKER_LEN..end].to_vec();
        self.region.copy_within(end..used, start);
        self.region[used - gone.footprint()..used].fill(0);
        for later in &mut self.slots[slot..] {
            later.offset -= gone.footprint();
        }
        body
    }

    /// Deflated page bytes as they would appear on disk.
    pub fn image(&self) -> Vec<u8> {
        pages::compressed_page(&self.region, self.used() as u32)
    }
}

/// A page released from the store, kept byte-for-byte as it was just
/// before release.
#[derive(Debug, Clone, PartialEq)]
pub struct FreedPage {
    pub bytes: Vec<u8>,
    /// Record bodies the page held, in slot order.
    pub bodies: Vec<Vec<u8>>,
    /// Index into the event log of the event that released it.
    pub event: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RecordDelta {
    pub added: Vec<RecordDigest>,
    pub removed: Vec<RecordDigest>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoggedEvent {
    pub event: FileEvent,
    pub delta: RecordDelta,
    /// Indices into the freed-page pool added by this event.
    pub freed: Range<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Node {
    cnid: u64,
    folder: bool,
}

#[derive(Debug, Clone)]
pub struct StoreModel {
    spec: StoreSpec,
    budget: usize,
    fixed_pages: Vec<Vec<u8>>,
    generation: u64,
    guid: String,
    live_pages: Vec<LivePage>,
    freed_pages: Vec<FreedPage>,
    next_cnid: u64,
    nodes: BTreeMap<String, Node>,
    baseline: [u64; 2],
    event_log: Vec<LoggedEvent>,
}

impl StoreModel {
    pub fn from_spec(spec: &StoreSpec) -> Result<Self> {
        Self::from_spec_with_budget(spec, MAP_CAPACITY)
    }

    /// `budget` caps the number of data pages the store may occupy.
    pub fn from_spec_with_budget(spec: &StoreSpec, budget: usize) -> Result<Self> {
        let mut fixed_pages = pages::attribute_pages(&record::attribute_entries());
        fixed_pages.extend(pages::uti_pages(&record::uti_entries()));
        fixed_pages.extend(RESERVED_SUBTYPES.iter().map(|&s| pages::reserved_page(s)));
        let mut model = Self {
            spec: spec.clone(),
            budget,
            fixed_pages,
            generation: 0,
            guid: String::new(),
            live_pages: Vec::new(),
            freed_pages: Vec::new(),
            next_cnid: 1,
            nodes: BTreeMap::new(),
            baseline: [0; 2],
            event_log: Vec::new(),
        };
        model.guid = model.make_guid();
        model.insert_baseline()?;

        let mut pending: Vec<_> = spec.folders.iter().collect();
        while !pending.is_empty() {
            let before = pending.len();
            let mut rest = Vec::new();
            for folder in pending {
                if model.is_folder(&normalize_path(&folder.parent)) {
                    let path = join_path(&folder.parent, &folder.name);
                    model.validate_name(&folder.name, &path)?;
                    model.insert_item(&path, true, &folder.attributes)?;
                } else {
                    rest.push(folder);
                }
            }
            if rest.len() == before {
                return Err(SynthError::UnknownTarget(normalize_path(&rest[0].parent)));
            }
            pending = rest;
        }
        for file in &spec.files {
            let parent = normalize_path(&file.parent);
            if !model.is_folder(&parent) {
                return Err(SynthError::UnknownTarget(parent));
            }
            let path = join_path(&file.parent, &file.name);
            model.validate_name(&file.name, &path)?;
            model.insert_item(&path, false, &file.attributes)?;
        }
        Ok(model)
    }

    /// Rebuilds the model for `spec` and applies `events` in order.
    pub fn replay(spec: &StoreSpec, events: &[FileEvent]) -> Result<Self> {
        let mut model = Self::from_spec(spec)?;
        for event in events {
            model.apply(event.clone())?;
        }
        Ok(model)
    }

    pub fn spec(&self) -> &StoreSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.spec.seed
    }

    pub fn guid(&self) -> &str {
        &self.guid
    }

    pub fn next_cnid(&self) -> u64 {
        self.next_cnid
    }

    pub fn live_pages(&self) -> &[LivePage] {
        &self.live_pages
    }

    pub fn freed_pages(&self) -> &[FreedPage] {
        &self.freed_pages
    }

    pub fn event_log(&self) -> &[LoggedEvent] {
        &self.event_log
    }

    pub fn events(&self) -> Vec<FileEvent> {
        self.event_log.iter().map(|e| e.event.clone()).collect()
    }

    /// CNID of the live item at `path`.
    pub fn lookup(&self, path: &str) -> Option<u64> {
        self.nodes.get(&normalize_path(path)).map(|n| n.cnid)
    }

    /// Live item paths in sorted order.
    pub fn paths(&self) -> impl Iterator<Item = &str> + '_ {
        self.nodes.keys().map(String::as_str)
    }

    pub fn is_folder_path(&self, path: &str) -> bool {
        self.is_folder(&normalize_path(path))
    }

    pub fn live_record_count(&self) -> usize {
        self.live_pages.iter().map(|p| p.slots.len()).sum()
    }

    /// Record bodies in page and slot order.
    pub fn live_records(&self) -> Vec<Vec<u8>> {
        self.live_pages
            .iter()
            .flat_map(|p| p.bodies().map(<[u8]>::to_vec))
            .collect()
    }

    pub fn volume_path(&self, dot_store: bool) -> String {
        let file = if dot_store { ".store.db" } else { "store.db" };
        format!("/.Spotlight-V100/Store-V2/{}/{file}", self.guid)
    }

    /// Data pages in store order: tables, bookkeeping, then records.
    pub fn data_pages(&self) -> Vec<Vec<u8>> {
        let mut out = self.fixed_pages.clone();
        out.extend(self.live_pages.iter().map(LivePage::image));
        out
    }

    pub fn emit(&self) -> Vec<u8> {
        pages::assemble(&self.volume_path(false), &self.data_pages())
    }

    pub fn emit_dot_store(&self) -> Vec<u8> {
        pages::assemble(&self.volume_path(true), &self.data_pages())
    }

    /// `(.store.db, store.db)` where the second lags `lag` events behind.
    pub fn emit_store_pair(&self, lag: usize) -> Result<(Vec<u8>, Vec<u8>)> {
        let events = self.events();
        let keep = events.len().saturating_sub(lag);
        let lagging = Self::replay(&self.spec, &events[..keep])?;
        Ok((self.emit_dot_store(), lagging.emit()))
    }

    /// Applies one event. On error the model is left unchanged.
    pub fn apply(&mut self, event: FileEvent) -> Result<()> {
        let freed_start = self.freed_pages.len();
        let event_index = self.event_log.len();
        let delta = match &event {
            FileEvent::Create {
                path,
                folder,
                attributes,
            } => {
                let path = normalize_path(path);
                let name = path.rsplit('/').next().unwrap_or_default().to_owned();
                let parent = parent_of(&path);
                if !self.is_folder(parent) {
                    return Err(SynthError::UnknownTarget(parent.to_owned()));
                }
                self.validate_name(&name, &path)?;
                let added = self.insert_item(&path, *folder, attributes)?;
                RecordDelta {
                    added: vec![added],
                    removed: Vec::new(),
                }
            }
            FileEvent::Delete { path } => {
                let path = normalize_path(path);
                let node = *self
                    .nodes
                    .get(&path)
                    .ok_or_else(|| SynthError::UnknownTarget(path.clone()))?;
                if node.folder && self.has_children(&path) {
                    return Err(SynthError::FolderNotEmpty(path));
                }
                let (page, slot) = self.locate(node.cnid);
                let body = self.live_pages[page].remove(slot);
                self.nodes.remove(&path);
                RecordDelta {
                    added: Vec::new(),
                    removed: vec![digest(&body)],
                }
            }
            FileEvent::MassDelete { path } => {
                let path = normalize_path(path);
                if !self.nodes.contains_key(&path) {
                    return Err(SynthError::UnknownTarget(path));
                }
                let doomed_paths = self.subtree(&path);
                let doomed: HashSet<u64> = doomed_paths.iter().map(|p| self.nodes[p].cnid).collect();
                let mut removed = Vec::new();
                let mut survivors = Vec::new();
                let mut kept = Vec::new();
                for page in std::mem::take(&mut self.live_pages) {
                    if !page.slots.iter().any(|s| doomed.contains(&s.cnid)) {
                        kept.push(page);
                        continue;
                    }
                    for (slot, body) in page.slots.iter().zip(page.bodies()) {
                        if doomed.contains(&slot.cnid) {
                            removed.push(digest(body));
                        } else {
                            survivors.push((slot.cnid, body.to_vec()));
                        }
                    }
                    self.freed_pages.push(FreedPage {
                        bytes: page.image(),
                        bodies: page.bodies().map(<[u8]>::to_vec).collect(),
                        event: event_index,
                    });
                }
                self.live_pages = kept;
                for (cnid, body) in survivors {
                    self.place(cnid, &body)
                        .expect("survivors fit in the pages they left");
                }
                for p in doomed_paths {
                    self.nodes.remove(&p);
                }
                RecordDelta {
                    added: Vec::new(),
                    removed,
                }
            }
            FileEvent::IndexReset => {
                let removed = self.live_records().iter().map(|b| digest(b)).collect();
                let data_pages = self.data_pages();
                let mut freed = vec![FreedPage {
                    bytes: pages::header_page(&self.volume_path(false)),
                    bodies: Vec::new(),
                    event: event_index,
                }];
                freed.push(FreedPage {
                    bytes: pages::map_page(&data_pages),
                    bodies: Vec::new(),
                    event: event_index,
                });
                let record_pages = std::mem::take(&mut self.live_pages);
                let fixed = self.fixed_pages.len();
                for (i, bytes) in data_pages.into_iter().enumerate() {
                    let bodies = match i.checked_sub(fixed) {
                        Some(r) => record_pages[r].bodies().map(<[u8]>::to_vec).collect(),
                        None => Vec::new(),
                    };
                    freed.push(FreedPage {
                        bytes,
                        bodies,
                        event: event_index,
                    });
                }
                self.freed_pages.extend(freed);
                self.nodes.clear();
                self.generation += 1;
                self.guid = self.make_guid();
                let added = self.insert_baseline()?;
                RecordDelta { added, removed }
            }
        };
        self.event_log.push(LoggedEvent {
            event,
            delta,
            freed: freed_start..self.freed_pages.len(),
        });
        Ok(())
    }

    fn make_guid(&self) -> String {
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
        rng.set_stream(u64::MAX - self.generation);
        let b: [u8; 16] = rng.gen();
        let hex: String = b.iter().map(|x| format!("{x:02X}")).collect();
        format!(
            "{}-{}-{}-{}-{}",
            &hex[..8],
            &hex[8..12],
            &hex[12..16],
            &hex[16..20],
            &hex[20..]
        )
    }

    fn timestamp(&self, cnid: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
        rng.set_stream(cnid);
        // Seconds after 2001-01-01, roughly 2010 to 2024.
        rng.gen_range(3.0e8..7.5e8)
    }

    fn insert_baseline(&mut self) -> Result<Vec<RecordDigest>> {
        let config_cnid = self.next_cnid;
        let config = SynthRecord {
            kind: RecordKind::Configuration,
            cnid: config_cnid,
            parent_cnid: 0,
            uti: UTI_PROPERTY_LIST,
            timestamp: self.timestamp(config_cnid),
            strings: vec![
                (ATTR_FS_NAME, "store.plist".to_owned()),
                (ATTR_STORE_CONFIGURATION, record::configuration_plist(&self.guid)),
            ],
        };
        let root = SynthRecord {
            kind: RecordKind::Root,
            cnid: config_cnid + 1,
            parent_cnid: config_cnid,
            uti: UTI_VOLUME,
            timestamp: self.timestamp(config_cnid + 1),
            strings: vec![(ATTR_FS_NAME, self.spec.volume_name.clone())],
        };
        if !record::is_storable(&self.spec.volume_name) {
            return Err(SynthError::InvalidName(self.spec.volume_name.clone()));
        }
        let mut digests = Vec::new();
        for r in [config, root] {
            let body = r.encode();
            self.check_size(&body, &self.spec.volume_name)?;
            self.place(r.cnid, &body)?;
            digests.push(digest(&body));
        }
        self.baseline = [config_cnid, config_cnid + 1];
        self.next_cnid = config_cnid + 2;
        Ok(digests)
    }

    fn validate_name(&self, name: &str, path: &str) -> Result<()> {
        if !record::is_storable(name) || name.contains('/') || name == "." || name == ".." {
            return Err(SynthError::InvalidName(name.to_owned()));
        }
        if self.nodes.contains_key(path) {
            return Err(SynthError::DuplicateName(path.to_owned()));
        }
        Ok(())
    }

    /// Adds a record for a new item whose parent is known to be a folder.
    fn insert_item(
        &mut self,
        path: &str,
        folder: bool,
        attributes: &BTreeMap<String, String>,
    ) -> Result<RecordDigest> {
        let mut strings = Vec::with_capacity(attributes.len() + 1);
        let name = path.rsplit('/').next().unwrap_or(path);
        strings.push((ATTR_FS_NAME, name.to_owned()));
        let mut extra = Vec::new();
        for (key, value) in attributes {
            let number = record::attribute_number(key)
                .ok_or_else(|| SynthError::UnknownAttribute(key.clone()))?;
            if number == ATTR_FS_NAME || number == ATTR_STORE_CONFIGURATION {
                return Err(SynthError::ReservedAttribute(key.clone()));
            }
            if !record::is_storable(value) {
                return Err(SynthError::UnstorableValue(key.clone()));
            }
            extra.push((number, value.clone()));
        }
        extra.sort();
        strings.extend(extra);

        let parent = parent_of(path);
        let parent_cnid = if parent.is_empty() {
            self.baseline[1]
        } else {
            self.nodes[parent].cnid
        };
        let cnid = self.next_cnid;
        let body = SynthRecord {
            kind: if folder {
                RecordKind::Folder
            } else {
                RecordKind::File
            },
            cnid,
            parent_cnid,
            uti: if folder {
                UTI_FOLDER
            } else {
                record::uti_for_name(name)
            },
            timestamp: self.timestamp(cnid),
            strings,
        }
        .encode();
        self.check_size(&body, path)?;
        self.place(cnid, &body)?;
        self.next_cnid += 1;
        self.nodes.insert(path.to_owned(), Node { cnid, folder });
        Ok(digest(&body))
    }

    fn check_size(&self, body: &[u8], what: &str) -> Result<()> {
        if MARKER_LEN + body.len() > RECORD_REGION_LEN {
            return Err(SynthError::RecordTooLarge(what.to_owned()));
        }
        Ok(())
    }

    /// Appends to the last record page, opening a new one when full.
    fn place(&mut self, cnid: u64, body: &[u8]) -> Result<()> {
        let fits = self.live_pages.last().is_some_and(|p| p.fits(body.len()));
        if !fits {
            if self.fixed_pages.len() + self.live_pages.len() + 1 > self.budget {
                return Err(SynthError::SpecTooLarge {
                    budget: self.budget,
                });
            }
            self.live_pages.push(LivePage::new());
        }
        self.live_pages
            .last_mut()
            .expect("page just ensured")
            .push(cnid, body);
        Ok(())
    }

    fn locate(&self, cnid: u64) -> (usize, usize) {
        for (p, page) in self.live_pages.iter().enumerate() {
            if let Some(s) = page.slots.iter().position(|s| s.cnid == cnid) {
                return (p, s);
            }
        }
        unreachable!("live node {cnid} has no record")
    }

    fn is_folder(&self, path: &str) -> bool {
        path.is_empty() || self.nodes.get(path).is_some_and(|n| n.folder)
    }

    fn has_children(&self, path: &str) -> bool {
        let prefix = format!("{path}/");
        self.nodes
            .range(prefix.clone()..)
            .next()
            .is_some_and(|(k, _)| k.starts_with(&prefix))
    }

    fn subtree(&self, path: &str) -> Vec<String> {
        let prefix = format!("{path}/");
        let mut out = vec![path.to_owned()];
        out.extend(
            self.nodes
                .range(prefix.clone()..)
                .take_while(|(k, _)| k.starts_with(&prefix))
                .map(|(k, _)| k.clone()),
        );
        out
    }
}

fn parent_of(path: &str) -> &str {
    path.rsplit_once('/').map_or("", |(p, _)| p)
}
