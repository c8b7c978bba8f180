//! Acceptance checks, one line per criterion. Runs without the libtest
//! harness so that every criterion reports even when an earlier one fails.

use std::collections::BTreeMap;
use std::io::{self, Read};
use std::panic::{self, AssertUnwindSafe};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use spotlight_store::analysis::{collect_records, count_records, diff_stores};
use spotlight_store::carver::{scan_image, scan_reader, Confidence, ScanOptions};
use spotlight_store::codec::{
    digest, digest_hex, inflate_payload, page_records, parse_uti_page, split_records, CodecError,
    RecordDigest,
};
use spotlight_store::format::{
    classify_page, DataPage, DataPageHeader, PageKind, Subtype, DATA_MAGIC, DATA_PAGE_SIZE,
    HEADER_MAGIC, HEADER_PAGE_SIZE, HEADER_SIZE_OFFSET, MAP_MAGIC, MAP_PAGE_SIZE_OFFSET,
};
use spotlight_store::parser::{parse_header_page, parse_map_page, parse_store};
use spotlight_store::synth::pages::{assemble, header_page, map_page, record_page};
use spotlight_store::synth::record::{RecordKind, SynthRecord, UTI_DATA};
use spotlight_store::synth::{
    expected_record_count, export_unallocated, join_path, plant, FileEvent, FileSpec, FolderSpec,
    StoreModel, StoreSpec,
};

type Check = fn() -> Result<String, String>;

fn main() {
    let criteria: [(u32, Check); 9] = [
        (1, size_marker_walk),
        (2, count_round_trip),
        (3, empty_store_baseline),
        (4, carving_recall_precision),
        (5, persistence_scenario),
        (6, wipe_invariant),
        (7, diff_exactness),
        (8, corrupt_page_robustness),
        (9, byte_facts),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (n, check) in criteria {
        let started = Instant::now();
        let result = match panic::catch_unwind(AssertUnwindSafe(check)) {
            Ok(r) => r,
            Err(payload) => Err(panic_message(&payload)),
        };
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {n}: PASS ({secs:.2}s) {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n}: FAIL ({secs:.2}s) {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

fn panic_message(payload: &Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        format!("panicked: {s}")
    } else if let Some(s) = payload.downcast_ref::<String>() {
        format!("panicked: {s}")
    } else {
        "panicked".to_owned()
    }
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn within(started: Instant, limit: Duration, what: &str) -> Result<(), String> {
    let took = started.elapsed();
    ensure!(took < limit, "{what} took {took:?}, limit {limit:?}");
    Ok(())
}

// ---------------------------------------------------------------- helpers

fn random_spec(rng: &mut ChaCha8Rng, max_files: usize, max_folders: usize) -> StoreSpec {
    let folder_count = rng.gen_range(0..=max_folders);
    let file_count = rng.gen_range(0..=max_files);
    let mut folder_paths = vec![String::new()];
    let mut folders = Vec::with_capacity(folder_count);
    for i in 0..folder_count {
        let parent = folder_paths[rng.gen_range(0..folder_paths.len())].clone();
        let name = format!("dir{i}");
        folder_paths.push(join_path(&parent, &name));
        folders.push(FolderSpec {
            name,
            parent,
            ..FolderSpec::default()
        });
    }
    let extensions = ["txt", "pdf", "plist", "jpg", "eml", "bin"];
    let files = (0..file_count)
        .map(|i| FileSpec {
            name: format!("file{i}.{}", extensions[rng.gen_range(0..extensions.len())]),
            parent: folder_paths[rng.gen_range(0..folder_paths.len())].clone(),
            ..FileSpec::default()
        })
        .collect();
    StoreSpec {
        files,
        folders,
        seed: rng.next_u64(),
        ..StoreSpec::empty(0)
    }
}

/// Applies random events until `want` have succeeded, running `after`
/// once per successful event.
fn random_events(
    model: &mut StoreModel,
    rng: &mut ChaCha8Rng,
    want: usize,
    mut after: impl FnMut(&StoreModel, &FileEvent) -> Result<(), String>,
) -> Result<(), String> {
    let mut done = 0;
    let mut counter = 0usize;
    let mut attempts = 0;
    while done < want {
        attempts += 1;
        ensure!(attempts < want * 50, "event generator stalled");
        let paths: Vec<String> = model.paths().map(str::to_owned).collect();
        let folders: Vec<&String> = paths.iter().filter(|p| model.is_folder_path(p)).collect();
        let roll = rng.gen_range(0..100);
        let event = if roll < 45 || paths.is_empty() {
            counter += 1;
            let parent = if folders.is_empty() || rng.gen_bool(0.3) {
                String::new()
            } else {
                folders[rng.gen_range(0..folders.len())].clone()
            };
            let path = join_path(&parent, &format!("new{counter}-{:x}.txt", rng.next_u32()));
            if rng.gen_bool(0.15) {
                FileEvent::create_folder(path)
            } else {
                FileEvent::create(path)
            }
        } else if roll < 88 {
            FileEvent::delete(paths[rng.gen_range(0..paths.len())].clone())
        } else if roll < 97 {
            FileEvent::mass_delete(paths[rng.gen_range(0..paths.len())].clone())
        } else {
            FileEvent::IndexReset
        };
        if model.apply(event.clone()).is_ok() {
            done += 1;
            after(model, &event)?;
        }
    }
    Ok(())
}

fn synthetic_bodies(rng: &mut ChaCha8Rng, cnid_base: u64, n: usize) -> Vec<Vec<u8>> {
    (0..n as u64)
        .map(|i| {
            SynthRecord {
                kind: RecordKind::File,
                cnid: cnid_base + i,
                parent_cnid: 2,
                uti: UTI_DATA,
                timestamp: rng.gen_range(5.0e8..7.0e8),
                strings: vec![(1, format!("planted-{cnid_base}-{i}-{:08x}.dat", rng.next_u32()))],
            }
            .encode()
        })
        .collect()
}

fn multiset<'a>(items: impl IntoIterator<Item = &'a RecordDigest>) -> BTreeMap<RecordDigest, i64> {
    let mut out = BTreeMap::new();
    for d in items {
        *out.entry(*d).or_insert(0) += 1;
    }
    out
}

/// Reads seeded random bytes without holding them in memory.
struct RandomStream {
    rng: ChaCha8Rng,
    remaining: u64,
}

impl Read for RandomStream {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let n = (buf.len() as u64).min(self.remaining) as usize;
        self.rng.fill_bytes(&mut buf[..n]);
        self.remaining -= n as u64;
        Ok(n)
    }
}

// --------------------------------------------------------------- criteria

fn size_marker_walk() -> Result<String, String> {
    let mut stream = vec![0x8A, 0x08, 0x00, 0x00];
    stream.extend((0..2186u32).map(|i| (i % 251) as u8 | 1));
    stream.extend([0x10, 0x00, 0x00, 0x00]);
    stream.extend([0xAB; 16]);
    stream.extend([0; 4]);
    let started = Instant::now();
    let walk = split_records(&stream, 0);
    let took = started.elapsed();
    ensure!(walk.records.len() == 2, "walked {} records", walk.records.len());
    let first = &walk.records[0];
    ensure!(first.declared_size == 2186, "record 0 declares {}", first.declared_size);
    ensure!(first.body.len() == 2186, "record 0 body is {} bytes", first.body.len());
    let next = walk.records[1].stream_offset;
    ensure!(next == 2190, "next marker read at {next}");
    ensure!(took < Duration::from_millis(1), "walk took {took:?}");
    Ok(format!("record 0 = 2186 bytes, next marker at 2190, {took:?}"))
}

fn count_round_trip() -> Result<String, String> {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    let mut records = 0;
    for trial in 0..200 {
        let spec = random_spec(&mut rng, 5000, 200);
        let bytes = StoreModel::from_spec(&spec)
            .map_err(|e| format!("trial {trial}: {e}"))?
            .emit();
        let store = parse_store(&bytes).map_err(|e| format!("trial {trial}: {e}"))?;
        let count = count_records(&store);
        let want = expected_record_count(spec.files.len(), spec.folders.len());
        ensure!(count.errors.is_empty(), "trial {trial}: page errors {:?}", count.errors);
        ensure!(
            count.total == want,
            "trial {trial}: {} files, {} folders gave {} records, want {want}",
            spec.files.len(),
            spec.folders.len(),
            count.total
        );
        records += count.total;
    }
    within(started, Duration::from_secs(30), "200 round trips")?;
    Ok(format!("200/200 specs exact, {records} records in total"))
}

fn empty_store_baseline() -> Result<String, String> {
    let bytes = StoreModel::from_spec(&StoreSpec::empty(7))
        .map_err(|e| e.to_string())?
        .emit();
    let store = parse_store(&bytes).map_err(|e| e.to_string())?;
    let pages = store.total_page_count();
    let records = count_records(&store).total;
    ensure!(pages >= 8, "{pages} pages");
    ensure!(records == 2, "{records} records");
    Ok(format!("{pages} pages, {records} records"))
}

fn carving_recall_precision() -> Result<String, String> {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0004);
    let pages: Vec<Vec<u8>> = (0..50)
        .map(|p| record_page(&synthetic_bodies(&mut rng, 1000 + p * 100, 10)))
        .collect();
    let image = plant(64 << 20, &pages, 512, 0x5eed_0005);
    let outcome = scan_image(&image.bytes, &ScanOptions::default()).map_err(|e| e.to_string())?;
    let mut planted: Vec<u64> = image.placements.iter().map(|p| p.offset).collect();
    planted.sort_unstable();
    let confirmed: Vec<u64> = outcome
        .pages
        .iter()
        .filter(|p| p.confidence == Confidence::Confirmed)
        .map(|p| p.source_offset)
        .collect();
    ensure!(planted.len() == 50, "planted {} pages", planted.len());
    ensure!(confirmed == planted, "confirmed {} pages, offsets differ from the planted ones", confirmed.len());
    ensure!(
        outcome.pages.len() == 50,
        "{} extra candidate pages",
        outcome.pages.len() - confirmed.len()
    );
    let recovered: usize = outcome.pages.iter().map(|p| p.record_count).sum();
    ensure!(recovered == 500, "{recovered} records recovered");

    let noise = RandomStream {
        rng: ChaCha8Rng::seed_from_u64(0x5eed_0006),
        remaining: 1 << 30,
    };
    let outcome = scan_reader(noise, &ScanOptions::default()).map_err(|e| e.to_string())?;
    let false_hits = outcome
        .pages
        .iter()
        .filter(|p| p.confidence == Confidence::Confirmed)
        .count();
    ensure!(outcome.bytes_scanned == 1 << 30, "scanned {} bytes", outcome.bytes_scanned);
    ensure!(false_hits == 0, "{false_hits} Confirmed pages in random data");
    within(started, Duration::from_secs(60), "carving suite")?;
    Ok(format!(
        "50/50 planted pages Confirmed, 0 false positives; 1 GiB random: 0 Confirmed ({} rejected hits)",
        outcome.rejected.len()
    ))
}

fn persistence_scenario() -> Result<String, String> {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);
    let mut model = StoreModel::from_spec(&StoreSpec::empty(55)).map_err(|e| e.to_string())?;
    let apply = |model: &mut StoreModel, e: FileEvent| model.apply(e).map_err(|e| e.to_string());
    apply(&mut model, FileEvent::create_folder("Projects"))?;
    apply(&mut model, FileEvent::create_folder("Archive"))?;
    let mut project_files = Vec::new();
    for i in 0..1000 {
        let folder = if i < 700 { "Projects" } else { "Archive" };
        let name = format!("case{i:04}-{:08x}.docx", rng.next_u32());
        apply(&mut model, FileEvent::create(join_path(folder, &name)))?;
        if folder == "Projects" {
            project_files.push(name);
        }
    }
    let mut deleted = Vec::new();
    for _ in 0..300 {
        let name = project_files.swap_remove(rng.gen_range(0..project_files.len()));
        apply(&mut model, FileEvent::delete(join_path("Projects", &name)))?;
        deleted.push(name);
    }
    let live = parse_store(&model.emit()).map_err(|e| e.to_string())?;
    let live_records = collect_records(&live);
    ensure!(live_records.errors.is_empty(), "live store page errors");
    let hits = spotlight_store::codec::search_records(&live_records.records, &deleted);
    ensure!(hits.is_empty(), "{} live hits for individually deleted names", hits.len());
    ensure!(
        live_records.records.len() == 2 + 2 + 700,
        "{} live records after deletes",
        live_records.records.len()
    );

    let mut oracle: BTreeMap<RecordDigest, Vec<u8>> = BTreeMap::new();
    let mut expected: Vec<RecordDigest> = Vec::new();
    let before: Vec<Vec<u8>> = model.live_records();
    apply(&mut model, FileEvent::mass_delete("Archive"))?;
    let mass_removed = model.event_log().last().map(|e| e.delta.removed.clone()).unwrap_or_default();
    ensure!(mass_removed.len() == 301, "MassDelete removed {} records", mass_removed.len());
    let before_reset: Vec<Vec<u8>> = model.live_records();
    apply(&mut model, FileEvent::IndexReset)?;
    let reset_removed = model.event_log().last().map(|e| e.delta.removed.clone()).unwrap_or_default();
    ensure!(reset_removed.len() == 403, "IndexReset removed {} records", reset_removed.len());
    for body in before.into_iter().chain(before_reset) {
        oracle.insert(digest(&body), body);
    }
    expected.extend(&mass_removed);
    expected.extend(&reset_removed);

    let image = export_unallocated(&model, 0x5eed_0055);
    let outcome = scan_image(&image.bytes, &ScanOptions::default()).map_err(|e| e.to_string())?;
    let carved: Vec<&[u8]> = outcome
        .pages
        .iter()
        .filter(|p| p.confidence == Confidence::Confirmed)
        .flat_map(|p| p.records.iter().map(|r| r.body.as_slice()))
        .collect();
    let mut available = multiset(carved.iter().map(|b| digest(b)).collect::<Vec<_>>().iter());
    let mut missing = 0;
    for d in &expected {
        let slot = available.entry(*d).or_insert(0);
        if *slot > 0 && carved.iter().any(|b| *b == oracle[d].as_slice()) {
            *slot -= 1;
        } else {
            missing += 1;
        }
    }
    ensure!(missing == 0, "{missing} of {} freed records not recovered", expected.len());
    within(started, Duration::from_secs(60), "persistence scenario")?;
    Ok(format!(
        "0 live hits for 300 deleted names; {} MassDelete + {} IndexReset records carved byte-identical from {} pages",
        mass_removed.len(),
        reset_removed.len(),
        outcome.pages.len()
    ))
}

fn check_live_pages(model: &StoreModel) -> Result<(), String> {
    for (i, page) in model.live_pages().iter().enumerate() {
        let region = page.region();
        let used = page.used();
        ensure!(region[used..].iter().all(|&b| b == 0), "page {i}: non-zero byte past {used}");
        let walk = split_records(region, i);
        ensure!(walk.trailing_nonzero == 0, "page {i}: {} stray bytes", walk.trailing_nonzero);
        ensure!(walk.truncation.is_none(), "page {i}: truncated walk");
        ensure!(
            walk.records.len() == page.slots().len(),
            "page {i}: walked {} records, {} slots",
            walk.records.len(),
            page.slots().len()
        );
        let mut cursor = 0;
        for r in &walk.records {
            ensure!(r.stream_offset == cursor, "page {i}: gap before offset {}", r.stream_offset);
            cursor += r.footprint();
        }
        ensure!(cursor == used, "page {i}: records end at {cursor}, used {used}");
        let image = DataPage::from_bytes(i, 0, page.image()).map_err(|e| e.to_string())?;
        let inflated = inflate_payload(&image).map_err(|e| e.to_string())?;
        ensure!(inflated.bytes == region, "page {i}: image does not inflate to its region");
    }
    Ok(())
}

fn wipe_invariant() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0006);
    let mut deletes = 0;
    for seq in 0..1000 {
        let spec = random_spec(&mut rng, 60, 8);
        let mut model = StoreModel::from_spec(&spec).map_err(|e| format!("seq {seq}: {e}"))?;
        let steps = rng.gen_range(1..=12);
        random_events(&mut model, &mut rng, steps, |m, e| {
            if matches!(e, FileEvent::Delete { .. }) {
                deletes += 1;
                check_live_pages(m).map_err(|msg| format!("seq {seq}: {msg}"))?;
            }
            Ok(())
        })?;
        let store = parse_store(&model.emit()).map_err(|e| format!("seq {seq}: {e}"))?;
        let parsed: Vec<Vec<u8>> = collect_records(&store).records.into_iter().map(|r| r.body).collect();
        ensure!(parsed == model.live_records(), "seq {seq}: emitted records differ from the model");
    }
    ensure!(deletes > 1000, "only {deletes} deletes exercised");
    Ok(format!("1000 sequences, {deletes} deletes, tails zero and records contiguous"))
}

fn diff_exactness() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0007);
    let mut compared = 0;
    for trial in 0..100 {
        let lag = trial % 11;
        let spec = random_spec(&mut rng, 40, 5);
        let mut model = StoreModel::from_spec(&spec).map_err(|e| format!("trial {trial}: {e}"))?;
        let steps = lag + rng.gen_range(0..6);
        random_events(&mut model, &mut rng, steps, |_, _| Ok(()))?;
        let (dot, store) = model.emit_store_pair(lag).map_err(|e| format!("trial {trial}: {e}"))?;
        let a = parse_store(&store).map_err(|e| format!("trial {trial}: {e}"))?;
        let b = parse_store(&dot).map_err(|e| format!("trial {trial}: {e}"))?;
        let report = diff_stores(&a, &b);

        let log = model.event_log();
        let mut net: BTreeMap<String, i64> = BTreeMap::new();
        for logged in &log[log.len() - lag..] {
            for d in &logged.delta.added {
                *net.entry(digest_hex(d)).or_insert(0) += 1;
            }
            for d in &logged.delta.removed {
                *net.entry(digest_hex(d)).or_insert(0) -= 1;
            }
        }
        let mut got: BTreeMap<String, i64> = BTreeMap::new();
        for e in &report.added {
            *got.entry(e.digest.clone()).or_insert(0) += 1;
        }
        for e in &report.removed {
            *got.entry(e.digest.clone()).or_insert(0) -= 1;
        }
        net.retain(|_, n| *n != 0);
        ensure!(report.changed.is_empty(), "trial {trial}: digest diff reported changes");
        ensure!(got == net, "trial {trial} (lag {lag}): diff {got:?} != pending {net:?}");
        compared += report.added.len() + report.removed.len();
    }
    Ok(format!("100/100 trials exact, {compared} differing records"))
}

fn corrupt_page_robustness() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0008);
    let base = StoreModel::from_spec(&StoreSpec::empty(8)).map_err(|e| e.to_string())?;
    let fixed = base.data_pages().len() - base.live_pages().len();
    let mut pages: Vec<Vec<u8>> = base.data_pages().into_iter().take(fixed).collect();
    let mut want = Vec::new();
    for p in 0..100u64 {
        let n = rng.gen_range(1..40);
        want.push(n);
        pages.push(record_page(&synthetic_bodies(&mut rng, 100 + p * 1000, n)));
    }
    let bad = 37;
    let mut bytes = assemble("/.Spotlight-V100/Store-V2/00000000-0000-0000-0000-000000000000/store.db", &pages);
    let at = HEADER_PAGE_SIZE as usize + (1 + fixed + bad) * DATA_PAGE_SIZE as usize + 20 + 40;
    for b in &mut bytes[at..at + 64] {
        *b ^= 0x5A;
    }
    let store = parse_store(&bytes).map_err(|e| e.to_string())?;
    let record_pages: Vec<&DataPage> = store.pages_of(Subtype::MetadataRecords).collect();
    ensure!(record_pages.len() == 100, "{} subtype-9 pages", record_pages.len());
    let mut good = 0;
    let mut decompress = 0;
    for (i, page) in record_pages.iter().enumerate() {
        match page_records(page) {
            Ok(walk) => {
                ensure!(i != bad, "corrupted page parsed");
                ensure!(walk.records.len() == want[i], "page {i}: {} records, want {}", walk.records.len(), want[i]);
                good += 1;
            }
            Err(CodecError::Decompress { .. }) => decompress += 1,
            Err(e) => return Err(format!("page {i}: unexpected error {e}")),
        }
    }
    ensure!(good == 99 && decompress == 1, "{good} good pages, {decompress} decompress errors");
    let counted = count_records(&store);
    ensure!(counted.errors.len() == 1, "count reported {} errors", counted.errors.len());

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("store.db");
    std::fs::write(&path, &bytes).map_err(|e| e.to_string())?;
    let out = Command::new(env!("CARGO_BIN_EXE_spotstore"))
        .args(["--format", "json", "inspect"])
        .arg(&path)
        .output()
        .map_err(|e| e.to_string())?;
    let code = out.status.code();
    ensure!(code == Some(3), "inspect exited with {code:?}");
    let stderr = String::from_utf8_lossy(&out.stderr);
    let reported = stderr.lines().filter(|l| l.contains("zlib stream is corrupt")).count();
    ensure!(reported == 1, "stderr reports {reported} decompression failures:\n{stderr}");
    Ok(format!("99/100 pages counted, 1 decompress error, inspect exit 3 ({} records)", counted.total))
}

fn byte_facts() -> Result<String, String> {
    ensure!(&HEADER_MAGIC == b"8tsd", "header magic");
    ensure!(&MAP_MAGIC == b"2mbd", "map magic");
    ensure!(&DATA_MAGIC == b"2pbd", "data magic");

    let header = header_page("/.Spotlight-V100/Store-V2/00000000-0000-0000-0000-000000000000/store.db");
    ensure!(&header[..4] == b"8tsd", "generated header magic");
    let size = u32::from_le_bytes(header[HEADER_SIZE_OFFSET..HEADER_SIZE_OFFSET + 4].try_into().unwrap());
    ensure!(size == 4096, "header size field {size}");
    ensure!(header.len() == 4096, "header page is {} bytes", header.len());
    parse_header_page(&header).map_err(|e| e.to_string())?;

    let map = map_page(&[record_page(&[b"x".to_vec()])]);
    ensure!(&map[..4] == b"2mbd", "generated map magic");
    let page_size = u32::from_le_bytes(map[MAP_PAGE_SIZE_OFFSET..MAP_PAGE_SIZE_OFFSET + 4].try_into().unwrap());
    ensure!(page_size == 16384, "map page size {page_size}");
    let parsed = parse_map_page(&map).map_err(|e| e.to_string())?;
    ensure!(parsed.value.page_size == 16384, "parsed map page size {}", parsed.value.page_size);

    // first row of a dumped metadata page, plus the start of its payload
    let dumped: [u8; 20] = [
        0x32, 0x70, 0x62, 0x64, 0x00, 0x40, 0x00, 0x00, 0x02, 0x11, 0x00, 0x00, 0x09, 0x00, 0x00,
        0x00, 0x70, 0x35, 0x20, 0x34,
    ];
    ensure!(
        classify_page(&dumped).map_err(|e| e.to_string())? == PageKind::Data(Subtype::MetadataRecords),
        "dumped row does not classify as a subtype-9 page"
    );
    let h = DataPageHeader::parse(&dumped).map_err(|e| e.to_string())?;
    ensure!(h.physical_size == 16384 && h.allocated_size == 0x1102, "dumped header {h:?}");

    // UTI page as dumped; the duplicated 0x00 after record 2's number is dropped
    #[rustfmt::skip]
    let uti_dump: &[u8] = &[
        0x32, 0x70, 0x62, 0x64, 0x00, 0x40, 0x00, 0x00, 0x89, 0x19, 0x00, 0x00, 0x21, 0x00, 0x00, 0x00,
        0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,
        0x01, 0x00, 0x00, 0x00, 0x70, 0x75, 0x62, 0x6C, 0x69, 0x63, 0x2E, 0x6D, 0x65, 0x73, 0x73, 0x61,
        0x67, 0x65, 0x00, 0x02, 0x00, 0x00, 0x00, 0x63, 0x6F, 0x6D, 0x2E, 0x61, 0x70, 0x70, 0x6C, 0x65,
        0x2E, 0x6D, 0x61, 0x69, 0x6C, 0x2E, 0x65, 0x6D, 0x6C, 0x78, 0x00, 0x03, 0x00, 0x00, 0x00, 0x63,
        0x6F, 0x6D, 0x2E, 0x61, 0x70, 0x70, 0x6C, 0x65, 0x2E, 0x6D, 0x61, 0x69, 0x6C, 0x2E, 0x65, 0x6D,
        0x6C, 0x00,
    ];
    let mut page = uti_dump.to_vec();
    page.resize(DATA_PAGE_SIZE as usize, 0);
    let page = DataPage::from_bytes(0, 0, page).map_err(|e| e.to_string())?;
    ensure!(page.subtype() == Subtype::UtiTable, "dumped page subtype {:?}", page.subtype());
    let entries = parse_uti_page(&page).map_err(|e| e.to_string())?.value;
    let got: Vec<(u32, &str)> = entries.iter().take(2).map(|e| (e.record_number, e.uti.as_str())).collect();
    ensure!(
        got == [(1, "public.message"), (2, "com.apple.mail.emlx")],
        "dumped UTI entries {got:?}"
    );
    Ok("magics, map page size 16384, header size 4096, UTI entries 1-2 exact".to_owned())
}
