use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use spotlight_store::analysis::{
    collect_records, diff_records, diff_records_by_cnid, persistence_check, PageError,
    StoreRecords, Verdict,
};
use spotlight_store::carver::{
    carve_report, dump_file_name, scan_reader, Confidence, ScanOptions,
};
use spotlight_store::codec::{
    digest_hex, extract_fields, page_records, parse_attribute_page, parse_uti_page, search_records,
    ByteOrder, RawRecord,
};
use spotlight_store::format::Subtype;
use spotlight_store::parser::{parse_store, ParseError, ParsedStore};
use spotlight_store::synth::{export_unallocated, FileEvent, StoreModel, StoreSpec};

use crate::args::{Command, Format};
use crate::emit::{csv, csv_with_header, json_envelope, resolve, table};
use crate::input::{guard_output, is_stdin, read_all, HashingReader, InputInfo};

/// Data for stdout plus warnings that turn a success into exit status 3.
pub struct Output {
    pub text: String,
    pub warnings: Vec<String>,
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Input(String),
}

type Outcome = Result<Output, Failure>;

fn input_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Input(format!("{}: {e}", path.display()))
}

fn load_store(path: &Path) -> Result<(ParsedStore, InputInfo), Failure> {
    let (bytes, info) = read_all(path).map_err(|e| input_err(path, e))?;
    let store = parse_store(&bytes).map_err(|e| match e {
        ParseError::NotAStore => input_err(path, "NotAStore: no '8tsd' header signature at offset 0"),
        ParseError::Empty => input_err(path, "NotAStore: file is empty"),
        other => input_err(path, other),
    })?;
    Ok((store, info))
}

fn store_warnings(store: &ParsedStore) -> Vec<String> {
    store.warnings.iter().map(ToString::to_string).collect()
}

fn page_error_warnings(errors: &[PageError]) -> Vec<String> {
    errors
        .iter()
        .map(|e| format!("page {} @{:#x}: {}", e.page_index, e.offset, e.message))
        .collect()
}

fn first_string(r: &RawRecord) -> String {
    extract_fields(&r.body).strings.into_iter().next().unwrap_or_default()
}

pub fn run(command: Command, format: Option<Format>) -> Outcome {
    match command {
        Command::Inspect { store } => inspect(&store, resolve(format, None)),
        Command::Records { store, fields } => records(&store, fields, resolve(format, None)),
        Command::Attrs { store } => attrs(&store, resolve(format, Some(Format::Csv))),
        Command::Utis { store } => utis(&store, resolve(format, Some(Format::Csv))),
        Command::Search { store, keywords } => search(&store, &keywords, resolve(format, None)),
        Command::Carve {
            image,
            sector,
            page_size,
            byte_granular,
            dump_dir,
            workers,
            chunk_size,
        } => {
            let options = ScanOptions {
                sector_size: sector,
                page_size,
                byte_granular,
                chunk_size,
                workers,
            };
            carve(&image, &options, dump_dir.as_deref(), resolve(format, None))
        }
        Command::Diff { a, b, by_cnid } => diff(&a, &b, by_cnid, resolve(format, None)),
        Command::Persist {
            store,
            image,
            names,
        } => persist(&store, &image, &names, resolve(format, None)),
        Command::Gen { spec, output } => gen(&spec, &output, resolve(format, None)),
        Command::Simulate {
            spec,
            events,
            output,
            lag,
            filler_seed,
        } => simulate(&spec, &events, &output, lag, filler_seed, resolve(format, None)),
    }
}

#[derive(Serialize)]
struct PageRow {
    index: usize,
    offset: u64,
    magic: String,
    subtype: u32,
    physical_size: u32,
    allocated_size: u32,
    size2: u32,
    records: Option<usize>,
    error: Option<String>,
}

fn inspect(path: &Path, format: Format) -> Outcome {
    let (store, info) = load_store(path)?;
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    let mut total = 0;
    for page in &store.pages {
        let (records, error) = if page.subtype() == Subtype::MetadataRecords {
            match page_records(page) {
                Ok(walk) => {
                    total += walk.records.len();
                    (Some(walk.records.len()), None)
                }
                Err(e) => {
                    errors.push(PageError {
                        page_index: page.index,
                        offset: page.offset,
                        message: e.to_string(),
                    });
                    (None, Some(e.to_string()))
                }
            }
        } else {
            (None, None)
        };
        rows.push(PageRow {
            index: page.index,
            offset: page.offset,
            magic: String::from_utf8_lossy(&page.header.magic.tag()).into_owned(),
            subtype: page.subtype().raw(),
            physical_size: page.header.physical_size,
            allocated_size: page.header.allocated_size,
            size2: page.header.size2,
            records,
            error,
        });
    }
    let mut warnings = store_warnings(&store);
    warnings.extend(page_error_warnings(&errors));
    let text = match format {
        Format::Json => json_envelope(
            "inspect",
            &[info],
            json!({}),
            json!({
                "volume_path": store.header.volume_path,
                "header_page_size": store.header.header_page_size,
                "map": store.map.as_ref().map(|m| json!({
                    "page_size": m.page_size,
                    "page_count": m.page_count,
                    "page_type": m.page_type,
                    "entries": m.entries.len(),
                })),
                "total_pages": store.total_page_count(),
                "subtype_histogram": store.subtype_histogram(),
                "record_total": total,
                "slack_bytes": store.slack_bytes(),
                "pages": rows,
                "page_errors": errors,
                "warnings": store.warnings,
            }),
        ),
        Format::Csv => csv(&rows),
        Format::Table => {
            let mut out = format!(
                "volume path   {}\nheader size   {}\n",
                store.header.volume_path.as_deref().unwrap_or("-"),
                store.header.header_page_size
            );
            match &store.map {
                Some(m) => out.push_str(&format!(
                    "map           page_size {} page_count {} entries {}\n",
                    m.page_size,
                    m.page_count,
                    m.entries.len()
                )),
                None => out.push_str("map           missing\n"),
            }
            out.push_str(&format!(
                "pages         {}\nrecords       {}\nslack bytes   {}\n\n",
                store.total_page_count(),
                total,
                store.slack_bytes()
            ));
            let cells: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.index.to_string(),
                        r.offset.to_string(),
                        r.magic.clone(),
                        r.subtype.to_string(),
                        r.allocated_size.to_string(),
                        r.records.map_or("-".into(), |n| n.to_string()),
                        r.error.clone().unwrap_or_default(),
                    ]
                })
                .collect();
            out.push_str(&table(
                &["page", "offset", "magic", "subtype", "allocated", "records", "error"],
                &cells,
            ));
            out
        }
    };
    Ok(Output { text, warnings })
}

#[derive(Serialize)]
struct RecordRow {
    page: usize,
    slot: usize,
    stream_offset: usize,
    size: u32,
    digest: String,
    truncated: bool,
    first_string: String,
}

#[derive(Serialize)]
struct RecordDetail {
    page: usize,
    slot: usize,
    stream_offset: usize,
    size: u32,
    digest: String,
    truncated: bool,
    strings: Vec<String>,
    cnid: Option<u64>,
    cnid_byte_order: Option<ByteOrder>,
    parent_cnid: Option<u64>,
}

fn records(path: &Path, with_fields: bool, format: Format) -> Outcome {
    let (store, info) = load_store(path)?;
    let StoreRecords { records, errors } = collect_records(&store);
    let mut warnings = store_warnings(&store);
    warnings.extend(page_error_warnings(&errors));
    let text = match format {
        Format::Json if with_fields => {
            let details: Vec<RecordDetail> = records
                .iter()
                .map(|r| {
                    let f = extract_fields(&r.body);
                    let cnid = f.cnid_candidates.first();
                    RecordDetail {
                        page: r.page_index,
                        slot: r.slot_index,
                        stream_offset: r.stream_offset,
                        size: r.declared_size,
                        digest: r.digest_hex(),
                        truncated: r.truncated,
                        cnid: cnid.map(|c| c.value),
                        cnid_byte_order: cnid.map(|c| c.order),
                        parent_cnid: f.parent_cnid_candidates.first().map(|c| c.value),
                        strings: f.strings,
                    }
                })
                .collect();
            json_envelope(
                "records",
                &[info],
                json!({ "fields": true }),
                json!({ "records": details, "page_errors": errors }),
            )
        }
        _ => {
            let rows: Vec<RecordRow> = records
                .iter()
                .map(|r| RecordRow {
                    page: r.page_index,
                    slot: r.slot_index,
                    stream_offset: r.stream_offset,
                    size: r.declared_size,
                    digest: r.digest_hex(),
                    truncated: r.truncated,
                    first_string: first_string(r),
                })
                .collect();
            match format {
                Format::Json => json_envelope(
                    "records",
                    &[info],
                    json!({ "fields": false }),
                    json!({ "records": rows, "page_errors": errors }),
                ),
                Format::Csv => csv_with_header(
                    &["page", "slot", "stream_offset", "size", "digest", "truncated", "first_string"],
                    &rows,
                ),
                Format::Table => {
                    let cells: Vec<Vec<String>> = rows
                        .iter()
                        .map(|r| {
                            vec![
                                r.page.to_string(),
                                r.slot.to_string(),
                                r.size.to_string(),
                                r.digest.clone(),
                                r.first_string.clone(),
                            ]
                        })
                        .collect();
                    table(&["page", "slot", "size", "digest", "first string"], &cells)
                }
            }
        }
    };
    Ok(Output { text, warnings })
}

#[derive(Serialize)]
struct AttrRow {
    record_number: u32,
    flags_hex: String,
    name: String,
}

fn attrs(path: &Path, format: Format) -> Outcome {
    let (store, info) = load_store(path)?;
    let mut warnings = store_warnings(&store);
    let mut rows = Vec::new();
    for page in store.pages_of(Subtype::AttributeTable) {
        match parse_attribute_page(page) {
            Ok(checked) => {
                warnings.extend(checked.warnings.iter().map(ToString::to_string));
                rows.extend(checked.value.into_iter().map(|e| AttrRow {
                    record_number: e.record_number,
                    flags_hex: hex::encode(&e.flags),
                    name: e.name,
                }));
            }
            Err(e) => warnings.push(format!("page {}: {e}", page.index)),
        }
    }
    let text = match format {
        Format::Json => json_envelope("attrs", &[info], json!({}), &rows),
        Format::Csv => csv_with_header(&["record_number", "flags_hex", "name"], &rows),
        Format::Table => {
            let cells: Vec<Vec<String>> = rows
                .iter()
                .map(|r| vec![r.record_number.to_string(), r.flags_hex.clone(), r.name.clone()])
                .collect();
            table(&["record", "flags", "name"], &cells)
        }
    };
    Ok(Output { text, warnings })
}

#[derive(Serialize)]
struct UtiRow {
    record_number: u32,
    uti: String,
    language_code: Option<String>,
}

fn utis(path: &Path, format: Format) -> Outcome {
    let (store, info) = load_store(path)?;
    let mut warnings = store_warnings(&store);
    let mut rows = Vec::new();
    for page in store.pages_of(Subtype::UtiTable) {
        match parse_uti_page(page) {
            Ok(checked) => {
                warnings.extend(checked.warnings.iter().map(ToString::to_string));
                rows.extend(checked.value.into_iter().map(|e| UtiRow {
                    record_number: e.record_number,
                    uti: e.uti,
                    language_code: e.language_code,
                }));
            }
            Err(e) => warnings.push(format!("page {}: {e}", page.index)),
        }
    }
    let text = match format {
        Format::Json => json_envelope("utis", &[info], json!({}), &rows),
        Format::Csv => csv_with_header(&["record_number", "uti", "language_code"], &rows),
        Format::Table => {
            let cells: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.record_number.to_string(),
                        r.uti.clone(),
                        r.language_code.clone().unwrap_or_default(),
                    ]
                })
                .collect();
            table(&["record", "uti", "language"], &cells)
        }
    };
    Ok(Output { text, warnings })
}

#[derive(Serialize)]
struct HitRow {
    page: usize,
    slot: usize,
    byte_offset: usize,
    keyword: String,
    first_string: String,
}

fn search(path: &Path, keywords: &[String], format: Format) -> Outcome {
    let (store, info) = load_store(path)?;
    let StoreRecords { records, errors } = collect_records(&store);
    let mut warnings = store_warnings(&store);
    warnings.extend(page_error_warnings(&errors));
    let by_position: BTreeMap<(usize, usize), &RawRecord> = records
        .iter()
        .map(|r| ((r.page_index, r.slot_index), r))
        .collect();
    let rows: Vec<HitRow> = search_records(&records, keywords)
        .into_iter()
        .map(|h| HitRow {
            first_string: first_string(by_position[&(h.page_index, h.slot_index)]),
            page: h.page_index,
            slot: h.slot_index,
            byte_offset: h.byte_offset,
            keyword: h.keyword,
        })
        .collect();
    let text = match format {
        Format::Json => json_envelope("search", &[info], json!({ "keywords": keywords }), &rows),
        Format::Csv => csv_with_header(&["page", "slot", "byte_offset", "keyword", "first_string"], &rows),
        Format::Table => {
            let cells: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.page.to_string(),
                        r.slot.to_string(),
                        r.byte_offset.to_string(),
                        r.keyword.clone(),
                        r.first_string.clone(),
                    ]
                })
                .collect();
            table(&["page", "slot", "offset", "keyword", "first string"], &cells)
        }
    };
    Ok(Output { text, warnings })
}

fn carve(image: &Path, options: &ScanOptions, dump_dir: Option<&Path>, format: Format) -> Outcome {
    options.check().map_err(|e| Failure::Usage(e.to_string()))?;
    let reader = crate::input::open(image).map_err(|e| input_err(image, e))?;
    let mut hashing = HashingReader::new(reader);
    let outcome = scan_reader(&mut hashing, options).map_err(|e| Failure::Usage(e.to_string()))?;
    let info = hashing.finish(image);
    let report = carve_report(&outcome, options);
    let mut warnings: Vec<String> = outcome
        .unreadable
        .iter()
        .map(|r| format!("unreadable region @{:#x}+{:#x} scanned as zeros", r.offset, r.len))
        .collect();

    if let Some(dir) = dump_dir {
        fs::create_dir_all(dir).map_err(|e| input_err(dir, e))?;
        for page in &outcome.pages {
            let target = dir.join(dump_file_name(page.source_offset));
            guard_output(&target, &[image]).map_err(Failure::Usage)?;
            if let Err(e) = fs::write(&target, &page.bytes) {
                warnings.push(format!("{}: {e}", target.display()));
            }
        }
    }

    let text = match format {
        Format::Json => json_envelope(
            "carve",
            &[info],
            json!({
                "sector_size": options.sector_size,
                "page_size": options.page_size,
                "byte_granular": options.byte_granular,
                "source": if is_stdin(image) { "stdin" } else { "file" },
            }),
            &report,
        ),
        Format::Csv => {
            #[derive(Serialize)]
            struct Row<'a> {
                source_offset: u64,
                kind: &'a str,
                subtype: Option<u32>,
                confidence: Confidence,
                record_count: usize,
            }
            csv(report.pages.iter().map(|p| Row {
                source_offset: p.source_offset,
                kind: p.kind,
                subtype: p.subtype.map(Subtype::raw),
                confidence: p.confidence,
                record_count: p.record_count,
            }))
        }
        Format::Table => report.to_table(),
    };
    Ok(Output { text, warnings })
}

fn diff(a: &Path, b: &Path, by_cnid: bool, format: Format) -> Outcome {
    let (store_a, info_a) = load_store(a)?;
    let (store_b, info_b) = load_store(b)?;
    let ra = collect_records(&store_a);
    let rb = collect_records(&store_b);
    let mut warnings = store_warnings(&store_a);
    warnings.extend(store_warnings(&store_b));
    warnings.extend(page_error_warnings(&ra.errors));
    warnings.extend(page_error_warnings(&rb.errors));
    let report = if by_cnid {
        diff_records_by_cnid(&ra.records, &rb.records)
    } else {
        diff_records(&ra.records, &rb.records)
    };
    let text = match format {
        Format::Json => json_envelope(
            "diff",
            &[info_a, info_b],
            json!({ "by_cnid": by_cnid }),
            &report,
        ),
        Format::Csv => csv_with_header(&["status", "page", "slot", "digest", "first_string"], report.rows()),
        Format::Table => {
            let mut out = format!(
                "method {:?}: {} added, {} removed, {} changed, {} unchanged\n",
                report.method,
                report.added.len(),
                report.removed.len(),
                report.changed.len(),
                report.unchanged_count
            );
            let cells: Vec<Vec<String>> = report
                .rows()
                .map(|e| {
                    vec![
                        format!("{:?}", e.status).to_lowercase(),
                        e.page.to_string(),
                        e.slot.to_string(),
                        e.digest.clone(),
                        e.first_string.clone(),
                    ]
                })
                .collect();
            if !cells.is_empty() {
                out.push('\n');
                out.push_str(&table(&["status", "page", "slot", "digest", "first string"], &cells));
            }
            out
        }
    };
    Ok(Output { text, warnings })
}

fn persist(store_path: &Path, image: &Path, names: &[String], format: Format) -> Outcome {
    let (store, store_info) = load_store(store_path)?;
    let (bytes, image_info) = read_all(image).map_err(|e| input_err(image, e))?;
    let options = ScanOptions::default();
    let outcome = scan_reader(&bytes[..], &options).map_err(|e| Failure::Usage(e.to_string()))?;
    let rows = persistence_check(&store, &outcome, names);
    let mut warnings = store_warnings(&store);
    warnings.extend(page_error_warnings(&collect_records(&store).errors));
    let text = match format {
        Format::Json => json_envelope(
            "persist",
            &[store_info, image_info],
            json!({ "sector_size": options.sector_size, "page_size": options.page_size }),
            &rows,
        ),
        Format::Csv => csv_with_header(&["name", "verdict", "live_hits", "carved_hits"], &rows),
        Format::Table => {
            let cells: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    let verdict = match r.verdict {
                        Verdict::LiveRecord => "live record",
                        Verdict::CarvedOnly => "carved only",
                        Verdict::NotFound => "not found",
                    };
                    vec![
                        r.name.clone(),
                        verdict.to_owned(),
                        r.live_hits.to_string(),
                        r.carved_hits.to_string(),
                    ]
                })
                .collect();
            table(&["name", "verdict", "live", "carved"], &cells)
        }
    };
    Ok(Output { text, warnings })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<(T, InputInfo), Failure> {
    let (bytes, info) = read_all(path).map_err(|e| input_err(path, e))?;
    let value = serde_json::from_slice(&bytes).map_err(|e| input_err(path, e))?;
    Ok((value, info))
}

fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}

#[derive(Serialize)]
struct Written {
    path: String,
    size: usize,
    sha256: String,
}

fn write_output(path: &Path, bytes: &[u8], inputs: &[&Path]) -> Result<Written, Failure> {
    guard_output(path, inputs).map_err(Failure::Usage)?;
    fs::write(path, bytes).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    Ok(Written {
        path: path.display().to_string(),
        size: bytes.len(),
        sha256: sha256_hex(bytes),
    })
}

fn summary_table(pairs: &[(&str, String)]) -> String {
    pairs.iter().map(|(k, v)| format!("{k:<16}{v}\n")).collect()
}

fn gen(spec_path: &Path, output: &Path, format: Format) -> Outcome {
    let (spec, info): (StoreSpec, _) = read_json(spec_path)?;
    let model = StoreModel::from_spec(&spec).map_err(|e| input_err(spec_path, e))?;
    let bytes = model.emit();
    let written = write_output(output, &bytes, &[spec_path])?;
    let pages = 2 + model.data_pages().len();
    let text = match format {
        Format::Json => json_envelope(
            "gen",
            &[info],
            json!({ "seed": spec.seed }),
            json!({ "output": written, "records": model.live_record_count(), "pages": pages }),
        ),
        Format::Csv => {
            #[derive(Serialize)]
            struct Row<'a> {
                output: &'a str,
                records: usize,
                pages: usize,
                seed: u64,
                sha256: &'a str,
            }
            csv([Row {
                output: &written.path,
                records: model.live_record_count(),
                pages,
                seed: spec.seed,
                sha256: &written.sha256,
            }])
        }
        Format::Table => summary_table(&[
            ("output", written.path),
            ("records", model.live_record_count().to_string()),
            ("pages", pages.to_string()),
            ("seed", spec.seed.to_string()),
            ("sha256", written.sha256),
        ]),
    };
    Ok(Output {
        text,
        warnings: Vec::new(),
    })
}

fn simulate(
    spec_path: &Path,
    events_path: &Path,
    dir: &Path,
    lag: usize,
    filler_seed: Option<u64>,
    format: Format,
) -> Outcome {
    let (spec, spec_info): (StoreSpec, _) = read_json(spec_path)?;
    let (events, events_info): (Vec<FileEvent>, _) = read_json(events_path)?;
    let mut model = StoreModel::from_spec(&spec).map_err(|e| input_err(spec_path, e))?;
    for (i, event) in events.into_iter().enumerate() {
        model
            .apply(event)
            .map_err(|e| input_err(events_path, format!("event {i}: {e}")))?;
    }
    let (dot, store) = model
        .emit_store_pair(lag)
        .map_err(|e| input_err(events_path, e))?;
    let filler_seed = filler_seed.unwrap_or(spec.seed);
    let unallocated = export_unallocated(&model, filler_seed);

    fs::create_dir_all(dir).map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))?;
    let inputs = [spec_path, events_path];
    let mut written = vec![
        write_output(&dir.join(".store.db"), &dot, &inputs)?,
        write_output(&dir.join("store.db"), &store, &inputs)?,
        write_output(&dir.join("unallocated.bin"), &unallocated.bytes, &inputs)?,
    ];
    let log: Vec<_> = model
        .event_log()
        .iter()
        .map(|e| {
            json!({
                "event": e.event,
                "added": e.delta.added.iter().map(digest_hex).collect::<Vec<_>>(),
                "removed": e.delta.removed.iter().map(digest_hex).collect::<Vec<_>>(),
                "freed_pages": e.freed.clone().collect::<Vec<_>>(),
            })
        })
        .collect();
    let manifest = json!({
        "seed": spec.seed,
        "filler_seed": filler_seed,
        "lag": lag,
        "guid": model.guid(),
        "next_cnid": model.next_cnid(),
        "live_records": model.live_record_count(),
        "freed_pages": model.freed_pages().len(),
        "placements": unallocated.placements,
        "events": log,
    });
    let mut manifest_text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    manifest_text.push('\n');
    written.push(write_output(&dir.join("manifest.json"), manifest_text.as_bytes(), &inputs)?);

    let text = match format {
        Format::Json => json_envelope(
            "simulate",
            &[spec_info, events_info],
            json!({ "lag": lag, "filler_seed": filler_seed }),
            json!({
                "outputs": written,
                "live_records": model.live_record_count(),
                "freed_pages": model.freed_pages().len(),
                "events": model.event_log().len(),
            }),
        ),
        Format::Csv => csv(&written),
        Format::Table => {
            let mut pairs = vec![
                ("events", model.event_log().len().to_string()),
                ("live records", model.live_record_count().to_string()),
                ("freed pages", model.freed_pages().len().to_string()),
            ];
            for w in &written {
                pairs.push(("wrote", w.path.clone()));
            }
            summary_table(&pairs)
        }
    };
    Ok(Output {
        text,
        warnings: Vec::new(),
    })
}
