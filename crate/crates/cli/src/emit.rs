//! Output formatting: JSON envelopes, CSV and plain tables.

use std::io::IsTerminal;

use serde::Serialize;

use crate::args::Format;
use crate::input::InputInfo;

pub const TOOL_NAME: &str = "spotstore";

#[derive(Serialize)]
struct Tool {
    name: &'static str,
    version: &'static str,
}

#[derive(Serialize)]
struct Envelope<'a, P: Serialize, R: Serialize> {
    tool: Tool,
    command: &'a str,
    inputs: &'a [InputInfo],
    parameters: P,
    result: R,
}

/// Picks the format: explicit flag or environment first, then the
/// command's own default, then table on a terminal and json elsewhere.
pub fn resolve(flag: Option<Format>, command_default: Option<Format>) -> Format {
    flag.or(command_default).unwrap_or_else(|| {
        if std::io::stdout().is_terminal() {
            Format::Table
        } else {
            Format::Json
        }
    })
}

/// Pretty JSON with tool version, input digests and parameters attached.
pub fn json_envelope<P: Serialize, R: Serialize>(
    command: &str,
    inputs: &[InputInfo],
    parameters: P,
    result: R,
) -> String {
    let envelope = Envelope {
        tool: Tool {
            name: TOOL_NAME,
            version: env!("CARGO_PKG_VERSION"),
        },
        command,
        inputs,
        parameters,
        result,
    };
    let mut out = serde_json::to_string_pretty(&envelope).expect("report types serialize");
    out.push('\n');
    out
}

pub fn csv<T: Serialize>(rows: impl IntoIterator<Item = T>) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row).expect("rows serialize");
    }
    String::from_utf8(writer.into_inner().expect("in-memory writer")).expect("csv is utf-8")
}

/// CSV with a header line even when there are no rows.
pub fn csv_with_header<T: Serialize>(header: &[&str], rows: impl IntoIterator<Item = T>) -> String {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    writer.write_record(header).expect("header");
    for row in rows {
        writer.serialize(row).expect("rows serialize");
    }
    String::from_utf8(writer.into_inner().expect("in-memory writer")).expect("csv is utf-8")
}

/// Left-aligned columns separated by two spaces.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &mut dyn Iterator<Item = &str>| {
        let joined: Vec<String> = cells
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        out.push_str(joined.join("  ").trim_end());
        out.push('\n');
    };
    line(&mut header.iter().copied());
    for row in rows {
        line(&mut row.iter().map(String::as_str));
    }
    out
}
