//! Shared output plumbing: line-delimited JSON records and the aligned
//! plain-text tables printed next to them. Records go to files for diffing
//! and downstream tooling; tables go to stdout for humans.

use std::fs;
use std::path::Path;

use serde_json::Value;

use crate::error::{io_err, CliError};

/// Write one JSON object per line, with a trailing newline.
pub fn write_jsonl(path: &Path, records: &[Value]) -> Result<(), CliError> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r).expect("records are plain JSON"));
        text.push('\n');
    }
    fs::write(path, text).map_err(io_err(path))
}

/// Parse a line-delimited JSON file, ignoring blank lines.
pub fn read_jsonl(path: &Path) -> Result<Vec<Value>, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(line).map_err(|e| {
            CliError::Usage(format!("{}:{}: not a JSON record: {e}", path.display(), i + 1))
        })?;
        records.push(value);
    }
    Ok(records)
}

/// Render rows as a left-aligned table with two-space gutters.
pub fn render_table(headers: &[String], rows: &[Vec<String>]) -> String {
    // Pad by character count, not byte length, so "±" doesn't skew columns.
    let cols = headers.len();
    let width = |s: &String| s.chars().count();
    let mut widths: Vec<usize> = headers.iter().map(width).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate().take(cols) {
            widths[i] = widths[i].max(width(cell));
        }
    }
    let mut out = String::new();
    let push_row = |cells: &[String], out: &mut String| {
        for (i, cell) in cells.iter().enumerate().take(cols) {
            if i > 0 {
                out.push_str("  ");
            }
            out.push_str(cell);
            // Pad all but the last column.
            if i + 1 < cols {
                for _ in width(cell)..widths[i] {
                    out.push(' ');
                }
            }
        }
        out.push('\n');
    };
    push_row(headers, &mut out);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    push_row(&rule, &mut out);
    for row in rows {
        push_row(row, &mut out);
    }
    out
}

/// Format a metric for table cells: fixed four decimals, infinities named.
pub fn fmt_metric(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.4}")
    }
}

/// `mean ± std` cell.
pub fn fmt_mean_std(mean: f64, std: f64) -> String {
    if mean.is_infinite() {
        "inf".into()
    } else {
        format!("{mean:.4} ± {std:.4}")
    }
}

/// JSON scalar for a possibly-infinite metric (JSON has no infinities, so
/// those become strings).
pub fn json_metric(v: f64) -> Value {
    if v.is_finite() {
        serde_json::json!(v)
    } else if v > 0.0 {
        Value::String("inf".into())
    } else {
        Value::String("-inf".into())
    }
}
