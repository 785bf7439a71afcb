//! `spinr report`: render one or more JSONL report files as an aligned table.
//!
//! Works on any of the tool's reports (fit, attack, stream, decode): columns
//! are the union of the scalar fields in first-seen order, rows keep file
//! order, and array/object fields are summarized rather than dumped.

use std::fs;
use std::path::PathBuf;

use serde_json::Value;

use crate::error::{io_err, CliError};
use crate::output::{read_jsonl, render_table};

#[derive(Debug, clap::Args)]
pub struct ReportArgs {
    /// JSONL report files to tabulate, in order.
    #[arg(required = true)]
    pub reports: Vec<PathBuf>,

    /// Also write the table to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &ReportArgs) -> Result<(), CliError> {
    let mut records = Vec::new();
    for path in &args.reports {
        records.extend(read_jsonl(path)?);
    }
    if records.is_empty() {
        return Err(CliError::Usage("the report files contain no records".into()));
    }

    let mut columns: Vec<String> = Vec::new();
    for record in &records {
        let Value::Object(map) = record else {
            return Err(CliError::Usage("report records must be JSON objects".into()));
        };
        for key in map.keys() {
            if !columns.iter().any(|c| c == key) {
                columns.push(key.clone());
            }
        }
    }

    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|record| columns.iter().map(|key| cell(&record[key.as_str()])).collect())
        .collect();
    let table = render_table(&columns, &rows);
    print!("{table}");
    if let Some(path) = &args.out {
        fs::write(path, &table).map_err(io_err(path))?;
    }
    Ok(())
}

/// One table cell: scalars verbatim, containers summarized, absent fields "-".
fn cell(value: &Value) -> String {
    match value {
        Value::Null => "-".into(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        Value::Array(items) => format!("[{} values]", items.len()),
        Value::Object(map) => format!("{{{} fields}}", map.len()),
    }
}
