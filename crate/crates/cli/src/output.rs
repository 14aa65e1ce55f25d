use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::CliError;

/// Report envelope written for JSON output.
pub struct Meta<'a> {
    pub command: &'a str,
    pub seed: Option<u64>,
    pub config: Value,
    pub wall_time: Option<f64>,
    pub warnings: &'a [String],
}

pub fn json_report(meta: &Meta, result: Value) -> Result<Vec<u8>, CliError> {
    let mut root = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "command": meta.command,
        "seed": meta.seed,
        "config": meta.config,
    });
    if let Some(t) = meta.wall_time {
        root["wall_time_s"] = json!(t);
    }
    root["warnings"] = json!(meta.warnings);
    root["result"] = result;
    let mut out = serde_json::to_vec_pretty(&root).map_err(|e| CliError::Internal(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

/// Comma-separated rows with a header and LF line endings.
pub fn csv_rows<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Internal(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Internal(e.to_string()))
}

pub fn emit(bytes: &[u8], path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(p) => File::create(p)
            .and_then(|mut f| f.write_all(bytes))
            .map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => io::stdout().write_all(bytes).map_err(|e| CliError::Io(e.to_string())),
    }
}
