//! Run artifacts: CSV tables and the JSON manifest.

use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use clex::{Error, Result};

/// CSV text built row by row.
pub struct Table {
    name: String,
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Table {
            name: name.to_string(),
            writer,
        }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).expect("in-memory write");
    }

    fn finish(self) -> (String, Vec<u8>) {
        (self.name, self.writer.into_inner().expect("in-memory write"))
    }
}

/// Formats a float with the shortest round-trip representation.
pub fn num(x: f64) -> String {
    format!("{x}")
}

/// Everything a subcommand produced.
pub struct Outcome {
    pub tables: Vec<Table>,
    pub extra_files: Vec<(String, Vec<u8>)>,
    /// False when a checked inequality or equality failed.
    pub verified: bool,
    pub summary: Value,
}

impl Outcome {
    pub fn new() -> Self {
        Outcome {
            tables: Vec::new(),
            extra_files: Vec::new(),
            verified: true,
            summary: json!({}),
        }
    }
}

/// Writes the tables, extra files and `manifest.json` into `dir`.
pub fn write_run(dir: &Path, subcommand: &str, header: Value, outcome: Outcome) -> Result<bool> {
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut names = Vec::new();
    for t in outcome.tables {
        let (name, bytes) = t.finish();
        let path = dir.join(&name);
        fs::write(&path, bytes).map_err(|e| io(&path, e))?;
        names.push(name);
    }
    for (name, bytes) in outcome.extra_files {
        let path = dir.join(&name);
        fs::write(&path, bytes).map_err(|e| io(&path, e))?;
        names.push(name);
    }
    let manifest = json!({
        "subcommand": subcommand,
        "run": header,
        "outputs": names,
        "status": if outcome.verified { "ok" } else { "verification-failed" },
        "summary": outcome.summary,
    });
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| io(&path, e))?;
    Ok(outcome.verified)
}

fn io(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}
