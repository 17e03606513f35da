//! CSV, JSON and SVG output. Files are assembled in memory and moved into
//! place with an atomic rename, so a failed run leaves no partial file.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Provenance written at the top of every file.
#[derive(Clone, Debug, Serialize)]
pub struct Header {
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
}

impl Header {
    pub fn new(cfg: &RunConfig) -> Self {
        Self {
            version: ARTIFACT_VERSION.to_string(),
            config_sha256: cfg.hash(),
            seed: cfg.seed,
        }
    }
}

/// Quote a CSV field when it holds a comma, quote or line break.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// A CSV table with `#` comment lines carrying the header.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &Header, columns: &[&str]) -> Self {
        let mut text = String::new();
        let _ = write!(text, "# mnx {}\r\n", header.version);
        let _ = write!(text, "# config_sha256 {}\r\n", header.config_sha256);
        let _ = write!(text, "# seed {}\r\n", header.seed);
        let mut csv = Self { text };
        csv.row(columns.iter().map(|c| c.to_string()));
        csv
    }

    pub fn row(&mut self, cells: impl IntoIterator<Item = String>) {
        let line: Vec<String> = cells.into_iter().map(|c| csv_field(&c)).collect();
        self.text.push_str(&line.join(","));
        self.text.push_str("\r\n");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

/// Pretty JSON with the header under `"header"`.
pub fn json_with_header(header: &Header, body: impl Serialize) -> Result<Vec<u8>> {
    let mut value = serde_json::to_value(body)?;
    let obj = match value {
        Value::Object(ref mut m) => m,
        other => {
            value = json!({ "data": other });
            value.as_object_mut().expect("object")
        }
    };
    obj.insert("header".into(), serde_json::to_value(header)?);
    let mut bytes = serde_json::to_vec_pretty(&value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Output files of one run, written together at the end.
#[derive(Default)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.to_string(), bytes));
    }

    pub fn write(self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        let mut staged = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            let mut tmp = tempfile::NamedTempFile::new_in(dir)
                .with_context(|| format!("cannot write into {}", dir.display()))?;
            tmp.write_all(bytes)?;
            tmp.as_file().sync_all()?;
            staged.push((tmp, dir.join(name)));
        }
        let mut written = Vec::with_capacity(staged.len());
        for (tmp, path) in staged {
            tmp.persist(&path)
                .with_context(|| format!("cannot move output into {}", path.display()))?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Shortest round-trip text of a float.
pub fn num(x: f64) -> String {
    format!("{x}")
}
