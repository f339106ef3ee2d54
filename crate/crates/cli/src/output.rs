//! JSON envelope (schema version and run manifest) and small CSV writers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use addhaz::explained_variation::REPORT_SCHEMA_VERSION;
use addhaz::SurvivalDataset;
use anyhow::{Context, Result};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct Input {
    pub path: PathBuf,
    pub rows: usize,
    pub events: usize,
    pub covariates: Vec<String>,
}

impl Input {
    pub fn of(path: &Path, ds: &SurvivalDataset) -> Self {
        Self {
            path: path.to_path_buf(),
            rows: ds.len(),
            events: ds.event_count(),
            covariates: ds.covariate_names().to_vec(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a, F: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub core_version: &'static str,
    pub command: &'static str,
    pub inputs: Vec<Input>,
    pub flags: &'a F,
    pub seed: Option<u64>,
}

impl<'a, F: Serialize> Manifest<'a, F> {
    pub fn new(command: &'static str, flags: &'a F, inputs: Vec<Input>, seed: Option<u64>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            core_version: addhaz::VERSION,
            command,
            inputs,
            flags,
            seed,
        }
    }
}

#[derive(Serialize)]
struct Envelope<'a, M: Serialize, R: Serialize> {
    schema_version: u32,
    manifest: &'a M,
    #[serde(flatten)]
    result: &'a R,
}

/// Pretty JSON with `schema_version` and `manifest`, then the result fields.
pub fn emit_json<M: Serialize, R: Serialize>(manifest: &M, result: &R, path: Option<&Path>) -> Result<()> {
    let envelope = Envelope {
        schema_version: REPORT_SCHEMA_VERSION,
        manifest,
        result,
    };
    let mut text = serde_json::to_string_pretty(&envelope)?;
    text.push('\n');
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

/// Writes `header` then one line per row of already formatted cells.
pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush().with_context(|| format!("cannot write {}", path.display()))
}
