use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use chsh_gauge::{GammaMap, Result, VERSION};
use clap::ValueEnum;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Provenance block attached to every output.
#[derive(Clone, Debug, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub density: String,
    pub grid: Option<usize>,
    pub tol: Option<f64>,
}

impl Meta {
    pub fn for_map(command: &'static str, map: &GammaMap) -> Self {
        Self {
            tool: "chsh-gauge",
            version: VERSION,
            command,
            density: map.density().name().to_string(),
            grid: Some(map.grid()),
            tol: Some(map.tol()),
        }
    }
}

#[derive(Serialize)]
struct WithMeta<'a, T: Serialize> {
    meta: &'a Meta,
    #[serde(flatten)]
    body: &'a T,
}

/// Where a command's primary output goes.
pub struct Sink {
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl Sink {
    fn writer(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(path) => Box::new(BufWriter::new(File::create(path)?)),
            None => Box::new(io::stdout().lock()),
        })
    }

    /// Writes `body` as one JSON object with a leading `meta` block, or as CSV
    /// through `csv`. CSV metadata goes to `<out>.meta.json`, or to stderr
    /// when writing to stdout.
    pub fn emit<T: Serialize>(
        &self,
        meta: &Meta,
        body: &T,
        csv: impl FnOnce(&mut dyn Write) -> Result<()>,
    ) -> Result<()> {
        let mut w = self.writer()?;
        match self.format {
            Format::Json => {
                serde_json::to_writer_pretty(&mut w, &WithMeta { meta, body })?;
                writeln!(w)?;
            }
            Format::Csv => {
                csv(&mut w)?;
                let meta_json = serde_json::to_string_pretty(meta)?;
                match &self.out {
                    Some(path) => std::fs::write(sidecar(path), meta_json + "\n")?,
                    None => eprintln!("{meta_json}"),
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

/// CSV from rows of already formatted fields.
pub fn write_rows(out: &mut dyn Write, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}
