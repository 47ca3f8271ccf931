//! CSV formats, atomic writes and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nvcycle_core::instrument::TcspcHistogram;
use nvcycle_core::pulse::EmissionTrace;
use serde::Serialize;

use crate::error::CliError;

pub const HISTOGRAM_HEADER: [&str; 2] = ["time_ns", "counts"];

/// Writes `bytes` to a temporary file next to `path`, then renames it into
/// place so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(CliError::io(format!("cannot write {}", path.display()), e));
    }
    Ok(())
}

fn fmt(v: f64) -> String {
    // Shortest representation that parses back to the same bits.
    format!("{v}")
}

/// CSV with a header row and one row of numbers per record.
pub fn table_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row.iter().map(|v| fmt(*v))).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn histogram_csv(h: &TcspcHistogram) -> Vec<u8> {
    table_csv(
        &HISTOGRAM_HEADER,
        h.centers().iter().zip(h.counts()).map(|(t, n)| vec![*t, *n]),
    )
}

/// Knot times, instantaneous rates and the photons emitted since the
/// previous knot (0 on the first row).
pub fn trace_csv(t: &EmissionTrace) -> Vec<u8> {
    let photons = std::iter::once(0.0).chain(t.counts().iter().copied());
    table_csv(
        &["time_ns", "rate_per_ns", "photons"],
        t.times()
            .iter()
            .zip(t.rates())
            .zip(photons)
            .map(|((t, r), n)| vec![*t, *r, n]),
    )
}

/// A two-column numeric CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub x_name: String,
    pub y_name: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

pub fn read_curve(path: &Path) -> Result<Curve, CliError> {
    let bad = |msg: String| CliError::Usage(format!("{}: {msg}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.len() != 2 {
        return Err(bad(format!("expected 2 columns, found {}", header.len())));
    }
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let parse = |i: usize| {
            rec[i]
                .trim()
                .parse::<f64>()
                .map_err(|_| bad(format!("row {}: '{}' is not a number", line + 2, &rec[i])))
        };
        x.push(parse(0)?);
        y.push(parse(1)?);
    }
    if x.is_empty() {
        return Err(bad("no data rows".into()));
    }
    Ok(Curve {
        x_name: header[0].to_string(),
        y_name: header[1].to_string(),
        x,
        y,
    })
}

pub fn read_histogram(path: &Path) -> Result<TcspcHistogram, CliError> {
    let c = read_curve(path)?;
    if [c.x_name.as_str(), c.y_name.as_str()] != HISTOGRAM_HEADER {
        return Err(CliError::Usage(format!(
            "{}: histogram header must be '{}'",
            path.display(),
            HISTOGRAM_HEADER.join(",")
        )));
    }
    TcspcHistogram::from_centers(c.x, c.y).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Serialize)]
pub struct OutputEntry {
    pub file: String,
    pub bytes: usize,
}

/// Files written by one command, recorded in `manifest.json`.
#[derive(Debug)]
pub struct Outputs {
    dir: PathBuf,
    entries: Vec<OutputEntry>,
}

impl Outputs {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(format!("cannot create {}", dir.display()), e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            entries: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes)?;
        self.entries.push(OutputEntry {
            file: name.to_string(),
            bytes: bytes.len(),
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("serializable");
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes `manifest.json` describing the command, its fully resolved
    /// inputs and every file written so far.
    pub fn finish<T: Serialize>(mut self, command: &str, inputs: &T) -> Result<PathBuf, CliError> {
        #[derive(Serialize)]
        struct Manifest<'a, T> {
            tool: &'static str,
            version: &'static str,
            command: &'a str,
            inputs: &'a T,
            outputs: &'a [OutputEntry],
        }
        let entries = std::mem::take(&mut self.entries);
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            inputs,
            outputs: &entries,
        };
        self.write_json("manifest.json", &manifest)
    }
}
