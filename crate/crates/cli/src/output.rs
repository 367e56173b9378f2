use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use spin_snr_core::RelaxationPair;

use crate::CliError;

pub const SCHEMA_LINE: &str = "# spin-snr-synth v1";

/// 17 significant digits; parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Destination for one output: a file, or stdout when no path is given.
pub fn open_sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| CliError::Io(format!("cannot create {}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
    }
}

/// `data.csv` → `data.json`; a `.json` path gets a second suffix.
pub fn sidecar_path(path: &Path) -> PathBuf {
    if path.extension().is_some_and(|e| e == "json") {
        let mut s = path.as_os_str().to_owned();
        s.push(".meta.json");
        PathBuf::from(s)
    } else {
        path.with_extension("json")
    }
}

pub fn io_err(e: impl std::fmt::Display) -> CliError {
    CliError::Io(e.to_string())
}

pub fn write_json<T: Serialize>(sink: &mut dyn Write, value: &T) -> Result<(), CliError> {
    serde_json::to_writer_pretty(&mut *sink, value).map_err(io_err)?;
    writeln!(sink).map_err(io_err)?;
    sink.flush().map_err(io_err)
}

pub fn write_json_file<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut sink = open_sink(Some(path))?;
    write_json(sink.as_mut(), value)
}

/// Schema comment line followed by a CSV table.
pub fn write_csv<I>(sink: &mut dyn Write, tag: &str, p: Option<&RelaxationPair>, header: &[&str], rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    match p {
        Some(p) => writeln!(sink, "{SCHEMA_LINE} {tag} Gamma={} gamma={}", num(p.gamma_t2()), num(p.gamma_t1())),
        None => writeln!(sink, "{SCHEMA_LINE} {tag}"),
    }
    .map_err(io_err)?;
    let mut w = csv::Writer::from_writer(&mut *sink);
    w.write_record(header).map_err(io_err)?;
    for row in rows {
        w.write_record(&row).map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    drop(w);
    sink.flush().map_err(io_err)
}
