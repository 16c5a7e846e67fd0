use std::fs;
use std::io::{self, Write};
use std::path::Path;

use polywalk_core::{Error, SCHEMA_VERSION};
use serde::Serialize;
use serde_json::json;

pub const EXIT_OTHER: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_GATE: i32 = 4;
pub const EXIT_IO: i32 = 5;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, kind: "usage", message: message.into() }
    }

    pub fn gate(message: impl Into<String>) -> Self {
        Self { code: EXIT_GATE, kind: "gate_failed", message: message.into() }
    }

    pub fn io(path: &Path, e: io::Error) -> Self {
        Self { code: EXIT_IO, kind: "io", message: format!("{}: {e}", path.display()) }
    }

    /// Machine-readable error document for stderr.
    pub fn to_json(&self) -> String {
        json!({
            "schema_version": SCHEMA_VERSION,
            "error": { "code": self.code, "kind": self.kind, "message": self.message },
        })
        .to_string()
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::Config(_) => (EXIT_USAGE, "config"),
            Error::Invalid(_) => (EXIT_USAGE, "invalid_input"),
            Error::Dimension(_) => (EXIT_USAGE, "dimension"),
            Error::Infeasible(_) => (EXIT_INFEASIBLE, "infeasible"),
            Error::InfeasibleSpec { .. } => (EXIT_INFEASIBLE, "infeasible_spec"),
            Error::NotFullDimensional(_) => (EXIT_INFEASIBLE, "not_full_dimensional"),
            Error::Unbounded(_) => (EXIT_INFEASIBLE, "unbounded"),
            Error::Io(_) => (EXIT_IO, "io"),
            Error::InsufficientData(_) => (EXIT_OTHER, "insufficient_data"),
            Error::NoConvergence(_) => (EXIT_OTHER, "no_convergence"),
            Error::Singular(_) => (EXIT_OTHER, "singular"),
            _ => (EXIT_OTHER, "numerical"),
        };
        Self { code, kind, message: e.to_string() }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::usage(format!("malformed JSON: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            Self { code: EXIT_IO, kind: "io", message: e.to_string() }
        } else {
            Self::usage(format!("malformed CSV: {e}"))
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

/// File destination, or stdout when `path` is `None`.
pub fn sink(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    match path {
        Some(p) => {
            let f = fs::File::create(p).map_err(|e| CliError::io(p, e))?;
            Ok(Box::new(io::BufWriter::new(f)))
        }
        None => Ok(Box::new(io::BufWriter::new(io::stdout().lock()))),
    }
}

/// CSV writer that starts with a `# schema_version=N` comment line.
pub fn csv_sink(path: Option<&Path>) -> CliResult<csv::Writer<Box<dyn Write>>> {
    let mut out = sink(path)?;
    writeln!(out, "# schema_version={SCHEMA_VERSION}").map_err(|e| io_err(path, e))?;
    Ok(csv::Writer::from_writer(out))
}

pub fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> CliResult<()> {
    let mut out = sink(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out).and_then(|_| out.flush()).map_err(|e| io_err(path, e))
}

pub fn io_err(path: Option<&Path>, e: io::Error) -> CliError {
    CliError::io(path.unwrap_or(Path::new("<stdout>")), e)
}

/// Shortest representation that reads back to the same value.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}
