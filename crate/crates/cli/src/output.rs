use std::fmt;
use std::fs;
use std::path::PathBuf;

use serde::Serialize;

use lensjet_core::Error;

/// Why a command could not produce its result.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Numerical(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Usage(e.to_string())
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

/// Artifact directory; writes are no-ops without one.
pub struct Sink {
    dir: Option<PathBuf>,
}

impl Sink {
    pub fn new(dir: Option<PathBuf>) -> Result<Self, Failure> {
        if let Some(d) = &dir {
            fs::create_dir_all(d)?;
        }
        Ok(Sink { dir })
    }

    pub fn path(&self, name: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(name))
    }

    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), Failure> {
        if let Some(p) = self.path(name) {
            let mut text = serde_json::to_string_pretty(value)?;
            text.push('\n');
            fs::write(p, text)?;
        }
        Ok(())
    }

    /// Write rows of floats under `header`, 17 significant digits.
    pub fn csv(&self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<(), Failure> {
        let Some(p) = self.path(name) else {
            return Ok(());
        };
        let mut w = csv::Writer::from_path(p)?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r.iter().map(|v| format!("{v:.16e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}
