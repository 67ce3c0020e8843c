//! CSV and JSON output with round-trip exact number formatting.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

/// One CSV cell.
#[derive(Clone, Copy, Debug)]
pub enum Cell<'a> {
    Num(f64),
    Int(usize),
    Text(&'a str),
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn format_number(v: f64) -> String {
    format!("{v:.16e}")
}

/// Comma-separated writer with a header row and LF line endings. A
/// non-finite number aborts the write with a numerical error.
pub struct CsvWriter {
    path: PathBuf,
    out: BufWriter<File>,
    columns: usize,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
            columns: header.len(),
        };
        w.line(&header.join(","))?;
        Ok(w)
    }

    fn line(&mut self, text: &str) -> Result<()> {
        self.out
            .write_all(text.as_bytes())
            .and_then(|_| self.out.write_all(b"\n"))
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn row(&mut self, cells: &[Cell]) -> Result<()> {
        debug_assert_eq!(cells.len(), self.columns);
        let mut parts = Vec::with_capacity(cells.len());
        for c in cells {
            parts.push(match *c {
                Cell::Num(v) => {
                    if !v.is_finite() {
                        return Err(Error::Numerical {
                            t: f64::NAN,
                            reason: format!("refusing to write non-finite value to {}", self.path.display()),
                        });
                    }
                    format_number(v)
                }
                Cell::Int(i) => i.to_string(),
                Cell::Text(s) => s.to_string(),
            });
        }
        self.line(&parts.join(","))
    }

    pub fn numbers(&mut self, values: &[f64]) -> Result<()> {
        let cells: Vec<Cell> = values.iter().map(|v| Cell::Num(*v)).collect();
        self.row(&cells)
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    })?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Creates `dir` and checks that a file can be written inside it.
pub fn probe_writable(dir: &Path) -> Result<()> {
    ensure_dir(dir)?;
    let probe = dir.join(".write-probe");
    std::fs::write(&probe, b"").map_err(|e| Error::io(&probe, e))?;
    std::fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            let s = format_number(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(format_number(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn writer_layout_and_nan_guard() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.csv");
        let mut w = CsvWriter::create(&path, &["t", "id", "tag"]).unwrap();
        w.row(&[Cell::Num(0.5), Cell::Int(3), Cell::Text("q")]).unwrap();
        assert!(w.row(&[Cell::Num(f64::NAN), Cell::Int(0), Cell::Text("")]).is_err());
        w.finish().unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "t,id,tag\n5.0000000000000000e-1,3,q\n");
    }

    #[test]
    fn unwritable_directory_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain");
        std::fs::write(&file, b"x").unwrap();
        let err = probe_writable(&file.join("sub")).unwrap_err();
        assert_eq!(err.exit_code(), 4);
    }
}
