use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{HarnessError, Result};
use crate::params::Mode;

/// The result-file header, in column order.
pub const HEADER: &str = "trial,seed,kind,d,P,k,alpha,mode,M_bits,solver_or_player,queries,success,wall_ms,extra_json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub trial: usize,
    pub seed: u64,
    pub kind: String,
    pub d: usize,
    #[serde(rename = "P")]
    pub depth: usize,
    pub k: usize,
    pub alpha: f64,
    pub mode: Mode,
    #[serde(rename = "M_bits")]
    pub m_bits: usize,
    pub solver_or_player: String,
    pub queries: u64,
    pub success: bool,
    pub wall_ms: f64,
    pub extra_json: String,
}

impl CsvRow {
    pub fn extra(&self) -> Result<serde_json::Value> {
        serde_json::from_str(&self.extra_json).map_err(|e| HarnessError::Runtime(format!("extra_json of trial {}: {e}", self.trial)))
    }

    /// Equality on every column except `wall_ms`.
    pub fn same_except_timing(&self, other: &CsvRow) -> bool {
        CsvRow { wall_ms: 0.0, ..self.clone() } == CsvRow { wall_ms: 0.0, ..other.clone() }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Io(format!("{}: {e}", path.display()))
}

/// Write `rows` sorted by trial. A missing or empty file gets the header
/// first; an existing file must already start with it and is appended to.
pub fn emit_results(rows: &[CsvRow], path: &Path) -> Result<()> {
    let mut sorted: Vec<&CsvRow> = rows.iter().collect();
    sorted.sort_by_key(|r| r.trial);
    let existing = match File::open(path) {
        Ok(f) => {
            let mut first = String::new();
            BufReader::new(f).read_line(&mut first).map_err(|e| io_err(path, e))?;
            Some(first)
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(io_err(path, e)),
    };
    let needs_header = match &existing {
        None => true,
        Some(first) if first.is_empty() => true,
        Some(first) if first.trim_end_matches(['\r', '\n']) == HEADER => false,
        Some(_) => return Err(io_err(path, "existing file has a different header")),
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    let file = OpenOptions::new().create(true).append(true).open(path).map_err(|e| io_err(path, e))?;
    let mut buf = Vec::new();
    if needs_header {
        buf.extend_from_slice(HEADER.as_bytes());
        buf.push(b'\n');
    }
    {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut buf);
        for r in sorted {
            w.serialize(r).map_err(|e| io_err(path, e))?;
        }
        w.flush().map_err(|e| io_err(path, e))?;
    }
    let mut file = file;
    file.write_all(&buf).map_err(|e| io_err(path, e))?;
    file.flush().map_err(|e| io_err(path, e))
}

/// Parse a result file or string.
pub fn parse_rows(text: &str) -> Result<Vec<CsvRow>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let header = rd.headers().map_err(|e| HarnessError::Runtime(format!("csv header: {e}")))?;
    if header.iter().collect::<Vec<_>>().join(",") != HEADER {
        return Err(HarnessError::Runtime("unexpected csv header".into()));
    }
    rd.deserialize()
        .map(|r| r.map_err(|e| HarnessError::Runtime(format!("csv row: {e}"))))
        .collect()
}

pub fn read_rows(path: &Path) -> Result<Vec<CsvRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_rows(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(trial: usize) -> CsvRow {
        CsvRow {
            trial,
            seed: 7,
            kind: "feas".into(),
            d: 30,
            depth: 2,
            k: 2,
            alpha: 1.0,
            mode: Mode::Lab,
            m_bits: 64,
            solver_or_player: "ellipsoid".into(),
            queries: 10,
            success: true,
            wall_ms: 1.5,
            extra_json: r#"{"a":[1,2],"b":"x,y"}"#.into(),
        }
    }

    #[test]
    fn header_only_then_append() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        emit_results(&[], &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), format!("{HEADER}\n"));
        emit_results(&[row(1), row(0)], &path).unwrap();
        emit_results(&[row(2)], &path).unwrap();
        let rows = read_rows(&path).unwrap();
        assert_eq!(rows.iter().map(|r| r.trial).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(rows[0], row(0));
    }

    #[test]
    fn refuses_foreign_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("other.csv");
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        assert!(matches!(emit_results(&[row(0)], &path), Err(HarnessError::Io(_))));
    }
}
