//! Atomic file output, the metadata sidecar, and the CSV reader used to
//! round-trip emitted tables.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(path.display().to_string(), e)
}

/// Writes `contents` to a temporary file next to `path`, then renames it.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(|e| io_err(path, e))
}

/// Output directory plus the list of files written so far.
#[derive(Debug)]
pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        OutDir { root: root.into(), written: Vec::new() }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        write_atomic(&self.path(name), contents)?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &serde_json::Value) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("JSON value serializes");
        text.push('\n');
        self.write(name, &text)
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    /// Sidecar holding everything that varies between identical runs.
    pub fn write_metadata(&mut self, command: &str, args: &[String], threads: usize) -> Result<(), CliError> {
        let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let meta = serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "command": command,
            "args": args,
            "threads": threads,
            "version": env!("CARGO_PKG_VERSION"),
            "unix_time": now,
            "files": self.written,
        });
        let name = format!("{command}.meta.json");
        write_atomic(&self.path(&name), &(serde_json::to_string_pretty(&meta).expect("metadata serializes") + "\n"))
    }
}

/// Header and rows of a CSV file as strings.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Parses column `name` as floats; empty cells become `None`.
    pub fn f64_column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let c = self.column(name)?;
        self.rows
            .iter()
            .map(|r| if r[c].is_empty() { Some(None) } else { r[c].parse().ok().map(Some) })
            .collect()
    }

    pub fn parse(text: &str) -> Result<Table, csv::Error> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
        let header = rdr.headers()?.iter().map(str::to_string).collect();
        let rows = rdr
            .records()
            .map(|r| r.map(|rec| rec.iter().map(str::to_string).collect()))
            .collect::<Result<_, _>>()?;
        Ok(Table { header, rows })
    }

    pub fn read(path: &Path) -> Result<Table, CliError> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        Table::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_and_table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutDir::new(dir.path().join("nested"));
        out.write("t.csv", "a,b\n0.1,\n2,3e-5\n").unwrap();
        let t = Table::read(&out.path("t.csv")).unwrap();
        assert_eq!(t.header, ["a", "b"]);
        assert_eq!(t.f64_column("b").unwrap(), vec![None, Some(3e-5)]);
        let leftovers: Vec<_> = fs::read_dir(dir.path().join("nested")).unwrap().collect();
        assert_eq!(leftovers.len(), 1);
        out.write_metadata("demo", &[], 1).unwrap();
        assert!(out.path("demo.meta.json").exists());
    }
}
