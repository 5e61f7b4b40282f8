//! CSV tables with JSON sidecars.

use std::fs;
use std::path::{Path, PathBuf};

use pacs_core::params::ParamsConfig;
use serde::Serialize;
use serde_json::Value;

use crate::CliError;

/// Formats a float with 9 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.8e}")
}

pub struct Table {
    pub name: &'static str,
    pub columns: &'static [&'static str],
    pub rows: Vec<Vec<String>>,
}

/// Parameter record written next to every output file.
#[derive(Debug, Serialize)]
pub struct Sidecar<'a> {
    pub file: String,
    pub command: &'a str,
    pub version: &'static str,
    pub columns: Vec<&'static str>,
    pub params: &'a ParamsConfig,
    pub settings: &'a Value,
    pub summary: Value,
}

pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.root.join(file)
    }

    pub fn write_table(&self, table: &Table, command: &str, params: &ParamsConfig, settings: &Value, summary: Value) -> Result<PathBuf, CliError> {
        let path = self.path(&format!("{}.csv", table.name));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(table.columns)?;
        for row in &table.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        self.write_sidecar(&format!("{}.csv", table.name), table.columns, command, params, settings, summary)?;
        Ok(path)
    }

    /// Writes `<stem>.json` describing the output file `file`.
    pub fn write_sidecar(
        &self,
        file: &str,
        columns: &[&'static str],
        command: &str,
        params: &ParamsConfig,
        settings: &Value,
        summary: Value,
    ) -> Result<PathBuf, CliError> {
        let stem = Path::new(file).file_stem().and_then(|s| s.to_str()).unwrap_or(file);
        let sidecar = Sidecar {
            file: file.to_string(),
            command,
            version: env!("CARGO_PKG_VERSION"),
            columns: columns.to_vec(),
            params,
            settings,
            summary,
        };
        self.write_json(&format!("{stem}.json"), &sidecar)
    }

    pub fn write_json<T: Serialize>(&self, file: &str, value: &T) -> Result<PathBuf, CliError> {
        let path = self.path(file);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }
}
