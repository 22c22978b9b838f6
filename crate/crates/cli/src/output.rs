//! Result files: CSV tables plus one JSON record per run.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

use crate::config::ExperimentConfig;

/// A sweep point or step that could not be computed.
#[derive(Debug, Clone, Serialize)]
pub struct Failure {
    pub at: Value,
    pub error: String,
}

/// Written as `<kind>.json` next to the tables it lists.
#[derive(Debug, Serialize)]
pub struct ResultRecord {
    pub kind: &'static str,
    pub config: ExperimentConfig,
    pub outputs: Value,
    pub files: Vec<String>,
    pub failures: Vec<Failure>,
}

pub struct OutputDir {
    root: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn write_csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let path = self.root.join(name);
        let mut w =
            csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// Writes the record and returns its path.
    pub fn finish(
        self,
        kind: &'static str,
        config: &ExperimentConfig,
        outputs: Value,
        failures: Vec<Failure>,
    ) -> Result<PathBuf> {
        let name = format!("{kind}.json");
        let mut files = self.files;
        files.push(name.clone());
        let record = ResultRecord {
            kind,
            config: config.clone(),
            outputs,
            files,
            failures,
        };
        let path = self.root.join(name);
        fs::write(&path, serde_json::to_string_pretty(&record)?)
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// Shortest round-trip representation; `inf`/`-inf` for infinities.
pub fn num(x: f64) -> String {
    format!("{x}")
}

/// Absent values become empty fields.
pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// JSON has no infinities; they are written as strings.
pub fn json_num(x: f64) -> Value {
    if x.is_finite() {
        Value::from(x)
    } else {
        Value::from(num(x))
    }
}

pub fn json_opt(x: Option<f64>) -> Value {
    x.map(json_num).unwrap_or(Value::Null)
}
