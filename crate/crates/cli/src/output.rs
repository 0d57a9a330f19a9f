use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;

/// Version of every JSON document the CLI writes.
pub const OUTPUT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug)]
pub struct CliError {
    pub code: String,
    pub message: String,
    pub stage: Option<String>,
}

impl CliError {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        CliError {
            code: code.into(),
            message: message.into(),
            stage: None,
        }
    }

    pub fn in_stage(mut self, stage: &str) -> Self {
        self.stage.get_or_insert_with(|| stage.to_string());
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({
            "error": {
                "code": self.code,
                "message": self.message,
                "stage": self.stage,
            }
        })
        .to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}", self.code, self.message)
    }
}

impl From<nnqft::Error> for CliError {
    fn from(e: nnqft::Error) -> Self {
        CliError::new(e.code(), e.to_string())
    }
}

pub fn io_error(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::new("io", format!("{}: {e}", path.display()))
}

#[derive(Serialize)]
struct RunManifest<'a> {
    schema_version: u32,
    command: &'a str,
    config_sha256: &'a str,
    seed: u64,
    started_at: String,
    finished_at: String,
    outputs: &'a [String],
    version: &'a str,
}

/// Output directory plus the list of files written so far.
pub struct Outputs {
    pub dir: PathBuf,
    pub files: Vec<String>,
}

impl Outputs {
    pub fn new(dir: PathBuf) -> Result<Self, CliError> {
        fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
        Ok(Outputs { dir, files: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn record(&mut self, name: &str) {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        fs::write(&path, text).map_err(|e| io_error(&path, e))?;
        self.record(name);
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::new("json", e.to_string()))?;
        text.push('\n');
        self.write_text(name, &text)
    }

    pub fn write_csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| io_error(&path, e))?;
        for row in rows {
            w.serialize(row).map_err(|e| io_error(&path, e))?;
        }
        w.flush().map_err(|e| io_error(&path, e))?;
        self.record(name);
        Ok(path)
    }

    pub fn write_manifest(
        &mut self,
        command: &str,
        config_sha256: &str,
        seed: u64,
        started: DateTime<Utc>,
    ) -> Result<(), CliError> {
        let stamp = |t: DateTime<Utc>| t.to_rfc3339_opts(SecondsFormat::Millis, true);
        let manifest = RunManifest {
            schema_version: OUTPUT_SCHEMA_VERSION,
            command,
            config_sha256,
            seed,
            started_at: stamp(started),
            finished_at: stamp(Utc::now()),
            outputs: &self.files,
            version: env!("CARGO_PKG_VERSION"),
        };
        let name = format!("manifest-{command}.json");
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::new("json", e.to_string()))?;
        text.push('\n');
        let path = self.path(&name);
        fs::write(&path, text).map_err(|e| io_error(&path, e))
    }
}

/// Element multi-index as `0-0-1-3`.
pub fn element(m: &[usize]) -> String {
    m.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("-")
}

/// Point coordinates as `0.5;1`.
pub fn coords(p: &[f64]) -> String {
    p.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}
