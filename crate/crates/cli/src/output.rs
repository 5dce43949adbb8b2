use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// CSV number format: scientific, 13 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.12e}")
}

fn io(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Writes files into one directory and remembers their names for the
/// manifest.
pub struct OutputDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: PathBuf) -> Result<Self, CliError> {
        std::fs::create_dir_all(&dir).map_err(|e| io(&dir, e))?;
        Ok(Self {
            dir,
            written: Vec::new(),
        })
    }

    pub fn files(&self) -> &[String] {
        &self.written
    }

    pub fn table<S: AsRef<str>>(
        &mut self,
        name: &str,
        header: &[S],
        rows: &[Vec<String>],
    ) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| io(&path, e))?;
        w.write_record(header.iter().map(|h| h.as_ref()))
            .map_err(|e| io(&path, e))?;
        for r in rows {
            w.write_record(r).map_err(|e| io(&path, e))?;
        }
        w.flush().map_err(|e| io(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn key_values(&mut self, name: &str, rows: &[(&str, String)]) -> Result<(), CliError> {
        let rows: Vec<Vec<String>> = rows
            .iter()
            .map(|(k, v)| vec![k.to_string(), v.clone()])
            .collect();
        self.table(name, &["key", "value"], &rows)
    }

    pub fn manifest<M: Serialize>(&mut self, manifest: &M) -> Result<(), CliError> {
        let path = self.dir.join("manifest.toml");
        let text = toml::to_string(manifest).map_err(|e| io(&path, e))?;
        std::fs::write(&path, text).map_err(|e| io(&path, e))
    }
}
