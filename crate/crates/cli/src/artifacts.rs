//! Artifact writers. Every CSV starts with a `# config_hash=` comment line
//! and every JSON object carries a `config_hash` key.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use impctl_core::io::{fmt_f64, write_row};
use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, CliResult};

pub struct ArtifactDir {
    root: PathBuf,
    hash: String,
    written: Vec<PathBuf>,
}

impl ArtifactDir {
    pub fn create(root: &Path, hash: String) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            hash,
            written: Vec::new(),
        })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn into_written(self) -> Vec<PathBuf> {
        self.written
    }

    /// Writes `rows` under `header`; cells are full-precision floats.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> CliResult<()> {
        self.csv_text(
            name,
            header,
            rows.into_iter().map(|r| r.into_iter().map(fmt_f64).collect()),
        )
    }

    pub fn csv_text(
        &mut self,
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> CliResult<()> {
        let hash = self.hash.clone();
        self.stream(name, |w| {
            writeln!(w, "# config_hash={hash}")?;
            write_row(w, &header.iter().map(|h| h.to_string()).collect::<Vec<_>>())?;
            for row in rows {
                write_row(w, &row)?;
            }
            Ok(())
        })
    }

    /// Opens `name` and hands a buffered writer to `body`.
    pub fn stream(&mut self, name: &str, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> CliResult<()> {
        let path = self.root.join(name);
        let file = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        body(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| CliError::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    /// Pretty JSON of `value` with `config_hash` inserted at the top level.
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut v = serde_json::to_value(value).expect("artifact serializes");
        if let Value::Object(map) = &mut v {
            map.insert("config_hash".into(), Value::String(self.hash.clone()));
        }
        let text = serde_json::to_string_pretty(&v).expect("artifact serializes");
        self.stream(name, |w| writeln!(w, "{text}"))
    }

    pub fn text(&mut self, name: &str, text: &str) -> CliResult<()> {
        self.stream(name, |w| w.write_all(text.as_bytes()))
    }
}
