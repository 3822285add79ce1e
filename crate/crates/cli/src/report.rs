//! Line-delimited JSON reports.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub struct Report {
    meta: Map<String, Value>,
    inputs: Vec<Value>,
    records: Vec<Value>,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl Report {
    pub fn new(command: &str, seed: u64) -> Self {
        let mut meta = Map::new();
        meta.insert("record".into(), json!("meta"));
        meta.insert("tool".into(), json!("tlsloss"));
        meta.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
        meta.insert("command".into(), json!(command));
        meta.insert("seed".into(), json!(seed));
        Self {
            meta,
            inputs: Vec::new(),
            records: Vec::new(),
        }
    }

    /// Record an input file and its digest.
    pub fn add_input(&mut self, path: &Path) -> Result<(), CliError> {
        let digest = sha256_file(path)?;
        self.inputs.push(json!({ "path": path.display().to_string(), "sha256": digest }));
        Ok(())
    }

    pub fn meta(&mut self, key: &str, value: Value) {
        self.meta.insert(key.into(), value);
    }

    /// Append a record of the given kind. `fields` must be a JSON object.
    pub fn push(&mut self, kind: &str, fields: Value) {
        let mut obj = Map::new();
        obj.insert("record".into(), json!(kind));
        if let Value::Object(m) = fields {
            obj.extend(m);
        }
        self.records.push(Value::Object(obj));
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        let message = message.into();
        eprintln!("warning: {message}");
        self.push("warning", json!({ "message": message }));
    }

    fn render(&self) -> Result<String, CliError> {
        let mut meta = self.meta.clone();
        meta.insert("inputs".into(), Value::Array(self.inputs.clone()));
        let mut out = serde_json::to_string(&Value::Object(meta))?;
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn write(&self, out: Option<&Path>) -> Result<(), CliError> {
        let text = self.render()?;
        match out {
            Some(path) => fs::write(path, text)
                .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display()))),
            None => {
                let mut stdout = io::stdout().lock();
                stdout.write_all(text.as_bytes())?;
                stdout.flush()?;
                Ok(())
            }
        }
    }
}
