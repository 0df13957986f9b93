//! Experiment configs: `{ "command"?, "seed"?, "output_path"?, "params": {..} }`.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

use crate::error::{CliError, FieldError, Result};
use crate::Command;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub params: Map<String, Value>,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Reads `path`; `command` comes from the command line and must agree
    /// with the file when the file names one. `seed` overrides the file.
    pub fn load(path: &Path, command: Command, seed: Option<u64>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::ReadConfig { path: path.into(), source })?;
        let value: Value = serde_json::from_str(&text).map_err(|e| CliError::Parse {
            path: path.into(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::from_value(value, command, seed)
    }

    pub fn from_value(value: Value, command: Command, seed: Option<u64>) -> Result<Self> {
        let Value::Object(mut top) = value else {
            return Err(CliError::field("<root>", "config must be a JSON object"));
        };
        let mut errors = Vec::new();
        if let Some(c) = top.remove("command") {
            match c.as_str().map(Command::from_name) {
                Some(Some(c)) if c == command => {}
                Some(Some(c)) => errors.push(fe("command", format!("config is for `{}`, not `{}`", c.name(), command.name()))),
                _ => errors.push(fe("command", format!("unrecognized command {c}"))),
            }
        }
        let file_seed = match top.remove("seed") {
            None => None,
            Some(v) => match v.as_u64() {
                Some(s) => Some(s),
                None => {
                    errors.push(fe("seed", "must be a non-negative integer"));
                    None
                }
            },
        };
        let output_path = match top.remove("output_path") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) => Some(PathBuf::from(s)),
            Some(_) => {
                errors.push(fe("output_path", "must be a string"));
                None
            }
        };
        let params = match top.remove("params") {
            None => Map::new(),
            Some(Value::Object(m)) => m,
            Some(_) => {
                errors.push(fe("params", "must be an object"));
                Map::new()
            }
        };
        for key in top.keys() {
            errors.push(fe(key, "unknown top-level field"));
        }
        if !errors.is_empty() {
            return Err(CliError::Config(errors));
        }
        Ok(Self { command, params, seed: seed.or(file_seed).unwrap_or(0), output_path })
    }

    /// `sha256` of the compact JSON of `{command, params, seed}` with keys
    /// in sorted order.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let canonical = serde_json::json!({
            "command": self.command.name(),
            "params": Value::Object(self.params.clone()),
            "seed": self.seed,
        });
        let bytes = serde_json::to_vec(&canonical).expect("JSON values always serialize");
        hex::encode(Sha256::digest(&bytes))
    }
}

fn fe(field: impl Into<String>, message: impl Into<String>) -> FieldError {
    FieldError { field: field.into(), message: message.into() }
}

/// Reads fields out of a params object, collecting every problem instead
/// of stopping at the first.
pub struct Fields<'a> {
    map: &'a Map<String, Value>,
    prefix: String,
    seen: BTreeSet<String>,
    errors: Vec<FieldError>,
}

impl<'a> Fields<'a> {
    pub fn new(map: &'a Map<String, Value>, prefix: &str) -> Self {
        Self { map, prefix: prefix.to_string(), seen: BTreeSet::new(), errors: Vec::new() }
    }

    fn path(&self, key: &str) -> String {
        format!("{}.{key}", self.prefix)
    }

    pub fn raw(&mut self, key: &str) -> Option<&'a Value> {
        self.seen.insert(key.to_string());
        self.map.get(key).filter(|v| !v.is_null())
    }

    pub fn opt<T: DeserializeOwned>(&mut self, key: &str) -> Option<T> {
        let v = self.raw(key)?;
        match serde_json::from_value(v.clone()) {
            Ok(t) => Some(t),
            Err(e) => {
                self.error(key, e.to_string());
                None
            }
        }
    }

    pub fn req<T: DeserializeOwned>(&mut self, key: &str) -> Option<T> {
        if self.raw(key).is_none() {
            self.error(key, "required field is missing");
            return None;
        }
        self.opt(key)
    }

    pub fn or<T: DeserializeOwned>(&mut self, key: &str, default: T) -> T {
        self.opt(key).unwrap_or(default)
    }

    /// First present key among `keys`, all of which count as seen.
    pub fn alias<T: DeserializeOwned>(&mut self, keys: &[&str]) -> Option<T> {
        let present: Vec<&str> = keys.iter().copied().filter(|k| self.map.get(*k).is_some_and(|v| !v.is_null())).collect();
        keys.iter().for_each(|k| {
            self.seen.insert(k.to_string());
        });
        if present.len() > 1 {
            self.error(present[1], format!("conflicts with `{}`", present[0]));
        }
        present.first().and_then(|k| self.opt(k))
    }

    pub fn error(&mut self, key: &str, message: impl Into<String>) {
        let field = self.path(key);
        self.errors.push(fe(field, message));
    }

    pub fn check(&mut self, key: &str, ok: bool, message: &str) {
        if !ok {
            self.error(key, message);
        }
    }

    /// Value in the open interval `(lo, hi)`.
    pub fn check_open(&mut self, key: &str, v: Option<f64>, lo: f64, hi: f64) {
        if let Some(v) = v {
            self.check(key, v > lo && v < hi, &format!("must lie in ({lo}, {hi})"));
        }
    }

    pub fn absorb(&mut self, other: Fields<'_>) {
        self.errors.extend(other.finish_errors());
    }

    fn finish_errors(mut self) -> Vec<FieldError> {
        for key in self.map.keys() {
            if !self.seen.contains(key) {
                let field = self.path(key);
                self.errors.push(fe(field, "unknown field"));
            }
        }
        self.errors
    }

    pub fn finish(self) -> Result<()> {
        let errors = self.finish_errors();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(errors))
        }
    }
}
