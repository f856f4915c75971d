//! Provenance written next to every command's primary output.

use std::path::{Path, PathBuf};
use std::time::Instant;

use fuseid_core::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

/// Git-style content hash: SHA-256 over `"blob <len>\0"` followed by the bytes.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

#[derive(Debug, Serialize)]
struct InputHash {
    path: PathBuf,
    sha256_blob: String,
}

#[derive(Debug, Serialize)]
struct Timing {
    step: String,
    seconds: f64,
}

#[derive(Debug, Serialize)]
struct Record<'a> {
    command: &'a str,
    config: &'a ExperimentConfig,
    inputs: &'a [InputHash],
    timings: &'a [Timing],
    notes: &'a [String],
}

pub struct RunLog {
    command: String,
    inputs: Vec<InputHash>,
    timings: Vec<Timing>,
    notes: Vec<String>,
    started: Instant,
}

impl RunLog {
    pub fn new(command: &str) -> Self {
        RunLog {
            command: command.to_string(),
            inputs: Vec::new(),
            timings: Vec::new(),
            notes: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.inputs.push(InputHash {
            path: path.to_path_buf(),
            sha256_blob: content_hash(&bytes),
        });
        Ok(())
    }

    pub fn time<T>(&mut self, step: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let out = f()?;
        self.timings.push(Timing {
            step: step.to_string(),
            seconds: t.elapsed().as_secs_f64(),
        });
        Ok(out)
    }

    /// Prints `line` and keeps it in the log.
    pub fn note(&mut self, line: String) {
        println!("{line}");
        self.notes.push(line);
    }

    /// Writes `<output>.log.json`.
    pub fn finish(mut self, output: &Path, config: &ExperimentConfig) -> Result<()> {
        self.timings.push(Timing {
            step: "total".into(),
            seconds: self.started.elapsed().as_secs_f64(),
        });
        let record = Record {
            command: &self.command,
            config,
            inputs: &self.inputs,
            timings: &self.timings,
            notes: &self.notes,
        };
        let mut name = output.as_os_str().to_owned();
        name.push(".log.json");
        let path = PathBuf::from(name);
        let json = serde_json::to_string_pretty(&record).expect("run log serializes");
        std::fs::write(&path, json).map_err(|source| Error::Io { path, source })
    }
}
