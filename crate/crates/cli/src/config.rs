//! Experiment configuration: a TOML document whose sections mirror the
//! library types, with every key overridable by a `--section.key value` flag.

use std::path::{Path, PathBuf};

use fuseid_core::pipeline::ArchConfig;
use fuseid_core::store::SynthConfig;
use fuseid_core::svm::SvmSettings;
use fuseid_core::two_branch::TrainConfig;
use fuseid_core::Error;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

pub const SEED_ENV: &str = "FUSEID_SEED";
pub const DEFAULT_SEED: u64 = 7;
const SECTIONS: [&str; 5] = ["paths", "synth", "arch", "train", "svm"];

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub data: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub svm: Option<PathBuf>,
    pub report_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default)]
    pub paths: Paths,
    #[serde(default)]
    pub synth: SynthConfig,
    #[serde(default)]
    pub arch: ArchConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub svm: SvmSettings,
}

impl ExperimentConfig {
    pub fn pipeline(&self) -> fuseid_core::pipeline::ExperimentConfig {
        fuseid_core::pipeline::ExperimentConfig {
            arch: self.arch.clone(),
            train: self.train.clone(),
            svm: self.svm.clone(),
        }
    }
}

/// `--section.key value` / `--section.key=value` pulled out of the argument list.
pub type Override = (String, String);

/// Splits dotted overrides from the arguments clap should see.
pub fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Vec<Override>), Error> {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            rest.push(arg);
            continue;
        };
        let (key, inline) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), Some(v.to_string())),
            None => (flag.to_string(), None),
        };
        let is_dotted = key
            .split_once('.')
            .is_some_and(|(section, _)| SECTIONS.contains(&section));
        if !is_dotted {
            rest.push(arg);
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => it
                .next()
                .ok_or_else(|| Error::InvalidConfig(format!("--{key} needs a value")))?,
        };
        overrides.push((key, value));
    }
    Ok((rest, overrides))
}

fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn set_dotted(doc: &mut Table, key: &str, value: Value) -> Result<(), Error> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().unwrap();
    let mut table = doc;
    for p in parts {
        table = table
            .entry(p)
            .or_insert_with(|| Value::Table(Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::InvalidConfig(format!("{key}: {p} is not a section")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

fn seed_from_env() -> Result<Option<u64>, Error> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s.trim().parse().map(Some).map_err(|_| {
            Error::InvalidConfig(format!("{SEED_ENV}={s:?} is not an unsigned integer"))
        }),
        Err(_) => Ok(None),
    }
}

/// Resolves the full configuration.
///
/// Precedence: command-line flag, then config file, then built-in default.
/// The global seed falls back to `FUSEID_SEED`, then 7, and seeds every
/// stochastic component that does not set its own.
pub fn resolve(
    file: Option<&Path>,
    overrides: &[Override],
    seed_flag: Option<u64>,
) -> Result<ExperimentConfig, Error> {
    let mut doc = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.to_path_buf(),
                source,
            })?;
            text.parse::<Table>()
                .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?
        }
        None => Table::new(),
    };
    for (key, raw) in overrides {
        set_dotted(&mut doc, key, parse_value(raw))?;
    }
    let seed = match seed_flag {
        Some(s) => s,
        None => match doc.get("seed") {
            Some(v) => v
                .as_integer()
                .and_then(|i| u64::try_from(i).ok())
                .ok_or_else(|| {
                    Error::InvalidConfig("seed must be a non-negative integer".into())
                })?,
            None => seed_from_env()?.unwrap_or(DEFAULT_SEED),
        },
    };
    let seed_value = Value::Integer(seed as i64);
    doc.insert("seed".into(), seed_value.clone());
    for section in ["synth", "train"] {
        let table = doc
            .entry(section)
            .or_insert_with(|| Value::Table(Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::InvalidConfig(format!("{section} must be a section")))?;
        table.entry("seed").or_insert(seed_value.clone());
    }
    let cfg: ExperimentConfig = doc
        .try_into()
        .map_err(|e: toml::de::Error| Error::InvalidConfig(e.to_string()))?;
    cfg.train.validate()?;
    Ok(cfg)
}
