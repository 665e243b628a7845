//! Config-driven batch runner behind the `mmfa` binary.

pub mod config;
mod jobs;
pub mod output;

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::Result;
use config::{JobConfig, OutputFormat};
use output::{Stamp, Writer};

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub format: Option<OutputFormat>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    /// Set by `verify` jobs when some check failed.
    pub failed: bool,
}

pub fn config_digest(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Loads, validates and runs one job file.
pub fn run(path: &Path, overrides: &Overrides) -> Result<RunOutcome> {
    let text = fs::read_to_string(path)
        .map_err(|e| crate::Error::Config(format!("cannot read {}: {e}", path.display())))?;
    run_text(&text, overrides)
}

pub fn run_text(text: &str, overrides: &Overrides) -> Result<RunOutcome> {
    let mut cfg = JobConfig::parse(text)?;
    if let Some(dir) = &overrides.output_dir {
        cfg.output.dir = dir.clone();
    }
    if let Some(seed) = overrides.seed {
        cfg.seed = seed;
    }
    if let Some(format) = overrides.format {
        cfg.output.format = format;
    }
    cfg.validate()?;
    let stamp = Stamp {
        job: cfg.job.kind.as_str().to_string(),
        config_sha256: config_digest(text),
        seed: cfg.seed,
    };
    let mut writer = Writer::new(&cfg.output.dir, cfg.output.format, stamp)?;
    let failed = jobs::dispatch(&cfg, &mut writer)?;
    Ok(RunOutcome {
        files: writer.written,
        failed,
    })
}
