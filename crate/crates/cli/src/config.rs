//! Run configuration: an optional JSON file overlaid by command-line flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use mnx_core::harness::MIN_REPLICATIONS;

/// Schema version accepted in config files.
pub const CONFIG_VERSION: u32 = 1;

pub const DEFAULT_N: usize = 64;
pub const DEFAULT_N_LIST: [usize; 3] = [16, 64, 256];
pub const DEFAULT_REPLICATIONS: usize = 1000;
pub const DEFAULT_SEED: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Validate,
    Coeffs,
    Density,
    Study,
    Residual,
}

impl Mode {
    /// Fine steps per coarse interval when none is given.
    pub fn default_refinement(self) -> usize {
        match self {
            Mode::Study | Mode::Residual => 64,
            _ => 32,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check model guards on the scan range.
    Validate(Flags),
    /// Dump per-path expansion coefficients.
    Coeffs(Flags),
    /// Second-order density curves.
    Density(Flags),
    /// Error decay of first- and second-order predictions over n.
    Study(Flags),
    /// Size of the remainder left by the stochastic expansion.
    Residual(Flags),
}

impl Command {
    pub fn split(self) -> (Mode, Flags) {
        match self {
            Command::Validate(f) => (Mode::Validate, f),
            Command::Coeffs(f) => (Mode::Coeffs, f),
            Command::Density(f) => (Mode::Density, f),
            Command::Study(f) => (Mode::Study, f),
            Command::Residual(f) => (Mode::Residual, f),
        }
    }
}

#[derive(Debug, Default, Args)]
pub struct Flags {
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Model preset name.
    #[arg(long)]
    pub model: Option<String>,
    /// Preset parameter override, `key=value`. Repeatable.
    #[arg(long = "param", value_parser = parse_param)]
    pub params: Vec<(String, f64)>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Comma-separated increasing list of n.
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
    /// Fine steps per coarse interval.
    #[arg(long)]
    pub refinement: Option<usize>,
    #[arg(long, short = 'N')]
    pub replications: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated test functions for `study`.
    #[arg(long, value_delimiter = ',')]
    pub functions: Option<Vec<String>>,
    /// Time-stepping scheme.
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; falls back to MNX_THREADS, then to all cores.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Also write SVG plots.
    #[arg(long)]
    pub svg: bool,
}

fn parse_param(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    let v: f64 = v
        .trim()
        .parse()
        .map_err(|_| format!("parameter `{k}` needs a number, got `{v}`"))?;
    Ok((k.trim().to_string(), v))
}

/// Contents of a config file. Every field but `version` is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub version: u32,
    pub model: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub n: Option<usize>,
    pub n_list: Option<Vec<usize>>,
    pub refinement: Option<usize>,
    pub replications: Option<usize>,
    pub seed: Option<u64>,
    pub functions: Option<Vec<String>>,
    pub scheme: Option<String>,
    pub out: Option<PathBuf>,
    pub svg: Option<bool>,
}

/// Fully resolved configuration of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub subcommand: Mode,
    pub model: String,
    pub params: BTreeMap<String, f64>,
    pub n: usize,
    pub n_list: Vec<usize>,
    pub refinement: usize,
    pub replications: usize,
    pub seed: u64,
    pub functions: Option<Vec<String>>,
    /// `None` keeps the subcommand's own default.
    pub scheme: Option<String>,
    pub out: PathBuf,
    pub emit_svg: bool,
}

/// A configuration problem; reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn usage(msg: impl Into<String>) -> UsageError {
    UsageError(msg.into())
}

pub fn read_file(path: &Path) -> Result<FileConfig, UsageError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    parse_file(&text).map_err(|e| usage(format!("config {}: {}", path.display(), e.0)))
}

pub fn parse_file(text: &str) -> Result<FileConfig, UsageError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| usage(format!("invalid JSON: {e}")))?;
    if value.get("version").is_none() {
        return Err(usage("missing required field `version`"));
    }
    let file: FileConfig = serde_json::from_value(value).map_err(|e| usage(e.to_string()))?;
    if file.version != CONFIG_VERSION {
        return Err(usage(format!(
            "unsupported config version {} (expected {CONFIG_VERSION})",
            file.version
        )));
    }
    Ok(file)
}

/// Overlay `flags` on `file` and apply defaults and range checks.
pub fn resolve(mode: Mode, flags: &Flags, file: FileConfig) -> Result<RunConfig, UsageError> {
    let mut params = file.params;
    params.extend(flags.params.iter().cloned());
    let cfg = RunConfig {
        subcommand: mode,
        model: flags
            .model
            .clone()
            .or(file.model)
            .ok_or_else(|| usage("--model is required"))?,
        params,
        n: flags.n.or(file.n).unwrap_or(DEFAULT_N),
        n_list: flags
            .n_list
            .clone()
            .or(file.n_list)
            .unwrap_or_else(|| DEFAULT_N_LIST.to_vec()),
        refinement: flags
            .refinement
            .or(file.refinement)
            .unwrap_or_else(|| mode.default_refinement()),
        replications: flags
            .replications
            .or(file.replications)
            .unwrap_or(DEFAULT_REPLICATIONS),
        seed: flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        functions: flags.functions.clone().or(file.functions),
        scheme: flags.scheme.clone().or(file.scheme),
        out: flags
            .out
            .clone()
            .or(file.out)
            .unwrap_or_else(|| PathBuf::from(".")),
        emit_svg: flags.svg || file.svg.unwrap_or(false),
    };
    cfg.check()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn check(&self) -> Result<(), UsageError> {
        if self.n < 2 {
            return Err(usage(format!("n must be at least 2, got {}", self.n)));
        }
        if self.n_list.len() < 3 {
            return Err(usage("n_list needs at least 3 entries"));
        }
        if let Some(&bad) = self.n_list.iter().find(|&&n| n < 2) {
            return Err(usage(format!(
                "n_list entries must be at least 2, got {bad}"
            )));
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(usage("n_list must be strictly increasing"));
        }
        if self.refinement == 0 {
            return Err(usage("refinement must be at least 1"));
        }
        if self.replications < MIN_REPLICATIONS {
            return Err(usage(format!(
                "replications must be at least {MIN_REPLICATIONS}, got {}",
                self.replications
            )));
        }
        if let Some(fs) = &self.functions {
            if fs.is_empty() {
                return Err(usage("functions must not be empty"));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the settings that determine the numbers. The output
    /// directory is left out so reruns elsewhere hash identically.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("out");
        }
        let digest = Sha256::digest(v.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// `--threads`, then `MNX_THREADS`, then the rayon default.
pub fn thread_count(flag: Option<usize>) -> Result<Option<usize>, UsageError> {
    let t = match flag {
        Some(t) => Some(t),
        None => match std::env::var("MNX_THREADS") {
            Ok(s) if !s.trim().is_empty() => Some(s.trim().parse().map_err(|_| {
                usage(format!("MNX_THREADS must be a positive integer, got `{s}`"))
            })?),
            _ => None,
        },
    };
    if t == Some(0) {
        return Err(usage("thread count must be at least 1"));
    }
    Ok(t)
}
