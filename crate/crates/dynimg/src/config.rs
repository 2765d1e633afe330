//! Batch job configuration: defaults, an optional TOML file, and CLI
//! flags, merged in that order (flags win).

use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use dynimg_core::rankpool::{Strategy, ThreeChannelMode};
use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Approximate rank pooling.
    Dynamic,
    /// Mean over depth.
    Avg,
    /// Maximum over depth.
    Max,
    /// Solve the ranking objective and emit the weight plane.
    Exact,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Dynamic => "dynamic",
            Method::Avg => "avg",
            Method::Max => "max",
            Method::Exact => "exact",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyOpt {
    SinglePass,
    TwoPass,
}

impl From<StrategyOpt> for Strategy {
    fn from(s: StrategyOpt) -> Strategy {
        match s {
            StrategyOpt::SinglePass => Strategy::SinglePass,
            StrategyOpt::TwoPass => Strategy::TwoPass,
        }
    }
}

impl StrategyOpt {
    pub fn as_str(&self) -> &'static str {
        match self {
            StrategyOpt::SinglePass => "single-pass",
            StrategyOpt::TwoPass => "two-pass",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum ChannelModeOpt {
    #[value(name = "single")]
    #[serde(rename = "single")]
    Single,
    #[value(name = "replicate3")]
    #[serde(rename = "replicate3")]
    Replicate3,
    #[value(name = "segment3")]
    #[serde(rename = "segment3")]
    Segment3,
}

impl ChannelModeOpt {
    pub fn as_str(&self) -> &'static str {
        match self {
            ChannelModeOpt::Single => "single",
            ChannelModeOpt::Replicate3 => "replicate3",
            ChannelModeOpt::Segment3 => "segment3",
        }
    }

    pub fn three_channel(&self) -> Option<ThreeChannelMode> {
        match self {
            ChannelModeOpt::Single => None,
            ChannelModeOpt::Replicate3 => Some(ThreeChannelMode::Replicate3),
            ChannelModeOpt::Segment3 => Some(ThreeChannelMode::Segment3),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum OutputFormat {
    #[value(name = "png8")]
    #[serde(rename = "png8")]
    Png8,
    #[value(name = "png16")]
    #[serde(rename = "png16")]
    Png16,
    #[value(name = "raw-f32")]
    #[serde(rename = "raw-f32")]
    RawF32,
}

impl OutputFormat {
    pub fn as_str(&self) -> &'static str {
        match self {
            OutputFormat::Png8 => "png8",
            OutputFormat::Png16 => "png16",
            OutputFormat::RawF32 => "raw-f32",
        }
    }

    pub fn extension(&self) -> &'static str {
        match self {
            OutputFormat::Png8 | OutputFormat::Png16 => "png",
            OutputFormat::RawF32 => "raw",
        }
    }

    pub fn requires_normalization(&self) -> bool {
        matches!(self, OutputFormat::Png8 | OutputFormat::Png16)
    }
}

/// Keys accepted in a `--config` TOML file. Everything is optional; CLI
/// flags override whatever the file sets.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FileConfig {
    pub method: Option<Method>,
    pub strategy: Option<StrategyOpt>,
    pub channels: Option<ChannelModeOpt>,
    pub normalize: Option<bool>,
    pub format: Option<OutputFormat>,
    pub out_dir: Option<PathBuf>,
    pub lambda: Option<f64>,
    pub iterations: Option<usize>,
    pub step0: Option<f64>,
    pub workers: Option<usize>,
    pub manifest: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = fs::read_to_string(path)?;
        toml::from_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }
}

/// Fully resolved batch job.
#[derive(Debug, Clone)]
pub struct JobConfig {
    pub inputs: Vec<PathBuf>,
    pub method: Method,
    pub strategy: StrategyOpt,
    pub channels: ChannelModeOpt,
    pub normalize: bool,
    pub format: OutputFormat,
    pub out_dir: PathBuf,
    pub lambda: f64,
    pub iterations: usize,
    pub step0: f64,
    pub workers: usize,
    pub manifest: Option<PathBuf>,
}

impl JobConfig {
    pub fn new(inputs: Vec<PathBuf>, out_dir: PathBuf) -> Self {
        JobConfig {
            inputs,
            method: Method::Dynamic,
            strategy: StrategyOpt::SinglePass,
            channels: ChannelModeOpt::Replicate3,
            normalize: false,
            format: OutputFormat::RawF32,
            out_dir,
            lambda: 1e-3,
            iterations: 300,
            step0: 0.1,
            workers: default_workers(),
            manifest: None,
        }
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.manifest
            .clone()
            .unwrap_or_else(|| self.out_dir.join("manifest.jsonl"))
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.inputs.is_empty() {
            return Err(Error::config("no input files"));
        }
        if self.format.requires_normalization() && !self.normalize {
            return Err(Error::config(format!(
                "{} output quantizes to [0, 1]; pass --normalize",
                self.format.as_str()
            )));
        }
        if self.workers == 0 {
            return Err(Error::config("workers must be >= 1"));
        }
        if self.method == Method::Exact {
            if !self.lambda.is_finite() || self.lambda < 0.0 {
                return Err(Error::config("lambda must be finite and >= 0"));
            }
            if self.iterations == 0 {
                return Err(Error::config("iterations must be >= 1"));
            }
            if !self.step0.is_finite() || self.step0 <= 0.0 {
                return Err(Error::config("step0 must be finite and positive"));
            }
        }
        Ok(())
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

/// Expands glob patterns; plain paths pass through untouched. Patterns
/// that match nothing are an error rather than a silent no-op.
pub fn expand_inputs(raw: &[String]) -> Result<Vec<PathBuf>, Error> {
    let mut out = Vec::new();
    for item in raw {
        let has_meta = item.contains(['*', '?', '[']);
        if !has_meta {
            out.push(PathBuf::from(item));
            continue;
        }
        let matches = glob::glob(item)
            .map_err(|e| Error::config(format!("bad pattern {item}: {e}")))?;
        let mut found = 0usize;
        for entry in matches {
            let path = entry.map_err(|e| Error::config(format!("{item}: {e}")))?;
            out.push(path);
            found += 1;
        }
        if found == 0 {
            return Err(Error::config(format!("pattern {item} matched nothing")));
        }
    }
    Ok(out)
}
