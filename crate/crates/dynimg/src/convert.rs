//! The batch conversion engine behind `dynimg convert`.
//!
//! Files are distributed over a work-stealing pool; each file's pipeline
//! is sequential and pure, so outputs are byte-identical no matter how
//! many workers run. Per-file failures land in the manifest instead of
//! aborting the batch. The manifest is JSON lines, one record per input,
//! written in input order once all workers finish.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use dynimg_core::rankpool::{
    approx_rank_pool, avg_pool_depth, depth_segments, max_pool_depth, normalize_min_max,
    to_three_channel, ThreeChannelMode,
};
use dynimg_core::{DynamicImage, MultiChannelImage, Plane2D, Volume3D};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ChannelModeOpt, JobConfig, Method, OutputFormat};
use crate::error::Error;
use crate::exact::exact_weight_image;
use crate::formats;
use crate::nifti;

/// One manifest line. Timing fields vary run to run; everything else is a
/// pure function of the input and the config.
#[derive(Debug, Clone, Serialize)]
pub struct ManifestRecord {
    pub input: String,
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub method: &'static str,
    pub strategy: &'static str,
    pub channels: &'static str,
    pub normalized: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_before_norm: Option<f32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_before_norm: Option<f32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    pub wall_ms: f64,
}

#[derive(Debug)]
pub struct ConvertOutcome {
    pub records: Vec<ManifestRecord>,
    pub failures: usize,
    pub manifest_path: PathBuf,
}

/// Strips `.nii` / `.nii.gz` from a file name to build the output stem.
fn input_stem(path: &Path) -> String {
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "volume".to_owned());
    let lower = name.to_ascii_lowercase();
    let cut = if lower.ends_with(".nii.gz") {
        name.len() - 7
    } else if lower.ends_with(".nii") {
        name.len() - 4
    } else if let Some(dot) = name.rfind('.') {
        dot
    } else {
        name.len()
    };
    let stem = &name[..cut];
    if stem.is_empty() {
        "volume".to_owned()
    } else {
        stem.to_owned()
    }
}

/// Output stems, deduplicated deterministically in input order.
fn output_stems(inputs: &[PathBuf]) -> Vec<String> {
    let mut counts: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    inputs
        .iter()
        .map(|p| {
            let base = input_stem(p);
            let n = counts.entry(base.clone()).or_insert(0);
            let stem = if *n == 0 {
                base.clone()
            } else {
                format!("{base}-{n}")
            };
            *n += 1;
            stem
        })
        .collect()
}

struct Emitted {
    width: usize,
    height: usize,
    depth: usize,
    min_before_norm: f32,
    max_before_norm: f32,
    output: PathBuf,
}

/// Pools a volume into a single plane according to the configured method.
pub fn pool_single(cfg: &JobConfig, v: &Volume3D) -> Result<DynamicImage, Error> {
    Ok(match cfg.method {
        Method::Dynamic => approx_rank_pool(v, cfg.strategy.into())?,
        Method::Avg => avg_pool_depth(v),
        Method::Max => max_pool_depth(v),
        Method::Exact => exact_weight_image(v, cfg.lambda, cfg.iterations, cfg.step0)?.0,
    })
}

/// Exact pooling per depth segment. A segment too short to rank (one
/// slice) contributes a zero plane, mirroring the closed form's behavior
/// on depth-1 volumes.
fn exact_segment3(cfg: &JobConfig, v: &Volume3D) -> Result<MultiChannelImage, Error> {
    let segments = depth_segments(v.depth())?;
    let mut planes: Vec<Plane2D> = Vec::with_capacity(3);
    for (start, len) in segments {
        let sub = v.depth_range(start, len)?;
        let plane = if len < 2 {
            Plane2D::filled(v.width(), v.height(), 0.0)?
        } else {
            exact_weight_image(&sub, cfg.lambda, cfg.iterations, cfg.step0)?
                .0
                .into_plane()
        };
        planes.push(plane);
    }
    let planes: [Plane2D; 3] = [planes[0].clone(), planes[1].clone(), planes[2].clone()];
    Ok(MultiChannelImage::from_planes(&planes)?)
}

fn min_max(values: &[f32]) -> (f32, f32) {
    let mut min = f32::INFINITY;
    let mut max = f32::NEG_INFINITY;
    for &v in values {
        min = min.min(v);
        max = max.max(v);
    }
    (min, max)
}

fn convert_file(cfg: &JobConfig, input: &Path, stem: &str) -> Result<Emitted, Error> {
    let (volume, _header) = nifti::read_volume(input).map_err(|source| Error::Nifti {
        path: input.to_path_buf(),
        source,
    })?;
    let out_path = cfg
        .out_dir
        .join(format!("{stem}.{}", cfg.format.extension()));

    match cfg.channels {
        ChannelModeOpt::Single => {
            let pooled = pool_single(cfg, &volume)?;
            let (min, max) = pooled.plane().min_max();
            let final_img = if cfg.normalize {
                normalize_min_max(&pooled)
            } else {
                pooled
            };
            let plane = final_img.plane();
            match cfg.format {
                OutputFormat::Png8 => formats::write_plane_png8(&out_path, plane)?,
                OutputFormat::Png16 => formats::write_plane_png16(&out_path, plane)?,
                OutputFormat::RawF32 => formats::write_raw_f32(
                    &out_path,
                    plane.width(),
                    plane.height(),
                    1,
                    plane.values(),
                )?,
            }
            Ok(Emitted {
                width: volume.width(),
                height: volume.height(),
                depth: volume.depth(),
                min_before_norm: min,
                max_before_norm: max,
                output: out_path,
            })
        }
        ChannelModeOpt::Replicate3 | ChannelModeOpt::Segment3 => {
            let mode = cfg.channels.three_channel().expect("three-channel mode");
            let raw = match (cfg.method, mode) {
                (Method::Exact, ThreeChannelMode::Segment3) => exact_segment3(cfg, &volume)?,
                _ => {
                    let pooled = pool_single(cfg, &volume)?;
                    to_three_channel(&pooled, &volume, mode)?
                }
            };
            let (min, max) = min_max(raw.values());
            let final_img = if cfg.normalize {
                formats::normalize_multi_min_max(&raw)
            } else {
                raw
            };
            match cfg.format {
                OutputFormat::Png8 => formats::write_multi_png8(&out_path, &final_img)?,
                OutputFormat::Png16 => formats::write_multi_png16(&out_path, &final_img)?,
                OutputFormat::RawF32 => formats::write_raw_f32(
                    &out_path,
                    final_img.width(),
                    final_img.height(),
                    MultiChannelImage::CHANNELS,
                    final_img.values(),
                )?,
            }
            Ok(Emitted {
                width: volume.width(),
                height: volume.height(),
                depth: volume.depth(),
                min_before_norm: min,
                max_before_norm: max,
                output: out_path,
            })
        }
    }
}

fn process_one(cfg: &JobConfig, input: &Path, stem: &str) -> ManifestRecord {
    let start = Instant::now();
    let base = ManifestRecord {
        input: input.display().to_string(),
        status: "ok",
        error: None,
        method: cfg.method.as_str(),
        strategy: cfg.strategy.as_str(),
        channels: cfg.channels.as_str(),
        normalized: cfg.normalize,
        width: None,
        height: None,
        depth: None,
        min_before_norm: None,
        max_before_norm: None,
        output: None,
        wall_ms: 0.0,
    };
    let mut record = match convert_file(cfg, input, stem) {
        Ok(e) => ManifestRecord {
            width: Some(e.width),
            height: Some(e.height),
            depth: Some(e.depth),
            min_before_norm: Some(e.min_before_norm),
            max_before_norm: Some(e.max_before_norm),
            output: Some(e.output.display().to_string()),
            ..base
        },
        Err(err) => ManifestRecord {
            status: "error",
            error: Some(err.to_string()),
            ..base
        },
    };
    record.wall_ms = start.elapsed().as_secs_f64() * 1e3;
    record
}

/// Runs the whole batch and writes the manifest. Returns the records so
/// callers can inspect failures without re-reading the file.
pub fn run_convert(cfg: &JobConfig) -> Result<ConvertOutcome, Error> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out_dir)?;
    let stems = output_stems(&cfg.inputs);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::config(format!("worker pool: {e}")))?;
    let records: Vec<ManifestRecord> = pool.install(|| {
        cfg.inputs
            .par_iter()
            .zip(stems.par_iter())
            .map(|(input, stem)| process_one(cfg, input, stem))
            .collect()
    });

    let manifest_path = cfg.manifest_path();
    let mut file = fs::File::create(&manifest_path)?;
    for record in &records {
        let line = serde_json::to_string(record).expect("record serializes");
        writeln!(file, "{line}")?;
    }

    let failures = records.iter().filter(|r| r.status == "error").count();
    Ok(ConvertOutcome {
        records,
        failures,
        manifest_path,
    })
}
