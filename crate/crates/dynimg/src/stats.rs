//! Per-image statistics: order statistics, gradient energy (mean squared
//! forward difference along each spatial axis), and the entropy of the
//! 256-bin histogram of min-max normalized values. Quantitative proxies
//! for eyeballing how sharp or washed-out a pooled image is.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::Error;
use crate::formats;
use crate::nifti;

#[derive(Debug, Clone, Serialize)]
pub struct StatsReport {
    pub path: String,
    pub kind: &'static str,
    pub width: usize,
    pub height: usize,
    pub depth: usize,
    pub channels: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std: f64,
    pub gradient_energy: f64,
    pub entropy_bits: f64,
}

/// How the flat sample buffer is laid out, for the finite differences.
enum Layout {
    /// Slice-major volume: x fastest, then y, then z.
    Volume { w: usize, h: usize, d: usize },
    /// Row-major plane with interleaved channels; differences are taken
    /// per channel along x and y only.
    Planes { w: usize, h: usize, c: usize },
}

fn order_stats(values: &[f32]) -> (f64, f64, f64, f64) {
    let n = values.len() as f64;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0f64;
    for &v in values {
        let v = v as f64;
        min = min.min(v);
        max = max.max(v);
        sum += v;
    }
    let mean = sum / n;
    let mut var = 0.0f64;
    for &v in values {
        let d = v as f64 - mean;
        var += d * d;
    }
    (min, max, mean, (var / n).sqrt())
}

fn gradient_energy(values: &[f32], layout: &Layout) -> f64 {
    let mut sum = 0.0f64;
    let mut count = 0usize;
    let mut diff = |a: f32, b: f32| {
        let d = a as f64 - b as f64;
        sum += d * d;
        count += 1;
    };
    match *layout {
        Layout::Volume { w, h, d } => {
            let at = |x: usize, y: usize, z: usize| values[(z * h + y) * w + x];
            for z in 0..d {
                for y in 0..h {
                    for x in 0..w {
                        if x + 1 < w {
                            diff(at(x + 1, y, z), at(x, y, z));
                        }
                        if y + 1 < h {
                            diff(at(x, y + 1, z), at(x, y, z));
                        }
                        if z + 1 < d {
                            diff(at(x, y, z + 1), at(x, y, z));
                        }
                    }
                }
            }
        }
        Layout::Planes { w, h, c } => {
            let at = |x: usize, y: usize, ch: usize| values[(y * w + x) * c + ch];
            for ch in 0..c {
                for y in 0..h {
                    for x in 0..w {
                        if x + 1 < w {
                            diff(at(x + 1, y, ch), at(x, y, ch));
                        }
                        if y + 1 < h {
                            diff(at(x, y + 1, ch), at(x, y, ch));
                        }
                    }
                }
            }
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

fn entropy_bits(values: &[f32], min: f64, max: f64) -> f64 {
    let mut bins = [0u64; 256];
    if max > min {
        let range = max - min;
        for &v in values {
            let unit = (v as f64 - min) / range;
            let bin = ((unit * 256.0) as usize).min(255);
            bins[bin] += 1;
        }
    } else {
        bins[0] = values.len() as u64;
    }
    let n = values.len() as f64;
    let mut h = 0.0f64;
    for &b in &bins {
        if b > 0 {
            let p = b as f64 / n;
            h -= p * p.log2();
        }
    }
    h
}

fn build_report(
    path: &Path,
    kind: &'static str,
    values: &[f32],
    layout: Layout,
) -> StatsReport {
    let (min, max, mean, std) = order_stats(values);
    let (width, height, depth, channels) = match layout {
        Layout::Volume { w, h, d } => (w, h, d, 1),
        Layout::Planes { w, h, c } => (w, h, 1, c),
    };
    StatsReport {
        path: path.display().to_string(),
        kind,
        width,
        height,
        depth,
        channels,
        min,
        max,
        mean,
        std,
        gradient_energy: gradient_energy(values, &layout),
        entropy_bits: entropy_bits(values, min, max),
    }
}

/// Statistics for one input. Volumes (`.nii`, `.nii.gz`), raw dumps with
/// their sidecar, and PNGs are accepted.
pub fn stats_for_path(path: &Path) -> Result<StatsReport, Error> {
    let name = path.to_string_lossy().to_ascii_lowercase();
    if name.ends_with(".nii") || name.ends_with(".nii.gz") {
        let (volume, _) = nifti::read_volume(path).map_err(|source| Error::Nifti {
            path: path.to_path_buf(),
            source,
        })?;
        let layout = Layout::Volume {
            w: volume.width(),
            h: volume.height(),
            d: volume.depth(),
        };
        Ok(build_report(path, "volume", volume.voxels(), layout))
    } else if name.ends_with(".raw") {
        let raw = formats::read_raw_f32(path)?;
        let layout = Layout::Planes {
            w: raw.width,
            h: raw.height,
            c: raw.channels,
        };
        Ok(build_report(path, "raw", &raw.values, layout))
    } else if name.ends_with(".png") {
        let decoded = image::open(path)?;
        let (w, h) = (decoded.width() as usize, decoded.height() as usize);
        let gray = decoded.color().channel_count() == 1;
        let (values, c): (Vec<f32>, usize) = if gray {
            (decoded.to_luma32f().into_raw(), 1)
        } else {
            (decoded.into_rgb32f().into_raw(), 3)
        };
        let layout = Layout::Planes { w, h, c };
        Ok(build_report(path, "png", &values, layout))
    } else {
        Err(Error::config(format!(
            "{}: unsupported input (expected .nii, .nii.gz, .raw, or .png)",
            path.display()
        )))
    }
}

/// Writes one CSV row per input. Per-file failures go to stderr and are
/// counted, never aborting the rest of the batch.
pub fn run_stats<W: Write>(paths: &[std::path::PathBuf], out: W) -> Result<usize, Error> {
    let mut writer = csv::Writer::from_writer(out);
    let mut failures = 0usize;
    for path in paths {
        match stats_for_path(path) {
            Ok(report) => writer.serialize(report)?,
            Err(err) => {
                eprintln!("stats: {err}");
                failures += 1;
            }
        }
    }
    writer.flush()?;
    Ok(failures)
}
