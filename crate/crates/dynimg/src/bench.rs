//! Conversion throughput benchmark: times every pooling method on
//! synthetic volumes and reports median wall time and voxel throughput.

use std::hint::black_box;
use std::io::Write;
use std::time::Instant;

use dynimg_core::rankpool::{approx_rank_pool, avg_pool_depth, max_pool_depth, Strategy};
use dynimg_core::Volume3D;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Error;

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub sizes: Vec<(usize, usize, usize)>,
    pub repeats: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sizes: vec![(110, 110, 110)],
            repeats: 5,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub method: &'static str,
    pub width: usize,
    pub height: usize,
    pub depth: usize,
    pub repeats: usize,
    pub median_ms: f64,
    pub voxels_per_sec: f64,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite timings"));
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn synthetic_volume(size: (usize, usize, usize), seed: u64) -> Volume3D {
    let (w, h, d) = size;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let voxels: Vec<f32> = (0..w * h * d).map(|_| rng.random_range(0.0..100.0)).collect();
    Volume3D::new(w, h, d, voxels).expect("finite synthetic voxels")
}

fn time_method(v: &Volume3D, repeats: usize, f: &dyn Fn(&Volume3D)) -> f64 {
    f(v); // warmup
    let mut times = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        f(v);
        times.push(start.elapsed().as_secs_f64() * 1e3);
    }
    median(times)
}

pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>, Error> {
    if cfg.repeats == 0 {
        return Err(Error::config("repeats must be >= 1"));
    }
    if cfg.sizes.is_empty() {
        return Err(Error::config("no benchmark sizes"));
    }
    let methods: [(&'static str, Box<dyn Fn(&Volume3D)>); 4] = [
        (
            "single-pass",
            Box::new(|v| {
                black_box(approx_rank_pool(v, Strategy::SinglePass).expect("pooling"));
            }),
        ),
        (
            "two-pass",
            Box::new(|v| {
                black_box(approx_rank_pool(v, Strategy::TwoPass).expect("pooling"));
            }),
        ),
        (
            "avg",
            Box::new(|v| {
                black_box(avg_pool_depth(v));
            }),
        ),
        (
            "max",
            Box::new(|v| {
                black_box(max_pool_depth(v));
            }),
        ),
    ];

    let mut rows = Vec::new();
    for &size in &cfg.sizes {
        let volume = synthetic_volume(size, cfg.seed);
        let n_voxels = size.0 * size.1 * size.2;
        for (name, f) in &methods {
            let median_ms = time_method(&volume, cfg.repeats, f.as_ref());
            rows.push(BenchRow {
                method: name,
                width: size.0,
                height: size.1,
                depth: size.2,
                repeats: cfg.repeats,
                median_ms,
                voxels_per_sec: n_voxels as f64 / (median_ms / 1e3),
            });
        }
    }
    Ok(rows)
}

pub fn write_csv<W: Write>(rows: &[BenchRow], out: W) -> Result<(), Error> {
    let mut writer = csv::Writer::from_writer(out);
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Parses "WxHxD" size descriptors from the CLI.
pub fn parse_size(text: &str) -> Result<(usize, usize, usize), Error> {
    let parts: Vec<&str> = text.split('x').collect();
    if parts.len() != 3 {
        return Err(Error::config(format!("size {text} is not WxHxD")));
    }
    let mut dims = [0usize; 3];
    for (d, p) in dims.iter_mut().zip(&parts) {
        *d = p
            .parse()
            .map_err(|_| Error::config(format!("size {text} is not WxHxD")))?;
        if *d == 0 {
            return Err(Error::config(format!("size {text} has a zero extent")));
        }
    }
    Ok((dims[0], dims[1], dims[2]))
}
