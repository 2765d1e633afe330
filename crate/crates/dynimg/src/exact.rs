//! `dynimg exact`: solve the ranking objective on one volume, emit the
//! weight plane, the per-iteration objective trace, and how closely the
//! closed-form pooling tracks the solved weights.

use std::fs;
use std::path::{Path, PathBuf};

use dynimg_core::rankpool::{approx_rank_pool_f64, normalize_min_max, Strategy};
use dynimg_core::ranksvm::{RankSvmProblem, RankSvmSolution};
use dynimg_core::{DynamicImage, Plane2D, PoolMethod, Volume3D};

use crate::config::OutputFormat;
use crate::error::Error;
use crate::formats;
use crate::nifti;

#[derive(Debug, Clone)]
pub struct ExactConfig {
    pub input: PathBuf,
    pub out_dir: PathBuf,
    pub lambda: f64,
    pub iterations: usize,
    pub step0: f64,
    pub format: OutputFormat,
    pub normalize: bool,
}

#[derive(Debug)]
pub struct ExactReport {
    pub output: PathBuf,
    pub trace_csv: PathBuf,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub iterations: usize,
    pub cosine_similarity: f64,
}

/// Solves the ranking problem and reshapes the weights as a plane.
pub fn exact_weight_image(
    v: &Volume3D,
    lambda: f64,
    iterations: usize,
    step0: f64,
) -> Result<(DynamicImage, RankSvmSolution), Error> {
    let problem = RankSvmProblem::from_volume(v, lambda)?;
    let solution = problem.solve(iterations, step0)?;
    let values: Vec<f32> = solution.weights().iter().map(|&x| x as f32).collect();
    let plane = Plane2D::new(v.width(), v.height(), values)?;
    let img = DynamicImage::from_plane(plane, PoolMethod::ExactRankPool, v.depth())?;
    Ok((img, solution))
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

pub fn run_exact(cfg: &ExactConfig) -> Result<ExactReport, Error> {
    if cfg.format.requires_normalization() && !cfg.normalize {
        return Err(Error::config(format!(
            "{} output quantizes to [0, 1]; pass --normalize",
            cfg.format.as_str()
        )));
    }
    let (volume, _header) = nifti::read_volume(&cfg.input).map_err(|source| Error::Nifti {
        path: cfg.input.clone(),
        source,
    })?;
    let (img, solution) = exact_weight_image(&volume, cfg.lambda, cfg.iterations, cfg.step0)?;

    let approx = approx_rank_pool_f64(&volume, Strategy::SinglePass)?;
    let similarity = cosine(solution.weights(), &approx);

    fs::create_dir_all(&cfg.out_dir)?;
    let stem = exact_stem(&cfg.input);
    let out_path = cfg
        .out_dir
        .join(format!("{stem}.{}", cfg.format.extension()));
    let final_img = if cfg.normalize {
        normalize_min_max(&img)
    } else {
        img
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

    let trace_csv = cfg.out_dir.join(format!("{stem}_trace.csv"));
    write_trace_csv(&trace_csv, &solution)?;

    Ok(ExactReport {
        output: out_path,
        trace_csv,
        initial_objective: solution.initial_objective(),
        final_objective: solution.best_objective(),
        iterations: solution.iterations(),
        cosine_similarity: similarity,
    })
}

fn exact_stem(input: &Path) -> String {
    let name = input
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "volume".to_owned());
    let lower = name.to_ascii_lowercase();
    let cut = if lower.ends_with(".nii.gz") {
        name.len() - 7
    } else if lower.ends_with(".nii") {
        name.len() - 4
    } else {
        name.len()
    };
    format!("{}_exact", &name[..cut])
}

fn write_trace_csv(path: &Path, solution: &RankSvmSolution) -> Result<(), Error> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(["iteration", "objective", "best_so_far"])?;
    let mins = solution.running_min_trace();
    for (k, (&e, &m)) in solution.objective_trace().iter().zip(&mins).enumerate() {
        writer.write_record([k.to_string(), format!("{e}"), format!("{m}")])?;
    }
    writer.flush()?;
    Ok(())
}
