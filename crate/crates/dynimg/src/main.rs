use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dynimg::bench::{self, BenchConfig};
use dynimg::config::{
    expand_inputs, ChannelModeOpt, FileConfig, JobConfig, Method, OutputFormat, StrategyOpt,
};
use dynimg::convert::run_convert;
use dynimg::exact::{run_exact, ExactConfig};
use dynimg::nifti;
use dynimg::stats::run_stats;
use dynimg::Error;

/// Collapse volumetric scans into 2D dynamic images.
#[derive(Parser)]
#[command(name = "dynimg", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert volumes to pooled 2D images in batch.
    Convert(ConvertArgs),
    /// Print the decoded header of a volume file.
    Info(InfoArgs),
    /// Solve the exact ranking objective on one volume.
    Exact(ExactArgs),
    /// Per-image statistics as CSV.
    Stats(StatsArgs),
    /// Time the pooling strategies on synthetic volumes.
    Bench(BenchArgs),
}

#[derive(Args)]
struct ConvertArgs {
    /// Input volumes (.nii / .nii.gz); glob patterns are expanded.
    #[arg(required = true)]
    inputs: Vec<String>,
    /// Output directory.
    #[arg(long, short = 'o')]
    out_dir: Option<PathBuf>,
    /// TOML config file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Pooling method.
    #[arg(long, value_enum)]
    method: Option<Method>,
    /// Evaluation strategy for the dynamic method.
    #[arg(long, value_enum)]
    strategy: Option<StrategyOpt>,
    /// Channel layout of the emitted images.
    #[arg(long, value_enum)]
    channels: Option<ChannelModeOpt>,
    /// Min-max normalize onto [0, 1] before emission (required for PNG).
    #[arg(long)]
    normalize: bool,
    /// Output format.
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
    /// Regularizer weight (exact method).
    #[arg(long)]
    lambda: Option<f64>,
    /// Solver iterations (exact method).
    #[arg(long)]
    iterations: Option<usize>,
    /// Initial step size (exact method).
    #[arg(long)]
    step0: Option<f64>,
    /// Worker threads for the batch.
    #[arg(long, env = "DYNIMG_WORKERS")]
    workers: Option<usize>,
    /// Manifest path (default: <out-dir>/manifest.jsonl).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args)]
struct InfoArgs {
    path: PathBuf,
}

#[derive(Args)]
struct ExactArgs {
    /// Input volume (.nii / .nii.gz).
    input: PathBuf,
    /// Output directory.
    #[arg(long, short = 'o')]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 1e-3)]
    lambda: f64,
    #[arg(long, default_value_t = 300)]
    iterations: usize,
    #[arg(long, default_value_t = 0.1)]
    step0: f64,
    #[arg(long, value_enum, default_value = "raw-f32")]
    format: OutputFormat,
    /// Min-max normalize the weight plane before emission.
    #[arg(long)]
    normalize: bool,
}

#[derive(Args)]
struct StatsArgs {
    /// Volumes (.nii/.nii.gz), raw dumps (.raw + sidecar), or PNGs.
    #[arg(required = true)]
    inputs: Vec<String>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Volume sizes to synthesize, as WxHxD.
    #[arg(long, value_delimiter = ',', default_value = "110x110x110")]
    sizes: Vec<String>,
    /// Timed repetitions per method (median is reported).
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn resolve_job(args: ConvertArgs) -> Result<JobConfig, Error> {
    let file = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let out_dir = args
        .out_dir
        .or(file.out_dir)
        .ok_or_else(|| Error::config("no output directory; pass --out-dir"))?;
    let inputs = expand_inputs(&args.inputs)?;
    let mut cfg = JobConfig::new(inputs, out_dir);
    if let Some(v) = file.method {
        cfg.method = v;
    }
    if let Some(v) = file.strategy {
        cfg.strategy = v;
    }
    if let Some(v) = file.channels {
        cfg.channels = v;
    }
    if let Some(v) = file.normalize {
        cfg.normalize = v;
    }
    if let Some(v) = file.format {
        cfg.format = v;
    }
    if let Some(v) = file.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = file.iterations {
        cfg.iterations = v;
    }
    if let Some(v) = file.step0 {
        cfg.step0 = v;
    }
    if let Some(v) = file.workers {
        cfg.workers = v;
    }
    if file.manifest.is_some() {
        cfg.manifest = file.manifest;
    }
    // Flags beat the file. The --normalize flag can only turn
    // normalization on; use the config file to pin it off.
    if let Some(v) = args.method {
        cfg.method = v;
    }
    if let Some(v) = args.strategy {
        cfg.strategy = v;
    }
    if let Some(v) = args.channels {
        cfg.channels = v;
    }
    if args.normalize {
        cfg.normalize = true;
    }
    if let Some(v) = args.format {
        cfg.format = v;
    }
    if let Some(v) = args.lambda {
        cfg.lambda = v;
    }
    if let Some(v) = args.iterations {
        cfg.iterations = v;
    }
    if let Some(v) = args.step0 {
        cfg.step0 = v;
    }
    if let Some(v) = args.workers {
        cfg.workers = v;
    }
    if args.manifest.is_some() {
        cfg.manifest = args.manifest;
    }
    Ok(cfg)
}

fn cmd_convert(args: ConvertArgs) -> Result<bool, Error> {
    let cfg = resolve_job(args)?;
    let outcome = run_convert(&cfg)?;
    let ok = outcome.records.len() - outcome.failures;
    eprintln!(
        "converted {ok}/{} inputs; manifest at {}",
        outcome.records.len(),
        outcome.manifest_path.display()
    );
    for record in outcome.records.iter().filter(|r| r.status == "error") {
        eprintln!("failed: {}: {}", record.input, record.error.as_deref().unwrap_or("?"));
    }
    Ok(outcome.failures == 0)
}

fn cmd_info(args: InfoArgs) -> Result<bool, Error> {
    let (_, header) = nifti::read_volume(&args.path).map_err(|source| Error::Nifti {
        path: args.path.clone(),
        source,
    })?;
    print!("{}", nifti::header_report(&args.path, &header));
    Ok(true)
}

fn cmd_exact(args: ExactArgs) -> Result<bool, Error> {
    let report = run_exact(&ExactConfig {
        input: args.input,
        out_dir: args.out_dir,
        lambda: args.lambda,
        iterations: args.iterations,
        step0: args.step0,
        format: args.format,
        normalize: args.normalize,
    })?;
    println!("weight plane:      {}", report.output.display());
    println!("objective trace:   {}", report.trace_csv.display());
    println!("initial objective: {}", report.initial_objective);
    println!("final objective:   {}", report.final_objective);
    println!("iterations:        {}", report.iterations);
    println!("cosine(exact, approx): {:.6}", report.cosine_similarity);
    Ok(true)
}

fn cmd_stats(args: StatsArgs) -> Result<bool, Error> {
    let inputs = expand_inputs(&args.inputs)?;
    let failures = match &args.out {
        Some(path) => run_stats(&inputs, std::fs::File::create(path)?)?,
        None => run_stats(&inputs, std::io::stdout().lock())?,
    };
    Ok(failures == 0)
}

fn cmd_bench(args: BenchArgs) -> Result<bool, Error> {
    let mut sizes = Vec::new();
    for s in &args.sizes {
        sizes.push(bench::parse_size(s)?);
    }
    let rows = bench::run_bench(&BenchConfig {
        sizes,
        repeats: args.repeats,
        seed: args.seed,
    })?;
    match &args.out {
        Some(path) => bench::write_csv(&rows, std::fs::File::create(path)?)?,
        None => bench::write_csv(&rows, std::io::stdout().lock())?,
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Convert(args) => cmd_convert(args),
        Command::Info(args) => cmd_info(args),
        Command::Exact(args) => cmd_exact(args),
        Command::Stats(args) => cmd_stats(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}
