//! `saliency` command-line tool: single-image detection, batch processing
//! and benchmark evaluation.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info, warn};
use saliency_core::{eval, imageio, pipeline, PipelineConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Config(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
        }
    }
}

impl From<saliency_core::Error> for CliError {
    fn from(e: saliency_core::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "saliency", version, about = "Salient object detection and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute the saliency map of one image.
    Detect {
        image: PathBuf,
        /// Output PNG path.
        #[arg(long)]
        out: PathBuf,
        /// JSON pipeline config.
        #[arg(long, env = "SALIENCY_CONFIG")]
        config: Option<PathBuf>,
        /// Directory for intermediate maps.
        #[arg(long = "dump-intermediate")]
        dump_intermediate: Option<PathBuf>,
    },
    /// Compute saliency maps for every image in a directory.
    Batch {
        image_dir: PathBuf,
        /// Output directory; maps are named after the input stems.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, env = "SALIENCY_CONFIG")]
        config: Option<PathBuf>,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Score predicted maps against ground-truth masks.
    Eval {
        pred_dir: PathBuf,
        gt_dir: PathBuf,
        /// Directory for the CSV reports.
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Detect {
            image,
            out,
            config,
            dump_intermediate,
        } => cmd_detect(&image, &out, config.as_deref(), dump_intermediate.as_deref()),
        Command::Batch {
            image_dir,
            out,
            config,
            jobs,
        } => cmd_batch(&image_dir, &out, config.as_deref(), jobs),
        Command::Eval { pred_dir, gt_dir, out } => cmd_eval(&pred_dir, &gt_dir, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => std::fs::create_dir_all(p)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", p.display()))),
        _ => Ok(()),
    }
}

fn cmd_detect(
    image: &Path,
    out: &Path,
    config_path: Option<&Path>,
    dump: Option<&Path>,
) -> Result<(), CliError> {
    let cfg = config::load(config_path)?;
    let img = imageio::load_image(image)?;
    let detection = pipeline::detect(&img, &cfg)?;
    ensure_parent(out)?;
    imageio::write_gray_png(&detection.map, out)?;
    config::write_resolved(&cfg, &config::echo_path_for(out))?;
    if let Some(dir) = dump {
        detection.write_intermediates(dir)?;
        if let Some(seg) = &detection.segmentation {
            imageio::write_label_png(seg, dir.join("labels.png"))?;
        }
    }
    info!("wrote {}", out.display());
    Ok(())
}

fn is_image(path: &Path) -> bool {
    path.is_file()
        && path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
}

fn process_one(path: &Path, out_dir: &Path, cfg: &PipelineConfig) -> Result<(), saliency_core::Error> {
    let img = imageio::load_image(path)?;
    let map = pipeline::detect_full(&img, cfg)?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
    imageio::write_gray_png(&map, out_dir.join(format!("{stem}.png")))
}

fn run_all(inputs: &[PathBuf], out_dir: &Path, cfg: &PipelineConfig) -> Vec<Result<(), saliency_core::Error>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        inputs.par_iter().map(|p| process_one(p, out_dir, cfg)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        inputs.iter().map(|p| process_one(p, out_dir, cfg)).collect()
    }
}

fn cmd_batch(
    image_dir: &Path,
    out_dir: &Path,
    config_path: Option<&Path>,
    jobs: Option<usize>,
) -> Result<(), CliError> {
    let cfg = config::load(config_path)?;
    let entries = std::fs::read_dir(image_dir)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", image_dir.display())))?;
    let mut inputs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| is_image(p))
        .collect();
    inputs.sort();
    if inputs.is_empty() {
        return Err(CliError::Io(format!("no PNG or JPEG images in {}", image_dir.display())));
    }
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", out_dir.display())))?;

    if jobs == Some(0) {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    #[cfg(feature = "parallel")]
    let results = {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = jobs {
            builder = builder.num_threads(n);
        }
        let pool = builder
            .build()
            .map_err(|e| CliError::Io(format!("cannot start worker pool: {e}")))?;
        pool.install(|| run_all(&inputs, out_dir, &cfg))
    };
    #[cfg(not(feature = "parallel"))]
    let results = {
        if jobs.is_some_and(|n| n > 1) {
            warn!("built without parallel support; --jobs ignored");
        }
        run_all(&inputs, out_dir, &cfg)
    };

    let mut ok = 0;
    for (path, r) in inputs.iter().zip(results) {
        match r {
            Ok(()) => ok += 1,
            Err(e) => warn!("{}: {e}", path.display()),
        }
    }
    config::write_resolved(&cfg, &out_dir.join("resolved_config.json"))?;
    if ok == 0 {
        error!("every image failed");
        return Err(CliError::Io("no image could be processed".into()));
    }
    eprintln!("processed {ok} of {} images", inputs.len());
    Ok(())
}

fn cmd_eval(pred_dir: &Path, gt_dir: &Path, out_dir: &Path) -> Result<(), CliError> {
    let report = eval::run_benchmark(pred_dir, gt_dir)?;
    report.write_csvs(out_dir)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    println!("{}", report.summary_line());
    Ok(())
}
