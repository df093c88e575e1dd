use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info};

use ibinet::commands::{self, exit_code};
use ibinet::dataset::PrepareConfig;
use ibinet::sigfile::read_profiles;
use ibinet::signalgen::SubjectProfile;
use ibinet::train::TrainConfig;
use ibinet::windowing::Partition;
use ibinet::Result;

#[derive(Parser)]
#[command(
    name = "ibinet",
    version,
    about = "Inter-beat-interval estimation from 1D cardiac waveforms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic recordings with R-peak annotations.
    Synth {
        /// Subject profile CSV; the built-in 11-subject cohort when omitted.
        #[arg(long)]
        profiles: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Recording length for the built-in cohort, seconds.
        #[arg(long, default_value_t = 300.0)]
        duration: f64,
        /// Sampling rate for the built-in cohort, Hz.
        #[arg(long, default_value_t = 500)]
        fs: u32,
    },
    /// Window recordings into a fold-split dataset file.
    Prepare {
        #[arg(long)]
        signals: PathBuf,
        /// Test subject id.
        #[arg(long)]
        fold: u32,
        /// Add superposed copies of eligible training recordings.
        #[arg(long)]
        augment: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train and keep the checkpoint with the best validation metric.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Directory for config.txt, curves.csv, metrics.csv and timing.txt.
        #[arg(long)]
        report_dir: Option<PathBuf>,
        /// key=value file; flags below override it.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Batch 1024 for 200 epochs.
        #[arg(long)]
        paper_scale: bool,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        /// Architecture descriptor, e.g. `input=4910;bn;conv:16:15:2:swish;...`.
        #[arg(long)]
        arch: Option<String>,
        /// Re-draw zero-padding offsets of training windows every epoch.
        #[arg(long)]
        repad_per_epoch: bool,
    },
    /// Score a checkpoint on one partition of a dataset.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "test")]
        partition: Partition,
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict smoothed IBI series for every recording in a directory.
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        signals: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Smooth a window-prediction CSV into a per-beat IBI CSV.
    Postprocess {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth {
            profiles,
            out,
            seed,
            duration,
            fs,
        } => {
            let profiles = match profiles {
                Some(p) => read_profiles(&p)?,
                None => SubjectProfile::default_cohort(duration)
                    .into_iter()
                    .map(|p| (p, fs))
                    .collect(),
            };
            let written = commands::synth(&profiles, &out, seed)?;
            info!("wrote {} recordings to {}", written.len(), out.display());
        }
        Command::Prepare {
            signals,
            fold,
            augment,
            out,
            seed,
        } => {
            commands::prepare_dir(&signals, &PrepareConfig::new(fold, augment, seed), &out)?;
        }
        Command::Train {
            data,
            seed,
            out,
            report_dir,
            config,
            paper_scale,
            epochs,
            batch_size,
            arch,
            repad_per_epoch,
        } => {
            let base = if paper_scale {
                TrainConfig::paper_scale()
            } else {
                TrainConfig::default()
            };
            let mut cfg = match config {
                Some(path) => TrainConfig::from_file(path, base)?,
                None => base,
            };
            cfg.seed = seed;
            if let Some(e) = epochs {
                cfg.epochs = e;
            }
            if let Some(b) = batch_size {
                cfg.batch_size = b;
            }
            if let Some(a) = arch {
                cfg.arch = a.parse()?;
            }
            cfg.repad_per_epoch |= repad_per_epoch;
            let report_dir = report_dir.unwrap_or_else(|| out.with_extension("report"));
            let report = commands::train_file(&data, &cfg, &out, &report_dir)?;
            info!(
                "best epoch {} (validation metric {:.6}); report in {}",
                report.best_epoch,
                report.best_metric,
                report_dir.display()
            );
            for row in &report.metrics {
                println!("{}", row.to_csv());
            }
        }
        Command::Eval {
            checkpoint,
            data,
            partition,
            out,
        } => {
            let eval = commands::eval_file(&checkpoint, &data, partition, &out)?;
            println!("{}", ibinet::metrics::METRIC_CSV_HEADER);
            println!("{}\n{}", eval.raw.to_csv(), eval.postprocessed.to_csv());
        }
        Command::Infer {
            checkpoint,
            signals,
            out,
        } => {
            let written = commands::infer_dir(&checkpoint, &signals, &out)?;
            info!("wrote {} IBI files to {}", written.len(), out.display());
        }
        Command::Postprocess { input, out } => {
            let series = commands::postprocess_file(&input, &out)?;
            info!("wrote {} IBIs to {}", series.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Some(n) = std::env::var("IBINET_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
    {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            error!("could not set thread count: {e}");
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
