//! Command-line entry point: generate | distort | train | refine | evaluate | ablate.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mocal::commands::{
    cmd_ablate, cmd_distort, cmd_evaluate, cmd_generate, cmd_refine, cmd_train, load_config,
    ExperimentConfig,
};
use mocal::training::Strategy;

#[derive(Parser)]
#[command(name = "mocal", version, about = "Self-supervised motion calibration toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config file (JSON); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the experiment seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Train with vertical bias distortions only.
    #[arg(long, global = true, conflicts_with = "smoothing_only")]
    bias_only: bool,
    /// Train with Gaussian smoothing distortions only.
    #[arg(long, global = true)]
    smoothing_only: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a clean procedural locomotion corpus.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Output corpus directory.
        #[arg(long)]
        out: PathBuf,
        /// Number of records (overrides the config).
        #[arg(long)]
        n: Option<usize>,
    },
    /// Apply synthetic distortion to a corpus or a single motion file.
    Distort {
        #[command(flatten)]
        common: Common,
        /// Vertical bias in meters, or "sample".
        #[arg(long, default_value = "sample")]
        bias: String,
        /// Smoothing scale in frames, or "sample".
        #[arg(long, default_value = "sample")]
        sigma: String,
        input: PathBuf,
        output: PathBuf,
    },
    /// Train a calibrator on a clean corpus.
    Train {
        #[command(flatten)]
        common: Common,
        /// Clean training corpus (directory or .jsonl).
        #[arg(long)]
        corpus: PathBuf,
        /// Output directory for checkpoint and reports.
        #[arg(long)]
        out: PathBuf,
        /// Training strategy: supervised | wgan | denoise.
        #[arg(long)]
        strategy: Option<String>,
    },
    /// Refine a corpus through a trained checkpoint.
    Refine {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Refinement steps for residual-mode checkpoints.
        #[arg(long)]
        t_hat: Option<usize>,
        input: PathBuf,
        output: PathBuf,
    },
    /// Evaluate a test corpus against a reference corpus.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Reference (clean) corpus.
        #[arg(long = "ref")]
        reference: PathBuf,
        /// Test corpus to score.
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train under bias-only / smoothing-only / combined distortions and
    /// compare on a shared distorted test set.
    Ablate {
        #[command(flatten)]
        common: Common,
        /// Clean training corpus; generated from the config when omitted.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn build_config(common: &Common) -> mocal::Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => load_config(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
        cfg.train.seed = seed;
    }
    if common.bias_only {
        cfg.distortion = mocal::distortion::DistortionPolicy::bias_only();
    }
    if common.smoothing_only {
        cfg.distortion = mocal::distortion::DistortionPolicy::smoothing_only();
    }
    Ok(cfg)
}

fn parse_sample_or(value: &str, what: &str) -> mocal::Result<Option<f64>> {
    if value == "sample" {
        Ok(None)
    } else {
        value
            .parse::<f64>()
            .map(Some)
            .map_err(|_| mocal::Error::Config(format!("--{what} expects a number or \"sample\"")))
    }
}

fn run() -> mocal::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Generate { common, out, n } => {
            let mut cfg = build_config(&common)?;
            if let Some(n) = n {
                cfg.datagen.n = n;
            }
            cmd_generate(&cfg, &out)?;
        }
        Command::Distort {
            common,
            bias,
            sigma,
            input,
            output,
        } => {
            let cfg = build_config(&common)?;
            let bias = parse_sample_or(&bias, "bias")?;
            let sigma = parse_sample_or(&sigma, "sigma")?;
            cmd_distort(&cfg, &input, &output, bias, sigma)?;
        }
        Command::Train {
            common,
            corpus,
            out,
            strategy,
        } => {
            let mut cfg = build_config(&common)?;
            if let Some(strategy) = strategy {
                cfg.train.strategy = strategy.parse::<Strategy>()?;
            }
            cmd_train(&cfg, &corpus, &out)?;
        }
        Command::Refine {
            common,
            checkpoint,
            t_hat,
            input,
            output,
        } => {
            let mut cfg = build_config(&common)?;
            if let Some(t_hat) = t_hat {
                cfg.t_hat = t_hat;
            }
            cmd_refine(&cfg, &checkpoint, &input, &output)?;
        }
        Command::Evaluate {
            common,
            reference,
            test,
            out,
        } => {
            let cfg = build_config(&common)?;
            cmd_evaluate(&cfg, &reference, &test, &out)?;
        }
        Command::Ablate { common, corpus, out } => {
            let cfg = build_config(&common)?;
            cmd_ablate(&cfg, corpus.as_deref(), &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
