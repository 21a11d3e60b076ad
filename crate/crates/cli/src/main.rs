//! `kinverify`: extract features, train, evaluate and apply tri-subject
//! kinship verifiers.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kinverify::datakit::{Relation, CACHE_ENV};
use kinverify::kinmodels::{ModelKind, TriadForm};

#[derive(Parser, Debug)]
#[command(
    name = "kinverify",
    version,
    about = "Tri-subject kinship verification"
)]
struct Cli {
    /// Feature cache directory.
    #[arg(long, global = true, env = CACHE_ENV, default_value = ".kinverify-cache")]
    cache: PathBuf,

    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute descriptors for every image in a manifest into the cache.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Fit one model on every family of the manifest.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        /// Model file; the configuration goes to `<out>.json`.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Five-fold cross-validation per relation.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        /// Directory for report.json and report.txt.
        #[arg(long)]
        out_dir: PathBuf,
        /// Fold plan: an array of [start,end] ranges (1-based, inclusive) or
        /// one such array per relation. Without it, the manifest's `fold`
        /// fields are used, else five near-equal folds.
        #[arg(long)]
        plan: Option<PathBuf>,
        /// Write pooled ROC points (fpr,tpr) to this CSV file.
        #[arg(long)]
        roc: Option<PathBuf>,
        /// Folds evaluated in parallel.
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
        jobs: u16,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Score one triple or parent-child pair with a trained model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Image path or `feature:<key>`.
        #[arg(long)]
        father: Option<String>,
        #[arg(long)]
        mother: Option<String>,
        #[arg(long)]
        child: String,
        /// triple, pair:father or pair:mother.
        #[arg(long, default_value = "triple", value_parser = parse_mode)]
        mode: PredictMode,
    },
    /// Write a planted synthetic dataset as a manifest plus cached features.
    Synth {
        /// Output directory for manifest.jsonl and truth.json.
        #[arg(long)]
        out: PathBuf,
        /// symmetric, stacked, resemblance or patches.
        #[arg(long, default_value = "symmetric")]
        mode: String,
        /// Feature dimension (per patch in patches mode).
        #[arg(long, default_value_t = 16)]
        dim: usize,
        #[arg(long, default_value_t = 1000)]
        n_pos: usize,
        #[arg(long, default_value_t = 3)]
        rank: usize,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Patches per face (patches mode).
        #[arg(long, default_value_t = 49)]
        patches: usize,
        /// Planted patches per role (patches mode).
        #[arg(long, default_value_t = 10)]
        informative: usize,
        #[arg(long, default_value = "FM-S", value_parser = parse_relation)]
        relation: Relation,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    /// sbm, abm, rsbm or concat-baseline.
    #[arg(long, default_value = "sbm", value_parser = parse_kind)]
    model: ModelKind,
    /// Ensemble of per-patch models fused by a logistic combiner.
    #[arg(long)]
    block_level: bool,
    /// Spatially voted patch selection before fitting.
    #[arg(long)]
    feature_selection: bool,
    /// Patches kept per role by feature selection.
    #[arg(short = 'k', long = "k", default_value_t = 25, value_parser = clap::value_parser!(u32).range(1..))]
    k: u32,
    /// Trace-norm weight [default: 5.0, or 0.1 with --block-level].
    #[arg(long, value_parser = parse_positive)]
    lambda: Option<f64>,
    /// L1 weight of the selection fits.
    #[arg(long, default_value_t = 0.08, value_parser = parse_positive)]
    gamma: f64,
    /// Prior stabilization weight, strictly between 0 and 1.
    #[arg(long, default_value_t = 0.1, value_parser = parse_alpha)]
    alpha: f64,
    /// Prior re-estimation rounds.
    #[arg(short = 't', long = "iterations", default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
    iterations: u32,
    /// Role arrangement: FM-S/FM-D, FS-M/FD-M or MS-F/MD-F.
    #[arg(long, default_value = "FM-S", value_parser = parse_form)]
    form: TriadForm,
    /// Restrict to one relation (FM-S or FM-D).
    #[arg(long, value_parser = parse_relation)]
    relation: Option<Relation>,
    /// Root of every random stream.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum PredictMode {
    Triple,
    PairFather,
    PairMother,
}

fn parse_mode(s: &str) -> Result<PredictMode, String> {
    match s {
        "triple" => Ok(PredictMode::Triple),
        "pair:father" => Ok(PredictMode::PairFather),
        "pair:mother" => Ok(PredictMode::PairMother),
        _ => Err("expected triple, pair:father or pair:mother".into()),
    }
}

fn parse_kind(s: &str) -> Result<ModelKind, String> {
    s.parse()
        .map_err(|_| "expected sbm, abm, rsbm or concat-baseline".to_string())
}

fn parse_form(s: &str) -> Result<TriadForm, String> {
    s.parse().map_err(|e: kinverify::KinError| e.to_string())
}

fn parse_relation(s: &str) -> Result<Relation, String> {
    s.parse().map_err(|_| "expected FM-S or FM-D".to_string())
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err("must be a positive number".into())
    }
}

fn parse_alpha(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err("alpha must lie strictly between 0 and 1".into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
