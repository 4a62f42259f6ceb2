//! `agt`: train, run and evaluate the autogenerated-tweet detector.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use agt_core::learners::LearnerKind;
use agt_core::pipeline::VerdictFormat;
use clap::{Args, Parser, Subcommand, ValueEnum};

use config::FetchChoice;

#[derive(Parser, Debug)]
#[command(name = "agt", version, about = "Detect autogenerated tweets in a stream")]
struct Cli {
    /// TOML run configuration; flags take precedence over it.
    #[arg(long, global = true, env = "AGT_CONFIG")]
    config: Option<PathBuf>,
    /// More log output on stderr (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

/// Where timelines come from when profiles are built.
#[derive(Args, Debug, Clone, Default)]
struct TimelineArgs {
    /// Line-delimited tweets grouped into per-user timelines.
    #[arg(long, env = "AGT_TIMELINES", conflicts_with = "world")]
    timelines: Option<PathBuf>,
    /// Synthetic world TOML; timelines are generated as of the end of its window.
    #[arg(long, env = "AGT_WORLD")]
    world: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a labeled synthetic stream or a sample of one.
    #[command(name = "generate", alias = "generate-synthetic")]
    Generate {
        /// Synthetic world TOML (defaults to the built-in world).
        #[arg(long, env = "AGT_WORLD")]
        world: Option<PathBuf>,
        /// Keep a uniform sample of this many tweets instead of the full stream.
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(short, long, env = "AGT_OUTPUT")]
        output: PathBuf,
    },
    /// Train the text model and both decision models.
    Train {
        /// Labeled line-delimited tweets.
        #[arg(short, long, env = "AGT_INPUT")]
        input: PathBuf,
        /// Directory that receives the four model files.
        #[arg(short, long, env = "AGT_MODEL_DIR")]
        model_dir: PathBuf,
        #[command(flatten)]
        source: TimelineArgs,
        #[arg(long)]
        learner: Option<LearnerKind>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Classify tweets, one verdict per input line in input order.
    Classify {
        #[arg(short, long, env = "AGT_MODEL_DIR")]
        model_dir: PathBuf,
        #[arg(short, long, env = "AGT_INPUT")]
        input: PathBuf,
        /// Verdict file (stdout when omitted).
        #[arg(short, long, env = "AGT_OUTPUT")]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = FormatArg::Json)]
        format: FormatArg,
        /// Unprofiled tweets from a user before their timeline is fetched [default: 1].
        #[arg(short = 'n', long)]
        fetch_threshold: Option<u32>,
        #[command(flatten)]
        source: TimelineArgs,
        /// Fetch every input user's profile before classifying.
        #[arg(long)]
        prefetch: bool,
        /// Keep reading the input as it grows.
        #[arg(long)]
        follow: bool,
        /// In follow mode, stop after this many seconds without new input.
        #[arg(long, requires = "follow")]
        idle_exit: Option<f64>,
        /// Skip malformed input lines instead of failing.
        #[arg(long)]
        lenient: bool,
    },
    /// Subject-wise cross-validation of the full classifier.
    Evaluate {
        #[arg(short, long, env = "AGT_INPUT")]
        input: PathBuf,
        #[command(flatten)]
        source: TimelineArgs,
        /// Number of user-disjoint folds [default: 10].
        #[arg(long)]
        folds: Option<usize>,
        #[arg(long)]
        learner: Option<LearnerKind>,
        #[arg(long)]
        seed: Option<u64>,
        /// Per-fold CSV report.
        #[arg(short, long, env = "AGT_OUTPUT")]
        output: Option<PathBuf>,
    },
    /// Correlation-based selection over the profile-model attributes.
    SelectAttributes {
        #[arg(short, long, env = "AGT_INPUT")]
        input: PathBuf,
        #[command(flatten)]
        source: TimelineArgs,
        #[arg(long)]
        learner: Option<LearnerKind>,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the selected timeline attributes, one per line.
        #[arg(short, long, env = "AGT_OUTPUT")]
        output: Option<PathBuf>,
    },
    /// Replay a dated stream and report the download requirement per threshold.
    Simulate {
        /// Tweets to replay (labels optional).
        #[arg(short, long, env = "AGT_INPUT", conflicts_with = "world")]
        input: Option<PathBuf>,
        /// Replay the full window of a synthetic world instead.
        #[arg(long, env = "AGT_WORLD")]
        world: Option<PathBuf>,
        /// Fetch threshold N; repeat for several [default: 1 and 3].
        #[arg(short = 'n', long = "threshold")]
        thresholds: Vec<u32>,
        #[arg(long, value_enum)]
        fetch: Option<FetchChoice>,
        #[arg(long)]
        horizon_days: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        /// CSV, one row per day per threshold (stdout when omitted).
        #[arg(short, long, env = "AGT_OUTPUT")]
        output: Option<PathBuf>,
    },
    /// Virtual-clock throughput of the fetch scheduler.
    Throughput {
        #[arg(long, value_enum, default_value_t = ModeArg::Recent)]
        mode: ModeArg,
        #[arg(long, default_value_t = 24.0)]
        hours: f64,
        #[arg(long)]
        seed: Option<u64>,
        /// CSV event log of admissions, completions and pauses.
        #[arg(long)]
        log: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

impl From<FormatArg> for VerdictFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => VerdictFormat::Json,
            FormatArg::Csv => VerdictFormat::Csv,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    /// One page per profile.
    Recent,
    /// Sixteen pages per profile.
    Full,
    /// The `[fetch]` table of the config file.
    Policy,
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
            eprintln!("agt: {e:#}");
            ExitCode::FAILURE
        }
    }
}
