mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use settings::{Settings, SettingsBuilder};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] vsg_core::Error),
}

impl CliError {
    fn record(&self) -> serde_json::Value {
        match self {
            CliError::Config(message) => json!({"kind": "ConfigError", "message": message}),
            CliError::Core(e @ vsg_core::Error::Parse { line, column, .. }) => {
                json!({"kind": e.kind(), "message": e.to_string(), "line": line, "column": column})
            }
            CliError::Core(e) => json!({"kind": e.kind(), "message": e.to_string()}),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "vsg", version = concat!(env!("CARGO_PKG_VERSION"), " (", env!("CARGO_PKG_NAME"), ")"))]
#[command(about = "Mask-grounded video scene graph toolkit")]
struct Cli {
    /// JSON settings file; `VSG_*` variables override it and flags override both.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override one setting, e.g. `--set tracker.min_area=20`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    assignments: Vec<String>,

    /// Seed for stochastic verbs; same as `--set seed=N`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    verb: Verb,
}

#[derive(Debug, Subcommand)]
enum Verb {
    /// Render a scene spec into ground-truth mask and registry files.
    Simulate(SimulateArgs),
    /// Derive noisy per-frame proposals from a mask file.
    Propose(ProposeArgs),
    /// Run the online pass, offline replay and post-filter.
    Track(TrackArgs),
    /// Dump the trajectory-aligned token stream of a mask file.
    Tokens(TokensArgs),
    /// Check resampler shapes, permutation invariance and gradients.
    ResampleCheck(OutArgs),
    /// Score predictions against ground truth.
    Eval(EvalArgs),
    /// Cohen's kappa between two label lists.
    Kappa(KappaArgs),
    /// Answer judge requests on stdin/stdout from a lexicon.
    #[command(hide = true)]
    JudgeServe(JudgeServeArgs),
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Write here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, required_unless_present = "suite_index", conflicts_with = "suite_index")]
    pub spec: Option<PathBuf>,
    /// Use scene `N` of the built-in tracker benchmark instead of a spec file.
    #[arg(long)]
    pub suite_index: Option<u64>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProposeArgs {
    #[arg(long)]
    pub masks: PathBuf,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    #[arg(long)]
    pub proposals: PathBuf,
    /// Scene spec backing the oracle propagator.
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct TokensArgs {
    #[arg(long)]
    pub masks: PathBuf,
    #[arg(long)]
    pub tau_eff: Option<f64>,
    #[arg(long)]
    pub window_seconds: Option<f64>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ObjectModeArg {
    Strict,
    Lenient,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// Treat both inputs as mask files and report average recall.
    #[arg(long)]
    pub against_gt: bool,
    /// `lexicon:<path>`, `bridge:tcp:<host:port>`, `bridge:exec:<command>` or `builtin`.
    #[arg(long, default_value = "builtin")]
    pub judge: String,
    #[arg(long)]
    temporal_iou: Option<f64>,
    #[arg(long, value_enum)]
    object_mode: Option<ObjectModeArg>,
    #[arg(long)]
    mask_iou: Option<f64>,
    #[arg(long)]
    strict_includes_synonym: bool,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct KappaArgs {
    /// JSON array of labels from the first rater.
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct JudgeServeArgs {
    /// Lexicon TSV; the built-in lexicon when absent.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
}

fn resolve(cli: &Cli) -> Result<Settings, CliError> {
    let mut builder = SettingsBuilder::new();
    if let Some(path) = &cli.config {
        builder = builder.file(&vsg_core::io::read_text(path)?)?;
    }
    builder = builder.env(std::env::vars())?;
    for a in &cli.assignments {
        builder = builder.assignment(a)?;
    }
    if let Some(seed) = cli.seed {
        builder = builder.value(&["seed"], json!(seed))?;
    }
    match &cli.verb {
        Verb::Tokens(a) => {
            if let Some(t) = a.tau_eff {
                builder = builder.value(&["tokens", "tau_eff"], json!(t))?;
            }
            if let Some(w) = a.window_seconds {
                builder = builder.value(&["tokens", "window_seconds"], json!(w))?;
            }
        }
        Verb::Eval(a) => {
            if let Some(t) = a.temporal_iou {
                builder = builder.value(&["eval", "temporal_iou_thresh"], json!(t))?;
            }
            if let Some(m) = a.mask_iou {
                builder = builder.value(&["eval", "mask_iou_thresh"], json!(m))?;
            }
            if let Some(mode) = a.object_mode {
                let name = match mode {
                    ObjectModeArg::Strict => "strict",
                    ObjectModeArg::Lenient => "lenient",
                };
                builder = builder.value(&["eval", "object_mode"], json!(name))?;
            }
            if a.strict_includes_synonym {
                builder = builder.value(&["eval", "strict_includes_synonym"], json!(true))?;
            }
        }
        _ => {}
    }
    builder.build()
}

fn run(cli: Cli) -> Result<(), CliError> {
    let settings = resolve(&cli)?;
    match &cli.verb {
        Verb::Simulate(a) => commands::simulate(a, &settings),
        Verb::Propose(a) => commands::propose(a, &settings),
        Verb::Track(a) => commands::track(a, &settings),
        Verb::Tokens(a) => commands::tokens(a, &settings),
        Verb::ResampleCheck(a) => commands::resample_check(a, &settings),
        Verb::Eval(a) => commands::eval(a, &settings),
        Verb::Kappa(a) => commands::kappa(a),
        Verb::JudgeServe(a) => commands::judge_serve(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(2)
        }
    }
}
