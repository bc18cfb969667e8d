//! `argnli`: batch entry points for entailment-based event argument extraction.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "argnli",
    version,
    about = "Entailment-based event argument extraction"
)]
pub struct Cli {
    /// Corpus (JSON lines, one document per line).
    #[arg(long, global = true, env = "ARGNLI_CORPUS")]
    pub corpus: Option<PathBuf>,

    /// Template library file, or `builtin:ace-main` / `builtin:ace-linguist`.
    #[arg(long, global = true, env = "ARGNLI_LIBRARY")]
    pub library: Option<String>,

    /// Constraint table file, or `builtin:ace`.
    #[arg(long, global = true, env = "ARGNLI_CONSTRAINTS")]
    pub constraints: Option<String>,

    /// Entailment backend config (JSON).
    #[arg(long, global = true, env = "ARGNLI_BACKEND")]
    pub backend: Option<PathBuf>,

    /// Output file or directory, depending on the command.
    #[arg(long, global = true, env = "ARGNLI_OUT")]
    pub out: Option<PathBuf>,

    /// Minimum entailment score for a role to be predicted [default: 0.5].
    #[arg(long, global = true, env = "ARGNLI_THRESHOLD")]
    pub threshold: Option<f64>,

    #[arg(long, global = true, env = "ARGNLI_SEED", default_value_t = 0)]
    pub seed: u64,

    #[arg(long, global = true, env = "ARGNLI_FORMAT", value_enum, default_value_t = Format::Text)]
    pub format: Format,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print the hypotheses of every candidate in the corpus.
    Verbalize,
    /// Predict roles for every candidate; reports scores when gold is present.
    Predict,
    /// Turn the corpus into NLI training examples.
    Recast {
        /// Entailment examples per positive candidate.
        #[arg(long = "ne", env = "ARGNLI_NE", default_value_t = 2)]
        n_entail: usize,
        /// Neutral examples per positive candidate.
        #[arg(long = "nn", env = "ARGNLI_NN", default_value_t = 5)]
        n_neutral: usize,
        /// Contradiction examples per negative candidate.
        #[arg(long = "nc", env = "ARGNLI_NC", default_value_t = 5)]
        n_contradict: usize,
        /// Skip negatives whose entity type fits no role of the event.
        #[arg(long, env = "ARGNLI_CONSTRAINED", default_value_t = true, action = ArgAction::Set)]
        constrained: bool,
        /// Name recorded in every example's provenance.
        #[arg(long, default_value = "corpus")]
        source: String,
    },
    /// Write nested few-shot subsets of the corpus into `--out`.
    Split {
        #[arg(
            long,
            env = "ARGNLI_FRACTIONS",
            value_delimiter = ',',
            default_value = "0.01,0.05,0.1,0.2,1.0"
        )]
        fractions: Vec<f64>,
    },
    /// Score a prediction file against the corpus gold.
    Eval {
        #[arg(long)]
        predictions: PathBuf,
    },
    /// Area under an F1-by-fraction curve file.
    Auc { curve: PathBuf },
    /// Per-role recall differences between two prediction files.
    CompareTemplates {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Run an HTTP server.
    Serve {
        #[arg(long, value_enum, default_value_t = ServeMode::Facade)]
        mode: ServeMode,
        /// Service config file; the `ARGNLI_*` variables override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, env = "ARGNLI_LISTEN")]
        listen: Option<String>,
    },
    /// Build a multi-source fine-tuning manifest.
    Manifest {
        /// `name=path` of a source stage, in training order.
        #[arg(long = "source", required = true)]
        sources: Vec<String>,
        /// `name=path` of the target stage.
        #[arg(long)]
        target: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ServeMode {
    /// Workbench facade under /v1.
    Facade,
    /// Entailment wire protocol backed by `--backend`.
    Entail,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let record = serde_json::json!({
                "command": commands::name(&cli.command),
                "error": err.to_string(),
                "causes": err.chain().skip(1).map(|c| c.to_string()).collect::<Vec<_>>(),
            });
            eprintln!("{record}");
            ExitCode::FAILURE
        }
    }
}
