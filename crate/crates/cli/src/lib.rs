//! Command-line front end: preprocess check-ins, train, evaluate, recommend
//! and run the comparison studies.

pub mod commands;
pub mod config;
mod error;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use log::info;
use sta_core::ingest::SplitLabel;

pub use error::{CliError, Result};

use commands::{Experiment, RecommendRequest};
use config::{Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "sta",
    version,
    about = "Spatiotemporal translation embeddings for POI recommendation"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,

    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every subcommand. Flags win over the config file.
#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Flat TOML config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Check-in file (overrides `input`).
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    /// Output directory for artifacts and reports.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// transR, transH or transE.
    #[arg(long, global = true)]
    pub variant: Option<String>,
    /// Embedding sizes: `d` (entity and relation space) or `d,m`.
    #[arg(long, global = true)]
    pub dims: Option<String>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    #[arg(long, global = true)]
    pub batch: Option<usize>,
    #[arg(long, global = true)]
    pub margin: Option<f64>,
    #[arg(long, global = true)]
    pub lr: Option<f64>,
    /// hourly (24 slots), day-of-week (7) or weekday-weekend (2).
    #[arg(long, global = true)]
    pub time_scheme: Option<String>,
    /// Number of k-means regions.
    #[arg(long, global = true)]
    pub regions: Option<usize>,
    /// Cutoffs for accuracy@k, comma separated; `recommend` returns the largest.
    #[arg(long, global = true, value_delimiter = ',')]
    pub k: Option<Vec<usize>>,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            input: self.input.clone(),
            output: self.output.clone(),
            seed: self.seed,
            variant: self.variant.clone(),
            dims: self.dims.clone(),
            epochs: self.epochs,
            batch: self.batch,
            margin: self.margin,
            lr: self.lr,
            time_scheme: self.time_scheme.clone(),
            regions: self.regions,
            k: self.k.clone(),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split the check-ins and write vocabulary, triples, splits and stats.
    Preprocess,
    /// Train on the preprocessed triples; writes the model and a JSON-lines log.
    Train {
        /// Continue from the model file's last checkpoint.
        #[arg(long)]
        resume: bool,
    },
    /// Accuracy@k on the held-out records; writes eval.json.
    Evaluate {
        /// Model file (default: <output>/model.sta).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Score the validation records instead of the test records.
        #[arg(long)]
        validation: bool,
    },
    /// Top-k POIs for a user at a time and place.
    Recommend {
        /// Model file (default: <output>/model.sta).
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        user: String,
        /// Epoch seconds or RFC 3339.
        #[arg(long)]
        time: String,
        #[arg(long, allow_negative_numbers = true)]
        lat: f64,
        #[arg(long, allow_negative_numbers = true)]
        lon: f64,
        /// Key of the current POI, for region-file setups.
        #[arg(long)]
        place: Option<String>,
    },
    /// Run a comparison study and write <output>/<name>.csv.
    Experiment {
        #[arg(value_enum)]
        which: Experiment,
    },
    /// Write a synthetic check-in file (with words and cold-start POIs) to
    /// <output>/checkins.csv.
    Generate,
}

/// Executes a parsed command line, printing results to stdout.
pub fn run(cli: Cli) -> Result<()> {
    let cfg = RunConfig::load(cli.common.config.as_deref(), cli.common.overrides())?;
    match cli.command {
        Command::Preprocess => {
            let stats = commands::preprocess(&cfg)?;
            print!("{}", stats.to_tsv());
        }
        Command::Train { resume } => {
            let report = commands::train(&cfg, resume)?;
            info!("{} epochs run", report.epochs.len());
        }
        Command::Evaluate { model, validation } => {
            let split = if validation {
                SplitLabel::Validation
            } else {
                SplitLabel::Test
            };
            let report = commands::evaluate(&cfg, model.as_deref(), split)?;
            print!("{}", report.to_json());
        }
        Command::Recommend {
            model,
            user,
            time,
            lat,
            lon,
            place,
        } => {
            let model = model.unwrap_or_else(|| cfg.output.join(commands::MODEL));
            let req = RecommendRequest {
                user,
                time,
                lat,
                lon,
                place,
                k: cfg.ks.iter().copied().max().unwrap_or(10),
            };
            print!("{}", commands::recommend(&model, &req)?.to_tsv());
        }
        Command::Experiment { which } => {
            print!("{}", commands::experiment(&cfg, which)?.to_csv());
        }
        Command::Generate => {
            let path = cfg.output.join("checkins.csv");
            let n = commands::generate(&path, cfg.seed)?;
            println!("{n} check-ins written to {}", path.display());
        }
    }
    Ok(())
}
