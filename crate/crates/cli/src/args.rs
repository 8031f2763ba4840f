use std::path::PathBuf;

use clap::builder::{PossibleValuesParser, TypedValueParser};
use clap::{Args, Parser, Subcommand};

const AFTER_HELP: &str = "\
Data schema version 1: each trial is a pair <participant>_<incident>.samples.csv
(one row per 60 Hz gaze sample) and <participant>_<incident>.meta.json
(participant_id, incident, incident_time_s, sa_label, pupil baseline), flat in
one directory.

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 internal error.";

#[derive(Debug, Parser)]
#[command(name = "sagaze", version, about = "Situational-awareness prediction from AR gaze recordings", after_help = AFTER_HELP)]
pub struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset in the trial file format.
    Synth(#[command(flatten)] Common),
    /// Classify gaze events of every trial and export them as CSV.
    Preprocess(DataArgs),
    /// Attention metrics of the window before each incident, with means by SA label.
    Metrics {
        #[command(flatten)]
        data: DataArgs,
        /// Window length in seconds, ending at the incident.
        #[arg(long, default_value_t = 7, value_parser = window_parser())]
        window: u32,
    },
    /// Build and serialize the fixation graph of every window.
    Graphs(DataArgs),
    /// Cross-validate the graph model and the logistic baseline; write the report and checkpoints.
    Train {
        #[command(flatten)]
        data: DataArgs,
        /// Number of participant-level folds.
        #[arg(long)]
        folds: Option<usize>,
    },
    /// Re-evaluate the checkpoints of a training run on a dataset.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        /// Output directory of a previous `train` run.
        #[arg(long)]
        model: PathBuf,
    },
    /// Print the default configuration as TOML.
    Defaults,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (all cores by default).
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    #[command(flatten)]
    pub common: Common,
    /// Dataset directory.
    #[arg(long)]
    pub data: Option<PathBuf>,
}

fn window_parser() -> impl TypedValueParser<Value = u32> {
    PossibleValuesParser::new(["7", "14", "21"]).map(|s| s.parse::<u32>().expect("listed values are integers"))
}
