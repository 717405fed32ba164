//! `hmt`: batch entry points for the UAV defense platform.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod interactive;
mod io;

#[derive(Parser)]
#[command(name = "hmt", version, about = "Human-machine teaming UAV defense: train, evaluate, serve, replay and plot")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a D3QN policy for every seed.
    Train(TrainArgs),
    /// Success rate of the heuristic or a checkpoint.
    Eval(EvalArgs),
    /// Run the session service for interactive episodes.
    Serve(ServeArgs),
    /// Re-simulate recorded episodes and check they match. Exits 1 on any mismatch.
    Replay(ReplayArgs),
    /// Demonstration stores.
    Demos {
        #[command(subcommand)]
        command: DemosCommand,
    },
    /// Statistics over training runs.
    Stats {
        #[command(subcommand)]
        command: StatsCommand,
    },
    /// CSV and SVG plots.
    Plot {
        #[command(subcommand)]
        command: PlotCommand,
    },
}

#[derive(Clone, Copy, ValueEnum)]
pub enum VariantArg {
    Plain,
    Ph,
    Mh,
}

#[derive(Args)]
pub struct ScenarioArg {
    /// `default` (5v1), `reduced` (2v1) or a path to an episode config JSON file.
    #[arg(long, default_value = "default")]
    pub scenario: String,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long, value_enum, default_value = "plain")]
    pub variant: VariantArg,
    #[command(flatten)]
    pub scenario: ScenarioArg,
    /// Training config JSON; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Demo store JSON from `demos build`, or a directory of recorded episodes.
    #[arg(long)]
    pub demos: Option<PathBuf>,
    /// Comma-separated training seeds.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub max_episodes: Option<u64>,
    /// Stop a seed once an evaluation reaches this success rate.
    #[arg(long)]
    pub stop_at: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    /// Keep every evaluation checkpoint, not only the best one.
    #[arg(long)]
    pub all_checkpoints: bool,
    /// Experimental: learn online from episodes played through the session service.
    #[arg(long)]
    pub interactive: bool,
    /// Port for `--interactive`.
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Finished interactive episodes to learn from before exiting.
    #[arg(long, default_value_t = 10)]
    pub sessions: usize,
}

#[derive(Args)]
pub struct EvalArgs {
    /// `heuristic` or a checkpoint file.
    #[arg(long, default_value = "heuristic")]
    pub policy: String,
    #[command(flatten)]
    pub scenario: ScenarioArg,
    #[arg(short = 'n', long, default_value_t = 30)]
    pub episodes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Append a CSV row to this file.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Also record every episode into this run directory.
    #[arg(long)]
    pub record: Option<PathBuf>,
}

#[derive(Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub scenario: ScenarioArg,
    /// Checkpoint driving blue UAVs under the waypoint follower; the heuristic otherwise.
    #[arg(long)]
    pub policy: Option<PathBuf>,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Where finished episodes are saved.
    #[arg(long, default_value = "episodes")]
    pub store: PathBuf,
    /// Static operator console assets.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 10.0)]
    pub steps_per_second: f64,
    #[arg(long, default_value_t = 1)]
    pub decimation: u64,
}

#[derive(Args)]
pub struct ReplayArgs {
    /// Episode file or run directory.
    pub path: PathBuf,
    /// Checkpoints referenced by policy bindings, as `id=path`.
    #[arg(long = "policy", value_name = "ID=PATH")]
    pub policies: Vec<String>,
}

#[derive(Subcommand)]
enum DemosCommand {
    /// Extract demonstration transitions from recorded episodes.
    Build(DemosBuildArgs),
}

#[derive(Args)]
pub struct DemosBuildArgs {
    /// Episode file or run directory.
    #[arg(long)]
    pub episodes: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Keep episodes Blue lost.
    #[arg(long)]
    pub all_outcomes: bool,
    /// Keep only this provenance.
    #[arg(long, value_enum)]
    pub only: Option<SourceArg>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum SourceArg {
    Human,
    Agent,
}

#[derive(Subcommand)]
enum StatsCommand {
    /// Welch t-test and Cohen's d on episodes-to-threshold of two runs.
    Compare(CompareArgs),
}

#[derive(Args)]
pub struct CompareArgs {
    pub run_a: PathBuf,
    pub run_b: PathBuf,
    #[arg(long, default_value_t = 0.8)]
    pub threshold: f64,
}

#[derive(Subcommand)]
enum PlotCommand {
    /// Mean success rate per evaluation point with a one-std band.
    Curves(CurvesArgs),
    /// Red and zone traces relative to the neutralizing blue UAV.
    Trajectories(TrajectoriesArgs),
}

#[derive(Args)]
pub struct CurvesArgs {
    /// Training run directories, as `label=dir` or `dir`.
    #[arg(long = "run", required = true)]
    pub runs: Vec<String>,
    /// Output prefix; writes `<out>.csv` and `<out>.svg`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct TrajectoriesArgs {
    /// Episode file or run directory.
    #[arg(long = "from")]
    pub from: PathBuf,
    /// Winning episodes to overlay.
    #[arg(long, default_value_t = 5)]
    pub episodes: usize,
    #[arg(long)]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt().with_env_filter(tracing_subscriber::EnvFilter::from_default_env()).with_writer(std::io::stderr).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) if a.interactive => interactive::run(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Serve(a) => commands::serve(a),
        Command::Replay(a) => commands::replay(a),
        Command::Demos { command: DemosCommand::Build(a) } => commands::demos_build(a),
        Command::Stats { command: StatsCommand::Compare(a) } => commands::stats_compare(a),
        Command::Plot { command: PlotCommand::Curves(a) } => commands::plot_curves(a),
        Command::Plot { command: PlotCommand::Trajectories(a) } => commands::plot_trajectories(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
