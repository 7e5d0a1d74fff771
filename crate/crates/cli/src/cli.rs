use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::CONFIG_ENV;

#[derive(Debug, Parser)]
#[command(
    name = "pgo",
    version,
    about = "Profile-guided import deferral for serverless Python applications"
)]
pub struct Cli {
    /// Configuration file (TOML).
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,

    /// Directory receiving stores, reports and trigger logs.
    #[arg(long, global = true, default_value = "pgo-out")]
    pub out: PathBuf,

    /// Run every stage on the calling thread.
    #[arg(long, global = true)]
    pub sequential: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Merge profile batches into a validated store.
    Ingest {
        /// Batch files or directories; defaults to the configured collector directory.
        paths: Vec<PathBuf>,
    },
    /// Build the initialization breakdown and library findings for a store.
    Analyze {
        /// Store file or the run directory containing it.
        store: PathBuf,
    },
    /// Render a report.json.
    Report {
        report: PathBuf,
        #[arg(long, value_enum, default_value_t = ReportFormat::Md)]
        format: ReportFormat,
    },
    /// Defer the imports named by a report in a source tree.
    Optimize(OptimizeArgs),
    /// Replay a workload trace and log distribution-shift triggers.
    Watch(WatchArgs),
    /// Accept batches over HTTP and store them under the output directory.
    ServeCollector {
        #[arg(long, default_value = "127.0.0.1:8700")]
        bind: String,
    },
    /// Generate a synthetic invocation trace as CSV.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Md,
    Json,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    /// report.json or the run directory containing it.
    pub report: PathBuf,
    /// Root of the application sources.
    #[arg(long)]
    pub source: PathBuf,
    /// Print a unified diff instead of writing files.
    #[arg(long)]
    pub dry_run: bool,
    /// Save the computed plans as JSON.
    #[arg(long, value_name = "FILE")]
    pub save_plan: Option<PathBuf>,
    /// Apply plans saved earlier; fails if a source changed since.
    #[arg(long, value_name = "FILE", conflicts_with = "save_plan")]
    pub apply_plan: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct WatchArgs {
    /// Trace CSV (`-` for stdin), batch file, or directory of batches.
    pub source: PathBuf,
    /// Only consider rows of this application.
    #[arg(long)]
    pub app: Option<String>,
    /// Re-run analyze and optimize after each trigger.
    #[arg(long, requires_all = ["store", "src"], overrides_with = "no_auto")]
    pub auto: bool,
    /// Only log triggers (the default).
    #[arg(long, overrides_with = "auto")]
    pub no_auto: bool,
    /// Store used by --auto.
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Source tree used by --auto.
    #[arg(long = "source")]
    pub src: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON simulation spec; flags override its fields.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub app_id: Option<String>,
    #[arg(long)]
    pub entry_points: Option<usize>,
    #[arg(long)]
    pub windows: Option<usize>,
    #[arg(long)]
    pub window_ms: Option<i64>,
    #[arg(long)]
    pub per_window: Option<u64>,
    #[arg(long)]
    pub skew: Option<f64>,
    /// Window indices where the top entry points rotate.
    #[arg(long, value_delimiter = ',')]
    pub shifts: Option<Vec<usize>>,
    #[arg(long)]
    pub shift_top_k: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the CSV here instead of stdout.
    #[arg(long, value_name = "FILE")]
    pub output: Option<PathBuf>,
}
