//! `amprint`: one binary for every pipeline stage.
//!
//! Exit codes: 0 on success, 1 when the input is well-formed but the
//! computation fails, 2 on usage errors.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::output::CliError;

/// Dimensional-error prediction and printability scoring for 3D prints.
#[derive(Debug, Parser)]
#[command(name = "amprint", version, propagate_version = true)]
pub struct Cli {
    /// Print a JSON document instead of the human summary.
    #[arg(long, global = true)]
    pub json: bool,
    /// Seed for every random choice (sampling, shuffles, initialisation).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Inspect triangle meshes.
    #[command(subcommand)]
    Mesh(MeshCommand),
    /// Per-vertex predictor features.
    #[command(subcommand)]
    Features(FeaturesCommand),
    /// Train, apply and inspect the error network.
    #[command(subcommand)]
    Ann(AnnCommand),
    /// Rasterise a mesh into binary layer images.
    Slice(SliceArgs),
    /// Rebuild a point cloud from a layer stack (or directly from a mesh).
    Reconstruct(ReconstructArgs),
    /// Rigid registration.
    #[command(subcommand)]
    Register(RegisterCommand),
    /// Cloud-to-cloud distance from source points to a target cloud.
    C2c(C2cArgs),
    /// Printability scoring.
    #[command(subcommand)]
    Printability(PrintabilityCommand),
    /// Run the HTTP scoring service.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MeshFormatArg {
    Stl,
    StlAscii,
    Ply,
    Obj,
}

#[derive(Debug, Args)]
pub struct MeshInput {
    /// Mesh file (STL, PLY or OBJ).
    pub mesh: PathBuf,
    /// Override the format inferred from the extension.
    #[arg(long, value_enum)]
    pub format: Option<MeshFormatArg>,
}

#[derive(Debug, Subcommand)]
pub enum MeshCommand {
    /// Counts, area, bounds and topology.
    Info(MeshInput),
}

#[derive(Debug, Subcommand)]
pub enum FeaturesCommand {
    /// Write the ten features of every (or a sampled subset of) vertex to CSV.
    Extract(ExtractArgs),
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub input: MeshInput,
    #[arg(long)]
    pub out: PathBuf,
    /// Keep a seeded uniform fraction of the vertices.
    #[arg(long)]
    pub sample: Option<f64>,
    /// Measured cloud: adds a `target` column with each vertex's distance to
    /// it after ICP alignment.
    #[arg(long)]
    pub measured: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum AnnCommand {
    /// Fit a network to a feature CSV with a `target` column.
    Train(TrainArgs),
    /// Predict per-vertex error for a feature CSV or a mesh.
    Predict(PredictArgs),
    /// Permutation importance of each feature.
    Importance(ImportanceArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Model file to write (JSON).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 256)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    /// Training share of the data; the rest is validation.
    #[arg(long, default_value_t = 0.8)]
    pub split: f64,
    /// Per-epoch train/validation MSE as CSV.
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Feature CSV, or a mesh whose features are extracted first.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<MeshFormatArg>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ImportanceArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Feature CSV with a `target` column.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub repeats: usize,
    /// CSV or JSON, by extension.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BedArgs {
    /// Pixel size (mm).
    #[arg(long, default_value_t = amprint_core::recon::DEFAULT_PITCH)]
    pub pitch: f64,
    /// Layer thickness (mm).
    #[arg(long, default_value_t = amprint_core::recon::DEFAULT_LAYER_THICKNESS)]
    pub thickness: f64,
    #[arg(long, default_value_t = amprint_core::recon::DEFAULT_BED_WIDTH)]
    pub bed_width: f64,
    #[arg(long, default_value_t = amprint_core::recon::DEFAULT_BED_DEPTH)]
    pub bed_depth: f64,
}

#[derive(Debug, Args)]
pub struct SliceArgs {
    #[command(flatten)]
    pub input: MeshInput,
    /// Directory for `layer_NNNNN.png` and `stack.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub bed: BedArgs,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Layer stack directory, or a mesh to slice in memory.
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<MeshFormatArg>,
    /// PLY file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Source surface area (mm²) for the density figure.
    #[arg(long)]
    pub source_area: Option<f64>,
    #[command(flatten)]
    pub bed: BedArgs,
}

#[derive(Debug, Subcommand)]
pub enum RegisterCommand {
    /// Point-to-point ICP of source onto target.
    Icp(IcpArgs),
}

#[derive(Debug, Args)]
pub struct IcpArgs {
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    /// Transform file to write (JSON).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub max_iterations: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
    /// Keep only this fraction of closest pairs per iteration.
    #[arg(long)]
    pub trim: Option<f64>,
}

#[derive(Debug, Args)]
pub struct C2cArgs {
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    /// Per-point distances with an MAE/STD footer (CSV), or JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Align with ICP first.
    #[arg(long, conflicts_with = "transform")]
    pub icp: bool,
    /// Apply a stored transform to the source first.
    #[arg(long)]
    pub transform: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum PrintabilityCommand {
    /// Score a configuration file.
    Score(ScoreArgs),
    /// Fit the sigmoid coefficient for one critical value or a whole table.
    FitC(FitArgs),
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Configuration JSON. Relative paths that do not exist are looked up in
    /// `$AMPRINT_CONFIG_DIR`.
    #[arg(long)]
    pub config: PathBuf,
    /// Report file to write (JSON).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["w", "technology"]))]
pub struct FitArgs {
    /// Critical value.
    #[arg(long)]
    pub w: Option<f64>,
    #[arg(long, default_value = "decreasing", value_parser = ["decreasing", "increasing"])]
    pub direction: String,
    /// Fit every entry of a technology's table instead.
    #[arg(long)]
    pub technology: Option<String>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let default_level = if matches!(cli.command, Command::Serve(_)) { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(default_level)).init();

    match commands::run(&cli) {
        Ok(outcome) => {
            outcome.print(cli.json);
            ExitCode::SUCCESS
        }
        Err(e) => {
            report_error(&e, cli.json);
            ExitCode::from(e.exit_code())
        }
    }
}

fn report_error(e: &CliError, json: bool) {
    if json {
        let doc = serde_json::json!({ "error": e.to_string(), "exit_code": e.exit_code() });
        println!("{doc}");
    } else {
        eprintln!("error: {e}");
    }
}
