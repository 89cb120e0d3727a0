//! `vcell` - build virtual cells from Wi-Fi scan traces and locate scans
//! against them.
//!
//! Exit codes: 0 on success, 1 on usage errors (bad flags, missing files),
//! 2 on data errors (malformed or inconsistent input).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "vcell",
    version,
    about = "Virtual cells from Wi-Fi active-scan traces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic AP deployment and scan trace (JSONL).
    Simulate(SimulateArgs),
    /// Group consecutive scans into vcells.
    Build(BuildArgs),
    /// Find overlap regions between nearby vcells.
    Overlap(OverlapArgs),
    /// Encode vcells as Bloom filters in a .vcbf index.
    Index(IndexArgs),
    /// Resolve query scans to a vcell.
    Locate(LocateArgs),
    /// Print cell count, sizes, APs per fingerprint and diameters.
    Stats(StatsArgs),
    /// Export vcells (and overlaps) for mapping.
    Export(ExportArgs),
    /// Report scan/AP counts and empty scans of a trace.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// JSON array of {"lat", "lon"} points; defaults to a straight path.
    #[arg(long)]
    path_file: Option<PathBuf>,
    /// Length of the default straight path.
    #[arg(long, default_value_t = 5.0)]
    length_km: f64,
    /// Start of the default straight path.
    #[arg(long, default_value_t = 8.59, allow_hyphen_values = true)]
    origin_lat: f64,
    #[arg(long, default_value_t = -71.14, allow_hyphen_values = true)]
    origin_lon: f64,
    /// Heading of the default straight path, degrees clockwise from north.
    #[arg(long, default_value_t = 90.0)]
    heading_deg: f64,
    /// APs per km of path.
    #[arg(long, default_value_t = 100.0)]
    density: f64,
    /// Detection radius in meters.
    #[arg(long, default_value_t = 50.0)]
    radius: f64,
    #[arg(long, default_value_t = 0.9)]
    detect_prob: f64,
    #[arg(long, default_value_t = 5.0)]
    speed_kph: f64,
    #[arg(long, default_value_t = 3.6)]
    interval_s: f64,
    /// Scan duration; APs must stay in range for the stretch walked meanwhile.
    #[arg(long, default_value_t = 0.0)]
    scan_duration_s: f64,
    /// Distance along the path of the first scan, meters.
    #[arg(long, default_value_t = 0.0)]
    start_offset_m: f64,
    /// Trace output (JSONL); stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Ground-truth deployment output (JSON).
    #[arg(long)]
    deployment: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BuildArgs {
    /// Cell condition in [0, 1].
    #[arg(long, default_value_t = 0.30)]
    cc: f64,
    /// Build one list per condition, `start:end:step`; -o names a directory.
    #[arg(long)]
    cc_sweep: Option<String>,
    #[arg(short, long)]
    input: PathBuf,
    /// Scan-log format; inferred from the extension when omitted.
    #[arg(long)]
    format: Option<String>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OverlapArgs {
    #[arg(long, default_value_t = 0.20)]
    lo: f64,
    #[arg(long, default_value_t = 0.30)]
    hi: f64,
    /// Compare cells at most this many positions apart.
    #[arg(long, default_value_t = 1)]
    window: usize,
    /// min, union or absolute.
    #[arg(long, default_value = "min")]
    overlap_norm: String,
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct IndexArgs {
    /// Size filters so every cell meets this false-positive rate.
    #[arg(long, default_value_t = 0.005, conflicts_with = "bits")]
    target_p: f64,
    /// Fixed filter size in bits (requires --hashes).
    #[arg(long, requires = "hashes")]
    bits: Option<u64>,
    /// Fixed number of hash functions (requires --bits).
    #[arg(long, requires = "bits")]
    hashes: Option<u32>,
    #[arg(long)]
    seed0: Option<u64>,
    #[arg(long)]
    seed1: Option<u64>,
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct LocateArgs {
    /// Index file (.vcbf).
    #[arg(short, long)]
    input: PathBuf,
    /// Query scans (JSONL, `aps` per line).
    #[arg(long)]
    query: PathBuf,
    /// Previously resolved vcell.
    #[arg(long)]
    prev: Option<u32>,
    #[arg(long, default_value_t = 0.1)]
    jump_delta: f64,
    /// Adjacency radius in vcell ids.
    #[arg(long, default_value_t = 2)]
    radius: u32,
    /// Resolve each line separately, chaining the previous fix.
    #[arg(long)]
    each: bool,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[arg(long, default_value = "geojson")]
    format: String,
    #[arg(short, long)]
    input: PathBuf,
    #[arg(long)]
    overlaps: Option<PathBuf>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(long)]
    format: Option<String>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Build(a) => commands::build(a),
        Command::Overlap(a) => commands::overlap(a),
        Command::Index(a) => commands::index(a),
        Command::Locate(a) => commands::locate(a),
        Command::Stats(a) => commands::stats(a),
        Command::Export(a) => commands::export(a),
        Command::Validate(a) => commands::validate(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("vcell: {e}");
            ExitCode::from(e.code())
        }
    }
}
