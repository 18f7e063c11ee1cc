//! `teamstab`: ingest team records, compute stability factors, regress scores
//! on stability and simulate teaming policies.
//!
//! Exit codes: 0 success, 1 parse / I/O / configuration error, 2 cohort
//! consistency error, 3 rank-deficient regression.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use teamstab_core::ingest::{ErrorClass, IngestError};
use teamstab_core::stats::StatsError;
use teamstab_core::synth::SynthError;

#[derive(Debug, Parser)]
#[command(
    name = "teamstab",
    version,
    about = "Team stability metrics for cooperative learning cohorts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a team list and score file and write the canonical cohort JSON.
    Ingest(IngestArgs),
    /// Compute per-student stability factors (StudentNo,S,MeanScore).
    Compute(ComputeArgs),
    /// Regress mean scores on S and optional extra features.
    Regress(RegressArgs),
    /// Generate a synthetic cohort under a teaming policy.
    Simulate(SimulateArgs),
    /// Per-student, per-pair breakdown of every metric.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    /// Fixed-width regression table (regress only).
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Policy {
    FullyStable,
    Random,
    Churn,
}

#[derive(Debug, Args)]
struct CourseArgs {
    /// Course names in activity order, comma separated.
    #[arg(
        long,
        value_delimiter = ',',
        required_unless_present = "courses_file",
        conflicts_with = "courses_file"
    )]
    courses: Vec<String>,
    /// File with one course name per line, in activity order.
    #[arg(long)]
    courses_file: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Team list (ID,Grade,Class,Course,Score,LeaderNo,Topic).
    #[arg(long)]
    teams: PathBuf,
    /// Individual scores (TeamID,StudentNo,Score).
    #[arg(long)]
    scores: PathBuf,
    #[command(flatten)]
    courses: CourseArgs,
    /// Field delimiter of both input files.
    #[arg(long, default_value = ",", value_parser = parse_delimiter)]
    delimiter: u8,
    /// Cohort JSON destination; standard output when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ComputeArgs {
    /// Cohort JSON written by `ingest` or `simulate`.
    cohort: PathBuf,
    /// Damping factor in (0, 1]; defaults to 1/e.
    #[arg(long)]
    delta: Option<f64>,
    /// Decimals in the CSV output.
    #[arg(long, default_value_t = 2, conflicts_with = "full_precision")]
    precision: usize,
    /// Shortest round-trip representation instead of fixed decimals.
    #[arg(long)]
    full_precision: bool,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long, default_value = ",", value_parser = parse_delimiter)]
    delimiter: u8,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RegressArgs {
    /// FinalResults file (StudentNo,S,MeanScore).
    final_results: PathBuf,
    /// Extra predictor files: a StudentNo column plus one column per feature.
    #[arg(long = "features")]
    features: Vec<PathBuf>,
    /// Fit without the constant term.
    #[arg(long)]
    no_intercept: bool,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
    #[arg(long, default_value = ",", value_parser = parse_delimiter)]
    delimiter: u8,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value = "churn")]
    policy: Policy,
    /// Probability that a student leaves their seat between activities.
    #[arg(long, default_value_t = 0.5)]
    churn_rate: f64,
    #[arg(long, default_value_t = 30)]
    students: usize,
    #[arg(long, default_value_t = 4)]
    activities: usize,
    #[arg(long, default_value_t = 3)]
    min_team_size: usize,
    #[arg(long, default_value_t = 5)]
    max_team_size: usize,
    /// Shorthand for equal minimum and maximum team size.
    #[arg(long, conflicts_with_all = ["min_team_size", "max_team_size"])]
    team_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Score model intercept.
    #[arg(long, default_value_t = 82.114)]
    base: f64,
    /// Score model slope on S.
    #[arg(long, default_value_t = 0.502)]
    coeff: f64,
    /// Standard deviation of the per-score noise.
    #[arg(long, default_value_t = 5.0, conflicts_with = "target_r2")]
    noise_sd: f64,
    /// Pick the noise level that gives this population R² instead.
    #[arg(long)]
    target_r2: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Fit mean score on S and print slope, p-value and R².
    #[arg(long)]
    fit: bool,
    /// Independent replicates; files are written for the first one.
    #[arg(long, default_value_t = 1)]
    replicates: usize,
    /// Directory for teams.csv, scores.csv, courses.txt and cohort.json.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Summary format.
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

#[derive(Debug, Args)]
struct ReportArgs {
    cohort: PathBuf,
    #[arg(long)]
    delta: Option<f64>,
    /// Also write the cooperation edge list (i,j,c_ij,R_ij) here.
    #[arg(long)]
    edges: Option<PathBuf>,
    /// `json` for the full audit, `csv` for one metrics row per student.
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long, default_value = ",", value_parser = parse_delimiter)]
    delimiter: u8,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn parse_delimiter(raw: &str) -> Result<u8, String> {
    match raw {
        "\\t" | "tab" => Ok(b'\t'),
        _ if raw.len() == 1 && raw.is_ascii() => Ok(raw.as_bytes()[0]),
        _ => Err(format!(
            "delimiter must be a single ASCII character, got `{raw}`"
        )),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<IngestError>() {
            return match e.class() {
                ErrorClass::Parse => 1,
                ErrorClass::Consistency => 2,
            };
        }
        if let Some(SynthError::Ingest(e)) = cause.downcast_ref::<SynthError>() {
            return match e.class() {
                ErrorClass::Parse => 1,
                ErrorClass::Consistency => 2,
            };
        }
        if let Some(StatsError::Singular(_)) = cause.downcast_ref::<StatsError>() {
            return 3;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let result = match cli.command {
        Command::Ingest(args) => commands::ingest(args),
        Command::Compute(args) => commands::compute(args),
        Command::Regress(args) => commands::regress(args),
        Command::Simulate(args) => commands::simulate(args),
        Command::Report(args) => commands::report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
