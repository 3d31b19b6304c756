use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cmap_cli::config::{self, Format, RawConfig, RunConfig, OUTPUT_DIR_ENV};
use cmap_cli::metric::{self, Route};
use cmap_cli::report::Report;
use cmap_cli::{exit, suites, CliError};

#[derive(Parser)]
#[command(name = "cmap", version, about = "Verification suites for the one-loop deformed c-map over CH^n")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run verification suites and write a report.
    Run(RunArgs),
    /// Print the metric matrix at one chart point.
    EvalMetric(EvalArgs),
}

#[derive(Args)]
struct RunArgs {
    /// key=value file; command-line flags take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Complex dimension of the base, 0 to 3.
    #[arg(long)]
    n: Option<String>,
    /// Deformation parameter, a non-negative integer.
    #[arg(long, allow_hyphen_values = true)]
    k: Option<String>,
    /// Comma-separated list from psk, vphs, rigid, twist, cmap, einstein, heisenberg, isometry, all.
    #[arg(long)]
    suites: Option<String>,
    /// Sampled points per suite [default: 50].
    #[arg(long)]
    points: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Tolerance for first-order structural identities [default: 1e-9].
    #[arg(long)]
    tol_structural: Option<String>,
    /// Tolerance for jet-versus-finite-difference comparisons [default: 1e-6].
    #[arg(long)]
    tol_fd: Option<String>,
    /// Report file; standard output when absent. The directory can be
    /// overridden through CMAP_OUTPUT_DIR.
    #[arg(long)]
    output: Option<String>,
    /// json or csv [default: json].
    #[arg(long)]
    format: Option<String>,
    /// Include wall-clock times (makes reports non-reproducible).
    #[arg(long)]
    timing: bool,
    /// Suppress the summary on standard error.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, default_value = "0")]
    n: String,
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    k: String,
    /// fs, assembled or twist.
    #[arg(long, default_value = "fs")]
    route: String,
    /// Chart coordinates (X, r, w, t), comma separated.
    #[arg(long, allow_hyphen_values = true)]
    point: String,
}

fn run_config(args: &RunArgs) -> Result<RunConfig, CliError> {
    let file = match &args.config {
        Some(path) => RawConfig::from_file(path)?,
        None => RawConfig::default(),
    };
    let flags = RawConfig {
        n: args.n.clone(),
        k: args.k.clone(),
        suites: args.suites.clone(),
        points: args.points.clone(),
        seed: args.seed.clone(),
        tol_structural: args.tol_structural.clone(),
        tol_fd: args.tol_fd.clone(),
        output: args.output.clone(),
        format: args.format.clone(),
    };
    file.overlay(flags).validate()
}

fn run(args: RunArgs) -> Result<u8, CliError> {
    let cfg = run_config(&args)?;
    let start = std::time::Instant::now();
    let (reports, derived) = suites::run_all(&cfg, args.timing);
    let mut report = Report::new(cfg.clone(), derived, reports);
    if args.timing {
        report.wall_time_seconds = Some(start.elapsed().as_secs_f64());
    }
    let body = match cfg.format {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv(),
    };
    let dir = std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from);
    match cfg.resolved_output(dir.as_deref()) {
        Some(path) => {
            let io = |source| CliError::Io { path: path.display().to_string(), source };
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(io)?;
            }
            std::fs::write(&path, body).map_err(io)?;
        }
        None => print!("{body}"),
    }
    if !args.quiet {
        eprint!("{}", report.summary());
    }
    Ok(if report.pass { exit::SUCCESS } else { exit::SUITE_FAILURE })
}

fn eval_metric(args: EvalArgs) -> Result<u8, CliError> {
    let n = config::parse_dimension(&args.n)?;
    let k = config::parse_deformation(&args.k)?;
    let route: Route = args.route.parse()?;
    let point = metric::parse_point(&args.point)?;
    let g = metric::evaluate(n, k, &point, route)?;
    print!("{}", metric::render(&g));
    Ok(exit::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::EvalMetric(args) => eval_metric(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
