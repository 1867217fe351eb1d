use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use masim::scenario::{self, ExperimentReport, ScenarioConfig};

/// Movable-antenna secure-transmission experiments.
///
/// Set MASIM_THREADS to cap the number of worker threads.
#[derive(Parser)]
#[command(name = "masim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Far-field beam patterns: zero-forcing ULA versus a nulling movable array.
    Beampattern(RunArgs),
    /// Near-field heat maps for each moving-region size.
    Focusmap(RunArgs),
    /// Secrecy rate versus antenna count for movable and fixed arrays.
    Secrecy(RunArgs),
    /// Run the configured optimizer and write the result as JSON.
    Optimize(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Directory for the emitted files.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Overrides the seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Candidate-grid density in points per wavelength.
    #[arg(long)]
    grid: Option<f64>,
}

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("MASIM_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| format!("MASIM_THREADS must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

fn load(args: &RunArgs) -> masim::Result<ScenarioConfig> {
    let mut config = scenario::load_config(&args.config)?;
    config.apply_overrides(args.seed, args.grid)?;
    Ok(config)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_CONFIG);
    }
    let (run, args): (fn(&ScenarioConfig, &std::path::Path) -> masim::Result<ExperimentReport>, _) = match &cli.command {
        Command::Beampattern(a) => (scenario::run_beampattern, a),
        Command::Focusmap(a) => (scenario::run_focusmap, a),
        Command::Secrecy(a) => (scenario::run_secrecy_sweep, a),
        Command::Optimize(a) => (scenario::run_optimize, a),
    };
    let config = match load(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match run(&config, &args.out_dir) {
        Ok(report) => {
            for f in &report.files {
                println!("{}  {}", f.sha256, args.out_dir.join(&f.path).display());
            }
            println!("report: {}", args.out_dir.join(&config.outputs.report).display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { EXIT_CONFIG } else { EXIT_RUNTIME })
        }
    }
}
