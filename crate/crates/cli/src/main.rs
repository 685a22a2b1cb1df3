//! `pathsim`: run the scenario x strategy matrix and report on results.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use pathsim_core::report::{
    cell_table, load_results, ranking_table, summary_table, tidy_csv, write_circuit_log_csv,
    write_circuit_log_jsonl, write_results,
};
use pathsim_core::{default_scenarios, run, ModelParams, RunConfig, ScenarioSpec, StrategyKind};

#[derive(Parser, Debug)]
#[command(name = "pathsim", version, about = "Compare Tor path-selection strategies on synthetic relay networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the evaluation matrix and write a results file
    Run(RunArgs),
    /// Summarize or export an existing results file
    Report(ReportArgs),
    /// List the built-in scenarios
    Scenarios,
}

#[derive(clap::Args, Debug)]
struct RunArgs {
    /// Scenario id (1..5) or `all`; repeatable or comma-separated
    #[arg(long, value_delimiter = ',', default_value = "all")]
    scenario: Vec<String>,

    /// Strategy name or `all`; repeatable or comma-separated
    #[arg(long, value_delimiter = ',', default_value = "all")]
    strategy: Vec<String>,

    #[arg(long, default_value_t = 42)]
    seed: u64,

    /// Shrinks relays, users and circuits, in (0, 1]
    #[arg(long, default_value_t = 1.0)]
    scale: f64,

    #[arg(long, default_value = "results.json")]
    out: PathBuf,

    /// Also write per-circuit logs next to the results file
    #[arg(long)]
    log_circuits: bool,

    #[arg(long, value_enum, default_value_t = LogFormat::Jsonl)]
    log_format: LogFormat,

    /// Record wall-clock selection times (makes results nondeterministic)
    #[arg(long)]
    timing: bool,

    /// TOML file with model parameter overrides
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum LogFormat {
    Jsonl,
    Csv,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ReportFormat {
    Summary,
    Csv,
}

#[derive(clap::Args, Debug)]
struct ReportArgs {
    results: PathBuf,

    #[arg(long, value_enum, default_value_t = ReportFormat::Summary)]
    format: ReportFormat,

    /// Write to a file instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn runtime(e: impl std::fmt::Display) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn parse_scenarios(args: &[String]) -> Result<Vec<ScenarioSpec>, Failure> {
    let all = default_scenarios();
    if args.iter().any(|a| a == "all") {
        return Ok(all);
    }
    let mut picked = Vec::new();
    for a in args {
        let spec = a
            .parse::<u8>()
            .ok()
            .and_then(|id| all.iter().find(|s| s.scenario_id == id))
            .ok_or_else(|| Failure::Usage(format!("unknown scenario `{a}` (expected 1..5 or all)")))?;
        if !picked.contains(spec) {
            picked.push(spec.clone());
        }
    }
    picked.sort_by_key(|s| s.scenario_id);
    Ok(picked)
}

fn parse_strategies(args: &[String]) -> Result<Vec<StrategyKind>, Failure> {
    if args.iter().any(|a| a == "all") {
        return Ok(StrategyKind::ALL.to_vec());
    }
    let mut picked = Vec::new();
    for a in args {
        let kind: StrategyKind = a.parse().map_err(|e| Failure::Usage(format!("{e}")))?;
        if !picked.contains(&kind) {
            picked.push(kind);
        }
    }
    picked.sort();
    Ok(picked)
}

fn sidecar(out: &Path, ext: &str) -> PathBuf {
    let stem = out.file_stem().map_or_else(|| "results".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.circuits.{ext}"))
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let scenarios = parse_scenarios(&args.scenario)?;
    let strategies = parse_strategies(&args.strategy)?;
    if !(args.scale > 0.0 && args.scale <= 1.0) {
        return Err(Failure::Usage(format!("--scale must lie in (0, 1], got {}", args.scale)));
    }
    let params = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
            ModelParams::from_toml_str(&text).map_err(|e| Failure::Usage(e.to_string()))?
        }
        None => ModelParams::default(),
    };

    let mut config = RunConfig::new(scenarios, strategies, args.seed, args.scale);
    config.params = params;
    config.log_circuits = args.log_circuits;
    config.record_timing = args.timing;

    let report = run(&config).map_err(Failure::runtime)?;
    write_results(&report, &args.out).map_err(Failure::runtime)?;
    if args.log_circuits {
        let path = match args.log_format {
            LogFormat::Jsonl => {
                let p = sidecar(&args.out, "jsonl");
                write_circuit_log_jsonl(&report, &p).map(|_| p)
            }
            LogFormat::Csv => {
                let p = sidecar(&args.out, "csv");
                write_circuit_log_csv(&report, &p).map(|_| p)
            }
        }
        .map_err(Failure::runtime)?;
        eprintln!("circuit log: {}", path.display());
    }

    print!("{}", cell_table(&report));
    println!();
    print!("{}", ranking_table(&report));
    eprintln!("results: {}", args.out.display());
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<(), Failure> {
    let report = load_results(&args.results).map_err(Failure::runtime)?;
    let text = match args.format {
        ReportFormat::Summary => summary_table(&report),
        ReportFormat::Csv => tidy_csv(&report).map_err(Failure::runtime)?,
    };
    match args.out {
        Some(path) => fs::write(&path, text)
            .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_scenarios() {
    println!("{:>3} {:>10} {:>8} {:>9}", "id", "users", "relays", "circuits");
    for s in default_scenarios() {
        println!("{:>3} {:>10} {:>8} {:>9}", s.scenario_id, s.users, s.relays, s.circuits);
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
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Report(args) => cmd_report(args),
        Command::Scenarios => {
            cmd_scenarios();
            Ok(())
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
