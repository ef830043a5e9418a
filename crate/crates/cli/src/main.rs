use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rbswipt::harness::{self, presets, Format, Scenario};
use rbswipt::validation;

const SCENARIO_ERROR: u8 = 1;
const VALIDATION_FAILURE: u8 = 2;

#[derive(Parser)]
#[command(
    name = "rbswipt",
    version,
    about = "Resonant-beam SWIPT link simulator"
)]
struct Cli {
    /// Worker threads for sweeps (defaults to all cores).
    #[arg(long, env = "RBSWIPT_THREADS", global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario and print the result as JSON.
    Solve {
        /// Scenario file, or the name of a shipped preset.
        config: String,
        /// Override the solver seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the sweep declared in a scenario.
    Sweep {
        config: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
        format: String,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the oracle and property checks.
    Validate,
    /// Shipped scenario files.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    /// List preset names and descriptions.
    List,
    /// Print a preset file.
    Show { name: String },
}

fn load(config: &str, seed: Option<u64>) -> rbswipt::Result<Scenario> {
    let mut scenario = if Path::new(config).exists() {
        Scenario::from_path(config)?
    } else if let Some(p) = presets::find(config) {
        p.scenario()?
    } else {
        Scenario::from_path(config)?
    };
    if let Some(seed) = seed {
        scenario.solver.seed = seed;
    }
    Ok(scenario)
}

fn fail(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(SCENARIO_ERROR)
}

fn run(cli: Cli) -> ExitCode {
    match cli.command {
        Command::Solve { config, seed } => {
            let report = match load(&config, seed).and_then(|s| harness::solve_report(&s)) {
                Ok(r) => r,
                Err(e) => return fail(e),
            };
            match serde_json::to_string_pretty(&report) {
                Ok(text) => {
                    println!("{text}");
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Sweep {
            config,
            out,
            format,
            seed,
        } => {
            let result = format.parse::<Format>().and_then(|format| {
                let scenario = load(&config, seed)?;
                let rows = harness::run_sweep(&scenario)?;
                harness::emit_results(&rows, format, &out)?;
                Ok(rows)
            });
            match result {
                Ok(rows) => {
                    let failed = rows
                        .iter()
                        .filter(|r| r.status.starts_with("error"))
                        .count();
                    if failed > 0 {
                        log::warn!("{failed} of {} sweep points failed", rows.len());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Validate => {
            let report = validation::run();
            for c in &report.checks {
                let verdict = if c.passed { "PASS" } else { "FAIL" };
                println!(
                    "{verdict} {:<32} {:.3e} (limit {:.0e})",
                    c.name, c.value, c.limit
                );
            }
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(VALIDATION_FAILURE)
            }
        }
        Command::Presets { action } => match action {
            PresetAction::List => {
                for p in presets::PRESETS {
                    let description = p.scenario().map(|s| s.description).unwrap_or_default();
                    println!("{:<22} {description}", p.name);
                }
                ExitCode::SUCCESS
            }
            PresetAction::Show { name } => match presets::find(&name) {
                Some(p) => {
                    print!("{}", p.source);
                    ExitCode::SUCCESS
                }
                None => fail(format!("no preset named `{name}`")),
            },
        },
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { SCENARIO_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            return fail(e);
        }
    }
    run(cli)
}
