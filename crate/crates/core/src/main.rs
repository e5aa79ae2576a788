use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};

use pglab::harness::{self, verify, ExperimentConfig, SweepParam};

#[derive(Parser)]
#[command(name = "pglab", version, about = "Variance-reduced policy gradient experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a config file (or a shipped preset name) over all its seeds.
    Run {
        #[arg(long)]
        config: String,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One experiment per value of a parameter, everything else fixed.
    Sweep {
        #[arg(long)]
        config: String,
        /// `B` or `eta`.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the oracle and property checks and print a pass/fail table.
    Verify {
        /// Skip the two multi-seed CartPole learning checks.
        #[arg(long)]
        quick: bool,
    },
    /// List the shipped presets, or print one.
    Presets { name: Option<String> },
}

fn load_config(name: &str) -> anyhow::Result<ExperimentConfig> {
    if let Some(text) = harness::preset_text(name) {
        return Ok(ExperimentConfig::parse(text)?);
    }
    ExperimentConfig::load(name).with_context(|| format!("loading config '{name}'"))
}

fn report_runs(report: &harness::CsvReport) -> bool {
    for run in &report.runs {
        let status = run.truncated.as_deref().map_or("complete".to_string(), |r| format!("TRUNCATED ({r})"));
        println!(
            "seed {:>20}  trajectories {:>7}  updates {:>5}  final return {:>10.3}  {status}",
            run.seed, run.total_trajectories, run.updates, run.final_return
        );
    }
    report.truncated_runs() == 0
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> anyhow::Result<bool> {
    match Cli::parse().command {
        Command::Run { config, seed, out } => {
            let mut cfg = load_config(&config)?;
            if let Some(seed) = seed {
                cfg.master_seed = seed;
            }
            if let Some(out) = out {
                cfg.output = out;
            }
            let report = harness::run_experiment(&cfg)?;
            println!("wrote {} rows to {}", report.raw.len(), cfg.output.display());
            Ok(report_runs(&report))
        }
        Command::Sweep { config, param, values, out } => {
            let mut cfg = load_config(&config)?;
            if let Some(out) = out {
                cfg.output = out;
            }
            let param = SweepParam::parse(&param)?;
            let report = harness::sweep(&cfg, param, &values)?;
            println!("wrote {} rows to {}", report.raw.len(), cfg.output.display());
            Ok(report_runs(&report))
        }
        Command::Verify { quick } => {
            let results = verify::all_checks(!quick);
            for r in &results {
                println!("{r}");
            }
            let failed = results.iter().filter(|r| !r.passed).count();
            println!("{} passed, {failed} failed", results.len() - failed);
            Ok(failed == 0)
        }
        Command::Presets { name } => {
            match name {
                Some(name) => match harness::preset_text(&name) {
                    Some(text) => print!("{text}"),
                    None => bail!("unknown preset '{name}'"),
                },
                None => {
                    for name in harness::preset_names() {
                        println!("{name}");
                    }
                }
            }
            Ok(true)
        }
    }
}
