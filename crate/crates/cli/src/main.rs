use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use sheaftrack_cli::output::{key_values, Table};
use sheaftrack_cli::{
    bundled, check, emit_plots, load_config, load_scenario, run, sweep, Overrides,
};

/// Decentralized multi-target tracking on cellular sheaves.
#[derive(Parser)]
#[command(name = "sheaftrack", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Feasibility and spectra only.
    Check {
        /// Scenario file, or the name of a bundled scenario.
        #[arg(long)]
        config: String,
    },
    /// Integrate one scenario and write its outputs.
    Run {
        #[arg(long)]
        config: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Run several scenarios in parallel, each into `<out>/<name>`.
    Sweep {
        /// Repeatable; defaults to every bundled scenario.
        #[arg(long)]
        config: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Re-render the plots of an earlier run.
    Plot {
        /// Directory holding `trajectory.csv`; plots are written there.
        #[arg(long)]
        out: PathBuf,
        /// Trajectory table to read instead of `<out>/trajectory.csv`.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
}

#[derive(Args, Clone, Copy)]
struct OverrideArgs {
    /// Integration step.
    #[arg(long)]
    h: Option<f64>,
    /// Final time.
    #[arg(long)]
    horizon: Option<f64>,
    /// Seed for randomly placed agents (at most 2^63 - 1, the largest TOML integer).
    #[arg(long, value_parser = clap::value_parser!(u64).range(..=i64::MAX as u64))]
    seed: Option<u64>,
    #[arg(long)]
    no_plots: bool,
}

impl From<OverrideArgs> for Overrides {
    fn from(a: OverrideArgs) -> Self {
        Overrides {
            h: a.h,
            horizon: a.horizon,
            seed: a.seed,
            no_plots: a.no_plots,
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn execute(command: Command) -> Result<bool> {
    match command {
        Command::Check { config } => {
            let loaded = load_scenario(&load_config(&config)?)?;
            let report = check(&loaded);
            print!("{}", key_values(&report.key_values()));
            if !report.feasible {
                let pr = &loaded.scenario.problem;
                eprintln!(
                    "infeasible: {}",
                    pr.feasibility().obstruction_error(pr.agents())
                );
            }
            Ok(report.feasible)
        }
        Command::Run {
            config,
            out,
            overrides,
        } => {
            let mut cfg = load_config(&config)?;
            Overrides::from(overrides).apply(&mut cfg);
            let loaded = load_scenario(&cfg)?;
            let (summary, _) = run(&loaded, &out)?;
            print!("{}", key_values(&summary.key_values()));
            if !summary.ok() {
                eprintln!("{} bound violations", summary.violations());
            }
            Ok(summary.ok())
        }
        Command::Sweep {
            config,
            out,
            overrides,
        } => {
            let specs: Vec<String> = if config.is_empty() {
                bundled::names().into_iter().map(String::from).collect()
            } else {
                config
            };
            let configs = specs
                .iter()
                .map(|s| load_config(s))
                .collect::<Result<Vec<_>>>()?;
            let mut seen = BTreeSet::new();
            for c in &configs {
                if !seen.insert(c.name.clone()) {
                    bail!("two scenarios are named {}; outputs would collide", c.name);
                }
            }
            let mut all_ok = true;
            for (name, result) in sweep(configs, overrides.into(), &out) {
                match result {
                    Ok(s) => {
                        all_ok &= s.ok();
                        println!(
                            "{name}: ok={} violations={} terminal_e_norm={} wall_clock_s={:.3}",
                            s.ok(),
                            s.violations(),
                            s.report.terminal_e_norm,
                            s.wall_clock_s
                        );
                    }
                    Err(e) => {
                        all_ok = false;
                        println!("{name}: error: {e:#}");
                    }
                }
            }
            Ok(all_ok)
        }
        Command::Plot { out, trajectory } => {
            let path = trajectory.unwrap_or_else(|| out.join("trajectory.csv"));
            let table = Table::read_csv(&path)?;
            std::fs::create_dir_all(&out)?;
            for p in emit_plots(&table, &out)? {
                println!("{}", p.display());
            }
            Ok(true)
        }
    }
}
