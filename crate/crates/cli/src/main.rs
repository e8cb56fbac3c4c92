use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dynaq_core::config::RunConfig;
use dynaq_core::experiment::{
    compare_runs, dump_checkpoint, read_logs, run_experiment, write_outputs, ExperimentKind,
};

#[derive(Parser)]
#[command(name = "dynaq", about = "Prioritized-sweeping neural Dyna-Q experiments on a double T-maze")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its artifacts.
    Run {
        /// galmo-growth, worldmodel-online-vs-offline, qlearning-vs-dynaq or replay-stats.
        #[arg(long)]
        experiment: ExperimentKind,
        /// Flat `key = value` config file; defaults apply to absent keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Number of seeded runs per bundle.
        #[arg(long)]
        seeds: Option<usize>,
        /// Output directory [default: out/<experiment>].
        #[arg(long, env = "DYNAQ_OUT")]
        out: Option<PathBuf>,
        /// `key=value` override, applied after the config file.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Compare two JSON-lines run bundles trial by trial.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Write the per-trial CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Usage(String),
    Runtime(String),
}

fn build_config(
    path: Option<&PathBuf>,
    seed: Option<u64>,
    seeds: Option<usize>,
    overrides: &[String],
) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::default();
    if let Some(path) = path {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        cfg.apply(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    }
    for pair in overrides {
        cfg.set_pair(pair).map_err(|e| Failure::Usage(e.to_string()))?;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(seeds) = seeds {
        cfg.set("seeds", &seeds.to_string()).map_err(|e| Failure::Usage(e.to_string()))?;
    }
    if let Some(maze) = &cfg.maze {
        if !maze.exists() {
            return Err(Failure::Usage(format!("maze file {} does not exist", maze.display())));
        }
    }
    Ok(cfg)
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { experiment, config, seed, seeds, out, overrides } => {
            let cfg = build_config(config.as_ref(), seed, seeds, &overrides)?;
            let dir = out.unwrap_or_else(|| PathBuf::from("out").join(experiment.name()));
            let output = run_experiment(experiment, &cfg).map_err(|e| match dump_checkpoint(&dir, &e) {
                Ok(Some(path)) => Failure::Runtime(format!("{e}; checkpoint written to {}", path.display())),
                Ok(None) => Failure::Runtime(e.to_string()),
                Err(dump) => Failure::Runtime(format!("{e}; checkpoint not written: {dump}")),
            })?;
            write_outputs(&dir, &output, &cfg).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
            for line in output.summary_lines() {
                println!("{line}");
            }
            println!("wrote {}", dir.display());
            Ok(())
        }
        Command::Compare { a, b, out } => {
            let load = |p: &PathBuf| {
                let text = std::fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
                read_logs(&text).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))
            };
            let cmp = compare_runs(&load(&a)?, &load(&b)?).map_err(|e| Failure::Runtime(e.to_string()))?;
            match out {
                Some(path) => {
                    std::fs::write(&path, cmp.to_csv())
                        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
                }
                None => print!("{}", cmp.to_csv()),
            }
            eprintln!("area under mean error: a {:.3}, b {:.3}", cmp.auc_a, cmp.auc_b);
            eprintln!("trials with differing means: {}", cmp.differing.len());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
