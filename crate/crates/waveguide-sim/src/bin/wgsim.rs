use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use waveguide_sim::error::Result;
use waveguide_sim::scenario::{self, Config, DerivedSummary, OutputSpec};
use waveguide_sim::{acceptance, output};

#[derive(Parser)]
#[command(
    name = "wgsim",
    version,
    about = "Two atoms in a rectangular waveguide: retarded, Markovian, and \
             discretized-continuum engines over shared JSON scenarios"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a JSON config file
    Run {
        /// Path to the config
        config: PathBuf,
        /// Write CSVs and the summary to this directory (overrides the
        /// config's output block)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Patch a config field before running, e.g. time.t_end=2.5
        #[arg(long = "override", value_name = "PATH=VALUE")]
        overrides: Vec<String>,
    },
    /// Run a built-in scenario
    Preset {
        /// One of: centered-12, centered-24, offcenter-x, perp-x, perp-y
        name: String,
        /// Write CSVs and the summary to this directory
        #[arg(long)]
        out: Option<PathBuf>,
        /// Patch a config field before running, e.g. time.t_end=2.5
        #[arg(long = "override", value_name = "PATH=VALUE")]
        overrides: Vec<String>,
    },
    /// Print the derived frequencies, velocities, and rates of a config
    /// without running any engine
    Rates {
        /// Path to the config
        config: PathBuf,
    },
    /// Run the acceptance checklist and report one line per criterion
    Check,
}

fn main() {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run { config, out, overrides } => {
            let text = std::fs::read_to_string(&config)?;
            let mut cfg = Config::from_json(&text)?;
            if !overrides.is_empty() {
                cfg = scenario::override_config(&cfg, &overrides)?;
            }
            execute(cfg, out, None)
        }
        Command::Preset { name, out, overrides } => {
            let mut cfg = scenario::preset(&name)?;
            if !overrides.is_empty() {
                cfg = scenario::override_config(&cfg, &overrides)?;
            }
            execute(cfg, out, Some(name))
        }
        Command::Rates { config } => {
            let text = std::fs::read_to_string(&config)?;
            let sys = scenario::assemble(Config::from_json(&text)?)?;
            #[derive(Serialize)]
            struct Rates<'a> {
                config: &'a Config,
                derived: &'a DerivedSummary,
            }
            let doc = Rates { config: &sys.config, derived: &sys.derived };
            println!(
                "{}",
                serde_json::to_string_pretty(&doc).expect("rates serialization cannot fail")
            );
            Ok(0)
        }
        Command::Check => {
            let results = acceptance::run_all();
            let failures = results.iter().filter(|c| !c.passed).count();
            for c in &results {
                println!(
                    "{} {} - {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.details
                );
            }
            if failures > 0 {
                println!("{failures} of {} criteria failed", results.len());
                Ok(1)
            } else {
                println!("all {} criteria passed", results.len());
                Ok(0)
            }
        }
    }
}

/// Run a config; `--out` beats the config's own output block, and a preset
/// name becomes the default file prefix.
fn execute(mut cfg: Config, out_dir: Option<PathBuf>, preset_name: Option<String>) -> Result<i32> {
    if let Some(dir) = out_dir {
        let prefix = cfg
            .output
            .as_ref()
            .map(|o| o.prefix.clone())
            .or(preset_name)
            .unwrap_or_else(|| "run".into());
        cfg.output = Some(OutputSpec { dir: dir.to_string_lossy().into_owned(), prefix });
    }
    let result = scenario::run(cfg)?;
    match result.system.config.output.clone() {
        Some(spec) => {
            let files = output::write_all(&result, Path::new(&spec.dir), &spec.prefix)?;
            for f in &files {
                println!("{}", f.display());
            }
        }
        None => {
            print!("{}", output::summary_json(&result, &[]));
        }
    }
    Ok(0)
}
