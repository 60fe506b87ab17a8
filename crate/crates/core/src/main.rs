use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cohswap::scenario::{builtin, run_path, run_text, RunOptions, BUILTINS};

#[derive(Parser)]
#[command(
    name = "cohswap",
    version,
    about = "Induced-coherence and coherence-swapping simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its outputs.
    Run {
        /// Scenario file, or the name of a built-in scenario.
        config: Option<PathBuf>,
        /// Scenario file (alternative to the positional argument).
        #[arg(long = "config", value_name = "PATH", conflicts_with_all = ["config", "builtin"])]
        config_flag: Option<PathBuf>,
        /// Run a built-in scenario by name.
        #[arg(long, value_name = "NAME", conflicts_with = "config")]
        builtin: Option<String>,
        /// Output directory.
        #[arg(long, env = "COHSWAP_OUT_DIR", default_value = "cohswap-out")]
        out_dir: PathBuf,
        /// Override the scan grid size.
        #[arg(long, value_name = "N")]
        grid: Option<usize>,
        /// Override the quadrature refinement tolerance.
        #[arg(long, value_name = "TOL")]
        quad_tol: Option<f64>,
        /// Recorded in the manifest; runs are deterministic.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List the built-in scenarios.
    Builtins,
    /// Print a built-in scenario.
    Show { name: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Builtins => {
            for (name, _) in BUILTINS {
                println!("{name}");
            }
            ExitCode::SUCCESS
        }
        Command::Show { name } => match builtin(&name) {
            Some(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            None => {
                eprintln!("error: no built-in scenario named {name:?}");
                ExitCode::from(2)
            }
        },
        Command::Run {
            config,
            config_flag,
            builtin: builtin_name,
            out_dir,
            grid,
            quad_tol,
            seed,
        } => {
            let opts = RunOptions {
                out_dir,
                grid,
                quad_tol,
                seed,
            };
            let result = match (config.or(config_flag), builtin_name) {
                (Some(path), _) => run_path(&path, &opts),
                (None, Some(name)) => match builtin(&name) {
                    Some(text) => run_text(text, &opts),
                    None => {
                        eprintln!("error: no built-in scenario named {name:?}");
                        return ExitCode::from(2);
                    }
                },
                (None, None) => {
                    eprintln!("error: give a scenario file or --builtin NAME");
                    return ExitCode::from(2);
                }
            };
            match result {
                Ok(summary) => {
                    if let Some(fit) = &summary.fit {
                        for f in &fit.fits {
                            let offset = f
                                .phase_offset
                                .map_or("n/a".to_string(), |o| format!("{o:.6}"));
                            println!(
                                "{}: V = {:.6}, offset = {offset}",
                                f.pattern_id, f.visibility
                            );
                        }
                    }
                    for r in &summary.visibility {
                        println!(
                            "sigma_f/sigma_p = {:.4}: V_closed = {:.6}, V_quad = {:.6}",
                            r.sigma_f / r.sigma_p,
                            r.V_closed,
                            r.V_quad
                        );
                    }
                    for p in &summary.written {
                        println!("wrote {}", p.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
    }
}
