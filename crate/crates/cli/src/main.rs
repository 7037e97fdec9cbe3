use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use inversa_cli::config::{load_config, read_config_value, ConfigError};
use inversa_cli::sweep::RowStatus;
use inversa_cli::{exit, parse_axis, resolve_output_dir, run_experiment, sweep, RunStatus};

#[derive(Parser)]
#[command(name = "inversa", version, about = "Run logistic and porous-medium experiments from JSON configs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment.
    Run { config: PathBuf },
    /// Run a template once per value of one config field.
    Sweep {
        template: PathBuf,
        /// `path=v1,v2,...`, e.g. `settings.beta0=0.5,1,1.5`.
        #[arg(long)]
        axis: String,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn config_failure(e: ConfigError) -> ExitCode {
    eprintln!("error: {e}");
    code(exit::INVALID_CONFIG)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { config } => match load_config(&config) {
            Ok(cfg) => {
                println!("ok: {:?} config, output to {}", cfg.problem, resolve_output_dir(&cfg).display());
                code(exit::OK)
            }
            Err(e) => config_failure(e),
        },
        Command::Run { config } => {
            let cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => return config_failure(e),
            };
            let out = resolve_output_dir(&cfg);
            match run_experiment(&cfg, &out) {
                Ok(s) => {
                    println!("{}", s.header.join(","));
                    println!("{}", s.row.join(","));
                    println!("wrote {}", out.display());
                    code(if s.status == RunStatus::Ok { exit::OK } else { exit::NOT_CONVERGED })
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    code(exit::FAILURE)
                }
            }
        }
        Command::Sweep { template, axis } => {
            let value = match read_config_value(&template) {
                Ok(v) => v,
                Err(e) => return config_failure(e),
            };
            let (name, values) = match parse_axis(&axis) {
                Ok(a) => a,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    return code(exit::INVALID_CONFIG);
                }
            };
            // validate the template itself before spending time on rows
            let cfg = match inversa_cli::parse_config(&value) {
                Ok(c) => c,
                Err(e) => return config_failure(e),
            };
            let out = resolve_output_dir(&cfg);
            match sweep(&value, &name, &values, &out) {
                Ok(rows) => {
                    for r in &rows {
                        println!("{} = {}: {:?}{}", name, r.value, r.status, r.error.as_deref().map(|e| format!(" ({e})")).unwrap_or_default());
                    }
                    println!("wrote {}", out.display());
                    let all_ok = rows.iter().all(|r| r.status == RowStatus::Ok);
                    code(if all_ok { exit::OK } else { exit::NOT_CONVERGED })
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    code(exit::FAILURE)
                }
            }
        }
    }
}
