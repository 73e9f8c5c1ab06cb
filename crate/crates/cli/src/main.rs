use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use vessel_cli::checks::catalog;
use vessel_cli::report::{summary_lines, write_tables};
use vessel_cli::{run_scenario, RunOptions, Scenario};

/// Scenario-driven verification of theta kernels, model operators and vessels.
#[derive(Parser)]
#[command(name = "vessel", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run every check of a scenario file (TOML or JSON).
    Run {
        scenario: PathBuf,
        /// Seed of the per-check sample streams.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report path; `-` writes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for CSV tables.
        #[arg(long)]
        csv_dir: Option<PathBuf>,
        /// Multiplies every tolerance.
        #[arg(long, default_value_t = 1.0)]
        tol_scale: f64,
        /// Suppress the per-check summary on stderr.
        #[arg(long)]
        quiet: bool,
    },
    /// List the check catalog.
    ListChecks {
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::ListChecks { json } => {
            if json {
                let v: Vec<_> = catalog()
                    .iter()
                    .map(|d| serde_json::json!({"id": d.id, "modules": d.modules, "anchor": d.anchor, "default_tol": d.default_tol}))
                    .collect();
                println!("{}", serde_json::to_string_pretty(&v).unwrap());
            } else {
                for d in catalog() {
                    println!("{:<24} {:<8.0e} {:<34} {}", d.id, d.default_tol, d.modules.join(","), d.anchor);
                }
            }
            ExitCode::SUCCESS
        }
        Cmd::Run { scenario, seed, out, csv_dir, tol_scale, quiet } => {
            if !(tol_scale > 0.0 && tol_scale.is_finite()) {
                eprintln!("--tol-scale must be positive and finite");
                return ExitCode::from(2);
            }
            let sc = match Scenario::load(&scenario) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(2);
                }
            };
            let outcome = run_scenario(&sc, &RunOptions { seed, tol_scale });
            let json = serde_json::to_string_pretty(&outcome.report).unwrap();
            match out.or_else(|| sc.output.report.clone()) {
                Some(p) if p.as_os_str() != "-" => {
                    if let Err(e) = std::fs::write(&p, json + "\n") {
                        eprintln!("{}: {e}", p.display());
                        return ExitCode::from(2);
                    }
                }
                _ => println!("{json}"),
            }
            if let Some(dir) = csv_dir.or_else(|| sc.output.csv_dir.clone()) {
                if let Err(e) = write_tables(&dir, &outcome.tables) {
                    eprintln!("{}: {e}", dir.display());
                    return ExitCode::from(2);
                }
            }
            if !quiet {
                for l in summary_lines(&outcome.report.payload) {
                    eprintln!("{l}");
                }
            }
            if outcome.report.payload.summary.all_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    }
}
