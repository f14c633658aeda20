use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use psse::grid::{build_admittance, NetworkCase};
use psse::harness::{run, ExperimentConfig, RunOptions};
use psse::PsseError;

#[derive(Parser)]
#[command(name = "psse", version, about = "Robust LAV power system state estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every trial and solver of an experiment config.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Number of trials (overrides the config).
        #[arg(long)]
        trials: Option<usize>,
        /// Master seed (overrides the config).
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated solver names to keep.
        #[arg(long, value_delimiter = ',')]
        solvers: Option<Vec<String>>,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// Print bus, branch and measurement counts of a case file.
    CaseInfo { case: PathBuf },
}

fn config_exit(e: &PsseError) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        PsseError::Io { .. } => ExitCode::from(4),
        _ => ExitCode::from(2),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            trials,
            seed,
            solvers,
        } => {
            let opts = RunOptions {
                out,
                trials,
                seed,
                solvers,
            };
            match run(&config, &opts) {
                Ok(summary) => {
                    for point in &summary.points {
                        println!("[{}] M = {}", point.label, point.measurements);
                        for s in &point.solvers {
                            println!(
                                "  {:<16} rmse {:.3e} ± {:.1e}  iters {:.1}  time {:.3}s",
                                s.name,
                                s.final_rmse.mean,
                                s.final_rmse.std,
                                s.iterations.mean,
                                s.seconds.mean
                            );
                        }
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
        Command::Validate { config } => match ExperimentConfig::load(&config) {
            Ok(cfg) => {
                println!(
                    "ok: {} solver(s), {} trial(s), case {}",
                    cfg.solvers.len(),
                    cfg.trials,
                    cfg.case.display()
                );
                ExitCode::SUCCESS
            }
            Err(e) => config_exit(&e),
        },
        Command::CaseInfo { case } => match NetworkCase::from_file(&case) {
            Ok(c) => {
                let model = build_admittance(&c);
                let ref_id = c.buses[c.reference_index()].external_id;
                println!("buses            {}", c.n());
                println!("branches         {} in service of {}", c.l(), c.branches.len());
                println!("reference bus    {ref_id}");
                println!("base MVA         {}", c.base_mva);
                println!("max degree       {}", c.degrees().iter().max().copied().unwrap_or(0));
                println!("Y nonzeros       {}", model.y.nnz());
                println!("all-kinds M      {}", 3 * c.n() + 4 * c.l());
                ExitCode::SUCCESS
            }
            Err(e) => config_exit(&e),
        },
    }
}
