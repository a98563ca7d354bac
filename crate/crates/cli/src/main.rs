use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nkmeans_core::harness::{self, ExperimentConfig, Status};
use nkmeans_core::Result;

#[derive(Parser)]
#[command(name = "nkmeans", version, about = "Networked K-means experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replaces every seed in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct WithRho {
    #[command(flatten)]
    common: Common,
    /// ρ values to use instead of the config's list (repeatable).
    #[arg(long)]
    rho: Vec<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the mixture dataset and write it with its provenance.
    Generate(Common),
    /// Run NK-means at each ρ.
    Run(WithRho),
    /// Run centralized Lloyd on the joint data.
    Lloyd(Common),
    /// Run NK-means over a ρ list and summarize.
    Sweep(WithRho),
    /// Exhaustive centralized and penalized optima (tiny instances only).
    Oracle(WithRho),
    /// Check a saved final state.
    Verify {
        #[command(flatten)]
        common: Common,
        /// `final_state.json` written by `run`.
        #[arg(long)]
        state: PathBuf,
        /// Residual tolerance; defaults to 10 × head_tol.
        #[arg(long)]
        tol: Option<f64>,
    },
}

fn load(common: &Common, rho: &[f64]) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.override_seeds(seed);
    }
    if let Some(out) = &common.out {
        cfg.output_dir.clone_from(out);
    }
    if !rho.is_empty() {
        cfg.rho = rho.to_vec();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cmd: Command) -> Result<Status> {
    match cmd {
        Command::Generate(c) => {
            let cfg = load(&c, &[])?;
            let d = harness::cmd_generate(&cfg)?;
            println!("wrote {} points to {}", d.len(), cfg.output_dir.join("dataset.json").display());
            Ok(Status::Ok)
        }
        Command::Run(a) => {
            let cfg = load(&a.common, &a.rho)?;
            let (status, reports) = harness::cmd_run(&cfg)?;
            for r in &reports {
                let s = &r.summary;
                println!(
                    "rho={} status={:?} rounds={} converged={} partition_round={:?} cost_Q={:.6e} consensus_dev={:.3e}",
                    s.rho, s.status, s.rounds_run, s.converged, s.partition_convergence_round, s.cost_q, s.consensus_dev
                );
            }
            Ok(status)
        }
        Command::Lloyd(c) => {
            let cfg = load(&c, &[])?;
            let r = harness::cmd_lloyd(&cfg)?;
            println!("iters={} cost={:.6e} heads={:?}", r.iters, r.cost, r.sorted_heads.heads());
            Ok(Status::Ok)
        }
        Command::Sweep(a) => {
            let cfg = load(&a.common, &a.rho)?;
            let (status, rows) = harness::cmd_sweep(&cfg)?;
            for row in &rows {
                match &row.result {
                    Ok(s) => println!(
                        "rho={} status={:?} rounds={} rho*consensus_dev={:.3e}",
                        row.rho, s.status, s.rounds_run, s.rho_consensus_dev
                    ),
                    Err(e) => println!("rho={} error: {e}", row.rho),
                }
            }
            Ok(status)
        }
        Command::Oracle(a) => {
            let cfg = load(&a.common, &a.rho)?;
            let r = harness::cmd_oracle(&cfg)?;
            println!("F*={:.6e} |Z_g|={}", r.f_star, r.z_g.len());
            for p in &r.per_rho {
                println!(
                    "rho={} Q*={:.6e} gap lhs={:.6e} rhs={:.6e} holds={} d(Z_g)={:.3e}",
                    p.rho, p.gap.q_cost, p.gap.lhs, p.gap.rhs, p.gap.holds, p.distance_to_z_g
                );
            }
            Ok(if r.per_rho.iter().all(|p| p.gap.holds) {
                Status::Ok
            } else {
                Status::InvariantViolation
            })
        }
        Command::Verify { common, state, tol } => {
            let cfg = load(&common, &[])?;
            let (status, v) = harness::cmd_verify(&cfg, &state, tol)?;
            println!(
                "passes={} nearest_violation={:.3e} fixed_point_residual={:.3e}",
                v.report.passes, v.report.nearest_violation, v.report.fixed_point_residual
            );
            Ok(status)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(status) => ExitCode::from(status.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(harness::exit_code(&e) as u8)
        }
    }
}
