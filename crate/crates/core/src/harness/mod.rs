//! Experiment driver: config loading, the per-command pipelines, and the
//! files they write.

mod config;
mod output;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{initial_heads, DatasetSource, ExperimentConfig, InitScheme, TopologySpec};
pub use output::{write_trace_csv, TrajectoryWriter, TRACE_HEADER, TRAJECTORY_HEADER};

use crate::dataset::{bounding_box, fmt_f64, FederatedDataset, NORMAL_METHOD, PRNG_NAME};
use crate::error::{Error, Result};
use crate::graph::Topology;
use crate::lloyd::{self, GlobalPartition, HeadTuple, LloydIteration};
use crate::nkmeans::{
    consensus_bound, consensus_deviation, cost_j, cost_q, gap_bound, reassign_all, Engine, LocalClustering, NetworkHeads,
    RunOutcome, Violations, BOX_SLACK,
};
use crate::verify::{self, GapCheck, GenMinReport};
use output::{create_dir, write_json};

/// The terminal state is re-verified at this multiple of `head_tol`.
pub const VERIFY_TOL_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Invalid,
    InvariantViolation,
    GuardExceeded,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Invalid => 2,
            Status::InvariantViolation => 3,
            Status::GuardExceeded => 4,
        }
    }
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::MaxRoundsExceeded(_) | Error::MaxItersExceeded { .. } | Error::TooLarge { .. } => 4,
        Error::Io { .. } => 1,
        _ => 2,
    }
}

/// Directory name for one ρ value.
pub fn rho_dir(out: &Path, rho: f64) -> PathBuf {
    out.join(format!("rho_{rho}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalState {
    pub rho: f64,
    pub round: usize,
    pub heads: NetworkHeads,
    /// Nearest-head clustering of `heads`.
    pub clustering: LocalClustering,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub rho: f64,
    pub status: Status,
    pub alpha: f64,
    pub alpha_max: f64,
    pub c_alpha: f64,
    pub lambda2: f64,
    pub lambda_max: f64,
    pub d_min: usize,
    pub rounds_run: usize,
    pub converged: bool,
    pub partition_convergence_round: Option<usize>,
    pub cost_j: f64,
    pub cost_q: f64,
    pub rho_cost_q: f64,
    pub consensus_dev: f64,
    pub rho_consensus_dev: f64,
    pub consensus_bound: f64,
    pub heads_in_data_box: bool,
    pub consensus_within_bound: bool,
    pub gap_bound: f64,
    pub violations: Violations,
    pub report: GenMinReport,
    pub prng: &'static str,
    pub normal_method: &'static str,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub summary: RunSummary,
    pub outcome: RunOutcome,
    pub dir: PathBuf,
}

/// Runs NK-means at one ρ and writes `rho_<ρ>/` under `out`.
///
/// A run that hits `max_rounds` still writes its partial outputs and
/// reports [`Status::GuardExceeded`].
pub fn run_single(cfg: &ExperimentConfig, d: &FederatedDataset, t: &Topology, rho: f64, out: &Path) -> Result<RunReport> {
    let engine = Engine::new(d, t, rho, cfg.alpha)?;
    let init = cfg.initial_heads(d)?;
    let dir = rho_dir(out, rho);
    create_dir(&dir)?;

    let mut traj = TrajectoryWriter::create(&dir.join("trajectory.csv"), cfg.trajectory_every)?;
    let mut traj_err = None;
    let res = engine.run_with_observer(&init, &cfg.run_config(rho), |round, x| {
        if traj_err.is_none() {
            traj_err = traj.observe(round, x).err();
        }
    });
    if let Some(e) = traj_err {
        return Err(e);
    }
    let (outcome, guard) = match res {
        Ok(o) => (o, false),
        Err(Error::MaxRoundsExceeded(o)) => (*o, true),
        Err(e) => return Err(e),
    };
    traj.write(outcome.rounds_run, &outcome.heads)?;
    traj.finish()?;
    write_trace_csv(&dir.join("trace.csv"), &outcome.trace)?;

    let x = &outcome.heads;
    let c = reassign_all(x, d);
    let report = verify::is_generalized_minimum(x, &c, t, d, rho, VERIFY_TOL_FACTOR * cfg.head_tol)?;
    write_json(&dir.join("report.json"), &report)?;
    write_json(
        &dir.join("final_state.json"),
        &FinalState {
            rho,
            round: outcome.rounds_run,
            heads: x.clone(),
            clustering: c.clone(),
        },
    )?;

    let status = if guard {
        Status::GuardExceeded
    } else if outcome.violations.any() || !report.passes {
        Status::InvariantViolation
    } else {
        Status::Ok
    };
    let spec = engine.spectrum();
    let data_box = bounding_box(d, &[])?;
    let heads_in_data_box = x.all_heads().all(|h| data_box.contains(h, BOX_SLACK));
    let dev = consensus_deviation(x);
    let bound = consensus_bound(t, d, rho);
    let q = cost_q(x, t, d, rho)?;
    let summary = RunSummary {
        rho,
        status,
        alpha: outcome.alpha,
        alpha_max: crate::nkmeans::alpha_max(t, d, rho),
        c_alpha: outcome.c_alpha,
        lambda2: spec.lambda2(),
        lambda_max: spec.lambda_max(),
        d_min: spec.d_min,
        rounds_run: outcome.rounds_run,
        converged: outcome.converged,
        partition_convergence_round: outcome.partition_convergence_round,
        cost_j: cost_j(x, &c, t, d, rho)?,
        cost_q: q,
        rho_cost_q: rho * q,
        consensus_dev: dev,
        rho_consensus_dev: rho * dev,
        consensus_bound: bound,
        heads_in_data_box,
        consensus_within_bound: dev <= bound,
        gap_bound: gap_bound(t, d, rho),
        violations: outcome.violations,
        report,
        prng: PRNG_NAME,
        normal_method: NORMAL_METHOD,
    };
    write_json(&dir.join("run_summary.json"), &summary)?;
    Ok(RunReport { summary, outcome, dir })
}

/// `run`: one NK-means run per configured ρ.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<(Status, Vec<RunReport>)> {
    let d = cfg.load_dataset()?;
    let t = cfg.build_topology()?;
    let reports = cfg
        .rho
        .iter()
        .map(|&rho| run_single(cfg, &d, &t, rho, &cfg.output_dir))
        .collect::<Result<Vec<_>>>()?;
    let status = reports.iter().map(|r| r.summary.status).max().unwrap_or(Status::Ok);
    Ok((status, reports))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub rho: f64,
    pub status: Status,
    pub result: std::result::Result<RunSummary, String>,
}

pub const SWEEP_HEADER: [&str; 14] = [
    "rho",
    "status",
    "rounds_run",
    "converged",
    "partition_convergence_round",
    "cost_Q",
    "rho_cost_Q",
    "consensus_dev",
    "rho_consensus_dev",
    "consensus_bound",
    "consensus_within_bound",
    "gen_min_passes",
    "cost_J",
    "error",
];

/// `sweep`: runs every ρ in parallel, keeps going past per-ρ failures, and
/// writes `sweep_summary.csv` in request order.
pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<(Status, Vec<SweepRow>)> {
    let d = cfg.load_dataset()?;
    let t = cfg.build_topology()?;
    create_dir(&cfg.output_dir)?;
    let rows: Vec<SweepRow> = cfg
        .rho
        .par_iter()
        .map(|&rho| match run_single(cfg, &d, &t, rho, &cfg.output_dir) {
            Ok(r) => SweepRow {
                rho,
                status: r.summary.status,
                result: Ok(r.summary),
            },
            Err(e) => SweepRow {
                rho,
                status: if exit_code(&e) == 4 { Status::GuardExceeded } else { Status::Invalid },
                result: Err(e.to_string()),
            },
        })
        .collect();

    let path = cfg.output_dir.join("sweep_summary.csv");
    let f = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = csv::Writer::from_writer(f);
    w.write_record(SWEEP_HEADER)?;
    for row in &rows {
        let rec: Vec<String> = match &row.result {
            Ok(s) => vec![
                fmt_f64(s.rho),
                status_name(s.status).into(),
                s.rounds_run.to_string(),
                s.converged.to_string(),
                s.partition_convergence_round.map(|r| r.to_string()).unwrap_or_default(),
                fmt_f64(s.cost_q),
                fmt_f64(s.rho_cost_q),
                fmt_f64(s.consensus_dev),
                fmt_f64(s.rho_consensus_dev),
                fmt_f64(s.consensus_bound),
                s.consensus_within_bound.to_string(),
                s.report.passes.to_string(),
                fmt_f64(s.cost_j),
                String::new(),
            ],
            Err(msg) => {
                let mut v = vec![fmt_f64(row.rho), "error".into()];
                v.extend(std::iter::repeat_n(String::new(), SWEEP_HEADER.len() - 3));
                v.push(msg.clone());
                v
            }
        };
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let status = rows.iter().map(|r| r.status).max().unwrap_or(Status::Ok);
    Ok((status, rows))
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::Ok => "ok",
        Status::Invalid => "invalid",
        Status::InvariantViolation => "invariant_violation",
        Status::GuardExceeded => "max_rounds_exceeded",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub prng: String,
    pub normal_method: String,
    pub seed: u64,
    pub spec: crate::dataset::MixtureSpec,
}

/// `generate`: writes `dataset.json` and `dataset.provenance.json`.
pub fn cmd_generate(cfg: &ExperimentConfig) -> Result<FederatedDataset> {
    let DatasetSource::Mixture { spec, seed } = &cfg.dataset else {
        return Err(Error::InvalidParam("generate needs a mixture dataset source".into()));
    };
    let d = crate::dataset::generate_mixture(spec, *seed)?;
    create_dir(&cfg.output_dir)?;
    output::write_text(&cfg.output_dir.join("dataset.json"), &(d.to_json() + "\n"))?;
    write_json(
        &cfg.output_dir.join("dataset.provenance.json"),
        &Provenance {
            prng: PRNG_NAME.into(),
            normal_method: NORMAL_METHOD.into(),
            seed: *seed,
            spec: spec.clone(),
        },
    )?;
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LloydReport {
    pub init: HeadTuple,
    pub heads: HeadTuple,
    pub sorted_heads: HeadTuple,
    pub partition: GlobalPartition,
    pub cost: f64,
    pub iters: usize,
    pub is_lloyd_minimum: bool,
    pub history: Vec<LloydIteration>,
}

/// `lloyd`: centralized Lloyd on the joint data. The initial heads are the
/// shared init, or agent 0's random draw.
pub fn cmd_lloyd(cfg: &ExperimentConfig) -> Result<LloydReport> {
    let d = cfg.load_dataset()?;
    let init = cfg.initial_heads(&d)?.agent(0).clone();
    let r = lloyd::lloyd_run(&d, cfg.k, &init, cfg.max_rounds)?;
    let report = LloydReport {
        sorted_heads: r.heads.sorted(),
        cost: r.cost(&d),
        is_lloyd_minimum: lloyd::is_lloyd_minimum(&r.heads, &r.partition, &d, VERIFY_TOL_FACTOR * cfg.head_tol),
        init,
        heads: r.heads,
        partition: r.partition,
        iters: r.iters,
        history: r.history,
    };
    create_dir(&cfg.output_dir)?;
    write_json(&cfg.output_dir.join("lloyd.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRho {
    pub rho: f64,
    pub q_heads: NetworkHeads,
    pub q_clustering: LocalClustering,
    pub gap: GapCheck,
    /// `d(x̆, Z_g)`, the ℓ∞ distance of the penalized optimum to the
    /// centralized minimizers.
    pub distance_to_z_g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub k: usize,
    pub n: usize,
    pub f_star: f64,
    pub z_g: Vec<HeadTuple>,
    pub per_rho: Vec<OracleRho>,
}

/// `oracle`: exhaustive centralized and penalized optima for every ρ.
pub fn cmd_oracle(cfg: &ExperimentConfig) -> Result<OracleReport> {
    let d = cfg.load_dataset()?;
    let t = cfg.build_topology()?;
    let central = lloyd::brute_force_global(&d, cfg.k)?;
    let per_rho = cfg
        .rho
        .iter()
        .map(|&rho| {
            let penal = verify::brute_force_q_global(&t, &d, cfg.k, rho)?;
            Ok(OracleRho {
                rho,
                gap: verify::gap_check_from(&t, &d, rho, central.cost, &penal),
                distance_to_z_g: verify::network_distance_to_set(&penal.heads, &central.minimizers),
                q_heads: penal.heads,
                q_clustering: penal.clustering,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = OracleReport {
        k: cfg.k,
        n: d.len(),
        f_star: central.cost,
        z_g: central.minimizers,
        per_rho,
    };
    create_dir(&cfg.output_dir)?;
    write_json(&cfg.output_dir.join("oracle.json"), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub rho: f64,
    pub tol: f64,
    pub report: GenMinReport,
    pub weighted_centroid: bool,
    pub cost_equivalence: bool,
}

/// `verify`: checks a saved `final_state.json` against the config's data
/// and topology.
pub fn cmd_verify(cfg: &ExperimentConfig, state: &Path, tol: Option<f64>) -> Result<(Status, VerifyReport)> {
    let d = cfg.load_dataset()?;
    let t = cfg.build_topology()?;
    let text = std::fs::read_to_string(state).map_err(|e| Error::io(state, e))?;
    let s: FinalState = serde_json::from_str(&text).map_err(|e| Error::json(state.display().to_string(), e))?;
    let tol = tol.unwrap_or(VERIFY_TOL_FACTOR * cfg.head_tol);
    let report = verify::is_generalized_minimum(&s.heads, &s.clustering, &t, &d, s.rho, tol)?;
    let v = VerifyReport {
        rho: s.rho,
        tol,
        report,
        weighted_centroid: verify::weighted_centroid_check(&s.heads, &s.clustering, &d, tol),
        cost_equivalence: verify::cost_equivalence_check(&s.heads, &s.clustering, &d, tol),
    };
    let out = state.parent().unwrap_or(Path::new(".")).join("verify_report.json");
    write_json(&out, &v)?;
    let status = if report.passes { Status::Ok } else { Status::InvariantViolation };
    Ok((status, v))
}
