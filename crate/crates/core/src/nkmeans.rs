//! The networked K-means (NK-means) iteration.
//!
//! Every round each agent `m`
//!
//! 1. reassigns its local points to the nearest of its own heads, then
//! 2. moves each head toward the blend
//!    `μ_m^k = ((1/ρ) Σ_{y ∈ C_m^k} y + Σ_{l ∈ Ω_m} x_l^k) / ((1/ρ)|C_m^k| + |Ω_m|)`
//!    via `x ← x − α (x − μ)`.
//!
//! Rounds are synchronous: every agent reads the same round-start snapshot,
//! so the agent visiting order never changes the result.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{bounding_box, dist2, hull_radius, validate_k_distinct, BoundingBox, FederatedDataset, Point};
use crate::error::{Error, Result};
use crate::graph::{LaplacianSpectrum, Topology};
use crate::lloyd::HeadTuple;

pub const DEFAULT_HEAD_TOL: f64 = 1e-10;
pub const DEFAULT_STABILITY_WINDOW: usize = 10;
/// Relative slack allowed on descent and monotonicity checks.
pub const DESCENT_REL_SLACK: f64 = 1e-9;
/// Absolute slack on the hull-box boundedness check.
pub const BOX_SLACK: f64 = 1e-12;

/// Per-agent head tuples: the stacked state `x ∈ ℝ^{MKp}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NetworkHeads {
    agents: Vec<HeadTuple>,
}

impl NetworkHeads {
    pub fn new(agents: Vec<HeadTuple>) -> Result<Self> {
        let first = agents
            .first()
            .ok_or_else(|| Error::InvalidParam("network heads need at least one agent".into()))?;
        let (k, p) = (first.k(), first.dim());
        for a in &agents {
            if a.k() != k {
                return Err(Error::DimensionMismatch {
                    expected: k,
                    found: a.k(),
                });
            }
            if a.dim() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: a.dim(),
                });
            }
        }
        Ok(NetworkHeads { agents })
    }

    /// Every agent holds `shared`.
    pub fn consensus(shared: &HeadTuple, num_agents: usize) -> Self {
        NetworkHeads {
            agents: vec![shared.clone(); num_agents],
        }
    }

    /// Scalar heads: `values[m][k]`.
    pub fn from_scalars(values: &[&[f64]]) -> Result<Self> {
        Self::new(
            values
                .iter()
                .map(|v| HeadTuple::from_scalars(v))
                .collect::<Result<_>>()?,
        )
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn k(&self) -> usize {
        self.agents[0].k()
    }

    pub fn dim(&self) -> usize {
        self.agents[0].dim()
    }

    pub fn agents(&self) -> &[HeadTuple] {
        &self.agents
    }

    pub fn agent(&self, m: usize) -> &HeadTuple {
        &self.agents[m]
    }

    pub fn head(&self, m: usize, k: usize) -> &[f64] {
        self.agents[m].head(k)
    }

    /// All heads of all agents.
    pub fn all_heads(&self) -> impl Iterator<Item = &Point> {
        self.agents.iter().flat_map(|a| a.heads().iter())
    }

    pub fn max_abs_diff(&self, other: &NetworkHeads) -> f64 {
        self.agents
            .iter()
            .zip(&other.agents)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }

    /// Squared ℓ₂ distance between stacked vectors.
    pub fn dist2(&self, other: &NetworkHeads) -> f64 {
        self.all_heads()
            .zip(other.all_heads())
            .map(|(a, b)| dist2(a, b))
            .sum()
    }

    pub(crate) fn check_shape(&self, d: &FederatedDataset, t: &Topology) -> Result<()> {
        if self.num_agents() != t.num_agents() {
            return Err(Error::DimensionMismatch {
                expected: t.num_agents(),
                found: self.num_agents(),
            });
        }
        if d.num_agents() != t.num_agents() {
            return Err(Error::DimensionMismatch {
                expected: t.num_agents(),
                found: d.num_agents(),
            });
        }
        if self.dim() != d.dim() {
            return Err(Error::DimensionMismatch {
                expected: d.dim(),
                found: self.dim(),
            });
        }
        Ok(())
    }
}

/// Per-agent local clusterings `C_m`, as cluster indices of local points.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LocalClustering {
    assignments: Vec<Vec<usize>>,
}

impl LocalClustering {
    pub fn new(assignments: Vec<Vec<usize>>, d: &FederatedDataset, k: usize) -> Result<Self> {
        crate::lloyd::GlobalPartition::new(assignments.clone(), d, k)?;
        Ok(LocalClustering { assignments })
    }

    pub fn assignments(&self) -> &[Vec<usize>] {
        &self.assignments
    }

    pub fn agent(&self, m: usize) -> &[usize] {
        &self.assignments[m]
    }

    /// `|C_m^k|` for every agent and cluster.
    pub fn sizes(&self, k: usize) -> Vec<Vec<usize>> {
        self.assignments
            .iter()
            .map(|a| {
                let mut s = vec![0; k];
                a.iter().for_each(|&c| s[c] += 1);
                s
            })
            .collect()
    }

    /// The induced global partition `P^k = ∪_m C_m^k`.
    pub fn generated_partition(&self) -> crate::lloyd::GlobalPartition {
        crate::lloyd::GlobalPartition::from_raw(self.assignments.clone())
    }

    pub(crate) fn check_shape(&self, d: &FederatedDataset, k: usize) -> Result<()> {
        crate::lloyd::GlobalPartition::new(self.assignments.clone(), d, k).map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alpha {
    /// Half of the admissible upper bound, where `c(α)` peaks.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub rho: f64,
    pub alpha: Alpha,
    pub max_rounds: usize,
    /// Stop threshold on `‖x_t − μ_{t+1}‖∞`.
    pub head_tol: f64,
    /// Consecutive partition-stable rounds required before stopping.
    pub stability_window: usize,
    /// Keep every n-th round in the trace (partition changes and the final
    /// round are always kept). Invariants are checked every round.
    pub record_every: usize,
}

impl RunConfig {
    pub fn new(rho: f64) -> Self {
        RunConfig {
            rho,
            alpha: Alpha::Auto,
            max_rounds: 1_000_000,
            head_tol: DEFAULT_HEAD_TOL,
            stability_window: DEFAULT_STABILITY_WINDOW,
            record_every: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round: usize,
    pub cost_j: f64,
    pub cost_q: f64,
    /// `J_t − c(α)‖x_t − μ_{t+1}‖² − J_{t+1}`; non-negative up to rounding.
    pub descent_slack: f64,
    /// `‖x_t − μ_{t+1}‖`.
    pub innovation_norm: f64,
    pub consensus_dev: f64,
    pub partition_changed: bool,
}

/// Count and first occurrence of a runtime invariant violation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ViolationCount {
    pub count: usize,
    pub first_round: Option<usize>,
    /// Largest violation magnitude seen.
    pub worst: f64,
}

impl ViolationCount {
    fn record(&mut self, round: usize, amount: f64) {
        self.count += 1;
        self.first_round.get_or_insert(round);
        self.worst = self.worst.max(amount);
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Violations {
    /// Per-round descent of `J` by at least `c(α)‖x − μ‖²`.
    pub descent: ViolationCount,
    /// `Q` non-increasing.
    pub monotone_q: ViolationCount,
    /// Heads stay inside the box of the data and the initial heads.
    pub boundedness: ViolationCount,
}

impl Violations {
    pub fn any(&self) -> bool {
        self.descent.count + self.monotone_q.count + self.boundedness.count > 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub heads: NetworkHeads,
    pub clustering: LocalClustering,
    pub trace: Vec<RoundMetrics>,
    /// Last round whose clustering differed from the previous one (0 if the
    /// clustering never changed); `None` unless the run converged.
    pub partition_convergence_round: Option<usize>,
    pub rounds_run: usize,
    pub converged: bool,
    pub alpha: f64,
    pub c_alpha: f64,
    pub violations: Violations,
}

/// Upper end of the admissible step size: `d_min / ((1/ρ) N* + λ_M(L))`.
pub fn alpha_max(t: &Topology, d: &FederatedDataset, rho: f64) -> f64 {
    alpha_max_with(&t.spectrum(), d.max_agent_len(), rho)
}

fn alpha_max_with(s: &LaplacianSpectrum, n_star: usize, rho: f64) -> f64 {
    s.d_min as f64 / (n_star as f64 / rho + s.lambda_max())
}

/// Descent constant `c(α) = 2α (d_min − α ((1/ρ) N* + λ_M(L)))`.
pub fn c_alpha(t: &Topology, d: &FederatedDataset, rho: f64, alpha: f64) -> f64 {
    c_alpha_with(&t.spectrum(), d.max_agent_len(), rho, alpha)
}

fn c_alpha_with(s: &LaplacianSpectrum, n_star: usize, rho: f64, alpha: f64) -> f64 {
    2.0 * alpha * (s.d_min as f64 - alpha * (n_star as f64 / rho + s.lambda_max()))
}

/// Nearest-head assignment of an agent's points (lowest index on ties).
pub fn reassign(x_m: &HeadTuple, d_m: &[Point]) -> Vec<usize> {
    d_m.iter().map(|y| x_m.nearest(y).0).collect()
}

pub fn reassign_all(x: &NetworkHeads, d: &FederatedDataset) -> LocalClustering {
    LocalClustering {
        assignments: x
            .agents()
            .iter()
            .zip(d.agents())
            .map(|(xm, dm)| reassign(xm, dm))
            .collect(),
    }
}

#[inline]
fn blend(sum: &[f64], count: usize, neighbor_sum: &[f64], degree: usize, inv_rho: f64) -> Point {
    let denom = inv_rho * count as f64 + degree as f64;
    sum.iter()
        .zip(neighbor_sum)
        .map(|(s, n)| (inv_rho * s + n) / denom)
        .collect()
}

/// The consensus+innovations target `μ_m^k` for one agent and cluster.
pub fn mu(agent: usize, cluster: &[&[f64]], neighbor_heads: &[&[f64]], rho: f64) -> Result<Point> {
    if neighbor_heads.is_empty() {
        return Err(Error::NoNeighbors { agent });
    }
    let dim = neighbor_heads[0].len();
    let mut sum = vec![0.0; dim];
    for y in cluster {
        sum.iter_mut().zip(y.iter()).for_each(|(s, v)| *s += v);
    }
    let mut nsum = vec![0.0; dim];
    for h in neighbor_heads {
        nsum.iter_mut().zip(h.iter()).for_each(|(s, v)| *s += v);
    }
    Ok(blend(&sum, cluster.len(), &nsum, neighbor_heads.len(), 1.0 / rho))
}

/// One agent's share of a round, computed from the round-start snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentUpdate {
    pub heads: HeadTuple,
    pub assignment: Vec<usize>,
    pub mu: HeadTuple,
}

/// Penalized clustering cost
/// `J = (1/ρ) Σ_m Σ_k Σ_{y ∈ C_m^k} ‖y − x_m^k‖² + Σ_{(m,l) ∈ E} Σ_k ‖x_m^k − x_l^k‖²`.
pub fn cost_j(x: &NetworkHeads, c: &LocalClustering, t: &Topology, d: &FederatedDataset, rho: f64) -> Result<f64> {
    x.check_shape(d, t)?;
    c.check_shape(d, x.k())?;
    Ok(cost_j_unchecked(x, c, t, d, rho))
}

fn cost_j_unchecked(x: &NetworkHeads, c: &LocalClustering, t: &Topology, d: &FederatedDataset, rho: f64) -> f64 {
    let fit: f64 = d
        .agents()
        .iter()
        .zip(c.assignments())
        .zip(x.agents())
        .map(|((pts, a), xm)| {
            pts.iter()
                .zip(a)
                .map(|(y, &k)| dist2(y, xm.head(k)))
                .sum::<f64>()
        })
        .sum();
    fit / rho + consensus_penalty(x, t)
}

fn consensus_penalty(x: &NetworkHeads, t: &Topology) -> f64 {
    t.edges()
        .iter()
        .map(|&(m, l)| {
            x.agent(m)
                .heads()
                .iter()
                .zip(x.agent(l).heads())
                .map(|(a, b)| dist2(a, b))
                .sum::<f64>()
        })
        .sum()
}

/// `Q(x) = min_C J(x, C)`, realised by nearest assignment.
pub fn cost_q(x: &NetworkHeads, t: &Topology, d: &FederatedDataset, rho: f64) -> Result<f64> {
    x.check_shape(d, t)?;
    Ok(cost_q_unchecked(x, t, d, rho))
}

fn cost_q_unchecked(x: &NetworkHeads, t: &Topology, d: &FederatedDataset, rho: f64) -> f64 {
    let fit: f64 = d
        .agents()
        .iter()
        .zip(x.agents())
        .map(|(pts, xm)| pts.iter().map(|y| xm.nearest(y).1).sum::<f64>())
        .sum();
    fit / rho + consensus_penalty(x, t)
}

/// `max_k max_{m,l} ‖x_m^k − x_l^k‖`.
pub fn consensus_deviation(x: &NetworkHeads) -> f64 {
    let m = x.num_agents();
    let mut worst: f64 = 0.0;
    for k in 0..x.k() {
        for a in 0..m {
            for b in a + 1..m {
                worst = worst.max(dist2(x.head(a, k), x.head(b, k)));
            }
        }
    }
    worst.sqrt()
}

/// Consensus-deviation bound at a generalized minimum with heads in the
/// data hull: `4 √M R₀ |D| / (ρ λ₂)`.
pub fn consensus_bound(t: &Topology, d: &FederatedDataset, rho: f64) -> f64 {
    let r0 = hull_radius(d).unwrap_or(0.0);
    4.0 * (t.num_agents() as f64).sqrt() * r0 * d.len() as f64 / (rho * t.spectrum().lambda2())
}

/// Additive optimality gap at global minima of `Q`:
/// `16 √M R₀² |D|² / (ρ λ₂)`.
pub fn gap_bound(t: &Topology, d: &FederatedDataset, rho: f64) -> f64 {
    let r0 = hull_radius(d).unwrap_or(0.0);
    let n = d.len() as f64;
    16.0 * (t.num_agents() as f64).sqrt() * r0 * r0 * n * n / (rho * t.spectrum().lambda2())
}

/// Output of one synchronous round.
#[derive(Debug, Clone, PartialEq)]
pub struct Round {
    pub heads: NetworkHeads,
    pub clustering: LocalClustering,
    pub mu: NetworkHeads,
    pub metrics: RoundMetrics,
    /// `‖x_t − μ_{t+1}‖∞`.
    pub innovation_inf: f64,
}

/// Precomputed constants for one (data, graph, ρ, α) instance.
#[derive(Debug, Clone)]
pub struct Engine<'a> {
    data: &'a FederatedDataset,
    topology: &'a Topology,
    rho: f64,
    alpha: f64,
    c_alpha: f64,
    spectrum: LaplacianSpectrum,
}

impl<'a> Engine<'a> {
    /// Validates `ρ` and resolves `α`; an explicit `α` must satisfy
    /// `0 < α < alpha_max`.
    pub fn new(data: &'a FederatedDataset, topology: &'a Topology, rho: f64, alpha: Alpha) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::InvalidParam(format!("rho must be a positive finite real, got {rho}")));
        }
        if data.num_agents() != topology.num_agents() {
            return Err(Error::DimensionMismatch {
                expected: topology.num_agents(),
                found: data.num_agents(),
            });
        }
        if let Some(agent) = (0..topology.num_agents()).find(|&m| topology.neighbors_of(m).is_empty()) {
            return Err(Error::NoNeighbors { agent });
        }
        let spectrum = topology.spectrum();
        let amax = alpha_max_with(&spectrum, data.max_agent_len(), rho);
        let alpha = match alpha {
            Alpha::Auto => 0.5 * amax,
            Alpha::Fixed(a) => {
                if !(a > 0.0 && a < amax) {
                    return Err(Error::InvalidParam(format!(
                        "alpha must lie in (0, {amax}), got {a}"
                    )));
                }
                a
            }
        };
        let c_alpha = c_alpha_with(&spectrum, data.max_agent_len(), rho, alpha);
        Ok(Engine {
            data,
            topology,
            rho,
            alpha,
            c_alpha,
            spectrum,
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn c_alpha(&self) -> f64 {
        self.c_alpha
    }

    pub fn spectrum(&self) -> &LaplacianSpectrum {
        &self.spectrum
    }

    /// Reassign-then-update for agent `m` against the snapshot `x`.
    pub fn agent_update(&self, m: usize, x: &NetworkHeads) -> AgentUpdate {
        let xm = x.agent(m);
        let (k, dim) = (xm.k(), xm.dim());
        let pts = self.data.agent(m);
        let assignment = reassign(xm, pts);
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (y, &c) in pts.iter().zip(&assignment) {
            counts[c] += 1;
            sums[c].iter_mut().zip(y).for_each(|(s, v)| *s += v);
        }
        let nbrs = self.topology.neighbors_of(m);
        let inv_rho = 1.0 / self.rho;
        let mut mu_heads = Vec::with_capacity(k);
        let mut new_heads = Vec::with_capacity(k);
        for c in 0..k {
            let mut nsum = vec![0.0; dim];
            for &l in nbrs {
                nsum.iter_mut().zip(x.head(l, c)).for_each(|(s, v)| *s += v);
            }
            let mu_c = blend(&sums[c], counts[c], &nsum, nbrs.len(), inv_rho);
            let new_c: Point = xm
                .head(c)
                .iter()
                .zip(&mu_c)
                .map(|(xv, mv)| xv - self.alpha * (xv - mv))
                .collect();
            mu_heads.push(mu_c);
            new_heads.push(new_c);
        }
        AgentUpdate {
            heads: HeadTuple::new(new_heads).expect("finite update of valid heads"),
            assignment,
            mu: HeadTuple::new(mu_heads).expect("finite blend of valid heads"),
        }
    }

    /// One synchronous round, agents evaluated sequentially.
    pub fn step(&self, round: usize, x: &NetworkHeads, prev: &LocalClustering) -> Result<Round> {
        x.check_shape(self.data, self.topology)?;
        prev.check_shape(self.data, x.k())?;
        let updates: Vec<AgentUpdate> = (0..x.num_agents()).map(|m| self.agent_update(m, x)).collect();
        Ok(self.assemble(round, x, prev, updates))
    }

    /// As [`Engine::step`], agents evaluated in parallel.
    pub fn step_parallel(&self, round: usize, x: &NetworkHeads, prev: &LocalClustering) -> Result<Round> {
        x.check_shape(self.data, self.topology)?;
        prev.check_shape(self.data, x.k())?;
        let updates: Vec<AgentUpdate> = (0..x.num_agents())
            .into_par_iter()
            .map(|m| self.agent_update(m, x))
            .collect();
        Ok(self.assemble(round, x, prev, updates))
    }

    /// Builds a round from per-agent updates given in agent order.
    pub fn assemble(&self, round: usize, x: &NetworkHeads, prev: &LocalClustering, updates: Vec<AgentUpdate>) -> Round {
        let mut heads = Vec::with_capacity(updates.len());
        let mut assignments = Vec::with_capacity(updates.len());
        let mut mus = Vec::with_capacity(updates.len());
        for u in updates {
            heads.push(u.heads);
            assignments.push(u.assignment);
            mus.push(u.mu);
        }
        let heads = NetworkHeads { agents: heads };
        let clustering = LocalClustering { assignments };
        let mu = NetworkHeads { agents: mus };

        let j_old = cost_j_unchecked(x, prev, self.topology, self.data, self.rho);
        let j_new = cost_j_unchecked(&heads, &clustering, self.topology, self.data, self.rho);
        let innov2 = x.dist2(&mu);
        let metrics = RoundMetrics {
            round,
            cost_j: j_new,
            cost_q: cost_q_unchecked(&heads, self.topology, self.data, self.rho),
            descent_slack: j_old - self.c_alpha * innov2 - j_new,
            innovation_norm: innov2.sqrt(),
            consensus_dev: consensus_deviation(&heads),
            partition_changed: clustering != *prev,
        };
        Round {
            innovation_inf: x.max_abs_diff(&mu),
            heads,
            clustering,
            mu,
            metrics,
        }
    }

    pub fn run(&self, init: &NetworkHeads, cfg: &RunConfig) -> Result<RunOutcome> {
        self.run_with_observer(init, cfg, |_, _| {})
    }

    /// Runs to convergence, calling `observe(round, heads)` for the initial
    /// state (round 0) and after every round.
    pub fn run_with_observer(
        &self,
        init: &NetworkHeads,
        cfg: &RunConfig,
        mut observe: impl FnMut(usize, &NetworkHeads),
    ) -> Result<RunOutcome> {
        init.check_shape(self.data, self.topology)?;
        if !validate_k_distinct(self.data, init.k()) {
            return Err(Error::InvalidParam(format!(
                "dataset has fewer than {} distinct points",
                init.k()
            )));
        }
        if !(cfg.head_tol > 0.0 && cfg.head_tol.is_finite()) {
            return Err(Error::InvalidParam("head_tol must be positive".into()));
        }
        let init_heads: Vec<Point> = init.all_heads().cloned().collect();
        let hull_box: BoundingBox = bounding_box(self.data, &init_heads)?;
        let record_every = cfg.record_every.max(1);

        let mut x = init.clone();
        let mut c = reassign_all(&x, self.data);
        let mut q_prev = cost_q_unchecked(&x, self.topology, self.data, self.rho);
        let mut j_prev = cost_j_unchecked(&x, &c, self.topology, self.data, self.rho);
        observe(0, &x);

        let mut trace = Vec::new();
        let mut violations = Violations::default();
        let mut last_change = 0;
        let mut stable_rounds = 0;
        let mut converged = false;
        let mut rounds_run = 0;

        for round in 1..=cfg.max_rounds {
            let r = self.assemble(
                round,
                &x,
                &c,
                (0..x.num_agents()).map(|m| self.agent_update(m, &x)).collect(),
            );
            rounds_run = round;
            let m = r.metrics;

            let descent_floor = -DESCENT_REL_SLACK * (1.0 + j_prev);
            if m.descent_slack < descent_floor {
                violations.descent.record(round, descent_floor - m.descent_slack);
            }
            let q_ceiling = q_prev + DESCENT_REL_SLACK * (1.0 + q_prev);
            if m.cost_q > q_ceiling {
                violations.monotone_q.record(round, m.cost_q - q_ceiling);
            }
            if let Some(h) = r.heads.all_heads().find(|h| !hull_box.contains(h, BOX_SLACK)) {
                let excess = h
                    .iter()
                    .zip(hull_box.lower.iter().zip(&hull_box.upper))
                    .map(|(v, (lo, hi))| (lo - v).max(v - hi))
                    .fold(0.0, f64::max);
                violations.boundedness.record(round, excess);
            }

            if m.partition_changed {
                last_change = round;
                stable_rounds = 0;
            } else {
                stable_rounds += 1;
            }
            converged = r.innovation_inf < cfg.head_tol && stable_rounds >= cfg.stability_window;

            if converged || m.partition_changed || round % record_every == 0 || round == cfg.max_rounds {
                trace.push(m);
            }
            x = r.heads;
            c = r.clustering;
            j_prev = m.cost_j;
            q_prev = m.cost_q;
            observe(round, &x);
            if converged {
                break;
            }
        }

        let outcome = RunOutcome {
            heads: x,
            clustering: c,
            trace,
            partition_convergence_round: converged.then_some(last_change),
            rounds_run,
            converged,
            alpha: self.alpha,
            c_alpha: self.c_alpha,
            violations,
        };
        if converged {
            Ok(outcome)
        } else {
            Err(Error::MaxRoundsExceeded(Box::new(outcome)))
        }
    }
}

/// One round (see [`Engine::step`]).
pub fn step(
    x: &NetworkHeads,
    prev: &LocalClustering,
    d: &FederatedDataset,
    t: &Topology,
    cfg: &RunConfig,
) -> Result<Round> {
    Engine::new(d, t, cfg.rho, cfg.alpha)?.step(1, x, prev)
}

/// Full run (see [`Engine::run`]).
pub fn run(d: &FederatedDataset, t: &Topology, init: &NetworkHeads, cfg: &RunConfig) -> Result<RunOutcome> {
    Engine::new(d, t, cfg.rho, cfg.alpha)?.run(init, cfg)
}
