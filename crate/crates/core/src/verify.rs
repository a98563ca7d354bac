//! Optimality verifiers and exhaustive oracles for the penalized objective.

use itertools::Itertools;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dataset::{bounding_box, dist2, FederatedDataset, Point};
use crate::error::{Error, Result};
use crate::graph::Topology;
use crate::lloyd::{self, enumeration_guard, next_assignment, GlobalPartition, HeadTuple};
use crate::nkmeans::{cost_j, gap_bound, LocalClustering, NetworkHeads, BOX_SLACK};

/// Residuals of the two generalized-minimum conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenMinReport {
    /// `max_y ‖y − x_m^{assigned}‖² − min_k ‖y − x_m^k‖²`, at least 0.
    pub nearest_violation: f64,
    /// `max_{m,k} ‖x_m^k − μ_m^k(x, C)‖`.
    pub fixed_point_residual: f64,
    pub passes: bool,
    /// Every head lies in the coordinate box of the data.
    pub in_hull_box: bool,
}

impl GenMinReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible")
    }
}

fn check_inputs(x: &NetworkHeads, c: &LocalClustering, t: &Topology, d: &FederatedDataset) -> Result<()> {
    x.check_shape(d, t)?;
    c.check_shape(d, x.k())
}

/// Blend targets `μ(x, C)` for every agent and cluster.
fn blend_targets(x: &NetworkHeads, c: &LocalClustering, t: &Topology, d: &FederatedDataset, rho: f64) -> Vec<Vec<Point>> {
    let (k, dim) = (x.k(), x.dim());
    let inv_rho = 1.0 / rho;
    (0..x.num_agents())
        .map(|m| {
            let mut sums = vec![vec![0.0; dim]; k];
            let mut counts = vec![0usize; k];
            for (y, &cl) in d.agent(m).iter().zip(c.agent(m)) {
                counts[cl] += 1;
                sums[cl].iter_mut().zip(y).for_each(|(s, v)| *s += v);
            }
            let nbrs = t.neighbors_of(m);
            (0..k)
                .map(|cl| {
                    let denom = inv_rho * counts[cl] as f64 + nbrs.len() as f64;
                    (0..dim)
                        .map(|i| {
                            let nsum: f64 = nbrs.iter().map(|&l| x.head(l, cl)[i]).sum();
                            (inv_rho * sums[cl][i] + nsum) / denom
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// Evaluates both generalized-minimum conditions; passes iff both residuals
/// are at most `tol`.
pub fn is_generalized_minimum(
    x: &NetworkHeads,
    c: &LocalClustering,
    t: &Topology,
    d: &FederatedDataset,
    rho: f64,
    tol: f64,
) -> Result<GenMinReport> {
    check_inputs(x, c, t, d)?;
    if let Some(agent) = (0..t.num_agents()).find(|&m| t.neighbors_of(m).is_empty()) {
        return Err(Error::NoNeighbors { agent });
    }
    let mut nearest_violation: f64 = 0.0;
    for m in 0..x.num_agents() {
        let xm = x.agent(m);
        for (y, &cl) in d.agent(m).iter().zip(c.agent(m)) {
            nearest_violation = nearest_violation.max(dist2(y, xm.head(cl)) - xm.nearest(y).1);
        }
    }
    let targets = blend_targets(x, c, t, d, rho);
    let fixed_point_residual = targets
        .iter()
        .enumerate()
        .flat_map(|(m, tm)| tm.iter().enumerate().map(move |(k, mu)| (m, k, mu)))
        .map(|(m, k, mu)| dist2(x.head(m, k), mu).sqrt())
        .fold(0.0, f64::max);
    let in_hull_box = match bounding_box(d, &[]) {
        Ok(b) => x.all_heads().all(|h| b.contains(h, BOX_SLACK)),
        Err(_) => false,
    };
    Ok(GenMinReport {
        nearest_violation,
        fixed_point_residual,
        passes: nearest_violation <= tol && fixed_point_residual <= tol,
        in_hull_box,
    })
}

/// Unique minimizer of `x ↦ J(x, C)`: per cluster `k`, solves
/// `((1/ρ) diag(|C_m^k|) + L) x^k = (1/ρ) b^k` by Cholesky.
pub fn solve_centers(c: &LocalClustering, t: &Topology, d: &FederatedDataset, rho: f64, k: usize) -> Result<NetworkHeads> {
    c.check_shape(d, k)?;
    if d.num_agents() != t.num_agents() {
        return Err(Error::DimensionMismatch {
            expected: t.num_agents(),
            found: d.num_agents(),
        });
    }
    let (m_agents, dim) = (t.num_agents(), d.dim());
    let inv_rho = 1.0 / rho;
    let lap = t.laplacian();
    let sizes = c.sizes(k);

    let mut heads = vec![vec![vec![0.0; dim]; k]; m_agents];
    for cl in 0..k {
        if sizes.iter().all(|s| s[cl] == 0) {
            return Err(Error::SingularCluster { cluster: cl });
        }
        let mut a = lap.clone();
        let mut b = DMatrix::<f64>::zeros(m_agents, dim);
        for m in 0..m_agents {
            a[(m, m)] += inv_rho * sizes[m][cl] as f64;
            for (y, &assigned) in d.agent(m).iter().zip(c.agent(m)) {
                if assigned == cl {
                    for i in 0..dim {
                        b[(m, i)] += y[i];
                    }
                }
            }
        }
        b *= inv_rho;
        let sol = a
            .cholesky()
            .ok_or(Error::SingularCluster { cluster: cl })?
            .solve(&b);
        for m in 0..m_agents {
            for i in 0..dim {
                heads[m][cl][i] = sol[(m, i)];
            }
        }
    }
    NetworkHeads::new(
        heads
            .into_iter()
            .map(HeadTuple::new)
            .collect::<Result<_>>()?,
    )
}

/// `‖Σ_m |C_m^k| x_m^k − Σ_m Σ_{y ∈ C_m^k} y‖ ≤ tol` for every `k`.
pub fn weighted_centroid_check(x: &NetworkHeads, c: &LocalClustering, d: &FederatedDataset, tol: f64) -> bool {
    weighted_centroid_residual(x, c, d) <= tol
}

pub fn weighted_centroid_residual(x: &NetworkHeads, c: &LocalClustering, d: &FederatedDataset) -> f64 {
    let (k, dim) = (x.k(), x.dim());
    let mut diff = vec![vec![0.0; dim]; k];
    for m in 0..x.num_agents() {
        for (y, &cl) in d.agent(m).iter().zip(c.agent(m)) {
            for i in 0..dim {
                diff[cl][i] += x.head(m, cl)[i] - y[i];
            }
        }
    }
    diff.iter()
        .map(|v| v.iter().map(|e| e * e).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenalizedOptimum {
    pub heads: NetworkHeads,
    pub clustering: LocalClustering,
    pub cost: f64,
}

/// Exhaustive global minimum of `Q^ρ`: every joint local assignment with
/// no globally empty cluster, centers from [`solve_centers`].
pub fn brute_force_q_global(t: &Topology, d: &FederatedDataset, k: usize, rho: f64) -> Result<PenalizedOptimum> {
    let n = d.len();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    enumeration_guard(k, n)?;
    let lens: Vec<usize> = d.agents().iter().map(Vec::len).collect();
    let split = |a: &[usize]| -> Vec<Vec<usize>> {
        let mut out = Vec::with_capacity(lens.len());
        let mut off = 0;
        for &l in &lens {
            out.push(a[off..off + l].to_vec());
            off += l;
        }
        out
    };

    let mut a = vec![0usize; n];
    let mut best: Option<PenalizedOptimum> = None;
    loop {
        let mut used = vec![false; k];
        a.iter().for_each(|&c| used[c] = true);
        if used.iter().all(|&u| u) {
            let c = LocalClustering::new(split(&a), d, k)?;
            let x = solve_centers(&c, t, d, rho, k)?;
            let cost = cost_j(&x, &c, t, d, rho)?;
            if best.as_ref().is_none_or(|b| cost < b.cost) {
                best = Some(PenalizedOptimum {
                    heads: x,
                    clustering: c,
                    cost,
                });
            }
        }
        if !next_assignment(&mut a, k) {
            break;
        }
    }
    best.ok_or_else(|| Error::InvalidParam(format!("fewer than {k} points; every assignment leaves a cluster empty")))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapCheck {
    /// `max_m F(x̆_m)` at the penalized global optimum.
    pub lhs: f64,
    /// `F* + gap_bound`.
    pub rhs: f64,
    pub holds: bool,
    pub f_star: f64,
    pub q_cost: f64,
}

/// Slack on the gap-bound comparison.
pub const GAP_SLACK: f64 = 1e-9;

pub fn check_gap_bound(t: &Topology, d: &FederatedDataset, k: usize, rho: f64) -> Result<GapCheck> {
    let central = lloyd::brute_force_global(d, k)?;
    let penal = brute_force_q_global(t, d, k, rho)?;
    Ok(gap_check_from(t, d, rho, central.cost, &penal))
}

pub fn gap_check_from(t: &Topology, d: &FederatedDataset, rho: f64, f_star: f64, penal: &PenalizedOptimum) -> GapCheck {
    let lhs = penal
        .heads
        .agents()
        .iter()
        .map(|xm| lloyd::cost_f(xm, d).expect("shapes checked by oracle"))
        .fold(f64::NEG_INFINITY, f64::max);
    let rhs = f_star + gap_bound(t, d, rho);
    GapCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + GAP_SLACK,
        f_star,
        q_cost: penal.cost,
    }
}

/// Whether the partition generated by `C` is a fixed-point partition of
/// centralized Lloyd. Heads are the centroids of non-empty clusters; an
/// empty cluster takes the agent average of its heads.
pub fn cost_equivalence_check(x: &NetworkHeads, c: &LocalClustering, d: &FederatedDataset, tol: f64) -> bool {
    let (p, z) = generated_centroids(x, c, d);
    lloyd::is_lloyd_minimum(&z, &p, d, tol)
}

/// The generated partition and its centroid tuple.
pub fn generated_centroids(x: &NetworkHeads, c: &LocalClustering, d: &FederatedDataset) -> (GlobalPartition, HeadTuple) {
    let (k, dim) = (x.k(), x.dim());
    let m = x.num_agents() as f64;
    let avg: Vec<Point> = (0..k)
        .map(|cl| {
            (0..dim)
                .map(|i| x.agents().iter().map(|a| a.head(cl)[i]).sum::<f64>() / m)
                .collect()
        })
        .collect();
    let fallback = HeadTuple::new(avg).expect("finite average of finite heads");
    let p = c.generated_partition();
    let z = lloyd::centroids(&p, d, &fallback);
    (p, z)
}

/// `min_{z ∈ set, π} ‖h − π(z)‖₂` over head relabelings `π`.
pub fn distance_to_set(h: &HeadTuple, set: &[HeadTuple]) -> f64 {
    let k = h.k();
    let mut best = f64::INFINITY;
    for z in set {
        for perm in (0..k).permutations(k) {
            let d2: f64 = perm
                .iter()
                .enumerate()
                .map(|(i, &j)| dist2(h.head(i), z.head(j)))
                .sum();
            best = best.min(d2);
        }
    }
    best.sqrt()
}

/// Largest per-agent [`distance_to_set`].
pub fn network_distance_to_set(x: &NetworkHeads, set: &[HeadTuple]) -> f64 {
    x.agents()
        .iter()
        .map(|a| distance_to_set(a, set))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_topology, TopologyKind};
    use crate::nkmeans::{consensus_deviation, reassign_all};

    fn two_agents() -> (FederatedDataset, Topology) {
        (
            FederatedDataset::from_scalars(&[&[0.0], &[2.0]]).unwrap(),
            build_topology(TopologyKind::Path, 2, None, 0).unwrap(),
        )
    }

    #[test]
    fn closed_form_is_generalized_minimum() {
        let (d, t) = two_agents();
        let x = NetworkHeads::from_scalars(&[&[2.0 / 3.0], &[4.0 / 3.0]]).unwrap();
        let c = reassign_all(&x, &d);
        let r = is_generalized_minimum(&x, &c, &t, &d, 1.0, 1e-12).unwrap();
        assert!(r.passes, "{r:?}");
        assert!(r.fixed_point_residual < 1e-15);
        assert!(r.in_hull_box);

        let r2 = is_generalized_minimum(&x, &c, &t, &d, 2.0, 1e-12).unwrap();
        assert!(!r2.passes);
        assert!(r2.fixed_point_residual > 1e-3);
    }

    #[test]
    fn non_nearest_clustering_is_flagged() {
        let d = FederatedDataset::from_scalars(&[&[0.0, 10.0], &[0.0, 10.0]]).unwrap();
        let t = build_topology(TopologyKind::Path, 2, None, 0).unwrap();
        let x = NetworkHeads::from_scalars(&[&[0.0, 10.0], &[0.0, 10.0]]).unwrap();
        let c = LocalClustering::new(vec![vec![1, 0], vec![0, 1]], &d, 2).unwrap();
        let r = is_generalized_minimum(&x, &c, &t, &d, 1.0, 1e-9).unwrap();
        assert!((r.nearest_violation - 100.0).abs() < 1e-12);
        assert!(!r.passes);
    }

    #[test]
    fn solve_centers_examples() {
        let (d, t) = two_agents();
        let c = LocalClustering::new(vec![vec![0], vec![0]], &d, 1).unwrap();
        let x = solve_centers(&c, &t, &d, 1.0, 1).unwrap();
        assert!((x.head(0, 0)[0] - 2.0 / 3.0).abs() < 1e-14);
        assert!((x.head(1, 0)[0] - 4.0 / 3.0).abs() < 1e-14);
        let x = solve_centers(&c, &t, &d, 10.0, 1).unwrap();
        assert!((x.head(0, 0)[0] - 20.0 / 21.0).abs() < 1e-14);
        assert!((x.head(1, 0)[0] - 22.0 / 21.0).abs() < 1e-14);
        assert!(weighted_centroid_check(&x, &c, &d, 1e-9));
    }

    #[test]
    fn solve_centers_single_location() {
        let d = FederatedDataset::new(2, vec![vec![vec![3.0, -1.0]; 2], vec![], vec![vec![3.0, -1.0]]]).unwrap();
        let t = build_topology(TopologyKind::Path, 3, None, 0).unwrap();
        let c = LocalClustering::new(vec![vec![0, 0], vec![], vec![0]], &d, 1).unwrap();
        let x = solve_centers(&c, &t, &d, 7.0, 1).unwrap();
        for h in x.all_heads() {
            assert!((h[0] - 3.0).abs() < 1e-12 && (h[1] + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn solve_centers_singular_cluster() {
        let (d, t) = two_agents();
        let c = LocalClustering::new(vec![vec![0], vec![0]], &d, 2).unwrap();
        assert!(matches!(
            solve_centers(&c, &t, &d, 1.0, 2),
            Err(Error::SingularCluster { cluster: 1 })
        ));
    }

    #[test]
    fn weighted_centroid_fails_off_stationarity() {
        let (d, _) = two_agents();
        let x = NetworkHeads::from_scalars(&[&[0.3], &[1.1]]).unwrap();
        let c = LocalClustering::new(vec![vec![0], vec![0]], &d, 1).unwrap();
        assert!(!weighted_centroid_check(&x, &c, &d, 1e-9));
        let x = NetworkHeads::from_scalars(&[&[2.0 / 3.0], &[4.0 / 3.0]]).unwrap();
        assert!(weighted_centroid_check(&x, &c, &d, 1e-12));
    }

    #[test]
    fn q_oracle_two_agents() {
        let (d, t) = two_agents();
        let g = brute_force_q_global(&t, &d, 1, 10.0).unwrap();
        assert!((g.cost - 4.0 / 21.0).abs() < 1e-14, "cost {}", g.cost);
        assert!((g.heads.head(0, 0)[0] - 20.0 / 21.0).abs() < 1e-14);
    }

    #[test]
    fn q_oracle_prefers_joint_clusters() {
        let d = FederatedDataset::from_scalars(&[&[0.0, 1.0], &[10.0, 11.0]]).unwrap();
        let t = build_topology(TopologyKind::Path, 2, None, 0).unwrap();
        let g = brute_force_q_global(&t, &d, 2, 1e4).unwrap();
        for a in g.heads.agents() {
            let s = a.sorted();
            assert!((s.head(0)[0] - 0.5).abs() < 1e-2 && (s.head(1)[0] - 10.5).abs() < 1e-2);
        }
        let r = is_generalized_minimum(&g.heads, &g.clustering, &t, &d, 1e4, 1e-9).unwrap();
        assert!(r.passes);
    }

    #[test]
    fn q_oracle_one_point_per_cluster_is_free() {
        let d = FederatedDataset::from_scalars(&[&[0.0, 3.0], &[7.0]]).unwrap();
        let t = build_topology(TopologyKind::Path, 2, None, 0).unwrap();
        for rho in [1e-2, 1.0, 1e6] {
            let g = brute_force_q_global(&t, &d, 3, rho).unwrap();
            assert!(g.cost.abs() < 1e-12);
            assert!(consensus_deviation(&g.heads) < 1e-12);
        }
    }

    #[test]
    fn gap_two_agents() {
        let (d, t) = two_agents();
        let g = check_gap_bound(&t, &d, 1, 10.0).unwrap();
        assert!((g.lhs - 884.0 / 441.0).abs() < 1e-12);
        assert_eq!(g.f_star, 2.0);
        assert!((g.rhs - (2.0 + 18.101_933_598_375_6)).abs() < 1e-9);
        assert!(g.holds);
        let g = check_gap_bound(&t, &d, 1, 1e6).unwrap();
        assert!((g.lhs - 2.0).abs() < 1e-9 && g.holds);
    }

    #[test]
    fn cost_equivalence_examples() {
        let d = FederatedDataset::from_scalars(&[&[0.0], &[1.0]]).unwrap();
        let x = NetworkHeads::from_scalars(&[&[0.0, 1.0], &[0.0, 1.0]]).unwrap();
        let c = LocalClustering::new(vec![vec![0], vec![1]], &d, 2).unwrap();
        assert!(cost_equivalence_check(&x, &c, &d, 1e-9));

        let d = FederatedDataset::from_scalars(&[&[0.0, 1.0], &[10.0, 11.0]]).unwrap();
        let x = NetworkHeads::from_scalars(&[&[5.0, 6.0], &[5.0, 6.0]]).unwrap();
        let c = LocalClustering::new(vec![vec![0, 1], vec![0, 1]], &d, 2).unwrap();
        let (_, z) = generated_centroids(&x, &c, &d);
        assert_eq!(z, HeadTuple::from_scalars(&[5.0, 6.0]).unwrap());
        assert!(!cost_equivalence_check(&x, &c, &d, 1e-9));
    }

    #[test]
    fn permutation_distance() {
        let a = HeadTuple::from_scalars(&[1.0, 5.0]).unwrap();
        let b = HeadTuple::from_scalars(&[5.0, 1.0]).unwrap();
        assert_eq!(distance_to_set(&a, std::slice::from_ref(&b)), 0.0);
        let c = HeadTuple::from_scalars(&[4.0, 1.0]).unwrap();
        assert_eq!(distance_to_set(&a, &[c]), 1.0);
        assert_eq!(distance_to_set(&a, &[]), f64::INFINITY);
    }
}
