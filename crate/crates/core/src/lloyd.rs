//! Centralized K-means: distortion costs, Lloyd's iteration, fixed-point
//! checks and an exhaustive global oracle for tiny instances.
//!
//! Cluster indices are 0-based throughout.

use serde::{Deserialize, Serialize};

use crate::dataset::{dist2, FederatedDataset, Point};
use crate::error::{Error, Result};

/// Upper limit on `K^N` for exhaustive enumeration.
pub const ENUMERATION_LIMIT: u64 = 10_000_000;

/// Head movement (ℓ∞) below which Lloyd's centroid step counts as quiet.
pub const LLOYD_HEAD_TOL: f64 = 1e-12;

/// `K` cluster heads in ℝ^p.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HeadTuple {
    heads: Vec<Point>,
}

impl HeadTuple {
    pub fn new(heads: Vec<Point>) -> Result<Self> {
        let dim = heads
            .first()
            .ok_or_else(|| Error::InvalidParam("head tuple needs at least one head".into()))?
            .len();
        if dim == 0 {
            return Err(Error::InvalidParam("heads must have positive dimension".into()));
        }
        for h in &heads {
            if h.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: h.len(),
                });
            }
            if h.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParam("heads must be finite".into()));
            }
        }
        Ok(HeadTuple { heads })
    }

    pub fn from_scalars(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| vec![v]).collect())
    }

    pub fn k(&self) -> usize {
        self.heads.len()
    }

    pub fn dim(&self) -> usize {
        self.heads[0].len()
    }

    pub fn heads(&self) -> &[Point] {
        &self.heads
    }

    pub fn head(&self, k: usize) -> &[f64] {
        &self.heads[k]
    }

    /// Nearest head to `y`; ties go to the lowest index.
    pub fn nearest(&self, y: &[f64]) -> (usize, f64) {
        let mut best = (0, dist2(y, &self.heads[0]));
        for (k, h) in self.heads.iter().enumerate().skip(1) {
            let d = dist2(y, h);
            if d < best.1 {
                best = (k, d);
            }
        }
        best
    }

    /// Largest coordinate-wise difference to `other`.
    pub fn max_abs_diff(&self, other: &HeadTuple) -> f64 {
        self.heads
            .iter()
            .zip(&other.heads)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    /// Relabeling-invariant form: heads sorted lexicographically.
    pub fn sorted(&self) -> HeadTuple {
        let mut heads = self.heads.clone();
        heads.sort_by(|a, b| {
            a.iter()
                .zip(b)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        HeadTuple { heads }
    }

    pub(crate) fn check_dim(&self, d: &FederatedDataset) -> Result<()> {
        if self.dim() != d.dim() {
            return Err(Error::DimensionMismatch {
                expected: d.dim(),
                found: self.dim(),
            });
        }
        Ok(())
    }
}

/// Assignment of every point `(m, n)` of the joint dataset to a cluster.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GlobalPartition {
    assignment: Vec<Vec<usize>>,
}

impl GlobalPartition {
    pub fn new(assignment: Vec<Vec<usize>>, d: &FederatedDataset, k: usize) -> Result<Self> {
        if assignment.len() != d.num_agents() {
            return Err(Error::DimensionMismatch {
                expected: d.num_agents(),
                found: assignment.len(),
            });
        }
        for (a, pts) in assignment.iter().zip(d.agents()) {
            if a.len() != pts.len() {
                return Err(Error::DimensionMismatch {
                    expected: pts.len(),
                    found: a.len(),
                });
            }
            if let Some(&bad) = a.iter().find(|&&c| c >= k) {
                return Err(Error::IndexOutOfRange { index: bad, len: k });
            }
        }
        Ok(GlobalPartition { assignment })
    }

    pub(crate) fn from_raw(assignment: Vec<Vec<usize>>) -> Self {
        GlobalPartition { assignment }
    }

    pub fn assignment(&self) -> &[Vec<usize>] {
        &self.assignment
    }

    pub fn cluster_of(&self, m: usize, n: usize) -> usize {
        self.assignment[m][n]
    }

    /// Nearest-head assignment of every point (lowest index on ties).
    pub fn nearest(x: &HeadTuple, d: &FederatedDataset) -> Self {
        GlobalPartition {
            assignment: d
                .agents()
                .iter()
                .map(|pts| pts.iter().map(|y| x.nearest(y).0).collect())
                .collect(),
        }
    }

    pub fn cluster_sizes(&self, k: usize) -> Vec<usize> {
        let mut sizes = vec![0; k];
        for &c in self.assignment.iter().flatten() {
            sizes[c] += 1;
        }
        sizes
    }
}

/// `F(x) = Σ_y min_k ‖y − x^k‖²`.
pub fn cost_f(x: &HeadTuple, d: &FederatedDataset) -> Result<f64> {
    x.check_dim(d)?;
    Ok(d.points().map(|y| x.nearest(y).1).sum())
}

/// `H(x, P) = Σ_k Σ_{y ∈ P^k} ‖y − x^k‖²`.
pub fn cost_h(x: &HeadTuple, p: &GlobalPartition, d: &FederatedDataset) -> Result<f64> {
    x.check_dim(d)?;
    check_partition_shape(p, d, x.k())?;
    Ok(d.agents()
        .iter()
        .zip(p.assignment())
        .flat_map(|(pts, a)| pts.iter().zip(a))
        .map(|(y, &c)| dist2(y, x.head(c)))
        .sum())
}

fn check_partition_shape(p: &GlobalPartition, d: &FederatedDataset, k: usize) -> Result<()> {
    GlobalPartition::new(p.assignment.clone(), d, k).map(|_| ())
}

/// Per-cluster centroids; empty clusters take their head from `fallback`.
pub fn centroids(p: &GlobalPartition, d: &FederatedDataset, fallback: &HeadTuple) -> HeadTuple {
    let k = fallback.k();
    let dim = d.dim();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (pts, a) in d.agents().iter().zip(p.assignment()) {
        for (y, &c) in pts.iter().zip(a) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(y) {
                *s += v;
            }
        }
    }
    let heads = sums
        .into_iter()
        .zip(counts)
        .enumerate()
        .map(|(c, (s, n))| {
            if n == 0 {
                fallback.head(c).to_vec()
            } else {
                s.into_iter().map(|v| v / n as f64).collect()
            }
        })
        .collect();
    HeadTuple { heads }
}

/// Costs around one Lloyd iteration: `H(x_t, P_t)`, `H(x_t, P_{t+1})`,
/// `H(x_{t+1}, P_{t+1})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LloydIteration {
    pub before: f64,
    pub reassigned: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LloydResult {
    pub heads: HeadTuple,
    pub partition: GlobalPartition,
    pub iters: usize,
    pub history: Vec<LloydIteration>,
}

impl LloydResult {
    pub fn cost(&self, d: &FederatedDataset) -> f64 {
        cost_h(&self.heads, &self.partition, d).expect("shapes fixed by lloyd_run")
    }
}

fn reassign_keep_ties(x: &HeadTuple, d: &FederatedDataset, prev: &GlobalPartition) -> GlobalPartition {
    let assignment = d
        .agents()
        .iter()
        .zip(prev.assignment())
        .map(|(pts, a)| {
            pts.iter()
                .zip(a)
                .map(|(y, &cur)| {
                    let (best, best_d) = x.nearest(y);
                    if best_d < dist2(y, x.head(cur)) {
                        best
                    } else {
                        cur
                    }
                })
                .collect()
        })
        .collect();
    GlobalPartition { assignment }
}

/// Lloyd's algorithm from `init` until the (heads, partition) pair repeats.
///
/// A point moves only on strict improvement, to the lowest-indexed nearest
/// head. Empty clusters keep their previous head.
pub fn lloyd_run(
    d: &FederatedDataset,
    k: usize,
    init: &HeadTuple,
    max_iters: usize,
) -> Result<LloydResult> {
    init.check_dim(d)?;
    if init.k() != k {
        return Err(Error::InvalidParam(format!(
            "init has {} heads, expected {k}",
            init.k()
        )));
    }
    if !crate::dataset::validate_k_distinct(d, k) {
        return Err(Error::InvalidParam(format!(
            "dataset has fewer than {k} distinct points"
        )));
    }
    let mut x = init.clone();
    let mut p = GlobalPartition::nearest(&x, d);
    let mut history = Vec::new();
    for iter in 1..=max_iters {
        let before = cost_h(&x, &p, d)?;
        let p_next = reassign_keep_ties(&x, d, &p);
        let reassigned = cost_h(&x, &p_next, d)?;
        let x_next = centroids(&p_next, d, &x);
        let after = cost_h(&x_next, &p_next, d)?;
        history.push(LloydIteration {
            before,
            reassigned,
            after,
        });
        let quiet = x_next.max_abs_diff(&x) < LLOYD_HEAD_TOL;
        let same = p_next == p;
        x = x_next;
        p = p_next;
        if same && quiet {
            return Ok(LloydResult {
                heads: x,
                partition: p,
                iters: iter,
                history,
            });
        }
    }
    Err(Error::MaxItersExceeded { iters: max_iters })
}

/// Both Lloyd fixed-point conditions at tolerance `tol`: nearest assignment
/// (squared-distance slack) and centroid heads for non-empty clusters (ℓ∞).
pub fn is_lloyd_minimum(x: &HeadTuple, p: &GlobalPartition, d: &FederatedDataset, tol: f64) -> bool {
    if x.check_dim(d).is_err() || check_partition_shape(p, d, x.k()).is_err() {
        return false;
    }
    let nearest_ok = d
        .agents()
        .iter()
        .zip(p.assignment())
        .flat_map(|(pts, a)| pts.iter().zip(a))
        .all(|(y, &c)| dist2(y, x.head(c)) <= x.nearest(y).1 + tol);
    if !nearest_ok {
        return false;
    }
    let c = centroids(p, d, x);
    x.max_abs_diff(&c) <= tol
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlobalOptimum {
    pub heads: HeadTuple,
    pub partition: GlobalPartition,
    pub cost: f64,
    /// Distinct (up to relabeling) optimal head tuples, i.e. `Z_g`.
    pub minimizers: Vec<HeadTuple>,
}

/// Relative tolerance for collecting cost ties into `Z_g`.
pub const OPTIMUM_TIE_TOL: f64 = 1e-9;

pub(crate) fn enumeration_guard(k: usize, n: usize) -> Result<()> {
    let total = (k as f64).powi(n as i32);
    if total > ENUMERATION_LIMIT as f64 {
        return Err(Error::TooLarge {
            assignments: total,
            limit: ENUMERATION_LIMIT,
        });
    }
    Ok(())
}

/// Advances a base-`k` odometer (last digit fastest); false on wrap-around.
pub(crate) fn next_assignment(a: &mut [usize], k: usize) -> bool {
    for digit in a.iter_mut().rev() {
        *digit += 1;
        if *digit < k {
            return true;
        }
        *digit = 0;
    }
    false
}

fn flat_cost(points: &[&Point], a: &[usize], k: usize, dim: usize) -> (f64, Vec<Point>, Vec<usize>) {
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (y, &c) in points.iter().zip(a) {
        counts[c] += 1;
        for (s, v) in sums[c].iter_mut().zip(y.iter()) {
            *s += v;
        }
    }
    let first = points[0];
    let heads: Vec<Point> = sums
        .into_iter()
        .zip(&counts)
        .map(|(s, &n)| {
            if n == 0 {
                first.clone()
            } else {
                s.into_iter().map(|v| v / n as f64).collect()
            }
        })
        .collect();
    let cost = points.iter().zip(a).map(|(y, &c)| dist2(y, &heads[c])).sum();
    (cost, heads, counts)
}

/// Exhaustive minimum of `H` over all `K^N` assignments with centroid heads.
///
/// Among exact cost ties the lexicographically smallest assignment wins.
pub fn brute_force_global(d: &FederatedDataset, k: usize) -> Result<GlobalOptimum> {
    let n = d.len();
    if n == 0 {
        return Err(Error::EmptyData);
    }
    enumeration_guard(k, n)?;
    if !crate::dataset::validate_k_distinct(d, k) {
        return Err(Error::InvalidParam(format!(
            "dataset has fewer than {k} distinct points"
        )));
    }
    let points: Vec<&Point> = d.points().collect();
    let dim = d.dim();

    let mut a = vec![0usize; n];
    let mut best: Option<(f64, Vec<usize>, Vec<Point>)> = None;
    loop {
        let (cost, heads, _) = flat_cost(&points, &a, k, dim);
        if best.as_ref().is_none_or(|(b, _, _)| cost < *b) {
            best = Some((cost, a.clone(), heads));
        }
        if !next_assignment(&mut a, k) {
            break;
        }
    }
    let (cost, best_a, best_heads) = best.expect("at least one assignment");

    let cutoff = cost + OPTIMUM_TIE_TOL * (1.0 + cost);
    let mut minimizers: Vec<HeadTuple> = Vec::new();
    a.iter_mut().for_each(|v| *v = 0);
    loop {
        let (c, heads, counts) = flat_cost(&points, &a, k, dim);
        if c <= cutoff && counts.iter().all(|&n| n > 0) {
            let h = HeadTuple { heads };
            let key = h.sorted();
            if !minimizers.iter().any(|m| m.sorted() == key) {
                minimizers.push(h);
            }
        }
        if !next_assignment(&mut a, k) {
            break;
        }
    }

    let mut assignment = Vec::with_capacity(d.num_agents());
    let mut offset = 0;
    for pts in d.agents() {
        assignment.push(best_a[offset..offset + pts.len()].to_vec());
        offset += pts.len();
    }
    Ok(GlobalOptimum {
        heads: HeadTuple { heads: best_heads },
        partition: GlobalPartition { assignment },
        cost,
        minimizers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four() -> FederatedDataset {
        FederatedDataset::from_scalars(&[&[0.0, 1.0, 10.0, 11.0]]).unwrap()
    }

    #[test]
    fn cost_f_examples() {
        let d = four();
        assert_eq!(cost_f(&HeadTuple::from_scalars(&[0.5, 10.5]).unwrap(), &d).unwrap(), 1.0);
        let d0 = FederatedDataset::from_scalars(&[&[0.0]]).unwrap();
        assert_eq!(cost_f(&HeadTuple::from_scalars(&[3.0, -4.0]).unwrap(), &d0).unwrap(), 9.0);
        let d2 = FederatedDataset::from_scalars(&[&[0.0], &[1.0]]).unwrap();
        assert_eq!(cost_f(&HeadTuple::from_scalars(&[1.0, 0.0]).unwrap(), &d2).unwrap(), 0.0);
        let bad = HeadTuple::new(vec![vec![0.0, 0.0]]).unwrap();
        assert!(matches!(cost_f(&bad, &d), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn cost_h_examples() {
        let d = FederatedDataset::from_scalars(&[&[0.0, 1.0]]).unwrap();
        let x = HeadTuple::from_scalars(&[0.0, 1.0]).unwrap();
        let p = GlobalPartition::new(vec![vec![0, 0]], &d, 2).unwrap();
        assert_eq!(cost_h(&x, &p, &d).unwrap(), 1.0);

        let d = four();
        let x = HeadTuple::from_scalars(&[0.5, 10.5]).unwrap();
        let p = GlobalPartition::new(vec![vec![0, 0, 1, 1]], &d, 2).unwrap();
        assert_eq!(cost_h(&x, &p, &d).unwrap(), 1.0);
        assert_eq!(cost_h(&x, &GlobalPartition::nearest(&x, &d), &d).unwrap(), cost_f(&x, &d).unwrap());
        assert!(GlobalPartition::new(vec![vec![0, 0, 2, 1]], &d, 2).is_err());
    }

    #[test]
    fn lloyd_two_step_trace() {
        let d = four();
        let r = lloyd_run(&d, 2, &HeadTuple::from_scalars(&[0.0, 10.0]).unwrap(), 100).unwrap();
        assert_eq!(r.heads, HeadTuple::from_scalars(&[0.5, 10.5]).unwrap());
        assert_eq!(r.partition.assignment(), &[vec![0, 0, 1, 1]]);
        assert_eq!(r.cost(&d), 1.0);
        assert_eq!(r.iters, 2);
        assert!(is_lloyd_minimum(&r.heads, &r.partition, &d, 1e-12));
    }

    #[test]
    fn lloyd_from_fixed_point_is_one_pass() {
        let d = four();
        let init = HeadTuple::from_scalars(&[0.5, 10.5]).unwrap();
        let r = lloyd_run(&d, 2, &init, 100).unwrap();
        assert_eq!(r.heads, init);
        assert_eq!(r.iters, 1);

        let d = FederatedDataset::from_scalars(&[&[0.0, 1.0]]).unwrap();
        let r = lloyd_run(&d, 2, &HeadTuple::from_scalars(&[0.0, 1.0]).unwrap(), 10).unwrap();
        assert_eq!(r.heads, HeadTuple::from_scalars(&[0.0, 1.0]).unwrap());
        assert_eq!(r.cost(&d), 0.0);
    }

    #[test]
    fn lloyd_rejects_degenerate_data() {
        let d = FederatedDataset::from_scalars(&[&[1.0, 1.0, 1.0]]).unwrap();
        assert!(lloyd_run(&d, 2, &HeadTuple::from_scalars(&[0.0, 2.0]).unwrap(), 10).is_err());
    }

    #[test]
    fn lloyd_minimum_checks() {
        let d = four();
        let p = GlobalPartition::new(vec![vec![0, 0, 1, 1]], &d, 2).unwrap();
        assert!(is_lloyd_minimum(&HeadTuple::from_scalars(&[0.5, 10.5]).unwrap(), &p, &d, 1e-12));
        assert!(!is_lloyd_minimum(&HeadTuple::from_scalars(&[0.0, 10.5]).unwrap(), &p, &d, 1e-12));
        // Third head owns nothing: its position only matters for nearest
        // assignment.
        let x = HeadTuple::from_scalars(&[0.5, 10.5, 500.0]).unwrap();
        assert!(is_lloyd_minimum(&x, &p, &d, 1e-12));
    }

    #[test]
    fn brute_force_examples() {
        let g = brute_force_global(&four(), 2).unwrap();
        assert_eq!(g.cost, 1.0);
        assert_eq!(g.heads.sorted(), HeadTuple::from_scalars(&[0.5, 10.5]).unwrap());
        assert_eq!(g.minimizers.len(), 1);

        let d = FederatedDataset::from_scalars(&[&[0.0, 0.0], &[4.0]]).unwrap();
        let g = brute_force_global(&d, 2).unwrap();
        assert_eq!(g.cost, 0.0);
        assert_eq!(g.heads.sorted(), HeadTuple::from_scalars(&[0.0, 4.0]).unwrap());

        let d = FederatedDataset::from_scalars(&[&[3.0, -1.0, 7.0]]).unwrap();
        assert_eq!(brute_force_global(&d, 3).unwrap().cost, 0.0);
    }

    #[test]
    fn brute_force_guard() {
        let vals: Vec<f64> = (0..30).map(f64::from).collect();
        let d = FederatedDataset::from_scalars(&[&vals]).unwrap();
        assert!(matches!(brute_force_global(&d, 3), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn odometer_is_lexicographic() {
        let mut a = vec![0, 0];
        let mut seen = vec![a.clone()];
        while next_assignment(&mut a, 3) {
            seen.push(a.clone());
        }
        assert_eq!(seen.len(), 9);
        assert!(seen.windows(2).all(|w| w[0] < w[1]));
    }
}
