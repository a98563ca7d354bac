//! Undirected communication graphs and their Laplacian spectra.
//!
//! Agents are indexed `0..M`. The Laplacian is `L = D - A` with unit edge
//! weights; it is assembled in integer arithmetic and then handed to a dense
//! symmetric eigensolver.

use std::collections::{BTreeSet, VecDeque};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on computed Laplacian eigenvalues.
pub const EIGEN_TOL: f64 = 1e-10;

/// Threshold on `λ₂` used to call a graph connected.
pub const CONNECTIVITY_TOL: f64 = 1e-8;

/// Resampling budget for Erdős–Rényi generation.
pub const ER_MAX_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    Ring,
    Path,
    Complete,
    /// Hub at agent 0.
    Star,
    ErdosRenyi,
}

/// An undirected simple graph over `num_agents` agents.
///
/// Edges are stored canonically: `(m, l)` with `m < l`, sorted
/// lexicographically, no duplicates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawTopology", into = "RawTopology")]
pub struct Topology {
    num_agents: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct RawTopology {
    num_agents: usize,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<RawTopology> for Topology {
    type Error = Error;

    fn try_from(raw: RawTopology) -> Result<Self> {
        Topology::new(raw.num_agents, raw.edges.into_iter().map(|[m, l]| (m, l)))
    }
}

impl From<Topology> for RawTopology {
    fn from(t: Topology) -> Self {
        RawTopology {
            num_agents: t.num_agents,
            edges: t.edges.iter().map(|&(m, l)| [m, l]).collect(),
        }
    }
}

impl Topology {
    /// Builds a connected topology from an edge list.
    pub fn new(num_agents: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let t = Self::new_allow_disconnected(num_agents, edges)?;
        if !t.is_connected() {
            return Err(Error::NotConnected { attempts: 1 });
        }
        Ok(t)
    }

    /// Builds a topology, validating structure (range, self-loops,
    /// duplicates) but not connectivity. Used for analysing raw candidates.
    pub fn new_allow_disconnected(
        num_agents: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        if num_agents == 0 {
            return Err(Error::InvalidParam("topology needs at least one agent".into()));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            for v in [a, b] {
                if v >= num_agents {
                    return Err(Error::IndexOutOfRange {
                        index: v,
                        len: num_agents,
                    });
                }
            }
            if a == b {
                return Err(Error::InvalidParam(format!("self-loop at agent {a}")));
            }
            if !set.insert((a.min(b), a.max(b))) {
                return Err(Error::InvalidParam(format!("duplicate edge ({a}, {b})")));
            }
        }
        let edges: Vec<_> = set.into_iter().collect();
        let mut neighbors = vec![Vec::new(); num_agents];
        for &(m, l) in &edges {
            neighbors[m].push(l);
            neighbors[l].push(m);
        }
        for n in &mut neighbors {
            n.sort_unstable();
        }
        Ok(Topology {
            num_agents,
            edges,
            neighbors,
        })
    }

    pub fn num_agents(&self) -> usize {
        self.num_agents
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// `Ω_m`, sorted ascending.
    pub fn neighbors(&self, m: usize) -> Result<&[usize]> {
        self.neighbors
            .get(m)
            .map(Vec::as_slice)
            .ok_or(Error::IndexOutOfRange {
                index: m,
                len: self.num_agents,
            })
    }

    pub(crate) fn neighbors_of(&self, m: usize) -> &[usize] {
        &self.neighbors[m]
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    pub fn min_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).min().unwrap_or(0)
    }

    pub fn max_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Breadth-first connectivity check.
    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.num_agents];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = queue.pop_front() {
            for &w in &self.neighbors[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    queue.push_back(w);
                }
            }
        }
        count == self.num_agents
    }

    /// Integer Laplacian `D - A`, row-major.
    pub fn laplacian_int(&self) -> Vec<Vec<i64>> {
        let n = self.num_agents;
        let mut l = vec![vec![0i64; n]; n];
        for &(a, b) in &self.edges {
            l[a][b] -= 1;
            l[b][a] -= 1;
            l[a][a] += 1;
            l[b][b] += 1;
        }
        l
    }

    pub fn laplacian(&self) -> DMatrix<f64> {
        let li = self.laplacian_int();
        DMatrix::from_fn(self.num_agents, self.num_agents, |i, j| li[i][j] as f64)
    }

    /// Full sorted Laplacian spectrum.
    pub fn spectrum(&self) -> LaplacianSpectrum {
        let eig = self.laplacian().symmetric_eigen();
        let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        eigenvalues.sort_by(f64::total_cmp);
        // Clamp solver noise around the exact zero eigenvalue.
        for v in &mut eigenvalues {
            if v.abs() <= EIGEN_TOL {
                *v = v.max(0.0);
            }
        }
        LaplacianSpectrum {
            eigenvalues,
            d_min: self.min_degree(),
            d_max: self.max_degree(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("topology serialization is infallible")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::json("topology", e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplacianSpectrum {
    /// Ascending: `λ₁ ≤ … ≤ λ_M`.
    pub eigenvalues: Vec<f64>,
    pub d_min: usize,
    pub d_max: usize,
}

impl LaplacianSpectrum {
    /// Algebraic connectivity `λ₂`; zero for a single agent.
    pub fn lambda2(&self) -> f64 {
        self.eigenvalues.get(1).copied().unwrap_or(0.0)
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }
}

/// Builds a connected topology of the requested kind.
///
/// `edge_prob` must be given exactly when `kind` is Erdős–Rényi; attempt `a`
/// draws from `ChaCha20Rng::seed_from_u64(seed + a)`.
pub fn build_topology(
    kind: TopologyKind,
    num_agents: usize,
    edge_prob: Option<f64>,
    seed: u64,
) -> Result<Topology> {
    if num_agents < 2 {
        return Err(Error::InvalidParam(format!(
            "topology needs M >= 2 agents, got {num_agents}"
        )));
    }
    match (kind, edge_prob) {
        (TopologyKind::ErdosRenyi, None) => {
            return Err(Error::InvalidParam("erdos_renyi requires edge_prob".into()))
        }
        (TopologyKind::ErdosRenyi, Some(p)) if !(p > 0.0 && p <= 1.0) => {
            return Err(Error::InvalidParam(format!("edge_prob must lie in (0, 1], got {p}")))
        }
        (TopologyKind::ErdosRenyi, Some(_)) => {}
        (_, Some(_)) => {
            return Err(Error::InvalidParam(
                "edge_prob is only meaningful for erdos_renyi".into(),
            ))
        }
        (_, None) => {}
    }

    let m = num_agents;
    let edges: Vec<(usize, usize)> = match kind {
        TopologyKind::Ring => {
            let mut e: BTreeSet<(usize, usize)> = BTreeSet::new();
            for i in 0..m {
                let j = (i + 1) % m;
                e.insert((i.min(j), i.max(j)));
            }
            e.into_iter().collect()
        }
        TopologyKind::Path => (0..m - 1).map(|i| (i, i + 1)).collect(),
        TopologyKind::Complete => (0..m)
            .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
            .collect(),
        TopologyKind::Star => (1..m).map(|i| (0, i)).collect(),
        TopologyKind::ErdosRenyi => {
            let p = edge_prob.expect("checked above");
            for attempt in 0..ER_MAX_ATTEMPTS {
                let t = erdos_renyi_candidate(m, p, seed.wrapping_add(attempt as u64))?;
                if t.is_connected() {
                    return Ok(t);
                }
            }
            return Err(Error::NotConnected {
                attempts: ER_MAX_ATTEMPTS,
            });
        }
    };
    Topology::new(m, edges)
}

/// One raw G(M, p) sample; may be disconnected.
pub fn erdos_renyi_candidate(num_agents: usize, edge_prob: f64, seed: u64) -> Result<Topology> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..num_agents {
        for j in i + 1..num_agents {
            if rng.random::<f64>() < edge_prob {
                edges.push((i, j));
            }
        }
    }
    Topology::new_allow_disconnected(num_agents, edges)
}
