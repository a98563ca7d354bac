//! Federated datasets and seeded Gaussian-mixture generation.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = Vec<f64>;

/// Generator recorded in provenance metadata.
pub const PRNG_NAME: &str = "ChaCha20Rng (rand_chacha 0.9, seed_from_u64)";
/// Normal-variate method recorded in provenance metadata.
pub const NORMAL_METHOD: &str = "rand_distr 0.5 StandardNormal (ziggurat), x = mean + std * z";

/// Formats a float with 17 significant digits (exact round-trip for f64).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// The joint dataset `D = D_1 ∪ … ∪ D_M`, one point list per agent.
#[derive(Debug, Clone, PartialEq)]
pub struct FederatedDataset {
    dim: usize,
    agents: Vec<Vec<Point>>,
}

#[derive(Deserialize)]
struct RawDataset {
    dim: usize,
    agents: Vec<Vec<Point>>,
}

impl FederatedDataset {
    pub fn new(dim: usize, agents: Vec<Vec<Point>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParam("dimension must be positive".into()));
        }
        for p in agents.iter().flatten() {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::InvalidParam("data points must be finite".into()));
            }
        }
        Ok(FederatedDataset { dim, agents })
    }

    /// Convenience constructor for scalar data.
    pub fn from_scalars(agents: &[&[f64]]) -> Result<Self> {
        Self::new(
            1,
            agents
                .iter()
                .map(|a| a.iter().map(|&v| vec![v]).collect())
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn agents(&self) -> &[Vec<Point>] {
        &self.agents
    }

    pub fn agent(&self, m: usize) -> &[Point] {
        &self.agents[m]
    }

    /// `N = Σ N_m`.
    pub fn len(&self) -> usize {
        self.agents.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `N* = max_m N_m`.
    pub fn max_agent_len(&self) -> usize {
        self.agents.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// All points in agent-major order.
    pub fn points(&self) -> impl Iterator<Item = &Point> {
        self.agents.iter().flatten()
    }

    pub fn to_json(&self) -> String {
        let mut s = String::new();
        write!(s, "{{\"dim\":{},\"agents\":[", self.dim).unwrap();
        for (i, agent) in self.agents.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            s.push('[');
            for (j, p) in agent.iter().enumerate() {
                if j > 0 {
                    s.push(',');
                }
                s.push('[');
                for (c, v) in p.iter().enumerate() {
                    if c > 0 {
                        s.push(',');
                    }
                    s.push_str(&fmt_f64(*v));
                }
                s.push(']');
            }
            s.push(']');
        }
        s.push_str("]}");
        s
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: RawDataset = serde_json::from_str(s).map_err(|e| Error::json("dataset", e))?;
        Self::new(raw.dim, raw.agents)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub mean: Vec<f64>,
    /// Per-coordinate standard deviation.
    pub std: f64,
    pub count: usize,
}

/// One Gaussian component per agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub components: Vec<MixtureComponent>,
}

impl MixtureSpec {
    /// Ten agents in ℝ¹ with means (5, 20, 30, 60, 100) repeated twice,
    /// unit variance, 50 samples each.
    pub fn ring_example() -> Self {
        let means = [5.0, 20.0, 30.0, 60.0, 100.0, 5.0, 20.0, 30.0, 60.0, 100.0];
        MixtureSpec {
            components: means
                .iter()
                .map(|&m| MixtureComponent {
                    mean: vec![m],
                    std: 1.0,
                    count: 50,
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<usize> {
        let first = self
            .components
            .first()
            .ok_or_else(|| Error::InvalidParam("mixture needs at least one component".into()))?;
        let dim = first.mean.len();
        if dim == 0 {
            return Err(Error::InvalidParam("mixture mean must be non-empty".into()));
        }
        for c in &self.components {
            if c.mean.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: c.mean.len(),
                });
            }
            if !(c.std > 0.0 && c.std.is_finite()) {
                return Err(Error::InvalidParam(format!(
                    "standard deviation must be positive, got {}",
                    c.std
                )));
            }
            if c.mean.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParam("mixture mean must be finite".into()));
            }
        }
        Ok(dim)
    }
}

/// Draws `count` samples from `N(mean, std² I)` for each agent in order,
/// from a single stream seeded with `seed`.
pub fn generate_mixture(spec: &MixtureSpec, seed: u64) -> Result<FederatedDataset> {
    let dim = spec.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let agents = spec
        .components
        .iter()
        .map(|c| {
            (0..c.count)
                .map(|_| {
                    c.mean
                        .iter()
                        .map(|&mu| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            mu + c.std * z
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    FederatedDataset::new(dim, agents)
}

/// True iff the joint multiset holds at least `k` pairwise-distinct points
/// (exact coordinate equality).
pub fn validate_k_distinct(d: &FederatedDataset, k: usize) -> bool {
    let mut distinct: Vec<&Point> = Vec::new();
    for p in d.points() {
        if !distinct.contains(&p) {
            distinct.push(p);
            if distinct.len() >= k {
                return true;
            }
        }
    }
    distinct.len() >= k
}

/// `R₀`: the largest norm over the data hull, attained at a data point.
pub fn hull_radius(d: &FederatedDataset) -> Result<f64> {
    d.points()
        .map(|p| norm(p))
        .reduce(f64::max)
        .ok_or(Error::EmptyData)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundingBox {
    pub lower: Point,
    pub upper: Point,
}

impl BoundingBox {
    pub fn contains(&self, p: &[f64], slack: f64) -> bool {
        p.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (lo, hi))| *v >= lo - slack && *v <= hi + slack)
    }
}

/// Coordinate-wise min/max over `D ∪ extra`.
pub fn bounding_box(d: &FederatedDataset, extra: &[Point]) -> Result<BoundingBox> {
    let mut it = d.points().chain(extra.iter());
    let first = it.next().ok_or(Error::EmptyData)?;
    let mut lower = first.clone();
    let mut upper = first.clone();
    for p in it {
        if p.len() != lower.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                found: p.len(),
            });
        }
        for ((lo, hi), v) in lower.iter_mut().zip(upper.iter_mut()).zip(p) {
            *lo = lo.min(*v);
            *hi = hi.max(*v);
        }
    }
    Ok(BoundingBox { lower, upper })
}

pub(crate) fn norm(p: &[f64]) -> f64 {
    p.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
