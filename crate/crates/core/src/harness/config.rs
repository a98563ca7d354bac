use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{generate_mixture, FederatedDataset, MixtureSpec, Point};
use crate::error::{Error, Result};
use crate::graph::{build_topology, Topology, TopologyKind};
use crate::lloyd::HeadTuple;
use crate::nkmeans::{Alpha, NetworkHeads, RunConfig, DEFAULT_HEAD_TOL, DEFAULT_STABILITY_WINDOW};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    /// Dataset JSON file; relative paths resolve against the config file.
    File { path: PathBuf },
    Mixture { spec: MixtureSpec, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologySpec {
    Generated {
        kind: TopologyKind,
        num_agents: usize,
        #[serde(default)]
        edge_prob: Option<f64>,
        #[serde(default)]
        seed: u64,
    },
    Explicit(Topology),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// Every agent starts from the same `K` heads.
    Shared { heads: Vec<Point> },
    /// Each agent draws `K` distinct points of the joint dataset.
    RandomDataPoints { seed: u64 },
}

fn default_max_rounds() -> usize {
    1_000_000
}
fn default_head_tol() -> f64 {
    DEFAULT_HEAD_TOL
}
fn default_window() -> usize {
    DEFAULT_STABILITY_WINDOW
}
fn default_every() -> usize {
    1
}
fn default_alpha() -> Alpha {
    Alpha::Auto
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub topology: TopologySpec,
    pub k: usize,
    pub rho: Vec<f64>,
    #[serde(default = "default_alpha")]
    pub alpha: Alpha,
    #[serde(default = "default_max_rounds")]
    pub max_rounds: usize,
    #[serde(default = "default_head_tol")]
    pub head_tol: f64,
    #[serde(default = "default_window")]
    pub stability_window: usize,
    pub init: InitScheme,
    pub output_dir: PathBuf,
    /// Trace CSV keeps every n-th round plus partition changes.
    #[serde(default = "default_every")]
    pub record_every: usize,
    /// Trajectory CSV keeps every n-th round plus the final one.
    #[serde(default = "default_every")]
    pub trajectory_every: usize,
}

impl ExperimentConfig {
    /// Reads, resolves relative paths against the file's directory, and
    /// validates.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let DatasetSource::File { path: p } = &mut cfg.dataset {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if cfg.output_dir.is_relative() {
            cfg.output_dir = base.join(&cfg.output_dir);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rho.is_empty() {
            return Err(Error::InvalidParam("rho list must not be empty".into()));
        }
        if let Some(r) = self.rho.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            return Err(Error::InvalidParam(format!("rho must be positive, got {r}")));
        }
        if self.k == 0 {
            return Err(Error::InvalidParam("k must be at least 1".into()));
        }
        if !(self.head_tol > 0.0 && self.head_tol.is_finite()) {
            return Err(Error::InvalidParam("head_tol must be positive".into()));
        }
        if let Alpha::Fixed(a) = self.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::InvalidParam(format!("alpha must be positive, got {a}")));
            }
        }
        match &self.dataset {
            DatasetSource::File { path } if !path.is_file() => {
                return Err(Error::InvalidParam(format!("dataset file {} does not exist", path.display())))
            }
            DatasetSource::Mixture { spec, .. } => {
                spec.validate()?;
            }
            _ => {}
        }
        if let InitScheme::Shared { heads } = &self.init {
            if heads.len() != self.k {
                return Err(Error::InvalidParam(format!(
                    "shared init has {} heads, expected k = {}",
                    heads.len(),
                    self.k
                )));
            }
        }
        Ok(())
    }

    /// Replaces every seed in the config.
    pub fn override_seeds(&mut self, seed: u64) {
        if let DatasetSource::Mixture { seed: s, .. } = &mut self.dataset {
            *s = seed;
        }
        if let TopologySpec::Generated { seed: s, .. } = &mut self.topology {
            *s = seed;
        }
        if let InitScheme::RandomDataPoints { seed: s } = &mut self.init {
            *s = seed;
        }
    }

    pub fn load_dataset(&self) -> Result<FederatedDataset> {
        match &self.dataset {
            DatasetSource::File { path } => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                FederatedDataset::from_json(&text)
            }
            DatasetSource::Mixture { spec, seed } => generate_mixture(spec, *seed),
        }
    }

    pub fn build_topology(&self) -> Result<Topology> {
        match &self.topology {
            TopologySpec::Generated {
                kind,
                num_agents,
                edge_prob,
                seed,
            } => build_topology(*kind, *num_agents, *edge_prob, *seed),
            TopologySpec::Explicit(t) => Ok(t.clone()),
        }
    }

    pub fn run_config(&self, rho: f64) -> RunConfig {
        RunConfig {
            rho,
            alpha: self.alpha,
            max_rounds: self.max_rounds,
            head_tol: self.head_tol,
            stability_window: self.stability_window,
            record_every: self.record_every,
        }
    }

    pub fn initial_heads(&self, d: &FederatedDataset) -> Result<NetworkHeads> {
        initial_heads(&self.init, self.k, d)
    }
}

/// Initial network state for a scheme. Random draws sample without
/// replacement from the joint dataset, agent by agent, from one ChaCha20
/// stream.
pub fn initial_heads(init: &InitScheme, k: usize, d: &FederatedDataset) -> Result<NetworkHeads> {
    match init {
        InitScheme::Shared { heads } => {
            let h = HeadTuple::new(heads.clone())?;
            if h.k() != k {
                return Err(Error::InvalidParam(format!("shared init has {} heads, expected {k}", h.k())));
            }
            Ok(NetworkHeads::consensus(&h, d.num_agents()))
        }
        InitScheme::RandomDataPoints { seed } => {
            let points: Vec<&Point> = d.points().collect();
            if points.len() < k {
                return Err(Error::InvalidParam(format!(
                    "cannot draw {k} initial heads from {} points",
                    points.len()
                )));
            }
            let mut rng = ChaCha20Rng::seed_from_u64(*seed);
            let agents = (0..d.num_agents())
                .map(|_| {
                    let idx = rand::seq::index::sample(&mut rng, points.len(), k);
                    HeadTuple::new(idx.iter().map(|i| points[i].clone()).collect())
                })
                .collect::<Result<_>>()?;
            NetworkHeads::new(agents)
        }
    }
}
