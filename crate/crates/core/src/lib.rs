//! Distributed K-means over simulated agent networks.
//!
//! Each agent holds a private slice of the data and a copy of the `K`
//! cluster heads. Agents reassign their own points to the nearest head,
//! then blend each head toward the average of their cluster data and their
//! neighbors' heads. [`lloyd`] holds the centralized baseline and
//! [`verify`] the certificates and exhaustive oracles used to check runs.

pub mod dataset;
pub mod error;
pub mod graph;
pub mod harness;
pub mod lloyd;
pub mod nkmeans;
pub mod verify;

pub use dataset::{FederatedDataset, MixtureComponent, MixtureSpec, Point};
pub use error::{Error, Result};
pub use graph::{build_topology, LaplacianSpectrum, Topology, TopologyKind};
pub use lloyd::{GlobalPartition, HeadTuple};
pub use nkmeans::{Alpha, Engine, LocalClustering, NetworkHeads, RoundMetrics, RunConfig, RunOutcome};
pub use verify::GenMinReport;
