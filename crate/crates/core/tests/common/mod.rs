#![allow(dead_code)]

use nkmeans_core::dataset::Point;
use nkmeans_core::harness::{initial_heads, InitScheme};
use nkmeans_core::{build_topology, FederatedDataset, NetworkHeads, Topology, TopologyKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

pub struct Instance {
    pub data: FederatedDataset,
    pub topology: Topology,
    pub k: usize,
    pub init: NetworkHeads,
    pub rho: f64,
}

/// Points scattered around `k` random centers in `[-10, 10]^dim`.
pub fn clustered_points(rng: &mut ChaCha20Rng, n: usize, dim: usize, k: usize) -> Vec<Point> {
    let centers: Vec<Point> = (0..k)
        .map(|_| (0..dim).map(|_| rng.random_range(-10.0..10.0)).collect())
        .collect();
    (0..n)
        .map(|_| {
            let c = &centers[rng.random_range(0..k)];
            c.iter()
                .map(|v| v + 1.5 * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect()
}

/// Random instance: `M ∈ 2..=10`, `p ∈ {1, 2}`, `K ∈ {2, 3}`, `N ≤ 100`,
/// connected Erdős–Rényi graph, ρ from `rhos`, init at data points.
pub fn random_instance(seed: u64, rhos: &[f64]) -> Instance {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let m = rng.random_range(2..=10usize);
    let dim = rng.random_range(1..=2usize);
    let k = rng.random_range(2..=3usize);
    let per_agent = 100 / m;
    let lens: Vec<usize> = (0..m).map(|_| rng.random_range(1..=per_agent)).collect();
    let pts = clustered_points(&mut rng, lens.iter().sum(), dim, k);
    let mut it = pts.into_iter();
    let agents = lens.iter().map(|&l| it.by_ref().take(l).collect()).collect();
    let data = FederatedDataset::new(dim, agents).unwrap();
    let edge_prob = rng.random_range(0.2..0.9);
    let topology = build_topology(TopologyKind::ErdosRenyi, m, Some(edge_prob), rng.random()).unwrap();
    let init = initial_heads(&InitScheme::RandomDataPoints { seed: rng.random() }, k, &data).unwrap();
    let rho = rhos[rng.random_range(0..rhos.len())];
    Instance {
        data,
        topology,
        k,
        init,
        rho,
    }
}

/// Two agents on one edge, scalar data, `N ≤ 8`, values on a coarse grid.
pub fn tiny_two_agent(seed: u64) -> FederatedDataset {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    loop {
        let n = rng.random_range(2..=8usize);
        let split = rng.random_range(1..n);
        let vals: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(-20..=20i32)) / 2.0).collect();
        let d = FederatedDataset::from_scalars(&[&vals[..split], &vals[split..]]).unwrap();
        if nkmeans_core::dataset::validate_k_distinct(&d, 2) {
            return d;
        }
    }
}
