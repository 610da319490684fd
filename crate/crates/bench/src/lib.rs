//! Shared fixtures for the operator benchmarks.

use nalgebra::DVector;

use sheaflap::sample;
use sheaflap::sheaf::CellularSheaf;
use sheaflap::spectral::complete_graph;
use sheaflap::{hodge, Cochain};

/// Constant sheaf of the given stalk dimension on K_n.
pub fn complete_constant(n: usize, d: usize) -> CellularSheaf {
    CellularSheaf::constant(&complete_graph(n), d, None).expect("constant sheaf")
}

/// Random sheaf with mixed stalk dimensions on a seeded random graph.
pub fn random_graph_sheaf(n: usize, max_dim: usize, seed: u64) -> CellularSheaf {
    let mut rng = sample::rng(seed);
    let graph = sample::random_connected_graph(n, n, &mut rng);
    sample::random_sheaf(&graph, max_dim, &mut rng).expect("random sheaf")
}

/// A deterministic dense 0-cochain for diffusion benchmarks.
pub fn ramp_cochain(sheaf: &CellularSheaf) -> Cochain {
    let index = hodge::BlockIndex::for_degree(sheaf, 0);
    let blocks = (0..index.len())
        .map(|p| DVector::from_fn(index.size(p), |i, _| (p + i) as f64 / (p + i + 1) as f64))
        .collect();
    Cochain { degree: 0, blocks }
}
