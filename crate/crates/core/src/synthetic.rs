//! Seeded random connected grids, used by tests and benchmarks.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{Grid, LinkSpec, Node};
use crate::ingest::AdmittanceDistribution;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomGridParams {
    pub nodes: usize,
    /// Links added on top of a random spanning tree.
    pub extra_links: usize,
    pub generators: usize,
    pub admittance: AdmittanceDistribution,
}

impl RandomGridParams {
    pub fn new(nodes: usize, extra_links: usize, generators: usize) -> Self {
        RandomGridParams {
            nodes,
            extra_links,
            generators,
            admittance: AdmittanceDistribution::default(),
        }
    }
}

/// Connected grid with `params.nodes` nodes (at least 2) and at least one
/// generator. Extra links that would duplicate an existing pair are dropped,
/// so dense requests saturate at the complete graph.
pub fn random_grid(params: &RandomGridParams, seed: u64) -> Grid {
    let n = params.nodes.max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = params
        .admittance
        .sampler()
        .expect("valid admittance distribution");

    let mut pairs: Vec<(usize, usize)> = Vec::new();
    let mut has = vec![vec![false; n]; n];
    for v in 1..n {
        let u = rng.random_range(0..v);
        pairs.push((u, v));
        has[u][v] = true;
        has[v][u] = true;
    }
    let max_links = n * (n - 1) / 2;
    let target = (pairs.len() + params.extra_links).min(max_links);
    let mut attempts = 0;
    while pairs.len() < target && attempts < 50 * target {
        attempts += 1;
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u != v && !has[u][v] {
            has[u][v] = true;
            has[v][u] = true;
            pairs.push((u.min(v), u.max(v)));
        }
    }

    let generators = params.generators.clamp(1, n);
    let mut is_gen = vec![false; n];
    for g in sample(&mut rng, n, generators) {
        is_gen[g] = true;
    }
    let nodes = (0..n)
        .map(|i| {
            let id = format!("n{i}");
            if is_gen[i] {
                Node::generator(id)
            } else {
                Node::consumer(id)
            }
        })
        .collect();
    let links = pairs
        .iter()
        .map(|&(u, v)| LinkSpec::new(format!("n{u}"), format!("n{v}"), draw(&mut rng)))
        .collect();
    Grid::new(nodes, links).expect("generated grid is valid")
}

/// Small grid with random size: 3..=`max_nodes` nodes, a sprinkling of
/// extra links and 1..=3 generators.
pub fn random_small_grid(max_nodes: usize, seed: u64) -> Grid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_9e1d);
    let n = rng.random_range(3..=max_nodes.max(3));
    let extra = rng.random_range(0..=n / 2);
    let gens = rng.random_range(1..=3.min(n - 1));
    random_grid(&RandomGridParams::new(n, extra, gens), seed)
}
