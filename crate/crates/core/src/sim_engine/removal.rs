use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::RemovalStrategy;
use crate::error::{Error, Result};
use crate::social_graph::{NodeId, SocialGraph};

/// Picks `round(fraction * |V|)` nodes outside `protected` to silence.
/// Random removal samples uniformly; high-degree removal takes the largest
/// degrees, lower ids first on ties. The result is sorted.
pub fn apply_removal(
    graph: &SocialGraph,
    strategy: RemovalStrategy,
    fraction: f64,
    protected: &BTreeSet<NodeId>,
    seed: u64,
) -> Result<Vec<NodeId>> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::invalid(format!("removal fraction {fraction} outside [0, 1)")));
    }
    let k = (fraction * graph.node_count() as f64).round() as usize;
    let pool: Vec<NodeId> = graph.nodes().filter(|n| !protected.contains(n)).collect();
    if k > pool.len() {
        return Err(Error::Infeasible(format!(
            "cannot remove {k} nodes: only {} are outside the protected pairs",
            pool.len()
        )));
    }
    let mut out: Vec<NodeId> = match strategy {
        RemovalStrategy::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            sample(&mut rng, pool.len(), k).into_iter().map(|i| pool[i]).collect()
        }
        RemovalStrategy::HighDegree => {
            let mut by_degree = pool;
            by_degree.sort_by_key(|&n| (std::cmp::Reverse(graph.degree(n)), n));
            by_degree.truncate(k);
            by_degree
        }
    };
    out.sort();
    Ok(out)
}
