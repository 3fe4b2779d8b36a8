use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::engine::{run, run_with, EngineMutation, SessionLog, SimMetrics};
use super::{Removal, RemovalStrategy, SimConfig};
use crate::error::{Error, Result};
use crate::social_graph::{NodeId, SocialGraph, UploadBehaviour};

/// Draws `count` distinct ordered pairs of distinct nodes from the same
/// connected component. Adjacent pairs are allowed. The draw for a larger
/// count extends the draw for a smaller one with the same seed.
pub fn draw_pairs(graph: &SocialGraph, count: usize, seed: u64) -> Result<Vec<(NodeId, NodeId)>> {
    let labels = graph.components();
    let mut members: Vec<Vec<NodeId>> = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        if members.len() <= l as usize {
            members.resize(l as usize + 1, Vec::new());
        }
        members[l as usize].push(NodeId(i as u32));
    }
    let feasible: usize = members.iter().map(|m| m.len() * m.len().saturating_sub(1)).sum();
    if count > feasible {
        return Err(Error::Infeasible(format!("{count} pairs requested, only {feasible} exist")));
    }
    let senders: Vec<NodeId> = graph
        .nodes()
        .filter(|n| members[labels[n.index()] as usize].len() > 1)
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let s = senders[rng.random_range(0..senders.len())];
        let comp = &members[labels[s.index()] as usize];
        let r = comp[rng.random_range(0..comp.len())];
        if r != s && seen.insert((s, r)) {
            out.push((s, r));
        }
    }
    Ok(out)
}

/// One run per pair count, pairs taken as prefixes of a single draw.
pub fn congestion_sweep(
    base: &SimConfig,
    graph: &SocialGraph,
    behaviours: &[UploadBehaviour],
    pair_counts: &[usize],
    pair_seed: u64,
) -> Result<Vec<(usize, SimMetrics)>> {
    let max = pair_counts.iter().copied().max().unwrap_or(0);
    let pairs = draw_pairs(graph, max, pair_seed)?;
    pair_counts
        .iter()
        .map(|&k| {
            let cfg = SimConfig {
                pairs: pairs[..k].to_vec(),
                ..base.clone()
            };
            Ok((k, run(&cfg, graph, behaviours)?))
        })
        .collect()
}

/// One run per `(strategy, fraction)`, all with the pairs of `base`.
pub fn removal_sweep(
    base: &SimConfig,
    graph: &SocialGraph,
    behaviours: &[UploadBehaviour],
    strategies: &[RemovalStrategy],
    fractions: &[f64],
    at_day: u32,
) -> Result<Vec<(RemovalStrategy, f64, SimMetrics)>> {
    let mut out = Vec::new();
    for &strategy in strategies {
        for &fraction in fractions {
            let cfg = SimConfig {
                removal: Some(Removal {
                    strategy,
                    fraction,
                    at_day,
                }),
                ..base.clone()
            };
            out.push((strategy, fraction, run(&cfg, graph, behaviours)?));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndistinguishabilityReport {
    pub passed: bool,
    pub sessions_idle: usize,
    pub sessions_loaded: usize,
    /// Nodes whose upload days or counts differ between the two runs.
    pub differing_nodes: Vec<NodeId>,
}

/// Runs the configuration with and without its pairs under the same seed
/// and compares every node's upload days and counts.
pub fn indistinguishability_check(
    config: &SimConfig,
    graph: &SocialGraph,
    behaviours: &[UploadBehaviour],
) -> Result<IndistinguishabilityReport> {
    indistinguishability_check_with(config, graph, behaviours, EngineMutation::None)
}

#[doc(hidden)]
pub fn indistinguishability_check_with(
    config: &SimConfig,
    graph: &SocialGraph,
    behaviours: &[UploadBehaviour],
    mutation: EngineMutation,
) -> Result<IndistinguishabilityReport> {
    let idle_cfg = SimConfig {
        pairs: Vec::new(),
        trace: false,
        ..config.clone()
    };
    let loaded_cfg = SimConfig {
        trace: false,
        ..config.clone()
    };
    let mut idle = SessionLog::default();
    run_with(&idle_cfg, graph, behaviours, &mut idle, mutation)?;
    let mut loaded = SessionLog::default();
    run_with(&loaded_cfg, graph, behaviours, &mut loaded, mutation)?;
    let n = graph.node_count();
    let (a, b) = (idle.per_node(n), loaded.per_node(n));
    let differing_nodes: Vec<NodeId> = (0..n)
        .filter(|&i| a[i] != b[i])
        .map(|i| NodeId(i as u32))
        .collect();
    Ok(IndistinguishabilityReport {
        passed: differing_nodes.is_empty(),
        sessions_idle: idle.sessions.len(),
        sessions_loaded: loaded.sessions.len(),
        differing_nodes,
    })
}
