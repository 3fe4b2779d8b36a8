use std::collections::{BTreeMap, BTreeSet};

use super::{NodeId, SocialGraph};
use crate::delay_model::DelayDistribution;
use crate::error::{Error, Result};

/// What a node knows: its friends, their friend lists and their upload
/// delay estimates. Nothing beyond two hops.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalView {
    pub center: NodeId,
    pub neighbours: BTreeSet<NodeId>,
    pub neighbour_distributions: BTreeMap<NodeId, DelayDistribution>,
    pub neighbours_of_neighbours: BTreeMap<NodeId, BTreeSet<NodeId>>,
}

impl LocalView {
    /// Every node mentioned anywhere in the view, including the center.
    pub fn known_nodes(&self) -> BTreeSet<NodeId> {
        let mut all = BTreeSet::from([self.center]);
        all.extend(&self.neighbours);
        all.extend(self.neighbour_distributions.keys());
        for (n, friends) in &self.neighbours_of_neighbours {
            all.insert(*n);
            all.extend(friends);
        }
        all
    }

    pub fn friends_of(&self, neighbour: NodeId) -> Option<&BTreeSet<NodeId>> {
        self.neighbours_of_neighbours.get(&neighbour)
    }
}

/// Builds the 2-hop view of `center`. Estimates for nodes that are not
/// neighbours are ignored.
pub fn local_view(
    graph: &SocialGraph,
    center: NodeId,
    estimates: &BTreeMap<NodeId, DelayDistribution>,
) -> Result<LocalView> {
    if !graph.contains(center) {
        return Err(Error::UnknownNode(center.0));
    }
    let neighbours: BTreeSet<NodeId> = graph.neighbours(center).iter().copied().collect();
    let neighbour_distributions = neighbours
        .iter()
        .filter_map(|n| estimates.get(n).map(|d| (*n, d.clone())))
        .collect();
    let neighbours_of_neighbours = neighbours
        .iter()
        .map(|&n| (n, graph.neighbours(n).iter().copied().collect()))
        .collect();
    Ok(LocalView {
        center,
        neighbours,
        neighbour_distributions,
        neighbours_of_neighbours,
    })
}
