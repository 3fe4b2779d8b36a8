//! Social graph topology, upload behaviour and per-node local knowledge.

mod dataset;
mod generate;
mod schedule;
mod view;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dataset::{load_dataset, write_dataset, Dataset, LoadOptions, LoadReport};
pub use generate::{degree_upload_correlation, generate_ba, map_uploads, SyntheticUploads};
pub use schedule::{inter_upload_hours, month_schedule, upload_schedule, upload_timestamps, DAYS_PER_MONTH, HOURS_PER_MONTH};
pub use view::{local_view, LocalView};

/// Dense 0-based node identifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Undirected simple graph with sorted adjacency lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SocialGraph {
    adj: Vec<Vec<NodeId>>,
    edges: usize,
}

impl SocialGraph {
    /// Builds a graph on `n` nodes. Duplicate edges collapse; self-loops and
    /// out-of-range endpoints are rejected.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (NodeId, NodeId)>) -> Result<Self> {
        let mut adj: Vec<Vec<NodeId>> = vec![Vec::new(); n];
        for (a, b) in edges {
            if a == b {
                return Err(Error::invalid(format!("self-loop on node {a}")));
            }
            for x in [a, b] {
                if x.index() >= n {
                    return Err(Error::UnknownNode(x.0));
                }
            }
            adj[a.index()].push(b);
            adj[b.index()].push(a);
        }
        let mut total = 0;
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
            total += list.len();
        }
        Ok(Self { adj, edges: total / 2 })
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        (0..self.adj.len() as u32).map(NodeId)
    }

    pub fn contains(&self, node: NodeId) -> bool {
        node.index() < self.adj.len()
    }

    /// Sorted neighbour list. Panics on an unknown node.
    pub fn neighbours(&self, node: NodeId) -> &[NodeId] {
        &self.adj[node.index()]
    }

    pub fn degree(&self, node: NodeId) -> usize {
        self.adj[node.index()].len()
    }

    pub fn has_edge(&self, a: NodeId, b: NodeId) -> bool {
        self.adj
            .get(a.index())
            .is_some_and(|l| l.binary_search(&b).is_ok())
    }

    /// Each undirected edge once as `(low, high)`, sorted.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.adj.iter().enumerate().flat_map(|(i, l)| {
            let a = NodeId(i as u32);
            l.iter().filter(move |&&b| b > a).map(move |&b| (a, b))
        })
    }

    /// Connected-component label per node, labels assigned in node order.
    pub fn components(&self) -> Vec<u32> {
        let mut label = vec![u32::MAX; self.adj.len()];
        let mut next = 0;
        let mut queue = VecDeque::new();
        for start in 0..self.adj.len() {
            if label[start] != u32::MAX {
                continue;
            }
            label[start] = next;
            queue.push_back(start);
            while let Some(v) = queue.pop_front() {
                for w in &self.adj[v] {
                    if label[w.index()] == u32::MAX {
                        label[w.index()] = next;
                        queue.push_back(w.index());
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn is_connected(&self) -> bool {
        self.components().iter().all(|&c| c == 0)
    }
}

/// Monthly image upload counts of one node.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UploadBehaviour {
    pub node: NodeId,
    pub monthly_counts: Vec<u32>,
}

impl UploadBehaviour {
    pub fn new(node: NodeId, monthly_counts: Vec<u32>) -> Self {
        Self { node, monthly_counts }
    }

    pub fn months(&self) -> usize {
        self.monthly_counts.len()
    }

    pub fn total_uploads(&self) -> u64 {
        self.monthly_counts.iter().map(|&c| c as u64).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_edges_collapse() {
        let g = SocialGraph::from_edges(3, [(NodeId(0), NodeId(1)), (NodeId(1), NodeId(0)), (NodeId(1), NodeId(2))]).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.neighbours(NodeId(1)), &[NodeId(0), NodeId(2)]);
        assert!(g.has_edge(NodeId(2), NodeId(1)));
        assert!(!g.has_edge(NodeId(0), NodeId(2)));
    }

    #[test]
    fn rejects_self_loop_and_unknown() {
        assert!(SocialGraph::from_edges(2, [(NodeId(1), NodeId(1))]).is_err());
        assert!(matches!(
            SocialGraph::from_edges(2, [(NodeId(0), NodeId(5))]),
            Err(Error::UnknownNode(5))
        ));
    }

    #[test]
    fn components_split() {
        let g = SocialGraph::from_edges(4, [(NodeId(0), NodeId(1)), (NodeId(2), NodeId(3))]).unwrap();
        assert_eq!(g.components(), vec![0, 0, 1, 1]);
        assert!(!g.is_connected());
    }
}
