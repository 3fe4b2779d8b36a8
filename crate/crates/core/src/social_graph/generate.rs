use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Poisson};
use serde::{Deserialize, Serialize};

use super::{NodeId, SocialGraph, UploadBehaviour};
use crate::error::{Error, Result};

/// Barabasi-Albert preferential attachment graph.
///
/// Starts from a complete graph on `m` nodes; every later node attaches `m`
/// edges to distinct existing nodes chosen proportionally to degree. The
/// result has exactly `m*(m-1)/2 + m*(n-m)` edges.
pub fn generate_ba(n: usize, m: usize, seed: u64) -> Result<SocialGraph> {
    if m == 0 {
        return Err(Error::invalid("BA attachment count must be at least 1"));
    }
    if n <= m {
        return Err(Error::invalid(format!("BA needs n > m, got n={n}, m={m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity(m * n);
    // every edge endpoint once, so uniform sampling is degree-proportional
    let mut endpoints: Vec<u32> = Vec::with_capacity(2 * m * n);
    for a in 0..m as u32 {
        for b in a + 1..m as u32 {
            edges.push((NodeId(a), NodeId(b)));
            endpoints.extend([a, b]);
        }
    }
    let mut targets: Vec<u32> = Vec::with_capacity(m);
    for v in m as u32..n as u32 {
        targets.clear();
        while targets.len() < m {
            let t = if endpoints.is_empty() {
                rng.random_range(0..v)
            } else {
                endpoints[rng.random_range(0..endpoints.len())]
            };
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            edges.push((NodeId(t), NodeId(v)));
            endpoints.extend([t, v]);
        }
    }
    SocialGraph::from_edges(n, edges)
}

/// Assigns behaviour record `i` to node `i`. With `permutation_seed` the
/// records are shuffled deterministically first.
pub fn map_uploads(
    graph: &SocialGraph,
    behaviours: &[UploadBehaviour],
    permutation_seed: Option<u64>,
) -> Result<Vec<UploadBehaviour>> {
    let n = graph.node_count();
    if behaviours.len() < n {
        return Err(Error::invalid(format!(
            "{} behaviour records for {n} nodes",
            behaviours.len()
        )));
    }
    let mut order: Vec<usize> = (0..behaviours.len()).collect();
    if let Some(seed) = permutation_seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    Ok(order
        .into_iter()
        .take(n)
        .enumerate()
        .map(|(i, src)| UploadBehaviour::new(NodeId(i as u32), behaviours[src].monthly_counts.clone()))
        .collect())
}

/// Pearson correlation between node degree and total uploads.
pub fn degree_upload_correlation(graph: &SocialGraph, behaviours: &[UploadBehaviour]) -> f64 {
    let xs: Vec<f64> = graph.nodes().map(|v| graph.degree(v) as f64).collect();
    let ys: Vec<f64> = behaviours.iter().map(|b| b.total_uploads() as f64).collect();
    pearson(&xs, &ys)
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len()) as f64;
    if n < 2.0 {
        return 0.0;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// Synthetic monthly upload counts, used when the original crawl is not
/// available.
///
/// Each node draws a base monthly rate from a log-normal around
/// `median_monthly`; every month the rate is jittered by a second log-normal
/// factor, the month is silent with probability `silent_month_prob`, and the
/// count is Poisson around the jittered rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticUploads {
    pub months: usize,
    pub median_monthly: f64,
    pub node_sigma: f64,
    pub month_sigma: f64,
    pub silent_month_prob: f64,
}

impl Default for SyntheticUploads {
    fn default() -> Self {
        Self {
            months: 64,
            median_monthly: 30.0,
            node_sigma: 1.0,
            month_sigma: 0.5,
            silent_month_prob: 0.0,
        }
    }
}

impl SyntheticUploads {
    pub fn generate(&self, nodes: usize, seed: u64) -> Result<Vec<UploadBehaviour>> {
        if !(self.median_monthly > 0.0) || self.node_sigma < 0.0 || self.month_sigma < 0.0 {
            return Err(Error::invalid("synthetic upload parameters must be positive"));
        }
        if !(0.0..1.0).contains(&self.silent_month_prob) {
            return Err(Error::invalid("silent month probability must lie in [0, 1)"));
        }
        let base = LogNormal::new(self.median_monthly.ln(), self.node_sigma)
            .map_err(|e| Error::invalid(e.to_string()))?;
        let jitter = LogNormal::new(0.0, self.month_sigma).map_err(|e| Error::invalid(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..nodes)
            .map(|i| {
                let rate: f64 = base.sample(&mut rng);
                let counts = (0..self.months)
                    .map(|_| {
                        let silent = rng.random_bool(self.silent_month_prob);
                        let lambda = rate * jitter.sample(&mut rng);
                        if silent || lambda <= 0.0 {
                            return 0;
                        }
                        let draw: f64 = Poisson::new(lambda.min(1e6)).map_or(0.0, |p| p.sample(&mut rng));
                        draw as u32
                    })
                    .collect();
                UploadBehaviour::new(NodeId(i as u32), counts)
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ba_edge_count_is_exact() {
        for (n, m) in [(10, 1), (50, 2), (200, 5)] {
            let g = generate_ba(n, m, 7).unwrap();
            assert_eq!(g.node_count(), n);
            assert_eq!(g.edge_count(), m * (m - 1) / 2 + m * (n - m));
            assert!(g.is_connected());
        }
    }

    #[test]
    fn ba_m1_is_tree() {
        let g = generate_ba(10, 1, 3).unwrap();
        assert_eq!(g.edge_count(), 9);
        assert!(g.is_connected());
    }

    #[test]
    fn ba_is_deterministic() {
        assert_eq!(generate_ba(300, 3, 11).unwrap(), generate_ba(300, 3, 11).unwrap());
        assert_ne!(generate_ba(300, 3, 11).unwrap(), generate_ba(300, 3, 12).unwrap());
    }

    #[test]
    fn ba_rejects_small_n() {
        assert!(generate_ba(5, 5, 0).is_err());
        assert!(generate_ba(5, 0, 0).is_err());
    }

    #[test]
    fn mapping_identity_and_permutation() {
        let g = generate_ba(20, 2, 1).unwrap();
        let recs = SyntheticUploads::default().generate(25, 9).unwrap();
        let mapped = map_uploads(&g, &recs, None).unwrap();
        assert_eq!(mapped.len(), 20);
        for (i, b) in mapped.iter().enumerate() {
            assert_eq!(b.node, NodeId(i as u32));
            assert_eq!(b.monthly_counts, recs[i].monthly_counts);
        }
        let a = map_uploads(&g, &recs, Some(5)).unwrap();
        assert_eq!(a, map_uploads(&g, &recs, Some(5)).unwrap());
        assert_ne!(a, mapped);
        assert!(map_uploads(&g, &recs[..10], None).is_err());
    }

    #[test]
    fn synthetic_median_near_target() {
        let recs = SyntheticUploads::default().generate(2000, 4).unwrap();
        let mut all: Vec<u32> = recs.iter().flat_map(|r| r.monthly_counts.iter().copied()).filter(|&c| c > 0).collect();
        all.sort_unstable();
        let median = all[all.len() / 2] as f64;
        assert!((20.0..45.0).contains(&median), "median {median}");
    }
}
