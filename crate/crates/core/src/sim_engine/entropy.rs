use serde::{Deserialize, Serialize};

use super::engine::SimMetrics;
use crate::delay_model::PathMoments;
use crate::error::{Error, Result};
use crate::social_graph::{month_schedule, NodeId, UploadBehaviour};

/// Per-node delay statistics over every gap between consecutive uploads in
/// the whole schedule (`None` for nodes with fewer than two uploads).
pub fn ground_truth_moments(behaviours: &[UploadBehaviour], days_per_month: u32) -> Vec<Option<PathMoments>> {
    behaviours
        .iter()
        .map(|b| {
            let (mut n, mut sum, mut sq, mut min) = (0u64, 0f64, 0f64, u64::MAX);
            let mut last: Option<u64> = None;
            for (month, &c) in b.monthly_counts.iter().enumerate() {
                for (d, k) in month_schedule(c, days_per_month) {
                    let day = month as u64 * days_per_month as u64 + d as u64;
                    for j in 0..k as u64 {
                        let stamp = day * 24 + j * 24 / k as u64;
                        if let Some(prev) = last {
                            let gap = (stamp - prev).max(1);
                            n += 1;
                            sum += gap as f64;
                            sq += (gap * gap) as f64;
                            min = min.min(gap);
                        }
                        last = Some(stamp);
                    }
                }
            }
            (n > 0).then(|| {
                let mean = sum / n as f64;
                PathMoments {
                    min_delay: min as f64,
                    mean,
                    variance: (sq / n as f64 - mean * mean).max(0.0),
                }
            })
        })
        .collect()
}

/// Route score of a path from the summed delay statistics of its nodes.
/// Nodes without statistics are left out.
pub fn trace_score(trace: &[(NodeId, u32)], truth: &[Option<PathMoments>]) -> f64 {
    trace
        .iter()
        .filter_map(|(n, _)| truth.get(n.index()).copied().flatten())
        .fold(PathMoments::default(), PathMoments::add)
        .score()
}

/// Shannon entropy (bits) of `values` after min-max scaling to `[0, 1]` and
/// binning into `bins` equal-width bins. All-equal input has entropy 0.
pub fn binned_entropy(values: &[f64], bins: usize) -> f64 {
    if values.is_empty() || bins == 0 {
        return 0.0;
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut counts = vec![0usize; bins];
    for v in values {
        let x = if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
        counts[((x * bins as f64) as usize).min(bins - 1)] += 1;
    }
    let n = values.len() as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairEntropy {
    pub pair: usize,
    pub sender: NodeId,
    pub receiver: NodeId,
    pub delivered: usize,
    pub entropy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub bins: usize,
    pub max_entropy: f64,
    pub pairs: Vec<PairEntropy>,
    /// Pairs left out because none of their messages arrived.
    pub excluded: Vec<(NodeId, NodeId)>,
    pub median: Option<f64>,
    /// Share of analysed pairs whose entropy falls in each tenth of the
    /// `[0, max_entropy]` range.
    pub distribution: Vec<f64>,
}

/// Entropy of first-delivery path scores per pair.
pub fn path_entropy_analysis(
    metrics: &SimMetrics,
    pairs: &[(NodeId, NodeId)],
    truth: &[Option<PathMoments>],
    bins: usize,
) -> Result<EntropyReport> {
    if bins == 0 {
        return Err(Error::invalid("entropy needs at least one bin"));
    }
    let mut scores: Vec<Vec<f64>> = vec![Vec::new(); pairs.len()];
    for m in &metrics.messages {
        if m.first_delivered_day.is_some() {
            if m.first_delivery_trace.is_empty() {
                return Err(Error::NoData("delivered message without a trace; run with tracing on".into()));
            }
            scores[m.pair].push(trace_score(&m.first_delivery_trace, truth));
        }
    }
    let mut out = Vec::new();
    let mut excluded = Vec::new();
    for (i, s) in scores.iter().enumerate() {
        let (sender, receiver) = pairs[i];
        if s.is_empty() {
            excluded.push((sender, receiver));
            continue;
        }
        out.push(PairEntropy {
            pair: i,
            sender,
            receiver,
            delivered: s.len(),
            entropy: binned_entropy(s, bins),
        });
    }
    let max_entropy = (bins as f64).log2();
    let mut sorted: Vec<f64> = out.iter().map(|p| p.entropy).collect();
    sorted.sort_by(f64::total_cmp);
    let median = (!sorted.is_empty()).then(|| {
        let k = sorted.len();
        if k % 2 == 1 {
            sorted[k / 2]
        } else {
            (sorted[k / 2 - 1] + sorted[k / 2]) / 2.0
        }
    });
    let mut distribution = vec![0.0; 10];
    for e in &sorted {
        let x = if max_entropy > 0.0 { e / max_entropy } else { 0.0 };
        distribution[((x * 10.0) as usize).min(9)] += 1.0 / sorted.len() as f64;
    }
    Ok(EntropyReport {
        bins,
        max_entropy,
        pairs: out,
        excluded,
        median,
        distribution,
    })
}
