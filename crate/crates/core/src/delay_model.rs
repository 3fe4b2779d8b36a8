//! Discrete inter-upload delay distributions.
//!
//! A node's "bandwidth" is the random time between two of its image uploads.
//! Distributions live on contiguous integer-hour supports so that the sum of
//! independent delays along a route is an exact discrete convolution. Routes
//! are ranked by the steepness score of the convolved CDF,
//! `sum_i (1 - P_i) * X_i`, where `X_i` is the delay value of bin `i` and the
//! sum runs over the CDF's own support.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default support horizon for truncated convolutions (30 days).
pub const DEFAULT_HORIZON_HOURS: u32 = 720;

/// Default number of recent gaps kept by [`estimate_distribution`].
pub const DEFAULT_ESTIMATE_WINDOW: usize = 20;

const SUM_TOLERANCE: f64 = 1e-9;

/// Probability mass function over integer delays in hours.
///
/// The support is the contiguous range `min_delay ..= min_delay + len - 1`
/// and both end bins carry positive mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayDistribution {
    min_delay: u32,
    probs: Vec<f64>,
}

impl DelayDistribution {
    /// Builds a distribution from `(delay, probability)` bins.
    ///
    /// Delays must be strictly increasing, probabilities non-negative and
    /// summing to one. Gaps in the support are filled with zero bins.
    pub fn from_bins(bins: &[(u32, f64)]) -> Result<Self> {
        if bins.is_empty() {
            return Err(Error::invalid("distribution has no bins"));
        }
        for w in bins.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::invalid("bin delays must be strictly increasing"));
            }
        }
        if let Some(&(d, p)) = bins.iter().find(|(_, p)| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::invalid(format!("bin {d} has invalid probability {p}")));
        }
        let total: f64 = bins.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::invalid(format!("probabilities sum to {total}, not 1")));
        }
        let min = bins[0].0;
        let max = bins[bins.len() - 1].0;
        let mut probs = vec![0.0; (max - min) as usize + 1];
        for &(d, p) in bins {
            probs[(d - min) as usize] = p;
        }
        Self::from_dense(min, probs)
    }

    /// Builds a distribution from a dense probability vector starting at
    /// `min_delay`. Zero bins at either end are trimmed; mass is renormalized.
    pub fn from_dense(min_delay: u32, mut probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::invalid("probabilities must be finite and non-negative"));
        }
        let first = probs
            .iter()
            .position(|&p| p > 0.0)
            .ok_or_else(|| Error::invalid("distribution has no mass"))?;
        let last = probs.iter().rposition(|&p| p > 0.0).unwrap_or(first);
        probs.truncate(last + 1);
        probs.drain(..first);
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        Ok(Self {
            min_delay: min_delay + first as u32,
            probs,
        })
    }

    pub fn point_mass(delay: u32) -> Self {
        Self {
            min_delay: delay,
            probs: vec![1.0],
        }
    }

    /// Uniform over `lo ..= hi`.
    pub fn uniform(lo: u32, hi: u32) -> Result<Self> {
        if hi < lo {
            return Err(Error::invalid("uniform range is empty"));
        }
        let n = (hi - lo + 1) as usize;
        Ok(Self {
            min_delay: lo,
            probs: vec![1.0 / n as f64; n],
        })
    }

    pub fn min_delay(&self) -> u32 {
        self.min_delay
    }

    pub fn max_delay(&self) -> u32 {
        self.min_delay + self.probs.len() as u32 - 1
    }

    /// Number of bins in the support.
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn pmf(&self, delay: u32) -> f64 {
        delay
            .checked_sub(self.min_delay)
            .and_then(|i| self.probs.get(i as usize))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn bins(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .map(move |(i, &p)| (self.min_delay + i as u32, p))
    }

    pub fn mean(&self) -> f64 {
        self.bins().map(|(d, p)| d as f64 * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.bins()
            .map(|(d, p)| {
                let x = d as f64 - mean;
                x * x * p
            })
            .sum()
    }

    /// Distribution of the sum of two independent delays.
    pub fn convolve(&self, other: &Self) -> Self {
        // iterate the operand with fewer non-zero bins in the outer loop
        let (sparse, dense) = if nonzero(&self.probs) <= nonzero(&other.probs) {
            (self, other)
        } else {
            (other, self)
        };
        let mut out = vec![0.0; self.probs.len() + other.probs.len() - 1];
        for (i, &p) in sparse.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (slot, &q) in out[i..].iter_mut().zip(&dense.probs) {
                *slot += p * q;
            }
        }
        normalize(&mut out);
        Self {
            min_delay: self.min_delay + other.min_delay,
            probs: out,
        }
    }

    /// Convolution whose support is cut at `horizon` hours. Mass beyond the
    /// horizon is folded into the horizon bin.
    pub fn convolve_truncated(&self, other: &Self, horizon: u32) -> Self {
        self.convolve(other).truncated(horizon)
    }

    /// Cuts the support at `horizon`, folding the tail mass into that bin.
    pub fn truncated(mut self, horizon: u32) -> Self {
        if self.max_delay() <= horizon {
            return self;
        }
        if self.min_delay >= horizon {
            return Self::point_mass(horizon);
        }
        let keep = (horizon - self.min_delay) as usize + 1;
        let tail: f64 = self.probs[keep..].iter().sum();
        self.probs.truncate(keep);
        self.probs[keep - 1] += tail;
        self
    }

    pub fn to_cdf(&self) -> DelayCdf {
        let mut acc = 0.0;
        let mut values: Vec<f64> = self
            .probs
            .iter()
            .map(|p| {
                acc += p;
                acc.min(1.0)
            })
            .collect();
        if let Some(last) = values.last_mut() {
            *last = 1.0;
        }
        DelayCdf {
            min_delay: self.min_delay,
            values,
        }
    }
}

fn nonzero(probs: &[f64]) -> usize {
    probs.iter().filter(|&&p| p != 0.0).count()
}

fn normalize(probs: &mut [f64]) {
    let total: f64 = probs.iter().sum();
    if total > 0.0 {
        probs.iter_mut().for_each(|p| *p /= total);
    }
}

/// Cumulative distribution over a contiguous integer-hour support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayCdf {
    min_delay: u32,
    values: Vec<f64>,
}

impl DelayCdf {
    /// Builds a CDF from `(delay, cumulative)` points on a contiguous support.
    pub fn from_points(points: &[(u32, f64)]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("CDF has no points"));
        }
        for (i, w) in points.windows(2).enumerate() {
            if w[1].0 != w[0].0 + 1 {
                return Err(Error::invalid(format!("CDF support not contiguous at index {}", i + 1)));
            }
            if w[1].1 + SUM_TOLERANCE < w[0].1 {
                return Err(Error::invalid("CDF values must be non-decreasing"));
            }
        }
        if points.iter().any(|(_, c)| !(0.0..=1.0 + SUM_TOLERANCE).contains(c)) {
            return Err(Error::invalid("CDF values must lie in [0, 1]"));
        }
        let last = points[points.len() - 1].1;
        if (last - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::invalid(format!("CDF ends at {last}, not 1")));
        }
        Ok(Self {
            min_delay: points[0].0,
            values: points.iter().map(|(_, c)| *c).collect(),
        })
    }

    pub fn min_delay(&self) -> u32 {
        self.min_delay
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn points(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &c)| (self.min_delay + i as u32, c))
    }

    /// Steepness score `sum (1 - P_i) * X_i`. Lower means the CDF reaches one
    /// sooner.
    pub fn score(&self) -> f64 {
        self.points().map(|(x, p)| (1.0 - p) * x as f64).sum()
    }

    /// Pads the CDF with ones on consecutive delays until it has
    /// `target_len` points.
    pub fn extend(&self, target_len: usize) -> Result<Self> {
        if target_len < self.values.len() {
            return Err(Error::invalid(format!(
                "cannot extend a CDF of length {} to {target_len}",
                self.values.len()
            )));
        }
        let mut values = self.values.clone();
        values.resize(target_len, 1.0);
        Ok(Self {
            min_delay: self.min_delay,
            values,
        })
    }
}

pub fn cdf_score(cdf: &DelayCdf) -> f64 {
    cdf.score()
}

/// Score of the CDF of the total delay along a route whose per-node delay
/// distributions are `path`.
pub fn convolution_route_score(path: &[DelayDistribution]) -> Result<f64> {
    let (first, rest) = path
        .split_first()
        .ok_or_else(|| Error::invalid("route has no delay distributions"))?;
    let total = rest.iter().fold(first.clone(), |acc, d| acc.convolve(d));
    Ok(total.to_cdf().score())
}

/// Empirical histogram over the most recent `window` observed gaps.
pub fn estimate_distribution(gaps: &[u32], window: usize) -> Result<DelayDistribution> {
    if gaps.is_empty() {
        return Err(Error::NoData("no inter-upload gaps observed".into()));
    }
    if window == 0 {
        return Err(Error::invalid("estimate window must be positive"));
    }
    let recent = &gaps[gaps.len().saturating_sub(window)..];
    let lo = *recent.iter().min().unwrap();
    let hi = *recent.iter().max().unwrap();
    let mut probs = vec![0.0; (hi - lo) as usize + 1];
    let w = 1.0 / recent.len() as f64;
    for &g in recent {
        probs[(g - lo) as usize] += w;
    }
    DelayDistribution::from_dense(lo, probs)
}

/// Sufficient statistics of a sum of independent delays.
///
/// For a CDF on the contiguous support starting at the minimum delay `a`,
/// `sum_{x >= a} (1 - F(x)) * x = (E[D^2] - E[D] - a^2 + a) / 2`, so the
/// route score of a convolution follows from the summed minima, means and
/// variances without materializing the convolution.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct PathMoments {
    pub min_delay: f64,
    pub mean: f64,
    pub variance: f64,
}

impl PathMoments {
    pub fn of(dist: &DelayDistribution) -> Self {
        Self {
            min_delay: dist.min_delay() as f64,
            mean: dist.mean(),
            variance: dist.variance(),
        }
    }

    /// Moments of the empirical distribution of the last `window` samples,
    /// matching `PathMoments::of(&estimate_distribution(samples, window)?)`.
    pub fn from_samples(samples: &[u32], window: usize) -> Option<Self> {
        let recent = &samples[samples.len().saturating_sub(window)..];
        let min = *recent.iter().min()?;
        let n = recent.len() as f64;
        let mean = recent.iter().map(|&x| x as f64).sum::<f64>() / n;
        let variance = recent.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / n;
        Some(Self {
            min_delay: min as f64,
            mean,
            variance,
        })
    }

    /// Moments of the sum of independent delays with these statistics.
    pub fn add(self, other: Self) -> Self {
        Self {
            min_delay: self.min_delay + other.min_delay,
            mean: self.mean + other.mean,
            variance: self.variance + other.variance,
        }
    }

    pub fn score(&self) -> f64 {
        let second = self.variance + self.mean * self.mean;
        let a = self.min_delay;
        ((second - self.mean - a * a + a) / 2.0).max(0.0)
    }
}

impl<'a> std::iter::Sum<&'a PathMoments> for PathMoments {
    fn sum<I: Iterator<Item = &'a PathMoments>>(iter: I) -> Self {
        iter.fold(PathMoments::default(), |acc, m| acc.add(*m))
    }
}
