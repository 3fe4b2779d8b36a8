//! Pull-broadcast routing: which messages a node takes from its friends'
//! recent uploads, how they are scored and in what order they are queued.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::delay_model::{convolution_route_score, DelayDistribution, PathMoments, DEFAULT_ESTIMATE_WINDOW};
use crate::messaging::{
    check_delivery, BlindspotMessage, DeliveryCheck, ForwardingMode, HopRef, KeyRing, MessageQueues, SimId, Upload,
    DEFAULT_TTL_DAYS, DEFAULT_UPLOAD_CAPACITY,
};
use crate::social_graph::{LocalView, NodeId};

/// How the shared-neighbour percentage is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityMode {
    /// `|A ∩ B| / |A ∪ B|`.
    #[default]
    Jaccard,
    /// `|A ∩ B| / |B|`, with `B` the previous hop's neighbours.
    SharedOfPrev,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoutingParams {
    pub uploads_window: usize,
    pub ttl_days: u32,
    pub capacity: usize,
    pub estimate_window: usize,
    pub similarity: SimilarityMode,
    pub forwarding: ForwardingMode,
}

impl Default for RoutingParams {
    fn default() -> Self {
        Self {
            uploads_window: 5,
            ttl_days: DEFAULT_TTL_DAYS,
            capacity: DEFAULT_UPLOAD_CAPACITY,
            estimate_window: DEFAULT_ESTIMATE_WINDOW,
            similarity: SimilarityMode::Jaccard,
            forwarding: ForwardingMode::Rebroadcast,
        }
    }
}

impl RoutingParams {
    pub fn validate(&self) -> crate::Result<()> {
        if self.uploads_window == 0 || self.ttl_days == 0 || self.capacity == 0 || self.estimate_window == 0 {
            return Err(crate::Error::invalid("routing parameters must be positive"));
        }
        Ok(())
    }
}

/// A relayable message pulled from a neighbour's upload.
#[derive(Clone, Debug)]
pub struct PullCandidate {
    pub message: BlindspotMessage,
    pub from: NodeId,
    pub upload_day: u32,
}

/// Percentage similarity of two sorted neighbour lists, each endpoint
/// removed from the other's list.
pub fn similarity_sorted(center: NodeId, n_center: &[NodeId], prev: NodeId, n_prev: &[NodeId], mode: SimilarityMode) -> f64 {
    let a = n_center.iter().filter(|&&x| x != prev);
    let b_len = n_prev.iter().filter(|&&x| x != center).count();
    let a_len = a.clone().count();
    let mut shared = 0usize;
    let (mut i, mut j) = (0, 0);
    while i < n_center.len() && j < n_prev.len() {
        let (x, y) = (n_center[i], n_prev[j]);
        if x == prev {
            i += 1;
        } else if y == center {
            j += 1;
        } else if x < y {
            i += 1;
        } else if y < x {
            j += 1;
        } else {
            shared += 1;
            i += 1;
            j += 1;
        }
    }
    let denom = match mode {
        SimilarityMode::Jaccard => a_len + b_len - shared,
        SimilarityMode::SharedOfPrev => b_len,
    };
    if denom == 0 {
        0.0
    } else {
        100.0 * shared as f64 / denom as f64
    }
}

/// Shared-neighbour percentage between the view's center and `prev`.
pub fn neighbour_similarity(view: &LocalView, prev: NodeId, mode: SimilarityMode) -> f64 {
    let a: Vec<NodeId> = view.neighbours.iter().copied().collect();
    let b: Vec<NodeId> = view
        .friends_of(prev)
        .map(|s| s.iter().copied().collect())
        .unwrap_or_default();
    similarity_sorted(view.center, &a, prev, &b, mode)
}

/// Route score of every exit `e != prev` for the path `prev -> center -> e`,
/// by exact convolution. Exits without an estimate are skipped. `raw` is
/// `None` when no exit can be scored (or `prev` has no estimate).
pub fn min_exit_cdf_score(
    view: &LocalView,
    prev: NodeId,
    self_pdf: &DelayDistribution,
) -> (Option<f64>, Vec<(NodeId, f64)>) {
    let Some(prev_pdf) = view.neighbour_distributions.get(&prev) else {
        return (None, Vec::new());
    };
    let head = prev_pdf.convolve(self_pdf);
    let per_exit: Vec<(NodeId, f64)> = view
        .neighbours
        .iter()
        .filter(|&&e| e != prev)
        .filter_map(|e| {
            let pdf = view.neighbour_distributions.get(e)?;
            let s = convolution_route_score(&[head.clone(), pdf.clone()]).ok()?;
            Some((*e, s))
        })
        .collect();
    let raw = per_exit.iter().map(|(_, s)| *s).min_by(f64::total_cmp);
    (raw, per_exit)
}

/// Same as [`min_exit_cdf_score`] using moment sums, which give the identical
/// score without building the convolved distribution.
pub fn min_exit_moments(
    prev: NodeId,
    prev_est: Option<&PathMoments>,
    self_est: Option<&PathMoments>,
    exits: impl IntoIterator<Item = (NodeId, Option<PathMoments>)>,
) -> Option<f64> {
    let head = prev_est?.add(*self_est?);
    exits
        .into_iter()
        .filter(|(e, _)| *e != prev)
        .filter_map(|(_, m)| m.map(|m| head.add(m).score()))
        .min_by(f64::total_cmp)
}

/// Ordering key of a relay candidate: lower is better.
pub fn message_score(similarity: f64, min_cdf_norm: f64) -> f64 {
    similarity + min_cdf_norm
}

/// Min-max scales raw scores to `[0, 100]`. Missing scores map to 100; when
/// all present scores are equal they map to 0.
pub fn normalize_min_max(raw: &[Option<f64>]) -> Vec<f64> {
    let present = raw.iter().flatten();
    let lo = present.clone().copied().fold(f64::INFINITY, f64::min);
    let hi = present.copied().fold(f64::NEG_INFINITY, f64::max);
    raw.iter()
        .map(|r| match r {
            None => 100.0,
            Some(_) if hi <= lo => 0.0,
            Some(v) => (100.0 * (v - lo) / (hi - lo)).min(100.0),
        })
        .collect()
}

/// Scoring inputs a node has about its neighbours.
pub trait RouteScorer {
    fn similarity(&mut self, prev: NodeId) -> f64;
    /// Best route score through any exit other than `prev`, `None` when
    /// nothing can be scored.
    fn min_exit(&mut self, prev: NodeId) -> Option<f64>;
    fn degree(&self, node: NodeId) -> usize;
}

/// Scorer backed by a [`LocalView`] and exact convolution.
pub struct ViewScorer<'a> {
    pub view: &'a LocalView,
    pub self_pdf: &'a DelayDistribution,
    pub mode: SimilarityMode,
}

impl RouteScorer for ViewScorer<'_> {
    fn similarity(&mut self, prev: NodeId) -> f64 {
        neighbour_similarity(self.view, prev, self.mode)
    }

    fn min_exit(&mut self, prev: NodeId) -> Option<f64> {
        min_exit_cdf_score(self.view, prev, self.self_pdf).0
    }

    fn degree(&self, node: NodeId) -> usize {
        self.view.friends_of(node).map_or(0, |s| s.len())
    }
}

/// Engine callbacks around a pull round. Defaults do nothing.
pub trait PullHooks {
    /// False when the node has already taken this logical message, so the
    /// copy is ignored.
    fn should_process(&mut self, _id: SimId) -> bool {
        true
    }
    fn on_accept(&mut self, _msg: &mut BlindspotMessage, _from: NodeId) {}
    fn on_divert(&mut self, _msg: &mut BlindspotMessage, _from: NodeId, _dest: NodeId) {}
    fn on_delivery(&mut self, _msg: &BlindspotMessage, _from: NodeId, _first: bool) {}
}

pub struct NoHooks;
impl PullHooks for NoHooks {}

/// Recent uploads of one neighbour, oldest first.
pub struct NeighbourUploads<'a> {
    pub from: NodeId,
    pub uploads: &'a [Arc<Upload>],
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PullStats {
    pub uploads_read: usize,
    pub gathered: usize,
    pub delivered: usize,
    pub duplicates: usize,
    pub diverted: usize,
    pub accepted: usize,
    pub discarded: usize,
}

/// One pull event at `node`: read every unseen upload among the last
/// `uploads_window` of each neighbour, hand over messages for the node or a
/// neighbour, and queue relays in score order after a `1/deg(from)` coin toss.
#[allow(clippy::too_many_arguments)]
pub fn pull_round<S, H, R>(
    queues: &mut MessageQueues,
    recent: &[NeighbourUploads<'_>],
    ring: &dyn KeyRing,
    scorer: &mut S,
    params: &RoutingParams,
    day: u32,
    hooks: &mut H,
    rng: &mut R,
) -> PullStats
where
    S: RouteScorer + ?Sized,
    H: PullHooks + ?Sized,
    R: Rng + ?Sized,
{
    let mut stats = PullStats::default();
    // neighbours that offered relay candidates, and the copies that won
    // their coin toss as (index into groups, copy)
    let mut groups: Vec<usize> = Vec::new();
    let mut kept: Vec<(usize, &BlindspotMessage)> = Vec::new();
    let mut relayed = 0;
    for (k, nu) in recent.iter().enumerate() {
        // each copy is kept with probability 1/deg(from); drawing the run of
        // rejections up front costs one draw per kept copy
        let deg = scorer.degree(nu.from).max(1);
        let gaps = Geometric::new(1.0 / deg as f64).expect("1/deg is a probability");
        let mut skip: Option<u64> = None;
        let first = nu.uploads.len().saturating_sub(params.uploads_window);
        for up in &nu.uploads[first..] {
            if queues.is_seen(up.id) {
                continue;
            }
            queues.mark_seen(up.id);
            stats.uploads_read += 1;
            for (msg, &(sim, created)) in up.carried().iter().zip(up.heads()) {
                if day.saturating_sub(created) > params.ttl_days || !hooks.should_process(sim) {
                    continue;
                }
                stats.gathered += 1;
                match check_delivery(msg, ring, queues) {
                    DeliveryCheck::ForMe(_) => {
                        stats.delivered += 1;
                        hooks.on_delivery(msg, nu.from, true);
                    }
                    DeliveryCheck::Duplicate { for_me } => {
                        stats.duplicates += 1;
                        if for_me {
                            hooks.on_delivery(msg, nu.from, false);
                        }
                    }
                    DeliveryCheck::ForNeighbour(dest, _) => {
                        stats.diverted += 1;
                        let mut m = msg.clone();
                        hooks.on_divert(&mut m, nu.from, dest);
                        queues.push_direct(m);
                    }
                    DeliveryCheck::Relay => {
                        if skip.is_none() {
                            groups.push(k);
                        }
                        relayed += 1;
                        let s = skip.get_or_insert_with(|| gaps.sample(rng));
                        if *s == 0 {
                            kept.push((groups.len() - 1, msg));
                            skip = Some(gaps.sample(rng));
                        } else {
                            *s -= 1;
                        }
                    }
                }
            }
        }
    }
    if groups.is_empty() {
        return stats;
    }

    // score depends only on the previous hop, so candidates are ranked per
    // neighbour; stable sorts keep arrival order among equal scores
    let raw: Vec<Option<f64>> = groups.iter().map(|&k| scorer.min_exit(recent[k].from)).collect();
    let norm = normalize_min_max(&raw);
    let scores: Vec<f64> = groups
        .iter()
        .zip(&norm)
        .map(|(&k, n)| message_score(scorer.similarity(recent[k].from), *n))
        .collect();
    let mut rank: Vec<usize> = (0..groups.len()).collect();
    rank.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut position = vec![0; groups.len()];
    for (p, &g) in rank.iter().enumerate() {
        position[g] = p;
    }
    kept.sort_by_key(|&(g, _)| position[g]);

    // a copy kept from two neighbours is taken once, from the better one
    for (g, msg) in kept {
        if !hooks.should_process(msg.sim_id) {
            continue;
        }
        let mut m = msg.clone();
        hooks.on_accept(&mut m, recent[groups[g]].from);
        queues.push_routed(m, scores[g]);
        stats.accepted += 1;
    }
    stats.discarded = relayed - stats.accepted;
    stats
}

/// One hop of a message copy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hop {
    pub node: NodeId,
    pub day: u32,
    #[serde(skip)]
    parent: u32,
}

/// Hop tree of one logical message. Every copy points at the hop it was
/// taken from, so each copy's path can be read back to the sender.
#[derive(Clone, Debug, Default)]
pub struct TraceArena {
    hops: Vec<Hop>,
}

impl TraceArena {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends `(node, day)` after `parent` (or as a root) and returns the
    /// new copy's position.
    pub fn record_hop(&mut self, parent: HopRef, node: NodeId, day: u32) -> HopRef {
        self.hops.push(Hop {
            node,
            day,
            parent: parent.0,
        });
        HopRef(self.hops.len() as u32 - 1)
    }

    pub fn len(&self) -> usize {
        self.hops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hops.is_empty()
    }

    /// Path from the root to `hop`, inclusive.
    pub fn trace(&self, hop: HopRef) -> Vec<Hop> {
        let mut out = Vec::new();
        let mut at = hop.0;
        while let Some(h) = self.hops.get(at as usize) {
            out.push(*h);
            at = h.parent;
        }
        out.reverse();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto_ure::Nonce;
    use crate::messaging::{Envelope, PlainKeyRing, SimId, UploadId};
    use crate::social_graph::{local_view, SocialGraph};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::{BTreeMap, BTreeSet};

    fn n(i: u32) -> NodeId {
        NodeId(i)
    }

    fn msg(id: u32, dest: u32) -> BlindspotMessage {
        let mut b = [0u8; 16];
        b[..4].copy_from_slice(&id.to_be_bytes());
        BlindspotMessage {
            envelope: Envelope::Plain { nonce: Nonce(b), dest: n(dest) },
            sim_id: SimId(id),
            created_day: 0,
            hop: HopRef::NONE,
        }
    }

    fn view_of(center: u32, nbrs: &[u32], nn: &[(u32, &[u32])]) -> LocalView {
        LocalView {
            center: n(center),
            neighbours: nbrs.iter().map(|&i| n(i)).collect(),
            neighbour_distributions: BTreeMap::new(),
            neighbours_of_neighbours: nn
                .iter()
                .map(|(k, v)| (n(*k), v.iter().map(|&i| n(i)).collect::<BTreeSet<_>>()))
                .collect(),
        }
    }

    #[test]
    fn similarity_fixtures() {
        // N(c) = {a=1, b=2, prev=3}, N(prev) = {a=1, c=0}
        let v = view_of(0, &[1, 2, 3], &[(3, &[0, 1])]);
        assert_eq!(neighbour_similarity(&v, n(3), SimilarityMode::Jaccard), 50.0);
        assert_eq!(neighbour_similarity(&v, n(3), SimilarityMode::SharedOfPrev), 100.0);
        let same = view_of(0, &[1, 2, 3], &[(3, &[0, 1, 2])]);
        assert_eq!(neighbour_similarity(&same, n(3), SimilarityMode::Jaccard), 100.0);
        let disjoint = view_of(0, &[1, 3], &[(3, &[0, 5])]);
        assert_eq!(neighbour_similarity(&disjoint, n(3), SimilarityMode::Jaccard), 0.0);
    }

    #[test]
    fn score_addition() {
        assert_eq!(message_score(0.0, 0.0), 0.0);
        assert_eq!(message_score(100.0, 100.0), 200.0);
        assert_eq!(message_score(50.0, 25.0), 75.0);
    }

    #[test]
    fn normalization_edges() {
        assert_eq!(normalize_min_max(&[Some(3.0)]), vec![0.0]);
        assert_eq!(normalize_min_max(&[Some(1.0), None, Some(3.0), Some(2.0)]), vec![0.0, 100.0, 100.0, 50.0]);
        assert_eq!(normalize_min_max(&[None, None]), vec![100.0, 100.0]);
        let shifted = normalize_min_max(&[Some(11.0), Some(13.0), Some(12.0)]);
        assert_eq!(shifted, vec![0.0, 100.0, 50.0]);
    }

    #[test]
    fn min_exit_on_delta_path_and_monotonicity() {
        let g = SocialGraph::from_edges(3, [(n(0), n(1)), (n(1), n(2))]).unwrap();
        let delta = DelayDistribution::point_mass(1);
        let est: BTreeMap<_, _> = (0..3).map(|i| (n(i), delta.clone())).collect();
        let v = local_view(&g, n(1), &est).unwrap();
        let (raw, per_exit) = min_exit_cdf_score(&v, n(0), &delta);
        assert_eq!(raw, Some(0.0));
        assert_eq!(per_exit.len(), 1);

        // star center with two exits: adding a slower exit keeps the min
        let g = SocialGraph::from_edges(4, [(n(0), n(1)), (n(1), n(2)), (n(1), n(3))]).unwrap();
        let mut est: BTreeMap<_, _> = (0..3).map(|i| (n(i), DelayDistribution::uniform(1, 4).unwrap())).collect();
        let v = local_view(&g, n(1), &est).unwrap();
        let before = min_exit_cdf_score(&v, n(0), &delta).0.unwrap();
        est.insert(n(3), DelayDistribution::uniform(10, 60).unwrap());
        let v = local_view(&g, n(1), &est).unwrap();
        let (after, per_exit) = min_exit_cdf_score(&v, n(0), &delta);
        assert_eq!(per_exit.len(), 2);
        assert_eq!(after.unwrap(), before);
    }

    #[test]
    fn leaf_has_no_exit() {
        let g = SocialGraph::from_edges(2, [(n(0), n(1))]).unwrap();
        let est: BTreeMap<_, _> = (0..2).map(|i| (n(i), DelayDistribution::point_mass(2))).collect();
        let v = local_view(&g, n(1), &est).unwrap();
        assert_eq!(min_exit_cdf_score(&v, n(0), &DelayDistribution::point_mass(2)).0, None);
    }

    #[test]
    fn moments_agree_with_convolution() {
        let g = SocialGraph::from_edges(4, [(n(0), n(1)), (n(1), n(2)), (n(1), n(3))]).unwrap();
        let pdfs = [
            DelayDistribution::uniform(3, 9).unwrap(),
            DelayDistribution::from_bins(&[(1, 0.5), (30, 0.5)]).unwrap(),
            DelayDistribution::uniform(20, 25).unwrap(),
            DelayDistribution::from_bins(&[(2, 0.9), (100, 0.1)]).unwrap(),
        ];
        let est: BTreeMap<_, _> = pdfs.iter().enumerate().map(|(i, d)| (n(i as u32), d.clone())).collect();
        let v = local_view(&g, n(1), &est).unwrap();
        let exact = min_exit_cdf_score(&v, n(0), &pdfs[1]).0.unwrap();
        let m: Vec<PathMoments> = pdfs.iter().map(PathMoments::of).collect();
        let fast = min_exit_moments(n(0), Some(&m[0]), Some(&m[1]), [(n(0), Some(m[0])), (n(2), Some(m[2])), (n(3), Some(m[3]))]).unwrap();
        assert!((exact - fast).abs() < 1e-6 * exact.max(1.0), "{exact} vs {fast}");
    }

    struct FixedScorer {
        deg: usize,
    }

    impl RouteScorer for FixedScorer {
        fn similarity(&mut self, _prev: NodeId) -> f64 {
            0.0
        }
        fn min_exit(&mut self, _prev: NodeId) -> Option<f64> {
            Some(1.0)
        }
        fn degree(&self, _node: NodeId) -> usize {
            self.deg
        }
    }

    fn upload(from: u32, seq: u64, msgs: Vec<BlindspotMessage>) -> Arc<Upload> {
        Arc::new(Upload::new(UploadId { uploader: n(from), seq }, 0, msgs))
    }

    #[test]
    fn coin_toss_rate_matches_inverse_degree() {
        let nbrs = [n(1)];
        let ring = PlainKeyRing { owner: n(0), neighbours: &nbrs };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ups = vec![upload(1, 1, (0..10_000).map(|i| msg(i, 99)).collect())];
        let mut q = MessageQueues::new();
        let stats = pull_round(
            &mut q,
            &[NeighbourUploads { from: n(1), uploads: &ups }],
            &ring,
            &mut FixedScorer { deg: 4 },
            &RoutingParams::default(),
            0,
            &mut NoHooks,
            &mut rng,
        );
        let rate = stats.accepted as f64 / 10_000.0;
        assert!((rate - 0.25).abs() < 0.02, "{rate}");
        assert_eq!(q.output_len(), stats.accepted);

        let mut q = MessageQueues::new();
        let stats = pull_round(
            &mut q,
            &[NeighbourUploads { from: n(1), uploads: &ups[..] }],
            &ring,
            &mut FixedScorer { deg: 1 },
            &RoutingParams::default(),
            0,
            &mut NoHooks,
            &mut rng,
        );
        assert_eq!(stats.accepted, 10_000);
    }

    #[test]
    fn seen_and_expired_uploads_change_nothing() {
        let nbrs = [n(1)];
        let ring = PlainKeyRing { owner: n(0), neighbours: &nbrs };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ups = vec![upload(1, 1, vec![msg(1, 99), msg(2, 99)])];
        let mut q = MessageQueues::new();
        let args = |q: &mut MessageQueues, day, rng: &mut ChaCha8Rng| {
            pull_round(
                q,
                &[NeighbourUploads { from: n(1), uploads: &ups }],
                &ring,
                &mut FixedScorer { deg: 1 },
                &RoutingParams::default(),
                day,
                &mut NoHooks,
                rng,
            )
        };
        assert_eq!(args(&mut q, 16, &mut rng).gathered, 0);
        assert_eq!(q.output_len(), 0);
        // already marked seen
        assert_eq!(args(&mut q, 0, &mut rng).uploads_read, 0);
    }

    #[test]
    fn messages_for_me_and_neighbours_bypass_the_toss() {
        let nbrs = [n(1), n(2)];
        let ring = PlainKeyRing { owner: n(0), neighbours: &nbrs };
        let ups = vec![upload(1, 1, vec![msg(1, 0), msg(2, 2), msg(3, 0), msg(1, 0)])];
        let mut q = MessageQueues::new();
        let stats = pull_round(
            &mut q,
            &[NeighbourUploads { from: n(1), uploads: &ups }],
            &ring,
            &mut FixedScorer { deg: 1_000_000 },
            &RoutingParams::default(),
            0,
            &mut NoHooks,
            &mut ChaCha8Rng::seed_from_u64(1),
        );
        assert_eq!(stats.delivered, 2);
        assert_eq!(stats.duplicates, 1);
        assert_eq!(stats.diverted, 1);
        assert_eq!(q.direct_len(), 1);
        assert_eq!(q.output_len(), 0);
    }

    #[test]
    fn candidates_sorted_by_score_fifo_on_ties() {
        struct ByPrev;
        impl RouteScorer for ByPrev {
            fn similarity(&mut self, prev: NodeId) -> f64 {
                if prev == NodeId(1) { 80.0 } else { 10.0 }
            }
            fn min_exit(&mut self, _prev: NodeId) -> Option<f64> {
                Some(0.0)
            }
            fn degree(&self, _node: NodeId) -> usize {
                1
            }
        }
        let nbrs = [n(1), n(2)];
        let ring = PlainKeyRing { owner: n(0), neighbours: &nbrs };
        let a = vec![upload(1, 1, vec![msg(1, 99), msg(2, 99)])];
        let b = vec![upload(2, 1, vec![msg(3, 99), msg(4, 99)])];
        let mut q = MessageQueues::new();
        pull_round(
            &mut q,
            &[NeighbourUploads { from: n(1), uploads: &a }, NeighbourUploads { from: n(2), uploads: &b }],
            &ring,
            &mut ByPrev,
            &RoutingParams::default(),
            0,
            &mut NoHooks,
            &mut ChaCha8Rng::seed_from_u64(1),
        );
        let order: Vec<u32> = q.output().map(|e| e.message.sim_id.0).collect();
        assert_eq!(order, vec![3, 4, 1, 2]);
    }

    #[test]
    fn only_last_window_uploads_are_read() {
        let nbrs = [n(1)];
        let ring = PlainKeyRing { owner: n(0), neighbours: &nbrs };
        let ups: Vec<_> = (1..=8).map(|s| upload(1, s, vec![msg(s as u32, 99)])).collect();
        let mut q = MessageQueues::new();
        let stats = pull_round(
            &mut q,
            &[NeighbourUploads { from: n(1), uploads: &ups }],
            &ring,
            &mut FixedScorer { deg: 1 },
            &RoutingParams::default(),
            0,
            &mut NoHooks,
            &mut ChaCha8Rng::seed_from_u64(1),
        );
        assert_eq!(stats.uploads_read, 5);
        assert_eq!(q.output().next().unwrap().message.sim_id, SimId(4));
    }

    #[test]
    fn traces_branch_per_copy() {
        let mut t = TraceArena::new();
        let root = t.record_hop(HopRef::NONE, n(0), 0);
        let a = t.record_hop(root, n(1), 1);
        let b = t.record_hop(root, n(2), 1);
        let a2 = t.record_hop(a, n(3), 2);
        let ta: Vec<_> = t.trace(a2).iter().map(|h| h.node.0).collect();
        let tb: Vec<_> = t.trace(b).iter().map(|h| h.node.0).collect();
        assert_eq!(ta, vec![0, 1, 3]);
        assert_eq!(tb, vec![0, 2]);
    }
}
