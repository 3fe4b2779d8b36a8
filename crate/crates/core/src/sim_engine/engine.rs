use std::collections::{BTreeSet, VecDeque};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{apply_removal, SimConfig};
use crate::crypto_ure::{keygen, open_payload, GroupParams, KeyPair};
use crate::delay_model::PathMoments;
use crate::error::{Error, Result};
use crate::messaging::{
    construct_message, expire, pack_upload, BlindspotMessage, CryptoKeyRing, DestinationKeys, Envelope, HopRef,
    MessageQueues, PlainKeyRing, SimId, Upload, UploadId,
};
use crate::routing::{
    min_exit_moments, pull_round, similarity_sorted, NeighbourUploads, PullHooks, RouteScorer, SimilarityMode,
    TraceArena,
};
use crate::social_graph::{month_schedule, NodeId, SocialGraph, UploadBehaviour};

/// Payload size of simulated encrypted messages.
const SIM_PAYLOAD_BYTES: usize = 32;

/// Outcome of one logical message.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MessageRecord {
    pub sim_id: SimId,
    pub pair: usize,
    pub sender: NodeId,
    pub receiver: NodeId,
    pub created_day: u32,
    pub first_delivered_day: Option<u32>,
    /// Distinct neighbours of the receiver that handed it a copy.
    pub copies_received: u32,
    /// `(node, day)` from sender to receiver for the first delivered copy.
    pub first_delivery_trace: Vec<(NodeId, u32)>,
    /// With encryption on: whether the receiver recovered the exact payload.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub payload_ok: Option<bool>,
}

impl MessageRecord {
    pub fn delay_days(&self) -> Option<u32> {
        self.first_delivered_day.map(|d| d - self.created_day)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    pub messages_sent: usize,
    pub delivered: usize,
    pub delivery_rate: f64,
    /// Mean of first-delivery delays in days, over delivered messages.
    pub mean_delay_days: Option<f64>,
    /// Mean copies received per delivered message.
    pub copies_per_delivered: Option<f64>,
    /// Mean copies beyond the first per delivered message.
    pub duplicates_per_delivered: Option<f64>,
    pub uploads: u64,
    pub removed: Vec<NodeId>,
    /// Node-message holdings alive at the end of each day.
    pub live_copies: Vec<u64>,
    pub messages: Vec<MessageRecord>,
}

impl SimMetrics {
    fn finish(messages: Vec<MessageRecord>, uploads: u64, removed: Vec<NodeId>, live_copies: Vec<u64>) -> Self {
        let delivered: Vec<&MessageRecord> = messages.iter().filter(|m| m.first_delivered_day.is_some()).collect();
        let mean = |f: &dyn Fn(&MessageRecord) -> f64| {
            (!delivered.is_empty()).then(|| delivered.iter().map(|m| f(m)).sum::<f64>() / delivered.len() as f64)
        };
        Self {
            messages_sent: messages.len(),
            delivered: delivered.len(),
            delivery_rate: if messages.is_empty() {
                0.0
            } else {
                delivered.len() as f64 / messages.len() as f64
            },
            mean_delay_days: mean(&|m| m.delay_days().unwrap() as f64),
            copies_per_delivered: mean(&|m| m.copies_received as f64),
            duplicates_per_delivered: mean(&|m| m.copies_received.saturating_sub(1) as f64),
            uploads,
            removed,
            live_copies,
            messages,
        }
    }

    /// Delivered and total message counts per pair index.
    pub fn per_pair(&self, pairs: usize) -> Vec<(usize, usize)> {
        let mut out = vec![(0, 0); pairs];
        for m in &self.messages {
            out[m.pair].1 += 1;
            if m.first_delivered_day.is_some() {
                out[m.pair].0 += 1;
            }
        }
        out
    }
}

/// Callbacks fired while a run progresses.
pub trait RunObserver {
    /// A node's upload session: `count` uploads published on `day`.
    fn on_session(&mut self, _node: NodeId, _day: u32, _count: u32) {}
    fn on_upload(&mut self, _upload: &Upload) {}
}

impl RunObserver for () {}

/// Deliberate engine faults used to check that tests catch them.
#[doc(hidden)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EngineMutation {
    #[default]
    None,
    /// Publish one extra upload whenever the output queue is not empty.
    UploadWhenQueued,
}

struct NodeState {
    queues: MessageQueues,
    recent: Vec<Arc<Upload>>,
    upload_seq: u64,
    last_stamp: Option<u64>,
    gaps: VecDeque<u32>,
    estimate: Option<PathMoments>,
    removed: bool,
}

struct LiveMessage {
    holding: u64,
    arena: TraceArena,
    deliverers: Vec<NodeId>,
    payload: Vec<u8>,
}

/// Which nodes hold which live messages. Live ids form a sliding range, so
/// each node keeps a ring of bits indexed by `id % cap`; a pull only touches
/// the puller's own row.
struct Holders {
    nodes: usize,
    cap: usize,
    bits: Vec<u64>,
}

impl Holders {
    fn new(nodes: usize) -> Self {
        Self {
            nodes,
            cap: 64,
            bits: vec![0; nodes],
        }
    }

    fn words(&self) -> usize {
        self.cap / 64
    }

    fn slot(&self, node: NodeId, id: usize) -> (usize, u64) {
        let b = id & (self.cap - 1);
        (node.index() * self.words() + b / 64, 1 << (b % 64))
    }

    fn holds(&self, node: NodeId, id: usize) -> bool {
        let (w, bit) = self.slot(node, id);
        self.bits[w] & bit != 0
    }

    /// Marks `node` as a holder; true if it was not one already.
    fn hold(&mut self, node: NodeId, id: usize) -> bool {
        let (w, bit) = self.slot(node, id);
        let fresh = self.bits[w] & bit == 0;
        self.bits[w] |= bit;
        fresh
    }

    /// Makes room for ids `lo..hi`, all live, and clears `from..hi`, the
    /// ones just created.
    fn admit(&mut self, lo: usize, from: usize, hi: usize) {
        if hi - lo > self.cap {
            let mut cap = self.cap;
            while cap < hi - lo {
                cap *= 2;
            }
            let mut grown = Holders {
                nodes: self.nodes,
                cap,
                bits: vec![0; self.nodes * cap / 64],
            };
            for v in 0..self.nodes {
                let v = NodeId(v as u32);
                for id in lo..from {
                    if self.holds(v, id) {
                        grown.hold(v, id);
                    }
                }
            }
            *self = grown;
        }
        let words = self.words();
        for id in from..hi {
            let b = id & (self.cap - 1);
            let mask = !(1u64 << (b % 64));
            for row in self.bits.chunks_exact_mut(words) {
                row[b / 64] &= mask;
            }
        }
    }
}

struct CryptoState {
    params: GroupParams,
    message_keys: Vec<KeyPair>,
    neighbourhood_keys: Vec<KeyPair>,
}

fn address(n: NodeId) -> Vec<u8> {
    format!("node-{}", n.0).into_bytes()
}

struct Hooks<'a> {
    node: NodeId,
    day: u32,
    trace: bool,
    live: &'a mut [Option<LiveMessage>],
    holders: &'a mut Holders,
    /// Ids below this have retired.
    first_live: usize,
    records: &'a mut [MessageRecord],
    live_copies: &'a mut u64,
    crypto: Option<&'a CryptoState>,
}

impl Hooks<'_> {
    fn take(&mut self, msg: &mut BlindspotMessage) {
        let id = msg.sim_id.0 as usize;
        let Some(l) = self.live[id].as_mut() else {
            return;
        };
        if self.holders.hold(self.node, id) {
            l.holding += 1;
            *self.live_copies += 1;
        }
        if self.trace {
            msg.hop = l.arena.record_hop(msg.hop, self.node, self.day);
        }
    }
}

impl PullHooks for Hooks<'_> {
    fn should_process(&mut self, id: SimId) -> bool {
        let id = id.0 as usize;
        id >= self.first_live && !self.holders.holds(self.node, id)
    }

    fn on_accept(&mut self, msg: &mut BlindspotMessage, _from: NodeId) {
        self.take(msg);
    }

    fn on_divert(&mut self, msg: &mut BlindspotMessage, _from: NodeId, _dest: NodeId) {
        self.take(msg);
    }

    fn on_delivery(&mut self, msg: &BlindspotMessage, from: NodeId, first: bool) {
        let id = msg.sim_id.0 as usize;
        let Some(l) = self.live[id].as_mut() else { return };
        let rec = &mut self.records[id];
        if !l.deliverers.contains(&from) {
            l.deliverers.push(from);
            rec.copies_received = l.deliverers.len() as u32;
        }
        if !first || rec.first_delivered_day.is_some() {
            return;
        }
        rec.first_delivered_day = Some(self.day);
        if self.trace {
            let hop = l.arena.record_hop(msg.hop, self.node, self.day);
            rec.first_delivery_trace = l.arena.trace(hop).iter().map(|h| (h.node, h.day)).collect();
        }
        if let (Some(c), Envelope::Sealed(sealed)) = (self.crypto, &msg.envelope) {
            let key = &c.message_keys[self.node.index()].private;
            rec.payload_ok = Some(open_payload(&c.params, sealed, key).is_ok_and(|p| p == l.payload));
        }
    }
}

struct EngineScorer<'a> {
    node: NodeId,
    graph: &'a SocialGraph,
    estimates: &'a [Option<PathMoments>],
    mode: SimilarityMode,
}

impl RouteScorer for EngineScorer<'_> {
    fn similarity(&mut self, prev: NodeId) -> f64 {
        similarity_sorted(self.node, self.graph.neighbours(self.node), prev, self.graph.neighbours(prev), self.mode)
    }

    fn min_exit(&mut self, prev: NodeId) -> Option<f64> {
        min_exit_moments(
            prev,
            self.estimates[prev.index()].as_ref(),
            self.estimates[self.node.index()].as_ref(),
            self.graph
                .neighbours(self.node)
                .iter()
                .map(|&e| (e, self.estimates[e.index()])),
        )
    }

    fn degree(&self, node: NodeId) -> usize {
        self.graph.degree(node)
    }
}

fn derived_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs a full simulation.
pub fn run(config: &SimConfig, graph: &SocialGraph, behaviours: &[UploadBehaviour]) -> Result<SimMetrics> {
    run_with(config, graph, behaviours, &mut (), EngineMutation::None)
}

/// [`run`] with an observer and, for testing, an engine fault.
pub fn run_with(
    config: &SimConfig,
    graph: &SocialGraph,
    behaviours: &[UploadBehaviour],
    observer: &mut dyn RunObserver,
    mutation: EngineMutation,
) -> Result<SimMetrics> {
    config.validate_for(graph)?;
    let n = graph.node_count();
    if behaviours.len() != n {
        return Err(Error::invalid(format!(
            "{} upload behaviours for {n} nodes",
            behaviours.len()
        )));
    }
    let params = config.routing_params();
    let dpm = config.days_per_month;
    let total_days = config.total_days();
    let protected: BTreeSet<NodeId> = config.pairs.iter().flat_map(|&(s, r)| [s, r]).collect();
    // plain rings only need the keys of neighbours that receive messages
    let receivers: BTreeSet<NodeId> = config.pairs.iter().map(|&(_, r)| r).collect();
    let mut readable: Vec<Vec<NodeId>> = vec![Vec::new(); n];
    for &r in &receivers {
        for &w in graph.neighbours(r) {
            readable[w.index()].push(r);
        }
    }

    let mut route_rng = derived_rng(config.seed, 1);
    let mut order_rng = derived_rng(config.seed, 2);
    let mut msg_rng = derived_rng(config.seed, 3);

    let crypto = if config.crypto_enabled {
        let group = GroupParams::with_bits(config.crypto_bits as u64)?;
        let mut key_rng = derived_rng(config.seed, 4);
        let message_keys = (0..n).map(|_| keygen(&group, &mut key_rng)).collect();
        let neighbourhood_keys = (0..n).map(|_| keygen(&group, &mut key_rng)).collect();
        Some(CryptoState {
            params: group,
            message_keys,
            neighbourhood_keys,
        })
    } else {
        None
    };

    let mut nodes: Vec<NodeState> = (0..n)
        .map(|_| NodeState {
            queues: MessageQueues::new(),
            recent: Vec::new(),
            upload_seq: 0,
            last_stamp: None,
            gaps: VecDeque::new(),
            estimate: None,
            removed: false,
        })
        .collect();
    let mut estimates: Vec<Option<PathMoments>> = vec![None; n];
    let mut records: Vec<MessageRecord> = Vec::new();
    let mut live: Vec<Option<LiveMessage>> = Vec::new();
    let mut live_order: VecDeque<usize> = VecDeque::new();
    let mut live_copies: u64 = 0;
    let mut live_series = Vec::with_capacity(total_days as usize);
    let mut removed_set = Vec::new();
    let mut uploads_total = 0u64;
    let mut holders = Holders::new(n);

    let mut month_days: Vec<Vec<(NodeId, u32)>> = Vec::new();
    let mut creation_days: Vec<u32> = Vec::new();

    for day in 0..total_days {
        let month = (day / dpm) as usize;
        let in_month = day % dpm;
        if in_month == 0 {
            month_days = vec![Vec::new(); dpm as usize];
            for b in behaviours {
                let c = b.monthly_counts.get(month).copied().unwrap_or(0);
                for (d, k) in month_schedule(c, dpm) {
                    month_days[d as usize].push((b.node, k));
                }
            }
            creation_days = config
                .pairs
                .iter()
                .flat_map(|_| 0..config.messages_per_pair_per_month)
                .map(|_| {
                    if config.message_day_jitter {
                        msg_rng.random_range(0..dpm)
                    } else {
                        config.message_day
                    }
                })
                .collect();
        }

        if let Some(r) = config.removal.filter(|r| r.at_day == day) {
            removed_set = apply_removal(graph, r.strategy, r.fraction, &protected, config.seed ^ 0x5eed)?;
            for v in &removed_set {
                nodes[v.index()].removed = true;
            }
        }

        // retire messages whose copies have all expired
        while let Some(&id) = live_order.front() {
            if day.saturating_sub(records[id].created_day) <= config.ttl_days {
                break;
            }
            if let Some(l) = live[id].take() {
                live_copies -= l.holding;
            }
            live_order.pop_front();
        }

        // new pair messages go to the head of the sender's queue
        let per_pair = config.messages_per_pair_per_month as usize;
        let created = creation_days.iter().filter(|&&d| d == in_month).count();
        let first_live = live_order.front().copied().unwrap_or(records.len());
        holders.admit(first_live, records.len(), records.len() + created);
        for (p, &(sender, receiver)) in config.pairs.iter().enumerate() {
            for k in 0..per_pair {
                if creation_days[p * per_pair + k] != in_month {
                    continue;
                }
                let id = records.len();
                let mut l = LiveMessage {
                    holding: 1,
                    arena: TraceArena::new(),
                    deliverers: Vec::new(),
                    payload: Vec::new(),
                };
                holders.hold(sender, id);
                live_copies += 1;
                let hop = if config.trace {
                    l.arena.record_hop(HopRef::NONE, sender, day)
                } else {
                    HopRef::NONE
                };
                let (keys, group) = match &crypto {
                    Some(c) => {
                        l.payload = vec![0; SIM_PAYLOAD_BYTES];
                        msg_rng.fill_bytes(&mut l.payload);
                        (
                            DestinationKeys {
                                node: receiver,
                                address: address(receiver),
                                message_key: c.message_keys[receiver.index()].public.clone(),
                                neighbourhood_key: c.neighbourhood_keys[receiver.index()].public.clone(),
                            },
                            Some(&c.params),
                        )
                    }
                    None => (
                        DestinationKeys {
                            node: receiver,
                            address: Vec::new(),
                            message_key: crate::crypto_ure::PublicKey(Default::default()),
                            neighbourhood_key: crate::crypto_ure::PublicKey(Default::default()),
                        },
                        None,
                    ),
                };
                construct_message(
                    &mut nodes[sender.index()].queues,
                    &keys,
                    &l.payload,
                    day,
                    SimId(id as u32),
                    hop,
                    group,
                    &mut msg_rng,
                )?;
                records.push(MessageRecord {
                    sim_id: SimId(id as u32),
                    pair: p,
                    sender,
                    receiver,
                    created_day: day,
                    first_delivered_day: None,
                    copies_received: 0,
                    first_delivery_trace: Vec::new(),
                    payload_ok: None,
                });
                live.push(Some(l));
                live_order.push_back(id);
            }
        }

        let mut sessions: Vec<(NodeId, u32)> = month_days[in_month as usize]
            .iter()
            .copied()
            .filter(|(v, _)| !nodes[v.index()].removed)
            .collect();
        sessions.shuffle(&mut order_rng);

        for (v, count) in sessions {
            let vi = v.index();
            let mut queues = std::mem::take(&mut nodes[vi].queues);
            expire(&mut queues, day, config.ttl_days);

            let nbrs = graph.neighbours(v);
            let recent: Vec<NeighbourUploads<'_>> = nbrs
                .iter()
                .filter(|w| !nodes[w.index()].recent.is_empty())
                .map(|&w| NeighbourUploads {
                    from: w,
                    uploads: &nodes[w.index()].recent,
                })
                .collect();
            let mut scorer = EngineScorer {
                node: v,
                graph,
                estimates: &estimates,
                mode: config.similarity,
            };
            let mut hooks = Hooks {
                node: v,
                day,
                trace: config.trace,
                live: &mut live,
                holders: &mut holders,
                first_live,
                records: &mut records,
                live_copies: &mut live_copies,
                crypto: crypto.as_ref(),
            };
            match &crypto {
                None => {
                    let ring = PlainKeyRing {
                        owner: v,
                        neighbours: &readable[vi],
                    };
                    pull_round(&mut queues, &recent, &ring, &mut scorer, &params, day, &mut hooks, &mut route_rng);
                }
                Some(c) => {
                    let keys = std::iter::once(v)
                        .chain(nbrs.iter().copied())
                        .map(|k| (k, &c.neighbourhood_keys[k.index()].private))
                        .collect();
                    let ring = CryptoKeyRing {
                        owner: v,
                        params: &c.params,
                        keys,
                        address_of: &address,
                    };
                    pull_round(&mut queues, &recent, &ring, &mut scorer, &params, day, &mut hooks, &mut route_rng);
                }
            }
            drop(recent);

            let count = match mutation {
                EngineMutation::UploadWhenQueued if queues.output_len() + queues.direct_len() > 0 => count + 1,
                _ => count,
            };
            observer.on_session(v, day, count);
            let state = &mut nodes[vi];
            for j in 0..count {
                state.upload_seq += 1;
                let id = UploadId {
                    uploader: v,
                    seq: state.upload_seq,
                };
                let up = pack_upload(
                    &mut queues,
                    id,
                    day,
                    config.capacity,
                    config.ttl_days,
                    config.forwarding,
                    crypto.as_ref().map(|c| &c.params),
                    &mut route_rng,
                );
                observer.on_upload(&up);
                if state.recent.len() == config.uploads_window {
                    state.recent.remove(0);
                }
                state.recent.push(Arc::new(up));

                let stamp = day as u64 * 24 + j as u64 * 24 / count as u64;
                if let Some(last) = state.last_stamp {
                    if state.gaps.len() == config.estimate_window {
                        state.gaps.pop_front();
                    }
                    state.gaps.push_back((stamp.saturating_sub(last)).max(1) as u32);
                }
                state.last_stamp = Some(stamp);
            }
            uploads_total += count as u64;
            let gaps: Vec<u32> = state.gaps.iter().copied().collect();
            state.estimate = PathMoments::from_samples(&gaps, config.estimate_window);
            estimates[vi] = state.estimate;
            state.queues = queues;
        }
        live_series.push(live_copies);
    }

    Ok(SimMetrics::finish(records, uploads_total, removed_set, live_series))
}

/// Records every upload session as `(node, day, count)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SessionLog {
    pub sessions: Vec<(NodeId, u32, u32)>,
}

impl SessionLog {
    /// Sessions grouped per node, in day order.
    pub fn per_node(&self, nodes: usize) -> Vec<Vec<(u32, u32)>> {
        let mut per = vec![Vec::new(); nodes];
        for &(v, d, c) in &self.sessions {
            per[v.index()].push((d, c));
        }
        per
    }
}

impl RunObserver for SessionLog {
    fn on_session(&mut self, node: NodeId, day: u32, count: u32) {
        self.sessions.push((node, day, count));
    }
}
