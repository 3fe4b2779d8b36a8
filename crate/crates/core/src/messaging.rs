//! Message lifecycle at one node: construction, the output queue that feeds
//! uploads, nonce-based recognition of messages for the node or its
//! neighbours, and TTL expiry.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::crypto_ure::{open_envelope, seal_message, GroupParams, Nonce, PrivateKey, PublicKey, SealedMessage};
use crate::error::{Error, Result};
use crate::social_graph::NodeId;

/// Messages carried by one image upload.
pub const DEFAULT_UPLOAD_CAPACITY: usize = 150;
pub const DEFAULT_TTL_DAYS: u32 = 15;

/// Simulation-only identity of a logical message. Routing never looks at it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SimId(pub u32);

/// Position of a copy in its message's hop trace (simulation metadata).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HopRef(pub u32);

impl HopRef {
    pub const NONE: HopRef = HopRef(u32::MAX);
}

/// Destination half of a message: who it is for and its nonce.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Envelope {
    /// Unencrypted stand-in used by lightweight simulations; readable only
    /// through a key ring that holds the destination's neighbourhood key.
    Plain { nonce: Nonce, dest: NodeId },
    Sealed(Box<SealedMessage>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlindspotMessage {
    pub envelope: Envelope,
    pub sim_id: SimId,
    pub created_day: u32,
    pub hop: HopRef,
}

impl BlindspotMessage {
    pub fn age(&self, day: u32) -> u32 {
        day.saturating_sub(self.created_day)
    }

    pub fn expired(&self, day: u32, ttl_days: u32) -> bool {
        self.age(day) > ttl_days
    }

    /// Copy with every ciphertext block re-randomized.
    pub fn reencrypted<R: Rng + ?Sized>(&self, params: Option<&GroupParams>, rng: &mut R) -> Self {
        let envelope = match (&self.envelope, params) {
            (Envelope::Sealed(s), Some(p)) => Envelope::Sealed(Box::new(s.reencrypt(p, rng))),
            (e, _) => e.clone(),
        };
        Self {
            envelope,
            sim_id: self.sim_id,
            created_day: self.created_day,
            hop: self.hop,
        }
    }
}

#[derive(Clone, Debug)]
pub struct QueueEntry {
    pub message: BlindspotMessage,
    pub score: f64,
    pub own: bool,
    pub carried: u32,
    seq: u64,
}

impl QueueEntry {
    fn carry_order(&self, other: &Self) -> std::cmp::Ordering {
        // own messages are pushed onto the head, the rest queue FIFO
        let order = |e: &Self| if e.own { u64::MAX - e.seq } else { e.seq };
        (!self.own)
            .cmp(&!other.own)
            .then(self.score.total_cmp(&other.score))
            .then(order(self).cmp(&order(other)))
    }
}

/// Heap adapter: the entry to carry next is the maximum.
#[derive(Clone, Debug)]
struct Fresh(QueueEntry);

impl PartialEq for Fresh {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for Fresh {}

impl PartialOrd for Fresh {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Fresh {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other.0.carry_order(&self.0)
    }
}

/// What happens to an output-queue entry once an upload has carried it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForwardingMode {
    /// The entry leaves the queue.
    Drain,
    /// The entry stays queued until its TTL runs out and rotates behind
    /// entries that have not been carried yet.
    #[default]
    Rebroadcast,
}

/// Queues of one node.
///
/// The output queue is kept in carry order: entries never carried come first,
/// ordered by own-message priority, ascending score, then arrival; carried
/// entries (rebroadcast mode) follow in least-recently-carried order.
#[derive(Clone, Debug, Default)]
pub struct MessageQueues {
    pub input: Vec<(BlindspotMessage, NodeId)>,
    fresh: std::collections::BinaryHeap<Fresh>,
    rotation: std::collections::VecDeque<QueueEntry>,
    /// Messages for a neighbour, handed over ahead of everything else.
    direct: Vec<QueueEntry>,
    /// `(uploader, highest sequence read)`, sorted by uploader.
    seen_uploads: Vec<(NodeId, u64)>,
    delivered_nonces: HashMap<Nonce, u32>,
    next_seq: u64,
}

impl MessageQueues {
    pub fn new() -> Self {
        Self::default()
    }

    fn entry(&mut self, message: BlindspotMessage, score: f64, own: bool) -> QueueEntry {
        self.next_seq += 1;
        QueueEntry {
            message,
            score,
            own,
            carried: 0,
            seq: self.next_seq,
        }
    }

    fn insert_fresh(&mut self, e: QueueEntry) {
        self.fresh.push(Fresh(e));
    }

    /// Places a node's own new message at the head of the output queue.
    pub fn push_own(&mut self, message: BlindspotMessage) {
        let e = self.entry(message, f64::NEG_INFINITY, true);
        self.insert_fresh(e);
    }

    /// Queues a pulled message with the routing score it was assigned.
    pub fn push_routed(&mut self, message: BlindspotMessage, score: f64) {
        let e = self.entry(message, score, false);
        self.insert_fresh(e);
    }

    /// Queues a message addressed to a neighbour for direct hand-over.
    pub fn push_direct(&mut self, message: BlindspotMessage) {
        let e = self.entry(message, f64::NEG_INFINITY, false);
        self.direct.push(e);
    }

    pub fn output_len(&self) -> usize {
        self.fresh.len() + self.rotation.len()
    }

    pub fn direct_len(&self) -> usize {
        self.direct.len()
    }

    /// Output entries in carry order.
    pub fn output(&self) -> impl Iterator<Item = &QueueEntry> {
        let mut fresh: Vec<&QueueEntry> = self.fresh.iter().map(|f| &f.0).collect();
        fresh.sort_by(|a, b| a.carry_order(b));
        fresh.into_iter().chain(&self.rotation)
    }

    pub fn direct(&self) -> impl Iterator<Item = &QueueEntry> {
        self.direct.iter()
    }

    pub fn last_seen_upload(&self, from: NodeId) -> Option<u64> {
        let i = self.seen_uploads.binary_search_by_key(&from, |e| e.0).ok()?;
        Some(self.seen_uploads[i].1)
    }

    pub fn mark_seen(&mut self, id: UploadId) {
        match self.seen_uploads.binary_search_by_key(&id.uploader, |e| e.0) {
            Ok(i) => self.seen_uploads[i].1 = self.seen_uploads[i].1.max(id.seq),
            Err(i) => self.seen_uploads.insert(i, (id.uploader, id.seq)),
        }
    }

    pub fn is_seen(&self, id: UploadId) -> bool {
        self.last_seen_upload(id.uploader).is_some_and(|s| id.seq <= s)
    }

    pub fn knows_nonce(&self, nonce: &Nonce) -> bool {
        self.delivered_nonces.contains_key(nonce)
    }

    /// Records a nonce; false when it was already known.
    pub fn remember_nonce(&mut self, nonce: Nonce, created_day: u32) -> bool {
        self.delivered_nonces.insert(nonce, created_day).is_none()
    }

    pub fn is_empty(&self) -> bool {
        self.input.is_empty() && self.fresh.is_empty() && self.rotation.is_empty() && self.direct.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UploadId {
    pub uploader: NodeId,
    /// Per-uploader sequence number, starting at 1.
    pub seq: u64,
}

/// One published image and the messages embedded in it.
#[derive(Clone, Debug)]
pub struct Upload {
    pub id: UploadId,
    pub day: u32,
    carried: Vec<BlindspotMessage>,
    /// `(sim_id, created_day)` of each carried message, so readers can
    /// skip copies without touching the messages themselves.
    heads: Vec<(SimId, u32)>,
}

impl Upload {
    pub fn new(id: UploadId, day: u32, carried: Vec<BlindspotMessage>) -> Self {
        let heads = carried.iter().map(|m| (m.sim_id, m.created_day)).collect();
        Self { id, day, carried, heads }
    }

    pub fn carried(&self) -> &[BlindspotMessage] {
        &self.carried
    }

    pub fn heads(&self) -> &[(SimId, u32)] {
        &self.heads
    }

    pub fn uploader(&self) -> NodeId {
        self.id.uploader
    }

    /// `uploader: u32 BE || day: u32 BE || count: u16 BE || messages`.
    /// Only sealed messages have a wire form.
    pub fn to_bytes(&self, params: &GroupParams) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend(self.id.uploader.0.to_be_bytes());
        out.extend(self.day.to_be_bytes());
        let count = u16::try_from(self.carried.len()).map_err(|_| Error::Encoding("too many messages".into()))?;
        out.extend(count.to_be_bytes());
        for m in &self.carried {
            match &m.envelope {
                Envelope::Sealed(s) => out.extend(s.to_bytes(params)),
                Envelope::Plain { .. } => return Err(Error::Encoding("plain messages have no wire form".into())),
            }
        }
        Ok(out)
    }

    /// Parses the wire form. Simulation metadata is not on the wire, so the
    /// returned messages carry placeholder ids.
    pub fn from_bytes(params: &GroupParams, bytes: &[u8], seq: u64) -> Result<Self> {
        if bytes.len() < 10 {
            return Err(Error::Encoding("upload header truncated".into()));
        }
        let uploader = NodeId(u32::from_be_bytes(bytes[0..4].try_into().unwrap()));
        let day = u32::from_be_bytes(bytes[4..8].try_into().unwrap());
        let count = u16::from_be_bytes(bytes[8..10].try_into().unwrap()) as usize;
        let mut rest = &bytes[10..];
        let mut carried = Vec::with_capacity(count);
        for _ in 0..count {
            let (sealed, used) = SealedMessage::from_bytes(params, rest)?;
            rest = &rest[used..];
            carried.push(BlindspotMessage {
                envelope: Envelope::Sealed(Box::new(sealed)),
                sim_id: SimId(u32::MAX),
                created_day: day,
                hop: HopRef::NONE,
            });
        }
        if !rest.is_empty() {
            return Err(Error::Encoding(format!("{} trailing bytes after upload", rest.len())));
        }
        Ok(Self::new(UploadId { uploader, seq }, day, carried))
    }
}

/// Public keys and address a sender needs to reach a receiver.
#[derive(Clone, Debug)]
pub struct DestinationKeys {
    pub node: NodeId,
    pub address: Vec<u8>,
    pub message_key: PublicKey,
    pub neighbourhood_key: PublicKey,
}

/// Builds a message for `dest` and places it at the head of the sender's
/// output queue. Without `params` the envelope stays plain and the payload is
/// only size-checked.
#[allow(clippy::too_many_arguments)]
pub fn construct_message<R: Rng + ?Sized>(
    queues: &mut MessageQueues,
    dest: &DestinationKeys,
    payload: &[u8],
    day: u32,
    sim_id: SimId,
    hop: HopRef,
    params: Option<&GroupParams>,
    rng: &mut R,
) -> Result<BlindspotMessage> {
    if payload.len() > crate::crypto_ure::MAX_PAYLOAD_BYTES {
        return Err(Error::PayloadTooLarge {
            len: payload.len(),
            cap: crate::crypto_ure::MAX_PAYLOAD_BYTES,
        });
    }
    let nonce = Nonce::random(rng);
    let envelope = match params {
        Some(p) => Envelope::Sealed(Box::new(seal_message(
            p,
            payload,
            nonce,
            &dest.address,
            &dest.message_key,
            &dest.neighbourhood_key,
            rng,
        )?)),
        None => Envelope::Plain { nonce, dest: dest.node },
    };
    let msg = BlindspotMessage {
        envelope,
        sim_id,
        created_day: day,
        hop,
    };
    queues.push_own(msg.clone());
    Ok(msg)
}

/// Fills one upload from the queues: direct hand-overs first, then the
/// output queue in carry order, up to `capacity` messages. Every carried
/// message is re-encrypted before embedding.
#[allow(clippy::too_many_arguments)]
pub fn pack_upload<R: Rng + ?Sized>(
    queues: &mut MessageQueues,
    id: UploadId,
    day: u32,
    capacity: usize,
    ttl_days: u32,
    mode: ForwardingMode,
    params: Option<&GroupParams>,
    rng: &mut R,
) -> Upload {
    let mut carried = Vec::with_capacity(capacity.min(queues.output_len() + queues.direct.len()));

    // in rebroadcast mode direct hand-overs ride along until they expire
    queues.direct.retain(|e| !e.message.expired(day, ttl_days));
    let n_direct = queues.direct.len().min(capacity);
    for e in queues.direct.iter_mut().take(n_direct) {
        e.carried += 1;
        carried.push(e.message.reencrypted(params, rng));
    }
    if mode == ForwardingMode::Drain {
        queues.direct.drain(..n_direct);
    }

    // entries carried now go to the back of the rotation, so only the ones
    // there beforehand may be taken from its front
    let mut in_rotation = queues.rotation.len();
    while carried.len() < capacity {
        let next = match queues.fresh.pop() {
            Some(f) => Some(f.0),
            None if in_rotation > 0 => {
                in_rotation -= 1;
                queues.rotation.pop_front()
            }
            None => None,
        };
        let Some(mut e) = next else { break };
        if e.message.expired(day, ttl_days) {
            continue;
        }
        e.carried += 1;
        carried.push(e.message.reencrypted(params, rng));
        if mode == ForwardingMode::Rebroadcast {
            queues.rotation.push_back(e);
        }
    }
    Upload::new(id, day, carried)
}

/// Outcome of trying the node's keys on a message envelope.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DeliveryCheck {
    ForMe(Nonce),
    ForNeighbour(NodeId, Nonce),
    /// Recognised, but the nonce was already handled here.
    Duplicate { for_me: bool },
    /// Not readable with any key this node holds.
    Relay,
}

/// Neighbourhood private keys held by a node: its own and those shared by
/// each neighbour.
pub trait KeyRing {
    fn owner(&self) -> NodeId;
    /// `(nonce, destination)` when the envelope is readable.
    fn open(&self, envelope: &Envelope) -> Option<(Nonce, NodeId)>;
}

/// Key ring for plain envelopes: readable when the destination is the owner
/// or one of its neighbours.
#[derive(Clone, Copy, Debug)]
pub struct PlainKeyRing<'a> {
    pub owner: NodeId,
    /// Sorted. Leaving out neighbours that never receive changes nothing.
    pub neighbours: &'a [NodeId],
}

impl KeyRing for PlainKeyRing<'_> {
    fn owner(&self) -> NodeId {
        self.owner
    }

    fn open(&self, envelope: &Envelope) -> Option<(Nonce, NodeId)> {
        match envelope {
            Envelope::Plain { nonce, dest } => {
                (*dest == self.owner || self.neighbours.binary_search(dest).is_ok()).then_some((*nonce, *dest))
            }
            Envelope::Sealed(_) => None,
        }
    }
}

/// Key ring for sealed envelopes.
#[derive(Clone)]
pub struct CryptoKeyRing<'a> {
    pub owner: NodeId,
    pub params: &'a GroupParams,
    /// `(node, neighbourhood private key of node)` for the owner and each neighbour.
    pub keys: Vec<(NodeId, &'a PrivateKey)>,
    pub address_of: &'a dyn Fn(NodeId) -> Vec<u8>,
}

impl KeyRing for CryptoKeyRing<'_> {
    fn owner(&self) -> NodeId {
        self.owner
    }

    fn open(&self, envelope: &Envelope) -> Option<(Nonce, NodeId)> {
        let Envelope::Sealed(sealed) = envelope else {
            return None;
        };
        self.keys.iter().find_map(|(node, key)| {
            let (nonce, addr) = open_envelope(self.params, &sealed.envelope, key)?;
            (addr == (self.address_of)(*node)).then_some((nonce, *node))
        })
    }
}

/// Tries the node's keys on `msg` and applies nonce de-duplication.
pub fn check_delivery(msg: &BlindspotMessage, ring: &dyn KeyRing, queues: &mut MessageQueues) -> DeliveryCheck {
    let Some((nonce, dest)) = ring.open(&msg.envelope) else {
        return DeliveryCheck::Relay;
    };
    let for_me = dest == ring.owner();
    if !queues.remember_nonce(nonce, msg.created_day) {
        return DeliveryCheck::Duplicate { for_me };
    }
    if for_me {
        DeliveryCheck::ForMe(nonce)
    } else {
        DeliveryCheck::ForNeighbour(dest, nonce)
    }
}

/// Drops messages older than `ttl_days` (age strictly greater) from every
/// queue and forgets nonces that can no longer arrive.
pub fn expire(queues: &mut MessageQueues, day: u32, ttl_days: u32) {
    queues.input.retain(|(m, _)| !m.expired(day, ttl_days));
    queues.fresh.retain(|e| !e.0.message.expired(day, ttl_days));
    queues.rotation.retain(|e| !e.message.expired(day, ttl_days));
    queues.direct.retain(|e| !e.message.expired(day, ttl_days));
    queues
        .delivered_nonces
        .retain(|_, created| day.saturating_sub(*created) <= ttl_days + 1);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto_ure::keygen;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn plain(id: u32, dest: u32, day: u32) -> BlindspotMessage {
        let mut n = [0u8; 16];
        n[..4].copy_from_slice(&id.to_be_bytes());
        BlindspotMessage {
            envelope: Envelope::Plain {
                nonce: Nonce(n),
                dest: NodeId(dest),
            },
            sim_id: SimId(id),
            created_day: day,
            hop: HopRef::NONE,
        }
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(3)
    }

    fn uid(seq: u64) -> UploadId {
        UploadId {
            uploader: NodeId(0),
            seq,
        }
    }

    #[test]
    fn drain_carries_everything_that_fits() {
        let mut q = MessageQueues::new();
        for i in 0..10 {
            q.push_routed(plain(i, 9, 0), i as f64);
        }
        let up = pack_upload(&mut q, uid(1), 0, 150, 15, ForwardingMode::Drain, None, &mut rng());
        assert_eq!(up.carried().len(), 10);
        assert_eq!(q.output_len(), 0);
    }

    #[test]
    fn drain_leaves_overflow_queued() {
        let mut q = MessageQueues::new();
        for i in 0..200 {
            q.push_routed(plain(i, 9, 0), 1.0);
        }
        let up = pack_upload(&mut q, uid(1), 0, 150, 15, ForwardingMode::Drain, None, &mut rng());
        assert_eq!(up.carried().len(), 150);
        assert_eq!(q.output_len(), 50);
        // FIFO among equal scores
        assert_eq!(up.carried()[0].sim_id, SimId(0));
        assert_eq!(q.output().next().unwrap().message.sim_id, SimId(150));
    }

    #[test]
    fn rebroadcast_rotates_through_queue() {
        let mut q = MessageQueues::new();
        for i in 0..200 {
            q.push_routed(plain(i, 9, 0), 1.0);
        }
        let a = pack_upload(&mut q, uid(1), 0, 150, 15, ForwardingMode::Rebroadcast, None, &mut rng());
        assert_eq!(q.output_len(), 200);
        let b = pack_upload(&mut q, uid(2), 0, 150, 15, ForwardingMode::Rebroadcast, None, &mut rng());
        assert_eq!(a.carried().len(), 150);
        assert_eq!(b.carried().len(), 150);
        // the 50 never-carried entries go first in the second upload
        assert_eq!(b.carried()[0].sim_id, SimId(150));
        assert_eq!(b.carried()[50].sim_id, SimId(0));
    }

    #[test]
    fn own_messages_jump_the_queue_and_scores_sort() {
        let mut q = MessageQueues::new();
        q.push_routed(plain(1, 9, 0), 50.0);
        q.push_routed(plain(2, 9, 0), 10.0);
        q.push_own(plain(3, 9, 0));
        let order: Vec<u32> = q.output().map(|e| e.message.sim_id.0).collect();
        assert_eq!(order, vec![3, 2, 1]);
    }

    #[test]
    fn empty_queue_still_publishes() {
        let mut q = MessageQueues::new();
        let up = pack_upload(&mut q, uid(1), 4, 150, 15, ForwardingMode::Drain, None, &mut rng());
        assert!(up.carried().is_empty());
        assert_eq!(up.day, 4);
    }

    #[test]
    fn expiry_boundary() {
        let mut q = MessageQueues::new();
        q.push_routed(plain(1, 9, 0), 0.0);
        q.push_routed(plain(2, 9, 1), 0.0);
        expire(&mut q, 16, 15);
        let left: Vec<u32> = q.output().map(|e| e.message.sim_id.0).collect();
        assert_eq!(left, vec![2]);
        let mut empty = MessageQueues::new();
        expire(&mut empty, 100, 15);
        assert!(empty.is_empty());
    }

    #[test]
    fn plain_delivery_checks() {
        let neighbours = [NodeId(2), NodeId(5)];
        let ring = PlainKeyRing {
            owner: NodeId(1),
            neighbours: &neighbours,
        };
        let mut q = MessageQueues::new();
        assert!(matches!(check_delivery(&plain(1, 1, 0), &ring, &mut q), DeliveryCheck::ForMe(_)));
        assert_eq!(
            check_delivery(&plain(1, 1, 0), &ring, &mut q),
            DeliveryCheck::Duplicate { for_me: true }
        );
        assert!(matches!(
            check_delivery(&plain(2, 5, 0), &ring, &mut q),
            DeliveryCheck::ForNeighbour(NodeId(5), _)
        ));
        assert_eq!(check_delivery(&plain(3, 7, 0), &ring, &mut q), DeliveryCheck::Relay);
    }

    #[test]
    fn sealed_construct_pack_and_receive() {
        let params = GroupParams::toy_256();
        let mut r = rng();
        let msg_keys = keygen(&params, &mut r);
        let nbr_keys = keygen(&params, &mut r);
        let dest = DestinationKeys {
            node: NodeId(4),
            address: b"node-4".to_vec(),
            message_key: msg_keys.public.clone(),
            neighbourhood_key: nbr_keys.public.clone(),
        };
        let mut q = MessageQueues::new();
        let a = construct_message(&mut q, &dest, b"meet at noon", 0, SimId(0), HopRef::NONE, Some(&params), &mut r).unwrap();
        let b = construct_message(&mut q, &dest, b"meet at noon", 0, SimId(1), HopRef::NONE, Some(&params), &mut r).unwrap();
        assert_ne!(a.envelope, b.envelope);
        assert_eq!(q.output().next().unwrap().message.sim_id, SimId(1));

        let up = pack_upload(&mut q, uid(1), 0, 150, 15, ForwardingMode::Drain, Some(&params), &mut r);
        assert_eq!(up.carried().len(), 2);
        let Envelope::Sealed(sent) = &up.carried()[1].envelope else { panic!() };
        let Envelope::Sealed(orig) = &a.envelope else { panic!() };
        assert!(sent.envelope.fully_differs(&orig.envelope));

        let addr = |n: NodeId| format!("node-{}", n.0).into_bytes();
        let ring = CryptoKeyRing {
            owner: NodeId(4),
            params: &params,
            keys: vec![(NodeId(4), &nbr_keys.private)],
            address_of: &addr,
        };
        let mut rq = MessageQueues::new();
        assert!(matches!(check_delivery(&up.carried()[1], &ring, &mut rq), DeliveryCheck::ForMe(_)));
        assert_eq!(
            crate::crypto_ure::open_payload(&params, sent, &msg_keys.private).unwrap(),
            b"meet at noon"
        );

        let wire = up.to_bytes(&params).unwrap();
        let back = Upload::from_bytes(&params, &wire, 1).unwrap();
        assert_eq!(back.carried().len(), 2);
        assert_eq!(back.carried()[0].envelope, up.carried()[0].envelope);
    }
}
