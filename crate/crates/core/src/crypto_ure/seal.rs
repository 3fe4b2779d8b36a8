//! Two-part message: `(nonce || destination address)` under the receiver's
//! neighbourhood key and the payload, split into blocks, under the receiver's
//! message-secrecy key. Every block re-encrypts independently.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::encoding::{decode_plaintext, encode_plaintext};
use super::scheme::{decrypt, encrypt, reencrypt, PrivateKey, PublicKey, UreCiphertext};
use super::GroupParams;
use crate::error::{Error, Result};

/// Largest payload a single message may carry.
pub const MAX_PAYLOAD_BYTES: usize = 240;
pub const NONCE_BYTES: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Nonce(pub [u8; NONCE_BYTES]);

impl Nonce {
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut b = [0u8; NONCE_BYTES];
        rng.fill_bytes(&mut b);
        Nonce(b)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SealedMessage {
    pub envelope: UreCiphertext,
    pub payload: Vec<UreCiphertext>,
}

pub fn payload_block_count(params: &GroupParams, payload_len: usize) -> usize {
    payload_len.div_ceil(params.block_capacity()).max(1)
}

pub fn seal_message<R: Rng + ?Sized>(
    params: &GroupParams,
    payload: &[u8],
    nonce: Nonce,
    dest_addr: &[u8],
    message_key: &PublicKey,
    neighbourhood_key: &PublicKey,
    rng: &mut R,
) -> Result<SealedMessage> {
    if payload.len() > MAX_PAYLOAD_BYTES {
        return Err(Error::PayloadTooLarge {
            len: payload.len(),
            cap: MAX_PAYLOAD_BYTES,
        });
    }
    let cap = params.block_capacity();
    if cap == 0 {
        return Err(Error::Encoding("group too small to carry plaintext".into()));
    }
    let mut head = nonce.0.to_vec();
    head.extend_from_slice(dest_addr);
    let envelope = encrypt(params, &encode_plaintext(params, &head)?, neighbourhood_key, rng)?;
    let chunks: Vec<&[u8]> = if payload.is_empty() {
        vec![&[]]
    } else {
        payload.chunks(cap).collect()
    };
    let payload = chunks
        .into_iter()
        .map(|c| encrypt(params, &encode_plaintext(params, c)?, message_key, rng))
        .collect::<Result<Vec<_>>>()?;
    Ok(SealedMessage { envelope, payload })
}

/// Recovers `(nonce, address)` when the envelope is addressed under the
/// neighbourhood key `key`.
pub fn open_envelope(params: &GroupParams, envelope: &UreCiphertext, key: &PrivateKey) -> Option<(Nonce, Vec<u8>)> {
    let m = decrypt(params, envelope, key)?;
    let bytes = decode_plaintext(params, &m).ok()?;
    if bytes.len() < NONCE_BYTES {
        return None;
    }
    let mut nonce = [0u8; NONCE_BYTES];
    nonce.copy_from_slice(&bytes[..NONCE_BYTES]);
    Some((Nonce(nonce), bytes[NONCE_BYTES..].to_vec()))
}

pub fn open_payload(params: &GroupParams, sealed: &SealedMessage, key: &PrivateKey) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for block in &sealed.payload {
        let m = decrypt(params, block, key)
            .ok_or_else(|| Error::Encoding("payload block not addressed to this key".into()))?;
        out.extend(decode_plaintext(params, &m)?);
    }
    Ok(out)
}

impl SealedMessage {
    pub fn block_count(&self) -> usize {
        1 + self.payload.len()
    }

    pub fn blocks(&self) -> impl Iterator<Item = &UreCiphertext> {
        std::iter::once(&self.envelope).chain(&self.payload)
    }

    /// Re-randomizes the envelope and every payload block.
    pub fn reencrypt<R: Rng + ?Sized>(&self, params: &GroupParams, rng: &mut R) -> Self {
        Self {
            envelope: reencrypt(params, &self.envelope, rng),
            payload: self.payload.iter().map(|b| reencrypt(params, b, rng)).collect(),
        }
    }

    /// `[block count: u8] || envelope || payload blocks`.
    pub fn to_bytes(&self, params: &GroupParams) -> Vec<u8> {
        let mut out = vec![self.block_count() as u8];
        for b in self.blocks() {
            out.extend(b.to_bytes(params));
        }
        out
    }

    /// Parses one message from the front of `bytes`, returning it and the
    /// number of bytes consumed.
    pub fn from_bytes(params: &GroupParams, bytes: &[u8]) -> Result<(Self, usize)> {
        let count = *bytes
            .first()
            .ok_or_else(|| Error::Encoding("empty message".into()))? as usize;
        if count < 2 {
            return Err(Error::Encoding("message needs an envelope and a payload block".into()));
        }
        let block = 4 * params.element_width();
        let need = 1 + count * block;
        if bytes.len() < need {
            return Err(Error::Encoding(format!("truncated message: need {need} bytes, have {}", bytes.len())));
        }
        let mut blocks = bytes[1..need]
            .chunks(block)
            .map(|b| UreCiphertext::from_bytes(params, b))
            .collect::<Result<Vec<_>>>()?
            .into_iter();
        let envelope = blocks.next().unwrap();
        Ok((
            Self {
                envelope,
                payload: blocks.collect(),
            },
            need,
        ))
    }
}
