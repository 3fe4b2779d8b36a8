//! ElGamal-based universal re-encryption.
//!
//! A ciphertext of `m` under public key `y` is two ElGamal pairs
//! `[(m*y^k0, g^k0); (y^k1, g^k1)]`. The second pair is an encryption of 1,
//! which lets anyone re-randomize both pairs without knowing `y`, and lets
//! the key holder recognise ciphertexts addressed to it.

use num_bigint::BigUint;
use num_traits::One;
use rand::Rng;

use super::GroupParams;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicKey(pub BigUint);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrivateKey(pub BigUint);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyPair {
    pub public: PublicKey,
    pub private: PrivateKey,
}

/// Four subgroup elements `[(alpha0, beta0); (alpha1, beta1)]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct UreCiphertext {
    pub alpha0: BigUint,
    pub beta0: BigUint,
    pub alpha1: BigUint,
    pub beta1: BigUint,
}

pub fn keygen<R: Rng + ?Sized>(params: &GroupParams, rng: &mut R) -> KeyPair {
    keygen_with(params, params.random_exponent(rng))
}

/// Key pair for a fixed private exponent.
pub fn keygen_with(params: &GroupParams, x: BigUint) -> KeyPair {
    KeyPair {
        public: PublicKey(params.pow(params.g(), &x)),
        private: PrivateKey(x),
    }
}

pub fn encrypt<R: Rng + ?Sized>(
    params: &GroupParams,
    m: &BigUint,
    key: &PublicKey,
    rng: &mut R,
) -> Result<UreCiphertext> {
    let k0 = params.random_exponent(rng);
    let k1 = params.random_exponent(rng);
    encrypt_with(params, m, key, &k0, &k1)
}

/// Encryption with caller-chosen exponents `k0`, `k1`.
pub fn encrypt_with(
    params: &GroupParams,
    m: &BigUint,
    key: &PublicKey,
    k0: &BigUint,
    k1: &BigUint,
) -> Result<UreCiphertext> {
    if !params.in_subgroup(m) {
        return Err(Error::Encoding("plaintext is not a subgroup element".into()));
    }
    let y = &key.0;
    Ok(UreCiphertext {
        alpha0: params.mul(m, &params.pow(y, k0)),
        beta0: params.pow(params.g(), k0),
        alpha1: params.pow(y, k1),
        beta1: params.pow(params.g(), k1),
    })
}

/// Returns the plaintext when the ciphertext was produced (and possibly
/// re-encrypted) under the matching public key, `None` otherwise.
pub fn decrypt(params: &GroupParams, c: &UreCiphertext, key: &PrivateKey) -> Option<BigUint> {
    let x = &key.0;
    let m1 = params.mul(&c.alpha1, &params.inv(&params.pow(&c.beta1, x)));
    if !m1.is_one() {
        return None;
    }
    Some(params.mul(&c.alpha0, &params.inv(&params.pow(&c.beta0, x))))
}

/// Whether `key` recognises the ciphertext, without recovering the plaintext.
pub fn recognizes(params: &GroupParams, c: &UreCiphertext, key: &PrivateKey) -> bool {
    params.pow(&c.beta1, &key.0) == c.alpha1
}

pub fn reencrypt<R: Rng + ?Sized>(params: &GroupParams, c: &UreCiphertext, rng: &mut R) -> UreCiphertext {
    let k0 = params.random_exponent(rng);
    let k1 = params.random_exponent(rng);
    reencrypt_with(params, c, &k0, &k1)
}

/// Re-encryption with caller-chosen exponents.
pub fn reencrypt_with(params: &GroupParams, c: &UreCiphertext, k0: &BigUint, k1: &BigUint) -> UreCiphertext {
    UreCiphertext {
        alpha0: params.mul(&c.alpha0, &params.pow(&c.alpha1, k0)),
        beta0: params.mul(&c.beta0, &params.pow(&c.beta1, k0)),
        alpha1: params.pow(&c.alpha1, k1),
        beta1: params.pow(&c.beta1, k1),
    }
}

impl UreCiphertext {
    pub fn elements(&self) -> [&BigUint; 4] {
        [&self.alpha0, &self.beta0, &self.alpha1, &self.beta1]
    }

    /// Big-endian fixed-width encoding, order alpha0 beta0 alpha1 beta1.
    pub fn to_bytes(&self, params: &GroupParams) -> Vec<u8> {
        let w = params.element_width();
        let mut out = vec![0u8; 4 * w];
        for (i, e) in self.elements().into_iter().enumerate() {
            let b = e.to_bytes_be();
            out[(i + 1) * w - b.len()..(i + 1) * w].copy_from_slice(&b);
        }
        out
    }

    pub fn from_bytes(params: &GroupParams, bytes: &[u8]) -> Result<Self> {
        let w = params.element_width();
        if bytes.len() != 4 * w {
            return Err(Error::Encoding(format!(
                "ciphertext block must be {} bytes, got {}",
                4 * w,
                bytes.len()
            )));
        }
        let mut e = bytes.chunks(w).map(BigUint::from_bytes_be);
        let c = Self {
            alpha0: e.next().unwrap(),
            beta0: e.next().unwrap(),
            alpha1: e.next().unwrap(),
            beta1: e.next().unwrap(),
        };
        if !c.elements().into_iter().all(|x| params.in_subgroup(x)) {
            return Err(Error::Encoding("ciphertext element outside the subgroup".into()));
        }
        Ok(c)
    }

    /// True when no element of `self` equals the element in the same
    /// position of `other`.
    pub fn fully_differs(&self, other: &Self) -> bool {
        self.elements()
            .into_iter()
            .zip(other.elements())
            .all(|(a, b)| a != b)
    }
}
