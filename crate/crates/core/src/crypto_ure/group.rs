use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::Rng;

use crate::error::{Error, Result};

/// Safe-prime group: `p = 2q + 1` with `p`, `q` prime and `g` generating the
/// order-`q` subgroup of quadratic residues mod `p`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupParams {
    p: BigUint,
    q: BigUint,
    g: BigUint,
}

// 1024-bit MODP prime from RFC 2409 (Oakley group 2); (p - 1) / 2 is prime.
const MODP_1024: &str = "FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74\
020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437\
4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED\
EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE65381FFFFFFFFFFFFFFFF";

const SAFE_PRIME_64: &str = "8000000000006c3f";
const SAFE_PRIME_256: &str = "800000000000000000000000000000000000000000000000000000000002ff7f";

impl GroupParams {
    /// Validates and builds a group from a safe prime and a subgroup generator.
    pub fn new(p: BigUint, g: BigUint) -> Result<Self> {
        if p < BigUint::from(7u32) || p.is_even() {
            return Err(Error::invalid("p must be an odd prime of at least 7"));
        }
        let q = (&p - 1u32) >> 1;
        if !is_probable_prime(&p) || !is_probable_prime(&q) {
            return Err(Error::invalid("p is not a safe prime"));
        }
        if g <= BigUint::one() || g >= p || g.modpow(&q, &p) != BigUint::one() {
            return Err(Error::invalid("g does not generate the quadratic-residue subgroup"));
        }
        Ok(Self { p, q, g })
    }

    fn preset(hex: &str) -> Self {
        let p = BigUint::parse_bytes(hex.as_bytes(), 16).expect("valid hex constant");
        Self::new(p, BigUint::from(4u32)).expect("preset group is valid")
    }

    /// p = 23, q = 11, g = 4. Only useful for exhaustive tests.
    pub fn toy_23() -> Self {
        Self::new(BigUint::from(23u32), BigUint::from(4u32)).expect("valid")
    }

    /// q = 65633 (about 2^16), p = 131267.
    pub fn test_q16() -> Self {
        Self::new(BigUint::from(131_267u32), BigUint::from(4u32)).expect("valid")
    }

    pub fn toy_64() -> Self {
        Self::preset(SAFE_PRIME_64)
    }

    pub fn toy_256() -> Self {
        Self::preset(SAFE_PRIME_256)
    }

    pub fn modp_1024() -> Self {
        Self::preset(MODP_1024)
    }

    /// Preset group with a modulus of exactly `bits` bits.
    pub fn with_bits(bits: u64) -> Result<Self> {
        match bits {
            64 => Ok(Self::toy_64()),
            256 => Ok(Self::toy_256()),
            1024 => Ok(Self::modp_1024()),
            _ => Err(Error::invalid(format!("no preset group of {bits} bits (use 64, 256 or 1024)"))),
        }
    }

    pub fn p(&self) -> &BigUint {
        &self.p
    }

    pub fn q(&self) -> &BigUint {
        &self.q
    }

    pub fn g(&self) -> &BigUint {
        &self.g
    }

    pub fn bits(&self) -> u64 {
        self.p.bits()
    }

    /// Fixed byte width of one serialized group element.
    pub fn element_width(&self) -> usize {
        self.bits().div_ceil(8) as usize
    }

    /// Plaintext bytes that fit in one group element.
    pub fn block_capacity(&self) -> usize {
        (self.bits().saturating_sub(16) / 8).min(255) as usize
    }

    pub fn in_subgroup(&self, x: &BigUint) -> bool {
        !x.is_zero() && x < &self.p && x.modpow(&self.q, &self.p).is_one()
    }

    pub(crate) fn mul(&self, a: &BigUint, b: &BigUint) -> BigUint {
        (a * b) % &self.p
    }

    pub(crate) fn pow(&self, base: &BigUint, exp: &BigUint) -> BigUint {
        base.modpow(exp, &self.p)
    }

    pub(crate) fn inv(&self, a: &BigUint) -> BigUint {
        // p prime: a^(p-2) = a^-1
        a.modpow(&(&self.p - 2u32), &self.p)
    }

    /// Uniform exponent in `[1, q - 1]`.
    pub fn random_exponent<R: Rng + ?Sized>(&self, rng: &mut R) -> BigUint {
        let bits = self.q.bits();
        let len = bits.div_ceil(8) as usize;
        let excess = (len as u64 * 8 - bits) as u32;
        let mut buf = vec![0u8; len];
        loop {
            rng.fill_bytes(&mut buf);
            buf[0] &= 0xffu8 >> excess;
            let x = BigUint::from_bytes_be(&buf);
            if !x.is_zero() && x < self.q {
                return x;
            }
        }
    }

    /// Uniform element of the subgroup other than 1.
    pub fn random_element<R: Rng + ?Sized>(&self, rng: &mut R) -> BigUint {
        self.pow(&self.g, &self.random_exponent(rng))
    }
}

/// Miller-Rabin with fixed bases; adequate for validating known constants.
pub fn is_probable_prime(n: &BigUint) -> bool {
    const BASES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];
    if *n < BigUint::from(2u32) {
        return false;
    }
    for b in BASES {
        let b = BigUint::from(b);
        if *n == b {
            return true;
        }
        if (n % &b).is_zero() {
            return false;
        }
    }
    let one = BigUint::one();
    let n1 = n - 1u32;
    let s = n1.trailing_zeros().unwrap_or(0);
    let d = &n1 >> s;
    'witness: for b in BASES {
        let mut x = BigUint::from(b).modpow(&d, n);
        if x == one || x == n1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&BigUint::from(2u32), n);
            if x == n1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}
