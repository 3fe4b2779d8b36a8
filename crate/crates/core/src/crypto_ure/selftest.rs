//! Property checks for the re-encryption scheme at a chosen group size.

use std::time::{Duration, Instant};

use num_bigint::BigUint;
use rand::Rng;
use serde::Serialize;

use super::{decrypt, encrypt, keygen, recognizes, reencrypt, GroupParams, UreCiphertext};

/// Deliberate faults for checking that the suite catches broken schemes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mutation {
    /// Re-encryption returns its input unchanged.
    IdentityReencryption,
    /// Re-encryption leaves the payload pair untouched, so a tag on it stays
    /// bitwise visible downstream.
    StaticPayloadPair,
}

#[derive(Clone, Debug)]
pub struct SelftestOptions {
    pub roundtrip_messages: usize,
    pub chain_length: usize,
    pub unlinkability_trials: usize,
    pub soundness_trials: usize,
    pub tagging_trials: usize,
    pub mutation: Option<Mutation>,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        Self {
            roundtrip_messages: 100,
            chain_length: 20,
            unlinkability_trials: 1000,
            soundness_trials: 10_000,
            tagging_trials: 100,
            mutation: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    #[serde(serialize_with = "as_secs")]
    pub elapsed: Duration,
}

fn as_secs<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

#[derive(Clone, Debug, Serialize)]
pub struct SelftestReport {
    pub group_bits: u64,
    pub checks: Vec<CheckResult>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

struct Suite<'a, R: ?Sized> {
    params: &'a GroupParams,
    opts: &'a SelftestOptions,
    rng: &'a mut R,
}

impl<R: Rng + ?Sized> Suite<'_, R> {
    fn reencrypt(&mut self, c: &UreCiphertext) -> UreCiphertext {
        match self.opts.mutation {
            Some(Mutation::IdentityReencryption) => c.clone(),
            Some(Mutation::StaticPayloadPair) => {
                let r = reencrypt(self.params, c, self.rng);
                UreCiphertext {
                    alpha0: c.alpha0.clone(),
                    beta0: c.beta0.clone(),
                    ..r
                }
            }
            None => reencrypt(self.params, c, self.rng),
        }
    }

    fn roundtrip(&mut self) -> (bool, String) {
        let kp = keygen(self.params, self.rng);
        let mut failures = 0;
        for _ in 0..self.opts.roundtrip_messages {
            let m = self.params.random_element(self.rng);
            let mut c = encrypt(self.params, &m, &kp.public, self.rng).expect("subgroup element");
            for _ in 0..self.opts.chain_length {
                c = self.reencrypt(&c);
            }
            if decrypt(self.params, &c, &kp.private) != Some(m) {
                failures += 1;
            }
        }
        (
            failures == 0,
            format!(
                "{failures} of {} messages failed after {}-hop chains",
                self.opts.roundtrip_messages, self.opts.chain_length
            ),
        )
    }

    fn unlinkability(&mut self) -> (bool, String) {
        let kp = keygen(self.params, self.rng);
        let m = self.params.random_element(self.rng);
        let c = encrypt(self.params, &m, &kp.public, self.rng).expect("subgroup element");
        let collisions = (0..self.opts.unlinkability_trials)
            .filter(|_| !self.reencrypt(&c).fully_differs(&c))
            .count();
        (
            collisions == 0,
            format!(
                "{collisions} of {} re-encryptions share an element with their input",
                self.opts.unlinkability_trials
            ),
        )
    }

    fn soundness(&mut self) -> (bool, String) {
        let owner = keygen(self.params, self.rng);
        let mut recognized = 0usize;
        for _ in 0..self.opts.soundness_trials {
            let m = self.params.random_element(self.rng);
            let c = encrypt(self.params, &m, &owner.public, self.rng).expect("subgroup element");
            let other = loop {
                let k = keygen(self.params, self.rng);
                if k.private != owner.private {
                    break k;
                }
            };
            if recognizes(self.params, &c, &other.private) {
                recognized += 1;
            }
        }
        let rate = recognized as f64 / self.opts.soundness_trials.max(1) as f64;
        let q: f64 = self.params.q().to_string().parse().unwrap_or(f64::INFINITY);
        let bound = 2.0 / q;
        (
            rate <= bound,
            format!("false recognition rate {rate:.3e} (bound {bound:.3e})"),
        )
    }

    fn tagging(&mut self) -> (bool, String) {
        let kp = keygen(self.params, self.rng);
        let mut leaks = 0;
        for _ in 0..self.opts.tagging_trials {
            let m = self.params.random_element(self.rng);
            let c = encrypt(self.params, &m, &kp.public, self.rng).expect("subgroup element");
            let tag = loop {
                let t = self.params.random_element(self.rng);
                if t != BigUint::from(1u32) {
                    break t;
                }
            };
            let tagged = UreCiphertext {
                alpha0: self.params.mul(&c.alpha0, &tag),
                ..c
            };
            let out = self.reencrypt(&tagged);
            let garbled = decrypt(self.params, &out, &kp.private) != Some(m);
            if !garbled || !out.fully_differs(&tagged) {
                leaks += 1;
            }
        }
        (
            leaks == 0,
            format!("{leaks} of {} tagged ciphertexts stayed traceable or intact", self.opts.tagging_trials),
        )
    }

    fn expansion(&mut self) -> (bool, String) {
        let kp = keygen(self.params, self.rng);
        let m = self.params.random_element(self.rng);
        let c = encrypt(self.params, &m, &kp.public, self.rng).expect("subgroup element");
        let w = self.params.element_width();
        let len = c.to_bytes(self.params).len();
        (len == 4 * w, format!("{len} ciphertext bytes per {w}-byte element"))
    }
}

/// [`run_selftest`] with a ChaCha stream seeded from `seed`.
pub fn run_selftest_seeded(params: &GroupParams, opts: &SelftestOptions, seed: u64) -> SelftestReport {
    use rand::SeedableRng;
    run_selftest(params, opts, &mut rand_chacha::ChaCha8Rng::seed_from_u64(seed))
}

pub fn run_selftest<R: Rng + ?Sized>(params: &GroupParams, opts: &SelftestOptions, rng: &mut R) -> SelftestReport {
    let mut suite = Suite { params, opts, rng };
    let mut checks = Vec::new();
    for (i, name) in ["roundtrip", "unlinkability", "recognition_soundness", "tagging_blinding", "ciphertext_expansion"]
        .into_iter()
        .enumerate()
    {
        let start = Instant::now();
        let (passed, detail) = match i {
            0 => suite.roundtrip(),
            1 => suite.unlinkability(),
            2 => suite.soundness(),
            3 => suite.tagging(),
            _ => suite.expansion(),
        };
        checks.push(CheckResult {
            name,
            passed,
            detail,
            elapsed: start.elapsed(),
        });
    }
    SelftestReport {
        group_bits: params.bits(),
        checks,
    }
}
