//! Universal re-encryption over a safe-prime quadratic-residue group, the
//! byte encoding used to carry plaintext, and sealed two-part messages.

mod encoding;
mod group;
mod scheme;
mod seal;
pub mod selftest;

pub use encoding::{decode_plaintext, encode_plaintext};
pub use group::{is_probable_prime, GroupParams};
pub use scheme::{
    decrypt, encrypt, encrypt_with, keygen, keygen_with, recognizes, reencrypt, reencrypt_with, KeyPair,
    PrivateKey, PublicKey, UreCiphertext,
};
pub use seal::{
    open_envelope, open_payload, payload_block_count, seal_message, Nonce, SealedMessage, MAX_PAYLOAD_BYTES,
    NONCE_BYTES,
};
