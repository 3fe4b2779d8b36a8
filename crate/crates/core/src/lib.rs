//! Anonymous message routing over the photo-upload channel of a social
//! network.
//!
//! Messages ride inside images that users publish anyway. Each node pulls
//! its friends' recent uploads, keeps what it cannot read, and decides what
//! to forward from how similar the sender's neighbourhood is to its own and
//! how quickly its friends tend to upload. Ciphertexts use universal
//! re-encryption so every hop looks fresh.

pub mod crypto_ure;
pub mod delay_model;
pub mod error;
pub mod experiment;
pub mod messaging;
pub mod routing;
pub mod sim_engine;
pub mod social_graph;

pub use error::{Error, Result};
