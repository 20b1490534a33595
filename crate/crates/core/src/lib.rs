pub mod cli;
pub mod config;
pub mod decode;
pub mod error;
pub mod exact;
pub mod lattice;
pub mod mc;
pub mod noise;
pub mod parity;
pub mod realmeas;
pub mod smmodel;
pub mod statevec;

pub use error::{Error, Result};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent stream for `(master seed, sample, replica)`; the triple is the ChaCha key.
pub fn seeded_rng(master: u64, sample: u64, replica: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master.to_le_bytes());
    key[8..16].copy_from_slice(&sample.to_le_bytes());
    key[16..24].copy_from_slice(&replica.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
