//! Deterministic random streams.
//!
//! Every random quantity in the crate is drawn from a [`Stream`] that is
//! derived from `(seed, label, index)` by hashing, so parallel workers can
//! each own an independent substream and results do not depend on the
//! number of threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Stream = ChaCha8Rng;

fn digest(seed: u64, label: &str, index: u64) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(b"embedlab-stream");
    hasher.update(seed.to_le_bytes());
    hasher.update((label.len() as u64).to_le_bytes());
    hasher.update(label.as_bytes());
    hasher.update(index.to_le_bytes());
    let out = hasher.finalize();
    let mut bytes = [0u8; 32];
    bytes.copy_from_slice(&out);
    bytes
}

/// Seed for the substream `(seed, label, index)`.
pub fn derive_seed(seed: u64, label: &str, index: u64) -> u64 {
    let bytes = digest(seed, label, index);
    u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes"))
}

pub fn substream(seed: u64, label: &str, index: u64) -> Stream {
    ChaCha8Rng::from_seed(digest(seed, label, index))
}

pub fn stream(seed: u64) -> Stream {
    substream(seed, "root", 0)
}
