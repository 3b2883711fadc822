//! Sub-seed derivation so independent tasks get independent, reproducible streams.

use sha2::{Digest, Sha256};

/// Seed for the task named `label` under `master`.
pub fn derive(master: u64, label: &str) -> u64 {
    derive_indexed(master, label, 0)
}

/// Seed for the `index`-th task named `label` under `master`.
pub fn derive_indexed(master: u64, label: &str, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(label.as_bytes());
    h.update([0u8]);
    h.update(index.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}
