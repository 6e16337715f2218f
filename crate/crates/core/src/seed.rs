//! Stable seed derivation and content hashing.
//!
//! `std::hash` is not stable across releases, so everything that must be
//! reproducible between runs goes through SHA-256.

use sha2::{Digest, Sha256};

/// Derives a child seed from a base seed and any number of byte strings.
pub fn derive_seed(base: u64, parts: &[&[u8]]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(base.to_le_bytes());
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
