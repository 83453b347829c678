//! Seeding, hashing, and small numeric helpers shared across modules.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derives an independent child seed from a root seed and a label.
///
/// Children for distinct labels are uncorrelated, and the same
/// (seed, label) pair always yields the same child, which keeps parallel
/// fan-out deterministic regardless of scheduling order.
pub fn derive_seed(root: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// ChaCha8 stream seeded from (root, label) via [`derive_seed`].
pub fn seeded_rng(root: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, label))
}

/// Hex SHA-256 of a byte slice, used to stamp config identity onto outputs.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let digest = h.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Mean of a slice; 0.0 for empty input.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population variance of a slice; 0.0 for fewer than two values.
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
}

/// Formats an f64 with enough digits to round-trip exactly.
pub fn format_exact(x: f64) -> String {
    let mut s = format!("{x}");
    if s.parse::<f64>() != Ok(x) {
        s = format!("{x:.17e}");
    }
    s
}
