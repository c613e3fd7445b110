//! Canonical byte encoding used for every digest in the crate.
//!
//! Integers are 8-byte little-endian, reals are their IEEE-754 bit pattern
//! as a little-endian `u64`, digests are written raw, and lists carry an
//! 8-byte length prefix. The encoder streams straight into SHA-256.

use sha2::{Digest as _, Sha256};

use super::Digest;

/// Streaming canonical encoder feeding SHA-256.
#[derive(Clone, Default)]
pub struct Encoder {
    hasher: Sha256,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn u64(mut self, v: u64) -> Self {
        self.hasher.update(v.to_le_bytes());
        self
    }

    pub fn f64(self, v: f64) -> Self {
        self.u64(v.to_bits())
    }

    pub fn digest(mut self, d: &Digest) -> Self {
        self.hasher.update(d.0);
        self
    }

    pub fn bytes(mut self, b: &[u8]) -> Self {
        self.hasher.update(b);
        self
    }

    /// Length prefix for a list that follows.
    pub fn len(self, n: usize) -> Self {
        self.u64(n as u64)
    }

    pub fn finish(self) -> Digest {
        Digest(self.hasher.finalize().into())
    }
}

/// SHA-256 of raw bytes.
pub fn hash_bytes(b: &[u8]) -> Digest {
    Encoder::new().bytes(b).finish()
}

/// `hash(d ‖ u64le(x))`, the shape used by shuffling and proposer sampling.
pub fn hash_digest_u64(d: &Digest, x: u64) -> Digest {
    Encoder::new().digest(d).u64(x).finish()
}

/// `hash(d ‖ u64le(x) ‖ u64le(y))`.
pub fn hash_digest_u64_u64(d: &Digest, x: u64, y: u64) -> Digest {
    Encoder::new().digest(d).u64(x).u64(y).finish()
}
