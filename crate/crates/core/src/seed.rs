//! Labelled, splittable seeds for reproducible transcripts.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

/// 32-byte seed. Child seeds are `SHA-256(parent || label)`, so every party
/// and every (file, row, round) gets an independent stream.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Seed([u8; 32]);

impl Seed {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        Seed(bytes)
    }

    pub fn from_u64(v: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"xtspir-seed");
        h.update(v.to_le_bytes());
        Seed(h.finalize().into())
    }

    /// Fresh seed from the operating system.
    pub fn from_entropy() -> Self {
        let mut b = [0u8; 32];
        rand::fill(&mut b);
        Seed(b)
    }

    pub fn derive(&self, label: &str) -> Seed {
        let mut h = Sha256::new();
        h.update(self.0);
        h.update((label.len() as u64).to_le_bytes());
        h.update(label.as_bytes());
        Seed(h.finalize().into())
    }

    pub fn rng(&self) -> ChaCha20Rng {
        ChaCha20Rng::from_seed(self.0)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Seed> {
        let v = hex::decode(s).ok()?;
        Some(Seed(v.try_into().ok()?))
    }
}

impl fmt::Debug for Seed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Seed({})", self.to_hex())
    }
}

impl Serialize for Seed {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Seed {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Seed::from_hex(&s).ok_or_else(|| serde::de::Error::custom("seed must be 64 hex digits"))
    }
}
