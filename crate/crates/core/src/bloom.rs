//! Bloom filter used as a compact proof of execution.
//!
//! Bit positions come from enhanced double hashing over SHA-256: the filter
//! seed and the item are hashed once, the first two little-endian words of
//! the digest give `h1` and `h2` (forced odd), and round `i` sets bit
//! `(h1 + i * h2 + (i^3 - i) / 6) mod m`. The cubic term keeps rounds apart
//! when `h2` shares a large factor with `m`; plain `h1 + i * h2` collapses
//! to a handful of bits in that case, which inflates the false positive
//! rate of small filters far beyond their fill.
//!
//! Binary layout (little-endian):
//!
//! ```text
//! "SPXB" | version u8 = 1 | num_hashes u32 | num_bits u64 | seed u64 | payload
//! ```
//!
//! The payload is `ceil(m / 8)` bytes; bit `i` lives at `(byte[i / 8] >> (i % 8)) & 1`
//! and unused high bits of the last byte are zero.

use std::f64::consts::LN_2;

use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, SpexError};
use crate::rng::seeded;

pub const MAGIC: [u8; 4] = *b"SPXB";
pub const FORMAT_VERSION: u8 = 1;
pub const HEADER_LEN: usize = 4 + 1 + 4 + 8 + 8;

/// Sizing request for a new filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterParams {
    capacity: u64,
    target_fpr: f64,
}

impl FilterParams {
    pub fn new(capacity: u64, target_fpr: f64) -> Result<Self> {
        if capacity == 0 {
            return Err(SpexError::param("filter capacity must be at least 1"));
        }
        if !(target_fpr > 0.0 && target_fpr < 1.0) {
            return Err(SpexError::param(format!(
                "target false positive rate must lie in (0, 1), got {target_fpr}"
            )));
        }
        Ok(FilterParams { capacity, target_fpr })
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn target_fpr(&self) -> f64 {
        self.target_fpr
    }

    /// Optimal bit count `ceil(-n ln p / (ln 2)^2)`.
    pub fn num_bits(&self) -> u64 {
        let n = self.capacity as f64;
        let m = (-n * self.target_fpr.ln() / (LN_2 * LN_2)).ceil();
        (m as u64).max(1)
    }

    /// Optimal round count `max(1, round((m / n) ln 2))`.
    pub fn num_hashes(&self) -> u32 {
        let m = self.num_bits() as f64;
        let k = (m / self.capacity as f64 * LN_2).round();
        (k as u32).max(1)
    }
}

/// Empirical false positive rate from random probes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FprEstimate {
    pub estimate: f64,
    pub trials: u64,
    pub hits: u64,
}

#[derive(Debug, Clone)]
pub struct BloomFilter {
    bits: Vec<u8>,
    num_bits: u64,
    num_hashes: u32,
    seed: u64,
    inserted_count: u64,
}

/// Equality covers everything that affects lookups and the wire format.
/// The insertion counter travels separately, in the proof envelope.
impl PartialEq for BloomFilter {
    fn eq(&self, other: &Self) -> bool {
        self.num_bits == other.num_bits
            && self.num_hashes == other.num_hashes
            && self.seed == other.seed
            && self.bits == other.bits
    }
}

impl Eq for BloomFilter {}

fn payload_len(num_bits: u64) -> u64 {
    num_bits.div_ceil(8)
}

impl BloomFilter {
    /// Creates an empty filter sized for `params`, with seed 0.
    pub fn new(params: FilterParams) -> Self {
        Self::with_seed(params, 0)
    }

    pub fn with_seed(params: FilterParams, seed: u64) -> Self {
        let num_bits = params.num_bits();
        BloomFilter {
            bits: vec![0; payload_len(num_bits) as usize],
            num_bits,
            num_hashes: params.num_hashes(),
            seed,
            inserted_count: 0,
        }
    }

    /// Builds a filter from explicit geometry and a payload.
    pub fn from_raw_parts(num_bits: u64, num_hashes: u32, seed: u64, bits: Vec<u8>) -> Result<Self> {
        if num_bits == 0 || num_hashes == 0 {
            return Err(SpexError::param("filter needs at least one bit and one hash round"));
        }
        if bits.len() as u64 != payload_len(num_bits) {
            return Err(SpexError::param(format!(
                "payload of {} bytes does not match {num_bits} bits",
                bits.len()
            )));
        }
        let mut filter = BloomFilter {
            bits,
            num_bits,
            num_hashes,
            seed,
            inserted_count: 0,
        };
        filter.clear_trailing_bits();
        Ok(filter)
    }

    /// A filter with every bit set, answering `true` to any lookup.
    pub fn saturated(num_bits: u64, num_hashes: u32, seed: u64) -> Result<Self> {
        Self::from_raw_parts(num_bits, num_hashes, seed, vec![0xff; payload_len(num_bits) as usize])
    }

    fn clear_trailing_bits(&mut self) {
        let used = (self.num_bits % 8) as u32;
        if used != 0 {
            if let Some(last) = self.bits.last_mut() {
                *last &= (1u8 << used) - 1;
            }
        }
    }

    pub fn num_bits(&self) -> u64 {
        self.num_bits
    }

    pub fn num_hashes(&self) -> u32 {
        self.num_hashes
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn inserted_count(&self) -> u64 {
        self.inserted_count
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    /// Number of bits currently set.
    pub fn ones(&self) -> u64 {
        self.bits.iter().map(|b| u64::from(b.count_ones())).sum()
    }

    /// `(ones / m)^k`, the false positive rate implied by the current fill.
    pub fn fill_fpr(&self) -> f64 {
        (self.ones() as f64 / self.num_bits as f64).powi(self.num_hashes as i32)
    }

    fn positions(&self, item: u64) -> impl Iterator<Item = u64> {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(item.to_le_bytes());
        let digest = hasher.finalize();
        let h1 = u64::from_le_bytes(digest[0..8].try_into().expect("8 bytes"));
        let h2 = u64::from_le_bytes(digest[8..16].try_into().expect("8 bytes")) | 1;
        let m = u128::from(self.num_bits);
        (0..u128::from(self.num_hashes)).map(move |i| {
            let offset = (i * i * i - i) / 6;
            ((u128::from(h1) + i * u128::from(h2) + offset) % m) as u64
        })
    }

    fn bit(&self, pos: u64) -> bool {
        (self.bits[(pos / 8) as usize] >> (pos % 8)) & 1 == 1
    }

    pub fn insert(&mut self, item: u64) {
        let positions: Vec<u64> = self.positions(item).collect();
        for pos in positions {
            self.bits[(pos / 8) as usize] |= 1 << (pos % 8);
        }
        self.inserted_count += 1;
    }

    pub fn lookup(&self, item: u64) -> bool {
        self.positions(item).all(|pos| self.bit(pos))
    }

    /// Probes the filter with `trials` uniformly random 64-bit values drawn
    /// from a SplitMix64 stream seeded with `rng_seed`.
    pub fn estimate_fpr(&self, trials: u64, rng_seed: u64) -> Result<FprEstimate> {
        if trials == 0 {
            return Err(SpexError::param("FPR estimation needs at least one trial"));
        }
        let mut rng = seeded(rng_seed);
        let hits = (0..trials).filter(|_| self.lookup(rng.next_u64())).count() as u64;
        Ok(FprEstimate {
            estimate: hits as f64 / trials as f64,
            trials,
            hits,
        })
    }

    pub fn serialize(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.bits.len());
        out.extend_from_slice(&MAGIC);
        out.push(FORMAT_VERSION);
        out.extend_from_slice(&self.num_hashes.to_le_bytes());
        out.extend_from_slice(&self.num_bits.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.bits);
        out
    }

    /// Decodes the binary layout. The insertion counter starts at zero.
    pub fn deserialize(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(SpexError::format(format!(
                "filter truncated: {} bytes, header needs {HEADER_LEN}",
                bytes.len()
            )));
        }
        if bytes[0..4] != MAGIC {
            return Err(SpexError::format("bad filter magic"));
        }
        if bytes[4] != FORMAT_VERSION {
            return Err(SpexError::format(format!("unsupported filter version {}", bytes[4])));
        }
        let num_hashes = u32::from_le_bytes(bytes[5..9].try_into().expect("4 bytes"));
        let num_bits = u64::from_le_bytes(bytes[9..17].try_into().expect("8 bytes"));
        let seed = u64::from_le_bytes(bytes[17..25].try_into().expect("8 bytes"));
        if num_hashes == 0 || num_bits == 0 {
            return Err(SpexError::format(
                "filter header declares zero bits or zero hash rounds",
            ));
        }
        let payload = &bytes[HEADER_LEN..];
        if payload.len() as u64 != payload_len(num_bits) {
            return Err(SpexError::format(format!(
                "payload is {} bytes, expected {} for {num_bits} bits",
                payload.len(),
                payload_len(num_bits)
            )));
        }
        let used = (num_bits % 8) as u32;
        if used != 0 && payload[payload.len() - 1] >> used != 0 {
            return Err(SpexError::format("nonzero trailing bits in filter payload"));
        }
        Ok(BloomFilter {
            bits: payload.to_vec(),
            num_bits,
            num_hashes,
            seed,
            inserted_count: 0,
        })
    }

    /// Restores the insertion counter after decoding, e.g. from `countItems`.
    pub fn with_inserted_count(mut self, count: u64) -> Self {
        self.inserted_count = count;
        self
    }
}
