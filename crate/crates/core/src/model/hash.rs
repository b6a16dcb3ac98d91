//! The hash family used for flow keys, Bloom filters and sketches.
//!
//! Every hashed structure row gets its own 64-bit seed:
//!
//! ```text
//! name_hash   = FNV-1a-64(variable name)
//! row_seed    = mix(global_seed ^ mix(name_hash) ^ mix(row + 0x9e3779b97f4a7c15))
//! h           = mix(row_seed)
//! for v in key component values (declaration order):
//!     h = mix(h ^ v) + 0x9e3779b97f4a7c15   (wrapping)
//! hash(key)   = mix(h)
//! ```
//!
//! `mix` is the SplitMix64 finalizer (xor-shift 30/27/31 with the multipliers
//! `0xbf58476d1ce4e5b9` and `0x94d049bb133111eb`). HashMap slot selection uses
//! row number `0xffff_ffff`. These constants are part of the file formats:
//! changing any of them changes every state dump and sink digest.

use super::packet::Packet;
use super::schema::FieldRef;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// Row number used when a HashMap picks a slot.
pub const SLOT_ROW: u32 = 0xffff_ffff;

#[inline]
pub fn mix64(mut x: u64) -> u64 {
    x ^= x >> 30;
    x = x.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Seed for one row of one named structure.
pub fn row_seed(global_seed: u64, name: &str, row: u32) -> u64 {
    mix64(global_seed ^ mix64(fnv1a64(name.as_bytes())) ^ mix64(row as u64 + GOLDEN))
}

pub fn hash_values(values: &[u64], seed: u64) -> u64 {
    let mut h = mix64(seed);
    for v in values {
        h = mix64(h ^ v).wrapping_add(GOLDEN);
    }
    mix64(h)
}

/// An ordered list of fields that groups packets into flows.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FlowKey {
    pub name: String,
    pub fields: Vec<FieldRef>,
}

impl FlowKey {
    pub fn values(&self, p: &Packet) -> Vec<u64> {
        self.fields.iter().map(|f| p.get(f)).collect()
    }

    /// Bucket of `p` in a structure with `size` buckets, in `[0, size)`.
    pub fn index(&self, p: &Packet, size: u32, seed: u64) -> u32 {
        key_index(&self.values(p), size, seed)
    }
}

pub fn key_index(values: &[u64], size: u32, seed: u64) -> u32 {
    debug_assert!(size >= 1);
    (hash_values(values, seed) % size.max(1) as u64) as u32
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixer_reference_values() {
        // SplitMix64 finalizer of 0 and 1.
        assert_eq!(mix64(0), 0);
        assert_eq!(mix64(1), 0x5692_161d_100b_05e5);
    }

    #[test]
    fn rows_get_distinct_seeds() {
        let a = row_seed(0, "nbytes", 0);
        let b = row_seed(0, "nbytes", 1);
        let c = row_seed(0, "hh", 0);
        let d = row_seed(1, "nbytes", 0);
        assert!(a != b && a != c && a != d);
    }

    #[test]
    fn single_bucket_is_always_zero() {
        for v in 0..100u64 {
            assert_eq!(key_index(&[v, v * 7], 1, 42), 0);
        }
    }
}
