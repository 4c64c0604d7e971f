//! Additively composable hashing.
//!
//! Each input part is hashed to a vector of 32 16-bit lanes; combining is
//! lane-wise addition mod 2^16. Combination is therefore associative and
//! commutative, and the hash of a multi-part input equals the combination
//! of the per-part hashes. A verifier holding one secret-derived summand
//! can cancel it out of a received composite and check the remainder
//! against public data, which is what the round-token verification in
//! [`super`] relies on.

use sha2::{Digest, Sha512};
use thiserror::Error;

/// Number of 16-bit lanes in a composite digest (64 bytes serialized).
pub const LANES: usize = 32;

#[derive(Debug, Error, PartialEq)]
pub enum HashError {
    #[error("compose_hash requires at least one part")]
    Empty,
}

/// Digest living in the lane-vector group (Z_2^16)^32.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CompositeHash {
    lanes: [u16; LANES],
}

impl CompositeHash {
    pub const ZERO: CompositeHash = CompositeHash { lanes: [0; LANES] };

    /// Hashes a single part into the lane group.
    pub fn of_part(part: &[u8]) -> Self {
        let digest = Sha512::digest(part);
        let mut lanes = [0u16; LANES];
        for (i, lane) in lanes.iter_mut().enumerate() {
            *lane = u16::from_le_bytes([digest[2 * i], digest[2 * i + 1]]);
        }
        CompositeHash { lanes }
    }

    /// Lane-wise modular addition.
    pub fn combine(&self, other: &CompositeHash) -> Self {
        let mut lanes = [0u16; LANES];
        for i in 0..LANES {
            lanes[i] = self.lanes[i].wrapping_add(other.lanes[i]);
        }
        CompositeHash { lanes }
    }

    /// Lane-wise modular subtraction; inverse of [`combine`].
    ///
    /// [`combine`]: CompositeHash::combine
    pub fn subtract(&self, other: &CompositeHash) -> Self {
        let mut lanes = [0u16; LANES];
        for i in 0..LANES {
            lanes[i] = self.lanes[i].wrapping_sub(other.lanes[i]);
        }
        CompositeHash { lanes }
    }

    pub fn to_bytes(&self) -> [u8; 2 * LANES] {
        let mut out = [0u8; 2 * LANES];
        for (i, lane) in self.lanes.iter().enumerate() {
            out[2 * i..2 * i + 2].copy_from_slice(&lane.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8; 2 * LANES]) -> Self {
        let mut lanes = [0u16; LANES];
        for (i, lane) in lanes.iter_mut().enumerate() {
            *lane = u16::from_le_bytes([bytes[2 * i], bytes[2 * i + 1]]);
        }
        CompositeHash { lanes }
    }
}

/// Hashes an ordered list of parts; equals the combination of the
/// per-part hashes.
pub fn compose_hash(parts: &[&[u8]]) -> Result<CompositeHash, HashError> {
    if parts.is_empty() {
        return Err(HashError::Empty);
    }
    let mut acc = CompositeHash::ZERO;
    for part in parts {
        acc = acc.combine(&CompositeHash::of_part(part));
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn deterministic() {
        let a = compose_hash(&[b"hello"]).unwrap();
        let b = compose_hash(&[b"hello"]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_rejected() {
        assert_eq!(compose_hash(&[]), Err(HashError::Empty));
    }

    #[test]
    fn compositional_law() {
        let ha = CompositeHash::of_part(b"a");
        let hb = CompositeHash::of_part(b"b");
        assert_eq!(ha.combine(&hb), compose_hash(&[b"a", b"b"]).unwrap());
    }

    #[test]
    fn combine_associative_over_random_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let mut parts = [[0u8; 24]; 3];
            for p in parts.iter_mut() {
                rng.fill(p);
            }
            let (a, b, c) = (
                CompositeHash::of_part(&parts[0]),
                CompositeHash::of_part(&parts[1]),
                CompositeHash::of_part(&parts[2]),
            );
            assert_eq!(a.combine(&b).combine(&c), a.combine(&b.combine(&c)));
            // commutativity comes along for free with lane addition
            assert_eq!(a.combine(&b), b.combine(&a));
        }
    }

    #[test]
    fn subtract_inverts_combine() {
        let a = CompositeHash::of_part(b"x");
        let b = CompositeHash::of_part(b"y");
        assert_eq!(a.combine(&b).subtract(&b), a);
    }

    #[test]
    fn byte_roundtrip() {
        let a = CompositeHash::of_part(b"roundtrip");
        assert_eq!(CompositeHash::from_bytes(&a.to_bytes()), a);
    }

    #[test]
    fn distinct_inputs_collide_rarely() {
        let mut seen = std::collections::HashSet::new();
        for i in 0..1000u32 {
            let h = CompositeHash::of_part(&i.to_le_bytes());
            assert!(seen.insert(h.to_bytes()), "collision at {i}");
        }
    }
}
