//! Fixed-length binary state vectors for visible and hidden layers.

use crate::{Error, Result};

/// A fixed-length vector of {0,1} bits addressing one RBM layer.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct BitVector {
    bits: Vec<u8>,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        Self { bits: vec![0; len] }
    }

    /// Build from raw bits; every entry must be 0 or 1.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        if bits.iter().any(|&b| b > 1) {
            return Err(Error::Data("bit vector entries must be 0 or 1".into()));
        }
        Ok(Self { bits: bits.to_vec() })
    }

    /// State `index` of a `len`-bit layer; bit i is `(index >> i) & 1`.
    ///
    /// This is the enumeration order used by every exact oracle in the crate.
    pub fn from_index(index: usize, len: usize) -> Self {
        let bits = (0..len).map(|i| ((index >> i) & 1) as u8).collect();
        Self { bits }
    }

    /// Inverse of [`BitVector::from_index`].
    pub fn to_index(&self) -> usize {
        self.bits
            .iter()
            .enumerate()
            .fold(0usize, |acc, (i, &b)| acc | ((b as usize) << i))
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> u8 {
        self.bits[i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, bit: u8) {
        debug_assert!(bit <= 1);
        self.bits[i] = bit;
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.bits
    }

    pub fn iter(&self) -> std::slice::Iter<'_, u8> {
        self.bits.iter()
    }

    /// Bits rendered as a '0'/'1' string, e.g. for CSV dumps.
    pub fn to_bit_string(&self) -> String {
        self.bits.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect()
    }

    /// New vector with `bit` appended at the end (class-bit convention).
    pub fn with_appended(&self, bit: u8) -> Self {
        debug_assert!(bit <= 1);
        let mut bits = self.bits.clone();
        bits.push(bit);
        Self { bits }
    }
}
