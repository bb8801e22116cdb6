//! Bit-prefix encodings of secrets.
//!
//! A secret `s < 2^L` with bits `s_1 .. s_L` (most significant first) has a
//! *partition vector* whose entry `i` encodes the prefix `s_1..s_i`, and a
//! *0-coded vector* whose entry `i` encodes `s_1..s_{i-1} 1` when `s_i = 0`
//! and a random filler string of length other than `i` when `s_i = 1`.
//! Then `a > b` exactly when `partition(a) - zero_coded(b)` has one zero
//! entry, and never more than one.
//!
//! Bit strings are mapped to the field by prepending a `1` (the sentinel):
//! `w -> 2^|w| + int(w)`. This is injective across lengths, so "01" and "1"
//! no longer collide, and a filler of length `!= i` can never equal a
//! length-`i` prefix. [`EncodingMode::Raw`] reads strings as plain binary
//! numerals and exists only to reproduce hand-worked examples.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{FieldConfig, FieldElement};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodingError {
    #[error("input {value} does not fit in {bits} bits")]
    OutOfRange { value: u64, bits: u32 },
    #[error("bit length must be positive")]
    ZeroLength,
    #[error("field q = {q} too small for {bits}-bit encodings (need 2^{need} < q)")]
    FieldTooSmall { q: u64, bits: u32, need: u32 },
    #[error("filler at position {position} has forbidden length {len}")]
    BadFiller { position: usize, len: usize },
    #[error("vector was not built in sentinel mode")]
    NotSentinel,
    #[error("last entry {0} is not a valid sentinel encoding")]
    BadEncoding(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncodingMode {
    /// Plain binary numeral; not injective across lengths.
    Raw,
    /// `2^|w| + int(w)`; the protocol default.
    #[default]
    Sentinel,
}

/// Ordered bits, most significant first. Leading zeros are significant.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitString {
    bits: Vec<bool>,
}

impl BitString {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    /// Parses strings like `"1010"`.
    pub fn parse(s: &str) -> Option<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(Self::new)
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn prefix(&self, len: usize) -> BitString {
        BitString::new(self.bits[..len].to_vec())
    }

    /// Integer value of the bits read as a binary numeral.
    pub fn as_int(&self) -> u128 {
        self.bits
            .iter()
            .fold(0u128, |acc, &b| (acc << 1) | u128::from(b))
    }

    fn with_last(&self, bit: bool) -> BitString {
        let mut bits = self.bits.clone();
        bits.push(bit);
        BitString::new(bits)
    }
}

impl std::fmt::Display for BitString {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Length-`len` big-endian binary representation of `s`.
pub fn to_bits(s: u64, len: u32) -> Result<BitString, EncodingError> {
    if len == 0 {
        return Err(EncodingError::ZeroLength);
    }
    if len < 64 && s >> len != 0 {
        return Err(EncodingError::OutOfRange { value: s, bits: len });
    }
    Ok(BitString::new(
        (0..len).rev().map(|k| k < 64 && (s >> k) & 1 == 1).collect(),
    ))
}

/// Sentinel encoding `2^|w| + int(w)`.
pub fn encode_string(w: &BitString, field: &FieldConfig) -> Result<FieldElement, EncodingError> {
    let len = w.len() as u32;
    if len + 1 >= 64 || (1u64 << (len + 1)) >= field.modulus() {
        return Err(EncodingError::FieldTooSmall {
            q: field.modulus(),
            bits: len,
            need: len + 1,
        });
    }
    Ok(field.elem((1u64 << len) + w.as_int() as u64))
}

fn encode(w: &BitString, field: &FieldConfig, mode: EncodingMode) -> Result<FieldElement, EncodingError> {
    match mode {
        EncodingMode::Sentinel => encode_string(w, field),
        EncodingMode::Raw => Ok(field.elem(w.as_int() as u64)),
    }
}

/// Checks that every encoding of strings up to length `bits + 1` fits.
pub fn check_field_capacity(bits: u32, field: &FieldConfig, mode: EncodingMode) -> Result<(), EncodingError> {
    if bits == 0 {
        return Err(EncodingError::ZeroLength);
    }
    let need = match mode {
        EncodingMode::Sentinel => bits + 2,
        EncodingMode::Raw => bits + 1,
    };
    if need >= 64 || (1u64 << need) >= field.modulus() {
        return Err(EncodingError::FieldTooSmall {
            q: field.modulus(),
            bits,
            need,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionVector {
    entries: Vec<FieldElement>,
    bit_length: u32,
    mode: EncodingMode,
}

impl PartitionVector {
    pub fn entries(&self) -> &[FieldElement] {
        &self.entries
    }

    pub fn bit_length(&self) -> u32 {
        self.bit_length
    }

    pub fn mode(&self) -> EncodingMode {
        self.mode
    }

    pub fn from_entries(entries: Vec<FieldElement>, mode: EncodingMode) -> Self {
        Self {
            bit_length: entries.len() as u32,
            entries,
            mode,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZeroCodedVector {
    entries: Vec<FieldElement>,
    bit_length: u32,
    mode: EncodingMode,
}

impl ZeroCodedVector {
    pub fn entries(&self) -> &[FieldElement] {
        &self.entries
    }

    pub fn bit_length(&self) -> u32 {
        self.bit_length
    }

    pub fn mode(&self) -> EncodingMode {
        self.mode
    }
}

/// Entry `i` (1-based) encodes the prefix `s_1..s_i`.
pub fn partition_vector(
    s: u64,
    bits: u32,
    field: &FieldConfig,
    mode: EncodingMode,
) -> Result<PartitionVector, EncodingError> {
    check_field_capacity(bits, field, mode)?;
    let w = to_bits(s, bits)?;
    let entries = (1..=bits as usize)
        .map(|i| encode(&w.prefix(i), field, mode))
        .collect::<Result<_, _>>()?;
    Ok(PartitionVector {
        entries,
        bit_length: bits,
        mode,
    })
}

/// Random filler for position `position` (1-based): length uniform on
/// `{1, .., bits + 1} \ {position}`, bits uniform.
pub fn random_filler<R: Rng + ?Sized>(position: usize, bits: u32, rng: &mut R) -> BitString {
    let k = rng.gen_range(1..=bits as usize);
    let len = if k < position { k } else { k + 1 };
    BitString::new((0..len).map(|_| rng.gen::<bool>()).collect())
}

/// 0-coded vector with fillers supplied by `filler(position)`.
pub fn zero_coded_vector_with<F>(
    s: u64,
    bits: u32,
    field: &FieldConfig,
    mode: EncodingMode,
    mut filler: F,
) -> Result<ZeroCodedVector, EncodingError>
where
    F: FnMut(usize) -> BitString,
{
    check_field_capacity(bits, field, mode)?;
    let w = to_bits(s, bits)?;
    let mut entries = Vec::with_capacity(bits as usize);
    for i in 1..=bits as usize {
        let string = if w.bits()[i - 1] {
            let f = filler(i);
            if f.len() == i || f.is_empty() || f.len() > bits as usize + 1 {
                return Err(EncodingError::BadFiller {
                    position: i,
                    len: f.len(),
                });
            }
            f
        } else {
            w.prefix(i - 1).with_last(true)
        };
        entries.push(encode(&string, field, mode)?);
    }
    Ok(ZeroCodedVector {
        entries,
        bit_length: bits,
        mode,
    })
}

pub fn zero_coded_vector<R: Rng + ?Sized>(
    s: u64,
    bits: u32,
    field: &FieldConfig,
    mode: EncodingMode,
    rng: &mut R,
) -> Result<ZeroCodedVector, EncodingError> {
    zero_coded_vector_with(s, bits, field, mode, |i| random_filler(i, bits, rng))
}

/// Plaintext evaluation of the zero-count comparison test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZeroCount {
    /// 1-based positions where the difference vanishes.
    pub zero_positions: Vec<usize>,
    /// `true` iff exactly one position vanishes.
    pub verdict: bool,
}

impl ZeroCount {
    pub fn count(&self) -> usize {
        self.zero_positions.len()
    }
}

/// Computes `partition(a) - zero_coded(b)` in sentinel mode and counts zeros.
pub fn zero_count_oracle<R: Rng + ?Sized>(
    a: u64,
    b: u64,
    bits: u32,
    field: &FieldConfig,
    rng: &mut R,
) -> Result<ZeroCount, EncodingError> {
    let va = partition_vector(a, bits, field, EncodingMode::Sentinel)?;
    let vb = zero_coded_vector(b, bits, field, EncodingMode::Sentinel, rng)?;
    Ok(count_zeros(&va, &vb))
}

pub fn count_zeros(va: &PartitionVector, vb: &ZeroCodedVector) -> ZeroCount {
    let zero_positions: Vec<usize> = va
        .entries()
        .iter()
        .zip(vb.entries())
        .enumerate()
        .filter(|(_, (x, y))| (**x - **y).is_zero())
        .map(|(i, _)| i + 1)
        .collect();
    ZeroCount {
        verdict: zero_positions.len() == 1,
        zero_positions,
    }
}

/// Recovers the secret from the last entry of a sentinel partition vector.
pub fn decode_secret(v: &PartitionVector) -> Result<u64, EncodingError> {
    if v.mode != EncodingMode::Sentinel {
        return Err(EncodingError::NotSentinel);
    }
    decode_last_entry(*v.entries.last().expect("non-empty"), v.bit_length)
}

/// `last - 2^L`, checking the sentinel range `[2^L, 2^(L+1))`.
pub fn decode_last_entry(last: FieldElement, bits: u32) -> Result<u64, EncodingError> {
    let x = last.value();
    let lo = 1u64 << bits;
    if x < lo || x >= lo << 1 {
        return Err(EncodingError::BadEncoding(x));
    }
    Ok(x - lo)
}

/// Sentinel offset `2^L` carried by the last partition entry.
pub fn sentinel_offset(bits: u32) -> u64 {
    1u64 << bits
}

/// Order-reversing complement `2^L - 1 - s`.
pub fn complement(s: u64, bits: u32) -> u64 {
    ((1u64 << bits) - 1) - s
}

/// Constant `c_i` with `enc_i(s) = c_i - enc_i(complement(s))` for the
/// sentinel partition entry `i` (1-based): `c_i = 3 * 2^i - 1`.
pub fn complement_constant(position: usize) -> u64 {
    3 * (1u64 << position) - 1
}

/// Public filler for 0-coded vectors rebuilt inside the protocol: the
/// all-zero string of length `L + 1`, valid at every position `i <= L`.
pub fn public_filler(bits: u32) -> u64 {
    1u64 << (bits + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn vals(v: &[FieldElement]) -> Vec<u64> {
        v.iter().map(|e| e.value()).collect()
    }

    fn big() -> FieldConfig {
        FieldConfig::mersenne61()
    }

    #[test]
    fn bits_of_example_inputs() {
        assert_eq!(to_bits(10, 4).unwrap().to_string(), "1010");
        assert_eq!(to_bits(9, 4).unwrap().to_string(), "1001");
        assert_eq!(to_bits(0, 3).unwrap().to_string(), "000");
        assert_eq!(
            to_bits(8, 3),
            Err(EncodingError::OutOfRange { value: 8, bits: 3 })
        );
    }

    #[test]
    fn sentinel_string_encoding() {
        let f = big();
        let enc = |s: &str| encode_string(&BitString::parse(s).unwrap(), &f).unwrap().value();
        assert_eq!(enc("1010"), 26);
        assert_eq!(enc("01"), 5);
        assert_eq!(enc("1"), 3);
        assert_eq!(enc("0"), 2);
        let tiny = FieldConfig::new(11).unwrap();
        assert!(encode_string(&BitString::parse("111").unwrap(), &tiny).is_err());
    }

    #[test]
    fn encode_string_injective_up_to_12_bits() {
        let f = big();
        let mut seen = HashSet::new();
        for len in 1..=12u32 {
            for v in 0..(1u64 << len) {
                let e = encode_string(&to_bits(v, len).unwrap(), &f).unwrap().value();
                assert!(seen.insert(e), "collision at len {len} value {v}");
                assert!(e >= 1 << len && e < 1 << (len + 1));
            }
        }
    }

    #[test]
    fn partition_vectors() {
        let f = big();
        let raw = partition_vector(10, 4, &f, EncodingMode::Raw).unwrap();
        assert_eq!(vals(raw.entries()), [1, 2, 5, 10]);
        let sen = partition_vector(10, 4, &f, EncodingMode::Sentinel).unwrap();
        assert_eq!(vals(sen.entries()), [3, 6, 13, 26]);
        let z = partition_vector(0, 2, &f, EncodingMode::Sentinel).unwrap();
        assert_eq!(vals(z.entries()), [2, 4]);
    }

    #[test]
    fn example_zero_coded_vector_with_hand_fillers() {
        let f = big();
        let v = zero_coded_vector_with(9, 4, &f, EncodingMode::Raw, |i| match i {
            1 => BitString::parse("11").unwrap(),
            4 => BitString::parse("100").unwrap(),
            _ => unreachable!(),
        })
        .unwrap();
        assert_eq!(vals(v.entries()), [3, 3, 5, 4]);
    }

    #[test]
    fn sentinel_zero_coded_forced_positions() {
        let f = big();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let v = zero_coded_vector(9, 4, &f, EncodingMode::Sentinel, &mut rng).unwrap();
            let e = vals(v.entries());
            assert_eq!(e[1], 7);
            assert_eq!(e[2], 13);
            assert!(!(2..4).contains(&e[0]), "filler 1 has length 1");
            assert!(!(16..32).contains(&e[3]), "filler 4 has length 4");
        }
    }

    #[test]
    fn all_ones_is_all_fillers() {
        let f = big();
        let mut calls = 0;
        zero_coded_vector_with(15, 4, &f, EncodingMode::Sentinel, |i| {
            calls += 1;
            to_bits(0, if i == 1 { 2 } else { 1 }).unwrap()
        })
        .unwrap();
        assert_eq!(calls, 4);
    }

    #[test]
    fn fillers_never_land_in_own_length_range() {
        let f = big();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for bits in 1..=8u32 {
            for _ in 0..200 {
                let v = zero_coded_vector(
                    (1 << bits) - 1,
                    bits,
                    &f,
                    EncodingMode::Sentinel,
                    &mut rng,
                )
                .unwrap();
                for (k, e) in v.entries().iter().enumerate() {
                    let i = k as u32 + 1;
                    assert!(e.value() < 1 << i || e.value() >= 1 << (i + 1));
                    assert!(e.value() < 1 << (bits + 2));
                }
            }
        }
    }

    #[test]
    fn bad_filler_rejected() {
        let f = big();
        let err = zero_coded_vector_with(8, 4, &f, EncodingMode::Sentinel, |_| {
            BitString::parse("1").unwrap()
        });
        assert_eq!(err, Err(EncodingError::BadFiller { position: 1, len: 1 }));
    }

    #[test]
    fn oracle_examples() {
        let f = big();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = zero_count_oracle(10, 9, 4, &f, &mut rng).unwrap();
        assert_eq!(r.zero_positions, [3]);
        assert!(r.verdict);
        let r = zero_count_oracle(9, 10, 4, &f, &mut rng).unwrap();
        assert_eq!(r.count(), 0);
        assert!(!r.verdict);
        for bits in 1..=6 {
            let a = (1 << bits) - 1;
            assert_eq!(zero_count_oracle(a, a, bits, &f, &mut rng).unwrap().count(), 0);
        }
    }

    #[test]
    fn decode_round_trips() {
        let f = big();
        let v = partition_vector(10, 4, &f, EncodingMode::Sentinel).unwrap();
        assert_eq!(decode_secret(&v).unwrap(), 10);
        let v = partition_vector(0, 4, &f, EncodingMode::Sentinel).unwrap();
        assert_eq!(decode_secret(&v).unwrap(), 0);
        let raw = partition_vector(10, 4, &f, EncodingMode::Raw).unwrap();
        assert_eq!(decode_secret(&raw), Err(EncodingError::NotSentinel));

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let bits = rng.gen_range(1..=58);
            let s = rng.gen_range(0..1u64 << bits);
            let v = partition_vector(s, bits, &f, EncodingMode::Sentinel).unwrap();
            assert_eq!(decode_secret(&v).unwrap(), s);
        }
    }

    #[test]
    fn complement_is_affine_on_partition_entries() {
        let f = big();
        for bits in 1..=6u32 {
            for s in 0..(1u64 << bits) {
                let v = partition_vector(s, bits, &f, EncodingMode::Sentinel).unwrap();
                let c = partition_vector(complement(s, bits), bits, &f, EncodingMode::Sentinel).unwrap();
                for (i, (x, y)) in v.entries().iter().zip(c.entries()).enumerate() {
                    assert_eq!(x.value() + y.value(), complement_constant(i + 1));
                }
            }
        }
    }

    #[test]
    fn capacity_check() {
        let f = FieldConfig::new(257).unwrap();
        assert!(check_field_capacity(6, &f, EncodingMode::Sentinel).is_ok());
        assert!(check_field_capacity(7, &f, EncodingMode::Sentinel).is_err());
        let f = FieldConfig::new(37).unwrap();
        assert!(check_field_capacity(3, &f, EncodingMode::Sentinel).is_ok());
        let f = FieldConfig::new(11).unwrap();
        assert!(check_field_capacity(3, &f, EncodingMode::Sentinel).is_err());
    }
}
