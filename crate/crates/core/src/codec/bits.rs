//! MSB-first bit sequences, variable-length integers and a keyed CRC-16.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Growable bit sequence with a read cursor.
///
/// Invariant: `cursor <= bits.len()`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BitStream {
    bits: Vec<bool>,
    cursor: usize,
}

/// Payload bits per varint chunk; the chunk's top bit flags continuation.
const VARINT_GROUP: u32 = 7;
const VARINT_MAX_CHUNKS: usize = 5;

impl BitStream {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits, cursor: 0 }
    }

    /// Bits of `bytes`, most significant bit of each byte first.
    pub fn from_bytes(bytes: &[u8]) -> Self {
        let bits = bytes
            .iter()
            .flat_map(|&b| (0..8).rev().map(move |i| (b >> i) & 1 == 1))
            .collect();
        Self::from_bits(bits)
    }

    /// Packs the bits into bytes, zero-padding the last one.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.bits
            .chunks(8)
            .map(|chunk| {
                chunk
                    .iter()
                    .enumerate()
                    .fold(0u8, |acc, (i, &b)| acc | (u8::from(b) << (7 - i)))
            })
            .collect()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn into_bits(self) -> Vec<bool> {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn cursor(&self) -> usize {
        self.cursor
    }

    pub fn remaining(&self) -> usize {
        self.bits.len() - self.cursor
    }

    pub fn push(&mut self, bit: bool) {
        self.bits.push(bit);
    }

    pub fn extend_from_slice(&mut self, bits: &[bool]) {
        self.bits.extend_from_slice(bits);
    }

    /// Appends the low `width` bits of `value`, most significant first.
    pub fn push_uint(&mut self, value: u64, width: u32) {
        debug_assert!(width == 64 || value >> width == 0, "{value} does not fit {width} bits");
        for i in (0..width).rev() {
            self.bits.push((value >> i) & 1 == 1);
        }
    }

    /// Appends `value` in `width`-bit two's complement.
    pub fn push_int(&mut self, value: i64, width: u32) {
        debug_assert!(fits_signed(value, width), "{value} does not fit {width} signed bits");
        let mask = if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
        self.push_uint(value as u64 & mask, width);
    }

    /// Appends `value` as big-endian 7-bit groups, each prefixed by a
    /// continuation flag.
    pub fn push_varint(&mut self, value: u32) {
        let mut groups = Vec::with_capacity(VARINT_MAX_CHUNKS);
        let mut v = value;
        loop {
            groups.push(v & 0x7f);
            v >>= VARINT_GROUP;
            if v == 0 {
                break;
            }
        }
        for (i, &g) in groups.iter().enumerate().rev() {
            self.push(i != 0);
            self.push_uint(u64::from(g), VARINT_GROUP);
        }
    }

    pub fn read_bit(&mut self) -> Option<bool> {
        let bit = *self.bits.get(self.cursor)?;
        self.cursor += 1;
        Some(bit)
    }

    pub fn read_uint(&mut self, width: u32) -> Option<u64> {
        if self.remaining() < width as usize {
            return None;
        }
        let mut v = 0u64;
        for _ in 0..width {
            v = (v << 1) | u64::from(self.read_bit()?);
        }
        Some(v)
    }

    pub fn read_int(&mut self, width: u32) -> Option<i64> {
        let raw = self.read_uint(width)?;
        if width == 0 {
            return Some(0);
        }
        let sign = 1u64 << (width - 1);
        Some(if raw & sign != 0 {
            raw as i64 - (sign << 1) as i64
        } else {
            raw as i64
        })
    }

    pub fn read_varint(&mut self) -> Option<u32> {
        let mut v = 0u64;
        for _ in 0..VARINT_MAX_CHUNKS {
            let more = self.read_bit()?;
            v = (v << VARINT_GROUP) | self.read_uint(VARINT_GROUP)?;
            if !more {
                return u32::try_from(v).ok();
            }
        }
        None
    }
}

/// Whether `value` fits in `width`-bit two's complement.
pub fn fits_signed(value: i64, width: u32) -> bool {
    if width == 0 {
        return value == 0;
    }
    if width >= 64 {
        return true;
    }
    let half = 1i64 << (width - 1);
    (-half..half).contains(&value)
}

/// Bits needed for a signed shift in `[-bound, bound]`: `ceil(log2(2T + 1))`.
pub fn delta_width(bound: u32) -> u32 {
    let symbols = 2 * u64::from(bound) + 1;
    64 - (symbols - 1).leading_zeros()
}

const CRC_POLY: u16 = 0x1021;

/// Key-dependent initial register; a wrong key fails the check.
fn crc_init(key: u64) -> u16 {
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(u64::MAX);
    0xFFFF ^ (rng.next_u32() as u16)
}

/// Public identifier of `key` for metadata files; does not reveal the key.
pub fn key_fingerprint(key: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(u64::MAX - 1);
    rng.next_u64()
}

/// CRC-16 (polynomial 0x1021) over a bit sequence, seeded from `key`.
pub fn keyed_crc16(bits: &[bool], key: u64) -> u16 {
    bits.iter().fold(crc_init(key), |reg, &bit| {
        let top = (reg >> 15) & 1 == 1;
        let reg = reg << 1;
        if top ^ bit {
            reg ^ CRC_POLY
        } else {
            reg
        }
    })
}
