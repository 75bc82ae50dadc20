//! Bit-exact buffers used for game messages and algorithm memory.

use serde::{Deserialize, Serialize};

/// A finite bit string. Bits are packed little-endian within each byte.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitBuf {
    bytes: Vec<u8>,
    len: usize,
}

impl BitBuf {
    pub fn new() -> Self {
        Self::default()
    }

    /// `bits` zero bits.
    pub fn zeros(bits: usize) -> Self {
        Self {
            bytes: vec![0; bits.div_ceil(8)],
            len: bits,
        }
    }

    /// Wrap whole bytes; the length is `8 * bytes.len()`.
    pub fn from_bytes(bytes: Vec<u8>) -> Self {
        let len = bytes.len() * 8;
        Self { bytes, len }
    }

    /// Length in bits.
    pub fn bit_len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn get(&self, i: usize) -> Option<bool> {
        (i < self.len).then(|| self.bytes[i / 8] >> (i % 8) & 1 == 1)
    }

    pub fn push_bit(&mut self, bit: bool) {
        if self.len % 8 == 0 {
            self.bytes.push(0);
        }
        if bit {
            self.bytes[self.len / 8] |= 1 << (self.len % 8);
        }
        self.len += 1;
    }

    /// Append the low `n` bits of `value`, least significant first.
    pub fn push_bits(&mut self, value: u64, n: u32) {
        debug_assert!(n <= 64);
        for i in 0..n {
            self.push_bit(value >> i & 1 == 1);
        }
    }

    pub fn push_u64(&mut self, value: u64) {
        self.push_bits(value, 64);
    }

    pub fn push_f64(&mut self, value: f64) {
        self.push_u64(value.to_bits());
    }

    /// Zero-extend to `bits` bits. No-op if already that long.
    pub fn pad_to(&mut self, bits: usize) {
        while self.len < bits {
            self.push_bit(false);
        }
    }

    pub fn reader(&self) -> BitReader<'_> {
        BitReader { buf: self, pos: 0 }
    }
}

/// Sequential reader over a [`BitBuf`].
#[derive(Debug)]
pub struct BitReader<'a> {
    buf: &'a BitBuf,
    pos: usize,
}

impl BitReader<'_> {
    pub fn remaining(&self) -> usize {
        self.buf.len - self.pos
    }

    pub fn read_bits(&mut self, n: u32) -> Option<u64> {
        if n > 64 || self.remaining() < n as usize {
            return None;
        }
        let mut v = 0u64;
        for i in 0..n {
            if self.buf.get(self.pos)? {
                v |= 1 << i;
            }
            self.pos += 1;
        }
        Some(v)
    }

    pub fn read_u64(&mut self) -> Option<u64> {
        self.read_bits(64)
    }

    pub fn read_f64(&mut self) -> Option<f64> {
        self.read_u64().map(f64::from_bits)
    }
}
