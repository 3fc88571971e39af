//! Plain bit strings plus a cursor for fixed-width field decoding.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An owned sequence of bits. Rendered and parsed as a `0`/`1` string.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Bits(Vec<bool>);

impl Bits {
    pub fn new() -> Self {
        Bits(Vec::new())
    }

    pub fn zeros(len: usize) -> Self {
        Bits(vec![false; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<bool> {
        self.0.get(i).copied()
    }

    pub fn set(&mut self, i: usize, v: bool) {
        self.0[i] = v;
    }

    pub fn push(&mut self, v: bool) {
        self.0.push(v);
    }

    pub fn extend_from(&mut self, other: &Bits) {
        self.0.extend_from_slice(&other.0);
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        self.0.iter().copied()
    }

    pub fn slice(&self, begin: usize, end_exclusive: usize) -> Bits {
        Bits(self.0[begin..end_exclusive].to_vec())
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|b| **b).count()
    }

    /// Append `value` as `width` bits, most significant first.
    pub fn push_uint(&mut self, value: u64, width: usize) -> Result<()> {
        if width < 64 && value >> width != 0 {
            return Err(Error::arg(format!("value {value} does not fit in {width} bits")));
        }
        for i in (0..width).rev() {
            self.0.push((value >> i) & 1 == 1);
        }
        Ok(())
    }

    /// Zero-extend (or truncate) to exactly `len` bits.
    pub fn resized(&self, len: usize) -> Bits {
        let mut v = self.0.clone();
        v.resize(len, false);
        Bits(v)
    }

    pub fn reader(&self) -> BitReader<'_> {
        BitReader { bits: &self.0, pos: 0 }
    }

    pub fn into_vec(self) -> Vec<bool> {
        self.0
    }
}

impl From<Vec<bool>> for Bits {
    fn from(v: Vec<bool>) -> Self {
        Bits(v)
    }
}

impl FromIterator<bool> for Bits {
    fn from_iter<I: IntoIterator<Item = bool>>(iter: I) -> Self {
        Bits(iter.into_iter().collect())
    }
}

impl FromStr for Bits {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::arg(format!("not a bit character: {other:?}"))),
            })
            .collect()
    }
}

impl fmt::Display for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            f.write_str(if *b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bits({self})")
    }
}

impl Serialize for Bits {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Bits {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Sequential reader over a bit string. Every read reports truncation as a decode error.
pub struct BitReader<'a> {
    bits: &'a [bool],
    pos: usize,
}

impl BitReader<'_> {
    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.bits.len() - self.pos
    }

    pub fn read_bit(&mut self) -> Result<bool> {
        let b = *self
            .bits
            .get(self.pos)
            .ok_or_else(|| Error::Decode(format!("truncated at bit {}", self.pos)))?;
        self.pos += 1;
        Ok(b)
    }

    pub fn read_uint(&mut self, width: usize) -> Result<u64> {
        if self.remaining() < width {
            return Err(Error::Decode(format!(
                "need {width} bits at {}, only {} left",
                self.pos,
                self.remaining()
            )));
        }
        let mut v = 0u64;
        for _ in 0..width {
            v = (v << 1) | u64::from(self.read_bit()?);
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uint_fields_round_trip() {
        let mut b = Bits::new();
        b.push_uint(5, 4).unwrap();
        b.push_uint(0, 2).unwrap();
        b.push_uint(255, 8).unwrap();
        assert_eq!(b.to_string(), "01010011111111");
        let mut r = b.reader();
        assert_eq!(r.read_uint(4).unwrap(), 5);
        assert_eq!(r.read_uint(2).unwrap(), 0);
        assert_eq!(r.read_uint(8).unwrap(), 255);
        assert!(r.read_bit().is_err());
    }

    #[test]
    fn overflowing_field_rejected() {
        assert!(Bits::new().push_uint(16, 4).is_err());
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!("01x".parse::<Bits>().is_err());
        assert_eq!("".parse::<Bits>().unwrap().len(), 0);
    }
}
