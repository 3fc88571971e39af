//! Layers, masks and blocks.
//!
//! A [`Layer`] is a fixed-length bit array. A [`Mask`] is a partial pattern:
//! positions without an entry are gaps and match either bit value. Matching a
//! mask at an offset produces a [`Block`]; blocks on one layer never overlap.
//!
//! Regions written with [`Layer::excite_mask`] are remembered on the layer and
//! are invisible to detection until [`Layer::clear_excitation`] is called.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bits::Bits;
use crate::error::{Error, Result};

/// Inclusive address range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Region {
    pub begin: usize,
    pub end: usize,
}

impl Region {
    pub fn new(begin: usize, end: usize) -> Self {
        debug_assert!(begin <= end);
        Region { begin, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.begin + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn intersects(&self, other: &Region) -> bool {
        self.begin <= other.end && other.begin <= self.end
    }

    pub fn contains(&self, addr: usize) -> bool {
        self.begin <= addr && addr <= self.end
    }
}

/// A matched range on a layer, bound to the mask that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Block {
    pub begin: usize,
    pub end: usize,
    pub mask_id: usize,
}

impl Block {
    pub fn region(&self) -> Region {
        Region::new(self.begin, self.end)
    }

    pub fn len(&self) -> usize {
        self.end - self.begin + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Partial bit pattern. `span` may exceed the highest constant offset, so a
/// mask can end in gaps.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Mask {
    entries: BTreeMap<usize, bool>,
    span: usize,
}

impl Mask {
    pub fn new(entries: impl IntoIterator<Item = (usize, bool)>, span: usize) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (off, v) in entries {
            if map.insert(off, v).is_some() {
                return Err(Error::arg(format!("mask offset {off} given twice")));
            }
        }
        if span == 0 {
            return Err(Error::arg("mask span must be positive"));
        }
        if let Some((&max, _)) = map.iter().next_back() {
            if max >= span {
                return Err(Error::arg(format!("mask offset {max} outside span {span}")));
            }
        }
        Ok(Mask { entries: map, span })
    }

    /// Mask whose span is one past its highest entry.
    pub fn from_entries(entries: impl IntoIterator<Item = (usize, bool)>) -> Result<Self> {
        let v: Vec<_> = entries.into_iter().collect();
        let span = v.iter().map(|(o, _)| o + 1).max().unwrap_or(0);
        Mask::new(v, span)
    }

    pub fn span(&self) -> usize {
        self.span
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, bool)> + '_ {
        self.entries.iter().map(|(o, v)| (*o, *v))
    }

    pub fn entry_count(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, offset: usize) -> Option<bool> {
        self.entries.get(&offset).copied()
    }

    /// Same mask with the constant at `offset` turned into a gap.
    pub fn without(&self, offset: usize) -> Result<Mask> {
        if !self.entries.contains_key(&offset) {
            return Err(Error::arg(format!("mask has no constant at {offset}")));
        }
        let mut m = self.clone();
        m.entries.remove(&offset);
        Ok(m)
    }

    /// Whether the mask matches `bits` starting at `offset`.
    pub fn matches_at(&self, bits: &[bool], offset: usize) -> bool {
        offset + self.span <= bits.len()
            && self.entries.iter().all(|(i, v)| bits[offset + i] == *v)
    }
}

/// `1?0` style rendering: `?` marks a gap.
impl fmt::Display for Mask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.span {
            f.write_str(match self.entries.get(&i) {
                Some(true) => "1",
                Some(false) => "0",
                None => "?",
            })?;
        }
        Ok(())
    }
}

impl fmt::Debug for Mask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mask({self})")
    }
}

impl FromStr for Mask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, c) in s.chars().enumerate() {
            match c {
                '0' => entries.push((i, false)),
                '1' => entries.push((i, true)),
                '?' => {}
                other => return Err(Error::arg(format!("bad mask character {other:?}"))),
            }
        }
        Mask::new(entries, s.chars().count())
    }
}

/// Fixed-length bit array plus the regions excited on it during the current pass.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layer {
    bits: Bits,
    excited: Vec<Region>,
}

impl Layer {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::arg("layer length must be positive"));
        }
        Ok(Layer { bits: Bits::zeros(len), excited: Vec::new() })
    }

    pub fn from_bits(bits: Bits) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::arg("layer length must be positive"));
        }
        Ok(Layer { bits, excited: Vec::new() })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn bits(&self) -> &Bits {
        &self.bits
    }

    pub fn get(&self, addr: usize) -> Option<bool> {
        self.bits.get(addr)
    }

    pub fn excited(&self) -> &[Region] {
        &self.excited
    }

    pub fn clear_excitation(&mut self) {
        self.excited.clear();
    }

    fn check(&self, addr: usize) -> Result<()> {
        if addr >= self.len() {
            return Err(Error::Address { address: addr, len: self.len() });
        }
        Ok(())
    }

    /// Copy of the layer with the given points overwritten.
    pub fn write_points(&self, points: &[(usize, bool)]) -> Result<Layer> {
        let mut out = self.clone();
        out.write_in_place(points)?;
        Ok(out)
    }

    pub(crate) fn write_in_place(&mut self, points: &[(usize, bool)]) -> Result<()> {
        for (a, _) in points {
            self.check(*a)?;
        }
        for (a, v) in points {
            self.bits.set(*a, *v);
        }
        Ok(())
    }

    /// Overwrite a run of bits starting at `begin`.

    fn window_excited(&self, offset: usize, span: usize) -> bool {
        let w = Region::new(offset, offset + span - 1);
        self.excited.iter().any(|r| r.intersects(&w))
    }

    /// Ascending offsets where `mask` matches outside excited regions.
    pub fn detect_mask(&self, mask: &Mask) -> Vec<usize> {
        let bits = self.bits.as_slice();
        if mask.span() > bits.len() {
            return Vec::new();
        }
        (0..=bits.len() - mask.span())
            .filter(|&o| mask.matches_at(bits, o) && !self.window_excited(o, mask.span()))
            .collect()
    }

    /// Greedy left-to-right covering. At each position the matching mask
    /// with the largest span wins, ties going to the lowest index.
    pub fn cover(&self, masks: &[Mask]) -> Vec<Block> {
        let bits = self.bits.as_slice();
        let mut blocks = Vec::new();
        let mut pos = 0;
        while pos < bits.len() {
            let mut best: Option<(usize, usize)> = None;
            for (id, m) in masks.iter().enumerate() {
                if m.matches_at(bits, pos)
                    && !self.window_excited(pos, m.span())
                    && best.is_none_or(|(_, s)| m.span() > s)
                {
                    best = Some((id, m.span()));
                }
            }
            match best {
                Some((mask_id, span)) => {
                    blocks.push(Block { begin: pos, end: pos + span - 1, mask_id });
                    pos += span;
                }
                None => pos += 1,
            }
        }
        blocks
    }

    pub fn read_block(&self, block: &Block) -> Result<Bits> {
        self.read_region(block.region())
    }

    pub fn read_region(&self, r: Region) -> Result<Bits> {
        self.check(r.end)?;
        Ok(self.bits.slice(r.begin, r.end + 1))
    }

    /// Force the mask's constants onto the layer at `offset` and record the
    /// region so detection skips it. `occupied` lists blocks already placed
    /// on this layer.
    pub fn excite_mask(&self, mask: &Mask, offset: usize, occupied: &[Block]) -> Result<(Layer, Region)> {
        let mut out = self.clone();
        let r = out.excite_in_place(mask, offset, occupied)?;
        Ok((out, r))
    }

    pub(crate) fn excite_in_place(&mut self, mask: &Mask, offset: usize, occupied: &[Block]) -> Result<Region> {
        let r = Region::new(offset, offset + mask.span() - 1);
        if self.excited.iter().any(|e| e.intersects(&r)) || occupied.iter().any(|b| b.region().intersects(&r)) {
            return Err(Error::Overlap { begin: r.begin, end: r.end });
        }
        if r.end >= self.len() {
            return Err(Error::Address { address: r.end, len: self.len() });
        }
        for (i, v) in mask.entries() {
            self.bits.set(offset + i, v);
        }
        self.excited.push(r);
        Ok(r)
    }
}

impl fmt::Debug for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Layer({})", self.bits)
    }
}

/// True when no two blocks share an address.
pub fn blocks_disjoint(blocks: &[Block]) -> bool {
    let mut v: Vec<Region> = blocks.iter().map(Block::region).collect();
    v.sort();
    v.windows(2).all(|w| w[0].end < w[1].begin)
}
