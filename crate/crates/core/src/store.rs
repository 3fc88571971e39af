//! Class store: the basis followed by derived classes, plus local shadows.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::bits::Bits;
use crate::bitspace::Mask;
use crate::classes::{Basis, ClassId, SimpleClass};
use crate::error::{Error, Result};

/// Number of bits needed to tell `n` values apart.
pub fn bits_for(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize
    }
}

/// Width of a noun slot on projection layers: guard bit plus class index.
pub fn slot_width(basis_len: usize, derived_budget: usize) -> usize {
    bits_for(basis_len + derived_budget) + 1
}

/// Slot pattern for one class index.
pub fn slot_bits(id: ClassId, width: usize) -> Result<Bits> {
    let mut b = Bits::new();
    b.push(true);
    b.push_uint(u64::from(id.0), width - 1)?;
    Ok(b)
}

pub fn slot_mask(id: ClassId, width: usize) -> Result<Mask> {
    Mask::new(slot_bits(id, width)?.iter().enumerate(), width)
}

/// Mask recognized by a sentence class: its constituents' slots side by side.
pub fn sentence_mask(constituents: &[ClassId], width: usize) -> Result<Mask> {
    if constituents.is_empty() {
        return Err(Error::arg("a sentence needs at least one constituent"));
    }
    let mut all = Bits::new();
    for c in constituents {
        all.extend_from(&slot_bits(*c, width)?);
    }
    Mask::new(all.iter().enumerate(), all.len())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassStore {
    basis: Arc<Basis>,
    classes: Vec<SimpleClass>,
    budget: usize,
    /// Global class id to the local class replacing it.
    shadows: BTreeMap<ClassId, ClassId>,
    /// Basis classes run by the stereotype instead of the stack.
    stereotyped: BTreeSet<ClassId>,
}

impl ClassStore {
    pub fn new(basis: Arc<Basis>, derived_budget: usize) -> Result<Self> {
        let width = slot_width(basis.len(), derived_budget);
        for (i, c) in basis.classes().iter().enumerate() {
            if c.sentence.is_empty() {
                continue;
            }
            if c.sentence.iter().any(|s| s.0 as usize >= basis.len() || s.0 as usize == i) {
                return Err(Error::arg(format!("sentence of class {i} names an unknown or its own class")));
            }
            if c.noun.mask != sentence_mask(&c.sentence, width)? {
                return Err(Error::arg(format!("sentence class {i} mask does not match slot width {width}")));
            }
        }
        Ok(ClassStore { classes: basis.classes().to_vec(), basis, budget: derived_budget, shadows: BTreeMap::new(), stereotyped: BTreeSet::new() })
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn slot_width(&self) -> usize {
        slot_width(self.basis.len(), self.budget)
    }

    pub fn get(&self, id: ClassId) -> Option<&SimpleClass> {
        self.classes.get(id.0 as usize)
    }

    pub fn class(&self, id: ClassId) -> Result<&SimpleClass> {
        self.get(id).ok_or_else(|| Error::arg(format!("unknown class {id}")))
    }

    pub fn ids(&self) -> impl Iterator<Item = ClassId> {
        (0..self.classes.len() as u32).map(ClassId)
    }

    pub fn is_global(&self, id: ClassId) -> bool {
        (id.0 as usize) < self.basis.len()
    }

    /// Id of an equal class, inserting it when new.
    pub fn intern(&mut self, class: SimpleClass) -> Result<ClassId> {
        if let Some(i) = self.classes.iter().position(|c| *c == class) {
            return Ok(ClassId(i as u32));
        }
        let derived = self.classes.len() - self.basis.len();
        if derived >= self.budget {
            return Err(Error::Capacity { needed: derived + 1, available: self.budget });
        }
        class.validate()?;
        self.classes.push(class);
        Ok(ClassId(self.classes.len() as u32 - 1))
    }

    pub fn lookup(&self, class: &SimpleClass) -> Option<ClassId> {
        self.classes.iter().position(|c| c == class).map(|i| ClassId(i as u32))
    }

    /// Global class with the same noun as `local`, if any.
    pub fn global_for(&self, local: &SimpleClass) -> Option<ClassId> {
        self.basis
            .classes()
            .iter()
            .position(|g| g.noun.mask == local.noun.mask && g.sentence == local.sentence)
            .map(|i| ClassId(i as u32))
    }

    pub fn shadows(&self) -> &BTreeMap<ClassId, ClassId> {
        &self.shadows
    }

    /// Make `local` replace the global class with the same noun.
    pub fn install_local(&mut self, local: ClassId) -> Result<Option<ClassId>> {
        let class = self.class(local)?.clone();
        let global = self
            .global_for(&class)
            .ok_or_else(|| Error::Scope(format!("local class {local} has no global class with its noun")))?;
        Ok(if global == local { self.shadows.remove(&global) } else { self.shadows.insert(global, local) })
    }

    pub fn remove_local(&mut self, global: ClassId) -> Option<ClassId> {
        self.shadows.remove(&global)
    }

    pub fn set_shadows(&mut self, shadows: BTreeMap<ClassId, ClassId>) {
        self.shadows = shadows;
    }

    /// Class actually used where `global` is detected.
    pub fn effective(&self, global: ClassId) -> ClassId {
        self.shadows.get(&global).copied().unwrap_or(global)
    }

    /// Basis classes detected by mask on the signal layer, in id order.
    pub fn signal_classes(&self) -> Vec<ClassId> {
        self.basis
            .classes()
            .iter()
            .enumerate()
            .filter(|(i, c)| c.sentence.is_empty() && !self.stereotyped.contains(&ClassId(*i as u32)))
            .map(|(i, _)| ClassId(i as u32))
            .collect()
    }

    /// Keep these classes out of signal-layer detection.
    pub fn set_stereotyped(&mut self, ids: impl IntoIterator<Item = ClassId>) {
        self.stereotyped = ids.into_iter().collect();
    }

    /// Basis classes recognized as sentences, in id order.
    pub fn sentence_classes(&self) -> Vec<ClassId> {
        self.basis
            .classes()
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.sentence.is_empty())
            .map(|(i, _)| ClassId(i as u32))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn widths() {
        assert_eq!(bits_for(1), 0);
        assert_eq!(bits_for(2), 1);
        assert_eq!(bits_for(8), 3);
        assert_eq!(bits_for(9), 4);
        assert_eq!(slot_width(3, 5), 4);
        assert_eq!(slot_bits(ClassId(5), 4).unwrap().to_string(), "1101");
        assert_eq!(sentence_mask(&[ClassId(0), ClassId(1)], 3).unwrap().to_string(), "100101");
    }
}
