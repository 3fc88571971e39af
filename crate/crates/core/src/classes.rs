//! Nouns, simple classes and the class operations.
//!
//! Every class carries its full derivation: the basis class it started from
//! and the ordered list of operations applied since. Operations never modify
//! their input. The overclass mapping ([`phi_encode`] / [`phi_decode`])
//! serializes that derivation, so any class reachable from the basis has a
//! stable bit-string form and any such bit string replays to the class.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bitspace::Mask;
use crate::bits::{BitReader, Bits};
use crate::boolalg::{ActionOp, AdjectivePredicate, BoolOp, QualityId, VerbPredicate, ZhegalkinPoly};
use crate::error::{Error, Result};

/// Index of a class in a class store: basis classes first, then local ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClassId(pub u32);

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Noun {
    pub mask: Mask,
    pub qualities: Vec<QualityId>,
    pub actions: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PredicateTarget {
    Adjective,
    Verb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClassOp {
    /// Append `target[l] op target[m]`.
    Predicate { target: PredicateTarget, op: BoolOp, l: usize, m: usize },
    /// Turn the mask constant at `offset` into a gap read by a new adjective.
    Specialize { offset: usize },
    /// Turn the mask constant at `offset` into a gap written by a new verb.
    Argument { offset: usize },
}

/// Who requested an operation. Operations outside the spontaneous set may
/// only enter memory through internal speech.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Provenance {
    Engine,
    InternalSpeech,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DerivationStep {
    pub op: ClassOp,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Origin {
    pub basis_index: u32,
    pub steps: Vec<DerivationStep>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SimpleClass {
    pub noun: Noun,
    pub adjectives: Vec<AdjectivePredicate>,
    pub verbs: Vec<VerbPredicate>,
    /// Constituent nouns when this class is recognized as a sentence on a
    /// projection layer; empty for classes detected directly by mask.
    pub sentence: Vec<ClassId>,
    pub origin: Origin,
}

impl SimpleClass {
    /// Class with only a noun.
    pub fn empty(mask: Mask, basis_index: u32) -> Self {
        SimpleClass {
            noun: Noun { mask, qualities: Vec::new(), actions: Vec::new() },
            adjectives: Vec::new(),
            verbs: Vec::new(),
            sentence: Vec::new(),
            origin: Origin { basis_index, steps: Vec::new() },
        }
    }

    /// Build a basis class and check the noun/predicate invariants.
    pub fn basis(
        mask: Mask,
        adjectives: Vec<AdjectivePredicate>,
        verbs: Vec<VerbPredicate>,
        basis_index: u32,
    ) -> Result<Self> {
        let mut c = SimpleClass::empty(mask, basis_index);
        c.noun.qualities = adjectives.iter().map(|a| a.output).collect();
        c.noun.actions = Vec::new();
        for v in &verbs {
            if !c.noun.actions.contains(&v.action_point) {
                c.noun.actions.push(v.action_point);
            }
        }
        c.adjectives = adjectives;
        c.verbs = verbs;
        c.validate()?;
        Ok(c)
    }

    pub fn is_empty_class(&self) -> bool {
        self.adjectives.is_empty() && self.verbs.is_empty()
    }

    pub fn span(&self) -> usize {
        self.noun.mask.span()
    }

    pub fn validate(&self) -> Result<()> {
        let span = self.span();
        for a in &self.adjectives {
            if let Some(o) = a.poly.bit_args().into_iter().find(|o| *o >= span) {
                return Err(Error::arg(format!("adjective reads offset {o} outside span {span}")));
            }
            if !self.noun.qualities.contains(&a.output) {
                return Err(Error::arg(format!("adjective output {} not declared", a.output)));
            }
        }
        for v in &self.verbs {
            if v.action_point >= span {
                return Err(Error::arg(format!("action point {} outside span {span}", v.action_point)));
            }
            if let Some(o) = v.poly.bit_args().into_iter().find(|o| *o >= span) {
                return Err(Error::arg(format!("verb reads offset {o} outside span {span}")));
            }
            if !self.noun.actions.contains(&v.action_point) {
                return Err(Error::arg(format!("action point {} not declared", v.action_point)));
            }
        }
        Ok(())
    }

    /// Qualities produced by this class's own adjectives.
    pub fn own_qualities(&self) -> BTreeSet<QualityId> {
        self.adjectives.iter().map(|a| a.output).collect()
    }

    /// Smallest offset inside the span that every active adjective reads and
    /// no other adjective reads.
    pub fn resolve_action_point(&self, active: &BTreeSet<usize>) -> Result<usize> {
        if active.is_empty() {
            return Err(Error::arg("at least one active adjective is required"));
        }
        if let Some(i) = active.iter().find(|i| **i >= self.adjectives.len()) {
            return Err(Error::arg(format!("no adjective {i}")));
        }
        let args: Vec<BTreeSet<usize>> = self.adjectives.iter().map(|a| a.poly.bit_args()).collect();
        (0..self.span())
            .find(|o| {
                args.iter().enumerate().all(|(k, set)| set.contains(o) == active.contains(&k))
            })
            .ok_or_else(|| Error::Ambiguity(format!("no offset separates adjectives {active:?}")))
    }

    /// Apply one operation, recording it with the given provenance.
    pub fn apply(&self, op: ClassOp, provenance: Provenance) -> Result<SimpleClass> {
        let mut next = self.clone();
        next.origin.steps.push(DerivationStep { op, provenance });
        match op {
            ClassOp::Predicate { target: PredicateTarget::Adjective, op, l, m } => {
                let (a, b) = pick(&self.adjectives, l, m, "adjective")?;
                let q = fresh_quality(&next.origin);
                next.adjectives.push(AdjectivePredicate { poly: op.apply(&a.poly, &b.poly), output: q });
                next.noun.qualities.push(q);
            }
            ClassOp::Predicate { target: PredicateTarget::Verb, op, l, m } => {
                let (a, b) = pick(&self.verbs, l, m, "verb")?;
                let point = self.verb_action_point(a.action_point, b.action_point)?;
                next.verbs.push(VerbPredicate::new(op.apply(&a.poly, &b.poly), point, ActionOp::from(op)));
                if !next.noun.actions.contains(&point) {
                    next.noun.actions.push(point);
                }
            }
            ClassOp::Specialize { offset } => {
                next.noun.mask = self.noun.mask.without(offset)?;
                let q = fresh_quality(&next.origin);
                next.adjectives.push(AdjectivePredicate { poly: ZhegalkinPoly::bit(offset), output: q });
                next.noun.qualities.push(q);
            }
            ClassOp::Argument { offset } => {
                let c = self
                    .noun
                    .mask
                    .get(offset)
                    .ok_or_else(|| Error::arg(format!("mask has no constant at {offset}")))?;
                next.noun.mask = self.noun.mask.without(offset)?;
                let poly = if c { ZhegalkinPoly::one() } else { ZhegalkinPoly::zero() };
                next.verbs.push(VerbPredicate::new(poly, offset, ActionOp::Xor));
                if !next.noun.actions.contains(&offset) {
                    next.noun.actions.push(offset);
                }
            }
        }
        Ok(next)
    }

    pub fn apply_predicate_op(&self, target: PredicateTarget, op: BoolOp, l: usize, m: usize) -> Result<SimpleClass> {
        self.apply(ClassOp::Predicate { target, op, l, m }, Provenance::Engine)
    }

    pub fn noun_specialize(&self, offset: usize) -> Result<SimpleClass> {
        self.apply(ClassOp::Specialize { offset }, Provenance::Engine)
    }

    pub fn noun_argument(&self, offset: usize) -> Result<SimpleClass> {
        self.apply(ClassOp::Argument { offset }, Provenance::Engine)
    }

    /// Action point for a verb combined from operands acting at `a` and `b`:
    /// the adjectives reading either point are the active ones.
    fn verb_action_point(&self, a: usize, b: usize) -> Result<usize> {
        let active: BTreeSet<usize> = self
            .adjectives
            .iter()
            .enumerate()
            .filter(|(_, adj)| {
                let args = adj.poly.bit_args();
                args.contains(&a) || args.contains(&b)
            })
            .map(|(i, _)| i)
            .collect();
        if active.is_empty() {
            return if a == b {
                Ok(a)
            } else {
                Err(Error::Ambiguity(format!("no adjective observes action points {a} or {b}")))
            };
        }
        self.resolve_action_point(&active)
    }
}

fn pick<'a, T>(list: &'a [T], l: usize, m: usize, what: &str) -> Result<(&'a T, &'a T)> {
    match (list.get(l), list.get(m)) {
        (Some(a), Some(b)) => Ok((a, b)),
        _ => Err(Error::arg(format!("{what} index out of range: ({l}, {m}) of {}", list.len()))),
    }
}

/// Quality identifier for the predicate created by the last step of `origin`.
/// It depends only on the derivation, so it is the same in every run.
fn fresh_quality(origin: &Origin) -> QualityId {
    let mut bits = Bits::new();
    // Steps exceeding the field widths still need an id; hash the raw form then.
    if write_origin(&mut bits, origin).is_err() {
        bits = format!("{origin:?}").bytes().flat_map(|b| (0..8).map(move |i| b >> i & 1 == 1)).collect();
    }
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bits.iter() {
        h ^= u64::from(b) + 1;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let folded = (h ^ (h >> 32)) as u32;
    QualityId(folded | QualityId::DERIVED_BIT)
}

/// Fixed, run-invariant ordered list of classes every derivation starts from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Basis {
    classes: Vec<SimpleClass>,
    names: Vec<String>,
}

impl Basis {
    pub fn new(classes: Vec<(String, SimpleClass)>) -> Result<Self> {
        if classes.len() > 1 << PHI_BASIS_WIDTH {
            return Err(Error::arg(format!("basis holds at most {} classes", 1 << PHI_BASIS_WIDTH)));
        }
        let mut names = Vec::new();
        let mut out = Vec::new();
        for (i, (name, c)) in classes.into_iter().enumerate() {
            if c.origin.basis_index as usize != i || !c.origin.steps.is_empty() {
                return Err(Error::arg(format!("class {name} is not a basis class at index {i}")));
            }
            c.validate()?;
            names.push(name);
            out.push(c);
        }
        Ok(Basis { classes: out, names })
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&SimpleClass> {
        self.classes.get(i)
    }

    pub fn classes(&self) -> &[SimpleClass] {
        &self.classes
    }

    pub fn name(&self, i: usize) -> Option<&str> {
        self.names.get(i).map(String::as_str)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

pub const PHI_BASIS_WIDTH: usize = 8;
pub const PHI_STEPS_WIDTH: usize = 4;
pub const PHI_INDEX_WIDTH: usize = 6;
pub const PHI_OFFSET_WIDTH: usize = 8;

fn write_origin(out: &mut Bits, origin: &Origin) -> Result<()> {
    let too_big = |what: &str| Error::NotEncodable(format!("{what} exceeds its field"));
    out.push_uint(u64::from(origin.basis_index), PHI_BASIS_WIDTH).map_err(|_| too_big("basis index"))?;
    out.push_uint(origin.steps.len() as u64, PHI_STEPS_WIDTH).map_err(|_| too_big("step count"))?;
    for s in &origin.steps {
        match s.op {
            ClassOp::Predicate { target, op, l, m } => {
                out.push_uint(0, 2)?;
                out.push(matches!(s.provenance, Provenance::InternalSpeech));
                out.push(matches!(target, PredicateTarget::Verb));
                out.push(matches!(op, BoolOp::And));
                out.push_uint(l as u64, PHI_INDEX_WIDTH).map_err(|_| too_big("predicate index"))?;
                out.push_uint(m as u64, PHI_INDEX_WIDTH).map_err(|_| too_big("predicate index"))?;
            }
            ClassOp::Specialize { offset } | ClassOp::Argument { offset } => {
                out.push_uint(if matches!(s.op, ClassOp::Specialize { .. }) { 1 } else { 2 }, 2)?;
                out.push(matches!(s.provenance, Provenance::InternalSpeech));
                out.push_uint(offset as u64, PHI_OFFSET_WIDTH).map_err(|_| too_big("offset"))?;
            }
        }
    }
    Ok(())
}

fn read_origin(r: &mut BitReader<'_>) -> Result<Origin> {
    let basis_index = r.read_uint(PHI_BASIS_WIDTH)? as u32;
    let n = r.read_uint(PHI_STEPS_WIDTH)? as usize;
    let mut steps = Vec::with_capacity(n);
    for _ in 0..n {
        let tag = r.read_uint(2)?;
        let provenance = if r.read_bit()? { Provenance::InternalSpeech } else { Provenance::Engine };
        let op = match tag {
            0 => {
                let target = if r.read_bit()? { PredicateTarget::Verb } else { PredicateTarget::Adjective };
                let op = if r.read_bit()? { BoolOp::And } else { BoolOp::Xor };
                let l = r.read_uint(PHI_INDEX_WIDTH)? as usize;
                let m = r.read_uint(PHI_INDEX_WIDTH)? as usize;
                ClassOp::Predicate { target, op, l, m }
            }
            1 => ClassOp::Specialize { offset: r.read_uint(PHI_OFFSET_WIDTH)? as usize },
            2 => ClassOp::Argument { offset: r.read_uint(PHI_OFFSET_WIDTH)? as usize },
            t => return Err(Error::Decode(format!("unknown step tag {t}"))),
        };
        steps.push(DerivationStep { op, provenance });
    }
    Ok(Origin { basis_index, steps })
}

/// Replay a derivation against the basis.
pub fn replay(origin: &Origin, basis: &Basis) -> Result<SimpleClass> {
    let mut c = basis
        .get(origin.basis_index as usize)
        .ok_or_else(|| Error::NotEncodable(format!("no basis class {}", origin.basis_index)))?
        .clone();
    for s in &origin.steps {
        c = c.apply(s.op, s.provenance)?;
    }
    Ok(c)
}

/// Bit-string form of a class reachable from `basis`.
pub fn phi_encode(class: &SimpleClass, basis: &Basis) -> Result<Bits> {
    let replayed = replay(&class.origin, basis).map_err(|e| Error::NotEncodable(e.to_string()))?;
    if &replayed != class {
        return Err(Error::NotEncodable("class does not match its derivation record".into()));
    }
    let mut out = Bits::new();
    write_origin(&mut out, &class.origin)?;
    Ok(out)
}

/// Inverse of [`phi_encode`]. The whole string must be consumed.
pub fn phi_decode(bits: &Bits, basis: &Basis) -> Result<SimpleClass> {
    let mut r = bits.reader();
    let c = phi_decode_prefix(&mut r, basis)?;
    if r.remaining() != 0 {
        return Err(Error::Decode(format!("{} trailing bits after class encoding", r.remaining())));
    }
    Ok(c)
}

/// Decode one class from the front of a reader.
pub fn phi_decode_prefix(r: &mut BitReader<'_>, basis: &Basis) -> Result<SimpleClass> {
    let origin = read_origin(r)?;
    replay(&origin, basis).map_err(|e| match e {
        Error::Decode(_) => e,
        other => Error::Decode(other.to_string()),
    })
}
