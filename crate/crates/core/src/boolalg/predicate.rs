//! Adjective and verb predicates and their bit-level serialization.
//!
//! Field layout (all integers unsigned, most significant bit first):
//!
//! Adjective
//! | field            | width               |
//! |------------------|---------------------|
//! | argument count n | 4                   |
//! | argument offsets | n × 8, ascending    |
//! | operation table  | 2^n                 |
//! | quality id       | 32                  |
//!
//! Verb
//! | field             | width                |
//! |-------------------|----------------------|
//! | quality count k   | 4                    |
//! | quality ids       | k × 32, ascending    |
//! | offset count n    | 4                    |
//! | argument offsets  | n × 8, ascending     |
//! | operation table   | 2^(n+k)              |
//! | action offset     | 8                    |
//! | operational bit   | 1 (1 = AND, 0 = XOR) |
//!
//! The operation table lists monomial coefficients: entry `m` is 1 iff the
//! monomial made of the arguments selected by the set bits of `m` is present,
//! where argument `j` is the j-th entry of the ordered list
//! (offsets, then qualities). Every listed argument must occur in some
//! monomial; anything else is rejected, so encodings are canonical.

use serde::{Deserialize, Serialize};

use super::{Monomial, QualityId, Var, ZhegalkinPoly};
use crate::bits::{BitReader, Bits};
use crate::error::{Error, Result};

pub const ARG_COUNT_WIDTH: usize = 4;
pub const OFFSET_WIDTH: usize = 8;
pub const QUALITY_WIDTH: usize = 32;
/// Upper bound on distinct variables in one serialized predicate.
pub const MAX_PREDICATE_VARS: usize = 8;

/// Boolean function of block bits producing one quality.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AdjectivePredicate {
    pub poly: ZhegalkinPoly,
    pub output: QualityId,
}

/// How a verb result combines when it is used to modify a predicate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ActionOp {
    Xor,
    And,
}

impl ActionOp {
    pub fn bit(self) -> bool {
        matches!(self, ActionOp::And)
    }

    pub fn from_bit(b: bool) -> Self {
        if b {
            ActionOp::And
        } else {
            ActionOp::Xor
        }
    }
}

impl From<super::BoolOp> for ActionOp {
    fn from(op: super::BoolOp) -> Self {
        match op {
            super::BoolOp::Xor => ActionOp::Xor,
            super::BoolOp::And => ActionOp::And,
        }
    }
}

/// Boolean function of qualities and block bits whose value is written at
/// `action_point` of the owning block.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VerbPredicate {
    pub poly: ZhegalkinPoly,
    pub action_point: usize,
    pub op: ActionOp,
}

impl AdjectivePredicate {
    pub fn new(poly: ZhegalkinPoly, output: QualityId) -> Result<Self> {
        if !poly.quality_args().is_empty() {
            return Err(Error::arg("adjective may only read block bits"));
        }
        Ok(AdjectivePredicate { poly, output })
    }

    pub fn args(&self) -> Vec<usize> {
        self.poly.bit_args().into_iter().collect()
    }
}

impl VerbPredicate {
    pub fn new(poly: ZhegalkinPoly, action_point: usize, op: ActionOp) -> Self {
        VerbPredicate { poly, action_point, op }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredicateKind {
    Adjective,
    Verb,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Predicate {
    Adjective(AdjectivePredicate),
    Verb(VerbPredicate),
}

fn write_table(out: &mut Bits, poly: &ZhegalkinPoly, args: &[Var]) {
    let n = args.len();
    for m in 0..(1usize << n) {
        let mono = Monomial::new((0..n).filter(|j| m >> j & 1 == 1).map(|j| args[j]));
        out.push(poly.monomials.contains(&mono));
    }
}

fn read_table(r: &mut BitReader<'_>, args: &[Var]) -> Result<ZhegalkinPoly> {
    let n = args.len();
    let mut ms = Vec::new();
    for m in 0..(1usize << n) {
        if r.read_bit()? {
            ms.push(Monomial::new((0..n).filter(|j| m >> j & 1 == 1).map(|j| args[j])));
        }
    }
    let poly = ZhegalkinPoly::from_monomials(ms);
    if poly.variables().len() != n {
        return Err(Error::Decode("listed argument missing from operation table".into()));
    }
    Ok(poly)
}

fn check_offset(o: usize) -> Result<u64> {
    if o >= 1 << OFFSET_WIDTH {
        return Err(Error::arg(format!("offset {o} exceeds {OFFSET_WIDTH}-bit field")));
    }
    Ok(o as u64)
}

fn read_ascending<T: Ord + Copy>(
    r: &mut BitReader<'_>,
    count: usize,
    mut read: impl FnMut(&mut BitReader<'_>) -> Result<T>,
) -> Result<Vec<T>> {
    let mut v: Vec<T> = Vec::with_capacity(count);
    for _ in 0..count {
        let x = read(r)?;
        if v.last().is_some_and(|p| *p >= x) {
            return Err(Error::Decode("argument list not strictly ascending".into()));
        }
        v.push(x);
    }
    Ok(v)
}

fn read_count(r: &mut BitReader<'_>) -> Result<usize> {
    let n = r.read_uint(ARG_COUNT_WIDTH)? as usize;
    if n > MAX_PREDICATE_VARS {
        return Err(Error::Decode(format!("argument count {n} exceeds {MAX_PREDICATE_VARS}")));
    }
    Ok(n)
}

pub fn write_adjective(out: &mut Bits, a: &AdjectivePredicate) -> Result<()> {
    let args = a.args();
    if args.len() > MAX_PREDICATE_VARS {
        return Err(Error::arg(format!("adjective has {} arguments", args.len())));
    }
    out.push_uint(args.len() as u64, ARG_COUNT_WIDTH)?;
    for o in &args {
        out.push_uint(check_offset(*o)?, OFFSET_WIDTH)?;
    }
    let vars: Vec<Var> = args.iter().map(|o| Var::Bit(*o)).collect();
    write_table(out, &a.poly, &vars);
    out.push_uint(u64::from(a.output.0), QUALITY_WIDTH)
}

pub fn read_adjective(r: &mut BitReader<'_>) -> Result<AdjectivePredicate> {
    let n = read_count(r)?;
    let offs = read_ascending(r, n, |r| Ok(r.read_uint(OFFSET_WIDTH)? as usize))?;
    let vars: Vec<Var> = offs.into_iter().map(Var::Bit).collect();
    let poly = read_table(r, &vars)?;
    let output = QualityId(r.read_uint(QUALITY_WIDTH)? as u32);
    Ok(AdjectivePredicate { poly, output })
}

pub fn write_verb(out: &mut Bits, v: &VerbPredicate) -> Result<()> {
    let quals: Vec<QualityId> = v.poly.quality_args().into_iter().collect();
    let offs: Vec<usize> = v.poly.bit_args().into_iter().collect();
    if quals.len() + offs.len() > MAX_PREDICATE_VARS {
        return Err(Error::arg(format!("verb has {} arguments", quals.len() + offs.len())));
    }
    out.push_uint(quals.len() as u64, ARG_COUNT_WIDTH)?;
    for q in &quals {
        out.push_uint(u64::from(q.0), QUALITY_WIDTH)?;
    }
    out.push_uint(offs.len() as u64, ARG_COUNT_WIDTH)?;
    for o in &offs {
        out.push_uint(check_offset(*o)?, OFFSET_WIDTH)?;
    }
    let vars: Vec<Var> =
        offs.iter().map(|o| Var::Bit(*o)).chain(quals.iter().map(|q| Var::Quality(*q))).collect();
    write_table(out, &v.poly, &vars);
    out.push_uint(check_offset(v.action_point)?, OFFSET_WIDTH)?;
    out.push(v.op.bit());
    Ok(())
}

pub fn read_verb(r: &mut BitReader<'_>) -> Result<VerbPredicate> {
    let k = read_count(r)?;
    let quals = read_ascending(r, k, |r| Ok(QualityId(r.read_uint(QUALITY_WIDTH)? as u32)))?;
    let n = read_count(r)?;
    if n + k > MAX_PREDICATE_VARS {
        return Err(Error::Decode(format!("verb has {} arguments", n + k)));
    }
    let offs = read_ascending(r, n, |r| Ok(r.read_uint(OFFSET_WIDTH)? as usize))?;
    let vars: Vec<Var> =
        offs.into_iter().map(Var::Bit).chain(quals.into_iter().map(Var::Quality)).collect();
    let poly = read_table(r, &vars)?;
    let action_point = r.read_uint(OFFSET_WIDTH)? as usize;
    let op = ActionOp::from_bit(r.read_bit()?);
    Ok(VerbPredicate { poly, action_point, op })
}

pub fn serialize_adjective(a: &AdjectivePredicate) -> Result<Bits> {
    let mut out = Bits::new();
    write_adjective(&mut out, a)?;
    Ok(out)
}

pub fn serialize_verb(v: &VerbPredicate) -> Result<Bits> {
    let mut out = Bits::new();
    write_verb(&mut out, v)?;
    Ok(out)
}

/// Decode a whole bit string as one predicate. Trailing bits are an error.
pub fn deserialize_predicate(bits: &Bits, kind: PredicateKind) -> Result<Predicate> {
    if bits.is_empty() {
        return Err(Error::Decode("empty bit string".into()));
    }
    let mut r = bits.reader();
    let p = match kind {
        PredicateKind::Adjective => Predicate::Adjective(read_adjective(&mut r)?),
        PredicateKind::Verb => Predicate::Verb(read_verb(&mut r)?),
    };
    if r.remaining() != 0 {
        return Err(Error::Decode(format!("{} trailing bits", r.remaining())));
    }
    Ok(p)
}
