//! Zhegalkin polynomials (algebraic normal form) over named variables.
//!
//! A polynomial is an XOR of monomials, each monomial an AND of distinct
//! variables; the empty monomial is the constant 1 and the empty sum is 0.
//! Representation is canonical: the monomial set is kept sorted, and the
//! variable set is exactly the variables occurring in some monomial, so two
//! polynomials are equal as functions iff they are equal as values.

mod predicate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bits::Bits;
use crate::error::{Error, Result};

pub use predicate::{
    deserialize_predicate, read_adjective, read_verb, serialize_adjective, serialize_verb, write_adjective,
    write_verb, ActionOp, AdjectivePredicate, Predicate, PredicateKind, VerbPredicate, ARG_COUNT_WIDTH,
    MAX_PREDICATE_VARS, OFFSET_WIDTH, QUALITY_WIDTH,
};

/// Global identifier of a quality. Identifiers with the top bit set are
/// minted by class operations; lower ones come from the basis file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct QualityId(pub u32);

impl QualityId {
    pub const DERIVED_BIT: u32 = 1 << 31;

    pub fn is_derived(self) -> bool {
        self.0 & Self::DERIVED_BIT != 0
    }
}

impl fmt::Display for QualityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q{}", self.0)
    }
}

/// Predicate variable: a bit offset inside a block, or a quality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Var {
    Bit(usize),
    Quality(QualityId),
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Bit(i) => write!(f, "x{i}"),
            Var::Quality(q) => write!(f, "{q}"),
        }
    }
}

impl FromStr for Var {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::arg(format!("bad variable {s:?}"));
        if let Some(rest) = s.strip_prefix('x') {
            rest.parse().map(Var::Bit).map_err(|_| bad())
        } else if let Some(rest) = s.strip_prefix('q') {
            rest.parse().map(|n| Var::Quality(QualityId(n))).map_err(|_| bad())
        } else {
            Err(bad())
        }
    }
}

/// Sorted, duplicate-free conjunction of variables.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Monomial(Vec<Var>);

impl Monomial {
    pub fn new(vars: impl IntoIterator<Item = Var>) -> Self {
        let set: BTreeSet<Var> = vars.into_iter().collect();
        Monomial(set.into_iter().collect())
    }

    pub fn unit() -> Self {
        Monomial(Vec::new())
    }

    pub fn vars(&self) -> &[Var] {
        &self.0
    }

    fn union(&self, other: &Monomial) -> Monomial {
        Monomial::new(self.0.iter().chain(other.0.iter()).copied())
    }
}

#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ZhegalkinPoly {
    monomials: BTreeSet<Monomial>,
}

/// Boolean operation available to class predicates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BoolOp {
    Xor,
    And,
}

impl BoolOp {
    pub fn apply(self, p: &ZhegalkinPoly, q: &ZhegalkinPoly) -> ZhegalkinPoly {
        match self {
            BoolOp::Xor => p.xor(q),
            BoolOp::And => p.and(q),
        }
    }
}

impl fmt::Display for BoolOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoolOp::Xor => "xor",
            BoolOp::And => "and",
        })
    }
}

impl ZhegalkinPoly {
    pub fn zero() -> Self {
        ZhegalkinPoly::default()
    }

    pub fn one() -> Self {
        Self::from_monomials([Monomial::unit()])
    }

    pub fn var(v: Var) -> Self {
        Self::from_monomials([Monomial::new([v])])
    }

    pub fn bit(i: usize) -> Self {
        Self::var(Var::Bit(i))
    }

    pub fn quality(q: QualityId) -> Self {
        Self::var(Var::Quality(q))
    }

    /// XOR-reduces repeated monomials.
    pub fn from_monomials(ms: impl IntoIterator<Item = Monomial>) -> Self {
        let mut set = BTreeSet::new();
        for m in ms {
            if !set.remove(&m) {
                set.insert(m);
            }
        }
        ZhegalkinPoly { monomials: set }
    }

    pub fn monomials(&self) -> impl Iterator<Item = &Monomial> {
        self.monomials.iter()
    }

    pub fn monomial_count(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_zero(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.monomials.iter().all(|m| m.0.is_empty())
    }

    /// Variables the polynomial depends on, ascending.
    pub fn variables(&self) -> BTreeSet<Var> {
        self.monomials.iter().flat_map(|m| m.0.iter().copied()).collect()
    }

    pub fn bit_args(&self) -> BTreeSet<usize> {
        self.variables()
            .into_iter()
            .filter_map(|v| match v {
                Var::Bit(i) => Some(i),
                Var::Quality(_) => None,
            })
            .collect()
    }

    pub fn quality_args(&self) -> BTreeSet<QualityId> {
        self.variables()
            .into_iter()
            .filter_map(|v| match v {
                Var::Quality(q) => Some(q),
                Var::Bit(_) => None,
            })
            .collect()
    }

    pub fn xor(&self, other: &ZhegalkinPoly) -> ZhegalkinPoly {
        ZhegalkinPoly { monomials: self.monomials.symmetric_difference(&other.monomials).cloned().collect() }
    }

    pub fn and(&self, other: &ZhegalkinPoly) -> ZhegalkinPoly {
        Self::from_monomials(self.monomials.iter().flat_map(|a| other.monomials.iter().map(move |b| a.union(b))))
    }

    /// Evaluate with a lookup that may fail to know a variable.
    pub fn eval_with(&self, lookup: impl Fn(Var) -> Option<bool>) -> Result<bool> {
        let mut acc = false;
        for m in &self.monomials {
            let mut term = true;
            for v in &m.0 {
                let val = lookup(*v).ok_or_else(|| Error::arg(format!("no value for variable {v}")))?;
                term &= val;
            }
            acc ^= term;
        }
        Ok(acc)
    }

    pub fn eval(&self, assignment: &BTreeMap<Var, bool>) -> Result<bool> {
        self.eval_with(|v| assignment.get(&v).copied())
    }

    /// Evaluate with `Var::Bit(i)` bound to `bits[i]`; quality variables are an error.
    pub fn eval_bits(&self, bits: &[bool]) -> Result<bool> {
        self.eval_with(|v| match v {
            Var::Bit(i) => bits.get(i).copied(),
            Var::Quality(_) => None,
        })
    }

    /// Unique polynomial over `x0..x{n-1}` matching a truth table of length
    /// `2^n`. Entry `k` is the value where variable `j` is bit `j` of `k`.
    pub fn from_truth_table(table: &Bits) -> Result<ZhegalkinPoly> {
        let len = table.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::arg(format!("truth table length {len} is not a power of two")));
        }
        let n = len.trailing_zeros() as usize;
        // Binary Möbius transform, in place.
        let mut coef: Vec<bool> = table.iter().collect();
        for j in 0..n {
            let step = 1 << j;
            for k in 0..len {
                if k & step != 0 {
                    coef[k] ^= coef[k ^ step];
                }
            }
        }
        let ms = coef.iter().enumerate().filter(|(_, c)| **c).map(|(k, _)| {
            Monomial::new((0..n).filter(|j| k >> j & 1 == 1).map(Var::Bit))
        });
        Ok(Self::from_monomials(ms))
    }

    /// Replace each variable through `f`. Monomials that collapse are XOR-reduced.
    pub fn rename(&self, f: impl Fn(Var) -> Var) -> ZhegalkinPoly {
        Self::from_monomials(self.monomials.iter().map(|m| Monomial::new(m.0.iter().map(|v| f(*v)))))
    }
}

/// Renders as `x0*x1 + q3 + 1`; the zero polynomial renders as `0`.
impl fmt::Display for ZhegalkinPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.monomials.is_empty() {
            return f.write_str("0");
        }
        for (i, m) in self.monomials.iter().enumerate() {
            if i > 0 {
                f.write_str(" + ")?;
            }
            if m.0.is_empty() {
                f.write_str("1")?;
            } else {
                let names: Vec<String> = m.0.iter().map(Var::to_string).collect();
                f.write_str(&names.join("*"))?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for ZhegalkinPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Poly({self})")
    }
}

impl FromStr for ZhegalkinPoly {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "0" {
            return Ok(ZhegalkinPoly::zero());
        }
        let mut ms = Vec::new();
        for term in s.split('+') {
            let term = term.trim();
            if term.is_empty() {
                return Err(Error::arg(format!("empty term in {s:?}")));
            }
            if term == "1" {
                ms.push(Monomial::unit());
                continue;
            }
            let vars = term.split('*').map(|v| v.trim().parse::<Var>()).collect::<Result<Vec<_>>>()?;
            ms.push(Monomial::new(vars));
        }
        Ok(Self::from_monomials(ms))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> ZhegalkinPoly {
        s.parse().unwrap()
    }

    #[test]
    fn eval_or_polynomial() {
        let or = p("x0 + x1 + x0*x1");
        assert!(or.eval_bits(&[true, false]).unwrap());
        assert!(!ZhegalkinPoly::zero().eval_bits(&[true]).unwrap());
        assert!(ZhegalkinPoly::one().eval_bits(&[]).unwrap());
    }

    #[test]
    fn eval_missing_variable() {
        assert!(matches!(p("x3").eval_bits(&[true]), Err(Error::InvalidArgument(_))));
        assert!(p("q1").eval_bits(&[true]).is_err());
    }

    #[test]
    fn xor_and_identities() {
        let x = p("x0 + x1*x2");
        assert!(x.xor(&x).is_zero());
        assert_eq!(x.and(&ZhegalkinPoly::one()), x);
        let xy = p("x0").and(&p("x1"));
        assert_eq!(xy.to_string(), "x0*x1");
        let table: Vec<bool> = (0..4).map(|k| xy.eval_bits(&[k & 1 == 1, k & 2 == 2]).unwrap()).collect();
        assert_eq!(table, vec![false, false, false, true]);
    }

    #[test]
    fn and_is_idempotent_on_variables() {
        assert_eq!(p("x0").and(&p("x0")), p("x0"));
        assert_eq!(p("x0 + 1").and(&p("x0 + 1")), p("x0 + 1"));
    }

    #[test]
    fn truth_table_transform() {
        assert_eq!(ZhegalkinPoly::from_truth_table(&"0111".parse().unwrap()).unwrap(), p("x0 + x1 + x0*x1"));
        assert!(ZhegalkinPoly::from_truth_table(&"0000".parse().unwrap()).unwrap().is_zero());
        assert_eq!(ZhegalkinPoly::from_truth_table(&"01".parse().unwrap()).unwrap(), p("x0"));
        assert!(ZhegalkinPoly::from_truth_table(&"011".parse().unwrap()).is_err());
        assert!(ZhegalkinPoly::from_truth_table(&Bits::new()).is_err());
    }

    #[test]
    fn variables_are_pruned() {
        let q = p("x0*x1 + x2").xor(&p("x2"));
        assert_eq!(q.variables().len(), 2);
        assert!(p("x1 + x1").variables().is_empty());
    }

    #[test]
    fn text_round_trip() {
        for s in ["0", "1", "x0", "x0*x3 + q7 + 1", "x1*q2"] {
            let poly = p(s);
            assert_eq!(p(&poly.to_string()), poly);
        }
        assert!("x0 + ".parse::<ZhegalkinPoly>().is_err());
        assert!("y1".parse::<ZhegalkinPoly>().is_err());
    }
}
