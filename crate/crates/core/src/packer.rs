//! Packing a context into a generator attached to its parent class.
//!
//! Every lower class of the context is turned into its binary form (the
//! overclass encoding, zero-padded to a common width). A candidate consists of
//! readers, adjectives over positions of that form that tell the lower classes
//! apart, and writers, verbs over the readers' qualities that rebuild every
//! differing position. Positions on which all lower classes agree come from a
//! template. Each lower class is then kept only as its key: the reader
//! qualities for the static option, the written actions for the dynamic one.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::bits::Bits;
use crate::boolalg::{
    write_adjective, write_verb, ActionOp, AdjectivePredicate, BoolOp, QualityId, Var, VerbPredicate, ZhegalkinPoly,
};
use crate::classes::{phi_encode, ClassId, SimpleClass};
use crate::error::{Error, Result};
use crate::profile::{ContextOption, NounOp, OpKind, SpontaneousOps};
use crate::store::ClassStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackBudget {
    /// Most seeds combined into one reader or writer.
    pub max_depth: usize,
    pub max_candidates: usize,
    /// Most new adjectives per candidate.
    pub max_readers: usize,
    /// Reader sets examined before giving up.
    pub max_evals: usize,
    /// Observations used by the correlation fallback.
    pub window: usize,
}

impl Default for PackBudget {
    fn default() -> Self {
        PackBudget { max_depth: 3, max_candidates: 64, max_readers: 3, max_evals: 200_000, window: 16 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PackKind {
    Abstraction,
    Detalisation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum KeyKind {
    Qualities,
    Actions,
}

impl From<ContextOption> for KeyKind {
    fn from(c: ContextOption) -> Self {
        match c {
            ContextOption::Static => KeyKind::Qualities,
            ContextOption::Dynamic => KeyKind::Actions,
        }
    }
}

/// One entry of a candidate's derivation. `op: None` marks a direct
/// representation taken by a fallback step rather than a class operation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PackStep {
    Noun { op: NounOp, position: usize },
    Reader { op: Option<BoolOp>, positions: Vec<usize> },
    Writer { position: usize, op: Option<BoolOp>, qualities: Vec<usize>, constant: bool },
}

impl PackStep {
    pub fn op_kind(&self) -> Option<OpKind> {
        match self {
            PackStep::Noun { op, .. } => Some(OpKind::Noun(*op)),
            PackStep::Reader { op, .. } => op.map(OpKind::Adjective),
            PackStep::Writer { op, .. } => op.map(OpKind::Verb),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PackFlags {
    pub step2_1: bool,
    pub step3_1: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PackCandidate {
    pub parent: ClassId,
    pub kind: PackKind,
    pub key_kind: KeyKind,
    pub template: Bits,
    pub differing: Vec<usize>,
    /// Reader `j` produces quality `j`.
    pub readers: Vec<ZhegalkinPoly>,
    /// Writer polynomials over `Var::Quality(QualityId(j))`, one per differing position.
    pub writers: Vec<(usize, ZhegalkinPoly)>,
    pub steps: Vec<PackStep>,
    pub flags: PackFlags,
    pub shared_prefix: usize,
    pub shared_suffix: usize,
    /// The reduced context: one key per lower class.
    pub keys: Vec<Bits>,
}

impl PackCandidate {
    pub fn width(&self) -> usize {
        self.template.len()
    }

    /// Reader qualities of a binary form, or `None` when the width differs.
    pub fn qualities_of(&self, repr: &Bits) -> Option<Bits> {
        if repr.len() != self.width() {
            return None;
        }
        self.readers.iter().map(|r| r.eval_bits(repr.as_slice()).ok()).collect()
    }

    /// Rebuild a binary form from reader qualities.
    pub fn regenerate(&self, qualities: &Bits) -> Result<Bits> {
        let mut out = self.template.clone();
        for (p, w) in &self.writers {
            let v = w.eval_with(|v| match v {
                Var::Quality(QualityId(j)) => qualities.get(j as usize),
                Var::Bit(_) => None,
            })?;
            out.set(*p, v);
        }
        Ok(out)
    }

    pub fn key_of(&self, repr: &Bits) -> Option<Bits> {
        let q = self.qualities_of(repr)?;
        match self.key_kind {
            KeyKind::Qualities => Some(q),
            KeyKind::Actions => Some(self.writers.iter().map(|(p, _)| repr.get(*p).unwrap()).collect()),
        }
    }

    pub fn generates(&self, repr: &Bits) -> bool {
        self.qualities_of(repr)
            .and_then(|q| self.regenerate(&q).ok())
            .is_some_and(|r| &r == repr)
    }

    pub fn operations(&self) -> Vec<OpKind> {
        self.steps.iter().filter_map(PackStep::op_kind).collect()
    }

    /// Readers as adjectives and writers as verbs in the predicate format.
    pub fn encode(&self) -> Result<Bits> {
        let mut out = Bits::new();
        for (j, r) in self.readers.iter().enumerate() {
            write_adjective(&mut out, &AdjectivePredicate::new(r.clone(), QualityId(j as u32))?)?;
        }
        let op = self
            .steps
            .iter()
            .find_map(|s| match s {
                PackStep::Writer { op: Some(op), .. } => Some(ActionOp::from(*op)),
                _ => None,
            })
            .unwrap_or(ActionOp::Xor);
        for (p, w) in &self.writers {
            write_verb(&mut out, &VerbPredicate::new(w.clone(), *p, op))?;
        }
        out.extend_from(&self.template);
        Ok(out)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackReport {
    pub candidates: Vec<PackCandidate>,
    pub step2_1: bool,
    pub step3_1: bool,
    pub exhausted: bool,
    pub delegated: bool,
    pub evaluated: usize,
}

/// Binary form of a class: its overclass encoding.
pub fn binary_repr(class: &SimpleClass, store: &ClassStore) -> Result<Bits> {
    phi_encode(class, store.basis())
}

/// Zero-pad to a common width.
pub fn pad_all(reprs: &[Bits]) -> Vec<Bits> {
    let w = reprs.iter().map(Bits::len).max().unwrap_or(0);
    reprs.iter().map(|r| r.resized(w)).collect()
}

pub fn differing_positions(reprs: &[Bits]) -> Vec<usize> {
    let w = reprs.first().map(Bits::len).unwrap_or(0);
    (0..w).filter(|&p| reprs.iter().any(|r| r.get(p) != reprs[0].get(p))).collect()
}

/// Combinations of `k` indices out of `n`, lexicographic.
fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= n {
        go(0, n, k, &mut Vec::new(), &mut out);
    }
    out
}

fn fold(op: BoolOp, polys: impl IntoIterator<Item = ZhegalkinPoly>) -> ZhegalkinPoly {
    let mut it = polys.into_iter();
    let first = it.next().unwrap_or_else(ZhegalkinPoly::zero);
    it.fold(first, |acc, p| op.apply(&acc, &p))
}

/// Readers combined by the adjective operation from two or more seed
/// positions, plus a seed combined with itself. Constants are useless as
/// readers and skipped; equal polynomials keep their first derivation.
pub fn combined_readers(positions: &[usize], op: BoolOp, max_depth: usize) -> Vec<(ZhegalkinPoly, PackStep)> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let mut push = |poly: ZhegalkinPoly, ps: Vec<usize>| {
        if !poly.is_constant() && seen.insert(poly.clone()) {
            out.push((poly, PackStep::Reader { op: Some(op), positions: ps }));
        }
    };
    for &p in positions {
        push(op.apply(&ZhegalkinPoly::bit(p), &ZhegalkinPoly::bit(p)), vec![p, p]);
    }
    for k in 2..=max_depth.max(2) {
        for c in combinations(positions.len(), k) {
            let ps: Vec<usize> = c.iter().map(|&i| positions[i]).collect();
            push(fold(op, ps.iter().map(|&p| ZhegalkinPoly::bit(p))), ps);
        }
    }
    out
}

fn seed_readers(positions: &[usize]) -> Vec<(ZhegalkinPoly, PackStep)> {
    positions
        .iter()
        .map(|&p| (ZhegalkinPoly::bit(p), PackStep::Reader { op: None, positions: vec![p] }))
        .collect()
}

fn quality(j: usize) -> ZhegalkinPoly {
    ZhegalkinPoly::quality(QualityId(j as u32))
}

/// Writers built by the verb operation from distinct seeds among the constant
/// 1 and the reader qualities. Distinct seeds have disjoint arguments.
pub fn composed_writers(readers: usize, op: BoolOp, max_depth: usize) -> Vec<(ZhegalkinPoly, PackStep)> {
    // Seed 0 is the constant, seed j + 1 is quality j.
    let seed = |i: usize| if i == 0 { ZhegalkinPoly::one() } else { quality(i - 1) };
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for k in 2..=max_depth.max(2) {
        for c in combinations(readers + 1, k) {
            let poly = fold(op, c.iter().map(|&i| seed(i)));
            if poly.is_constant() || !seen.insert(poly.clone()) {
                continue;
            }
            let step = PackStep::Writer {
                position: 0,
                op: Some(op),
                qualities: c.iter().filter(|&&i| i > 0).map(|&i| i - 1).collect(),
                constant: c[0] == 0,
            };
            out.push((poly, step));
        }
    }
    out
}

/// Inputs shared by both packing algorithms.
#[derive(Debug, Clone)]
pub struct PackProblem {
    pub parent: ClassId,
    /// Distinct lower-class forms, padded to one width.
    pub reprs: Vec<Bits>,
    /// Lower-class forms as observed over the recent window, same width.
    pub observations: Vec<Bits>,
}

impl PackProblem {
    pub fn new(parent: ClassId, reprs: Vec<Bits>, observations: Vec<Bits>) -> Result<Self> {
        if reprs.is_empty() {
            return Err(Error::arg("cannot pack an empty context"));
        }
        let all = pad_all(&reprs.iter().chain(observations.iter()).cloned().collect::<Vec<_>>());
        let (r, o) = all.split_at(reprs.len());
        let mut distinct: Vec<Bits> = Vec::new();
        for x in r {
            if !distinct.contains(x) {
                distinct.push(x.clone());
            }
        }
        Ok(PackProblem { parent, reprs: distinct, observations: o.to_vec() })
    }

    pub fn width(&self) -> usize {
        self.reprs[0].len()
    }

    /// Build from context classes known to the store.
    pub fn from_classes(parent: ClassId, classes: &[ClassId], observed: &[ClassId], store: &ClassStore) -> Result<Self> {
        let enc = |ids: &[ClassId]| -> Result<Vec<Bits>> {
            ids.iter().map(|id| binary_repr(store.class(*id)?, store)).collect()
        };
        Self::new(parent, enc(classes)?, enc(observed)?)
    }
}

struct Search<'a> {
    problem: &'a PackProblem,
    ops: SpontaneousOps,
    key_kind: KeyKind,
    budget: PackBudget,
    evaluated: usize,
    exhausted: bool,
    step3_1: bool,
}

impl Search<'_> {
    fn writer_for(
        &self,
        position: usize,
        keys: &[Bits],
        writers: &[(ZhegalkinPoly, PackStep)],
        readers: &[ZhegalkinPoly],
    ) -> Option<(ZhegalkinPoly, PackStep, bool)> {
        let target: Vec<bool> = self.problem.reprs.iter().map(|r| r.get(position).unwrap()).collect();
        let eval = |w: &ZhegalkinPoly, q: &Bits| {
            w.eval_with(|v| match v {
                Var::Quality(QualityId(j)) => q.get(j as usize),
                Var::Bit(_) => None,
            })
        };
        for (w, step) in writers {
            if keys.iter().zip(&target).all(|(k, t)| eval(w, k).ok() == Some(*t)) {
                let mut step = step.clone();
                if let PackStep::Writer { position: p, .. } = &mut step {
                    *p = position;
                }
                return Some((w.clone(), step, false));
            }
        }
        // Correlation fallback: a quality that always equals the bit.
        let obs: Vec<&Bits> = self.problem.observations.iter().rev().take(self.budget.window).collect();
        if obs.len() < 2 {
            return None;
        }
        (0..readers.len()).find_map(|j| {
            let agrees = obs.iter().all(|o| readers[j].eval_bits(o.as_slice()).ok() == o.get(position))
                && keys.iter().zip(&target).all(|(k, t)| k.get(j) == Some(*t));
            agrees.then(|| {
                (quality(j), PackStep::Writer { position, op: None, qualities: vec![j], constant: false }, true)
            })
        })
    }

    fn try_set(
        &mut self,
        set: &[(ZhegalkinPoly, PackStep)],
        differing: &[usize],
        kind: PackKind,
        prefix_steps: &[PackStep],
        fallback_readers: bool,
    ) -> Option<PackCandidate> {
        self.evaluated += 1;
        let covered: BTreeSet<usize> = set.iter().flat_map(|(p, _)| p.bit_args()).collect();
        if !differing.iter().all(|p| covered.contains(p)) {
            return None;
        }
        let readers: Vec<ZhegalkinPoly> = set.iter().map(|(p, _)| p.clone()).collect();
        let keys: Vec<Bits> = self
            .problem
            .reprs
            .iter()
            .map(|r| readers.iter().map(|p| p.eval_bits(r.as_slice()).unwrap()).collect())
            .collect();
        let distinct: BTreeSet<&Bits> = keys.iter().collect();
        if distinct.len() != keys.len() {
            return None;
        }
        let pool = composed_writers(readers.len(), self.ops.verb, self.budget.max_depth);
        let mut writers = Vec::new();
        let mut steps: Vec<PackStep> = prefix_steps.to_vec();
        steps.extend(set.iter().map(|(_, s)| s.clone()));
        let mut used_fallback = false;
        for &p in differing {
            let (w, step, fb) = self.writer_for(p, &keys, &pool, &readers)?;
            used_fallback |= fb;
            writers.push((p, w));
            steps.push(step);
        }
        let mut c = PackCandidate {
            parent: self.problem.parent,
            kind,
            key_kind: self.key_kind,
            template: self.problem.reprs[0].clone(),
            differing: differing.to_vec(),
            readers,
            writers,
            steps,
            flags: PackFlags { step2_1: fallback_readers, step3_1: used_fallback },
            shared_prefix: 0,
            shared_suffix: 0,
            keys: Vec::new(),
        };
        for p in differing {
            c.template.set(*p, false);
        }
        c.keys = self.problem.reprs.iter().map(|r| c.key_of(r).unwrap()).collect();
        if !self.problem.reprs.iter().all(|r| c.generates(r)) {
            return None;
        }
        self.step3_1 |= used_fallback;
        Some(c)
    }

    fn run_pool(
        &mut self,
        pool: &[(ZhegalkinPoly, PackStep)],
        differing: &[usize],
        kind: PackKind,
        prefix_steps: &[PackStep],
        fallback: bool,
    ) -> Vec<PackCandidate> {
        let mut out = Vec::new();
        for size in 1..=self.budget.max_readers {
            if (1usize << size.min(63)) < self.problem.reprs.len() {
                continue;
            }
            for combo in combinations(pool.len(), size) {
                if out.len() >= self.budget.max_candidates {
                    return out;
                }
                if self.evaluated >= self.budget.max_evals {
                    self.exhausted = true;
                    return out;
                }
                let set: Vec<_> = combo.iter().map(|&i| pool[i].clone()).collect();
                if let Some(c) = self.try_set(&set, differing, kind, prefix_steps, fallback) {
                    out.push(c);
                }
            }
        }
        out
    }
}

fn search(
    problem: &PackProblem,
    ops: SpontaneousOps,
    key_kind: KeyKind,
    budget: PackBudget,
    differing: &[usize],
    kind: PackKind,
    prefix_steps: &[PackStep],
) -> PackReport {
    let mut s = Search { problem, ops, key_kind, budget, evaluated: 0, exhausted: false, step3_1: false };
    let mut report = PackReport::default();
    if differing.is_empty() {
        let mut c = PackCandidate {
            parent: problem.parent,
            kind,
            key_kind,
            template: problem.reprs[0].clone(),
            differing: Vec::new(),
            readers: Vec::new(),
            writers: Vec::new(),
            steps: prefix_steps.to_vec(),
            flags: PackFlags::default(),
            shared_prefix: 0,
            shared_suffix: 0,
            keys: Vec::new(),
        };
        c.keys = problem.reprs.iter().map(|r| c.key_of(r).unwrap()).collect();
        report.candidates.push(c);
        return report;
    }
    let pool = combined_readers(differing, ops.adjective, budget.max_depth);
    let mut found = s.run_pool(&pool, differing, kind, prefix_steps, false);
    if found.is_empty() && !s.exhausted {
        report.step2_1 = true;
        found = s.run_pool(&seed_readers(differing), differing, kind, prefix_steps, true);
    }
    report.candidates = found;
    report.step3_1 = s.step3_1;
    report.exhausted = s.exhausted;
    report.evaluated = s.evaluated;
    report
}

/// Abstraction on binary forms.
pub fn abstraction(problem: &PackProblem, ops: SpontaneousOps, key_kind: KeyKind, budget: PackBudget) -> PackReport {
    let d = differing_positions(&problem.reprs);
    search(problem, ops, key_kind, budget, &d, PackKind::Abstraction, &[])
}

/// Detalisation: factor the shared prefix and suffix, then pack the
/// remaining middle segment. With nothing shared this is abstraction.
pub fn detalisation(problem: &PackProblem, ops: SpontaneousOps, key_kind: KeyKind, budget: PackBudget) -> PackReport {
    let w = problem.width();
    let d = differing_positions(&problem.reprs);
    let prefix = d.first().copied().unwrap_or(w);
    let suffix = d.last().map(|l| w - 1 - l).unwrap_or(0);
    if prefix == 0 && suffix == 0 {
        let mut r = abstraction(problem, ops, key_kind, budget);
        r.delegated = true;
        return r;
    }
    let residue: Vec<usize> = (prefix..w - suffix).collect();
    let nouns: Vec<PackStep> = residue.iter().map(|&p| PackStep::Noun { op: ops.noun, position: p }).collect();
    let mut report = search(problem, ops, key_kind, budget, &d, PackKind::Detalisation, &nouns);
    for c in &mut report.candidates {
        c.shared_prefix = prefix;
        c.shared_suffix = suffix;
    }
    report
}

/// Readers the adjective operation can derive over the differing positions,
/// followed by the plain seeds the search falls back to.
pub fn reader_pool(problem: &PackProblem, ops: SpontaneousOps, budget: PackBudget) -> Vec<(ZhegalkinPoly, PackStep)> {
    let d = differing_positions(&problem.reprs);
    let mut pool = combined_readers(&d, ops.adjective, budget.max_depth);
    for s in seed_readers(&d) {
        if !pool.iter().any(|(p, _)| *p == s.0) {
            pool.push(s);
        }
    }
    pool
}

/// Complete a candidate around a fixed reader set, if one exists.
pub fn candidate_from_readers(
    problem: &PackProblem,
    ops: SpontaneousOps,
    key_kind: KeyKind,
    budget: PackBudget,
    readers: &[(ZhegalkinPoly, PackStep)],
) -> Option<PackCandidate> {
    let d = differing_positions(&problem.reprs);
    let mut s = Search { problem, ops, key_kind, budget, evaluated: 0, exhausted: false, step3_1: false };
    s.try_set(readers, &d, PackKind::Abstraction, &[], false)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Accepted,
    Rejected,
}

/// Accept a candidate when it regenerates every observed lower class.
pub fn validate_candidate(candidate: &PackCandidate, observed: &[Bits]) -> Verdict {
    if !observed.is_empty() && observed.iter().all(|r| candidate.generates(&r.resized(candidate.width().max(r.len())))) {
        Verdict::Accepted
    } else {
        Verdict::Rejected
    }
}

/// All accepted candidates in order; the first is the one to install.
pub fn accepted<'a>(candidates: &'a [PackCandidate], observed: &[Bits]) -> Vec<&'a PackCandidate> {
    candidates.iter().filter(|c| validate_candidate(c, observed) == Verdict::Accepted).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ops(adj: BoolOp, verb: BoolOp) -> SpontaneousOps {
        SpontaneousOps { noun: NounOp::Specialize, verb, adjective: adj }
    }

    fn problem(rs: &[&str]) -> PackProblem {
        let reprs: Vec<Bits> = rs.iter().map(|s| s.parse().unwrap()).collect();
        PackProblem::new(ClassId(0), reprs.clone(), reprs).unwrap()
    }

    #[test]
    fn one_bit_difference() {
        let p = problem(&["0010", "0110"]);
        for adj in [BoolOp::Xor, BoolOp::And] {
            for verb in [BoolOp::Xor, BoolOp::And] {
                let r = abstraction(&p, ops(adj, verb), KeyKind::Qualities, PackBudget::default());
                assert!(!r.candidates.is_empty(), "{adj} {verb}");
                assert!(r.candidates.iter().any(|c| c.readers.len() == 1 && c.readers[0].bit_args() == [1].into()));
                for c in &r.candidates {
                    assert!(p.reprs.iter().all(|x| c.generates(x)));
                }
            }
        }
    }

    #[test]
    fn single_class_needs_nothing() {
        let p = problem(&["0110"]);
        let r = abstraction(&p, ops(BoolOp::Xor, BoolOp::Xor), KeyKind::Qualities, PackBudget::default());
        assert_eq!(r.candidates.len(), 1);
        assert!(r.candidates[0].readers.is_empty());
    }

    #[test]
    fn over_budget_is_empty_and_flagged() {
        let p = problem(&["100", "010", "001"]);
        let budget = PackBudget { max_readers: 1, ..PackBudget::default() };
        let r = abstraction(&p, ops(BoolOp::Xor, BoolOp::Xor), KeyKind::Qualities, budget);
        assert!(r.candidates.is_empty());
        assert!(r.step2_1);
    }

    #[test]
    fn detalisation_factors_shared_parts() {
        let p = problem(&["0101" /**/, "0101"]);
        let r = detalisation(&p, ops(BoolOp::Xor, BoolOp::Xor), KeyKind::Qualities, PackBudget::default());
        assert_eq!(r.candidates.len(), 1);
        assert_eq!(r.candidates[0].shared_prefix, 4);

        let p = problem(&["01010011010", "01011011110", "01010100010"]);
        let r = detalisation(&p, ops(BoolOp::Xor, BoolOp::Xor), KeyKind::Qualities, PackBudget::default());
        let c = &r.candidates[0];
        assert_eq!((c.shared_prefix, c.shared_suffix), (4, 2));
        assert!(!r.delegated);
    }

    #[test]
    fn validation() {
        let p = problem(&["0010", "0110"]);
        let r = abstraction(&p, ops(BoolOp::Xor, BoolOp::Xor), KeyKind::Qualities, PackBudget::default());
        let c = &r.candidates[0];
        assert_eq!(validate_candidate(c, &p.reprs), Verdict::Accepted);
        let missing: Vec<Bits> = vec!["1111".parse().unwrap(), p.reprs[0].clone()];
        assert_eq!(validate_candidate(c, &missing), Verdict::Rejected);
        assert!(c.encode().unwrap().len() > c.width());
    }
}
