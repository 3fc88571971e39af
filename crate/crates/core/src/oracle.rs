//! Brute-force reference computations for differential testing. Each one
//! refuses instances above a small cap.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::bits::Bits;
use crate::bitspace::Mask;
use crate::boolalg::{BoolOp, ZhegalkinPoly};
use crate::classes::{Basis, ClassOp, PredicateTarget, Provenance, SimpleClass};
use crate::error::{Error, Result};
use crate::io::ConditioningClass;
use crate::packer::{candidate_from_readers, reader_pool, KeyKind, PackBudget, PackCandidate, PackProblem};
use crate::profile::SpontaneousOps;

pub const MAX_SCAN_BITS: usize = 4096;
pub const MAX_TABLE_VARS: usize = 12;
pub const MAX_SUBSETS: usize = 1_000_000;
pub const MAX_FRAMES: usize = 4096;
pub const MAX_EVENTS: usize = 100_000;
pub const MAX_DERIVED: usize = 200_000;

fn cap(what: &str, n: usize, max: usize) -> Result<()> {
    if n > max {
        return Err(Error::Capacity { needed: n, available: max }).map_err(|e| Error::arg(format!("{what}: {e}")));
    }
    Ok(())
}

/// Greedy leftmost non-overlapping placements of one mask, by checking every
/// offset in turn.
pub fn mask_scan(layer: &Bits, mask: &Mask) -> Result<Vec<usize>> {
    cap("mask scan", layer.len(), MAX_SCAN_BITS)?;
    let bits = layer.as_slice();
    let mut out = Vec::new();
    let mut at = 0;
    while at + mask.span() <= bits.len() {
        let hit = mask.entries().all(|(o, v)| bits[at + o] == v);
        if hit && mask.span() > 0 {
            out.push(at);
            at += mask.span();
        } else {
            at += 1;
        }
    }
    Ok(out)
}

/// Truth table over `vars` bit variables, assignment 0 first, variable 0 as
/// the least significant bit of the assignment index.
pub fn truth_table(poly: &ZhegalkinPoly, vars: usize) -> Result<Bits> {
    cap("truth table", vars, MAX_TABLE_VARS)?;
    (0..1usize << vars)
        .map(|a| {
            let bits: Vec<bool> = (0..vars).map(|i| a >> i & 1 == 1).collect();
            poly.eval_bits(&bits)
        })
        .collect()
}

/// Every reader subset of the spontaneous pool up to the reader limit, in
/// size then lexicographic order; the candidates that pack the problem.
pub fn exhaustive_packing(problem: &PackProblem, ops: SpontaneousOps, key: KeyKind, budget: PackBudget) -> Result<Vec<PackCandidate>> {
    let pool = reader_pool(problem, ops, budget);
    let subsets: usize = (1..=budget.max_readers.min(pool.len())).map(|k| choose(pool.len(), k)).sum();
    cap("packing subsets", subsets, MAX_SUBSETS)?;
    let mut out = Vec::new();
    for k in 1..=budget.max_readers.min(pool.len()) {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            let set: Vec<_> = idx.iter().map(|&i| pool[i].clone()).collect();
            if let Some(c) = candidate_from_readers(problem, ops, key, budget, &set) {
                out.push(c);
            }
            // Next combination in lexicographic order.
            let Some(i) = (0..k).rev().find(|&i| idx[i] < pool.len() - k + i) else { break };
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }
    Ok(out)
}

fn choose(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Every operation applicable to `class`, in a fixed order.
pub fn applicable_ops(class: &SimpleClass) -> Vec<ClassOp> {
    let mut ops = Vec::new();
    for (target, n) in [(PredicateTarget::Adjective, class.adjectives.len()), (PredicateTarget::Verb, class.verbs.len())] {
        for op in [BoolOp::Xor, BoolOp::And] {
            for l in 0..n {
                for m in 0..n {
                    ops.push(ClassOp::Predicate { target, op, l, m });
                }
            }
        }
    }
    for (offset, _) in class.noun.mask.entries() {
        ops.push(ClassOp::Specialize { offset });
        ops.push(ClassOp::Argument { offset });
    }
    ops
}

/// All classes reachable from the basis by at most `max_ops` operations.
/// Operations that fail (ambiguous action points, say) are skipped.
pub fn derived_classes(basis: &Basis, max_ops: usize) -> Result<Vec<SimpleClass>> {
    let mut out: Vec<SimpleClass> = basis.classes().to_vec();
    let mut frontier = out.clone();
    for _ in 0..max_ops {
        let mut next = Vec::new();
        for c in &frontier {
            for op in applicable_ops(c) {
                if let Ok(d) = c.apply(op, Provenance::Engine) {
                    next.push(d);
                }
            }
        }
        cap("derivations", out.len() + next.len(), MAX_DERIVED)?;
        out.extend(next.iter().cloned());
        frontier = next;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum DfaOutcome {
    Detected { states: Vec<Bits> },
    Failed { frame: usize, states: Vec<Bits> },
}

/// Tabulate the class as an automaton over (input, state) pairs, then run
/// the table.
pub fn dfa_simulate(class: &ConditioningClass, frames: &[Bits], horizon: usize) -> Result<DfaOutcome> {
    let iw = class.input_width;
    let sw = class.state_width();
    cap("automaton", iw + sw, MAX_TABLE_VARS)?;
    cap("frames", frames.len(), MAX_FRAMES)?;
    let index = |b: &Bits| b.iter().enumerate().fold(0usize, |acc, (i, v)| acc | (usize::from(v) << i));
    let unindex = |n: usize, w: usize| -> Bits { (0..w).map(|i| n >> i & 1 == 1).collect() };
    let mut table: Vec<Option<usize>> = Vec::with_capacity(1 << (iw + sw));
    for i in 0..1usize << iw {
        for s in 0..1usize << sw {
            table.push(class.step(&unindex(i, iw), &unindex(s, sw))?.map(|n| index(&n)));
        }
    }
    let mut state = 0usize;
    let mut states = Vec::new();
    for (f, frame) in frames.iter().enumerate() {
        match table[(index(frame) << sw) | state] {
            None => return Ok(DfaOutcome::Failed { frame: f, states }),
            Some(n) => {
                state = n;
                states.push(unindex(n, sw));
                if horizon > 0 && states.len() >= horizon {
                    break;
                }
            }
        }
    }
    Ok(DfaOutcome::Detected { states })
}

/// Windowed hormone totals after each event, summing from scratch.
/// Events are (tick, applied, dropped) with nondecreasing ticks.
pub fn hormone_replay(events: &[(u64, usize, usize)], window: u64, h: f64, s: f64) -> Result<Vec<(f64, f64)>> {
    cap("events", events.len(), MAX_EVENTS)?;
    let mut seen: VecDeque<(u64, usize, usize)> = VecDeque::new();
    let mut out = Vec::with_capacity(events.len());
    for &(t, a, d) in events {
        seen.push_back((t, a, d));
        let live = seen.iter().filter(|(u, _, _)| u + window > t);
        let (sa, sd) = live.fold((0usize, 0usize), |(x, y), (_, a, d)| (x + a, y + d));
        out.push((h * sa as f64, s * sd as f64));
    }
    Ok(out)
}
