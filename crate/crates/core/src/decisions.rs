//! Patches, the decision tree over packings, and response resolution with
//! recursion through the Ego zone.

use serde::{Deserialize, Serialize};

use crate::bits::Bits;
use crate::classes::ClassId;
use crate::error::{Error, Result};
use crate::io::{write_region, RegionMap};
use crate::memory::{MemoryTree, PackedEntry, PackedId};
use crate::packer::{accepted, PackBudget, PackCandidate, PackKind};
use crate::profile::OptionProfile;
use crate::stack::{Stack, TickTrace};

/// Installation of one packing. `before` is what it replaces, so undoing
/// the patch needs nothing else.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Patch {
    pub id: usize,
    pub target: ClassId,
    pub before: Option<PackedEntry>,
    pub after: Bits,
    pub level: usize,
    pub parent: Option<usize>,
    pub created: PackedId,
    /// Fingerprint of the memory the patch was built against.
    pub base: String,
    pub candidate: PackCandidate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub root: String,
    pub patches: Vec<Patch>,
}

impl DecisionTree {
    pub fn children(&self, parent: Option<usize>) -> Vec<usize> {
        self.patches.iter().filter(|p| p.parent == parent).map(|p| p.id).collect()
    }

    /// Patches nothing was built on, in creation order.
    pub fn leaves(&self) -> Vec<usize> {
        self.patches.iter().filter(|p| self.children(Some(p.id)).is_empty()).map(|p| p.id).collect()
    }

    /// Patches from the first level down to `leaf`.
    pub fn chain(&self, leaf: usize) -> Vec<Patch> {
        let mut out = Vec::new();
        let mut at = Some(leaf);
        while let Some(i) = at {
            out.push(self.patches[i].clone());
            at = self.patches[i].parent;
        }
        out.reverse();
        out
    }

    pub fn depth(&self) -> usize {
        self.patches.iter().map(|p| p.level).max().unwrap_or(0)
    }

    /// Every patch creates its own packed class, so separate branches never
    /// share one.
    pub fn branches_disjoint(&self) -> bool {
        let leaves = self.leaves();
        for (i, a) in leaves.iter().enumerate() {
            for b in &leaves[i + 1..] {
                let ca: Vec<Patch> = self.chain(*a);
                let cb: Vec<Patch> = self.chain(*b);
                let common = ca.iter().zip(&cb).take_while(|(x, y)| x.id == y.id).count();
                let sa: std::collections::BTreeSet<PackedId> = ca[common..].iter().map(|p| p.created).collect();
                if cb[common..].iter().any(|p| sa.contains(&p.created)) {
                    return false;
                }
            }
        }
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionConfig {
    pub budget: PackBudget,
    pub kind: PackKind,
    pub tree_depth: usize,
    pub max_leaves: usize,
    pub ego_depth: usize,
}

impl Default for DecisionConfig {
    fn default() -> Self {
        DecisionConfig {
            budget: PackBudget::default(),
            kind: PackKind::Abstraction,
            tree_depth: 3,
            max_leaves: 64,
            ego_depth: 2,
        }
    }
}

fn install_with(memory: &mut MemoryTree, candidate: PackCandidate, id: PackedId) {
    memory.packed.insert(candidate.parent, PackedEntry { id, candidate });
    memory.next_packed = memory.next_packed.max(id.0 + 1);
}

/// Pack the first packable parent with every accepted candidate, then keep
/// going on each resulting memory until nothing is packable or the depth
/// limit is reached.
pub fn generate_patches(memory: &MemoryTree, profile: &OptionProfile, cfg: &DecisionConfig) -> Result<DecisionTree> {
    let mut tree = DecisionTree { root: memory.fingerprint(), patches: Vec::new() };
    let mut next_id = memory.next_packed;
    expand(memory, None, 1, profile, cfg, &mut tree, &mut next_id)?;
    Ok(tree)
}

fn expand(
    memory: &MemoryTree,
    parent: Option<usize>,
    level: usize,
    profile: &OptionProfile,
    cfg: &DecisionConfig,
    tree: &mut DecisionTree,
    next_id: &mut u32,
) -> Result<()> {
    if level > cfg.tree_depth {
        return Ok(());
    }
    let Some(&target) = memory.packable().first() else { return Ok(()) };
    let report = memory.pack(target, cfg.kind, profile, cfg.budget)?;
    let observed = memory.observed_reprs(target)?;
    let base = memory.fingerprint();
    for c in accepted(&report.candidates, &observed) {
        if tree.leaves().len() >= cfg.max_leaves && parent.is_none_or(|p| !tree.children(Some(p)).is_empty()) {
            break;
        }
        let created = PackedId(*next_id);
        *next_id += 1;
        let id = tree.patches.len();
        tree.patches.push(Patch {
            id,
            target,
            before: memory.packed.get(&target).cloned(),
            after: c.encode()?,
            level,
            parent,
            created,
            base: base.clone(),
            candidate: c.clone(),
        });
        let mut next = memory.clone();
        install_with(&mut next, c.clone(), created);
        expand(&next, Some(id), level + 1, profile, cfg, tree, next_id)?;
    }
    Ok(())
}

/// What undoing a fixed chain needs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rollback {
    pub restored: Vec<(ClassId, Option<PackedEntry>)>,
    pub next_packed: u32,
    pub patches: Vec<usize>,
}

/// Apply a chain of patches at once. Each patch must have been built against
/// the memory it is applied to.
pub fn fix_memory(memory: &MemoryTree, chain: &[Patch]) -> Result<(MemoryTree, Rollback)> {
    let mut out = memory.clone();
    let mut rollback = Rollback { restored: Vec::new(), next_packed: memory.next_packed, patches: Vec::new() };
    for (i, p) in chain.iter().enumerate() {
        if p.level != i + 1 || (i > 0 && p.parent != Some(chain[i - 1].id)) {
            return Err(Error::Conflict(format!("patch {} is out of order in its chain", p.id)));
        }
        if p.base != out.fingerprint() {
            return Err(Error::Conflict(format!("patch {} was built against a different memory", p.id)));
        }
        rollback.restored.push((p.target, out.packed.get(&p.target).cloned()));
        rollback.patches.push(p.id);
        install_with(&mut out, p.candidate.clone(), p.created);
    }
    Ok((out, rollback))
}

pub fn rollback(memory: &MemoryTree, rb: &Rollback) -> MemoryTree {
    let mut out = memory.clone();
    for (target, before) in rb.restored.iter().rev() {
        match before {
            Some(e) => {
                out.packed.insert(*target, e.clone());
            }
            None => {
                out.packed.remove(target);
            }
        }
    }
    out.next_packed = rb.next_packed;
    out
}

/// Response of a memory state: the output region after the last tick, with
/// the qualities every installed packing assigns to its lower classes folded
/// in.
pub fn response(memory: &MemoryTree, last: Option<&TickTrace>, map: &RegionMap) -> Bits {
    let width = map.output.len();
    let mut out = match last {
        Some(t) => t.layers[0].bits.slice(map.output.begin, map.output.end + 1),
        None => Bits::zeros(width),
    };
    let mut k = 0;
    for (parent, entry) in &memory.packed {
        let Ok(reprs) = memory.observed_reprs(*parent) else { continue };
        for r in reprs {
            if let Some(q) = entry.candidate.qualities_of(&r) {
                for b in q.iter() {
                    let i = k % width;
                    out.set(i, out.get(i).unwrap() ^ b);
                    k += 1;
                }
            }
        }
        k += 1;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Resolution {
    /// Nothing was packable; the unpacked memory answered.
    Unpacked,
    /// Exactly one distinct response; its patch chain was fixed.
    Single,
    /// The Ego pass reproduced one pending response.
    EgoChose,
    /// The Ego pass produced its own single-response patch.
    EgoNew,
    /// No single response; everything dropped.
    Dropped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub depth: usize,
    pub leaves: usize,
    pub tree_depth: usize,
    pub responses: Vec<Bits>,
    pub resolution: Resolution,
    pub fixed: Vec<usize>,
    pub ego: Option<Box<DecisionRecord>>,
}

pub struct SigmaOutcome {
    pub response: Option<Bits>,
    pub memory: MemoryTree,
    pub stack: Stack,
    pub traces: Vec<TickTrace>,
    pub record: DecisionRecord,
    pub rollback: Option<Rollback>,
    /// Patches fixed by this call.
    pub fixed: Vec<Patch>,
}

pub struct SigmaParams<'a> {
    pub profile: &'a OptionProfile,
    pub cfg: &'a DecisionConfig,
    pub map: &'a RegionMap,
    pub window: usize,
}

/// Feed frames, pack, and answer. Several distinct answers go back through
/// the Ego zone; if that does not settle on a single one, memory and stack
/// are returned as they were on entry.
pub fn resolve_sigma(
    stack: &Stack,
    memory: &MemoryTree,
    sigma: &[Bits],
    depth: usize,
    params: &SigmaParams<'_>,
) -> Result<SigmaOutcome> {
    let dropped = |depth: usize, leaves: usize, tree_depth: usize, responses: Vec<Bits>, ego, traces| SigmaOutcome {
        response: None,
        memory: memory.clone(),
        stack: stack.clone(),
        traces,
        record: DecisionRecord { depth, leaves, tree_depth, responses, resolution: Resolution::Dropped, fixed: vec![], ego },
        rollback: None,
        fixed: Vec::new(),
    };
    if depth > params.cfg.ego_depth {
        return Ok(dropped(depth, 0, 0, Vec::new(), None, Vec::new()));
    }

    let mut st = stack.clone();
    let mut observed = memory.clone();
    let mut traces = Vec::new();
    for f in sigma {
        let t = st.tick(f, &mut observed.store)?;
        observed.observe(&t, params.profile, params.window);
        traces.push(t);
    }
    let tree = generate_patches(&observed, params.profile, params.cfg)?;
    let leaves = tree.leaves();
    let last = traces.last();

    if leaves.is_empty() {
        let r = response(&observed, last, params.map);
        return Ok(SigmaOutcome {
            response: Some(r.clone()),
            memory: memory.clone(),
            stack: st,
            record: DecisionRecord {
                depth,
                leaves: 0,
                tree_depth: 0,
                responses: vec![r],
                resolution: Resolution::Unpacked,
                fixed: vec![],
                ego: None,
            },
            traces,
            rollback: None,
            fixed: Vec::new(),
        });
    }

    // One response per leaf; keep the first leaf for each distinct response.
    let mut pending: Vec<(Bits, usize)> = Vec::new();
    for &leaf in &leaves {
        let (leaf_mem, _) = fix_memory(&observed, &tree.chain(leaf))?;
        let r = response(&leaf_mem, last, params.map);
        if !pending.iter().any(|(x, _)| *x == r) {
            pending.push((r, leaf));
        }
    }
    let responses: Vec<Bits> = pending.iter().map(|(r, _)| r.clone()).collect();
    let fix = |leaf: usize, resolution: Resolution, ego, st: Stack, traces: Vec<TickTrace>| -> Result<SigmaOutcome> {
        let chain = tree.chain(leaf);
        let (fixed_mem, rb) = fix_memory(&observed, &chain)?;
        let r = pending.iter().find(|(_, l)| *l == leaf).unwrap().0.clone();
        Ok(SigmaOutcome {
            response: Some(r),
            memory: fixed_mem,
            stack: st,
            traces,
            record: DecisionRecord {
                depth,
                leaves: leaves.len(),
                tree_depth: tree.depth(),
                responses: responses.clone(),
                resolution,
                fixed: chain.iter().map(|p| p.id).collect(),
                ego,
            },
            rollback: Some(rb),
            fixed: chain,
        })
    };

    if pending.len() == 1 {
        return fix(pending[0].1, Resolution::Single, None, st, traces);
    }

    // Several answers: show each to the Ego zone on top of the last frame.
    let base = sigma.last().cloned().unwrap_or_else(|| Bits::zeros(stack.length()));
    let ego_sigma: Vec<Bits> = responses
        .iter()
        .map(|r| {
            let mut f = base.clone();
            write_region(&mut f, params.map.ego, r);
            f
        })
        .collect();
    let sub = resolve_sigma(stack, memory, &ego_sigma, depth + 1, params)?;
    let sub_record = Some(Box::new(sub.record.clone()));
    if let Some(r) = &sub.response {
        let hits: Vec<&(Bits, usize)> = pending.iter().filter(|(x, _)| x == r).collect();
        if hits.len() == 1 {
            return fix(hits[0].1, Resolution::EgoChose, sub_record, st, traces);
        }
        if matches!(sub.record.resolution, Resolution::Single | Resolution::EgoChose | Resolution::EgoNew) {
            return Ok(SigmaOutcome {
                record: DecisionRecord {
                    depth,
                    leaves: leaves.len(),
                    tree_depth: tree.depth(),
                    responses,
                    resolution: Resolution::EgoNew,
                    fixed: sub.record.fixed.clone(),
                    ego: sub_record,
                },
                ..sub
            });
        }
    }
    Ok(dropped(depth, leaves.len(), tree.depth(), responses, sub_record, traces))
}
