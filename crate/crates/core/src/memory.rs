//! Context memory: contexts built from tick traces, context forking, and the
//! memory tree that packing and decisions operate on.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::classes::{phi_encode, ClassId};
use crate::error::{Error, Result};
use crate::packer::{abstraction, detalisation, KeyKind, PackBudget, PackCandidate, PackKind, PackProblem, PackReport};
use crate::profile::{ContextOption, OptionProfile};
use crate::stack::{ObjectInstance, TickTrace};
use crate::store::ClassStore;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Member {
    pub object: ObjectInstance,
    pub context: Option<Context>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Context {
    pub level: usize,
    pub classes: Vec<ClassId>,
    pub members: Vec<Member>,
}

impl Context {
    pub fn empty(level: usize) -> Self {
        Context { level, classes: Vec::new(), members: Vec::new() }
    }

    /// Context of the objects on `layer` grouped under `parent`, together
    /// with the contexts those objects carry themselves.
    pub fn from_trace(trace: &TickTrace, layer: usize, parent: Option<usize>) -> Option<Context> {
        let lt = trace.layers.get(layer)?;
        let rec = lt.contexts.iter().find(|c| c.parent == parent)?;
        let members: Vec<Member> = rec
            .members
            .iter()
            .map(|&i| Member {
                object: lt.objects[i].clone(),
                context: layer.checked_sub(1).and_then(|below| Context::from_trace(trace, below, Some(i))),
            })
            .collect();
        let mut classes = Vec::new();
        for m in &members {
            if !classes.contains(&m.object.class_ref) {
                classes.push(m.object.class_ref);
            }
        }
        Some(Context { level: layer, classes, members })
    }

    pub fn is_consistent(&self) -> bool {
        self.members.iter().all(|m| {
            self.classes.contains(&m.object.class_ref) && m.context.as_ref().is_none_or(|c| c.is_consistent())
        })
    }

    pub fn member_classes(&self) -> Vec<ClassId> {
        self.members.iter().map(|m| m.object.class_ref).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModKind {
    Quality,
    Action,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Modification {
    pub kind: ModKind,
    pub before: Vec<bool>,
    pub after: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ArchiveKey {
    pub kind: ModKind,
    pub combination: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Disposition {
    Forked(ArchiveKey),
    InPlace,
}

/// The context attached to one parent noun, plus contexts archived by forks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextSlot {
    pub current: Context,
    pub archive: BTreeMap<ArchiveKey, Context>,
    pub qualities: Vec<bool>,
    pub actions: Vec<bool>,
    /// Lower classes observed under this parent, most recent last.
    pub observed: Vec<ClassId>,
}

impl ContextSlot {
    pub fn new(current: Context) -> Self {
        ContextSlot { current, archive: BTreeMap::new(), qualities: Vec::new(), actions: Vec::new(), observed: Vec::new() }
    }

    pub fn recall(&self, kind: ModKind, combination: &[bool]) -> Option<&Context> {
        self.archive.get(&ArchiveKey { kind, combination: combination.to_vec() })
    }
}

fn trigger(profile: &OptionProfile) -> ModKind {
    match profile.context {
        ContextOption::Static => ModKind::Quality,
        ContextOption::Dynamic => ModKind::Action,
    }
}

/// Static profiles fork on quality changes, dynamic ones on action changes.
/// A fork archives the current context under the combination it was valid
/// for and attaches an empty one.
pub fn fork_context(slot: &mut ContextSlot, modification: &Modification, profile: &OptionProfile) -> Disposition {
    if modification.kind != trigger(profile) {
        return Disposition::InPlace;
    }
    let key = ArchiveKey { kind: modification.kind, combination: modification.before.clone() };
    let level = slot.current.level;
    let old = std::mem::replace(&mut slot.current, Context::empty(level));
    slot.archive.insert(key.clone(), old);
    Disposition::Forked(key)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForkEvent {
    pub parent: ClassId,
    pub disposition: Disposition,
}

/// Identifier of an installed packing. Every installation gets a new one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PackedId(pub u32);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackedEntry {
    pub id: PackedId,
    pub candidate: PackCandidate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemoryTree {
    pub store: ClassStore,
    pub slots: BTreeMap<ClassId, ContextSlot>,
    pub packed: BTreeMap<ClassId, PackedEntry>,
    pub next_packed: u32,
}

#[derive(Serialize)]
struct Snapshot<'a> {
    classes: Vec<String>,
    shadows: &'a BTreeMap<ClassId, ClassId>,
    slots: &'a BTreeMap<ClassId, ContextSlot>,
    packed: &'a BTreeMap<ClassId, PackedEntry>,
    next_packed: u32,
}

impl MemoryTree {
    pub fn new(store: ClassStore) -> Self {
        MemoryTree { store, slots: BTreeMap::new(), packed: BTreeMap::new(), next_packed: 0 }
    }

    /// Canonical text form; equal fingerprints mean equal memory.
    pub fn fingerprint(&self) -> String {
        let classes = self
            .store
            .ids()
            .map(|id| match phi_encode(self.store.get(id).unwrap(), self.store.basis()) {
                Ok(b) => b.to_string(),
                Err(e) => format!("!{e}"),
            })
            .collect();
        let snap = Snapshot {
            classes,
            shadows: self.store.shadows(),
            slots: &self.slots,
            packed: &self.packed,
            next_packed: self.next_packed,
        };
        serde_json::to_string(&snap).expect("memory snapshot serializes")
    }

    /// Record the contexts seen in a tick and fork where the profile says so.
    pub fn observe(&mut self, trace: &TickTrace, profile: &OptionProfile, window: usize) -> Vec<ForkEvent> {
        let mut events = Vec::new();
        for k in 1..trace.layers.len() {
            for (i, obj) in trace.layers[k].objects.iter().enumerate() {
                let Some(ctx) = Context::from_trace(trace, k - 1, Some(i)) else { continue };
                let parent = obj.noun;
                let fresh = !self.slots.contains_key(&parent);
                let slot = self.slots.entry(parent).or_insert_with(|| ContextSlot::new(Context::empty(k - 1)));
                if !fresh {
                    let mods = [
                        (ModKind::Quality, &slot.qualities, &obj.qualities),
                        (ModKind::Action, &slot.actions, &obj.actions),
                    ];
                    let firing = mods
                        .iter()
                        .filter(|(_, b, a)| b != a)
                        .map(|(kind, b, a)| Modification { kind: *kind, before: (*b).clone(), after: (*a).clone() })
                        .find(|m| m.kind == trigger(profile));
                    let disposition = match firing {
                        Some(m) => fork_context(slot, &m, profile),
                        None => Disposition::InPlace,
                    };
                    events.push(ForkEvent { parent, disposition });
                }
                slot.observed.extend(ctx.member_classes());
                let excess = slot.observed.len().saturating_sub(window.max(1));
                slot.observed.drain(..excess);
                slot.current = ctx;
                slot.qualities = obj.qualities.clone();
                slot.actions = obj.actions.clone();
            }
        }
        events
    }

    /// Parents whose context is non-empty, not packed yet, and whose members
    /// that carry contexts of their own are already packed.
    pub fn packable(&self) -> Vec<ClassId> {
        self.slots
            .iter()
            .filter(|(p, s)| {
                !self.packed.contains_key(p)
                    && !s.current.members.is_empty()
                    && s.current.members.iter().all(|m| {
                        !self.slots.contains_key(&m.object.noun) || self.packed.contains_key(&m.object.noun)
                    })
            })
            .map(|(p, _)| *p)
            .collect()
    }

    pub fn pack_problem(&self, parent: ClassId) -> Result<PackProblem> {
        let slot = self.slots.get(&parent).ok_or_else(|| Error::arg(format!("{parent} has no context")))?;
        if slot.current.members.is_empty() {
            return Err(Error::arg(format!("context of {parent} is empty")));
        }
        PackProblem::from_classes(parent, &slot.current.classes, &slot.observed, &self.store)
    }

    pub fn pack(&self, parent: ClassId, kind: PackKind, profile: &OptionProfile, budget: PackBudget) -> Result<PackReport> {
        let problem = self.pack_problem(parent)?;
        let key = KeyKind::from(profile.context);
        Ok(match kind {
            PackKind::Abstraction => abstraction(&problem, profile.spontaneous(), key, budget),
            PackKind::Detalisation => detalisation(&problem, profile.spontaneous(), key, budget),
        })
    }

    /// Binary forms of the lower classes currently observed under `parent`.
    pub fn observed_reprs(&self, parent: ClassId) -> Result<Vec<crate::bits::Bits>> {
        let p = self.pack_problem(parent)?;
        Ok(p.reprs)
    }

    pub fn install(&mut self, candidate: PackCandidate) -> PackedId {
        let id = PackedId(self.next_packed);
        self.next_packed += 1;
        self.packed.insert(candidate.parent, PackedEntry { id, candidate });
        id
    }

    pub fn packed_ids(&self) -> BTreeSet<PackedId> {
        self.packed.values().map(|e| e.id).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitspace::Block;

    fn obj(class: u32) -> ObjectInstance {
        ObjectInstance {
            class_ref: ClassId(class),
            noun: ClassId(class),
            layer: 0,
            block: Block { begin: 0, end: 0, mask_id: class as usize },
            qualities: vec![],
            actions: vec![],
        }
    }

    fn slot() -> ContextSlot {
        ContextSlot::new(Context { level: 0, classes: vec![ClassId(1)], members: vec![Member { object: obj(1), context: None }] })
    }

    #[test]
    fn fork_rules() {
        let stat = OptionProfile::default();
        let dynamic = OptionProfile { context: ContextOption::Dynamic, ..stat };
        let q = Modification { kind: ModKind::Quality, before: vec![true], after: vec![false] };
        let a = Modification { kind: ModKind::Action, before: vec![false], after: vec![true] };

        let mut s = slot();
        assert!(matches!(fork_context(&mut s, &q, &stat), Disposition::Forked(_)));
        assert!(s.current.members.is_empty());
        assert!(s.recall(ModKind::Quality, &[true]).is_some());

        let mut s = slot();
        assert_eq!(fork_context(&mut s, &a, &stat), Disposition::InPlace);
        assert_eq!(s.current.members.len(), 1);

        let mut s = slot();
        assert!(matches!(fork_context(&mut s, &a, &dynamic), Disposition::Forked(_)));
        assert!(s.recall(ModKind::Action, &[false]).is_some());
    }
}
