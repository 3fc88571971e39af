//! The layer stack: detection on the signal layer, projection of noun
//! sequences upward, sentence recognition, and predicate application.
//!
//! Projection layers carry nouns as fixed-width slots written left to right
//! from address 0. A slot is a guard bit set to 1 followed by the class index,
//! most significant bit first. An all-zero slot ends the sequence.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::bits::Bits;
use crate::bitspace::{Block, Layer, Region};
use crate::classes::{phi_decode_prefix, ClassId, SimpleClass};
use crate::error::{Error, Result};
use crate::store::{slot_mask, ClassStore};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectInstance {
    /// Class acting on the block. Differs from `noun` when a local class
    /// replaces the global one.
    pub class_ref: ClassId,
    /// Global class whose noun was detected; this is what gets projected.
    pub noun: ClassId,
    pub layer: usize,
    pub block: Block,
    pub qualities: Vec<bool>,
    pub actions: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceRecord {
    pub noun_id: ClassId,
    pub constituents: Vec<ClassId>,
    pub layer: usize,
    pub first_slot: usize,
}

/// Objects of one layer grouped under an object of the layer above.
/// `parent` indexes the next layer's objects; `None` gathers the rest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextRecord {
    pub layer: usize,
    pub parent: Option<usize>,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionRecord {
    pub layer: usize,
    pub object: usize,
    pub verb: usize,
    pub partner: Option<usize>,
    pub address: usize,
    pub value: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerTrace {
    pub index: usize,
    pub bits: Bits,
    pub excited: Vec<Region>,
    pub excited_classes: Vec<ClassId>,
    pub blocks: Vec<Block>,
    pub objects: Vec<ObjectInstance>,
    pub sentences: Vec<SentenceRecord>,
    pub contexts: Vec<ContextRecord>,
    pub actions: Vec<ActionRecord>,
    /// Nouns that did not fit when projecting onto this layer.
    pub dropped: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterTrace {
    pub class: Option<ClassId>,
    pub replaces: Option<ClassId>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TickTrace {
    pub tick: u64,
    pub frame: Bits,
    pub layers: Vec<LayerTrace>,
    pub register: Option<RegisterTrace>,
}

impl TickTrace {
    /// Requirement that nothing excited on a layer is detected on it in the
    /// same tick, and that blocks on each layer are disjoint.
    pub fn check_excitation(&self) -> Result<()> {
        for l in &self.layers {
            let excited: BTreeSet<ClassId> = l.excited_classes.iter().copied().collect();
            if let Some(o) = l.objects.iter().find(|o| excited.contains(&o.noun)) {
                return Err(Error::Conflict(format!("layer {}: {} both excited and detected", l.index, o.noun)));
            }
            if !crate::bitspace::blocks_disjoint(&l.blocks) {
                return Err(Error::Conflict(format!("layer {}: overlapping blocks", l.index)));
            }
            let mut regions = l.excited.clone();
            regions.sort();
            if regions.windows(2).any(|w| w[0].intersects(&w[1])) {
                return Err(Error::Conflict(format!("layer {}: overlapping excited regions", l.index)));
            }
        }
        Ok(())
    }

    /// Classes of every object on every layer, in layer then address order.
    pub fn active_classes(&self) -> Vec<ClassId> {
        self.layers.iter().flat_map(|l| l.objects.iter().map(|o| o.class_ref)).collect()
    }
}

/// Collapse adjacent duplicates.
pub fn project_dedup<T: PartialEq + Clone>(seq: &[T]) -> Vec<T> {
    dedup_runs(seq).into_iter().map(|(t, _, _)| t).collect()
}

/// Runs of equal adjacent elements as (value, first index, length).
pub fn dedup_runs<T: PartialEq + Clone>(seq: &[T]) -> Vec<(T, usize, usize)> {
    let mut out: Vec<(T, usize, usize)> = Vec::new();
    for (i, x) in seq.iter().enumerate() {
        match out.last_mut() {
            Some((v, _, n)) if v == x => *n += 1,
            _ => out.push((x.clone(), i, 1)),
        }
    }
    out
}

fn new_object(store: &ClassStore, shadows: &BTreeMap<ClassId, ClassId>, noun: ClassId, layer: usize, block: Block) -> ObjectInstance {
    let class_ref = shadows.get(&noun).copied().unwrap_or(noun);
    let c = store.get(class_ref).expect("shadow refers to a stored class");
    ObjectInstance {
        class_ref,
        noun,
        layer,
        block,
        qualities: vec![false; c.adjectives.len()],
        actions: vec![false; c.verbs.len()],
    }
}

/// Cover the layer with the masks of all signal-level classes and create one
/// object per block, using local classes where they replace global ones.
pub fn detect_objects(layer: &Layer, store: &ClassStore) -> Vec<ObjectInstance> {
    detect_with(layer, store, store.shadows(), 0)
}

fn detect_with(layer: &Layer, store: &ClassStore, shadows: &BTreeMap<ClassId, ClassId>, index: usize) -> Vec<ObjectInstance> {
    let ids = store.signal_classes();
    let masks: Vec<_> = ids.iter().map(|id| store.get(*id).unwrap().noun.mask.clone()).collect();
    layer
        .cover(&masks)
        .into_iter()
        .map(|b| {
            let noun = ids[b.mask_id];
            let block = Block { mask_id: noun.0 as usize, ..b };
            new_object(store, shadows, noun, index, block)
        })
        .collect()
}

/// Write the sequence as slots starting at address 0. `limit` is the number
/// of addresses available for slots.
pub fn excite_projection(target: &Layer, seq: &[ClassId], width: usize, limit: usize) -> Result<Layer> {
    let mut out = target.clone();
    excite_projection_in_place(&mut out, seq, width, limit)?;
    Ok(out)
}

fn excite_projection_in_place(target: &mut Layer, seq: &[ClassId], width: usize, limit: usize) -> Result<()> {
    let needed = seq.len() * width;
    let available = limit.min(target.len());
    if needed > available {
        return Err(Error::Capacity { needed, available });
    }
    for (i, id) in seq.iter().enumerate() {
        target.excite_in_place(&slot_mask(*id, width)?, i * width, &[])?;
    }
    Ok(())
}

/// Class indices carried by the slots at the front of the layer.
pub fn read_slots(layer: &Layer, width: usize, limit: usize) -> Vec<ClassId> {
    let bits = layer.bits().as_slice();
    let limit = limit.min(bits.len());
    let mut out = Vec::new();
    let mut pos = 0;
    while pos + width <= limit && bits[pos] {
        let id = bits[pos + 1..pos + width].iter().fold(0u32, |acc, b| (acc << 1) | u32::from(*b));
        out.push(ClassId(id));
        pos += width;
    }
    out
}

/// Greedy leftmost-longest match of sentence classes over the slot sequence.
pub fn recognize_sentences(layer: &Layer, store: &ClassStore, layer_index: usize) -> Vec<SentenceRecord> {
    let seq = read_slots(layer, store.slot_width(), layer.len());
    match_sentences(&seq, store, layer_index)
}

fn match_sentences(seq: &[ClassId], store: &ClassStore, layer_index: usize) -> Vec<SentenceRecord> {
    let candidates: Vec<(ClassId, &SimpleClass)> =
        store.sentence_classes().into_iter().map(|id| (id, store.get(id).unwrap())).collect();
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < seq.len() {
        let best = candidates
            .iter()
            .filter(|(_, c)| seq[pos..].starts_with(&c.sentence))
            .fold(None::<(ClassId, usize)>, |best, (id, c)| match best {
                Some((_, n)) if n >= c.sentence.len() => best,
                _ => Some((*id, c.sentence.len())),
            });
        match best {
            Some((id, n)) => {
                out.push(SentenceRecord {
                    noun_id: id,
                    constituents: seq[pos..pos + n].to_vec(),
                    layer: layer_index,
                    first_slot: pos,
                });
                pos += n;
            }
            None => pos += 1,
        }
    }
    out
}

/// Evaluate every adjective of each member on its block.
pub fn load_qualities(objects: &mut [ObjectInstance], members: &[usize], layer: &Layer, store: &ClassStore) -> Result<()> {
    for &i in members {
        let o = &mut objects[i];
        let bits = layer.read_block(&o.block)?;
        let class = store.class(o.class_ref)?;
        for (k, a) in class.adjectives.iter().enumerate() {
            o.qualities[k] = a.poly.eval_bits(bits.as_slice())?;
        }
    }
    Ok(())
}

fn quality_of(obj: &ObjectInstance, class: &SimpleClass, q: crate::boolalg::QualityId) -> Option<bool> {
    class.adjectives.iter().position(|a| a.output == q).map(|k| obj.qualities[k])
}

/// Apply verbs of each member in address order. A verb fires once for every
/// member whose class declares all qualities the verb reads, and once on its
/// own when it reads no qualities. Writes are visible to later verbs.
pub fn apply_verbs(
    objects: &mut [ObjectInstance],
    members: &[usize],
    layer: &mut Layer,
    store: &ClassStore,
) -> Result<Vec<ActionRecord>> {
    let mut order = members.to_vec();
    order.sort_by_key(|&i| (objects[i].block.begin, i));
    let mut log = Vec::new();
    for &d in &order {
        let d_class = store.class(objects[d].class_ref)?;
        for (vi, verb) in d_class.verbs.iter().enumerate() {
            let linked = verb.poly.quality_args();
            let partners: Vec<Option<usize>> = if linked.is_empty() {
                vec![None]
            } else {
                order
                    .iter()
                    .copied()
                    .filter(|&b| {
                        let own = store.class(objects[b].class_ref).map(|c| c.own_qualities()).unwrap_or_default();
                        linked.is_subset(&own)
                    })
                    .map(Some)
                    .collect()
            };
            for partner in partners {
                let block = objects[d].block;
                let bits = layer.read_block(&block)?;
                let value = verb.poly.eval_with(|v| match v {
                    crate::boolalg::Var::Bit(i) => bits.get(i),
                    crate::boolalg::Var::Quality(q) => {
                        let b = &objects[partner?];
                        quality_of(b, store.get(b.class_ref)?, q)
                    }
                })?;
                let address = block.begin + verb.action_point;
                layer.write_in_place(&[(address, value)])?;
                objects[d].actions[vi] = value;
                log.push(ActionRecord { layer: objects[d].layer, object: d, verb: vi, partner, address, value });
            }
        }
    }
    Ok(log)
}

pub const DEFAULT_REGISTER_WIDTH: usize = 32;

/// Layer on which the class register sits when the stack is deep enough.
pub const REGISTER_LAYER: usize = 2;
pub const REGISTER_MIN_DEPTH: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stack {
    layers: Vec<Layer>,
    register_width: usize,
    ticks: u64,
}

impl Stack {
    pub fn new(depth: usize, length: usize) -> Result<Self> {
        Self::with_register(depth, length, DEFAULT_REGISTER_WIDTH)
    }

    pub fn with_register(depth: usize, length: usize, register_width: usize) -> Result<Self> {
        if depth == 0 {
            return Err(Error::arg("stack depth must be positive"));
        }
        if depth >= REGISTER_MIN_DEPTH && register_width >= length {
            return Err(Error::arg("class register must be shorter than the layer"));
        }
        let layers = (0..depth).map(|_| Layer::new(length)).collect::<Result<_>>()?;
        Ok(Stack { layers, register_width, ticks: 0 })
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn length(&self) -> usize {
        self.layers[0].len()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer(&self, i: usize) -> Option<&Layer> {
        self.layers.get(i)
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    pub fn register_region(&self) -> Option<Region> {
        (self.depth() >= REGISTER_MIN_DEPTH && self.register_width > 0)
            .then(|| Region::new(self.length() - self.register_width, self.length() - 1))
    }

    /// Addresses usable for slots on layer `i`.
    fn slot_limit(&self, i: usize) -> usize {
        match self.register_region() {
            Some(r) if i == REGISTER_LAYER => r.begin,
            _ => self.length(),
        }
    }

    /// Store a class encoding in the register, or clear it with `None`.
    /// The register holds a presence bit followed by the encoding.
    pub fn write_class_register(&mut self, code: Option<&Bits>) -> Result<()> {
        let r = self.register_region().ok_or_else(|| Error::Scope("stack has no class register".into()))?;
        let mut content = Bits::zeros(r.len());
        if let Some(code) = code {
            if code.len() + 1 > r.len() {
                return Err(Error::Capacity { needed: code.len() + 1, available: r.len() });
            }
            content.set(0, true);
            for (i, b) in code.iter().enumerate() {
                content.set(i + 1, b);
            }
        }
        let points: Vec<(usize, bool)> = content.iter().enumerate().map(|(i, b)| (r.begin + i, b)).collect();
        self.layers[REGISTER_LAYER].write_in_place(&points)
    }

    fn read_register(&self, store: &mut ClassStore, shadows: &mut BTreeMap<ClassId, ClassId>) -> Option<RegisterTrace> {
        let r = self.register_region()?;
        let bits = self.layers[REGISTER_LAYER].read_region(r).ok()?;
        if !bits.get(0).unwrap_or(false) {
            return Some(RegisterTrace { class: None, replaces: None, error: None });
        }
        let body = bits.slice(1, bits.len());
        let decoded = (|| {
            let mut rd = body.reader();
            let class = phi_decode_prefix(&mut rd, store.basis())?;
            while rd.remaining() > 0 {
                if rd.read_bit()? {
                    return Err(Error::Decode("register has data after the class".into()));
                }
            }
            let global = store
                .global_for(&class)
                .ok_or_else(|| Error::Scope("register class has no global counterpart".into()))?;
            let id = store.intern(class)?;
            Ok((id, global))
        })();
        Some(match decoded {
            Ok((id, global)) => {
                shadows.insert(global, id);
                RegisterTrace { class: Some(id), replaces: Some(global), error: None }
            }
            Err(e) => RegisterTrace { class: None, replaces: None, error: Some(e.to_string()) },
        })
    }

    /// One pass over the whole stack for a signal frame.
    pub fn tick(&mut self, frame: &Bits, store: &mut ClassStore) -> Result<TickTrace> {
        if frame.len() != self.length() {
            return Err(Error::arg(format!("frame has {} bits, layer has {}", frame.len(), self.length())));
        }
        let depth = self.depth();
        let width = store.slot_width();
        let mut shadows = store.shadows().clone();
        let register = self.read_register(store, &mut shadows);
        let store: &ClassStore = store;

        self.layers[0] = Layer::from_bits(frame.clone())?;
        for i in 1..depth {
            let limit = self.slot_limit(i);
            let keep: Vec<(usize, bool)> =
                (0..self.length()).map(|a| (a, a >= limit && self.layers[i].get(a).unwrap_or(false))).collect();
            self.layers[i].write_in_place(&keep)?;
            self.layers[i].clear_excitation();
        }

        let mut traces: Vec<LayerTrace> = (0..depth)
            .map(|i| LayerTrace {
                index: i,
                bits: Bits::new(),
                excited: Vec::new(),
                excited_classes: Vec::new(),
                blocks: Vec::new(),
                objects: Vec::new(),
                sentences: Vec::new(),
                contexts: Vec::new(),
                actions: Vec::new(),
                dropped: 0,
            })
            .collect();

        let mut levels: Vec<Vec<ObjectInstance>> = vec![Vec::new(); depth];
        levels[0] = detect_with(&self.layers[0], store, &shadows, 0);
        traces[0].blocks = levels[0].iter().map(|o| o.block).collect();

        // Object index ranges on layer k that each projected slot of k+1 stands for.
        let mut slot_members: Vec<Vec<Vec<usize>>> = vec![Vec::new(); depth];
        for k in 0..depth.saturating_sub(1) {
            let nouns: Vec<ClassId> = levels[k].iter().map(|o| o.noun).collect();
            let runs = dedup_runs(&nouns);
            let fit = (self.slot_limit(k + 1) / width).min(runs.len());
            traces[k + 1].dropped = runs.len() - fit;
            let seq: Vec<ClassId> = runs[..fit].iter().map(|(c, _, _)| *c).collect();
            let limit = self.slot_limit(k + 1);
            excite_projection_in_place(&mut self.layers[k + 1], &seq, width, limit)?;
            traces[k + 1].excited_classes = seq.clone();
            slot_members[k + 1] = runs[..fit].iter().map(|(_, s, n)| (*s..s + n).collect()).collect();
            if k + 2 < depth {
                let sentences = match_sentences(&seq, store, k + 1);
                levels[k + 1] = sentences
                    .iter()
                    .map(|s| {
                        let block = Block {
                            begin: s.first_slot * width,
                            end: (s.first_slot + s.constituents.len()) * width - 1,
                            mask_id: s.noun_id.0 as usize,
                        };
                        new_object(store, &shadows, s.noun_id, k + 1, block)
                    })
                    .collect();
                traces[k + 1].blocks = levels[k + 1].iter().map(|o| o.block).collect();
                traces[k + 1].sentences = sentences;
            }
        }

        // Group each layer's objects under the sentence objects above them.
        for k in 0..depth {
            let mut assigned = vec![false; levels[k].len()];
            let mut contexts = Vec::new();
            if k + 1 < depth {
                for (p, s) in traces[k + 1].sentences.iter().enumerate() {
                    let members: Vec<usize> = (s.first_slot..s.first_slot + s.constituents.len())
                        .flat_map(|slot| slot_members[k + 1][slot].iter().copied())
                        .collect();
                    for &m in &members {
                        assigned[m] = true;
                    }
                    contexts.push(ContextRecord { layer: k, parent: Some(p), members });
                }
            }
            let rest: Vec<usize> = (0..levels[k].len()).filter(|i| !assigned[*i]).collect();
            if !rest.is_empty() {
                contexts.push(ContextRecord { layer: k, parent: None, members: rest });
            }
            traces[k].contexts = contexts;
        }

        for k in 0..depth {
            for ctx in traces[k].contexts.clone() {
                load_qualities(&mut levels[k], &ctx.members, &self.layers[k], store)?;
                let log = apply_verbs(&mut levels[k], &ctx.members, &mut self.layers[k], store)?;
                traces[k].actions.extend(log);
            }
        }

        for (k, t) in traces.iter_mut().enumerate() {
            t.objects = std::mem::take(&mut levels[k]);
            t.bits = self.layers[k].bits().clone();
            t.excited = self.layers[k].excited().to_vec();
        }
        let trace = TickTrace { tick: self.ticks, frame: frame.clone(), layers: traces, register };
        self.ticks += 1;
        Ok(trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dedup_example() {
        let seq: Vec<char> = "ABBBCCDAC".chars().collect();
        assert_eq!(project_dedup(&seq).into_iter().collect::<String>(), "ABCDAC");
        assert_eq!(project_dedup(&['A']), vec!['A']);
        assert_eq!(project_dedup(&['A'; 4]), vec!['A']);
    }

    #[test]
    fn projection_slots() {
        let l = Layer::new(12).unwrap();
        let p = excite_projection(&l, &[ClassId(0), ClassId(1)], 4, 12).unwrap();
        assert_eq!(p.bits().to_string(), "100010010000");
        assert_eq!(p.excited(), &[Region::new(0, 3), Region::new(4, 7)]);
        assert_eq!(excite_projection(&l, &[], 4, 12).unwrap(), l);
        assert!(matches!(
            excite_projection(&l, &[ClassId(0); 4], 4, 12),
            Err(Error::Capacity { needed: 16, available: 12 })
        ));
        assert_eq!(read_slots(&p, 4, 12), vec![ClassId(0), ClassId(1)]);
    }
}
