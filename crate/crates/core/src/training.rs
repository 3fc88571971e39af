//! Packing search by a genetic algorithm, test-data generation, the
//! repetition detector, and pleasure/pain control.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bits::Bits;
use crate::bitspace::Mask;
use crate::boolalg::{QualityId, Var, ZhegalkinPoly};
use crate::classes::ClassId;
use crate::decisions::{rollback, Patch, Rollback};
use crate::error::{Error, Result};
use crate::memory::MemoryTree;
use crate::packer::{
    candidate_from_readers, composed_writers, differing_positions, reader_pool, KeyKind, PackBudget, PackCandidate,
    PackProblem, PackStep,
};
use crate::profile::SpontaneousOps;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarity {
    Pleasure,
    Pain,
}

pub trait GeneratorStrategy {
    fn name(&self) -> &'static str;
    /// Recombinations of the given lower-class forms.
    fn generate(&mut self, children: &[Bits]) -> Vec<Bits>;
    fn reinforce(&mut self, sample: &Bits, polarity: Polarity);
}

pub trait DiscriminatorStrategy {
    fn name(&self) -> &'static str;
    fn judge(&self, sample: &Bits) -> bool;
    /// Learn a sample seen on the stack.
    fn learn(&mut self, sample: &Bits);
    fn reinforce(&mut self, sample: &Bits, polarity: Polarity);
}

/// Single-point crossovers of every ordered pair, best scored first by a
/// per-position bit frequency table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGenerator {
    pub batch: usize,
    /// Per position, counts of (zero, one).
    pub table: Vec<(u64, u64)>,
    pub reinforced: u64,
}

impl FrequencyGenerator {
    pub fn new(batch: usize) -> Self {
        FrequencyGenerator { batch, table: Vec::new(), reinforced: 0 }
    }

    fn count(&mut self, s: &Bits, weight: u64) {
        if self.table.len() < s.len() {
            self.table.resize(s.len(), (0, 0));
        }
        for (i, b) in s.iter().enumerate() {
            if b {
                self.table[i].1 += weight;
            } else {
                self.table[i].0 += weight;
            }
        }
    }

    fn score(&self, s: &Bits) -> u64 {
        s.iter()
            .enumerate()
            .map(|(i, b)| self.table.get(i).map_or(0, |(z, o)| if b { *o } else { *z }))
            .sum()
    }
}

impl GeneratorStrategy for FrequencyGenerator {
    fn name(&self) -> &'static str {
        "frequency"
    }

    fn generate(&mut self, children: &[Bits]) -> Vec<Bits> {
        for c in children {
            self.count(c, 1);
        }
        let mut out: Vec<Bits> = Vec::new();
        for a in children {
            for b in children {
                if a == b || a.len() != b.len() {
                    continue;
                }
                for cut in 1..a.len() {
                    let s: Bits = a.iter().take(cut).chain(b.iter().skip(cut)).collect();
                    if !children.contains(&s) && !out.contains(&s) {
                        out.push(s);
                    }
                }
            }
        }
        // Stable sort keeps generation order among equal scores.
        out.sort_by_key(|s| std::cmp::Reverse(self.score(s)));
        out.truncate(self.batch);
        out
    }

    fn reinforce(&mut self, sample: &Bits, polarity: Polarity) {
        if polarity == Polarity::Pleasure {
            self.count(sample, 1);
            self.reinforced += 1;
        }
    }
}

/// Passes a sample when every positional n-gram of it was seen before and it
/// is not a recorded negative.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NgramDiscriminator {
    pub n: usize,
    pub seen: BTreeSet<(usize, Bits)>,
    pub negatives: BTreeSet<Bits>,
}

impl NgramDiscriminator {
    pub fn new(n: usize) -> Self {
        NgramDiscriminator { n: n.max(1), seen: BTreeSet::new(), negatives: BTreeSet::new() }
    }

    fn grams(&self, s: &Bits) -> Vec<(usize, Bits)> {
        if s.len() < self.n {
            return vec![(0, s.clone())];
        }
        (0..=s.len() - self.n).map(|i| (i, s.slice(i, i + self.n))).collect()
    }
}

impl DiscriminatorStrategy for NgramDiscriminator {
    fn name(&self) -> &'static str {
        "ngram"
    }

    fn judge(&self, sample: &Bits) -> bool {
        !self.negatives.contains(sample) && self.grams(sample).iter().all(|g| self.seen.contains(g))
    }

    fn learn(&mut self, sample: &Bits) {
        for g in self.grams(sample) {
            self.seen.insert(g);
        }
    }

    fn reinforce(&mut self, sample: &Bits, polarity: Polarity) {
        match polarity {
            Polarity::Pleasure => self.learn(sample),
            Polarity::Pain => {
                self.negatives.insert(sample.clone());
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestEntry {
    pub class: ClassId,
    pub level: usize,
    /// Positions every lower class of `class` agrees on.
    pub mask: Mask,
    pub samples: Vec<Bits>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestTree {
    pub entries: Vec<TestEntry>,
}

impl TestTree {
    pub fn samples_for(&self, class: ClassId) -> Vec<Bits> {
        self.entries.iter().filter(|e| e.class == class).flat_map(|e| e.samples.clone()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.iter().all(|e| e.samples.is_empty())
    }
}

/// Mask of the positions all forms agree on.
pub fn shared_mask(forms: &[Bits]) -> Result<Mask> {
    let w = forms.first().map_or(0, Bits::len);
    let d: BTreeSet<usize> = differing_positions(forms).into_iter().collect();
    Mask::new((0..w).filter(|p| !d.contains(p)).map(|p| (p, forms[0].get(p).unwrap())), w)
}

fn recombine(
    memory: &MemoryTree,
    class: ClassId,
    level: usize,
    generator: &mut dyn GeneratorStrategy,
    discriminator: &dyn DiscriminatorStrategy,
) -> Result<Option<TestEntry>> {
    let Ok(children) = memory.observed_reprs(class) else { return Ok(None) };
    let mask = shared_mask(&children)?;
    let samples = generator
        .generate(&children)
        .into_iter()
        .filter(|s| s.len() == mask.span() && mask.matches_at(s.as_slice(), 0) && discriminator.judge(s))
        .collect();
    Ok(Some(TestEntry { class, level, mask, samples }))
}

/// Test data for packing `parent`: recombinations of the lower classes of
/// every class in the context above it, kept only when they fit the shared
/// mask and pass the discriminator. Classes one level further down that have
/// contexts of their own get an entry too.
pub fn imaginator_generate(
    parent: ClassId,
    memory: &MemoryTree,
    generator: &mut dyn GeneratorStrategy,
    discriminator: &dyn DiscriminatorStrategy,
) -> Result<TestTree> {
    let grand = memory
        .slots
        .values()
        .find(|s| s.current.members.iter().any(|m| m.object.noun == parent))
        .ok_or_else(|| Error::Scope(format!("{parent} has no context above it")))?;
    let mut tree = TestTree::default();
    let mut done = BTreeSet::new();
    for m in &grand.current.members {
        let d = m.object.noun;
        if !done.insert(d) {
            continue;
        }
        if let Some(e) = recombine(memory, d, 1, generator, discriminator)? {
            tree.entries.push(e);
        }
        if let Some(slot) = memory.slots.get(&d) {
            for lower in &slot.current.members {
                let n = lower.object.noun;
                if memory.slots.contains_key(&n) && done.insert(n) {
                    if let Some(e) = recombine(memory, n, 2, generator, discriminator)? {
                        tree.entries.push(e);
                    }
                }
            }
        }
    }
    Ok(tree)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaParams {
    pub population: usize,
    pub generations: usize,
    pub elitism: usize,
    pub seed: u64,
}

impl Default for GaParams {
    fn default() -> Self {
        GaParams { population: 32, generations: 16, elitism: 2, seed: 0 }
    }
}

/// One genome: indices into the reader pool, sorted and distinct.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Individual {
    pub genome: Vec<usize>,
    pub fitness: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitnessReport {
    pub genome: Vec<usize>,
    pub regenerated: usize,
    pub tested: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaReport {
    pub pool: Vec<ZhegalkinPoly>,
    /// Final population, best first.
    pub ranked: Vec<Individual>,
    pub best_fitness: Vec<usize>,
    /// Candidate completed around the best genome when it packs the context.
    pub best: Option<PackCandidate>,
}

/// Number of test forms a reader set regenerates. Each differing position
/// takes whichever writer agrees with the most forms; writers are verb
/// compositions, a plain quality, or a constant.
pub fn fitness(problem: &PackProblem, pool: &[ZhegalkinPoly], genome: &[usize], test: &[Bits], ops: SpontaneousOps, budget: PackBudget) -> FitnessReport {
    let width = problem.width();
    let diff = differing_positions(&problem.reprs);
    let readers: Vec<&ZhegalkinPoly> = genome.iter().map(|&i| &pool[i]).collect();
    let test: Vec<Bits> = test.iter().filter(|t| t.len() <= width).map(|t| t.resized(width)).collect();
    let keys: Vec<Bits> = test.iter().map(|t| readers.iter().map(|r| r.eval_bits(t.as_slice()).unwrap()).collect()).collect();
    let mut options: Vec<ZhegalkinPoly> = vec![ZhegalkinPoly::zero(), ZhegalkinPoly::one()];
    options.extend((0..readers.len()).map(|j| ZhegalkinPoly::quality(QualityId(j as u32))));
    options.extend(composed_writers(readers.len(), ops.verb, budget.max_depth).into_iter().map(|(p, _)| p));
    let eval = |w: &ZhegalkinPoly, k: &Bits| {
        w.eval_with(|v| match v {
            Var::Quality(QualityId(j)) => k.get(j as usize),
            Var::Bit(_) => None,
        })
        .unwrap_or(false)
    };
    let mut ok = vec![true; test.len()];
    for (i, t) in test.iter().enumerate() {
        ok[i] = (0..width).all(|p| diff.contains(&p) || t.get(p) == problem.reprs[0].get(p));
    }
    for &p in &diff {
        let best = options
            .iter()
            .max_by_key(|w| {
                let hits = test.iter().zip(&keys).filter(|(t, k)| eval(w, k) == t.get(p).unwrap()).count();
                // Earlier options win ties.
                (hits, std::cmp::Reverse(options.iter().position(|o| o == *w)))
            })
            .cloned();
        if let Some(w) = best {
            for (i, (t, k)) in test.iter().zip(&keys).enumerate() {
                ok[i] &= eval(&w, k) == t.get(p).unwrap();
            }
        }
    }
    FitnessReport { genome: genome.to_vec(), regenerated: ok.iter().filter(|b| **b).count(), tested: test.len() }
}

fn rank(pop: &mut [Individual]) {
    pop.sort_by(|a, b| b.fitness.cmp(&a.fitness).then(a.genome.len().cmp(&b.genome.len())).then(a.genome.cmp(&b.genome)));
}

fn random_genome(rng: &mut ChaCha8Rng, pool: usize, max_len: usize) -> Vec<usize> {
    let len = rng.gen_range(1..=max_len.min(pool).max(1));
    let mut g: BTreeSet<usize> = BTreeSet::new();
    while g.len() < len {
        g.insert(rng.gen_range(0..pool));
    }
    g.into_iter().collect()
}

/// One mutation: add, drop, or swap a reader.
fn mutate(rng: &mut ChaCha8Rng, genome: &[usize], pool: usize, max_len: usize) -> Vec<usize> {
    let mut g: BTreeSet<usize> = genome.iter().copied().collect();
    let unused: Vec<usize> = (0..pool).filter(|i| !g.contains(i)).collect();
    match rng.gen_range(0..3) {
        0 if g.len() < max_len && !unused.is_empty() => {
            g.insert(unused[rng.gen_range(0..unused.len())]);
        }
        1 if g.len() > 1 => {
            let v: Vec<usize> = g.iter().copied().collect();
            g.remove(&v[rng.gen_range(0..v.len())]);
        }
        _ if !unused.is_empty() => {
            let v: Vec<usize> = g.iter().copied().collect();
            g.remove(&v[rng.gen_range(0..v.len())]);
            g.insert(unused[rng.gen_range(0..unused.len())]);
        }
        _ => {}
    }
    g.into_iter().collect()
}

/// Evolve reader sets drawn from the spontaneous adjective pool. Ranking is
/// by fitness, then fewer readers, then genome order.
pub fn genetic_search(
    problem: &PackProblem,
    test: &[Bits],
    ops: SpontaneousOps,
    key_kind: KeyKind,
    budget: PackBudget,
    params: GaParams,
) -> GaReport {
    let pool_steps = reader_pool(problem, ops, budget);
    let pool: Vec<ZhegalkinPoly> = pool_steps.iter().map(|(p, _)| p.clone()).collect();
    let mut report = GaReport { pool: pool.clone(), ranked: Vec::new(), best_fitness: Vec::new(), best: None };
    if pool.is_empty() {
        return report;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut cache: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    let mut score = |g: &[usize]| *cache.entry(g.to_vec()).or_insert_with(|| fitness(problem, &pool, g, test, ops, budget).regenerated);
    let size = params.population.max(1);
    let mut pop: Vec<Individual> = (0..size)
        .map(|_| {
            let genome = random_genome(&mut rng, pool.len(), budget.max_readers);
            let fitness = score(&genome);
            Individual { genome, fitness }
        })
        .collect();
    rank(&mut pop);
    report.best_fitness.push(pop[0].fitness);
    for _ in 0..params.generations {
        let mut next: Vec<Individual> = pop.iter().take(params.elitism.min(size)).cloned().collect();
        while next.len() < size {
            let a = &pop[rng.gen_range(0..pop.len())];
            let b = &pop[rng.gen_range(0..pop.len())];
            let parent = if (b.fitness, std::cmp::Reverse(b.genome.len())) > (a.fitness, std::cmp::Reverse(a.genome.len())) { b } else { a };
            let genome = mutate(&mut rng, &parent.genome, pool.len(), budget.max_readers);
            let fitness = score(&genome);
            next.push(Individual { genome, fitness });
        }
        rank(&mut next);
        pop = next;
        report.best_fitness.push(pop[0].fitness);
    }
    let readers: Vec<(ZhegalkinPoly, PackStep)> = pop[0].genome.iter().map(|&i| pool_steps[i].clone()).collect();
    report.best = candidate_from_readers(problem, ops, key_kind, budget, &readers);
    report.ranked = pop;
    report
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskProposal {
    pub pattern: Bits,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorReport {
    pub masks: Vec<MaskProposal>,
    pub fresh: Vec<Bits>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectorParams {
    pub repeats: usize,
    pub min_len: usize,
    pub fresh: usize,
}

impl Default for DetectorParams {
    fn default() -> Self {
        DetectorParams { repeats: 3, min_len: 3, fresh: 2 }
    }
}

fn count_all(window: &[Bits], min_len: usize) -> BTreeMap<Bits, usize> {
    let mut counts = BTreeMap::new();
    for f in window {
        for i in 0..f.len() {
            for j in i + min_len..=f.len() {
                *counts.entry(f.slice(i, j)).or_insert(0) += 1;
            }
        }
    }
    counts
}

fn contains(hay: &Bits, needle: &Bits) -> bool {
    hay.len() >= needle.len() && (0..=hay.len() - needle.len()).any(|i| hay.slice(i, i + needle.len()) == *needle)
}

/// Repeating substrings become mask proposals, keeping only those not inside
/// a longer repeating one. Absent strings of the shortest length that has
/// any become proposals for new markers.
pub fn detector_scan(window: &[Bits], params: DetectorParams) -> DetectorReport {
    let counts = count_all(window, params.min_len.max(1));
    let frequent: Vec<(&Bits, &usize)> = counts.iter().filter(|(_, c)| **c >= params.repeats).collect();
    let masks = frequent
        .iter()
        .filter(|(p, _)| !frequent.iter().any(|(q, _)| q.len() > p.len() && contains(q, p)))
        .map(|(p, c)| MaskProposal { pattern: (*p).clone(), count: **c })
        .collect();
    let longest = window.iter().map(Bits::len).max().unwrap_or(0);
    let mut fresh = Vec::new();
    let mut len = params.min_len.max(1);
    while fresh.is_empty() && len <= longest.max(params.min_len) + 1 && len < 24 {
        for v in 0..(1u64 << len) {
            let s: Bits = (0..len).rev().map(|b| v >> b & 1 == 1).collect();
            if !window.iter().any(|f| contains(f, &s)) {
                fresh.push(s);
                if fresh.len() >= params.fresh {
                    break;
                }
            }
        }
        len += 1;
    }
    DetectorReport { masks, fresh }
}

/// Patches fixed by a decision and waiting for control data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pending {
    pub patches: Vec<Patch>,
    pub rollback: Rollback,
    /// Test forms the patches were trained on.
    pub samples: Vec<Bits>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlEvent {
    pub tick: u64,
    pub polarity: Polarity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Disposition {
    Fixed { patches: usize },
    RolledBack { patches: usize },
    Idle,
}

/// Pleasure keeps every pending patch and reinforces the generator. Pain
/// undoes them, newest first, and the discriminator learns their samples as
/// negatives.
pub fn apply_control(
    event: Option<ControlEvent>,
    pending: &mut Vec<Pending>,
    generator: &mut dyn GeneratorStrategy,
    discriminator: &mut dyn DiscriminatorStrategy,
    memory: &mut MemoryTree,
) -> Disposition {
    let Some(event) = event else { return Disposition::Idle };
    let patches = pending.iter().map(|p| p.patches.len()).sum();
    match event.polarity {
        Polarity::Pleasure => {
            for p in pending.drain(..) {
                for s in &p.samples {
                    generator.reinforce(s, Polarity::Pleasure);
                }
            }
            Disposition::Fixed { patches }
        }
        Polarity::Pain => {
            for p in pending.drain(..).rev() {
                *memory = rollback(memory, &p.rollback);
                for s in &p.samples {
                    discriminator.reinforce(s, Polarity::Pain);
                }
            }
            Disposition::RolledBack { patches }
        }
    }
}

/// Emotions region content: presence, applied or dropped, and a two-bit
/// patch count.
pub fn emotion_bits(d: Disposition) -> Bits {
    let (present, applied, n) = match d {
        Disposition::Fixed { patches } => (true, true, patches),
        Disposition::RolledBack { patches } => (true, false, patches),
        Disposition::Idle => (false, false, 0),
    };
    let mut b = Bits::new();
    b.push(present);
    b.push(applied);
    b.push(n & 2 != 0);
    b.push(n & 1 != 0);
    b
}
