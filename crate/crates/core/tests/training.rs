use std::sync::Arc;

use layerlex::basis_file::parse_basis;
use layerlex::bits::Bits;
use layerlex::classes::ClassId;
use layerlex::decisions::{fix_memory, generate_patches, DecisionConfig};
use layerlex::memory::MemoryTree;
use layerlex::packer::{reader_pool, KeyKind, PackBudget, PackProblem};
use layerlex::profile::OptionProfile;
use layerlex::stack::Stack;
use layerlex::store::ClassStore;
use layerlex::training::{
    apply_control, detector_scan, emotion_bits, fitness, genetic_search, imaginator_generate, ControlEvent,
    DetectorParams, DiscriminatorStrategy, Disposition, FrequencyGenerator, GaParams, GeneratorStrategy,
    NgramDiscriminator, Pending, Polarity,
};
use layerlex::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Members at indices 1 and 2 differ in two bits, so crossovers of their
// forms are new.
const NESTED: &str = "
class X
  mask 111111
end
class A
  mask 11
end
class B
  mask 101
end
class E
  sentence A B
end
class F
  sentence E
end
";

const LEN: usize = 48;

fn b(s: &str) -> Bits {
    s.parse().unwrap()
}

fn nested_memory() -> MemoryTree {
    let bf = parse_basis(NESTED, 5).unwrap();
    let mut m = MemoryTree::new(ClassStore::new(Arc::clone(&bf.basis), 5).unwrap());
    let mut f = Bits::zeros(LEN);
    for i in [0, 1, 3, 5] {
        f.set(i, true);
    }
    let mut st = Stack::new(4, LEN).unwrap();
    let t = st.tick(&f, &mut m.store).unwrap();
    m.observe(&t, &OptionProfile::default(), 8);
    m
}

struct Reject;

impl DiscriminatorStrategy for Reject {
    fn name(&self) -> &'static str {
        "reject"
    }
    fn judge(&self, _: &Bits) -> bool {
        false
    }
    fn learn(&mut self, _: &Bits) {}
    fn reinforce(&mut self, _: &Bits, _: Polarity) {}
}

struct Accept;

impl DiscriminatorStrategy for Accept {
    fn name(&self) -> &'static str {
        "accept"
    }
    fn judge(&self, _: &Bits) -> bool {
        true
    }
    fn learn(&mut self, _: &Bits) {}
    fn reinforce(&mut self, _: &Bits, _: Polarity) {}
}

// Returns a fixed list regardless of input.
struct Canned(Vec<Bits>);

impl GeneratorStrategy for Canned {
    fn name(&self) -> &'static str {
        "canned"
    }
    fn generate(&mut self, _: &[Bits]) -> Vec<Bits> {
        self.0.clone()
    }
    fn reinforce(&mut self, _: &Bits, _: Polarity) {}
}

// Samples whose every position where all children agree carries that value.
fn fits(children: &[Bits], s: &Bits) -> bool {
    s.len() == children[0].len()
        && (0..s.len()).all(|p| {
            let v = children[0].get(p);
            !children.iter().all(|c| c.get(p) == v) || s.get(p) == v
        })
}

#[test]
fn imaginator_needs_a_context_above() {
    let m = nested_memory();
    let top = ClassId(4);
    let r = imaginator_generate(top, &m, &mut FrequencyGenerator::new(8), &Accept);
    assert!(matches!(r, Err(Error::Scope(_))));
}

#[test]
fn imaginator_keeps_mask_covered_and_passed_samples() {
    let m = nested_memory();
    let e = ClassId(3);
    let children = m.observed_reprs(e).unwrap();
    let mut oracle_gen = FrequencyGenerator::new(8);
    let expect: Vec<Bits> = oracle_gen.generate(&children).into_iter().filter(|s| fits(&children, s)).collect();
    let t = imaginator_generate(e, &m, &mut FrequencyGenerator::new(8), &Accept).unwrap();
    assert!(!expect.is_empty());
    assert_eq!(t.samples_for(e), expect);

    let empty = imaginator_generate(e, &m, &mut FrequencyGenerator::new(8), &Reject).unwrap();
    assert!(empty.is_empty());

    // One sample breaks a position both children agree on.
    let good = children[0].clone();
    let mut bad = good.clone();
    bad.set(0, !bad.get(0).unwrap());
    let t = imaginator_generate(e, &m, &mut Canned(vec![bad, good.clone()]), &Accept).unwrap();
    assert_eq!(t.samples_for(e), vec![good]);
}

fn one_reader_problem() -> PackProblem {
    let reprs = vec![b("0010"), b("0110")];
    PackProblem::new(ClassId(0), reprs.clone(), reprs).unwrap()
}

#[test]
fn ga_finds_single_reader_optimum() {
    let p = one_reader_problem();
    let ops = OptionProfile::default().spontaneous();
    let budget = PackBudget::default();
    let pool: Vec<_> = reader_pool(&p, ops, budget).into_iter().map(|(r, _)| r).collect();
    // Exhaustive over single readers.
    let best_single = (0..pool.len()).map(|i| fitness(&p, &pool, &[i], &p.reprs, ops, budget).regenerated).max().unwrap();
    assert_eq!(best_single, p.reprs.len());
    let mut hits = 0;
    for seed in 0..100 {
        let r = genetic_search(&p, &p.reprs, ops, KeyKind::Qualities, budget, GaParams { seed, ..GaParams::default() });
        assert!(r.best_fitness.windows(2).all(|w| w[0] <= w[1]));
        if r.ranked[0].fitness == best_single {
            hits += 1;
            let c = r.best.as_ref().unwrap();
            assert!(c.operations().iter().all(|op| ops.contains(*op)));
        }
    }
    assert!(hits >= 95, "{hits} of 100");
}

#[test]
fn ga_zero_generations_keeps_initial_ranking() {
    let p = one_reader_problem();
    let ops = OptionProfile::default().spontaneous();
    let params = GaParams { generations: 0, seed: 4, ..GaParams::default() };
    let r = genetic_search(&p, &p.reprs, ops, KeyKind::Qualities, PackBudget::default(), params);
    assert_eq!(r.best_fitness.len(), 1);
    assert_eq!(r.ranked.len(), params.population);
}

#[test]
fn ga_monotone_on_random_problems() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..30 {
        let n = rng.gen_range(2..=4);
        let reprs: Vec<Bits> = (0..n).map(|_| (0..6).map(|_| rng.gen::<bool>()).collect()).collect();
        let p = PackProblem::new(ClassId(0), reprs.clone(), reprs).unwrap();
        for pr in [OptionProfile::default(), OptionProfile::all(layerlex::profile::Gender::Male)[15]] {
            let r = genetic_search(&p, &p.reprs, pr.spontaneous(), KeyKind::Qualities, PackBudget::default(), GaParams::default());
            assert!(r.best_fitness.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}

// Substring counts by direct string search.
fn count_in(window: &[&str], pat: &str) -> usize {
    window.iter().map(|w| (0..=w.len().saturating_sub(pat.len())).filter(|&i| w[i..].starts_with(pat)).count()).sum()
}

#[test]
fn detector_examples() {
    let window = ["101"; 5];
    let bits: Vec<Bits> = window.iter().map(|s| b(s)).collect();
    let r = detector_scan(&bits, DetectorParams::default());
    assert_eq!(r.masks.len(), 1);
    assert_eq!(r.masks[0].pattern, b("101"));
    assert_eq!(r.masks[0].count, count_in(&window, "101"));

    let distinct = ["000", "111", "010", "101"];
    let r = detector_scan(&distinct.map(b), DetectorParams::default());
    assert!(r.masks.is_empty());
    assert!(!r.fresh.is_empty());
    for f in &r.fresh {
        assert_eq!(count_in(&distinct, &f.to_string()), 0);
    }
}

#[test]
fn detector_fresh_never_in_window() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let window: Vec<String> = (0..rng.gen_range(1..6)).map(|_| (0..rng.gen_range(3..10)).map(|_| if rng.gen() { '1' } else { '0' }).collect()).collect();
        let refs: Vec<&str> = window.iter().map(String::as_str).collect();
        let bits: Vec<Bits> = refs.iter().map(|s| b(s)).collect();
        let r = detector_scan(&bits, DetectorParams::default());
        for f in &r.fresh {
            assert_eq!(count_in(&refs, &f.to_string()), 0);
        }
        for m in &r.masks {
            assert!(count_in(&refs, &m.pattern.to_string()) >= 3);
        }
    }
}

fn pending_chain(m: &MemoryTree) -> (MemoryTree, Pending) {
    let tree = generate_patches(m, &OptionProfile::default(), &DecisionConfig::default()).unwrap();
    let chain = tree.chain(tree.leaves()[0]);
    let (fixed, rb) = fix_memory(m, &chain).unwrap();
    (fixed, Pending { patches: chain, rollback: rb, samples: vec![b("000000010000")] })
}

#[test]
fn pleasure_keeps_patches_and_reinforces() {
    let m = nested_memory();
    let (mut fixed, p) = pending_chain(&m);
    assert_eq!(p.patches.len(), 2);
    let mut pending = vec![p];
    let mut g = FrequencyGenerator::new(4);
    let mut d = NgramDiscriminator::new(2);
    let snapshot = fixed.clone();
    let out = apply_control(Some(ControlEvent { tick: 3, polarity: Polarity::Pleasure }), &mut pending, &mut g, &mut d, &mut fixed);
    assert_eq!(out, Disposition::Fixed { patches: 2 });
    assert_eq!(g.reinforced, 1);
    assert!(pending.is_empty());
    assert_eq!(fixed, snapshot);
    assert_eq!(emotion_bits(out).to_string(), "1110");
}

#[test]
fn pain_rolls_back_and_trains_negative() {
    let m = nested_memory();
    let (mut fixed, p) = pending_chain(&m);
    let sample = p.samples[0].clone();
    let mut pending = vec![p];
    let mut g = FrequencyGenerator::new(4);
    let mut d = NgramDiscriminator::new(2);
    d.learn(&sample);
    assert!(d.judge(&sample));
    let out = apply_control(Some(ControlEvent { tick: 3, polarity: Polarity::Pain }), &mut pending, &mut g, &mut d, &mut fixed);
    assert_eq!(out, Disposition::RolledBack { patches: 2 });
    assert_eq!(fixed.fingerprint(), m.fingerprint());
    assert_eq!(d.negatives.len(), 1);
    assert!(!d.judge(&sample));
    assert_eq!(g.reinforced, 0);
}

#[test]
fn no_event_leaves_pending() {
    let m = nested_memory();
    let (mut fixed, p) = pending_chain(&m);
    let mut pending = vec![p];
    let before = fixed.clone();
    let out = apply_control(None, &mut pending, &mut FrequencyGenerator::new(4), &mut NgramDiscriminator::new(2), &mut fixed);
    assert_eq!(out, Disposition::Idle);
    assert_eq!(pending.len(), 1);
    assert_eq!(fixed, before);
    assert_eq!(emotion_bits(out).to_string(), "0000");
}
