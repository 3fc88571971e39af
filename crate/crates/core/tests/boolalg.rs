use std::collections::{BTreeMap, BTreeSet};

use layerlex::bits::Bits;
use layerlex::boolalg::{
    deserialize_predicate, serialize_adjective, serialize_verb, ActionOp, AdjectivePredicate, Predicate, PredicateKind,
    QualityId, Var, VerbPredicate, ZhegalkinPoly,
};
use layerlex::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn poly(s: &str) -> ZhegalkinPoly {
    s.parse().unwrap()
}

fn table_of(p: &ZhegalkinPoly, n: usize) -> Vec<bool> {
    (0..1usize << n).map(|a| p.eval_bits(&(0..n).map(|i| a >> i & 1 == 1).collect::<Vec<_>>()).unwrap()).collect()
}

fn table_bits(code: u64, n: usize) -> Bits {
    (0..1usize << n).map(|k| code >> k & 1 == 1).collect()
}

#[test]
fn eval_examples() {
    let or = poly("x0 + x1 + x0*x1");
    assert!(or.eval_bits(&[true, false]).unwrap());
    assert!(!ZhegalkinPoly::zero().eval_bits(&[true, true]).unwrap());
    assert!(ZhegalkinPoly::one().eval_bits(&[]).unwrap());
    assert!(matches!(poly("x3").eval_bits(&[true]), Err(Error::InvalidArgument(_))));
}

#[test]
fn composition_examples() {
    let p = poly("x0*x2 + x1");
    assert!(p.xor(&p).is_zero());
    assert_eq!(p.and(&ZhegalkinPoly::one()), p);
    let xy = poly("x0").and(&poly("x1"));
    assert_eq!(xy.monomial_count(), 1);
    assert_eq!(table_of(&xy, 2), vec![false, false, false, true]);
}

#[test]
fn truth_table_examples() {
    let or: Bits = "0111".parse().unwrap();
    assert_eq!(ZhegalkinPoly::from_truth_table(&or).unwrap(), poly("x0 + x1 + x0*x1"));
    assert!(ZhegalkinPoly::from_truth_table(&"0000".parse().unwrap()).unwrap().is_zero());
    assert_eq!(ZhegalkinPoly::from_truth_table(&"01".parse().unwrap()).unwrap(), poly("x0"));
    assert!(ZhegalkinPoly::from_truth_table(&"011".parse().unwrap()).is_err());
}

#[test]
fn every_function_of_three_vars_round_trips() {
    for code in 0u64..256 {
        let t = table_bits(code, 3);
        let p = ZhegalkinPoly::from_truth_table(&t).unwrap();
        assert_eq!(table_of(&p, 3), t.as_slice());
    }
}

#[test]
fn sampled_four_var_functions_and_compositions() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10_000 {
        let (a, b) = (rng.gen::<u16>() as u64, rng.gen::<u16>() as u64);
        let (ta, tb) = (table_bits(a, 4), table_bits(b, 4));
        let (p, q) = (ZhegalkinPoly::from_truth_table(&ta).unwrap(), ZhegalkinPoly::from_truth_table(&tb).unwrap());
        assert_eq!(table_of(&p, 4), ta.as_slice());
        let x: Vec<bool> = ta.iter().zip(tb.iter()).map(|(u, v)| u ^ v).collect();
        let y: Vec<bool> = ta.iter().zip(tb.iter()).map(|(u, v)| u & v).collect();
        assert_eq!(table_of(&p.xor(&q), 4), x);
        assert_eq!(table_of(&p.and(&q), 4), y);
    }
}

#[test]
fn pointwise_equal_means_identical_monomials() {
    // Two routes to the same function: OR via the identity and via De Morgan.
    let direct = poly("x0 + x1 + x0*x1");
    let not = |p: &ZhegalkinPoly| p.xor(&ZhegalkinPoly::one());
    let demorgan = not(&not(&poly("x0")).and(&not(&poly("x1"))));
    assert_eq!(direct, demorgan);
}

#[test]
fn spontaneous_closure_reaches_fixed_point() {
    for op in ["xor", "and"] {
        let mut set: BTreeSet<ZhegalkinPoly> = [poly("x0"), poly("x1*x2"), poly("x0 + x2 + 1")].into_iter().collect();
        let mut rounds = 0;
        loop {
            let mut next = set.clone();
            for p in &set {
                for q in &set {
                    next.insert(if op == "xor" { p.xor(q) } else { p.and(q) });
                }
            }
            if next == set {
                break;
            }
            set = next;
            rounds += 1;
            assert!(rounds <= 256, "{op} closure did not settle");
        }
        assert!(set.len() <= 256);
    }
}

#[test]
fn adjective_round_trip_and_canonical() {
    let a = AdjectivePredicate::new(poly("x1*x3 + x0"), QualityId(7)).unwrap();
    let bits = serialize_adjective(&a).unwrap();
    assert_eq!(deserialize_predicate(&bits, PredicateKind::Adjective).unwrap(), Predicate::Adjective(a.clone()));
    let again = AdjectivePredicate::new(poly("x0 + x3*x1"), QualityId(7)).unwrap();
    assert_eq!(serialize_adjective(&again).unwrap(), bits);
}

#[test]
fn constant_zero_adjective_is_shortest() {
    // Argument count, a one-entry operation table, the quality id.
    let a = AdjectivePredicate::new(ZhegalkinPoly::zero(), QualityId(1)).unwrap();
    let bits = serialize_adjective(&a).unwrap();
    assert_eq!(bits.len(), 4 + 1 + 32);
    assert_eq!(bits.get(4), Some(false));
}

#[test]
fn verb_round_trip() {
    let v = VerbPredicate::new(poly("q3*x2 + q9 + 1"), 5, ActionOp::And);
    let bits = serialize_verb(&v).unwrap();
    assert_eq!(deserialize_predicate(&bits, PredicateKind::Verb).unwrap(), Predicate::Verb(v));
}

#[test]
fn empty_string_is_decode_error() {
    assert!(matches!(deserialize_predicate(&Bits::new(), PredicateKind::Adjective), Err(Error::Decode(_))));
    assert!(matches!(deserialize_predicate(&Bits::new(), PredicateKind::Verb), Err(Error::Decode(_))));
}

#[test]
fn noise_never_panics() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10_000 {
        let noise: Bits = (0..64).map(|_| rng.gen::<bool>()).collect();
        for kind in [PredicateKind::Adjective, PredicateKind::Verb] {
            if let Ok(p) = deserialize_predicate(&noise, kind) {
                let back = match &p {
                    Predicate::Adjective(a) => serialize_adjective(a).unwrap(),
                    Predicate::Verb(v) => serialize_verb(v).unwrap(),
                };
                assert_eq!(back, noise);
            }
        }
    }
}

fn arb_poly(vars: usize) -> impl Strategy<Value = ZhegalkinPoly> {
    proptest::bits::u64::between(0, 1 << vars).prop_map(move |code| {
        ZhegalkinPoly::from_truth_table(&table_bits(code, vars)).unwrap()
    })
}

proptest! {
    #[test]
    fn eval_agrees_with_assignment_map(p in arb_poly(4), a in 0usize..16) {
        let bits: Vec<bool> = (0..4).map(|i| a >> i & 1 == 1).collect();
        let map: BTreeMap<Var, bool> = bits.iter().enumerate().map(|(i, b)| (Var::Bit(i), *b)).collect();
        prop_assert_eq!(p.eval(&map).unwrap(), p.eval_bits(&bits).unwrap());
    }

    #[test]
    fn display_parse_round_trip(p in arb_poly(4)) {
        prop_assert_eq!(p.to_string().parse::<ZhegalkinPoly>().unwrap(), p);
    }

    #[test]
    fn adjective_serialization_round_trips(p in arb_poly(4), q in 0u32..1000) {
        let a = AdjectivePredicate::new(p, QualityId(q)).unwrap();
        let bits = serialize_adjective(&a).unwrap();
        prop_assert_eq!(deserialize_predicate(&bits, PredicateKind::Adjective).unwrap(), Predicate::Adjective(a));
    }
}
