use layerlex::basis_file::SpeechDirection;
use layerlex::bits::Bits;
use layerlex::bitspace::{Mask, Region};
use layerlex::boolalg::{ActionOp, AdjectivePredicate, BoolOp, QualityId, Var, VerbPredicate, ZhegalkinPoly};
use layerlex::classes::{ClassId, ClassOp, PredicateTarget, Provenance, SimpleClass};
use layerlex::io::{
    decode_failure, failure_report, invoke_nonspontaneous, qualifies_conditioning, run_conditioning,
    ConditioningClass, Qualification, RegionMap, RunStatus, SpeechRouter, Stereotype, StereotypeEvent,
};
use layerlex::oracle::{dfa_simulate, DfaOutcome};
use layerlex::profile::OptionProfile;
use layerlex::Error;
use proptest::prelude::*;

fn adj(s: &str, q: u32) -> AdjectivePredicate {
    AdjectivePredicate::new(s.parse().unwrap(), QualityId(q)).unwrap()
}

fn verb(s: &str, at: usize) -> VerbPredicate {
    VerbPredicate::new(s.parse().unwrap(), at, ActionOp::Xor)
}

fn class(mask: &str, adjs: Vec<AdjectivePredicate>, verbs: Vec<VerbPredicate>) -> SimpleClass {
    SimpleClass::basis(mask.parse().unwrap(), adjs, verbs, 0).unwrap()
}

fn bits(s: &str) -> Bits {
    s.parse().unwrap()
}

// Two input bits and one state bit. The mask only asks the state to be
// clear; the verb latches the AND of both inputs into it.
fn pair_detector() -> ConditioningClass {
    let c = class("??0", vec![adj("x0*x1", 1)], vec![verb("q1", 2)]);
    ConditioningClass::new(ClassId(0), c, 2, Region::new(40, 40)).unwrap()
}

// The same automaton written out as a table: state 0 moves to 1 on "11".
fn pair_by_hand(frames: &[&str]) -> (bool, Vec<bool>) {
    let mut state = false;
    let mut seen = vec![];
    for f in frames {
        if state {
            return (false, seen);
        }
        state = *f == "11";
        seen.push(state);
    }
    (true, seen)
}

#[test]
fn qualification_examples() {
    assert_eq!(qualifies_conditioning(&class("11", vec![adj("x0", 1)], vec![verb("q1", 1)])), Qualification::Yes);
    assert_eq!(
        qualifies_conditioning(&class("11", vec![adj("x0", 1)], vec![verb("q9", 1)])),
        Qualification::ExternalQuality(QualityId(9))
    );
    assert_eq!(qualifies_conditioning(&class("1", vec![], vec![])), Qualification::Yes);
    let foreign = class("11", vec![], vec![verb("q2", 0)]);
    assert!(matches!(
        ConditioningClass::new(ClassId(1), foreign, 1, Region::new(40, 40)),
        Err(Error::Forbidden(_))
    ));
}

#[test]
fn pair_detector_matches_table() {
    let r = pair_detector();
    let frames = ["01", "11"];
    let run = run_conditioning(&r, &frames.map(bits), 0).unwrap();
    assert_eq!(run.status, RunStatus::Detected { unloaded: None });
    assert_eq!(run.states.last().unwrap().to_string(), "1");
    let (ok, seen) = pair_by_hand(&frames);
    assert!(ok);
    assert_eq!(run.states.iter().map(|s| s.get(0).unwrap()).collect::<Vec<_>>(), seen);
    match dfa_simulate(&r, &frames.map(bits), 0).unwrap() {
        DfaOutcome::Detected { states } => assert_eq!(states, run.states),
        other => panic!("{other:?}"),
    }
}

#[test]
fn never_matching_fails_at_first_frame() {
    let c = class("111", vec![], vec![]);
    let r = ConditioningClass::new(ClassId(2), c, 2, Region::new(40, 40)).unwrap();
    let run = run_conditioning(&r, &[bits("00"), bits("11")], 0).unwrap();
    assert_eq!(run.status, RunStatus::Failed { frame: 0 });
    assert!(run.states.is_empty());
}

#[test]
fn stereotype_reports_failure_and_unloads() {
    let mut s = Stereotype::new(4);
    s.upload(pair_detector());
    let mut f = Bits::zeros(48);
    f.set(0, true);
    f.set(1, true);
    assert!(s.step(&mut f, 0).unwrap().is_empty());
    assert_eq!(f.get(40), Some(true));
    // The state bit is now set, so the mask rejects the next frame.
    let ev = s.step(&mut f, 1).unwrap();
    assert_eq!(ev, vec![StereotypeEvent::Failed { class: ClassId(0), tick: 1, frame: 1 }]);
    assert!(s.running.is_empty());
    assert_eq!(decode_failure(&failure_report(ClassId(0), 1)), Some((0, 1)));

    let mut s = Stereotype::new(2);
    s.upload(pair_detector());
    let mut f = Bits::zeros(48);
    s.step(&mut f, 0).unwrap();
    assert_eq!(s.step(&mut f, 1).unwrap(), vec![StereotypeEvent::Unloaded { class: ClassId(0), tick: 1 }]);
}

#[test]
fn router_examples() {
    let mut r = SpeechRouter::new(RegionMap::new(48).unwrap());
    let a = r.route(SpeechDirection::Internal, ClassId(1)).unwrap();
    assert_eq!(a.region, r.map.internal);
    assert!(matches!(r.route(SpeechDirection::Internal, ClassId(2)), Err(Error::Busy(1))));
    let e = r.route(SpeechDirection::External, ClassId(3)).unwrap();
    assert_eq!(e.region, r.map.output);
    assert!(!a.region.intersects(&e.region));
}

#[test]
fn regions_partition_the_layer() {
    for len in [33, 48, 64, 200] {
        let m = RegionMap::new(len).unwrap();
        assert!(m.is_partition());
        let rs = m.regions();
        for i in 0..rs.len() {
            for j in i + 1..rs.len() {
                assert!(!rs[i].1.intersects(&rs[j].1), "{} and {}", rs[i].0, rs[j].0);
            }
        }
    }
    assert!(RegionMap::new(32).is_err());
}

#[test]
fn nonspontaneous_only_through_internal_speech() {
    let c = class("111", vec![adj("x0", 1), adj("x1", 2)], vec![verb("q1", 0), verb("q2 + x2", 2)]);
    let logic = OptionProfile::default();
    let mut r = SpeechRouter::new(RegionMap::new(48).unwrap());
    let internal = r.route(SpeechDirection::Internal, ClassId(0)).unwrap();
    let external = r.route(SpeechDirection::External, ClassId(0)).unwrap();

    let and = ClassOp::Predicate { target: PredicateTarget::Verb, op: BoolOp::And, l: 0, m: 1 };
    let d = invoke_nonspontaneous(&c, and, &internal, &logic).unwrap();
    assert_eq!(d.verbs.len(), 3);
    assert_eq!(d.origin.steps.last().unwrap().provenance, Provenance::InternalSpeech);
    assert!(matches!(invoke_nonspontaneous(&c, and, &external, &logic), Err(Error::Forbidden(_))));

    // A spontaneous request lands exactly where the engine path would.
    let xor = ClassOp::Predicate { target: PredicateTarget::Verb, op: BoolOp::Xor, l: 0, m: 1 };
    let via_speech = invoke_nonspontaneous(&c, xor, &internal, &logic).unwrap();
    assert_eq!(via_speech, c.apply(xor, Provenance::Engine).unwrap());
}

// Frame-by-frame evaluation written against the mask text and monomials.
fn step_by_hand(c: &SimpleClass, window: &mut Vec<bool>) -> bool {
    for (i, v) in c.noun.mask.entries() {
        if window[i] != v {
            return false;
        }
    }
    let eval = |p: &ZhegalkinPoly, w: &[bool], q: &[(QualityId, bool)]| {
        p.monomials().fold(false, |acc, m| {
            acc ^ m.vars().iter().all(|v| match v {
                Var::Bit(i) => w[*i],
                Var::Quality(id) => q.iter().find(|(k, _)| k == id).map(|(_, b)| *b).unwrap(),
            })
        })
    };
    let q: Vec<(QualityId, bool)> = c.adjectives.iter().map(|a| (a.output, eval(&a.poly, window, &[]))).collect();
    for v in &c.verbs {
        window[v.action_point] = eval(&v.poly, window, &q);
    }
    true
}

fn arb_conditioning() -> impl Strategy<Value = (ConditioningClass, Vec<Bits>)> {
    (1usize..=3, 1usize..=2)
        .prop_filter("at most four bits", |(i, s)| i + s <= 4)
        .prop_flat_map(|(iw, sw)| {
            let span = iw + sw;
            (
                Just((iw, sw)),
                proptest::collection::vec(prop_oneof![Just('0'), Just('1'), Just('?')], span - 1),
                any::<bool>(),
                proptest::collection::vec(0u64..(1u64 << (1 << span)), 1..=2),
                proptest::collection::vec((0usize..sw, 0usize..4), 0..=2),
                proptest::collection::vec(proptest::collection::vec(any::<bool>(), iw), 1..30),
            )
        })
        .prop_map(|((iw, sw), head, last, tables, verbs, frames)| {
            let span = iw + sw;
            let mut text: String = head.into_iter().collect();
            text.push(if last { '1' } else { '0' });
            let mask: Mask = text.parse().unwrap();
            let adjs: Vec<AdjectivePredicate> = tables
                .iter()
                .enumerate()
                .map(|(k, t)| {
                    let tt: Bits = (0..1usize << span).map(|a| t >> a & 1 == 1).collect();
                    AdjectivePredicate::new(ZhegalkinPoly::from_truth_table(&tt).unwrap(), QualityId(k as u32 + 1)).unwrap()
                })
                .collect();
            let vs: Vec<VerbPredicate> = verbs
                .into_iter()
                .map(|(at, pick)| {
                    let poly = match pick {
                        0 => ZhegalkinPoly::quality(QualityId(1)),
                        1 => ZhegalkinPoly::bit(0),
                        2 => ZhegalkinPoly::quality(QualityId(1)).xor(&ZhegalkinPoly::bit(iw + at)),
                        _ => ZhegalkinPoly::one(),
                    };
                    VerbPredicate::new(poly, iw + at, ActionOp::Xor)
                })
                .collect();
            let c = SimpleClass::basis(mask, adjs, vs, 0).unwrap();
            let r = ConditioningClass::new(ClassId(0), c, iw, Region::new(40, 40 + sw - 1)).unwrap();
            (r, frames.into_iter().map(|f| f.into_iter().collect()).collect())
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn small_classes_behave_as_automata((r, frames) in arb_conditioning()) {
        let run = run_conditioning(&r, &frames, 0).unwrap();
        let dfa = dfa_simulate(&r, &frames, 0).unwrap();
        let mut state = vec![false; r.state_width()];
        let mut seen = vec![];
        let mut failed = None;
        for (i, f) in frames.iter().enumerate() {
            let mut w: Vec<bool> = f.iter().chain(state.iter().copied()).collect();
            if !step_by_hand(&r.class, &mut w) {
                failed = Some(i);
                break;
            }
            state = w[r.input_width..].to_vec();
            seen.push(state.iter().copied().collect::<Bits>());
        }
        prop_assert_eq!(&run.states, &seen);
        match (failed, &run.status, dfa) {
            (None, RunStatus::Detected { .. }, DfaOutcome::Detected { states }) => prop_assert_eq!(states, seen),
            (Some(i), RunStatus::Failed { frame }, DfaOutcome::Failed { frame: g, states }) => {
                prop_assert_eq!(*frame, i);
                prop_assert_eq!(g, i);
                prop_assert_eq!(states, seen);
            }
            (a, b, c) => prop_assert!(false, "disagree: {:?} {:?} {:?}", a, b, c),
        }
    }
}
