use layerlex::bits::Bits;
use layerlex::bitspace::{blocks_disjoint, Block, Layer, Mask, Region};
use layerlex::Error;
use proptest::prelude::*;

fn layer(s: &str) -> Layer {
    Layer::from_bits(s.parse().unwrap()).unwrap()
}

fn mask(entries: &[(usize, bool)]) -> Mask {
    Mask::from_entries(entries.iter().copied()).unwrap()
}

// Every offset o with o + span <= len whose constants agree, written as a
// string comparison so it shares nothing with the engine.
fn scan_all(layer: &str, pattern: &str) -> Vec<usize> {
    let l: Vec<char> = layer.chars().collect();
    let p: Vec<char> = pattern.chars().collect();
    if p.len() > l.len() {
        return vec![];
    }
    (0..=l.len() - p.len())
        .filter(|&o| p.iter().enumerate().all(|(i, c)| *c == '?' || *c == l[o + i]))
        .collect()
}

// Left-to-right cover: at each position try patterns from longest to
// shortest, first index winning among equals.
fn cover_by_hand(layer: &str, patterns: &[&str]) -> Vec<(usize, usize, usize)> {
    let mut order: Vec<usize> = (0..patterns.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(patterns[i].len()));
    let mut out = vec![];
    let mut pos = 0;
    while pos < layer.len() {
        let rest = &layer[pos..];
        let hit = order.iter().find(|&&i| {
            let p = patterns[i];
            p.len() <= rest.len() && p.chars().zip(rest.chars()).all(|(a, b)| a == '?' || a == b)
        });
        match hit {
            Some(&i) => {
                out.push((pos, pos + patterns[i].len() - 1, i));
                pos += patterns[i].len();
            }
            None => pos += 1,
        }
    }
    out
}

#[test]
fn make_layer_examples() {
    assert_eq!(Layer::new(4).unwrap().bits().to_string(), "0000");
    assert_eq!(Layer::new(1).unwrap().bits().to_string(), "0");
    assert!(matches!(Layer::new(0), Err(Error::InvalidArgument(_))));
}

#[test]
fn write_points_examples() {
    let l = Layer::new(4).unwrap();
    assert_eq!(l.write_points(&[(1, true), (3, true)]).unwrap().bits().to_string(), "0101");
    let l = layer("0101");
    assert_eq!(l.write_points(&[]).unwrap().bits().to_string(), "0101");
    assert!(matches!(Layer::new(2).unwrap().write_points(&[(5, true)]), Err(Error::Address { .. })));
}

#[test]
fn detect_mask_examples() {
    assert_eq!(layer("101101").detect_mask(&mask(&[(0, true), (2, true)])), vec![0, 3]);
    assert_eq!(scan_all("101101", "1?1"), vec![0, 3]);
    assert!(layer("000").detect_mask(&mask(&[(0, true)])).is_empty());
    assert!(layer("10").detect_mask(&mask(&[(0, true), (3, false)])).is_empty());
}

#[test]
fn cover_examples() {
    let a = mask(&[(0, true), (1, true)]);
    let blocks = layer("1111").cover(std::slice::from_ref(&a));
    assert_eq!(blocks, vec![Block { begin: 0, end: 1, mask_id: 0 }, Block { begin: 2, end: 3, mask_id: 0 }]);
    assert!(layer("0000").cover(&[mask(&[(0, true)])]).is_empty());
    let blocks = layer("111").cover(&[mask(&[(0, true)]), a]);
    assert_eq!(blocks, vec![Block { begin: 0, end: 1, mask_id: 1 }, Block { begin: 2, end: 2, mask_id: 0 }]);
    assert_eq!(cover_by_hand("111", &["1", "11"]), vec![(0, 1, 1), (2, 2, 0)]);
}

#[test]
fn read_block_examples() {
    assert_eq!(layer("10110").read_block(&Block { begin: 1, end: 3, mask_id: 0 }).unwrap().to_string(), "011");
    assert_eq!(layer("1").read_block(&Block { begin: 0, end: 0, mask_id: 0 }).unwrap().to_string(), "1");
    assert!(matches!(layer("10").read_block(&Block { begin: 1, end: 5, mask_id: 0 }), Err(Error::Address { .. })));
}

#[test]
fn excite_examples() {
    let m = mask(&[(0, true), (1, true)]);
    let (l, r) = Layer::new(4).unwrap().excite_mask(&m, 2, &[]).unwrap();
    assert_eq!(l.bits().to_string(), "0011");
    assert_eq!(r, Region::new(2, 3));
    assert!(l.detect_mask(&m).is_empty());
    assert!(matches!(l.excite_mask(&m, 3, &[]), Err(Error::Overlap { .. }) | Err(Error::Address { .. })));
    // A clean overlap without running off the end.
    let (l, _) = Layer::new(6).unwrap().excite_mask(&m, 2, &[]).unwrap();
    assert!(matches!(l.excite_mask(&m, 3, &[]), Err(Error::Overlap { .. })));
}

#[test]
fn excite_refuses_existing_block() {
    let m = mask(&[(0, true)]);
    let occupied = [Block { begin: 1, end: 2, mask_id: 0 }];
    assert!(matches!(Layer::new(4).unwrap().excite_mask(&m, 2, &occupied), Err(Error::Overlap { .. })));
}

fn pattern_strategy() -> impl Strategy<Value = String> {
    (1usize..=6)
        .prop_flat_map(|n| proptest::collection::vec(prop_oneof![Just('0'), Just('1'), Just('?')], n))
        .prop_map(|v| {
            let mut s: String = v.into_iter().collect();
            // The span is the last constant plus one, and a mask needs one.
            while s.ends_with('?') {
                s.pop();
            }
            if s.is_empty() {
                s.push('1');
            }
            s
        })
}

fn layer_strategy() -> impl Strategy<Value = String> {
    proptest::collection::vec(prop_oneof![Just('0'), Just('1')], 1..=16).prop_map(|v| v.into_iter().collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn detect_matches_scan(l in layer_strategy(), p in pattern_strategy()) {
        let m: Mask = p.parse().unwrap();
        prop_assert_eq!(layer(&l).detect_mask(&m), scan_all(&l, &p));
    }

    #[test]
    fn cover_matches_hand_cover(l in layer_strategy(), ps in proptest::collection::vec(pattern_strategy(), 1..4)) {
        let masks: Vec<Mask> = ps.iter().map(|p| p.parse().unwrap()).collect();
        let refs: Vec<&str> = ps.iter().map(String::as_str).collect();
        let got: Vec<(usize, usize, usize)> = layer(&l).cover(&masks).iter().map(|b| (b.begin, b.end, b.mask_id)).collect();
        prop_assert_eq!(got, cover_by_hand(&l, &refs));
    }

    #[test]
    fn cover_disjoint_idempotent_and_avoids_excitation(
        l in layer_strategy(),
        ps in proptest::collection::vec(pattern_strategy(), 1..4),
        at in 0usize..16,
    ) {
        let masks: Vec<Mask> = ps.iter().map(|p| p.parse().unwrap()).collect();
        let base = layer(&l);
        let mut lay = base.clone();
        if let Ok((x, _)) = base.excite_mask(&masks[0], at, &[]) {
            lay = x;
        }
        let blocks = lay.cover(&masks);
        prop_assert!(blocks_disjoint(&blocks));
        prop_assert_eq!(&blocks, &lay.cover(&masks));
        for b in &blocks {
            for r in lay.excited() {
                prop_assert!(!b.region().intersects(r));
            }
        }
    }

    #[test]
    fn excite_then_read_reproduces_mask(p in pattern_strategy(), extra in 0usize..6, at in 0usize..6) {
        let m: Mask = p.parse().unwrap();
        let len = m.span() + extra + at;
        let (l, r) = Layer::new(len).unwrap().excite_mask(&m, at, &[]).unwrap();
        let got: Bits = l.read_region(r).unwrap();
        for (i, v) in m.entries() {
            prop_assert_eq!(got.get(i), Some(v));
        }
    }
}
