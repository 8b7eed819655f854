use std::io::Write;

use fermat_quad::curves::{root_discriminant, CurveK};
use fermat_quad::obstructions::*;
use fermat_quad::parallel::Executor;
use fermat_quad::quadfield::QuadField;
use fermat_quad::sieve::{
    build_ring, eliminated_classes, target_traces, trace_match_set, SieveConfig, TripleResidue,
};
use fermat_quad::Error;

#[test]
fn triples_satisfy_invariants() {
    let recs = builtin_curves().unwrap();
    let exec = Executor::new(4).unwrap();
    for d in [5, 17] {
        let k = QuadField::new(d).unwrap();
        let triples = obstructive_triples(&recs, d, Window::default(), &exec).unwrap();
        assert!(!triples.is_empty());
        for t in &triples {
            assert!((&(&t.a + &t.b) + &t.c).is_zero());
            for (x, y) in [(&t.a, &t.b), (&t.b, &t.c), (&t.a, &t.c)] {
                assert!(k.gcd(x, y).unwrap().is_unit());
            }
            let src = recs.iter().find(|r| r.label == t.source).unwrap();
            assert!(t.frey().same_j(&src.curve).unwrap(), "{}", t.source);
            // 16 (abc)^2 / Δ is the twelfth power of an S-unit: its norm is ± a power of 2^12
            let frey = root_discriminant(&[k.zero(), t.a.clone(), -&t.b]);
            let src_disc = root_discriminant(&src.roots);
            let (big, small) = if frey.height() >= src_disc.height() {
                (&frey, &src_disc)
            } else {
                (&src_disc, &frey)
            };
            let ratio = big.div_exact(small).expect("ratio is integral");
            let n = ratio.norm().magnitude().clone();
            assert!(n.count_ones() == 1 && n.trailing_zeros().unwrap() % 12 == 0);
        }
        // no two outputs differ by a unit square
        for (i, x) in triples.iter().enumerate() {
            for y in &triples[i + 1..] {
                assert!(!same_up_to_unit_square(&k, x, y));
            }
        }
    }
}

#[test]
fn reductions_land_in_trace_match_set() {
    let recs = builtin_curves().unwrap();
    let exec = Executor::sequential();
    for d in [5, 17] {
        let triples = obstructive_triples(&recs, d, Window::default(), &exec).unwrap();
        let cfg = SieveConfig::new(d, 3).unwrap();
        let ring = build_ring(&cfg).unwrap();
        let targets = target_traces(&cfg, &ring).unwrap();
        let (_, matched) = trace_match_set(&ring, &targets, &exec);
        for t in &triples {
            let comps = ring
                .components()
                .iter()
                .map(|c| [&t.a, &t.b, &t.c].map(|x| c.prime().reduce(x)))
                .collect();
            let res = TripleResidue::new(comps);
            assert!(matched.contains(&res));
        }
    }
}

#[test]
fn cross_check_and_saturation() {
    let recs = builtin_curves().unwrap();
    let exec = Executor::new(4).unwrap();
    for d in [5, 17] {
        let triples = obstructive_triples(&recs, d, Window::default(), &exec).unwrap();
        let reports: Vec<_> = [1, 3]
            .iter()
            .map(|&r| eliminated_classes(&SieveConfig::new(d, r).unwrap(), &exec).unwrap())
            .collect();
        let cc = cross_check(&triples, &reports).unwrap();
        assert!(cc.consistent, "{cc:?}");
        assert!(
            saturation(&recs, d, Window::default(), &exec)
                .unwrap()
                .stable
        );

        // without any triples every surviving class is an inconsistency
        let empty = cross_check(&[], &reports).unwrap();
        assert!(!empty.consistent);
        let surviving: usize = reports
            .iter()
            .map(|r| r.classes.iter().filter(|c| !c.eliminated).count())
            .sum();
        assert_eq!(empty.violations.len(), surviving);
    }
}

#[test]
fn target_curve_alone_misses_surviving_classes_for_d5() {
    // the 2-isogenous member supplies the triples that survive for d = 5
    let recs: Vec<CurveRecord> = builtin_curves()
        .unwrap()
        .into_iter()
        .filter(|r| r.label == "Q5-P3-a1")
        .collect();
    let exec = Executor::new(4).unwrap();
    let triples = obstructive_triples(&recs, 5, Window::default(), &exec).unwrap();
    let reports: Vec<_> = [1, 3]
        .iter()
        .map(|&r| eliminated_classes(&SieveConfig::new(5, r).unwrap(), &exec).unwrap())
        .collect();
    let cc = cross_check(&triples, &reports).unwrap();
    assert!(!cc.violations.is_empty());
    assert!(cc.violations.iter().all(|v| !v.eliminated));
}

#[test]
fn ingest_from_file() {
    let dir = std::env::temp_dir().join(format!("fermat-quad-ingest-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("curves.jsonl");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(
        f,
        r#"{{"label": "Q17-2-a1", "d": 17, "conductor": "2", "roots": [[0, 0], [5, -2], [9, -5]]}}"#
    )
    .unwrap();
    writeln!(f).unwrap();
    writeln!(f, r#"{{"label": "Q17-2-a2", "d": 17, "conductor": "2", "roots": [[0, 0], [-28, 13], [0, 1]]}}"#).unwrap();
    drop(f);
    let recs = ingest_curves(&path).unwrap();
    assert_eq!(recs.len(), 2);
    assert_eq!(recs[0].isogeny_class(), recs[1].isogeny_class());

    // a non-isogenous curve placed in the same class is rejected
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(
        f,
        r#"{{"label": "X-a1", "d": 5, "conductor": "2^3", "roots": [[0, 0], [-12, 8], [-13, 8]]}}"#
    )
    .unwrap();
    writeln!(
        f,
        r#"{{"label": "X-a2", "d": 5, "conductor": "2^3", "roots": [[0, 0], [1, 0], [-1, 0]]}}"#
    )
    .unwrap();
    drop(f);
    assert!(matches!(
        ingest_curves(&path),
        Err(Error::InvalidInstance(_))
    ));

    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(
        f,
        r#"{{"label": "X-a1", "d": 5, "conductor": "2^3", "roots": [[0, 0], [-12, 8], [-13, 8]]}}"#
    )
    .unwrap();
    writeln!(
        f,
        r#"{{"label": "X-a2", "d": 5, "conductor": "2^3", "roots": [[0, 0], [1.5, 0], [-1, 0]]}}"#
    )
    .unwrap();
    drop(f);
    assert!(matches!(
        ingest_curves(&path),
        Err(Error::Schema { line: 2, .. })
    ));

    assert!(matches!(
        ingest_curves(&dir.join("missing.jsonl")),
        Err(Error::Io(_))
    ));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn frey_of_transformed_roots_is_isomorphic() {
    let recs = builtin_curves().unwrap();
    let k = QuadField::new(17).unwrap();
    let rec = &recs[2];
    for t in find_triples(rec, Window::new(3), &Executor::sequential()).unwrap() {
        let frey = CurveK::frey(&t.a, &t.b);
        assert!(frey.same_j(&rec.curve).unwrap());
        assert_eq!(t.parity.len(), k.primes_above_two().unwrap().len());
    }
}
