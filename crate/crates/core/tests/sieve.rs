use std::collections::BTreeSet;

use fermat_quad::curves::CurveFF;
use fermat_quad::finitefield::{FFElem, FiniteField};
use fermat_quad::parallel::Executor;
use fermat_quad::sieve::*;

const CONFIGS: [(i64, u32); 4] = [(5, 1), (5, 3), (17, 1), (17, 3)];

fn naive_trace(f: &FiniteField, a: FFElem, b: FFElem) -> i64 {
    let e = CurveFF::frey(f, a, b).unwrap();
    f.order() as i64 + 1 - e.count_points_naive() as i64
}

fn is_prime(n: u64) -> bool {
    n >= 2
        && (2..n)
            .take_while(|k| k * k <= n)
            .all(|k| !n.is_multiple_of(k))
}

/// Per-prime restatement of the bound: `p` survives if every auxiliary component admits a residue
/// triple that either matches the target trace or has a branch quantity divisible by `p`, and at
/// least one component uses a non-matching triple.
fn bound_oracle(ring: &ResidueRing, targets: &[i64]) -> BTreeSet<u64> {
    struct Comp {
        matchable: bool,
        // branch quantities of the non-matching primitive triples
        quantities: Vec<i64>,
    }
    let comps: Vec<Comp> = ring
        .components()
        .iter()
        .zip(targets)
        .map(|(c, &target)| {
            let f = c.field();
            let q = f.order() as i64;
            let mut comp = Comp {
                matchable: false,
                quantities: Vec::new(),
            };
            for a in f.elements() {
                for b in f.elements() {
                    let cc = f.neg(f.add(a, b));
                    let zeros = [a, b, cc].iter().filter(|x| x.is_zero()).count();
                    if zeros == 0 {
                        let t = naive_trace(f, a, b);
                        if t == target {
                            comp.matchable = true;
                        } else {
                            comp.quantities.push(t - target);
                        }
                    } else if zeros == 1 {
                        comp.quantities.push((target - (q + 1)) * (target + q + 1));
                    }
                }
            }
            comp
        })
        .collect();
    (2..200u64)
        .filter(|&p| is_prime(p))
        .filter(|&p| {
            let hit: Vec<bool> = comps
                .iter()
                .map(|c| c.quantities.iter().any(|&x| x % p as i64 == 0))
                .collect();
            comps.iter().zip(&hit).all(|(c, &h)| c.matchable || h) && hit.iter().any(|&h| h)
        })
        .collect()
}

#[test]
fn exponent_bound_matches_per_prime_oracle() {
    let exec = Executor::sequential();
    let expected: [&[u64]; 4] = [&[2, 3], &[2, 3, 5], &[2, 3], &[2, 3, 5, 7]];
    for ((d, r), want) in CONFIGS.into_iter().zip(expected) {
        let cfg = SieveConfig::new(d, r).unwrap();
        let ring = build_ring(&cfg).unwrap();
        let targets = target_traces(&cfg, &ring).unwrap();
        let got: Vec<u64> = exponent_bound(&ring, &targets, &exec).into_iter().collect();
        let t: Vec<i64> = targets.iter().map(|t| t.trace).collect();
        let oracle: Vec<u64> = bound_oracle(&ring, &t).into_iter().collect();
        assert_eq!(got, oracle, "({d}, {r})");
        assert_eq!(got, want, "({d}, {r})");
    }
}

#[test]
fn target_traces_by_point_enumeration() {
    for (d, r, want) in [(5, 3, [2, 10]), (17, 3, [-2, 14])] {
        let cfg = SieveConfig::new(d, r).unwrap();
        let ring = build_ring(&cfg).unwrap();
        let curve = cfg.target_curve().unwrap();
        for (c, w) in ring.components().iter().zip(want) {
            let red = curve.reduce(c.prime()).unwrap();
            let q = c.field().order() as i64;
            let t = q + 1 - red.count_points_naive() as i64;
            assert_eq!(t, w);
            assert!(t * t <= 4 * q);
        }
        let recs = target_traces(&cfg, &ring).unwrap();
        assert_eq!(recs.iter().map(|t| t.trace).collect::<Vec<_>>(), want);
    }
}

#[test]
fn trace_match_membership_by_direct_count() {
    let exec = Executor::sequential();
    for (d, r) in CONFIGS {
        let cfg = SieveConfig::new(d, r).unwrap();
        let ring = build_ring(&cfg).unwrap();
        let targets = target_traces(&cfg, &ring).unwrap();
        let (per_comp, triples) = trace_match_set(&ring, &targets, &exec);
        for ((c, t), matched) in ring.components().iter().zip(&targets).zip(&per_comp) {
            let f = c.field();
            let mut expect = Vec::new();
            for a in f.elements() {
                for b in f.elements() {
                    let cc = f.neg(f.add(a, b));
                    if !a.is_zero()
                        && !b.is_zero()
                        && !cc.is_zero()
                        && naive_trace(f, a, b) == t.trace
                    {
                        expect.push([a, b, cc]);
                    }
                }
            }
            assert_eq!(matched, &expect);
        }
        assert_eq!(
            triples.len(),
            per_comp.iter().map(|m| m.len()).product::<usize>()
        );
        assert!(triples.iter().all(|t| t.is_unit() && t.sums_to_zero(&ring)));
    }
    // (1, 1, 1) sums to zero in characteristic 3
    let cfg = SieveConfig::new(5, 1).unwrap();
    let ring = build_ring(&cfg).unwrap();
    let f = ring.components()[0].field();
    let one = f.one();
    let targets = target_traces(&cfg, &ring).unwrap();
    let (per_comp, _) = trace_match_set(&ring, &targets, &exec);
    assert_eq!(
        per_comp[0].contains(&[one, one, one]),
        naive_trace(f, one, one) == targets[0].trace
    );
}

#[test]
fn matched_counts() {
    let exec = Executor::sequential();
    let want: [&[usize]; 4] = [&[24], &[24, 288], &[24], &[24, 72]];
    for ((d, r), w) in CONFIGS.into_iter().zip(want) {
        let rep = eliminated_classes(&SieveConfig::new(d, r).unwrap(), &exec).unwrap();
        assert_eq!(rep.matched_per_component, w);
        assert_eq!(rep.trace_matched_triples, w.iter().product::<usize>());
    }
}

#[test]
fn table_sieve_agrees_with_direct_symbols() {
    let exec = Executor::new(4).unwrap();
    for (d, r) in CONFIGS {
        let cfg = SieveConfig::new(d, r).unwrap();
        let rep = eliminated_classes(&cfg, &exec).unwrap();
        assert_eq!(
            rep.eliminated_r_star,
            eliminated_classes_direct(&cfg).unwrap(),
            "({d}, {r})"
        );
    }
}

#[test]
fn conjugate_omega_leaves_results_unchanged() {
    let exec = Executor::new(4).unwrap();
    for (d, r) in CONFIGS {
        let cfg = SieveConfig::new(d, r).unwrap();
        let a = eliminated_classes(&cfg, &exec).unwrap();
        let b = eliminated_classes(&cfg.clone().with_conjugate_omega(true), &exec).unwrap();
        assert_ne!(
            build_ring(&cfg).unwrap().components()[0]
                .prime()
                .omega_image(),
            build_ring(&cfg.clone().with_conjugate_omega(true))
                .unwrap()
                .components()[0]
                .prime()
                .omega_image()
        );
        assert_eq!(a.eliminated_r_star, b.eliminated_r_star);
        assert_eq!(a.bound_primes, b.bound_primes);
        assert_eq!(a.matched_per_component, b.matched_per_component);
    }
}

#[test]
fn eliminated_sets_are_unions_of_collapsed_classes() {
    let exec = Executor::new(4).unwrap();
    for (d, r) in CONFIGS {
        let cfg = SieveConfig::new(d, r).unwrap();
        let rep = eliminated_classes(&cfg, &exec).unwrap();
        let m = rep.collapsed.modulus;
        assert_eq!(cfg.group_order % m, 0);
        let lifted: Vec<u64> = cfg
            .r_star_range()
            .into_iter()
            .filter(|x| rep.collapsed.residues.contains(&(x % m)))
            .collect();
        assert_eq!(lifted, rep.eliminated_r_star);
        // no proper divisor of the collapsed modulus works
        for k in (1..m).filter(|k| m.is_multiple_of(*k)) {
            assert_ne!(collapse(&rep.eliminated_r_star, cfg.group_order).modulus, k);
        }
    }
}

#[test]
fn r3_for_d17_projects_to_r1_classes() {
    let exec = Executor::new(4).unwrap();
    let r1 = eliminated_classes(&SieveConfig::new(17, 1).unwrap(), &exec).unwrap();
    let r3 = eliminated_classes(&SieveConfig::new(17, 3).unwrap(), &exec).unwrap();
    let proj: BTreeSet<u64> = r3.eliminated_r_star.iter().map(|x| x % 8).collect();
    assert_eq!(proj.into_iter().collect::<Vec<_>>(), r1.eliminated_r_star);
}

#[test]
fn combined_statements() {
    let exec = Executor::new(4).unwrap();
    let t5 = theorem_report(5, &exec).unwrap();
    assert_eq!(t5.modulus, 48);
    assert_eq!(t5.classes[0].modulus, 8);
    assert_eq!(t5.classes[0].residues, [5, 7]);
    assert_eq!(t5.classes[1].modulus, 48);
    assert_eq!(t5.classes[1].residues, [19, 41]);
    assert_eq!((t5.covered_unit_classes, t5.total_unit_classes), (10, 16));
    assert_eq!(t5.density(), (5, 8));
    assert!(t5.notes.iter().any(|n| n.contains("p = 5")));

    let t17 = theorem_report(17, &exec).unwrap();
    assert_eq!(t17.classes.len(), 1);
    assert_eq!(t17.classes[0].modulus, 8);
    assert_eq!(t17.classes[0].residues, [5, 7]);
    assert_eq!(t17.density(), (1, 2));
    assert_eq!(
        t17.open_classes
            .iter()
            .map(|x| x % 8)
            .collect::<BTreeSet<_>>(),
        BTreeSet::from([1, 3])
    );
}

#[test]
fn worker_count_does_not_change_reports() {
    for (d, r) in CONFIGS {
        let cfg = SieveConfig::new(d, r).unwrap();
        let base = eliminated_classes(&cfg, &Executor::sequential()).unwrap();
        for jobs in [2, 3, 8] {
            assert_eq!(
                eliminated_classes(&cfg, &Executor::new(jobs).unwrap()).unwrap(),
                base
            );
        }
    }
}

#[test]
fn unsupported_configs() {
    assert!(SieveConfig::new(13, 1).is_err());
    assert!(SieveConfig::new(5, 5).is_err());
    let mut cfg = SieveConfig::new(5, 1).unwrap();
    cfg.r = 2;
    assert!(build_ring(&cfg).is_err());
}
