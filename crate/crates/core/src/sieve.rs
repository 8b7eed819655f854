//! Exhaustive residue sieve over `k = O_K / 3` or `O_K / 21`: trace matching against the
//! target curve, the reciprocity symbol for each exponent class, and the exponent bound.

use std::collections::{BTreeMap, BTreeSet};

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::curves::{frey_trace, CurveK, TraceRecord};
use crate::error::{Error, Result};
use crate::finitefield::{FFElem, FiniteField};
use crate::obstructions::builtin_curves;
use crate::parallel::Executor;
use crate::quadfield::{factor_u64, PrimeIdeal, QuadField};
use crate::symbols::constraint_values;

/// Label of the target curve in the bundled data for each supported field.
fn target_label(d: i64) -> Option<&'static str> {
    match d {
        5 => Some("Q5-P3-a1"),
        17 => Some("Q17-2-a1"),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SieveConfig {
    pub d: i64,
    pub r: u32,
    pub aux_primes: Vec<u64>,
    pub group_order: u64,
    pub target_label: String,
    /// Encode residues with the other root of `x^2 - x - m` as the image of `ω`.
    #[serde(default)]
    pub conjugate_omega: bool,
}

impl SieveConfig {
    pub fn new(d: i64, r: u32) -> Result<Self> {
        let label = target_label(d).ok_or(Error::UnsupportedConfig { d, r })?;
        let aux_primes = match r {
            1 => vec![3],
            3 => vec![3, 7],
            _ => return Err(Error::UnsupportedConfig { d, r }),
        };
        let group_order = aux_primes.iter().map(|p| p * p - 1).product();
        Ok(SieveConfig {
            d,
            r,
            aux_primes,
            group_order,
            target_label: label.to_string(),
            conjugate_omega: false,
        })
    }

    pub fn with_conjugate_omega(mut self, on: bool) -> Self {
        self.conjugate_omega = on;
        self
    }

    pub fn target_curve(&self) -> Result<CurveK> {
        builtin_curves()?
            .into_iter()
            .find(|c| c.label == self.target_label)
            .map(|c| c.curve)
            .ok_or_else(|| Error::UnknownCurve(self.target_label.clone()))
    }

    /// Exponent classes tested: units modulo the group order.
    pub fn r_star_range(&self) -> Vec<u64> {
        (1..self.group_order)
            .filter(|x| x.gcd(&self.group_order) == 1)
            .collect()
    }

    /// The exponent `R` applied to `ε` for the class `R*`.
    pub fn exponent_for(&self, r_star: u64) -> u64 {
        if self.r == 1 {
            r_star
        } else {
            mod_inverse(r_star, self.group_order).expect("unit class")
        }
    }
}

fn mod_inverse(a: u64, m: u64) -> Option<u64> {
    let e = (a as i64).extended_gcd(&(m as i64));
    (e.gcd == 1).then(|| e.x.rem_euclid(m as i64) as u64)
}

/// One factor `F_{q^2}` of `k`, with the image of `ζ_r` there.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResidueComponent {
    prime: PrimeIdeal,
    zeta_image: FFElem,
}

impl ResidueComponent {
    pub fn prime(&self) -> &PrimeIdeal {
        &self.prime
    }

    pub fn field(&self) -> &FiniteField {
        self.prime.residue_field()
    }

    pub fn zeta_image(&self) -> FFElem {
        self.zeta_image
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResidueRing {
    d: i64,
    r: u32,
    components: Vec<ResidueComponent>,
}

impl ResidueRing {
    pub fn components(&self) -> &[ResidueComponent] {
        &self.components
    }

    /// `#k^×`.
    pub fn unit_group_order(&self) -> u64 {
        self.components
            .iter()
            .map(|c| c.field().order() - 1)
            .product()
    }

    pub fn d(&self) -> i64 {
        self.d
    }

    pub fn r(&self) -> u32 {
        self.r
    }
}

/// Image of `ζ_3` at the primes above 3 and 7 of `1 - 4ζ_3`: the solution of `4w ≡ 1`, which
/// must also be a root of `x^2 + x + 1`.
fn zeta3_image(p: u64) -> u64 {
    let w = mod_inverse(4, p).expect("p odd");
    assert_eq!(
        (w * w + w + 1) % p,
        0,
        "1 - 4ζ_3 is not divisible by a prime above {p}"
    );
    w
}

/// `N(1 - 4ζ_3)` over `Q(ζ_3)`, as `x^2 - xy + y^2` for `x + yζ`.
pub fn norm_one_minus_four_zeta3() -> i64 {
    let (x, y) = (1i64, -4i64);
    x * x - x * y + y * y
}

pub fn build_ring(cfg: &SieveConfig) -> Result<ResidueRing> {
    let field = QuadField::new(cfg.d)?;
    if target_label(cfg.d).is_none() || !matches!(cfg.r, 1 | 3) {
        return Err(Error::UnsupportedConfig { d: cfg.d, r: cfg.r });
    }
    if cfg.r == 3 {
        // (1 - 4ζ_3) O_L = P_3 Q_7 with residue fields F_9 and F_49
        let n = norm_one_minus_four_zeta3();
        assert_eq!(n * n, 441);
        assert_eq!(n * n, 9 * 49);
    }
    let mut components = Vec::new();
    for &p in &cfg.aux_primes {
        let primes = field.split_prime(p)?;
        if primes.len() != 1 || primes[0].residue_degree() != 2 {
            return Err(Error::UnsupportedConfig { d: cfg.d, r: cfg.r });
        }
        let mut prime = primes.into_iter().next().expect("one prime");
        if cfg.conjugate_omega {
            prime = prime.with_conjugate_omega();
        }
        let f = prime.residue_field();
        let zeta_image = if cfg.r == 1 {
            f.one()
        } else {
            f.from_int(zeta3_image(p) as i64)
        };
        components.push(ResidueComponent { prime, zeta_image });
    }
    Ok(ResidueRing {
        d: cfg.d,
        r: cfg.r,
        components,
    })
}

/// Componentwise residues `(a', b', c')`, one triple per factor of `k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TripleResidue {
    comps: Vec<[FFElem; 3]>,
}

impl TripleResidue {
    pub fn new(comps: Vec<[FFElem; 3]>) -> Self {
        TripleResidue { comps }
    }

    pub fn components(&self) -> &[[FFElem; 3]] {
        &self.comps
    }

    pub fn is_unit(&self) -> bool {
        self.comps.iter().all(|c| c.iter().all(|x| !x.is_zero()))
    }

    /// Whether `a' + b' + c' = 0` in every component.
    pub fn sums_to_zero(&self, ring: &ResidueRing) -> bool {
        self.comps.iter().zip(ring.components()).all(|(c, comp)| {
            let f = comp.field();
            f.add(f.add(c[0], c[1]), c[2]).is_zero()
        })
    }
}

pub fn target_traces(cfg: &SieveConfig, ring: &ResidueRing) -> Result<Vec<TraceRecord>> {
    let curve = cfg.target_curve()?;
    ring.components()
        .iter()
        .map(|c| {
            let t = curve.trace_at(c.prime()).map_err(|_| Error::BadReduction {
                label: cfg.target_label.clone(),
                p: c.prime().p(),
            })?;
            Ok(TraceRecord::new(c.prime(), t))
        })
        .collect()
}

/// Frey traces for all `(a', b')` with `a', b', c'` units, indexed by field index.
#[derive(Debug, Clone)]
pub struct TraceTable {
    q: usize,
    traces: Vec<Option<i64>>,
}

impl TraceTable {
    pub fn build(f: &FiniteField, exec: &Executor) -> Self {
        let q = f.order() as usize;
        let rows: Vec<usize> = (0..q).collect();
        let traces = exec
            .map(&rows, |&i| {
                let a = f.from_index(i);
                (0..q)
                    .map(|j| {
                        let b = f.from_index(j);
                        let c = f.neg(f.add(a, b));
                        if a.is_zero() || b.is_zero() || c.is_zero() {
                            None
                        } else {
                            frey_trace(f, a, b).ok()
                        }
                    })
                    .collect::<Vec<_>>()
            })
            .concat();
        TraceTable { q, traces }
    }

    pub fn get(&self, f: &FiniteField, a: FFElem, b: FFElem) -> Option<i64> {
        self.traces[f.index(a) * self.q + f.index(b)]
    }
}

/// Unit triples in one component whose Frey trace equals `target`, in field-index order.
fn component_matches(f: &FiniteField, table: &TraceTable, target: i64) -> Vec<[FFElem; 3]> {
    let mut out = Vec::new();
    for a in f.elements() {
        for b in f.elements() {
            if table.get(f, a, b) == Some(target) {
                out.push([a, b, f.neg(f.add(a, b))]);
            }
        }
    }
    out
}

pub fn trace_match_set(
    ring: &ResidueRing,
    targets: &[TraceRecord],
    exec: &Executor,
) -> (Vec<Vec<[FFElem; 3]>>, Vec<TripleResidue>) {
    let per_comp: Vec<Vec<[FFElem; 3]>> = ring
        .components()
        .iter()
        .zip(targets)
        .map(|(c, t)| component_matches(c.field(), &TraceTable::build(c.field(), exec), t.trace))
        .collect();
    let mut triples = vec![TripleResidue::new(vec![])];
    for comp in &per_comp {
        triples = triples
            .into_iter()
            .flat_map(|t| {
                comp.iter().map(move |x| {
                    let mut c = t.comps.clone();
                    c.push(*x);
                    TripleResidue::new(c)
                })
            })
            .collect();
    }
    (per_comp, triples)
}

/// Smallest modulus `m | G` such that the set is a union of full classes mod `m` in `Z/G`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Collapse {
    pub modulus: u64,
    pub residues: Vec<u64>,
}

pub fn collapse(set: &[u64], g: u64) -> Collapse {
    let members: BTreeSet<u64> = set.iter().copied().collect();
    let mut divisors: Vec<u64> = (1..=g).filter(|m| g.is_multiple_of(*m)).collect();
    divisors.sort_unstable();
    for m in divisors {
        // x mod m is the representative of x's class in Z/G
        let closed = (0..g).all(|x| members.contains(&x) == members.contains(&(x % m)));
        if closed {
            let residues: BTreeSet<u64> = members.iter().map(|x| x % m).collect();
            return Collapse {
                modulus: m,
                residues: residues.into_iter().collect(),
            };
        }
    }
    unreachable!("m = G always works")
}

/// Primes `p` for which the trace/vanishing branches give no contradiction.
pub fn exponent_bound(
    ring: &ResidueRing,
    targets: &[TraceRecord],
    exec: &Executor,
) -> BTreeSet<u64> {
    // per component: the prime sets of each non-matching state
    let mut states: Vec<BTreeSet<BTreeSet<u64>>> = Vec::new();
    let mut matchable = Vec::new();
    for (comp, target) in ring.components().iter().zip(targets) {
        let f = comp.field();
        let table = TraceTable::build(f, exec);
        let q = f.order() as i64;
        let mut sets = BTreeSet::new();
        let mut has_match = false;
        for a in f.elements() {
            for b in f.elements() {
                let c = f.neg(f.add(a, b));
                let zeros = [a, b, c].iter().filter(|x| x.is_zero()).count();
                match zeros {
                    0 => {
                        let t = table.get(f, a, b).expect("unit triple");
                        if t == target.trace {
                            has_match = true;
                        } else {
                            sets.insert(prime_set((t - target.trace).abs()));
                        }
                    }
                    // one vanishing component: p | (a_q(E) - (q + 1))(a_q(E) + (q + 1))
                    1 => {
                        let mut s = prime_set((target.trace - (q + 1)).abs());
                        s.extend(prime_set((target.trace + q + 1).abs()));
                        sets.insert(s);
                    }
                    // not primitive: two of a, b, c divisible by the same prime
                    _ => {}
                }
            }
        }
        states.push(sets);
        matchable.push(has_match);
    }
    // combine: one state per component, not all matching
    let mut bound = BTreeSet::new();
    let n = states.len();
    for mask in 0u32..(1 << n) {
        // bit set: component in a non-matching state
        if mask == 0 {
            continue;
        }
        if (0..n).any(|i| mask & (1 << i) == 0 && !matchable[i]) {
            continue;
        }
        let chosen: Vec<&BTreeSet<BTreeSet<u64>>> = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| &states[i])
            .collect();
        let mut acc: Vec<Option<BTreeSet<u64>>> = vec![None];
        for sets in chosen {
            let mut next = Vec::new();
            for partial in &acc {
                for s in sets {
                    next.push(Some(match partial {
                        None => s.clone(),
                        Some(p) => p.intersection(s).copied().collect(),
                    }));
                }
            }
            acc = next;
        }
        for s in acc.into_iter().flatten() {
            bound.extend(s);
        }
    }
    bound
}

fn prime_set(n: i64) -> BTreeSet<u64> {
    factor_u64(n as u64).into_iter().map(|(p, _)| p).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassOutcome {
    pub r_star: u64,
    pub exponent: u64,
    pub passing_triples: usize,
    pub eliminated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SieveReport {
    pub config: SieveConfig,
    pub unit_group_order: u64,
    pub target_traces: Vec<TraceRecord>,
    pub matched_per_component: Vec<usize>,
    pub trace_matched_triples: usize,
    pub eliminated_r_star: Vec<u64>,
    pub collapsed: Collapse,
    pub bound_primes: Vec<u64>,
    pub classes: Vec<ClassOutcome>,
}

/// Index-based lookup tables for one component: `x ↦ x^R` is applied per class.
struct ComponentTables {
    q: usize,
    chi: Vec<i8>,
    /// `ε = xy / z^2` for each role of each matched triple, as field indices.
    eps: Vec<[usize; 3]>,
}

fn component_tables(f: &FiniteField, matches: &[[FFElem; 3]]) -> ComponentTables {
    let eps = matches
        .iter()
        .map(|t| {
            let mut out = [0usize; 3];
            for (role, slot) in out.iter_mut().enumerate() {
                let (x, y, z) = (t[role], t[(role + 1) % 3], t[(role + 2) % 3]);
                let e = f.mul(f.mul(x, y), f.inverse(f.square(z)).expect("unit"));
                *slot = f.index(e);
            }
            out
        })
        .collect();
    ComponentTables {
        q: f.order() as usize,
        chi: f.chi_table(),
        eps,
    }
}

/// Number of matched triples passing all three roles for the exponent `R`.
fn count_passing(ring: &ResidueRing, tables: &[ComponentTables], exponent: u64) -> usize {
    // value table per component: index of ε ↦ chi(ε^R - ζ^R)
    let values: Vec<Vec<i8>> = ring
        .components()
        .iter()
        .zip(tables)
        .map(|(c, t)| {
            let f = c.field();
            let z = f.pow(c.zeta_image(), exponent);
            (0..t.q)
                .map(|i| t.chi[f.index(f.sub(f.pow(f.from_index(i), exponent), z))])
                .collect()
        })
        .collect();
    let sizes: Vec<usize> = tables.iter().map(|t| t.eps.len()).collect();
    let total: usize = sizes.iter().product();
    let mut passing = 0;
    let mut idx = vec![0usize; tables.len()];
    for _ in 0..total {
        let ok = (0..3).all(|role| {
            let v: i8 = tables
                .iter()
                .zip(&values)
                .zip(&idx)
                .map(|((t, val), &i)| val[t.eps[i][role]])
                .product();
            v != -1
        });
        if ok {
            passing += 1;
        }
        // odometer, last component fastest
        for k in (0..idx.len()).rev() {
            idx[k] += 1;
            if idx[k] < sizes[k] {
                break;
            }
            idx[k] = 0;
        }
    }
    passing
}

pub fn eliminated_classes(cfg: &SieveConfig, exec: &Executor) -> Result<SieveReport> {
    let ring = build_ring(cfg)?;
    let targets = target_traces(cfg, &ring)?;
    let (per_comp, triples) = trace_match_set(&ring, &targets, exec);
    let tables: Vec<ComponentTables> = ring
        .components()
        .iter()
        .zip(&per_comp)
        .map(|(c, m)| component_tables(c.field(), m))
        .collect();
    let range = cfg.r_star_range();
    let classes: Vec<ClassOutcome> = exec.map(&range, |&r_star| {
        let exponent = cfg.exponent_for(r_star);
        let passing_triples = count_passing(&ring, &tables, exponent);
        ClassOutcome {
            r_star,
            exponent,
            passing_triples,
            eliminated: passing_triples == 0,
        }
    });
    let eliminated: Vec<u64> = classes
        .iter()
        .filter(|c| c.eliminated)
        .map(|c| c.r_star)
        .collect();
    let bound = exponent_bound(&ring, &targets, exec);
    Ok(SieveReport {
        config: cfg.clone(),
        unit_group_order: ring.unit_group_order(),
        target_traces: targets,
        matched_per_component: per_comp.iter().map(Vec::len).collect(),
        trace_matched_triples: triples.len(),
        collapsed: collapse(&eliminated, cfg.group_order),
        eliminated_r_star: eliminated,
        bound_primes: bound.into_iter().collect(),
        classes,
    })
}

/// Direct evaluation of the elimination test through [`constraint_values`], one triple at a
/// time; slower than the table path and used to validate it.
pub fn eliminated_classes_direct(cfg: &SieveConfig) -> Result<Vec<u64>> {
    let exec = Executor::sequential();
    let ring = build_ring(cfg)?;
    let targets = target_traces(cfg, &ring)?;
    let (_, triples) = trace_match_set(&ring, &targets, &exec);
    Ok(cfg
        .r_star_range()
        .into_iter()
        .filter(|&r_star| {
            let e = cfg.exponent_for(r_star);
            !triples
                .iter()
                .any(|t| constraint_values(&ring, e, t).iter().all(|&v| v != -1))
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CongruenceSet {
    pub modulus: u64,
    pub residues: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub d: i64,
    pub modulus: u64,
    pub classes: Vec<CongruenceSet>,
    pub covered_unit_classes: usize,
    pub total_unit_classes: usize,
    pub open_classes: Vec<u64>,
    pub bound_primes: Vec<u64>,
    pub notes: Vec<String>,
}

impl TheoremReport {
    /// Density of covered exponents among primes, as `(covered, total)` unit classes.
    pub fn density(&self) -> (usize, usize) {
        let g = self.covered_unit_classes.gcd(&self.total_unit_classes);
        (self.covered_unit_classes / g, self.total_unit_classes / g)
    }
}

/// Combined statement from the `r = 1` and `r = 3` sieves.
pub fn theorem_report(d: i64, exec: &Executor) -> Result<TheoremReport> {
    let r1 = eliminated_classes(&SieveConfig::new(d, 1)?, exec)?;
    let r3 = eliminated_classes(&SieveConfig::new(d, 3)?, exec)?;
    Ok(combine_reports(&r1, &r3))
}

pub fn combine_reports(r1: &SieveReport, r3: &SieveReport) -> TheoremReport {
    let m1 = r1.config.group_order;
    let m3 = r3.collapsed.modulus;
    let modulus = m1.lcm(&m3);
    let units: Vec<u64> = (1..modulus).filter(|x| x.gcd(&modulus) == 1).collect();
    let by_r1 = |x: u64| r1.eliminated_r_star.contains(&(x % m1));
    let by_r3 = |x: u64| r3.collapsed.residues.contains(&(x % m3));
    let covered: BTreeSet<u64> = units
        .iter()
        .copied()
        .filter(|&x| by_r1(x) || by_r3(x))
        .collect();

    // classes mod m1 all of whose unit lifts are covered
    let coarse: Vec<u64> = (1..m1)
        .filter(|x| x.gcd(&m1) == 1)
        .filter(|&x| {
            units
                .iter()
                .filter(|&&u| u % m1 == x)
                .all(|u| covered.contains(u))
        })
        .collect();
    let fine: Vec<u64> = covered
        .iter()
        .copied()
        .filter(|x| !coarse.contains(&(x % m1)))
        .collect();
    let mut classes = vec![CongruenceSet {
        modulus: m1,
        residues: coarse.clone(),
    }];
    if !fine.is_empty() {
        classes.push(CongruenceSet {
            modulus,
            residues: fine,
        });
    }
    let open: Vec<u64> = units
        .iter()
        .copied()
        .filter(|x| !covered.contains(x))
        .collect();

    let mut bound: BTreeSet<u64> = r1.bound_primes.iter().copied().collect();
    bound.extend(r3.bound_primes.iter().copied());
    let mut notes = vec!["statement is for prime exponents p >= 5".to_string()];
    notes.push(
        "the r = 3 constraint needs p coprime to 21, so p = 3 and p = 7 are not covered by it"
            .to_string(),
    );
    for &p in &bound {
        if p < 5 {
            continue;
        }
        let in_r1_bound = r1.bound_primes.contains(&p);
        let covered_by_r1 = r1.eliminated_r_star.contains(&(p % m1)) && !in_r1_bound;
        let text = if covered_by_r1 {
            format!("p = {p} is exceptional for the r = 3 sieve but lies in the r = 1 classes (p ≡ {} mod {m1})", p % m1)
        } else {
            format!("p = {p} is exceptional for the sieve and must be handled separately")
        };
        notes.push(text);
        if r1.config.d == 5 && p == 5 {
            notes.push("p = 5 over Q(sqrt 5) is also settled by earlier work".to_string());
        }
    }
    TheoremReport {
        d: r1.config.d,
        modulus,
        classes,
        covered_unit_classes: covered.len(),
        total_unit_classes: units.len(),
        open_classes: open,
        bound_primes: bound.into_iter().collect(),
        notes,
    }
}

/// Survivor counts keyed by `R*`, for reporting.
pub fn survivor_map(report: &SieveReport) -> BTreeMap<u64, usize> {
    report
        .classes
        .iter()
        .map(|c| (c.r_star, c.passing_triples))
        .collect()
}
