//! Primitive solutions of `a + b + c = 0` whose Frey curve is isomorphic to a curve of the
//! given conductor, found from the roots of that curve and `S`-units supported above 2.

use std::collections::BTreeMap;
use std::path::Path;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::curves::{root_discriminant, CurveK};
use crate::error::{Error, Result};
use crate::parallel::Executor;
use crate::quadfield::{Coords, PrimeIdeal, QInt, QuadField};
use crate::sieve::{build_ring, SieveConfig, SieveReport, TripleResidue};
use crate::symbols::constraint_symbol;

const BUILTIN: &str = include_str!("../data/curves.jsonl");

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    label: String,
    d: i64,
    conductor: String,
    #[serde(default)]
    roots: Option<[Coords; 3]>,
    #[serde(default)]
    weierstrass: Option<[Coords; 5]>,
}

/// A curve over `K` with full rational 2-torsion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CurveRecord {
    pub label: String,
    pub d: i64,
    pub conductor: String,
    pub curve: CurveK,
    /// Roots of the 2-division cubic of a model `y^2 = f(x)`.
    pub roots: [QInt; 3],
}

impl CurveRecord {
    /// Label with the trailing member index removed, e.g. `Q5-P3-a1` → `Q5-P3-a`.
    pub fn isogeny_class(&self) -> &str {
        self.label.trim_end_matches(|c: char| c.is_ascii_digit())
    }
}

fn parse_record(line_no: usize, line: &str) -> Result<CurveRecord> {
    let schema = |msg: String| Error::Schema { line: line_no, msg };
    let raw: RawRecord = serde_json::from_str(line).map_err(|e| schema(e.to_string()))?;
    QuadField::new(raw.d).map_err(|e| schema(e.to_string()))?;
    let (curve, roots) = match (raw.roots, raw.weierstrass) {
        (Some(r), None) => {
            let [e1, e2, e3] = r.map(|c| c.into_qint(raw.d));
            if e1 == e2 || e1 == e3 || e2 == e3 {
                return Err(schema(format!(
                    "{}: repeated root, curve is singular",
                    raw.label
                )));
            }
            (CurveK::from_roots(&e1, &e2, &e3), [e1, e2, e3])
        }
        (None, Some(w)) => {
            let [a1, a2, a3, a4, a6] = w.map(|c| c.into_qint(raw.d));
            let curve = CurveK::new(a1, a2, a3, a4, a6);
            if curve.discriminant().is_zero() {
                return Err(schema(format!("{}: discriminant is zero", raw.label)));
            }
            let roots = curve
                .complete_square()
                .cubic_roots()
                .map_err(|e| schema(format!("{}: {e}", raw.label)))?;
            (curve, roots)
        }
        _ => {
            return Err(schema(
                "exactly one of \"roots\" and \"weierstrass\" is required".into(),
            ))
        }
    };
    Ok(CurveRecord {
        label: raw.label,
        d: raw.d,
        conductor: raw.conductor,
        curve,
        roots,
    })
}

/// Parses JSON-lines curve data and checks that members of each isogeny class share traces.
pub fn parse_curves(text: &str) -> Result<Vec<CurveRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_record(i + 1, line)?);
    }
    check_isogeny_classes(&out)?;
    Ok(out)
}

pub fn ingest_curves(path: &Path) -> Result<Vec<CurveRecord>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_curves(&text)
}

/// The curve data shipped with the crate.
pub fn builtin_curves() -> Result<Vec<CurveRecord>> {
    parse_curves(BUILTIN)
}

const CLASS_CHECK_PRIMES: [u64; 8] = [3, 7, 11, 13, 19, 23, 29, 31];

fn check_isogeny_classes(records: &[CurveRecord]) -> Result<()> {
    let mut classes: BTreeMap<(i64, &str), Vec<&CurveRecord>> = BTreeMap::new();
    for r in records {
        classes.entry((r.d, r.isogeny_class())).or_default().push(r);
    }
    for ((d, _), members) in classes {
        let field = QuadField::new(d)?;
        for p in CLASS_CHECK_PRIMES {
            for prime in field.split_prime(p)? {
                let traces: Vec<(String, i64)> = members
                    .iter()
                    .filter_map(|m| m.curve.trace_at(&prime).ok().map(|t| (m.label.clone(), t)))
                    .collect();
                if let Some((l0, t0)) = traces.first() {
                    if let Some((l, t)) = traces.iter().find(|(_, t)| t != t0) {
                        return Err(Error::InvalidInstance(format!(
                            "{l0} and {l} disagree at {prime}: traces {t0} and {t}"
                        )));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Exponent window for `u = ε^m ∏ π_i^{n_i}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub unit: i64,
    pub two: i64,
}

impl Default for Window {
    fn default() -> Self {
        Window { unit: 12, two: 12 }
    }
}

impl Window {
    pub fn new(bound: i64) -> Self {
        Window {
            unit: bound,
            two: bound,
        }
    }

    pub fn doubled(&self) -> Self {
        Window {
            unit: 2 * self.unit,
            two: 2 * self.two,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Transform {
    /// Indices of the roots used as `(e1, e2, e3)`.
    pub ordering: [usize; 3],
    pub unit_exponent: i64,
    pub prime_exponents: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ObstructiveTriple {
    pub a: QInt,
    pub b: QInt,
    pub c: QInt,
    pub source: String,
    pub transform: Transform,
    /// Valuations of `(a, b, c)` at each prime above 2.
    pub parity: Vec<[u32; 3]>,
}

impl ObstructiveTriple {
    pub fn height(&self) -> BigInt {
        [&self.a, &self.b, &self.c]
            .iter()
            .map(|x| x.height())
            .max()
            .expect("three entries")
    }

    fn key(&self) -> (BigInt, &QInt, &QInt, &QInt) {
        (self.height(), &self.a, &self.b, &self.c)
    }

    pub fn frey(&self) -> CurveK {
        CurveK::frey(&self.a, &self.b)
    }
}

const ORDERINGS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

fn valuations(primes: &[PrimeIdeal], x: &QInt) -> Vec<i64> {
    primes
        .iter()
        .map(|p| p.valuation(x).expect("nonzero") as i64)
        .collect()
}

/// All primitive triples from one record within the window, before deduplication.
pub fn find_triples(
    rec: &CurveRecord,
    window: Window,
    exec: &Executor,
) -> Result<Vec<ObstructiveTriple>> {
    let field = QuadField::new(rec.d)?;
    let primes = field.primes_above_two()?;
    let mut tasks = Vec::new();
    for ordering in ORDERINGS {
        let [e1, e2, e3] = ordering.map(|i| &rec.roots[i]);
        let da = e2 - e1;
        let db = -&(e3 - e1);
        let va = valuations(&primes, &da);
        let vb = valuations(&primes, &db);
        // u^2 contributes 2 n_i at P_i; a and b must be integral and not both divisible by P_i
        let mut exps = Vec::new();
        for (a, b) in va.iter().zip(&vb) {
            let lo = a.min(b);
            if lo % 2 != 0 {
                exps.clear();
                break;
            }
            let n = -lo / 2;
            if n.abs() > window.two {
                exps.clear();
                break;
            }
            exps.push(n);
        }
        if exps.len() != primes.len() {
            continue;
        }
        for m in -window.unit..=window.unit {
            tasks.push((ordering, da.clone(), db.clone(), m, exps.clone()));
        }
    }
    let src_disc = root_discriminant(&rec.roots);
    let results = exec.map(
        &tasks,
        |(ordering, da, db, m, n)| -> Result<Option<ObstructiveTriple>> {
            let u = field.s_unit(1, *m, n)?;
            let u2 = u.square();
            let (Some(a), Some(b)) = (u2.times(da), u2.times(db)) else {
                return Ok(None);
            };
            let c = -&(&a + &b);
            if !field.gcd(&a, &b)?.is_unit() {
                return Ok(None);
            }
            // 16 (abc)^2 = u^12 Δ, cleared of denominators
            let frey_disc = (&(&a * &b) * &c).square().scale(&BigInt::from(16));
            let lhs = &frey_disc * &u.denominator.pow(12);
            let rhs = &src_disc * &u.numerator.pow(12);
            if lhs != rhs {
                return Err(Error::InvalidInstance(format!(
                    "discriminant ratio check failed for {}",
                    rec.label
                )));
            }
            let parity = primes
                .iter()
                .map(|p| [&a, &b, &c].map(|x| p.valuation(x).expect("nonzero")))
                .collect();
            Ok(Some(ObstructiveTriple {
                a,
                b,
                c,
                source: rec.label.clone(),
                transform: Transform {
                    ordering: *ordering,
                    unit_exponent: *m,
                    prime_exponents: n.clone(),
                },
                parity,
            }))
        },
    );
    let mut out = Vec::new();
    for r in results {
        if let Some(t) = r? {
            out.push(t);
        }
    }
    Ok(out)
}

/// Whether `t1 = η^2 t2` for a unit `η`.
pub fn same_up_to_unit_square(
    field: &QuadField,
    t1: &ObstructiveTriple,
    t2: &ObstructiveTriple,
) -> bool {
    let Some(q) = t1.a.div_exact(&t2.a) else {
        return false;
    };
    if !q.is_unit() || field.sqrt_exact(&q).is_none() {
        return false;
    }
    &q * &t2.b == t1.b && &q * &t2.c == t1.c
}

/// One representative per unit-square class: least height, then least `(a, b, c)`.
pub fn dedupe(field: &QuadField, triples: Vec<ObstructiveTriple>) -> Vec<ObstructiveTriple> {
    let mut sorted = triples;
    sorted.sort_by(|x, y| {
        x.key()
            .cmp(&y.key())
            .then_with(|| x.source.cmp(&y.source))
            .then_with(|| x.transform.cmp(&y.transform))
    });
    let mut reps: Vec<ObstructiveTriple> = Vec::new();
    for t in sorted {
        if !reps.iter().any(|r| same_up_to_unit_square(field, &t, r)) {
            reps.push(t);
        }
    }
    reps.sort_by(|x, y| (&x.a, &x.b, &x.c).cmp(&(&y.a, &y.b, &y.c)));
    reps
}

/// Deduplicated triples from every record of field `d`.
pub fn obstructive_triples(
    records: &[CurveRecord],
    d: i64,
    window: Window,
    exec: &Executor,
) -> Result<Vec<ObstructiveTriple>> {
    let field = QuadField::new(d)?;
    let mut all = Vec::new();
    for rec in records.iter().filter(|r| r.d == d) {
        all.extend(find_triples(rec, window, exec)?);
    }
    Ok(dedupe(&field, all))
}

/// Result of the saturation check: the canonical list is unchanged when the window doubles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Saturation {
    pub window: Window,
    pub doubled: Window,
    pub count: usize,
    pub count_doubled: usize,
    pub stable: bool,
}

pub fn saturation(
    records: &[CurveRecord],
    d: i64,
    window: Window,
    exec: &Executor,
) -> Result<Saturation> {
    let small = obstructive_triples(records, d, window, exec)?;
    let big = obstructive_triples(records, d, window.doubled(), exec)?;
    let stable = small.len() == big.len()
        && small
            .iter()
            .zip(&big)
            .all(|(x, y)| (&x.a, &x.b, &x.c) == (&y.a, &y.b, &y.c));
    Ok(Saturation {
        window,
        doubled: window.doubled(),
        count: small.len(),
        count_doubled: big.len(),
        stable,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub r: u32,
    pub r_star: u64,
    pub eliminated: bool,
    pub passing_triples: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub d: i64,
    pub triples: usize,
    /// Indices of triples with a vanishing component at an auxiliary prime, per `r`.
    pub bound_branch: Vec<(u32, Vec<usize>)>,
    /// Indices of unit triples whose Frey trace differs from the target, per `r`.
    pub trace_mismatch: Vec<(u32, Vec<usize>)>,
    pub violations: Vec<Violation>,
    pub consistent: bool,
}

/// Compares the obstructive triples with sieve reports for the same field.
pub fn cross_check(triples: &[ObstructiveTriple], reports: &[SieveReport]) -> Result<CrossCheck> {
    let d = reports
        .first()
        .map(|r| r.config.d)
        .ok_or_else(|| Error::InvalidInstance("no sieve reports".into()))?;
    let mut bound_branch = Vec::new();
    let mut trace_mismatch = Vec::new();
    let mut violations = Vec::new();
    for rep in reports {
        let cfg: &SieveConfig = &rep.config;
        let ring = build_ring(cfg)?;
        let mut residues: Vec<(usize, TripleResidue)> = Vec::new();
        let mut zero = Vec::new();
        let mut mismatch = Vec::new();
        for (i, t) in triples.iter().enumerate() {
            let comps: Vec<[_; 3]> = ring
                .components()
                .iter()
                .map(|c| [&t.a, &t.b, &t.c].map(|x| c.prime().reduce(x)))
                .collect();
            let res = TripleResidue::new(comps);
            if !res.is_unit() {
                zero.push(i);
                continue;
            }
            let frey = t.frey();
            let matched = ring
                .components()
                .iter()
                .zip(&rep.target_traces)
                .all(|(c, target)| frey.trace_at(c.prime()).ok() == Some(target.trace));
            if !matched {
                mismatch.push(i);
                continue;
            }
            residues.push((i, res));
        }
        for class in &rep.classes {
            let passing: Vec<usize> = residues
                .iter()
                .filter(|(_, res)| constraint_symbol(&ring, class.exponent, res))
                .map(|(i, _)| *i)
                .collect();
            let ok = if class.eliminated {
                passing.is_empty()
            } else {
                !passing.is_empty()
            };
            if !ok {
                violations.push(Violation {
                    r: cfg.r,
                    r_star: class.r_star,
                    eliminated: class.eliminated,
                    passing_triples: passing,
                });
            }
        }
        bound_branch.push((cfg.r, zero));
        trace_mismatch.push((cfg.r, mismatch));
    }
    let consistent = violations.is_empty() && trace_mismatch.iter().all(|(_, v)| v.is_empty());
    Ok(CrossCheck {
        d,
        triples: triples.len(),
        bound_branch,
        trace_mismatch,
        violations,
        consistent,
    })
}
