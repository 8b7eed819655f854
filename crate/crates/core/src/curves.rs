//! Elliptic curves over `K` and over finite residue fields, Frey curves and traces of Frobenius.

use std::sync::atomic::{AtomicU64, Ordering};

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finitefield::{FFElem, FiniteField};
use crate::quadfield::{PrimeIdeal, QInt, QuadField, RealEmbedding};

static HASSE_CHECKS: AtomicU64 = AtomicU64::new(0);

/// Number of traces computed (and Hasse-checked) so far in this process.
pub fn hasse_checks() -> u64 {
    HASSE_CHECKS.load(Ordering::Relaxed)
}

/// Long Weierstrass model `y^2 + a1 xy + a3 y = x^3 + a2 x^2 + a4 x + a6` over `O_K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CurveK {
    pub a1: QInt,
    pub a2: QInt,
    pub a3: QInt,
    pub a4: QInt,
    pub a6: QInt,
}

impl CurveK {
    pub fn new(a1: QInt, a2: QInt, a3: QInt, a4: QInt, a6: QInt) -> Self {
        CurveK { a1, a2, a3, a4, a6 }
    }

    /// `y^2 = (x - e1)(x - e2)(x - e3)`.
    pub fn from_roots(e1: &QInt, e2: &QInt, e3: &QInt) -> Self {
        let zero = QInt::new(0, 0, e1.d());
        let s1 = &(e1 + e2) + e3;
        let s2 = &(&(e1 * e2) + &(e1 * e3)) + &(e2 * e3);
        let s3 = &(e1 * e2) * e3;
        CurveK::new(zero.clone(), -&s1, zero, s2, -&s3)
    }

    /// Frey curve `y^2 = x (x - a)(x + b)`.
    pub fn frey(a: &QInt, b: &QInt) -> Self {
        CurveK::from_roots(&QInt::new(0, 0, a.d()), a, &-b)
    }

    pub fn d(&self) -> i64 {
        self.a1.d()
    }

    pub fn b_invariants(&self) -> [QInt; 4] {
        let b2 = &self.a1.square() + &self.a2.scale(&4.into());
        let b4 = &self.a4.scale(&2.into()) + &(&self.a1 * &self.a3);
        let b6 = &self.a3.square() + &self.a6.scale(&4.into());
        let b8 = &(&(&(&self.a1.square() * &self.a6) + &(&self.a2 * &self.a6).scale(&4.into()))
            - &(&(&self.a1 * &self.a3) * &self.a4))
            + &(&(&self.a2 * &self.a3.square()) - &self.a4.square());
        [b2, b4, b6, b8]
    }

    pub fn discriminant(&self) -> QInt {
        let [b2, b4, b6, b8] = self.b_invariants();
        let t1 = -&(&b2.square() * &b8);
        let t2 = (&b4.square() * &b4).scale(&(-8).into());
        let t3 = b6.square().scale(&(-27).into());
        let t4 = (&(&b2 * &b4) * &b6).scale(&9.into());
        &(&(&t1 + &t2) + &t3) + &t4
    }

    pub fn c4(&self) -> QInt {
        let [b2, b4, _, _] = self.b_invariants();
        &b2.square() - &b4.scale(&24.into())
    }

    /// `j` as the fraction `(c4^3, Δ)`.
    pub fn j_invariant(&self) -> Result<(QInt, QInt)> {
        let delta = self.discriminant();
        if delta.is_zero() {
            return Err(Error::SingularCurve(format!("{self:?}")));
        }
        let c4 = self.c4();
        Ok((&c4.square() * &c4, delta))
    }

    pub fn same_j(&self, other: &CurveK) -> Result<bool> {
        let (n1, d1) = self.j_invariant()?;
        let (n2, d2) = other.j_invariant()?;
        Ok(&n1 * &d2 == &n2 * &d1)
    }

    /// `Y^2 = X^3 + b2 X^2 + 8 b4 X + 16 b6` via `X = 4x`, `Y = 4(2y + a1 x + a3)`.
    /// The discriminant is multiplied by `2^12`.
    pub fn complete_square(&self) -> CurveK {
        let [b2, b4, b6, _] = self.b_invariants();
        let zero = QInt::new(0, 0, self.d());
        CurveK::new(
            zero.clone(),
            b2,
            zero,
            b4.scale(&8.into()),
            b6.scale(&16.into()),
        )
    }

    fn cubic_at(&self, x: &QInt) -> QInt {
        &(&(&(&x.square() * x) + &(&self.a2 * &x.square())) + &(&self.a4 * x)) + &self.a6
    }

    /// The three roots in `O_K` of the 2-division cubic of a model with `a1 = a3 = 0`.
    pub fn cubic_roots(&self) -> Result<[QInt; 3]> {
        if !self.a1.is_zero() || !self.a3.is_zero() {
            return self.complete_square().cubic_roots();
        }
        let field = QuadField::new(self.d())?;
        let r = self
            .integral_root(&field)
            .ok_or_else(|| Error::NoRootsInField(format!("{self:?}")))?;
        // x^3 + a2 x^2 + a4 x + a6 = (x - r)(x^2 + s x + t)
        let s = &self.a2 + &r;
        let t = &self.a4 + &(&r * &s);
        let disc = &s.square() - &t.scale(&4.into());
        let sq = field
            .sqrt_exact(&disc)
            .ok_or_else(|| Error::NoRootsInField(format!("{self:?}")))?;
        let two = field.int(2);
        let e2 = (&-&s + &sq).div_exact(&two);
        let e3 = (&-&s - &sq).div_exact(&two);
        match (e2, e3) {
            (Some(e2), Some(e3)) => {
                let mut roots = [r, e2, e3];
                roots.sort();
                Ok(roots)
            }
            _ => Err(Error::NoRootsInField(format!("{self:?}"))),
        }
    }

    /// An `O_K`-root of the cubic, found from floating-point roots in both embeddings.
    fn integral_root(&self, field: &QuadField) -> Option<QInt> {
        let coeffs = |e: RealEmbedding| [self.a2.approx(e), self.a4.approx(e), self.a6.approx(e)];
        let r1 = real_cubic_roots(coeffs(RealEmbedding::FIRST));
        let r2 = real_cubic_roots(coeffs(RealEmbedding::SECOND));
        let sd = (field.d() as f64).sqrt();
        for &s1 in &r1 {
            for &s2 in &r2 {
                // s1 = x + y (1 + sqrt d)/2, s2 = x + y (1 - sqrt d)/2
                let y = ((s1 - s2) / sd).round() as i64;
                let x = (s1 - y as f64 * (1.0 + sd) / 2.0).round() as i64;
                for dy in -2..=2 {
                    for dx in -2..=2 {
                        let cand = field.elem(x + dx, y + dy);
                        if self.cubic_at(&cand).is_zero() {
                            return Some(cand);
                        }
                    }
                }
            }
        }
        None
    }

    /// Reduction modulo `P`; fails when `P` divides the discriminant.
    pub fn reduce(&self, prime: &PrimeIdeal) -> Result<CurveFF> {
        if prime.contains(&self.discriminant()) {
            return Err(Error::BadReduction {
                label: format!("{self:?}"),
                p: prime.p(),
            });
        }
        let f = prime.residue_field().clone();
        Ok(CurveFF {
            a1: prime.reduce(&self.a1),
            a2: prime.reduce(&self.a2),
            a3: prime.reduce(&self.a3),
            a4: prime.reduce(&self.a4),
            a6: prime.reduce(&self.a6),
            field: f,
        })
    }

    /// `a_P(E) = N(P) + 1 - #E(F_P)`.
    pub fn trace_at(&self, prime: &PrimeIdeal) -> Result<i64> {
        Ok(self.reduce(prime)?.trace())
    }

    /// The 2-isogenous curves obtained from each rational 2-torsion point, as root triples.
    /// Only kernels whose image again has full rational 2-torsion are returned.
    pub fn two_isogenies(&self) -> Result<Vec<[QInt; 3]>> {
        let field = QuadField::new(self.d())?;
        let roots = self.cubic_roots()?;
        let mut out = Vec::new();
        for i in 0..3 {
            let e1 = &roots[i];
            let e2 = &roots[(i + 1) % 3];
            let e3 = &roots[(i + 2) % 3];
            // shifted model y^2 = x (x - A)(x + B) = x (x^2 + a x + b)
            let big_a = e2 - e1;
            let big_b = e1 - e3;
            let a = &big_b - &big_a;
            let b = -&(&big_a * &big_b);
            // image y^2 = x (x^2 - 2a x + a^2 - 4b) with roots a ± 2 sqrt b
            if let Some(s) = field.sqrt_exact(&b) {
                let s2 = s.scale(&2.into());
                let mut new = [field.zero(), &a + &s2, &a - &s2];
                new.sort();
                out.push(new);
            }
        }
        Ok(out)
    }
}

/// Real roots of the monic cubic `x^3 + c2 x^2 + c1 x + c0`.
fn real_cubic_roots([c2, c1, c0]: [f64; 3]) -> Vec<f64> {
    // depressed cubic t^3 + p t + q with x = t - c2/3
    let shift = c2 / 3.0;
    let p = c1 - c2 * c2 / 3.0;
    let q = 2.0 * c2 * c2 * c2 / 27.0 - c2 * c1 / 3.0 + c0;
    let disc = -(4.0 * p * p * p + 27.0 * q * q);
    let mut roots = if disc > 0.0 {
        let r = 2.0 * (-p / 3.0).sqrt();
        let phi = ((3.0 * q) / (p * r)).clamp(-1.0, 1.0).acos() / 3.0;
        (0..3)
            .map(|k| r * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos())
            .collect::<Vec<_>>()
    } else {
        let s = (q * q / 4.0 + p * p * p / 27.0).max(0.0).sqrt();
        vec![(-q / 2.0 + s).cbrt() + (-q / 2.0 - s).cbrt()]
    };
    // one Newton step against cancellation
    for t in roots.iter_mut() {
        let f = *t * *t * *t + p * *t + q;
        let df = 3.0 * *t * *t + p;
        if df.abs() > 1e-12 {
            *t -= f / df;
        }
        *t -= shift;
    }
    roots
}

/// Weierstrass curve over a finite field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CurveFF {
    pub field: FiniteField,
    pub a1: FFElem,
    pub a2: FFElem,
    pub a3: FFElem,
    pub a4: FFElem,
    pub a6: FFElem,
}

impl CurveFF {
    /// Frey curve `y^2 = x (x - a)(x + b)` over `field`.
    pub fn frey(field: &FiniteField, a: FFElem, b: FFElem) -> Result<Self> {
        let f = field;
        let zero = f.zero();
        // x (x - a)(x + b) = x^3 + (b - a) x^2 - ab x
        let curve = CurveFF {
            field: f.clone(),
            a1: zero,
            a2: f.sub(b, a),
            a3: zero,
            a4: f.neg(f.mul(a, b)),
            a6: zero,
        };
        if curve.discriminant().is_zero() {
            return Err(Error::SingularCurve(format!(
                "Frey curve ({a}, {b}) over {f}"
            )));
        }
        Ok(curve)
    }

    pub fn discriminant(&self) -> FFElem {
        let f = &self.field;
        let four = f.from_int(4);
        let b2 = f.add(f.square(self.a1), f.mul(four, self.a2));
        let b4 = f.add(f.mul(f.from_int(2), self.a4), f.mul(self.a1, self.a3));
        let b6 = f.add(f.square(self.a3), f.mul(four, self.a6));
        let b8 = f.sub(
            f.add(
                f.add(
                    f.mul(f.square(self.a1), self.a6),
                    f.mul(four, f.mul(self.a2, self.a6)),
                ),
                f.mul(self.a2, f.square(self.a3)),
            ),
            f.add(f.mul(self.a1, f.mul(self.a3, self.a4)), f.square(self.a4)),
        );
        let t1 = f.neg(f.mul(f.square(b2), b8));
        let t2 = f.mul(f.from_int(-8), f.mul(f.square(b4), b4));
        let t3 = f.mul(f.from_int(-27), f.square(b6));
        let t4 = f.mul(f.from_int(9), f.mul(b2, f.mul(b4, b6)));
        f.add(f.add(t1, t2), f.add(t3, t4))
    }

    fn rhs(&self, x: FFElem) -> FFElem {
        let f = &self.field;
        f.add(
            f.mul(f.add(f.mul(f.add(x, self.a2), x), self.a4), x),
            self.a6,
        )
    }

    fn lhs_linear(&self, x: FFElem) -> FFElem {
        let f = &self.field;
        f.add(f.mul(self.a1, x), self.a3)
    }

    /// `#E(F_q)` including the point at infinity.
    pub fn count_points(&self) -> u64 {
        let f = &self.field;
        if f.characteristic() == 2 {
            return self.count_points_naive();
        }
        // y^2 + h y = g has 1 + chi(h^2 + 4g) solutions in odd characteristic
        let four = f.from_int(4);
        let affine: i64 = f
            .elements()
            .map(|x| {
                let h = self.lhs_linear(x);
                1 + f.chi(f.add(f.square(h), f.mul(four, self.rhs(x)))) as i64
            })
            .sum();
        (1 + affine) as u64
    }

    /// Point count by enumerating all pairs `(x, y)`.
    pub fn count_points_naive(&self) -> u64 {
        let f = &self.field;
        let mut n = 1;
        for x in f.elements() {
            let g = self.rhs(x);
            let h = self.lhs_linear(x);
            for y in f.elements() {
                if f.add(f.square(y), f.mul(h, y)) == g {
                    n += 1;
                }
            }
        }
        n
    }

    /// Trace of Frobenius; panics if the Hasse bound fails, since that means the count is wrong.
    pub fn trace(&self) -> i64 {
        let q = self.field.order() as i64;
        let a = q + 1 - self.count_points() as i64;
        HASSE_CHECKS.fetch_add(1, Ordering::Relaxed);
        assert!(a * a <= 4 * q, "Hasse bound violated: a = {a}, q = {q}");
        a
    }
}

/// Trace of the Frey curve `y^2 = x (x - a)(x + b)` over a finite field.
pub fn frey_trace(field: &FiniteField, a: FFElem, b: FFElem) -> Result<i64> {
    Ok(CurveFF::frey(field, a, b)?.trace())
}

/// A trace of Frobenius recorded at a prime of `K`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub p: u64,
    pub residue_degree: u32,
    pub omega_image: FFElem,
    pub trace: i64,
}

impl TraceRecord {
    pub fn new(prime: &PrimeIdeal, trace: i64) -> Self {
        TraceRecord {
            p: prime.p(),
            residue_degree: prime.residue_degree(),
            omega_image: prime.omega_image(),
            trace,
        }
    }
}

/// Helper for data validation: the curve `y^2 = (x - e1)(x - e2)(x - e3)` from ω-coordinates.
pub fn curve_from_root_coords(field: &QuadField, roots: &[(i64, i64); 3]) -> CurveK {
    let [e1, e2, e3] = roots.map(|(x, y)| field.elem(x, y));
    CurveK::from_roots(&e1, &e2, &e3)
}

/// `16 (e1 - e2)^2 (e1 - e3)^2 (e2 - e3)^2`, the discriminant of a model with full 2-torsion.
pub fn root_discriminant(roots: &[QInt; 3]) -> QInt {
    let p = &(&(&roots[0] - &roots[1]) * &(&roots[0] - &roots[2])) * &(&roots[1] - &roots[2]);
    p.square().scale(&BigInt::from(16))
}
