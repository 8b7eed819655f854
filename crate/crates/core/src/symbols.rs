//! Residue symbols and Hilbert symbols over `Q` and over `K`, the generalized reciprocity
//! check, and the constraint identities built on them.

use std::collections::{BTreeMap, HashSet};
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::finitefield;
use crate::quadfield::{
    factor_bigint, IdealModulus, PrimeIdeal, PrimeKind, QInt, QuadField, RealEmbedding,
};
use crate::sieve::{ResidueRing, TripleResidue};

/// A place of `K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Place {
    Real(RealEmbedding),
    Odd(PrimeIdeal),
    Even(PrimeIdeal),
}

impl Place {
    pub fn finite(prime: PrimeIdeal) -> Place {
        if prime.is_odd() {
            Place::Odd(prime)
        } else {
            Place::Even(prime)
        }
    }
}

// ---------------------------------------------------------------------------
// Over Q

fn v_p(n: &BigInt, p: u64) -> (u32, BigInt) {
    let p = BigInt::from(p);
    let mut v = 0;
    let mut rest = n.clone();
    while !rest.is_zero() && rest.is_multiple_of(&p) {
        rest /= &p;
        v += 1;
    }
    (v, rest)
}

/// Legendre symbol `(a / p)` for an odd prime `p`.
pub fn legendre(a: &BigInt, p: u64) -> i8 {
    let r = a.mod_floor(&BigInt::from(p)).to_u64().expect("fits");
    finitefield::legendre_mod(r, p)
}

/// Integer of the same square class as a nonzero rational.
fn square_class(a: &BigRational) -> BigInt {
    assert!(!a.is_zero(), "Hilbert symbol of zero");
    a.numer() * a.denom()
}

/// `(a, b)_R`.
pub fn hilbert_real_q(a: &BigRational, b: &BigRational) -> i8 {
    if a.is_negative() && b.is_negative() {
        -1
    } else {
        1
    }
}

/// `(a, b)_p` for an odd prime `p`.
pub fn hilbert_odd_q(a: &BigRational, b: &BigRational, p: u64) -> i8 {
    let (va, a0) = v_p(&square_class(a), p);
    let (vb, b0) = v_p(&square_class(b), p);
    let mut s = if (va as u64 * vb as u64 * ((p - 1) / 2)) % 2 == 1 {
        -1
    } else {
        1
    };
    if vb % 2 == 1 {
        s *= legendre(&a0, p);
    }
    if va % 2 == 1 {
        s *= legendre(&b0, p);
    }
    s
}

/// Index in `0..8` of the class of `n` in `Q_2^* / Q_2^{*2}`: `4 (v mod 2) + (u mod 8 - 1)/2`.
fn two_adic_class(n: &BigInt) -> usize {
    let (v, u) = v_p(n, 2);
    let u8 = u.mod_floor(&BigInt::from(8)).to_usize().expect("small");
    4 * (v as usize % 2) + (u8 - 1) / 2
}

fn class_representative(i: usize) -> u64 {
    let u = 2 * (i % 4) as u64 + 1;
    if i >= 4 {
        2 * u
    } else {
        u
    }
}

/// Hilbert symbol table at 2 from primitive solutions of `z^2 = a x^2 + b y^2 (mod 64)`.
fn q2_table() -> &'static [[i8; 8]; 8] {
    static TABLE: OnceLock<[[i8; 8]; 8]> = OnceLock::new();
    TABLE.get_or_init(|| {
        const M: u64 = 64;
        let mut squares = [false; M as usize];
        for z in 0..M {
            squares[(z * z % M) as usize] = true;
        }
        let odd_squares: HashSet<u64> = (0..M).filter(|z| z % 2 == 1).map(|z| z * z % M).collect();
        let mut t = [[0i8; 8]; 8];
        for (i, row) in t.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                let (a, b) = (class_representative(i), class_representative(j));
                let mut found = false;
                'search: for x in 0..M {
                    for y in 0..M {
                        let rhs = (a * x * x + b * y * y) % M;
                        let primitive_xy = x % 2 == 1 || y % 2 == 1;
                        if (primitive_xy && squares[rhs as usize]) || odd_squares.contains(&rhs) {
                            found = true;
                            break 'search;
                        }
                    }
                }
                *cell = if found { 1 } else { -1 };
            }
        }
        t
    })
}

/// `(a, b)_2`.
pub fn hilbert_q2(a: &BigRational, b: &BigRational) -> i8 {
    q2_table()[two_adic_class(&square_class(a))][two_adic_class(&square_class(b))]
}

/// Product of `(a, b)_v` over every place of `Q`.
pub fn reciprocity_product_q(a: &BigRational, b: &BigRational) -> Result<i8> {
    let mut s = hilbert_real_q(a, b) * hilbert_q2(a, b);
    let na = square_class(a);
    let nb = square_class(b);
    let mut primes: Vec<u64> = factor_bigint(&na)?.into_iter().map(|(p, _)| p).collect();
    primes.extend(factor_bigint(&nb)?.into_iter().map(|(p, _)| p));
    primes.sort_unstable();
    primes.dedup();
    for p in primes.into_iter().filter(|&p| p != 2) {
        s *= hilbert_odd_q(a, b, p);
    }
    Ok(s)
}

// ---------------------------------------------------------------------------
// Over K

/// `chi(x mod P)` for an odd prime `P`.
pub fn legendre_at(x: &QInt, prime: &PrimeIdeal) -> i8 {
    debug_assert!(prime.is_odd(), "residue symbol at an even prime");
    prime.residue_field().chi(prime.reduce(x))
}

/// Jacobi symbol `(x / m)` in `K` for `m` coprime to 2.
pub fn jacobi(field: &QuadField, x: &QInt, m: &QInt) -> Result<i8> {
    if m.is_zero() {
        return Err(Error::DivisionByZero);
    }
    if m.norm().is_even() {
        return Err(Error::EvenModulus);
    }
    let mut s = 1;
    for (prime, v) in field.factor(m)? {
        let l = legendre_at(x, &prime);
        if l == 0 {
            return Ok(0);
        }
        if v % 2 == 1 {
            s *= l;
        }
    }
    Ok(s)
}

/// `(a, b)` at the real place `e`.
pub fn hilbert_real(a: &QInt, b: &QInt, e: RealEmbedding) -> i8 {
    assert!(!a.is_zero() && !b.is_zero(), "Hilbert symbol of zero");
    if a.sign_exact(e) < 0 && b.sign_exact(e) < 0 {
        -1
    } else {
        1
    }
}

/// `(a, b)_P` at an odd prime.
pub fn hilbert_odd(a: &QInt, b: &QInt, prime: &PrimeIdeal) -> i8 {
    let (va, a0) = prime.split_off(a).expect("nonzero argument");
    let (vb, b0) = prime.split_off(b).expect("nonzero argument");
    let q = prime.norm();
    let mut s = if (va as u64 * vb as u64 * ((q - 1) / 2)) % 2 == 1 {
        -1
    } else {
        1
    };
    if vb % 2 == 1 {
        s *= legendre_at(&a0, prime);
    }
    if va % 2 == 1 {
        s *= legendre_at(&b0, prime);
    }
    s
}

/// Whether `t = 1 - 4ζ` for a root of unity `ζ = ±1` of `K`.
fn is_special_even_argument(t: &QInt) -> bool {
    t.y().is_zero() && (t.x() == &BigInt::from(-3) || t.x() == &BigInt::from(5))
}

/// `(t, b)_P` at a prime above 2 for `t ∈ {-3, 5}`: equal to 1 once even powers of `P` are
/// removed from `b` and `b` is a `P`-unit. Any other case is an error.
pub fn hilbert_even_special(t: &QInt, b: &QInt, prime: &PrimeIdeal) -> Result<i8> {
    if prime.is_odd() {
        return Err(Error::UnsupportedEvenPlace(format!("{prime} is odd")));
    }
    if prime.kind() == PrimeKind::Ramified {
        return Err(Error::UnsupportedEvenPlace(format!("{prime} is ramified")));
    }
    if !is_special_even_argument(t) {
        return Err(Error::UnsupportedEvenPlace(format!(
            "first argument {t} is not 1 - 4ζ"
        )));
    }
    let (v, _) = prime.split_off(b).ok_or(Error::DivisionByZero)?;
    if v % 2 == 1 {
        return Err(Error::UnsupportedEvenPlace(format!(
            "v(b) = {v} at {prime}"
        )));
    }
    Ok(1)
}

/// `(a, b)_v` at any place supported by the implementation.
pub fn hilbert_at(a: &QInt, b: &QInt, place: &Place) -> Result<i8> {
    match place {
        Place::Real(e) => Ok(hilbert_real(a, b, *e)),
        Place::Odd(p) => Ok(hilbert_odd(a, b, p)),
        Place::Even(p) => {
            if is_special_even_argument(a) {
                hilbert_even_special(a, b, p)
            } else if is_special_even_argument(b) {
                hilbert_even_special(b, a, p)
            } else {
                Err(Error::UnsupportedEvenPlace(format!("({a}, {b}) at {p}")))
            }
        }
    }
}

/// Places at which `(a, b)` can be nontrivial: real, even, and odd primes dividing `ab`.
pub fn relevant_places(field: &QuadField, a: &QInt, b: &QInt) -> Result<Vec<Place>> {
    let mut places: Vec<Place> = RealEmbedding::both().into_iter().map(Place::Real).collect();
    places.extend(field.primes_above_two()?.into_iter().map(Place::Even));
    let mut seen = Vec::new();
    for x in [a, b] {
        for (prime, _) in field.factor(x)? {
            if prime.is_odd() && !seen.contains(&prime) {
                seen.push(prime);
            }
        }
    }
    seen.sort_by_key(|p| (p.p(), p.root()));
    places.extend(seen.into_iter().map(Place::Odd));
    Ok(places)
}

/// Product of `(a, b)_v` over all places of `K`.
pub fn reciprocity_product(field: &QuadField, a: &QInt, b: &QInt) -> Result<i8> {
    let mut s = 1;
    for place in relevant_places(field, a, b)? {
        s *= hilbert_at(a, b, &place)?;
    }
    Ok(s)
}

// ---------------------------------------------------------------------------
// Generalized reciprocity

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GenRecInstance {
    pub alpha: QInt,
    pub lambda: QInt,
    /// Generator of the part of `(λ)` supported above 2.
    pub l_part: QInt,
    /// Odd part of `(λ)` as prime ideals with multiplicity.
    pub r_part: Vec<(PrimeIdeal, u32)>,
    pub sigma: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenRecOutcome {
    pub lambda_over_alpha: i8,
    pub alpha_over_r: i8,
    pub sigma: i64,
    pub holds: bool,
}

/// Whether `α` is a square modulo the ideal `(g)`.
pub fn is_square_mod(alpha: &QInt, g: &QInt) -> Result<bool> {
    let m = IdealModulus::new(g)?;
    let target = m.reduce(alpha);
    Ok(m.residues().iter().any(|x| m.reduce(&x.square()) == target))
}

fn sigma(alpha: &QInt, lambda: &QInt) -> i64 {
    RealEmbedding::both()
        .into_iter()
        .filter(|&e| alpha.sign_exact(e) < 0 && lambda.sign_exact(e) < 0)
        .count() as i64
}

/// Builds an admissible instance; errors with `Hypothesis` when `α` is even, shares a factor
/// with `λ`, or is not a square modulo `4𝔏`.
pub fn genrec_instance(field: &QuadField, alpha: &QInt, lambda: &QInt) -> Result<GenRecInstance> {
    if lambda.is_zero() || alpha.is_zero() {
        return Err(Error::InvalidInstance("α and λ must be nonzero".into()));
    }
    if alpha.norm().is_even() {
        return Err(Error::Hypothesis("α is even".into()));
    }
    if !field.coprime(alpha, lambda)? {
        return Err(Error::Hypothesis("α and λ are not coprime".into()));
    }
    let mut l_part = field.one();
    let mut r_part = Vec::new();
    for (prime, v) in field.factor(lambda)? {
        if prime.is_odd() {
            r_part.push((prime, v));
        } else {
            l_part = &l_part * &prime.generator().pow(v);
        }
    }
    if !is_square_mod(alpha, &l_part.scale(&BigInt::from(4)))? {
        return Err(Error::Hypothesis("α is not a square modulo 4𝔏".into()));
    }
    Ok(GenRecInstance {
        alpha: alpha.clone(),
        lambda: lambda.clone(),
        l_part,
        r_part,
        sigma: sigma(alpha, lambda),
    })
}

/// Evaluates both sides of `(λ/α)(α/ℜ) = (-1)^σ`.
pub fn genrec_check(field: &QuadField, alpha: &QInt, lambda: &QInt) -> Result<GenRecOutcome> {
    let inst = genrec_instance(field, alpha, lambda)?;
    let lambda_over_alpha = jacobi(field, &inst.lambda, &inst.alpha)?;
    let mut alpha_over_r = 1;
    for (prime, v) in &inst.r_part {
        if v % 2 == 1 {
            alpha_over_r *= legendre_at(&inst.alpha, prime);
        }
    }
    let rhs = if inst.sigma % 2 == 0 { 1 } else { -1 };
    Ok(GenRecOutcome {
        lambda_over_alpha,
        alpha_over_r,
        sigma: inst.sigma,
        holds: lambda_over_alpha * alpha_over_r == rhs,
    })
}

// ---------------------------------------------------------------------------
// Hilbert constraint and the factorization identity

/// Data `A^2 - t B^{2n} = s (C^n - ζ B^{2n})` over `K`, with `ζ = ζ' = 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HilbertConstraintInstance {
    pub a: QInt,
    pub b: QInt,
    pub c: QInt,
    pub s: QInt,
    pub t: QInt,
    pub n: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HilbertConstraintOutcome {
    pub real: i8,
    pub even: i8,
    pub odd: i8,
}

impl HilbertConstraintOutcome {
    pub fn product(&self) -> i8 {
        self.real * self.even * self.odd
    }
}

impl HilbertConstraintInstance {
    /// `(A, B, C) = (a - b, c, ab)` with `s = -4`, `t = -3` from `a + b + c = 0`.
    pub fn from_triple(a: &QInt, b: &QInt, c: &QInt) -> Result<Self> {
        if !(&(a + b) + c).is_zero() {
            return Err(Error::InvalidInstance("a + b + c must vanish".into()));
        }
        let d = a.d();
        Ok(HilbertConstraintInstance {
            a: a - b,
            b: c.clone(),
            c: a * b,
            s: QInt::new(-4, 0, d),
            t: QInt::new(-3, 0, d),
            n: 1,
        })
    }

    /// `s (C - B^2)`.
    pub fn beta(&self) -> QInt {
        &self.s * &(&self.c - &self.b.square())
    }

    /// Checks the identity, nonvanishing and coprimality exactly.
    pub fn validate(&self, field: &QuadField) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidInstance("n must be positive".into()));
        }
        if self.b.is_zero() {
            return Err(Error::InvalidInstance("B = 0".into()));
        }
        let b2n = self.b.pow(2 * self.n);
        let lhs = &self.a.square() - &(&self.t * &b2n);
        let inner = &self.c.pow(self.n) - &b2n;
        let rhs = &self.s * &inner;
        if lhs != rhs {
            return Err(Error::InvalidInstance(
                "A^2 - t B^2n ≠ s (C^n - B^2n)".into(),
            ));
        }
        if inner.is_zero() {
            return Err(Error::InvalidInstance("C^n - B^2n = 0".into()));
        }
        let g = field.gcd(&field.gcd(&self.a, &self.b)?, &self.c)?;
        if !g.is_unit() {
            return Err(Error::InvalidInstance(format!(
                "A, B, C share the factor {g}"
            )));
        }
        for (prime, _) in field.factor(&self.s)? {
            if prime.is_odd() {
                return Err(Error::InvalidInstance(format!(
                    "s has odd prime factor {prime}"
                )));
            }
        }
        for (p, _) in finite_primes_of_n(self.n) {
            for prime in field.split_prime(p)? {
                if prime.contains(&self.t) {
                    return Err(Error::InvalidInstance(format!(
                        "t is not a unit at {prime}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// The real, even and odd (`v(t)` odd) partial products of `(t, β)`.
    pub fn check(&self, field: &QuadField) -> Result<HilbertConstraintOutcome> {
        self.validate(field)?;
        let beta = self.beta();
        let real = RealEmbedding::both()
            .into_iter()
            .map(|e| hilbert_real(&self.t, &beta, e))
            .product();
        let mut even = 1;
        for prime in field.primes_above_two()? {
            even *= hilbert_even_special(&self.t, &beta, &prime)?;
        }
        let mut odd = 1;
        for (prime, v) in field.factor(&self.t)? {
            if prime.is_odd() && v % 2 == 1 {
                odd *= hilbert_odd(&self.t, &beta, &prime);
            }
        }
        Ok(HilbertConstraintOutcome { real, even, odd })
    }
}

fn finite_primes_of_n(n: u32) -> Vec<(u64, u32)> {
    crate::quadfield::factor_u64(n as u64)
}

/// Both sides of `(a^p - b^p)^2 - c^{2p}(1 - 4) = -4 (ab - c^2) h` over `K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClaimFactorization {
    pub a: QInt,
    pub b: QInt,
    pub c: QInt,
    pub p: u32,
    pub h: QInt,
    pub lhs: QInt,
    pub rhs: QInt,
}

impl ClaimFactorization {
    pub fn holds(&self) -> bool {
        self.lhs == self.rhs
    }
}

/// Evaluates the factorization identity for a solution of `a^p + b^p + c^p = 0`.
pub fn verify_claim_factorization(
    a: &QInt,
    b: &QInt,
    c: &QInt,
    p: u32,
) -> Result<ClaimFactorization> {
    if p.is_multiple_of(2) {
        return Err(Error::InvalidInstance(format!("exponent {p} is even")));
    }
    if !(&(&a.pow(p) + &b.pow(p)) + &c.pow(p)).is_zero() {
        return Err(Error::Hypothesis("a^p + b^p + c^p ≠ 0".into()));
    }
    let d = a.d();
    let ab = a * b;
    let c2 = c.square();
    let mut h = QInt::new(0, 0, d);
    for i in 0..p {
        h = &h + &(&ab.pow(p - 1 - i) * &c2.pow(i));
    }
    let lhs = &(&a.pow(p) - &b.pow(p)).square() + &c.pow(2 * p).scale(&BigInt::from(3));
    let rhs = (&(&ab - &c2) * &h).scale(&BigInt::from(-4));
    Ok(ClaimFactorization {
        a: a.clone(),
        b: b.clone(),
        c: c.clone(),
        p,
        h,
        lhs,
        rhs,
    })
}

/// Sparse polynomial in `a, b, c, z` with integer coefficients.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Poly {
    terms: BTreeMap<[u32; 4], BigInt>,
}

impl Poly {
    pub fn monomial(coeff: i64, exps: [u32; 4]) -> Poly {
        let mut p = Poly::default();
        p.add_term(exps, BigInt::from(coeff));
        p
    }

    fn add_term(&mut self, exps: [u32; 4], coeff: BigInt) {
        let e = self.terms.entry(exps).or_insert_with(BigInt::zero);
        *e += coeff;
        if e.is_zero() {
            self.terms.remove(&exps);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(*e, c.clone());
        }
        out
    }

    pub fn scale(&self, k: i64) -> Poly {
        let mut out = Poly::default();
        for (e, c) in &self.terms {
            out.add_term(*e, c * k);
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(-1))
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::default();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                let e = [e1[0] + e2[0], e1[1] + e2[1], e1[2] + e2[2], e1[3] + e2[3]];
                out.add_term(e, c1 * c2);
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> Poly {
        let mut out = Poly::monomial(1, [0; 4]);
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    /// Normal form modulo `c^p + a^p + b^p`: every `c`-degree below `p`.
    pub fn reduce_c(&self, p: u32) -> Poly {
        let mut todo = self.clone();
        let mut out = Poly::default();
        while let Some((e, coeff)) = todo.terms.pop_first() {
            if e[2] < p {
                out.add_term(e, coeff);
            } else {
                // c^k = -c^{k-p} (a^p + b^p)
                let base = [e[0], e[1], e[2] - p, e[3]];
                todo.add_term([base[0] + p, base[1], base[2], base[3]], -coeff.clone());
                todo.add_term([base[0], base[1] + p, base[2], base[3]], -coeff);
            }
        }
        out
    }
}

/// Checks `(a^p - b^p)^2 - c^{2p}(1 - 4z^p) = -4(ab - c^2 z) h` with `h = Σ (ab)^{p-1-i} (z c^2)^i`
/// in `Z[a, b, c, z] / (a^p + b^p + c^p)`.
pub fn claim_identity_symbolic(p: u32) -> bool {
    let a = Poly::monomial(1, [1, 0, 0, 0]);
    let b = Poly::monomial(1, [0, 1, 0, 0]);
    let c = Poly::monomial(1, [0, 0, 1, 0]);
    let z = Poly::monomial(1, [0, 0, 0, 1]);
    let one = Poly::monomial(1, [0; 4]);
    let ab = a.mul(&b);
    let zc2 = z.mul(&c.pow(2));
    let mut h = Poly::default();
    for i in 0..p {
        h = h.add(&ab.pow(p - 1 - i).mul(&zc2.pow(i)));
    }
    let lhs = a
        .pow(p)
        .sub(&b.pow(p))
        .pow(2)
        .sub(&c.pow(2 * p).mul(&one.sub(&z.pow(p).scale(4))));
    let rhs = ab.sub(&zc2).mul(&h).scale(-4);
    lhs.sub(&rhs).reduce_c(p).is_zero()
}

// ---------------------------------------------------------------------------
// Sieve symbol

/// The three role values `Π chi(ε^R - ζ^R)` for the roles `(ab, c)`, `(bc, a)`, `(ca, b)`.
pub fn constraint_values(ring: &ResidueRing, r_exp: u64, triple: &TripleResidue) -> [i8; 3] {
    let mut out = [1i8; 3];
    for (role, value) in out.iter_mut().enumerate() {
        for (comp, res) in ring.components().iter().zip(triple.components()) {
            let f = comp.field();
            let (x, y, z) = (res[role], res[(role + 1) % 3], res[(role + 2) % 3]);
            let eps = f.mul(f.mul(x, y), f.inverse(f.square(z)).expect("unit residue"));
            let arg = f.sub(f.pow(eps, r_exp), f.pow(comp.zeta_image(), r_exp));
            *value *= f.chi(arg);
        }
    }
    out
}

/// Whether every role of the triple avoids the symbol value `-1`.
pub fn constraint_symbol(ring: &ResidueRing, r_exp: u64, triple: &TripleResidue) -> bool {
    constraint_values(ring, r_exp, triple)
        .iter()
        .all(|&v| v != -1)
}

/// Sign pattern helper: whether `x` is positive in both real embeddings.
pub fn totally_positive(x: &QInt) -> bool {
    RealEmbedding::both()
        .into_iter()
        .all(|e| x.sign_exact(e) > 0)
}

/// Convenience constructor for rationals.
pub fn rational(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}
