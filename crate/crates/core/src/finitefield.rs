//! Prime fields and their quadratic extensions.
//!
//! `F_{p^2}` is modelled as `F_p[t]/(t^2 + m1 t + m0)`. For odd `p` the modulus
//! is `t^2 + 1` whenever `-1` is a non-residue (so `F_9` and `F_49` both use
//! `t^2 + 1`), otherwise `t^2 - n` for the least non-residue `n`. Characteristic
//! two uses `t^2 + t + 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest prime for which construction checks irreducibility by trying every root.
const EXHAUSTIVE_ROOT_CHECK: u64 = 1 << 16;

/// Element `c0 + c1 t` with coefficients reduced to `[0, p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FFElem {
    pub c0: u64,
    pub c1: u64,
}

impl FFElem {
    pub const fn new(c0: u64, c1: u64) -> Self {
        FFElem { c0, c1 }
    }

    pub fn is_zero(&self) -> bool {
        self.c0 == 0 && self.c1 == 0
    }
}

impl std::fmt::Display for FFElem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.c1 == 0 {
            write!(f, "{}", self.c0)
        } else {
            write!(f, "{}+{}t", self.c0, self.c1)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FiniteField {
    p: u64,
    degree: u32,
    m1: u64,
    m0: u64,
}

pub(crate) fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for small in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n.is_multiple_of(small) {
            return n == small;
        }
    }
    // deterministic Miller-Rabin for 64-bit inputs
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

#[inline]
pub(crate) fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub(crate) fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Euler's criterion in `F_p`, `p` odd.
pub(crate) fn legendre_mod(a: u64, p: u64) -> i8 {
    let a = a % p;
    if a == 0 {
        return 0;
    }
    if pow_mod(a, (p - 1) / 2, p) == 1 {
        1
    } else {
        -1
    }
}

/// A square root of `a` modulo the odd prime `p` (Tonelli-Shanks), if one exists.
pub(crate) fn sqrt_mod(a: u64, p: u64) -> Option<u64> {
    let a = a % p;
    if a == 0 {
        return Some(0);
    }
    if p == 2 {
        return Some(a);
    }
    if legendre_mod(a, p) != 1 {
        return None;
    }
    let mut q = p - 1;
    let mut s = 0u32;
    while q.is_multiple_of(2) {
        q /= 2;
        s += 1;
    }
    let mut z = 2;
    while legendre_mod(z, p) != -1 {
        z += 1;
    }
    let mut m = s;
    let mut c = pow_mod(z, q, p);
    let mut t = pow_mod(a, q, p);
    let mut r = pow_mod(a, q.div_ceil(2), p);
    while t != 1 {
        let mut i = 0;
        let mut t2 = t;
        while t2 != 1 {
            t2 = mul_mod(t2, t2, p);
            i += 1;
        }
        let b = pow_mod(c, 1 << (m - i - 1), p);
        m = i;
        c = mul_mod(b, b, p);
        t = mul_mod(t, c, p);
        r = mul_mod(r, b, p);
    }
    Some(r)
}

impl FiniteField {
    /// The field with `p^degree` elements in the fixed model described at module level.
    pub fn new(p: u64, degree: u32) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        match degree {
            1 => Ok(FiniteField {
                p,
                degree,
                m1: 0,
                m0: 0,
            }),
            2 if p == 2 => Self::with_modulus(2, 1, 1),
            2 => {
                let n = if legendre_mod(p - 1, p) == -1 {
                    p - 1
                } else {
                    (2..p)
                        .find(|&n| legendre_mod(n, p) == -1)
                        .expect("odd prime has a non-residue")
                };
                Self::with_modulus(p, 0, (p - n) % p)
            }
            _ => Err(Error::UnsupportedFiniteField { p, degree }),
        }
    }

    /// `F_p[t]/(t^2 + m1 t + m0)`, rejecting reducible moduli.
    pub fn with_modulus(p: u64, m1: u64, m0: u64) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        let (m1, m0) = (m1 % p, m0 % p);
        let has_root = if p <= EXHAUSTIVE_ROOT_CHECK {
            (0..p).any(|x| (mul_mod(x, x, p) + mul_mod(m1, x, p) + m0).is_multiple_of(p))
        } else {
            // odd p: reducible iff the discriminant m1^2 - 4 m0 is a square
            let disc = (mul_mod(m1, m1, p) + p - mul_mod(4 % p, m0, p)) % p;
            legendre_mod(disc, p) != -1
        };
        if has_root {
            return Err(Error::ReducibleModulus { p, m1, m0 });
        }
        Ok(FiniteField {
            p,
            degree: 2,
            m1,
            m0,
        })
    }

    pub fn characteristic(&self) -> u64 {
        self.p
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// Number of elements.
    pub fn order(&self) -> u64 {
        self.p.pow(self.degree)
    }

    /// Coefficients `(m1, m0)` of the modulus `t^2 + m1 t + m0` (zero for prime fields).
    pub fn modulus(&self) -> (u64, u64) {
        (self.m1, self.m0)
    }

    pub fn zero(&self) -> FFElem {
        FFElem::new(0, 0)
    }

    pub fn one(&self) -> FFElem {
        FFElem::new(1 % self.p, 0)
    }

    /// The generator `t` of a degree-2 field.
    pub fn gen(&self) -> FFElem {
        assert_eq!(self.degree, 2, "prime field has no generator t");
        FFElem::new(0, 1)
    }

    pub fn from_int(&self, n: i64) -> FFElem {
        FFElem::new(n.rem_euclid(self.p as i64) as u64, 0)
    }

    pub fn elem(&self, c0: u64, c1: u64) -> FFElem {
        debug_assert!(self.degree == 2 || c1 == 0);
        FFElem::new(c0 % self.p, c1 % self.p)
    }

    /// Dense index `c0 + p c1` in `[0, q)`.
    pub fn index(&self, x: FFElem) -> usize {
        (x.c0 + self.p * x.c1) as usize
    }

    pub fn from_index(&self, i: usize) -> FFElem {
        let i = i as u64;
        FFElem::new(i % self.p, i / self.p)
    }

    /// All elements in index order. Only sensible for small fields.
    pub fn elements(&self) -> impl Iterator<Item = FFElem> + '_ {
        (0..self.order() as usize).map(move |i| self.from_index(i))
    }

    pub fn enumerate_units(&self) -> Vec<FFElem> {
        self.elements().filter(|x| !x.is_zero()).collect()
    }

    pub fn add(&self, a: FFElem, b: FFElem) -> FFElem {
        FFElem::new((a.c0 + b.c0) % self.p, (a.c1 + b.c1) % self.p)
    }

    pub fn neg(&self, a: FFElem) -> FFElem {
        FFElem::new((self.p - a.c0) % self.p, (self.p - a.c1) % self.p)
    }

    pub fn sub(&self, a: FFElem, b: FFElem) -> FFElem {
        self.add(a, self.neg(b))
    }

    pub fn mul(&self, a: FFElem, b: FFElem) -> FFElem {
        let p = self.p;
        if self.degree == 1 {
            return FFElem::new(mul_mod(a.c0, b.c0, p), 0);
        }
        // t^2 = -m1 t - m0
        let hi = mul_mod(a.c1, b.c1, p);
        let c0 = (mul_mod(a.c0, b.c0, p) + p - mul_mod(hi, self.m0, p)) % p;
        let c1 =
            (mul_mod(a.c0, b.c1, p) + mul_mod(a.c1, b.c0, p) + p - mul_mod(hi, self.m1, p)) % p;
        FFElem::new(c0, c1)
    }

    pub fn square(&self, a: FFElem) -> FFElem {
        self.mul(a, a)
    }

    pub fn pow(&self, mut base: FFElem, mut exp: u64) -> FFElem {
        let mut acc = self.one();
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    pub fn inverse(&self, a: FFElem) -> Result<FFElem> {
        if a.is_zero() {
            return Err(Error::DivisionByZero);
        }
        Ok(self.pow(a, self.order() - 2))
    }

    pub fn frobenius(&self, a: FFElem) -> FFElem {
        self.pow(a, self.p)
    }

    /// Quadratic character: `0` at zero, otherwise `x^((q-1)/2)` read as `±1`.
    /// Every element of a characteristic-two field is a square.
    pub fn chi(&self, x: FFElem) -> i8 {
        if x.is_zero() {
            return 0;
        }
        if self.p == 2 {
            return 1;
        }
        let e = self.pow(x, (self.order() - 1) / 2);
        if e == self.one() {
            1
        } else {
            debug_assert_eq!(e, self.neg(self.one()));
            -1
        }
    }

    /// Multiplicative order of a unit.
    pub fn element_order(&self, x: FFElem) -> Option<u64> {
        if x.is_zero() {
            return None;
        }
        let n = self.order() - 1;
        let mut order = n;
        for (prime, _) in crate::quadfield::factor_u64(n) {
            while order.is_multiple_of(prime) && self.pow(x, order / prime) == self.one() {
                order /= prime;
            }
        }
        Some(order)
    }

    /// Every element of exact multiplicative order `r`, sorted by index.
    pub fn roots_of_unity(&self, r: u64) -> Result<Vec<FFElem>> {
        let n = self.order() - 1;
        if r == 0 || !n.is_multiple_of(r) {
            return Err(Error::NoRootsOfUnity {
                order: r,
                q: self.order(),
            });
        }
        let mut roots: Vec<FFElem> = self
            .elements()
            .filter(|&x| self.element_order(x) == Some(r))
            .collect();
        roots.sort_by_key(|&x| self.index(x));
        Ok(roots)
    }

    /// Roots in this field of the monic quadratic `x^2 + b x + c`.
    pub fn quadratic_roots(&self, b: FFElem, c: FFElem) -> Vec<FFElem> {
        self.elements()
            .filter(|&x| {
                self.add(self.add(self.square(x), self.mul(b, x)), c)
                    .is_zero()
            })
            .collect()
    }

    /// Lookup table of `chi` indexed by [`FiniteField::index`].
    pub fn chi_table(&self) -> Vec<i8> {
        self.elements().map(|x| self.chi(x)).collect()
    }
}

impl std::fmt::Display for FiniteField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "F_{}", self.order())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f9() -> FiniteField {
        FiniteField::new(3, 2).unwrap()
    }

    fn f49() -> FiniteField {
        FiniteField::new(7, 2).unwrap()
    }

    #[test]
    fn fixed_models() {
        assert_eq!(f9().modulus(), (0, 1));
        assert_eq!(f49().modulus(), (0, 1));
        assert_eq!(f9().enumerate_units().len(), 8);
        assert_eq!(f49().enumerate_units().len(), 48);
        let f7 = FiniteField::new(7, 1).unwrap();
        assert_eq!(f7.order(), 7);
        // -1 is a residue mod 5, so F_25 falls back to t^2 - 2
        assert_eq!(FiniteField::new(5, 2).unwrap().modulus(), (0, 3));
        assert_eq!(FiniteField::new(2, 2).unwrap().order(), 4);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(FiniteField::new(9, 1), Err(Error::NotPrime(9)));
        assert!(matches!(
            FiniteField::with_modulus(5, 0, 1),
            Err(Error::ReducibleModulus { .. })
        ));
        assert!(matches!(
            FiniteField::new(3, 3),
            Err(Error::UnsupportedFiniteField { .. })
        ));
    }

    #[test]
    fn chi_basics() {
        let f = f9();
        assert_eq!(f.chi(f.one()), 1);
        assert_eq!(f.chi(f.zero()), 0);
        assert_eq!(f.chi(f.from_int(-1)), 1);
        let f7 = FiniteField::new(7, 1).unwrap();
        assert_eq!(f7.chi(f7.from_int(-1)), -1);
        assert_eq!(f7.chi(f7.from_int(2)), 1);
    }

    #[test]
    fn roots_of_unity_examples() {
        let f7 = FiniteField::new(7, 1).unwrap();
        // oracle: x^2 + x + 1 = 0 mod 7 by exhaustion
        let oracle: Vec<FFElem> = (0..7u64)
            .filter(|x| (x * x + x + 1) % 7 == 0)
            .map(|x| FFElem::new(x, 0))
            .collect();
        assert_eq!(oracle, vec![FFElem::new(2, 0), FFElem::new(4, 0)]);
        assert_eq!(f7.roots_of_unity(3).unwrap(), oracle);
        assert_eq!(f9().roots_of_unity(1).unwrap(), vec![f9().one()]);
        assert!(matches!(
            f9().roots_of_unity(3),
            Err(Error::NoRootsOfUnity { .. })
        ));
        assert_eq!(f49().roots_of_unity(48).unwrap().len(), 16);
    }

    #[test]
    fn inverse_and_fermat() {
        for f in [f9(), f49(), FiniteField::new(7, 1).unwrap()] {
            for x in f.enumerate_units() {
                assert_eq!(f.mul(x, f.inverse(x).unwrap()), f.one());
                assert_eq!(f.pow(x, f.order() - 1), f.one());
            }
            assert_eq!(f.inverse(f.zero()), Err(Error::DivisionByZero));
        }
    }

    #[test]
    fn chi_multiplicative_and_balanced() {
        for f in [f9(), f49()] {
            let table = f.chi_table();
            for x in f.elements() {
                for y in f.elements() {
                    assert_eq!(
                        table[f.index(f.mul(x, y))],
                        table[f.index(x)] * table[f.index(y)]
                    );
                }
            }
            let squares = f
                .enumerate_units()
                .into_iter()
                .filter(|&x| f.chi(x) == 1)
                .count();
            assert_eq!(squares as u64, (f.order() - 1) / 2);
        }
    }

    #[test]
    fn frobenius_fixes_prime_field() {
        for (p, deg) in [(3, 2), (7, 2), (5, 2), (2, 2), (7, 1)] {
            let f = FiniteField::new(p, deg).unwrap();
            let fixed: Vec<_> = f.elements().filter(|&x| f.frobenius(x) == x).collect();
            assert_eq!(fixed.len() as u64, p);
            assert!(fixed.iter().all(|x| x.c1 == 0));
            for x in f.elements() {
                for y in f.elements() {
                    assert_eq!(
                        f.frobenius(f.add(x, y)),
                        f.add(f.frobenius(x), f.frobenius(y))
                    );
                    assert_eq!(
                        f.frobenius(f.mul(x, y)),
                        f.mul(f.frobenius(x), f.frobenius(y))
                    );
                }
            }
        }
    }

    #[test]
    fn tonelli_shanks() {
        for p in [3u64, 7, 13, 17, 41, 97, 1_000_003] {
            for a in 1..50u64 {
                match sqrt_mod(a, p) {
                    Some(r) => assert_eq!(mul_mod(r, r, p), a % p),
                    None => assert_eq!(legendre_mod(a, p), -1),
                }
            }
        }
    }

    #[test]
    fn primality() {
        let small: Vec<u64> = (0..60).filter(|&n| is_prime(n)).collect();
        assert_eq!(
            small,
            vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59]
        );
        assert!(is_prime(1_000_000_007));
        assert!(!is_prime(1_000_000_007 * 3));
    }
}
