//! Exact rational arithmetic, quadratic etale algebras over Q, quadratic
//! symbols, and quadratic Hecke characters.
//!
//! Everything here is exact: rationals are arbitrary-precision reduced
//! fractions, valuations are computed by trial division, and character
//! values are integers in `{-1, 0, 1}`.

mod characters;
mod padic;

pub use characters::{fundamental_discs_supported_on, QuadraticCharacter};
pub use padic::PadicElem;

use num::{BigInt, BigRational, One, Signed, Zero};
use num_traits::ToPrimitive;

use crate::{Error, Result};

/// Exact rational number (reduced fraction, positive denominator).
pub type Rat = BigRational;

/// Serde adapter serializing rationals as "p/q" strings.
pub mod rat_string {
    use super::Rat;
    use std::str::FromStr;

    pub fn serialize<S: serde::Serializer>(x: &Rat, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&x.to_string())
    }

    pub fn deserialize<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Rat, D::Error> {
        let text = <String as serde::Deserialize>::deserialize(d)?;
        match text.split_once('/') {
            Some((n, q)) => {
                let n = num::BigInt::from_str(n).map_err(serde::de::Error::custom)?;
                let q = num::BigInt::from_str(q).map_err(serde::de::Error::custom)?;
                Ok(Rat::new(n, q))
            }
            None => {
                let n = num::BigInt::from_str(&text).map_err(serde::de::Error::custom)?;
                Ok(Rat::from_integer(n))
            }
        }
    }
}

/// Shorthand for an integer rational.
pub fn rat_i(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Shorthand for `n / d`.
pub fn rat(n: i64, d: i64) -> Rat {
    assert!(d != 0, "zero denominator");
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_to_f64(x: &Rat) -> f64 {
    x.to_f64().expect("rational out of f64 range")
}

/// p-adic valuation of a nonzero integer.
pub fn val_p_int(n: &BigInt, p: u64) -> i64 {
    assert!(!n.is_zero());
    let p = BigInt::from(p);
    let mut n = n.clone();
    let mut v = 0;
    while (&n % &p).is_zero() {
        n /= &p;
        v += 1;
    }
    v
}

/// p-adic valuation of a nonzero rational.
pub fn val_p(x: &Rat, p: u64) -> i64 {
    assert!(!x.is_zero(), "valuation of zero");
    val_p_int(x.numer(), p) - val_p_int(x.denom(), p)
}

/// Normalized p-adic absolute value `p^{-v_p(x)}` of a rational, with
/// `|0|_p = 0`.
pub fn abs_p(x: &Rat, p: u64) -> Rat {
    if x.is_zero() {
        return Rat::zero();
    }
    pow_rat(&rat_i(p as i64), -val_p(x, p))
}

pub fn pow_rat(x: &Rat, e: i64) -> Rat {
    if e >= 0 {
        x.pow(e as i32)
    } else {
        x.pow(-e as i32).recip()
    }
}

/// Trial-division factorization of a positive integer.
pub fn factor(n: &BigInt) -> Vec<(u64, u32)> {
    assert!(n.is_positive(), "factor() wants a positive integer");
    let mut n = n.clone();
    let mut out = Vec::new();
    let mut p = BigInt::from(2u64);
    while &p * &p <= n {
        if (&n % &p).is_zero() {
            let mut e = 0u32;
            while (&n % &p).is_zero() {
                n /= &p;
                e += 1;
            }
            out.push((p.to_u64().expect("prime factor too large"), e));
        }
        p += 1;
    }
    if n > BigInt::one() {
        out.push((n.to_u64().expect("prime factor too large"), 1));
    }
    out
}

/// Primes dividing numerator or denominator of a nonzero rational.
pub fn support_primes(x: &Rat) -> Vec<u64> {
    assert!(!x.is_zero());
    let mut ps: Vec<u64> = factor(&x.numer().abs().max(BigInt::one()))
        .into_iter()
        .map(|(p, _)| p)
        .collect();
    if x.numer().is_zero() {
        ps.clear();
    }
    for (p, _) in factor(&x.denom().abs()) {
        ps.push(p);
    }
    ps.sort_unstable();
    ps.dedup();
    ps
}

/// Adelic absolute value of a nonzero rational, computed honestly as the
/// product of the archimedean absolute value with every nontrivial local
/// factor. Equals 1 by the product formula; callers assert this.
pub fn adelic_abs(x: &Rat) -> Rat {
    assert!(!x.is_zero());
    let mut out = x.abs();
    for p in support_primes(x) {
        out *= abs_p(x, p);
    }
    out
}

/// Signed squarefree part: the unique squarefree `s` with `n = s m^2`,
/// `sign(s) = sign(n)`.
pub fn squarefree_part(n: i128) -> Result<i128> {
    if n == 0 {
        return Err(Error::Domain("squarefree part of zero".into()));
    }
    let sign = n.signum();
    let mut n = n.abs();
    let mut s: i128 = 1;
    let mut p: i128 = 2;
    while p * p <= n {
        if n % p == 0 {
            let mut e = 0u32;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            if e % 2 == 1 {
                s *= p;
            }
        }
        p += if p == 2 { 1 } else { 2 };
    }
    Ok(sign * s * n)
}

/// Square class of a nonzero rational as a signed squarefree integer:
/// `x = s y^2` with `s` squarefree.
pub fn square_class(x: &Rat) -> Result<i64> {
    if x.is_zero() {
        return Err(Error::Domain("square class of zero".into()));
    }
    let prod = x.numer() * x.denom();
    let n = prod
        .to_i128()
        .ok_or_else(|| Error::Domain("square class input too large".into()))?;
    let s = squarefree_part(n)?;
    s.to_i64()
        .ok_or_else(|| Error::Domain("square class out of range".into()))
}

/// Kronecker symbol `(a|n)`, extended to all integers.
pub fn kronecker(a: i64, n: i64) -> i64 {
    if n == 0 {
        return if a == 1 || a == -1 { 1 } else { 0 };
    }
    let mut a = a;
    let mut n = n;
    let mut result = 1i64;
    if n < 0 {
        n = -n;
        if a < 0 {
            result = -result;
        }
    }
    // (a|2) factor for each power of two in n.
    let mut e2 = 0;
    while n % 2 == 0 {
        n /= 2;
        e2 += 1;
    }
    if e2 > 0 {
        if a % 2 == 0 {
            return 0;
        }
        let am8 = a.rem_euclid(8);
        let k2 = if am8 == 1 || am8 == 7 { 1 } else { -1 };
        if e2 % 2 == 1 && k2 == -1 {
            result = -result;
        }
    }
    // Now n is odd and positive; use the Jacobi symbol with reciprocity.
    a = a.rem_euclid(n);
    while a != 0 {
        while a % 2 == 0 {
            a /= 2;
            let nm8 = n.rem_euclid(8);
            if nm8 == 3 || nm8 == 5 {
                result = -result;
            }
        }
        std::mem::swap(&mut a, &mut n);
        if a.rem_euclid(4) == 3 && n.rem_euclid(4) == 3 {
            result = -result;
        }
        a = a.rem_euclid(n);
    }
    if n == 1 {
        result
    } else {
        0
    }
}

/// Unit part of `x = p^v u` as a positive integer mod `p^k`.
pub fn unit_part_mod_pk(x: &Rat, p: u64, k: u32) -> i64 {
    // x = p^v u with u a unit; returns u mod p^k as a positive integer.
    let v = val_p(x, p);
    let pk = BigInt::from(p).pow(k);
    let pv = pow_rat(&rat_i(p as i64), v);
    let u = x / pv;
    // u = a/b with a, b prime to p; u mod p^k = a * b^{-1} mod p^k.
    let a = u.numer().mod_floor(&pk);
    let b = u.denom().mod_floor(&pk);
    let binv = mod_inverse(&b, &pk);
    (a * binv).mod_floor(&pk).to_i64().unwrap()
}

fn mod_inverse(a: &BigInt, m: &BigInt) -> BigInt {
    // Extended Euclid; panics if gcd != 1.
    let (mut r0, mut r1) = (m.clone(), a.mod_floor(m));
    let (mut t0, mut t1) = (BigInt::zero(), BigInt::one());
    while !r1.is_zero() {
        let q = &r0 / &r1;
        let r2 = &r0 - &q * &r1;
        r0 = std::mem::replace(&mut r1, r2);
        let t2 = &t0 - &q * &t1;
        t0 = std::mem::replace(&mut t1, t2);
    }
    assert!(r0.is_one(), "mod_inverse of a non-unit");
    t0.mod_floor(m)
}

use num::Integer as _;

/// Hilbert symbol `(a, b)_p` at a finite prime, for nonzero rationals.
pub fn hilbert_p(a: &Rat, b: &Rat, p: u64) -> i64 {
    assert!(!a.is_zero() && !b.is_zero());
    let alpha = val_p(a, p);
    let beta = val_p(b, p);
    if p != 2 {
        let u = unit_part_mod_pk(a, p, 1);
        let w = unit_part_mod_pk(b, p, 1);
        let leg_u = kronecker(u, p as i64);
        let leg_w = kronecker(w, p as i64);
        let eps = (p - 1) / 2; // parity of (p-1)/2
        let mut s = 1i64;
        if (alpha * beta) % 2 != 0 && eps % 2 == 1 {
            s = -s;
        }
        if beta % 2 != 0 && leg_u == -1 {
            s = -s;
        }
        if alpha % 2 != 0 && leg_w == -1 {
            s = -s;
        }
        s
    } else {
        let u = unit_part_mod_pk(a, 2, 3); // unit mod 8
        let w = unit_part_mod_pk(b, 2, 3);
        let eps = |x: i64| ((x - 1) / 2) % 2; // (u-1)/2 mod 2 for odd u
        let omega = |x: i64| ((x * x - 1) / 8) % 2;
        let mut exp = eps(u) * eps(w) + alpha * omega(w) + beta * omega(u);
        exp = exp.rem_euclid(2);
        if exp == 0 {
            1
        } else {
            -1
        }
    }
}

/// Hilbert symbol at the archimedean place.
pub fn hilbert_inf(a: &Rat, b: &Rat) -> i64 {
    if a.is_negative() && b.is_negative() {
        -1
    } else {
        1
    }
}

/// A quadratic etale Q-algebra, encoded by its squarefree core:
/// core 1 is the split algebra `Q x Q`, core `d != 1` is `Q(sqrt d)`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, serde::Serialize, serde::Deserialize)]
pub struct QuadAlg {
    core: i64,
}

impl QuadAlg {
    pub fn new(core: i64) -> Result<Self> {
        if core == 0 {
            return Err(Error::Domain("quadratic algebra core must be nonzero".into()));
        }
        let s = squarefree_part(core as i128)?;
        if s != core as i128 {
            return Err(Error::Domain(format!("core {core} is not squarefree")));
        }
        Ok(QuadAlg { core })
    }

    /// The algebra `Q[x]/(x^2 - n)` for any nonzero `n`, reducing to the core.
    pub fn from_radicand(n: i128) -> Result<Self> {
        let s = squarefree_part(n)?;
        let core = s
            .to_i64()
            .ok_or_else(|| Error::Domain("radicand out of range".into()))?;
        Ok(QuadAlg { core })
    }

    /// Reads a fundamental discriminant (or 1) back to the core.
    pub fn from_discriminant(d: i64) -> Result<Self> {
        if d == 1 {
            return Ok(QuadAlg { core: 1 });
        }
        if d.rem_euclid(4) == 1 {
            Self::new(d)
        } else if d % 4 == 0 {
            Self::from_radicand((d / 4) as i128)
        } else {
            Err(Error::Domain(format!("{d} is not a discriminant")))
        }
    }

    pub fn split() -> Self {
        QuadAlg { core: 1 }
    }

    pub fn core(&self) -> i64 {
        self.core
    }

    pub fn is_split(&self) -> bool {
        self.core == 1
    }

    /// Fundamental discriminant: `d` if `d = 1 mod 4`, else `4d`.
    pub fn discriminant(&self) -> i64 {
        if self.core.rem_euclid(4) == 1 {
            self.core
        } else {
            4 * self.core
        }
    }

    /// Splitting behavior of a rational prime in the algebra.
    pub fn local_splitting(&self, p: u64) -> LocalSplitting {
        if self.is_split() {
            return LocalSplitting::Split;
        }
        match kronecker(self.discriminant(), p as i64) {
            1 => LocalSplitting::Split,
            -1 => LocalSplitting::Inert,
            _ => LocalSplitting::Ramified,
        }
    }

    /// Reflection through `e`: the third quadratic subalgebra of the
    /// compositum `self (x) e`. An involution interchanging `e` and the
    /// split algebra.
    pub fn reflect_through(&self, e: &QuadAlg) -> QuadAlg {
        let prod = (self.core as i128) * (e.core as i128);
        let s = squarefree_part(prod).expect("nonzero cores") as i64;
        QuadAlg { core: s }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, serde::Serialize, serde::Deserialize)]
pub enum LocalSplitting {
    Split,
    Inert,
    Ramified,
}

/// An element `x + y sqrt(d)` of a quadratic etale algebra. In the split
/// case (`d = 1`) this is the pair `(x + y, x - y)` in the idempotent
/// basis, and conjugation swaps the two components.
#[derive(Clone, PartialEq, Debug)]
pub struct QuadElem {
    pub alg: QuadAlg,
    pub x: Rat,
    pub y: Rat,
}

impl QuadElem {
    pub fn new(alg: QuadAlg, x: Rat, y: Rat) -> Self {
        QuadElem { alg, x, y }
    }

    pub fn from_rat(alg: QuadAlg, x: Rat) -> Self {
        QuadElem { alg, x, y: Rat::zero() }
    }

    pub fn zero(alg: QuadAlg) -> Self {
        Self::from_rat(alg, Rat::zero())
    }

    pub fn one(alg: QuadAlg) -> Self {
        Self::from_rat(alg, Rat::one())
    }

    /// The square root of the core, as an element.
    pub fn sqrt_core(alg: QuadAlg) -> Self {
        QuadElem { alg, x: Rat::zero(), y: Rat::one() }
    }

    pub fn is_zero(&self) -> bool {
        self.x.is_zero() && self.y.is_zero()
    }

    pub fn is_rational(&self) -> bool {
        self.y.is_zero()
    }

    pub fn conj(&self) -> Self {
        QuadElem { alg: self.alg, x: self.x.clone(), y: -self.y.clone() }
    }

    pub fn norm(&self) -> Rat {
        &self.x * &self.x - rat_i(self.alg.core()) * &self.y * &self.y
    }

    pub fn trace(&self) -> Rat {
        &self.x + &self.x
    }

    pub fn add(&self, o: &Self) -> Self {
        assert_eq!(self.alg, o.alg);
        QuadElem { alg: self.alg, x: &self.x + &o.x, y: &self.y + &o.y }
    }

    pub fn sub(&self, o: &Self) -> Self {
        assert_eq!(self.alg, o.alg);
        QuadElem { alg: self.alg, x: &self.x - &o.x, y: &self.y - &o.y }
    }

    pub fn neg(&self) -> Self {
        QuadElem { alg: self.alg, x: -self.x.clone(), y: -self.y.clone() }
    }

    pub fn mul(&self, o: &Self) -> Self {
        assert_eq!(self.alg, o.alg);
        let d = rat_i(self.alg.core());
        QuadElem {
            alg: self.alg,
            x: &self.x * &o.x + &d * &self.y * &o.y,
            y: &self.x * &o.y + &self.y * &o.x,
        }
    }

    /// Multiplicative inverse; `None` for zero divisors and zero.
    pub fn inv(&self) -> Option<Self> {
        let n = self.norm();
        if n.is_zero() {
            return None;
        }
        let c = self.conj();
        Some(QuadElem { alg: self.alg, x: c.x / &n, y: c.y / &n })
    }
}

impl std::fmt::Display for QuadElem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} + {}*sqrt({})", self.x, self.y, self.alg.core())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn squarefree_examples() {
        assert_eq!(squarefree_part(8).unwrap(), 2);
        assert_eq!(squarefree_part(1).unwrap(), 1);
        // oracle: -12 = -3 * 2^2 by trial factorization
        assert_eq!(squarefree_part(-12).unwrap(), -3);
        assert!(squarefree_part(0).is_err());
    }

    #[test]
    fn kronecker_examples() {
        for d in [-7, -4, -3, 1, 5, 8, 12] {
            assert_eq!(kronecker(d, 1), 1);
        }
        // oracle: Legendre symbol, -1 is a non-residue mod 3
        assert_eq!(kronecker(-4, 3), -1);
        // oracle: (2|7)^3, 7 = -1 mod 8
        assert_eq!(kronecker(8, 7), 1);
        assert_eq!(kronecker(12, 2), 0);
    }

    #[test]
    fn local_splitting_examples() {
        let gauss = QuadAlg::new(-1).unwrap();
        // 2^2 = -1 mod 5
        assert_eq!(gauss.local_splitting(5), LocalSplitting::Split);
        // -1 non-residue mod 3
        assert_eq!(gauss.local_splitting(3), LocalSplitting::Inert);
        // 2 divides disc(Q(i)) = -4
        assert_eq!(gauss.local_splitting(2), LocalSplitting::Ramified);
        assert_eq!(QuadAlg::split().local_splitting(7), LocalSplitting::Split);
    }

    #[test]
    fn reflection_examples() {
        let e = QuadAlg::new(-1).unwrap();
        let l = QuadAlg::new(2).unwrap();
        // oracle: quadratic subfields of Q(sqrt 2, i) are Q(sqrt 2), Q(i), Q(sqrt -2)
        assert_eq!(l.reflect_through(&e).core(), -2);
        assert_eq!(e.reflect_through(&e), QuadAlg::split());
        assert_eq!(QuadAlg::split().reflect_through(&e), e);
    }

    #[test]
    fn reflection_is_involution_sweep() {
        let e = QuadAlg::new(-1).unwrap();
        let mut count = 0;
        let mut d = -120i64;
        while count < 100 {
            d += 1;
            if d == 0 {
                continue;
            }
            if let Ok(l) = QuadAlg::new(squarefree_part(d as i128).unwrap() as i64) {
                let r = l.reflect_through(&e).reflect_through(&e);
                assert_eq!(r, l, "reflection not involutive at {d}");
                count += 1;
            }
        }
    }

    #[test]
    fn hilbert_symbol_basics() {
        // (-1,-1)_2 = -1, (-1,-1)_p = 1 for odd p, (-1,-1)_inf = -1:
        // product over all places is 1.
        let m1 = rat_i(-1);
        assert_eq!(hilbert_p(&m1, &m1, 2), -1);
        assert_eq!(hilbert_p(&m1, &m1, 3), 1);
        assert_eq!(hilbert_p(&m1, &m1, 5), 1);
        assert_eq!(hilbert_inf(&m1, &m1), -1);
        // (2, 7)_7: 2 is a QR mod 7
        assert_eq!(hilbert_p(&rat_i(2), &rat_i(7), 7), 1);
        // (3, 7)_7: 3 is not a QR mod 7
        assert_eq!(hilbert_p(&rat_i(3), &rat_i(7), 7), -1);
    }

    #[test]
    fn hilbert_product_formula_sweep() {
        let vals = [-10i64, -7, -3, -2, -1, 2, 3, 5, 6, 15];
        for &a in &vals {
            for &b in &vals {
                let (ra, rb) = (rat_i(a), rat_i(b));
                let mut prod = hilbert_inf(&ra, &rb);
                let mut ps = support_primes(&ra);
                ps.extend(support_primes(&rb));
                ps.push(2);
                ps.sort_unstable();
                ps.dedup();
                for p in ps {
                    prod *= hilbert_p(&ra, &rb, p);
                }
                assert_eq!(prod, 1, "product formula fails for ({a},{b})");
            }
        }
    }

    #[test]
    fn adelic_abs_is_one() {
        for x in [rat(3, 7), rat(-50, 9), rat_i(1), rat(22, 1)] {
            assert_eq!(adelic_abs(&x), rat_i(1));
        }
    }

    proptest! {
        #[test]
        fn squarefree_idempotent(n in -10_000i128..10_000) {
            prop_assume!(n != 0);
            let s = squarefree_part(n).unwrap();
            prop_assert_eq!(squarefree_part(s).unwrap(), s);
        }

        #[test]
        fn kronecker_multiplicative(d in -60i64..60, m in 1i64..60, n in 1i64..60) {
            prop_assume!(d != 0);
            prop_assert_eq!(kronecker(d, m * n), kronecker(d, m) * kronecker(d, n));
        }

        #[test]
        fn quadelem_norm_multiplicative(
            core in prop::sample::select(vec![-5i64, -2, -1, 1, 2, 3, 5]),
            ax in -9i64..9, ay in -9i64..9, bx in -9i64..9, by in -9i64..9,
        ) {
            let alg = QuadAlg::new(core).unwrap();
            let a = QuadElem::new(alg, rat_i(ax), rat_i(ay));
            let b = QuadElem::new(alg, rat_i(bx), rat_i(by));
            prop_assert_eq!(a.mul(&b).norm(), a.norm() * b.norm());
        }
    }
}
