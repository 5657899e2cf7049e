//! Bounded-precision p-adic numbers.
//!
//! A nonzero element is stored as `p^val * unit + O(p^(val + prec))` with
//! `unit` an invertible residue mod `p^prec`. Zero comes in two flavours:
//! the exact zero, and an approximate zero `O(p^k)` produced when addition
//! cancels every known digit. Precision propagates pessimistically and
//! never increases through arithmetic. Equality means equality to the
//! jointly known precision.

use num::{BigInt, Integer, One, Zero};
use num_traits::ToPrimitive;

use super::{pow_rat, rat_i, val_p, Rat};
use crate::{Error, Result};

/// Default relative precision, in digits.
pub const DEFAULT_PREC: u32 = 20;

#[derive(Clone, Debug)]
pub enum PadicElem {
    /// Exact zero.
    Zero { prime: u64 },
    /// A zero known only to absolute precision `O(p^abs_prec)`.
    ZeroApprox { prime: u64, abs_prec: i64 },
    NonZero {
        prime: u64,
        val: i64,
        /// Unit residue mod p^prec, in `[1, p^prec)`, prime to p.
        unit: BigInt,
        /// Relative precision in digits, at least 1.
        prec: u32,
    },
}

impl PadicElem {
    pub fn prime(&self) -> u64 {
        match self {
            PadicElem::Zero { prime }
            | PadicElem::ZeroApprox { prime, .. }
            | PadicElem::NonZero { prime, .. } => *prime,
        }
    }

    pub fn zero(prime: u64) -> Self {
        PadicElem::Zero { prime }
    }

    pub fn from_i64(prime: u64, n: i64) -> Self {
        Self::from_rat_prec(prime, &rat_i(n), DEFAULT_PREC)
    }

    pub fn from_rat(prime: u64, x: &Rat) -> Self {
        Self::from_rat_prec(prime, x, DEFAULT_PREC)
    }

    /// Exact rational into a p-adic value at the given relative precision.
    pub fn from_rat_prec(prime: u64, x: &Rat, prec: u32) -> Self {
        assert!(prec >= 1);
        if x.is_zero() {
            return PadicElem::Zero { prime };
        }
        let v = val_p(x, prime);
        let u = x / pow_rat(&rat_i(prime as i64), v);
        let pk = BigInt::from(prime).pow(prec);
        let num = u.numer().mod_floor(&pk);
        let den = u.denom().mod_floor(&pk);
        let unit = (num * mod_inv(&den, &pk)).mod_floor(&pk);
        PadicElem::NonZero { prime, val: v, unit, prec }
    }

    pub fn is_exact_zero(&self) -> bool {
        matches!(self, PadicElem::Zero { .. })
    }

    pub fn is_zero_to_prec(&self) -> bool {
        !matches!(self, PadicElem::NonZero { .. })
    }

    /// Known valuation. Errors on approximate zeros, where only a lower
    /// bound is known.
    pub fn valuation(&self) -> Result<i64> {
        match self {
            PadicElem::NonZero { val, .. } => Ok(*val),
            PadicElem::Zero { .. } => Err(Error::Domain("valuation of zero".into())),
            PadicElem::ZeroApprox { abs_prec, .. } => Err(Error::Precision(format!(
                "valuation known only to be >= {abs_prec}"
            ))),
        }
    }

    pub fn rel_prec(&self) -> Option<u32> {
        match self {
            PadicElem::NonZero { prec, .. } => Some(*prec),
            _ => None,
        }
    }

    /// Absolute precision exponent: the element is known modulo
    /// `p^abs_prec`. `None` for the exact zero (known to all orders).
    pub fn abs_prec(&self) -> Option<i64> {
        match self {
            PadicElem::Zero { .. } => None,
            PadicElem::ZeroApprox { abs_prec, .. } => Some(*abs_prec),
            PadicElem::NonZero { val, prec, .. } => Some(val + *prec as i64),
        }
    }

    /// Normalized absolute value `p^{-val}`.
    ///
    /// The exact zero gives 0; an approximate zero is a precision error
    /// (|x| is only bounded, not known).
    pub fn abs(&self) -> Result<Rat> {
        match self {
            PadicElem::Zero { .. } => Ok(Rat::zero()),
            PadicElem::ZeroApprox { abs_prec, .. } => Err(Error::Precision(format!(
                "absolute value only bounded by p^-{abs_prec}"
            ))),
            PadicElem::NonZero { prime, val, .. } => {
                Ok(pow_rat(&rat_i(*prime as i64), -*val))
            }
        }
    }

    fn norm_nonzero(prime: u64, val: i64, residue: BigInt, abs_prec: i64) -> Self {
        // residue is the value divided by p^val, known mod p^(abs_prec - val);
        // strip any further p-factors that cancellation may have produced.
        let mut val = val;
        let mut residue = residue;
        let p = BigInt::from(prime);
        loop {
            let digits = abs_prec - val;
            if digits <= 0 {
                return PadicElem::ZeroApprox { prime, abs_prec };
            }
            let pk = p.pow(digits as u32);
            residue = residue.mod_floor(&pk);
            if residue.is_zero() {
                return PadicElem::ZeroApprox { prime, abs_prec };
            }
            if (&residue % &p).is_zero() {
                residue /= &p;
                val += 1;
            } else {
                return PadicElem::NonZero {
                    prime,
                    val,
                    unit: residue,
                    prec: digits as u32,
                };
            }
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        assert_eq!(self.prime(), o.prime());
        let prime = self.prime();
        match (self, o) {
            (PadicElem::Zero { .. }, _) => o.clone(),
            (_, PadicElem::Zero { .. }) => self.clone(),
            (PadicElem::ZeroApprox { abs_prec, .. }, PadicElem::ZeroApprox { abs_prec: b, .. }) => {
                PadicElem::ZeroApprox { prime, abs_prec: (*abs_prec).min(*b) }
            }
            (PadicElem::ZeroApprox { abs_prec, .. }, PadicElem::NonZero { val, unit, prec, .. })
            | (PadicElem::NonZero { val, unit, prec, .. }, PadicElem::ZeroApprox { abs_prec, .. }) => {
                let joint = (*abs_prec).min(val + *prec as i64);
                Self::norm_nonzero(prime, *val, unit.clone(), joint)
            }
            (
                PadicElem::NonZero { val: v1, unit: u1, prec: p1, .. },
                PadicElem::NonZero { val: v2, unit: u2, prec: p2, .. },
            ) => {
                let v = (*v1).min(*v2);
                let joint = (v1 + *p1 as i64).min(v2 + *p2 as i64);
                let p = BigInt::from(prime);
                let r1 = u1 * p.pow((v1 - v) as u32);
                let r2 = u2 * p.pow((v2 - v) as u32);
                Self::norm_nonzero(prime, v, r1 + r2, joint)
            }
        }
    }

    pub fn neg(&self) -> Self {
        match self {
            PadicElem::NonZero { prime, val, unit, prec } => {
                let pk = BigInt::from(*prime).pow(*prec);
                PadicElem::NonZero {
                    prime: *prime,
                    val: *val,
                    unit: (&pk - unit).mod_floor(&pk),
                    prec: *prec,
                }
            }
            z => z.clone(),
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Self) -> Self {
        assert_eq!(self.prime(), o.prime());
        let prime = self.prime();
        match (self, o) {
            (PadicElem::Zero { .. }, _) | (_, PadicElem::Zero { .. }) => {
                PadicElem::Zero { prime }
            }
            (PadicElem::ZeroApprox { abs_prec: a, .. }, PadicElem::ZeroApprox { abs_prec: b, .. }) => {
                PadicElem::ZeroApprox { prime, abs_prec: a + b }
            }
            (PadicElem::ZeroApprox { abs_prec, .. }, PadicElem::NonZero { val, .. })
            | (PadicElem::NonZero { val, .. }, PadicElem::ZeroApprox { abs_prec, .. }) => {
                PadicElem::ZeroApprox { prime, abs_prec: abs_prec + val }
            }
            (
                PadicElem::NonZero { val: v1, unit: u1, prec: p1, .. },
                PadicElem::NonZero { val: v2, unit: u2, prec: p2, .. },
            ) => {
                let prec = (*p1).min(*p2);
                let pk = BigInt::from(prime).pow(prec);
                PadicElem::NonZero {
                    prime,
                    val: v1 + v2,
                    unit: (u1 * u2).mod_floor(&pk),
                    prec,
                }
            }
        }
    }

    pub fn inv(&self) -> Result<Self> {
        match self {
            PadicElem::NonZero { prime, val, unit, prec } => {
                let pk = BigInt::from(*prime).pow(*prec);
                Ok(PadicElem::NonZero {
                    prime: *prime,
                    val: -val,
                    unit: mod_inv(unit, &pk),
                    prec: *prec,
                })
            }
            _ => Err(Error::Domain("inverse of (approximate) zero".into())),
        }
    }

    /// Square root by Hensel lifting, when one exists at the working
    /// precision. Requires even valuation and a square unit part.
    pub fn sqrt(&self) -> Result<Self> {
        match self {
            PadicElem::NonZero { prime, val, unit, prec } => {
                if val % 2 != 0 {
                    return Err(Error::Domain("odd valuation has no square root".into()));
                }
                let r = if *prime == 2 {
                    sqrt_unit_2adic(unit, *prec)?
                } else {
                    sqrt_unit_odd(*prime, unit, *prec)?
                };
                // One digit is lost at p = 2 relative to the radicand.
                let prec_out = if *prime == 2 { prec.saturating_sub(3).max(1) } else { *prec };
                let pk = BigInt::from(*prime).pow(prec_out);
                Ok(PadicElem::NonZero {
                    prime: *prime,
                    val: val / 2,
                    unit: r.mod_floor(&pk),
                    prec: prec_out,
                })
            }
            _ => Err(Error::Domain("square root of (approximate) zero".into())),
        }
    }

    /// The canonical rational representative `p^val * unit`.
    pub fn representative(&self) -> Rat {
        match self {
            PadicElem::NonZero { prime, val, unit, .. } => {
                Rat::from_integer(unit.clone()) * pow_rat(&rat_i(*prime as i64), *val)
            }
            _ => Rat::zero(),
        }
    }

    /// Equality to the jointly known precision.
    pub fn agrees_with(&self, o: &Self) -> bool {
        let d = self.sub(o);
        d.is_zero_to_prec() || matches!(d, PadicElem::Zero { .. })
    }
}

impl PartialEq for PadicElem {
    fn eq(&self, other: &Self) -> bool {
        self.prime() == other.prime() && self.agrees_with(other)
    }
}

impl std::fmt::Display for PadicElem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PadicElem::Zero { .. } => write!(f, "0"),
            PadicElem::ZeroApprox { prime, abs_prec } => write!(f, "O({prime}^{abs_prec})"),
            PadicElem::NonZero { prime, val, unit, prec } => {
                write!(f, "{prime}^{val} * {unit} + O({prime}^{})", val + *prec as i64)
            }
        }
    }
}

fn mod_inv(a: &BigInt, m: &BigInt) -> BigInt {
    let (mut r0, mut r1) = (m.clone(), a.mod_floor(m));
    let (mut t0, mut t1) = (BigInt::zero(), BigInt::one());
    while !r1.is_zero() {
        let q = &r0 / &r1;
        let r2 = &r0 - &q * &r1;
        r0 = std::mem::replace(&mut r1, r2);
        let t2 = &t0 - &q * &t1;
        t0 = std::mem::replace(&mut t1, t2);
    }
    assert!(r0.is_one(), "not a unit");
    t0.mod_floor(m)
}

fn sqrt_unit_odd(p: u64, u: &BigInt, prec: u32) -> Result<BigInt> {
    let pb = BigInt::from(p);
    let u0 = u.mod_floor(&pb).to_u64().unwrap();
    // Brute-force root mod p; desk-scale primes only.
    let mut r0 = None;
    for r in 1..p {
        if (r as u128 * r as u128) % p as u128 == u0 as u128 {
            r0 = Some(r);
            break;
        }
    }
    let Some(r0) = r0 else {
        return Err(Error::Domain(format!("{u0} is not a square mod {p}")));
    };
    // Newton lifting: r <- r - (r^2 - u) / (2r).
    let mut r = BigInt::from(r0);
    let mut k = 1u32;
    while k < prec {
        k = (2 * k).min(prec);
        let pk = pb.pow(k);
        let two_r_inv = mod_inv(&(2 * &r), &pk);
        r = (&r - (&r * &r - u) * two_r_inv).mod_floor(&pk);
    }
    Ok(r)
}

fn sqrt_unit_2adic(u: &BigInt, prec: u32) -> Result<BigInt> {
    let eight = BigInt::from(8);
    if prec >= 3 && !u.mod_floor(&eight).is_one() {
        return Err(Error::Domain("2-adic unit square roots need u = 1 mod 8".into()));
    }
    // Digit-by-digit lifting: given r with r^2 = u mod 2^k (k >= 3),
    // either r or r + 2^(k-1) satisfies the congruence mod 2^(k+1).
    let mut r = BigInt::one();
    let mut k = 3u32;
    while k < prec {
        let next = BigInt::from(2).pow(k + 1);
        if !(&r * &r - u).mod_floor(&next).is_zero() {
            r += BigInt::from(2).pow(k - 1);
        }
        k += 1;
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;
    use rand::{Rng, SeedableRng};

    #[test]
    fn abs_examples() {
        let x = PadicElem::from_rat(5, &rat_i(50));
        assert_eq!(x.abs().unwrap(), rat(1, 25));
        let y = PadicElem::from_rat(3, &rat(1, 3));
        assert_eq!(y.abs().unwrap(), rat_i(3));
        let z = PadicElem::from_rat(2, &rat_i(7));
        assert_eq!(z.abs().unwrap(), rat_i(1));
        assert_eq!(PadicElem::zero(5).abs().unwrap(), rat_i(0));
    }

    #[test]
    fn cancellation_gives_approximate_zero() {
        let x = PadicElem::from_rat(5, &rat_i(7));
        let d = x.sub(&x);
        assert!(d.is_zero_to_prec());
        assert!(!d.is_exact_zero());
        assert!(d.abs().is_err());
    }

    #[test]
    fn arithmetic_matches_rationals() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for p in [2u64, 3, 7, 13] {
            for _ in 0..200 {
                let a = rat(rng.gen_range(-400..400), rng.gen_range(1..60));
                let b = rat(rng.gen_range(-400..400), rng.gen_range(1..60));
                if a.is_zero() || b.is_zero() {
                    continue;
                }
                let (pa, pb) = (PadicElem::from_rat(p, &a), PadicElem::from_rat(p, &b));
                assert_eq!(pa.mul(&pb), PadicElem::from_rat(p, &(&a * &b)));
                assert_eq!(pa.add(&pb), PadicElem::from_rat(p, &(&a + &b)));
                // |xy| = |x||y|
                assert_eq!(
                    pa.mul(&pb).abs().unwrap(),
                    pa.abs().unwrap() * pb.abs().unwrap()
                );
                // ultrametric inequality
                let s = pa.add(&pb);
                if let Ok(sa) = s.abs() {
                    assert!(sa <= pa.abs().unwrap().max(pb.abs().unwrap()));
                }
            }
        }
    }

    #[test]
    fn precision_never_increases() {
        let x = PadicElem::from_rat_prec(7, &rat_i(3), 10);
        let y = PadicElem::from_rat_prec(7, &rat_i(5), 6);
        assert_eq!(x.mul(&y).rel_prec(), Some(6));
        assert!(x.add(&y).abs_prec().unwrap() <= 6);
        let z = PadicElem::from_rat_prec(7, &rat_i(49), 6);
        // x known mod 7^10, z mod 7^(2+6): joint absolute precision 8
        assert_eq!(x.add(&z).abs_prec().unwrap(), 8);
    }

    #[test]
    fn hensel_sqrt() {
        for (p, n) in [(7u64, 2i64), (5, -1), (13, 3), (3, 7)] {
            let x = PadicElem::from_i64(p, n);
            match x.sqrt() {
                Ok(r) => {
                    assert!(r.mul(&r).agrees_with(&x), "sqrt^2 != x at p={p}, n={n}");
                }
                Err(_) => {
                    // must genuinely be a non-square mod p
                    assert_eq!(super::super::kronecker(n, p as i64), -1);
                }
            }
        }
        let u = PadicElem::from_i64(2, 17);
        let r = u.sqrt().unwrap();
        assert!(r.mul(&r).agrees_with(&u));
    }
}
