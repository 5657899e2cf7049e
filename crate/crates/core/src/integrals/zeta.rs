//! Local and global Tate zeta integrals.
//!
//! Measures: multiplicative `d*t` with `vol(Z_p^*) = 1` at finite places
//! and `d*t = dt/|t|` at the real place; additive `vol(Z_p) = 1`. With the
//! self-dual characters of [`super::linefn`], the global zeta integral of
//! all-basic data is the Riemann zeta function, and the residue of
//! `Z(h, |.|^s)` at `s = 1` is `vol([Gm]^1) h-hat(0)` with
//! `vol([Gm]^1) = 1` under these normalizations.

use num::{One, Signed, Zero};
use num_complex::Complex64;

use crate::arith::{pow_rat, rat_i, rat_to_f64, val_p, QuadraticCharacter, Rat};
use crate::quad::integrate_val;
use crate::special::{dirichlet_l, riemann_zeta};
use crate::{Error, Result};

use super::linefn::{canonical_rep, ArchLineFn, FiniteLineFn};

/// A zeta integral value with pole data.
#[derive(Clone, Debug)]
pub struct ZetaValue {
    pub s: Complex64,
    pub value: Complex64,
    /// Exact rational value, when the computation was exact.
    pub exact: Option<Rat>,
    /// Residue of the simple pole at `s = 1` (trivial character only),
    /// as a multiple of the symbolic `vol([Gm]^1)`.
    pub residue: Option<f64>,
}

/// Conductor exponent needed to resolve the character on units.
fn unit_conductor_digits(kappa: &QuadraticCharacter, p: u64) -> i64 {
    if !kappa.is_ramified_at(p) {
        0
    } else if p == 2 {
        3
    } else {
        1
    }
}

/// Shell decomposition shared by the exact and floating local zeta paths:
/// returns `(head, c0, n0)` where `head` is a list of
/// `(shell n, kappa unit value, rational mass)` from explicit cosets,
/// `c0` is the constant value of `g` near zero, and `n0` is the shell
/// where the geometric tail starts.
fn shell_data(
    g: &FiniteLineFn<Rat>,
    kappa: &QuadraticCharacter,
) -> (Vec<(i64, i64, Rat)>, Rat, i64) {
    let p = g.p;
    let e = unit_conductor_digits(kappa, p);
    let level = g.max_level();
    let refine_to = level + e;
    let refined = g.refined(refine_to);
    let c0 = g.value_at(&Rat::zero());
    let mut head = Vec::new();
    for (rep, lev, v) in &refined.cosets {
        if v.is_zero() {
            continue;
        }
        if rep.is_zero() || val_p(rep, p) >= level {
            continue; // belongs to the tail region
        }
        let n = val_p(rep, p);
        // multiplicative volume of the coset inside its shell:
        // p^(n - lev) / (1 - 1/p)
        let vol = pow_rat(&rat_i(p as i64), n - lev)
            / (Rat::one() - pow_rat(&rat_i(p as i64), -1));
        let kv = kappa.value_p(rep, p);
        head.push((n, kv, v * vol));
    }
    (head, c0, level)
}

/// Exact local Tate zeta integral at an integer exponent:
/// `Z(g, kappa |.|^s) = int over Q_p^* of g(t) kappa_p(t) |t|^s d*t`.
pub fn zeta_local_exact(
    g: &FiniteLineFn<Rat>,
    kappa: &QuadraticCharacter,
    s: i64,
) -> Result<Rat> {
    let p = g.p;
    let (head, c0, n0) = shell_data(g, kappa);
    let mut total = Rat::zero();
    for (n, kv, mass) in &head {
        if *kv == 0 {
            continue;
        }
        total += rat_i(*kv) * mass * pow_rat(&rat_i(p as i64), -n * s);
    }
    // tail: g = c0 on p^{n0} Z_p; full-shell unit averages vanish for
    // ramified kappa
    if !c0.is_zero() && !kappa.is_ramified_at(p) {
        let q = rat_i(kappa.kron(p as i64)) * pow_rat(&rat_i(p as i64), -s);
        if q.abs() >= Rat::one() {
            return Err(Error::Domain(
                "local zeta diverges: need Re(s) > 0 or vanishing near 0".into(),
            ));
        }
        // sum_{n >= n0} c0 q^n = c0 q^{n0} / (1 - q)
        total += &c0 * pow_rat_signed(&q, n0) / (Rat::one() - &q);
    }
    Ok(total)
}

fn pow_rat_signed(q: &Rat, e: i64) -> Rat {
    if e >= 0 {
        q.pow(e as i32)
    } else {
        q.pow((-e) as i32).recip()
    }
}

/// Local Tate zeta integral at a complex exponent.
pub fn zeta_local(
    g: &FiniteLineFn<Rat>,
    kappa: &QuadraticCharacter,
    s: Complex64,
) -> Result<Complex64> {
    let p = g.p as f64;
    let (head, c0, n0) = shell_data(g, kappa);
    let mut total = Complex64::new(0.0, 0.0);
    for (n, kv, mass) in &head {
        if *kv == 0 {
            continue;
        }
        total += *kv as f64 * rat_to_f64(mass) * Complex64::new(p, 0.0).powc(-s * *n as f64);
    }
    if !rat_to_f64(&c0).is_zero() && !kappa.is_ramified_at(g.p) {
        let q = kappa.kron(g.p as i64) as f64 * Complex64::new(p, 0.0).powc(-s);
        if q.norm() >= 1.0 {
            return Err(Error::Domain("local zeta diverges at this exponent".into()));
        }
        total += rat_to_f64(&c0) * q.powi(n0 as i32) / (1.0 - q);
    }
    Ok(total)
}

/// Archimedean zeta integral
/// `int over R^* of g(t) kappa_inf(t)^eps |t|^s dt/|t|`, via the smooth
/// substitution `t = e^w` on each half line.
pub fn zeta_arch(
    g: &ArchLineFn,
    kappa: &QuadraticCharacter,
    s: Complex64,
    tol: f64,
) -> Result<Complex64> {
    let sigma = s.re;
    if sigma <= 0.05 {
        return Err(Error::Domain("archimedean zeta needs Re(s) > 0 here".into()));
    }
    let odd = kappa.is_odd();
    let w_hi = g.support.max(1.0).ln() + 0.1;
    // tail below w_lo is bounded by sup|g| e^{sigma w_lo}/sigma
    let sup: f64 = (-64..64)
        .map(|i| g.at(g.support * (i as f64 + 0.5) / 64.0).abs())
        .fold(g.at(0.0).abs(), f64::max)
        * 4.0;
    let w_lo = ((tol * 1e-2 * sigma / sup.max(1e-300)).ln()) / sigma;
    let mut total = Complex64::new(0.0, 0.0);
    for sign in [1.0f64, -1.0] {
        let chi = if odd && sign < 0.0 { -1.0 } else { 1.0 };
        let e = g.eval.clone();
        if s.im == 0.0 {
            let v = integrate_val(
                move |w: f64| e(sign * w.exp()) * (sigma * w).exp(),
                w_lo,
                w_hi,
                tol * 0.5,
            );
            total += chi * v;
        } else {
            let e2 = g.eval.clone();
            let re = integrate_val(
                {
                    let e = e.clone();
                    move |w: f64| {
                        e(sign * w.exp()) * (sigma * w).exp() * (s.im * w).cos()
                    }
                },
                w_lo,
                w_hi,
                tol * 0.5,
            );
            let im = integrate_val(
                move |w: f64| e2(sign * w.exp()) * (sigma * w).exp() * (s.im * w).sin(),
                w_lo,
                w_hi,
                tol * 0.5,
            );
            total += chi * Complex64::new(re, im);
        }
    }
    Ok(total)
}

/// Per-place line data of a global zeta integrand: explicit finite places
/// (basic `1_{Z_p}` everywhere else) and the archimedean factor.
#[derive(Clone, Debug)]
pub struct GlobalLineData {
    pub finite: Vec<FiniteLineFn<Rat>>,
    pub arch: ArchLineFn,
}

impl GlobalLineData {
    pub fn places(&self) -> Vec<u64> {
        self.finite.iter().map(|g| g.p).collect()
    }

    /// `h-hat(0) = integral of h over the adeles` (explicit places times 1
    /// for each basic factor).
    pub fn fourier_at_zero(&self, tol: f64) -> f64 {
        let mut v = self.arch.integral(tol);
        for g in &self.finite {
            v *= rat_to_f64(&g.integral());
        }
        v
    }
}

/// Global Tate zeta integral: product of explicit local factors with the
/// L-function tail over the remaining primes. For the trivial character
/// the pole at `s = 1` is reported through `residue`; requesting the exact
/// pole is a domain error.
pub fn zeta_global(
    data: &GlobalLineData,
    kappa: &QuadraticCharacter,
    s: Complex64,
    tol: f64,
) -> Result<ZetaValue> {
    let explicit: Vec<u64> = data.places().to_vec();
    {
        let mut sorted = explicit.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != explicit.len() {
            return Err(Error::Config("duplicate finite place in zeta data".into()));
        }
    }
    if kappa.is_trivial() && (s - Complex64::new(1.0, 0.0)).norm() < 1e-12 {
        return Err(Error::Domain(
            "global zeta with trivial character has a pole at s = 1".into(),
        ));
    }
    let mut value = zeta_arch(&data.arch, kappa, s, tol)?;
    for g in &data.finite {
        value *= zeta_local(g, kappa, s)?;
    }
    // unramified tail
    let tail = if kappa.is_trivial() {
        let mut t = riemann_zeta(s);
        for &p in &explicit {
            t *= 1.0 - Complex64::new(p as f64, 0.0).powc(-s);
        }
        t
    } else {
        let mut t = dirichlet_l(s, kappa);
        for &p in &explicit {
            if !kappa.is_ramified_at(p) {
                t *= 1.0 - kappa.kron(p as i64) as f64 * Complex64::new(p as f64, 0.0).powc(-s);
            }
        }
        t
    };
    value *= tail;
    let residue = if kappa.is_trivial() && (s - Complex64::new(1.0, 0.0)).norm() < 0.5 {
        Some(data.fourier_at_zero(tol))
    } else {
        None
    };
    Ok(ZetaValue { s, value, exact: None, residue })
}

/// `d/ds [ s Z(data, |.|^{1+s}) ]` at `s = 0`, by central differences with
/// one Richardson refinement, verified against a halved step.
pub fn zeta_sderivative(data: &GlobalLineData, tol: f64) -> Result<f64> {
    let kappa = QuadraticCharacter::trivial();
    let phi = |s: f64| -> Result<f64> {
        let z = zeta_global(data, &kappa, Complex64::new(1.0 + s, 0.0), tol * 1e-2)?;
        Ok(s * z.value.re)
    };
    let richardson = |h: f64| -> Result<f64> {
        let d1 = (phi(h)? - phi(-h)?) / (2.0 * h);
        let d2 = (phi(h / 2.0)? - phi(-h / 2.0)?) / h;
        Ok((4.0 * d2 - d1) / 3.0)
    };
    let r1 = richardson(1e-2)?;
    let r2 = richardson(5e-3)?;
    let err = (r1 - r2).abs();
    if err > tol {
        return Err(Error::Accuracy { wanted: tol, achieved: err });
    }
    Ok(r2)
}

/// Exact canonicalization helper re-exported for tests of coset data.
pub fn canonical(r: &Rat, p: u64, level: i64) -> Rat {
    canonical_rep(r, p, level)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;
    use crate::special::EULER_GAMMA;

    #[test]
    fn local_exact_geometric_series() {
        // (1_{Z_p}, trivial, s) -> 1/(1 - p^{-s}); at p = 2, s = 1 -> 2
        let g = FiniteLineFn::basic(2);
        let triv = QuadraticCharacter::trivial();
        assert_eq!(zeta_local_exact(&g, &triv, 1).unwrap(), rat_i(2));
        // unramified quadratic with kappa(2) = -1: D = 5
        let k5 = QuadraticCharacter::new(5).unwrap();
        assert_eq!(k5.kron(2), -1);
        assert_eq!(zeta_local_exact(&g, &k5, 1).unwrap(), rat(2, 3));
        // ramified character kills the basic function
        let km4 = QuadraticCharacter::new(-4).unwrap();
        assert_eq!(zeta_local_exact(&FiniteLineFn::basic(2), &km4, 1).unwrap(), rat_i(0));
        // divergence at s = 0 for the trivial character
        assert!(zeta_local_exact(&g, &triv, 0).is_err());
    }

    #[test]
    fn local_exact_vs_float() {
        let g = FiniteLineFn {
            p: 3,
            cosets: vec![(rat(1, 3), 1, rat_i(2)), (Rat::zero(), 1, rat_i(1))],
        };
        for kappa in [
            QuadraticCharacter::trivial(),
            QuadraticCharacter::new(-3).unwrap(),
            QuadraticCharacter::new(5).unwrap(),
        ] {
            for s in [1i64, 2] {
                let e = zeta_local_exact(&g, &kappa, s).unwrap();
                let f = zeta_local(&g, &kappa, Complex64::new(s as f64, 0.0)).unwrap();
                assert!((rat_to_f64(&e) - f.re).abs() < 1e-12);
                assert!(f.im.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn unit_scaling_invariance() {
        // Z(g(ut), kappa |.|^s) = Z(g, kappa |.|^s) for a unit u and
        // unramified kappa (exact at finite places)
        let g = FiniteLineFn {
            p: 5,
            cosets: vec![(rat_i(1), 1, rat_i(1)), (rat_i(7), 2, rat(3, 2))],
        };
        // g(2t): cosets scale by 1/2
        let g2 = FiniteLineFn {
            p: 5,
            cosets: vec![(rat(1, 2), 1, rat_i(1)), (rat(7, 2), 2, rat(3, 2))],
        };
        // characters unramified at 5 are trivial on the unit 2
        let km4 = QuadraticCharacter::new(-4).unwrap();
        for kappa in [QuadraticCharacter::trivial(), km4] {
            assert_eq!(
                zeta_local_exact(&g, &kappa, 1).unwrap(),
                zeta_local_exact(&g2, &kappa, 1).unwrap()
            );
        }
    }

    #[test]
    fn arch_gaussian_value() {
        // Z(e^{-pi t^2}, trivial, 1) = 1
        let g = ArchLineFn::gaussian();
        let v = zeta_arch(&g, &QuadraticCharacter::trivial(), Complex64::new(1.0, 0.0), 1e-9)
            .unwrap();
        assert!((v.re - 1.0).abs() < 1e-7, "got {}", v.re);
        // completed value at s = 2: pi^{-1} Gamma(1) = int e^{-pi t^2} |t|^2 d*t
        let v2 = zeta_arch(&g, &QuadraticCharacter::trivial(), Complex64::new(2.0, 0.0), 1e-9)
            .unwrap();
        assert!((v2.re - 1.0 / std::f64::consts::PI).abs() < 1e-7);
    }

    #[test]
    fn global_pole_and_residue() {
        let data = GlobalLineData { finite: vec![], arch: ArchLineFn::gaussian() };
        let triv = QuadraticCharacter::trivial();
        // residue should be h-hat(0) = 1 for the Gaussian
        for k in 2..=5 {
            let s = Complex64::new(1.0 + 10f64.powi(-k), 0.0);
            let z = zeta_global(&data, &triv, s, 1e-9).unwrap();
            let lhs = (s.re - 1.0) * z.value.re;
            let r = z.residue.unwrap();
            assert!(
                (lhs - r).abs() < 1.5 * 10f64.powi(-k) + 1e-9,
                "k={k}: {lhs} vs {r}"
            );
        }
        assert!(zeta_global(&data, &triv, Complex64::new(1.0, 0.0), 1e-9).is_err());
    }

    #[test]
    fn global_nontrivial_entire_at_one() {
        let data = GlobalLineData { finite: vec![FiniteLineFn::basic(3)], arch: ArchLineFn::gaussian() };
        let k = QuadraticCharacter::new(-4).unwrap();
        let z = zeta_global(&data, &k, Complex64::new(1.0, 0.0), 1e-9).unwrap();
        assert!(z.value.re.is_finite());
        assert!(z.residue.is_none());
    }

    #[test]
    fn sderivative_synthetic_and_laurent() {
        // all-basic data: derivative agrees with the independent
        // Laurent-expansion route gamma * Z_inf(1) + Z_inf'(1)
        let data = GlobalLineData { finite: vec![], arch: ArchLineFn::gaussian() };
        let d = zeta_sderivative(&data, 1e-6).unwrap();
        // Z_inf(1 + s) for the Gaussian: int e^{-pi t^2}|t|^{1+s} d*t;
        // oracle by quadrature of the s-derivative integrand
        let z1 = 1.0;
        // smooth substitution t = e^w for the logarithmic endpoint
        let zp = integrate_val(
            |w: f64| {
                let t = w.exp();
                2.0 * (-std::f64::consts::PI * t * t).exp() * w * t
            },
            -30.0,
            8f64.ln(),
            1e-10,
        );
        let oracle = EULER_GAMMA * z1 + zp;
        assert!((d - oracle).abs() < 1e-5, "{d} vs {oracle}");
    }
}
