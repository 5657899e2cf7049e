//! Averages of derived line functions over the maximal compact of the
//! adjoint group, against a quadratic character of the determinant:
//! `f^kappa(b) = int over K of kappa(det k) f_k(b) dk` with `vol(K) = 1`.
//!
//! At a finite place the average is an exact finite sum over
//! `GL2(Z/p^me)` (the conjugation action only sees the image in the
//! quotient, and averaging over the full finite group equals averaging
//! over its image in PGL2); at the real place it is a quadrature over
//! rotations and reflections.

use std::sync::Arc;

use crate::arith::{rat_i, Rat};
use crate::mat::Mat2;
use crate::quad::integrate_val;
use crate::symspace::XPoint;
use crate::Result;

use super::linefn::{derive_fx_finite_kind, ArchLineFn, FiniteLineFn, UnipotentKind};
use super::testfn::{ArchFn, FinitePlaceFn, GlobalTestFn};
use crate::arith::QuadraticCharacter;

/// Representatives of `GL2(Z/p^m)` lifted to integer matrices.
fn gl2_mod_pm(p: u64, m: u32) -> Vec<Mat2<Rat>> {
    let q = (p as i64).pow(m);
    let mut out = Vec::new();
    for a in 0..q {
        for b in 0..q {
            for c in 0..q {
                for d in 0..q {
                    let det = (a * d - b * c).rem_euclid(q);
                    if det % p as i64 != 0 {
                        out.push(Mat2::from_i64(a, b, c, d));
                    }
                }
            }
        }
    }
    out
}

/// Local value of the character on a unit determinant class.
fn kappa_unit(kappa: &QuadraticCharacter, p: u64, det: &Rat) -> i64 {
    if kappa.is_trivial() {
        1
    } else {
        kappa.value_p(det, p)
    }
}

/// `f^kappa` at a finite place. A basic place gives back the basic line
/// function when `kappa` is unramified there, and zero when it is ramified
/// (orthogonality of a nontrivial character on the unit determinants).
pub fn kappa_average_finite(
    f: &FinitePlaceFn,
    p: u64,
    kappa: &QuadraticCharacter,
) -> Result<FiniteLineFn<Rat>> {
    kappa_average_finite_kind(f, p, kappa, UnipotentKind::Plus, 1)
}

/// As [`kappa_average_finite`], for either unipotent datum.
pub fn kappa_average_finite_kind(
    f: &FinitePlaceFn,
    p: u64,
    kappa: &QuadraticCharacter,
    kind: UnipotentKind,
    tau: i64,
) -> Result<FiniteLineFn<Rat>> {
    match f {
        FinitePlaceFn::Basic => {
            let id: Mat2<Rat> = Mat2::identity();
            let base = derive_fx_finite_kind(f, p, &id, kind, tau)?;
            if kappa.is_ramified_at(p) {
                Ok(FiniteLineFn::zero_fn(p))
            } else {
                Ok(base)
            }
        }
        FinitePlaceFn::Level { level, .. } => {
            // resolve both the conjugation level and the character conductor
            let me = (*level).max(if kappa.is_ramified_at(p) {
                if p == 2 {
                    3
                } else {
                    1
                }
            } else {
                0
            });
            let reps = gl2_mod_pm(p, me);
            let total = rat_i(reps.len() as i64);
            let mut acc = FiniteLineFn::zero_fn(p);
            for k in &reps {
                let kv = kappa_unit(kappa, p, &k.det());
                if kv == 0 {
                    continue;
                }
                let g = derive_fx_finite_kind(f, p, k, kind, tau)?;
                acc = acc.add(&g.scale(&(rat_i(kv) / &total)));
            }
            Ok(acc)
        }
    }
}

/// `f^kappa` at the real place: the average over `PO(2)`, i.e. rotations
/// and reflections with `kappa_inf(det)` weights.
pub fn kappa_average_arch(
    f: &ArchFn,
    tau: i64,
    kappa: &QuadraticCharacter,
    tol: f64,
) -> ArchLineFn {
    kappa_average_arch_kind(f, tau, kappa, UnipotentKind::Plus, tol)
}

/// As [`kappa_average_arch`], for either unipotent datum.
pub fn kappa_average_arch_kind(
    f: &ArchFn,
    tau: i64,
    kappa: &QuadraticCharacter,
    kind: UnipotentKind,
    tol: f64,
) -> ArchLineFn {
    let refl_sign = if kappa.is_odd() { -1.0 } else { 1.0 };
    let f = f.clone();
    // orthogonal conjugation preserves the coordinate norm of the slice
    // part, so the support bound of the x = 1 line function works for
    // every k
    let coeff = crate::arith::rat_to_f64(&kind.b_coeff(tau));
    let t0 = kind.center_t() as f64;
    let bound = f.coord_bound(tol * 1e-3);
    let support = (bound + 2.0) / coeff.abs();
    let eval = move |b: f64| {
        let s = coeff * b;
        let avg = |reflect: bool| {
            let f = f.clone();
            integrate_val(
                move |phi: f64| {
                    let (cs, sn) = (phi.cos(), phi.sin());
                    let k = if reflect {
                        // diag(1, -1) * rotation
                        Mat2::new(cs, -sn, -sn, -cs)
                    } else {
                        Mat2::new(cs, -sn, sn, cs)
                    };
                    let ki = k.inv().expect("orthogonal");
                    let m = ki.mul(&Mat2::from_i64(0, 1, 0, 0)).mul(&k);
                    let pt = XPoint {
                        tau,
                        t: t0,
                        y: s * m.e[0][0],
                        b: s * m.e[0][1],
                        c: s * m.e[1][0],
                    };
                    f.eval(&pt)
                },
                0.0,
                std::f64::consts::PI,
                tol * 1e-2,
            ) / std::f64::consts::PI
        };
        0.5 * (avg(false) + refl_sign * avg(true))
    };
    ArchLineFn { eval: Arc::new(eval), support }
}

/// All per-place averaged line data `f^kappa` for a global test function:
/// explicit entries at `S(f)` and at `p = 2` (where the coordinate-integral
/// basic function is the indicator of `(1/2) Z_2` on the line), basic
/// `1_{Z_p}` implicitly elsewhere.
pub fn kappa_average_global(
    f: &GlobalTestFn,
    kappa: &QuadraticCharacter,
    tol: f64,
) -> Result<super::zeta::GlobalLineData> {
    kappa_average_global_kind(f, kappa, UnipotentKind::Plus, tol)
}

/// As [`kappa_average_global`], for either unipotent datum.
pub fn kappa_average_global_kind(
    f: &GlobalTestFn,
    kappa: &QuadraticCharacter,
    kind: UnipotentKind,
    tol: f64,
) -> Result<super::zeta::GlobalLineData> {
    let tau = f.tau();
    let mut places = f.ramified_places();
    places.push(2);
    for p in kappa.ramified_primes() {
        places.push(p);
    }
    for (q, _) in crate::arith::factor(&num::BigInt::from(tau.unsigned_abs())) {
        places.push(q);
    }
    places.sort_unstable();
    places.dedup();
    let mut finite = Vec::new();
    for p in places {
        finite.push(kappa_average_finite_kind(&f.local(p), p, kappa, kind, tau)?);
    }
    let arch = kappa_average_arch_kind(&f.arch, tau, kappa, kind, tol);
    Ok(super::zeta::GlobalLineData { finite, arch })
}

/// Check helper: the trivial-character average of a right-K-invariant
/// function is the plain derived line function.
pub fn plain_line_data(f: &GlobalTestFn, tol: f64) -> Result<super::zeta::GlobalLineData> {
    kappa_average_global(f, &QuadraticCharacter::trivial(), tol)
}
