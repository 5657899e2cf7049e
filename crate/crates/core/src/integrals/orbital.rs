//! Local (and weighted global) relative orbital integrals by coset
//! enumeration.
//!
//! For a regular semisimple point `eta` the stabilizer torus `T` is the
//! norm-one torus of `Q(sqrt q0)` with `q0 = (t0^2 - 1)/tau`. At a finite
//! place where `q0` is a non-square the torus is anisotropic and compact;
//! normalizing its volume to one, the orbital integral is the sum of
//! `f(x^{-1} eta x)` over the vertices `x = n(u) diag(p^m, p^{-m}) K` of
//! the coset tree, which is finite by compactness of the support and is
//! enumerated exactly with a p-adic root-isolation solver. Where `q0` is a
//! square the torus is split; conjugating it onto the diagonal, the
//! integral becomes an explicit unipotent-times-compact integral with a
//! unit-group volume correction for the conjugator.

use num::Zero;

use crate::arith::{
    kronecker, pow_rat, rat_i, rat_to_f64, unit_part_mod_pk, val_p, PadicElem, Rat,
};
use crate::mat::Mat2;
use crate::quad::integrate_val;
use crate::symspace::XPoint;
use crate::{Error, Result};

use super::testfn::{ArchFn, FinitePlaceFn};

/// Result of a coset enumeration with a stabilization report.
#[derive(Clone, Debug)]
pub struct OrbitalValue {
    pub value: f64,
    /// Exact value when the enumeration was exact (anisotropic finite
    /// place).
    pub exact: Option<Rat>,
    /// Whether enlarging the enumeration further cannot change the value.
    pub stabilized: bool,
    pub depth_used: u32,
}

/// Is `r` a square in `Q_p^*`?
pub fn is_square_p(r: &Rat, p: u64) -> bool {
    assert!(!r.is_zero());
    if val_p(r, p) % 2 != 0 {
        return false;
    }
    if p == 2 {
        unit_part_mod_pk(r, 2, 3) == 1
    } else {
        kronecker(unit_part_mod_pk(r, p, 1), p as i64) == 1
    }
}

/// `q0 = (chi(eta)^2 - 1)/tau`, the square class governing the stabilizer.
pub fn stabilizer_class(eta: &XPoint<Rat>) -> Result<Rat> {
    let disc = &eta.t * &eta.t - rat_i(1);
    if disc.is_zero() {
        return Err(Error::Domain("orbital integral needs a regular semisimple point".into()));
    }
    Ok(disc / rat_i(eta.tau))
}

// ---------------------------------------------------------------------------
// p-adic root isolation for valuation constraints

/// A constraint `v_p(q(u)) >= min_val` for a quadratic `q`.
#[derive(Clone, Debug)]
struct ValConstraint {
    /// Coefficients `(a, b, c)` of `a u^2 + b u + c`.
    a: Rat,
    b: Rat,
    c: Rat,
    min_val: i64,
}

impl ValConstraint {
    fn eval(&self, u: &Rat) -> Rat {
        &self.a * u * u + &self.b * u + &self.c
    }

    fn derivative_at(&self, u: &Rat) -> Rat {
        rat_i(2) * &self.a * u + &self.b
    }
}

fn vp_or_inf(x: &Rat, p: u64) -> i64 {
    if x.is_zero() {
        i64::MAX / 4
    } else {
        val_p(x, p)
    }
}

/// Decide a constraint on the whole coset `rep + p^k Z_p`:
/// `Some(true/false)` when the value's valuation is determined on the
/// coset, `None` when the coset must be split.
fn decide(c: &ValConstraint, p: u64, rep: &Rat, k: i64) -> Option<bool> {
    let v0 = vp_or_inf(&c.eval(rep), p);
    // variation over the coset: p^k q'(rep) w + p^{2k} a w^2
    let var = (k + vp_or_inf(&c.derivative_at(rep), p)).min(2 * k + vp_or_inf(&c.a, p));
    if v0 >= c.min_val && var >= c.min_val {
        Some(true)
    } else if v0 < c.min_val && v0 < var {
        Some(false)
    } else {
        None
    }
}

/// All cosets of level at most `cap` inside `rep + p^k Z_p` on which every
/// constraint holds; constraints must be decidable at level `cap`.
fn solve_constraints(
    constraints: &[ValConstraint],
    p: u64,
    rep: &Rat,
    k: i64,
    cap: i64,
) -> Result<Vec<(Rat, i64)>> {
    let mut undecided = false;
    for c in constraints {
        match decide(c, p, rep, k) {
            Some(false) => return Ok(vec![]),
            Some(true) => {}
            None => undecided = true,
        }
    }
    if !undecided {
        return Ok(vec![(rep.clone(), k)]);
    }
    if k >= cap {
        return Err(Error::Precision(format!(
            "valuation system undecided at level {cap}"
        )));
    }
    let step = pow_rat(&rat_i(p as i64), k);
    let mut out = Vec::new();
    for j in 0..p {
        let child = rep + rat_i(j as i64) * &step;
        out.extend(solve_constraints(constraints, p, &child, k + 1, cap)?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// K-averaged test-function values

/// Representatives of `SL2(Z/p^m)` lifted to integer matrices with det 1
/// adjusted p-adically (det = 1 mod p^m suffices at level m).
fn sl2_mod_pm(p: u64, m: u32) -> Vec<Mat2<Rat>> {
    let q = (p as i64).pow(m);
    let mut out = Vec::new();
    for a in 0..q {
        for b in 0..q {
            for c in 0..q {
                for d in 0..q {
                    if (a * d - b * c).rem_euclid(q) == 1 {
                        out.push(Mat2::from_i64(a, b, c, d));
                    }
                }
            }
        }
    }
    out
}

/// Value of `int over K of f(k^{-1} x k) dk` at a rational point, exact.
/// For the basic function this is the plain value; for level data it is a
/// finite average over `SL2(Z/p^level)`.
pub fn k_averaged_value(f: &FinitePlaceFn, p: u64, x: &XPoint<Rat>) -> Rat {
    match f {
        FinitePlaceFn::Basic => f.eval(p, x),
        FinitePlaceFn::Level { level, .. } => {
            let reps = sl2_mod_pm(p, *level);
            let mut acc = Rat::zero();
            for k in &reps {
                acc += f.eval(p, &x.conj_by(k));
            }
            acc / rat_i(reps.len() as i64)
        }
    }
}

// ---------------------------------------------------------------------------
// Anisotropic finite place: vertex sum over the coset tree

/// Orbital integral at a finite place where the stabilizer torus is
/// anisotropic, with `vol(T(Q_p)) = vol(K_p) = 1`. Exact.
fn orbital_anisotropic(
    f: &FinitePlaceFn,
    p: u64,
    eta: &XPoint<Rat>,
    depth: u32,
) -> Result<OrbitalValue> {
    let (y0, b0, c0) = (&eta.y, &eta.b, &eta.c);
    if c0.is_zero() {
        // anisotropic forces c != 0 for rss points (else q0 = y0^2)
        return Err(Error::Domain("inconsistent anisotropic data".into()));
    }
    // integrality of the invariant coordinates
    if !eta.t.is_zero() && val_p(&eta.t, p) < 0 {
        return Ok(OrbitalValue { value: 0.0, exact: Some(Rat::zero()), stabilized: true, depth_used: 0 });
    }
    let vc = val_p(c0, p);
    // smallest m with 2m >= -v(c0)
    let m_lo = if (-vc) % 2 == 0 { (-vc) / 2 } else { (-vc + 1) / 2 };
    let mut total = Rat::zero();
    let mut m = m_lo;
    let mut stabilized = false;
    let max_m = m_lo + depth as i64;
    while m <= max_m {
        // constraints: v(y0 - u c0) >= 0 and v(b0 + 2 y0 u - c0 u^2) >= 2m
        let lin = ValConstraint {
            a: Rat::zero(),
            b: -c0.clone(),
            c: y0.clone(),
            min_val: 0,
        };
        let quad = ValConstraint {
            a: -c0.clone(),
            b: rat_i(2) * y0,
            c: b0.clone(),
            min_val: 2 * m,
        };
        // start from the ball where the linear constraint can hold
        let rep0 = y0 / c0;
        let k0 = -vc;
        let cap = (2 * m).max(k0) + 2;
        let sols = solve_constraints(&[lin, quad], p, &rep0, k0, cap)?;
        if sols.is_empty() {
            // the quadratic threshold only strengthens with m: done
            stabilized = true;
            break;
        }
        for (rep, lev) in sols {
            if lev <= 2 * m {
                // whole vertex cosets: enumerate representatives mod p^{2m}
                let n = (2 * m - lev) as u32;
                if n > 14 {
                    return Err(Error::Precision("vertex refinement too deep".into()));
                }
                let step = pow_rat(&rat_i(p as i64), lev);
                let count = (p as i64).pow(n);
                for j in 0..count {
                    let u = &rep + rat_i(j) * &step;
                    total += vertex_value(f, p, eta, m, &u);
                }
            } else {
                return Err(Error::Precision(
                    "solver produced a sub-vertex coset; conditions not vertex-stable".into(),
                ));
            }
        }
        m += 1;
    }
    Ok(OrbitalValue {
        value: rat_to_f64(&total),
        exact: Some(total),
        stabilized,
        depth_used: (m - m_lo).max(0) as u32,
    })
}

/// `f`-value (K-averaged) at the vertex `x = n(u) diag(p^m, p^{-m})`.
fn vertex_value(f: &FinitePlaceFn, p: u64, eta: &XPoint<Rat>, m: i64, u: &Rat) -> Rat {
    let pm = pow_rat(&rat_i(p as i64), m);
    let yq = &eta.y - u * &eta.c;
    let bq = &eta.b + rat_i(2) * &eta.y * u - &eta.c * u * u;
    let x = XPoint {
        tau: eta.tau,
        t: eta.t.clone(),
        y: yq,
        b: bq / (&pm * &pm),
        c: &eta.c * &pm * &pm,
    };
    k_averaged_value(f, p, &x)
}

// ---------------------------------------------------------------------------
// Split finite place: conjugate onto the diagonal

/// p-adic scalar wrapper: exact rational when the square root is rational.
#[derive(Clone, Debug)]
enum PScalar {
    Exact(Rat),
    Approx(PadicElem),
}

impl PScalar {
    fn to_padic(&self, p: u64) -> PadicElem {
        match self {
            PScalar::Exact(r) => PadicElem::from_rat_prec(p, r, 28),
            PScalar::Approx(x) => x.clone(),
        }
    }
}

fn padic_mat(m: &Mat2<Rat>, p: u64) -> Mat2<PadicElem> {
    m.map(|x| PadicElem::from_rat_prec(p, x, 28))
}

fn mat_is_integral(m: &Mat2<PadicElem>) -> Result<bool> {
    for i in 0..2 {
        for j in 0..2 {
            let e = &m.e[i][j];
            if e.is_exact_zero() {
                continue;
            }
            match e.valuation() {
                Ok(v) => {
                    if v < 0 {
                        return Ok(false);
                    }
                }
                Err(_) => {
                    let bound = e.abs_prec().unwrap_or(0);
                    if bound < 0 {
                        return Err(Error::Precision("integrality undecidable".into()));
                    }
                }
            }
        }
    }
    Ok(true)
}

/// Square root of `q0` in `Q_p`, exact when rational.
fn local_sqrt(q0: &Rat, p: u64) -> Result<PScalar> {
    if let Ok(cls) = crate::arith::square_class(q0) {
        if cls == 1 {
            // rational square: q0 = (num*den)/den^2 with num*den a square
            let n = q0.numer() * q0.denom();
            let r = n.sqrt();
            return Ok(PScalar::Exact(Rat::new(r, q0.denom().clone())));
        }
    }
    let x = PadicElem::from_rat_prec(p, q0, 28);
    Ok(PScalar::Approx(x.sqrt()?))
}

/// Orbital integral at a finite place where the stabilizer is split:
/// conjugate `eta` to the diagonal torus and integrate over `N x K` with a
/// unit-volume correction for the conjugator.
fn orbital_split(
    f: &FinitePlaceFn,
    p: u64,
    eta: &XPoint<Rat>,
    _depth: u32,
) -> Result<OrbitalValue> {
    let q0 = stabilizer_class(eta)?;
    let w = local_sqrt(&q0, p)?;
    let wp = w.to_padic(p);
    let vw = wp.valuation()?;
    // eigenvector conjugator g0 in SL2(Q_p) (p-adic entries)
    let (y0, b0, c0) = (
        PadicElem::from_rat_prec(p, &eta.y, 28),
        PadicElem::from_rat_prec(p, &eta.b, 28),
        PadicElem::from_rat_prec(p, &eta.c, 28),
    );
    let g0 = if !eta.b.is_zero() {
        // columns (b0, w - y0), (b0, -w - y0) normalized to det 1
        let det = b0.mul(&wp).mul(&PadicElem::from_i64(p, -2)); // -2 b0 w
        let di = det.inv()?;
        Mat2 {
            e: [
                [b0.clone(), b0.mul(&di)],
                [wp.sub(&y0), wp.neg().sub(&y0).mul(&di)],
            ],
        }
    } else if !eta.c.is_zero() {
        // columns (2 y0, c0), (0, 1) with eigenvalues (y0, -y0); requires
        // w = y0 up to sign, normalize det = 2 y0
        let det = y0.mul(&PadicElem::from_i64(p, 2));
        let di = det.inv()?;
        Mat2 {
            e: [
                [y0.mul(&PadicElem::from_i64(p, 2)), PadicElem::zero(p)],
                [c0.clone(), di],
            ],
        }
    } else {
        // already diagonal
        Mat2 {
            e: [
                [PadicElem::from_i64(p, 1), PadicElem::zero(p)],
                [PadicElem::zero(p), PadicElem::from_i64(p, 1)],
            ],
        }
    };
    let g0i = g0.inv().ok_or_else(|| Error::Singular("conjugator singular".into()))?;
    // diagonalized slice coordinate: g0^{-1} S g0 should be diag(w', -w')
    let s_mat = Mat2 {
        e: [
            [y0.clone(), b0.clone()],
            [c0.clone(), y0.neg()],
        ],
    };
    let sd = g0i.mul(&s_mat).mul(&g0);
    let wdiag = sd.e[0][0].clone();
    // unit-volume correction: vol of U = {t unit : g0 diag(t,1/t) g0^{-1} in K}
    let mut minv: i64 = 0;
    for a_mat in [g0.mul(&Mat2 {
        e: [
            [PadicElem::from_i64(p, 1), PadicElem::zero(p)],
            [PadicElem::zero(p), PadicElem::zero(p)],
        ],
    })
    .mul(&g0i), g0.mul(&Mat2 {
        e: [
            [PadicElem::zero(p), PadicElem::zero(p)],
            [PadicElem::zero(p), PadicElem::from_i64(p, 1)],
        ],
    })
    .mul(&g0i)]
    {
        for i in 0..2 {
            for j in 0..2 {
                if let Ok(v) = a_mat.e[i][j].valuation() {
                    minv = minv.min(v);
                }
            }
        }
    }
    let n0 = (-minv).max(1) as u32;
    // count unit classes mod p^{n0} whose torus element conjugates into K
    let q = (p as i64).pow(n0);
    let mut members = 0u64;
    let mut classes = 0u64;
    for r in 1..q {
        if r % p as i64 == 0 {
            continue;
        }
        classes += 1;
        let t = PadicElem::from_i64(p, r);
        let ti = t.inv()?;
        let d = Mat2 {
            e: [
                [t, PadicElem::zero(p)],
                [PadicElem::zero(p), ti],
            ],
        };
        if mat_is_integral(&g0.mul(&d).mul(&g0i))? {
            members += 1;
        }
    }
    let vol_u = members as f64 / classes as f64;
    if vol_u == 0.0 {
        return Err(Error::Precision("conjugator unit group not visible".into()));
    }
    // N x K integral of the diagonalized integrand:
    // coords (t0, w, 2 u w, 0) conjugated by k
    let value = nk_integral_diag_padic(f, p, &eta.t, &wdiag, vw)?;
    Ok(OrbitalValue {
        value: value / vol_u,
        exact: None,
        stabilized: true,
        depth_used: 0,
    })
}

/// `int over N int over K of (K-averaged f)(n(-u) diag-point n(u)) du`,
/// where the diagonal slice coordinate is a p-adic scalar.
fn nk_integral_diag_padic(
    f: &FinitePlaceFn,
    p: u64,
    t0: &Rat,
    w: &PadicElem,
    vw: i64,
) -> Result<f64> {
    // integrality requires v(t0) >= 0, v(w) >= 0
    if (!t0.is_zero() && val_p(t0, p) < 0) || vw < 0 {
        return Ok(0.0);
    }
    let level = f.level() as i64;
    let j = val_p(&rat_i(2), p) + vw; // v(2w)
    match f {
        FinitePlaceFn::Basic => {
            // u-measure of v(2uw) >= 0
            Ok((p as f64).powi(j as i32))
        }
        FinitePlaceFn::Level { .. } => {
            // enumerate u-cosets at level L inside v(u) >= -j - level
            let lo = -j - level;
            let l = level - j;
            let n = (l - lo) as u32;
            if n > 12 {
                return Err(Error::Precision("split u-enumeration too deep".into()));
            }
            // the level-l cosets cover v(u) >= lo exactly (jj = 0 is the
            // deep region)
            let mut total = 0.0;
            let step = pow_rat(&rat_i(p as i64), lo);
            let reps = sl2_mod_pm(p, f.level());
            let count = (p as i64).pow(n);
            for jj in 0..count {
                let u = rat_i(jj) * &step;
                let meas = (p as f64).powi(-l as i32);
                let upe = PadicElem::from_rat_prec(p, &u, 28);
                let coords = [
                    PadicElem::from_rat_prec(p, t0, 28),
                    w.clone(),
                    upe.mul(w).mul(&PadicElem::from_i64(p, 2)),
                    PadicElem::zero(p),
                ];
                let mut acc = 0.0;
                for k in &reps {
                    let kp = padic_mat(k, p);
                    let v = eval_padic_point(f, p, &coords, Some(&kp))?;
                    acc += v;
                }
                total += meas * acc / reps.len() as f64;
            }
            Ok(total)
        }
    }
}

/// Evaluate level data at a point with p-adic coordinates
/// `(t, y, b, c)`, optionally conjugated by `k`.
fn eval_padic_point(
    f: &FinitePlaceFn,
    p: u64,
    coords: &[PadicElem; 4],
    k: Option<&Mat2<PadicElem>>,
) -> Result<f64> {
    let (t, mut y, mut b, mut c) =
        (coords[0].clone(), coords[1].clone(), coords[2].clone(), coords[3].clone());
    if let Some(k) = k {
        let s = Mat2 { e: [[y.clone(), b.clone()], [c.clone(), y.neg()]] };
        let ki = k.inv().ok_or_else(|| Error::Singular("k singular".into()))?;
        let sc = ki.mul(&s).mul(k);
        y = sc.e[0][0].clone();
        b = sc.e[0][1].clone();
        c = sc.e[1][0].clone();
    }
    match f {
        FinitePlaceFn::Basic => {
            for e in [&t, &y, &b, &c] {
                if e.is_exact_zero() {
                    continue;
                }
                match e.valuation() {
                    Ok(v) => {
                        if v < 0 {
                            return Ok(0.0);
                        }
                    }
                    Err(_) => {
                        if e.abs_prec().unwrap_or(0) < 0 {
                            return Err(Error::Precision("integrality undecidable".into()));
                        }
                    }
                }
            }
            Ok(1.0)
        }
        FinitePlaceFn::Level { level, balls } => {
            let m = *level as i64;
            for ball in balls {
                let diffs = [
                    t.sub(&PadicElem::from_rat_prec(p, &ball.center.t, 28)),
                    y.sub(&PadicElem::from_rat_prec(p, &ball.center.y, 28)),
                    b.sub(&PadicElem::from_rat_prec(p, &ball.center.b, 28)),
                    c.sub(&PadicElem::from_rat_prec(p, &ball.center.c, 28)),
                ];
                let mut inside = true;
                for d in &diffs {
                    if d.is_exact_zero() {
                        continue;
                    }
                    match d.valuation() {
                        Ok(v) => {
                            if v < m {
                                inside = false;
                                break;
                            }
                        }
                        Err(_) => {
                            if d.abs_prec().unwrap_or(0) < m {
                                return Err(Error::Precision("ball membership undecidable".into()));
                            }
                        }
                    }
                }
                if inside {
                    return Ok(rat_to_f64(&ball.value));
                }
            }
            Ok(0.0)
        }
    }
}

/// Local orbital integral dispatcher.
pub fn orbital_local(
    f: &FinitePlaceFn,
    p: u64,
    eta: &XPoint<Rat>,
    depth: u32,
) -> Result<OrbitalValue> {
    let q0 = stabilizer_class(eta)?;
    if is_square_p(&q0, p) {
        orbital_split(f, p, eta, depth)
    } else {
        orbital_anisotropic(f, p, eta, depth)
    }
}

// ---------------------------------------------------------------------------
// Archimedean orbital integrals

/// Archimedean orbital integral for an rss point, with `vol(SO(2)) = 1`,
/// `vol(T(R)) = 1` in the compact (anisotropic) case, and the `N x K`
/// parametrization with its index-two correction in the split case.
pub fn orbital_arch(f: &ArchFn, eta: &XPoint<Rat>, tol: f64) -> Result<f64> {
    let q0 = stabilizer_class(eta)?;
    let q0f = rat_to_f64(&q0);
    if q0f < 0.0 {
        orbital_arch_compact(f, eta, tol)
    } else {
        orbital_arch_split(f, eta, tol)
    }
}

fn orbital_arch_compact(f: &ArchFn, eta: &XPoint<Rat>, tol: f64) -> Result<f64> {
    let ef = eta.to_f64();
    let (t0, y0, b0, c0) = (ef.t, ef.y, ef.b, ef.c);
    if c0 == 0.0 {
        return Err(Error::Domain("compact real stabilizer needs c != 0".into()));
    }
    let r = f.coord_bound(tol * 1e-3) + t0.abs() + 1.0;
    // support bounds derived from the orthogonal invariance of the slice
    // coordinate norm (k-conjugation preserves it):
    // |c0| e^{2s} <= r, |B(u)| e^{-2s} <= r with min |B| = |q0/c0|,
    // |y0 - u c0| <= r.
    let q0 = (t0 * t0 - 1.0) / eta.tau as f64;
    let s_hi = 0.5 * (r / c0.abs()).ln();
    let s_lo = 0.5 * ((q0 / c0).abs() / r).ln();
    let u_mid = y0 / c0;
    let u_rad = r / c0.abs();
    if s_hi < s_lo {
        return Ok(0.0);
    }
    let value = integrate_val(
        |s: f64| {
            let e2s = (2.0 * s).exp();
            integrate_val(
                |u: f64| {
                    let yq = y0 - u * c0;
                    let bq = (b0 + 2.0 * y0 * u - c0 * u * u) / e2s;
                    let cq = c0 * e2s;
                    so2_average(f, eta.tau, t0, yq, bq, cq, tol * 1e-2)
                },
                u_mid - u_rad,
                u_mid + u_rad,
                tol * 1e-1 / (s_hi - s_lo + 1.0),
            ) * (-2.0 * s).exp()
        },
        s_lo - 0.5,
        s_hi + 0.5,
        tol,
    );
    Ok(value)
}

fn so2_average(f: &ArchFn, tau: i64, t: f64, y: f64, b: f64, c: f64, tol: f64) -> f64 {
    // quick reject from the rotation-invariant coordinate norm
    let norm = (y * y + b * b + c * c).sqrt() + t.abs();
    if norm > f.coord_bound(tol * 1e-2) + f.center.t.abs() + 2.0 {
        return 0.0;
    }
    integrate_val(
        |phi: f64| {
            let (cs, sn) = (phi.cos(), phi.sin());
            let k = Mat2::new(cs, -sn, sn, cs);
            let s = Mat2::new(y, b, c, -y);
            let ki = k.inv().unwrap();
            let sc = ki.mul(&s).mul(&k);
            f.eval(&XPoint { tau, t, y: sc.e[0][0], b: sc.e[0][1], c: sc.e[1][0] })
        },
        0.0,
        std::f64::consts::PI,
        tol,
    ) / std::f64::consts::PI
}

fn orbital_arch_split(f: &ArchFn, eta: &XPoint<Rat>, tol: f64) -> Result<f64> {
    let ef = eta.to_f64();
    let q0 = (ef.t * ef.t - 1.0) / eta.tau as f64;
    let w = q0.sqrt();
    // real conjugator onto the diagonal slice
    let g0 = if ef.b != 0.0 {
        let det = -2.0 * ef.b * w;
        Mat2::new(ef.b, ef.b / det, w - ef.y, (-w - ef.y) / det)
    } else if ef.c != 0.0 {
        let det = 2.0 * ef.y;
        Mat2::new(2.0 * ef.y, 0.0, ef.c, 1.0 / det)
    } else {
        Mat2::identity()
    };
    let g0i = g0.inv().ok_or_else(|| Error::Singular("real conjugator singular".into()))?;
    let s_mat = Mat2::new(ef.y, ef.b, ef.c, -ef.y);
    let sd = g0i.mul(&s_mat).mul(&g0);
    let wd = sd.e[0][0];
    let r = f.coord_bound(tol * 1e-3) + ef.t.abs() + 1.0;
    let u_rad = r / (2.0 * wd.abs()) + 1.0;
    let value = integrate_val(
        |u: f64| so2_average(f, eta.tau, ef.t, wd, 2.0 * u * wd, 0.0, tol * 1e-2),
        -u_rad,
        u_rad,
        tol,
    );
    Ok(0.5 * value)
}

// ---------------------------------------------------------------------------
// Diagonal points: local atoms for weighted and unweighted integrals

/// One atom of the local `N x K` integral at a diagonal rss point: a
/// u-region of the given additive measure on which the local weight
/// `v_p(x) = min(0, v(u)) log p` and the (K-averaged) test value are
/// constant.
#[derive(Clone, Debug)]
pub struct LocalAtom {
    pub measure: f64,
    pub weight: f64,
    pub value: f64,
}

/// Atoms at a finite place for `eta = diag-type (t0, y0, 0, 0)`.
pub fn diagonal_atoms(
    f: &FinitePlaceFn,
    p: u64,
    eta: &XPoint<Rat>,
    _tol: f64,
) -> Result<Vec<LocalAtom>> {
    if !eta.b.is_zero() || !eta.c.is_zero() {
        return Err(Error::Domain("diagonal_atoms needs a diagonal point".into()));
    }
    let (t0, y0) = (&eta.t, &eta.y);
    if y0.is_zero() {
        return Err(Error::Domain("diagonal point must be regular".into()));
    }
    let lnp = (p as f64).ln();
    let integral_consts = (t0.is_zero() || val_p(t0, p) >= 0) && val_p(y0, p) >= 0;
    let j = val_p(&(rat_i(2) * y0), p); // v(2 y0)
    let level = f.level() as i64;
    let mut atoms = Vec::new();
    match f {
        FinitePlaceFn::Basic => {
            if !integral_consts {
                return Ok(atoms);
            }
            // support: v(u) >= -j; weight min(0, v(u)) log p
            for n in -j..0 {
                atoms.push(LocalAtom {
                    measure: (p as f64).powi(-n as i32) * (1.0 - 1.0 / p as f64),
                    weight: n as f64 * lnp,
                    value: 1.0,
                });
            }
            atoms.push(LocalAtom { measure: 1.0, weight: 0.0, value: 1.0 });
        }
        FinitePlaceFn::Level { .. } => {
            // enumerate u-cosets at resolution L = level - j within
            // v(u) >= lo = -j - level, then the deep region
            let lo = -j - level;
            let l = level - j;
            let n = (l - lo) as u32;
            if n > 12 {
                return Err(Error::Precision("diagonal atom enumeration too deep".into()));
            }
            // the level-l cosets of the region v(u) >= lo cover it
            // exactly; the jj = 0 coset is the deep region p^l Z_p,
            // where the integrand takes its value at the diagonal point
            let step = pow_rat(&rat_i(p as i64), lo);
            let count = (p as i64).pow(n);
            for jj in 0..count {
                let u = rat_i(jj) * &step;
                let x = XPoint {
                    tau: eta.tau,
                    t: t0.clone(),
                    y: y0.clone(),
                    b: rat_i(2) * y0 * &u,
                    c: Rat::zero(),
                };
                let v = k_averaged_value(f, p, &x);
                let vu = if u.is_zero() { 0 } else { val_p(&u, p).min(0) };
                if !v.is_zero() {
                    atoms.push(LocalAtom {
                        measure: (p as f64).powi(-l as i32),
                        weight: vu as f64 * lnp,
                        value: rat_to_f64(&v),
                    });
                }
            }
        }
    }
    Ok(atoms)
}

/// The places where the atoms at a diagonal point can be nontrivial:
/// `S(f)`, denominators of the coordinates, and divisors of `2 y0`.
pub fn diagonal_places(f_places: &[u64], eta: &XPoint<Rat>) -> Vec<u64> {
    let mut ps: Vec<u64> = f_places.to_vec();
    ps.extend(eta.denominator_primes());
    let two_y = rat_i(2) * &eta.y;
    for q in crate::arith::support_primes(&two_y) {
        ps.push(q);
    }
    ps.sort_unstable();
    ps.dedup();
    ps
}

/// Archimedean factor of the unweighted (`weight = false`) or weighted
/// (`weight = true`) integral at a diagonal rss point.
pub fn diagonal_arch_integral(
    f: &ArchFn,
    eta: &XPoint<Rat>,
    weight: bool,
    tol: f64,
) -> f64 {
    let ef = eta.to_f64();
    let r = f.coord_bound(tol * 1e-3) + ef.t.abs() + 1.0;
    let u_rad = r / (2.0 * ef.y.abs()) + 1.0;
    0.5 * integrate_val(
        |u: f64| {
            let wgt = if weight { -0.5 * (1.0 + u * u).ln() } else { 1.0 };
            wgt * so2_average(f, eta.tau, ef.t, ef.y, 2.0 * ef.y * u, 0.0, tol * 1e-2)
        },
        -u_rad,
        u_rad,
        tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;
    use crate::integrals::testfn::Profile;

    fn elliptic_eta() -> XPoint<Rat> {
        // t0 = 3, tau = -1: q0 = -8, S = [[0, 1], [-8, 0]]
        XPoint::new(-1, rat_i(3), rat_i(0), rat_i(1), rat_i(-8)).unwrap()
    }

    #[test]
    fn square_classes_locally() {
        assert!(is_square_p(&rat_i(9), 5));
        assert!(!is_square_p(&rat_i(5), 5));
        assert!(is_square_p(&rat_i(17), 2));
        assert!(!is_square_p(&rat_i(3), 2));
        assert!(is_square_p(&rat(1, 4), 2));
    }

    #[test]
    fn anisotropic_unit_disc_value_one() {
        // q0 = -8: at p = 5, -8 = 2 mod 5 is a non-residue: anisotropic,
        // unit disc; the orbital integral of the basic function is 1.
        let eta = elliptic_eta();
        let v = orbital_local(&FinitePlaceFn::Basic, 5, &eta, 6).unwrap();
        assert!(v.stabilized);
        assert_eq!(v.exact.unwrap(), rat_i(1));
    }

    #[test]
    fn depth_stabilization() {
        let eta = elliptic_eta();
        // p = 2: -8 has odd 2-valuation: anisotropic (ramified)
        let v4 = orbital_local(&FinitePlaceFn::Basic, 2, &eta, 4).unwrap();
        let v6 = orbital_local(&FinitePlaceFn::Basic, 2, &eta, 6).unwrap();
        assert_eq!(v4.exact, v6.exact);
        assert!(v4.stabilized && v6.stabilized);
    }

    #[test]
    fn conjugation_invariance_exact() {
        let eta = elliptic_eta();
        // g in SL2(Z) subset K_p: conjugating eta gives the same orbital
        // integral for the basic function
        let g: Mat2<Rat> = Mat2::from_i64(2, 1, 1, 1);
        let etag = eta.conj_by(&g);
        for p in [3u64, 5, 7, 2] {
            let a = orbital_local(&FinitePlaceFn::Basic, p, &eta, 6).unwrap();
            let b = orbital_local(&FinitePlaceFn::Basic, p, &etag, 6).unwrap();
            assert_eq!(a.exact, b.exact, "p = {p}");
        }
    }

    #[test]
    fn split_matches_rational_diagonalization() {
        // q0 square in Q: t0 = 5/4 would be non-integral; use t0 = 3 with
        // tau = 2: q0 = 8/2 = 4, w = 2 rational
        let eta = XPoint::new(2, rat_i(3), rat_i(0), rat_i(1), rat_i(4)).unwrap();
        let q0 = stabilizer_class(&eta).unwrap();
        assert_eq!(q0, rat_i(4));
        for p in [3u64, 5] {
            assert!(is_square_p(&q0, p));
            let v = orbital_local(&FinitePlaceFn::Basic, p, &eta, 4).unwrap();
            // unit w, unit entries: the N x K mass is p^{v(2w)} = 1 and the
            // conjugator is unimodular: expect 1
            assert!((v.value - 1.0).abs() < 1e-9, "p={p}: {}", v.value);
        }
    }

    #[test]
    fn split_hensel_path_and_conjugation() {
        // q0 = -15 is a 17-adic square that is not a rational square:
        // the conjugator comes from a Hensel square root
        let eta = XPoint::new(-1, rat_i(4), rat_i(0), rat_i(1), rat_i(-15)).unwrap();
        let q0 = stabilizer_class(&eta).unwrap();
        assert_eq!(q0, rat_i(-15));
        assert!(is_square_p(&q0, 17));
        assert!(crate::arith::square_class(&q0).unwrap() != 1);
        let v = orbital_local(&FinitePlaceFn::Basic, 17, &eta, 4).unwrap();
        // unit discriminant and integral data: the orbit mass is 1
        assert!((v.value - 1.0).abs() < 1e-9, "got {}", v.value);
        // conjugation invariance through the p-adic diagonalization
        let g: Mat2<Rat> = Mat2::from_i64(2, 1, 1, 1);
        let vg = orbital_local(&FinitePlaceFn::Basic, 17, &eta.conj_by(&g), 4).unwrap();
        assert!((v.value - vg.value).abs() < 1e-9);
    }

    #[test]
    fn diagonal_atoms_basic() {
        // eta = diag with t0 = 0, y0 = 1 over Q(i)
        let eta = XPoint::new(-1, rat_i(0), rat_i(1), rat_i(0), rat_i(0)).unwrap();
        for p in [3u64, 5] {
            let atoms = diagonal_atoms(&FinitePlaceFn::Basic, p, &eta, 1e-9).unwrap();
            let total: f64 = atoms.iter().map(|a| a.measure * a.value).sum();
            assert!((total - 1.0).abs() < 1e-12);
            let weighted: f64 = atoms.iter().map(|a| a.measure * a.value * a.weight).sum();
            assert_eq!(weighted, 0.0);
        }
        // at p = 2, v(2 y0) = 1: mass 2, with a negative-weight shell
        let atoms2 = diagonal_atoms(&FinitePlaceFn::Basic, 2, &eta, 1e-9).unwrap();
        let total: f64 = atoms2.iter().map(|a| a.measure * a.value).sum();
        assert!((total - 2.0).abs() < 1e-12);
        let weighted: f64 = atoms2.iter().map(|a| a.measure * a.value * a.weight).sum();
        assert!((weighted + 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn arch_compact_orbit_positive() {
        // stabilizer compact at infinity: tau = 2, t0 = 0, bc = -1/2
        let eta = XPoint::new(2, rat_i(0), rat_i(0), rat_i(1), rat(-1, 2)).unwrap();
        assert!(rat_to_f64(&stabilizer_class(&eta).unwrap()) < 0.0);
        let f = ArchFn {
            profile: Profile::Gauss,
            center: eta.to_f64(),
            radius: 1.0,
            amplitude: 1.0,
        };
        let v = orbital_arch(&f, &eta, 1e-5).unwrap();
        assert!(v > 0.0 && v.is_finite());
    }
}
