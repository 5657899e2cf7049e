//! Line functions: the one-variable functions `f_x(b) = f(x^{-1} u(2b) x)`
//! derived from test functions along the unipotent line, and their Fourier
//! transforms.
//!
//! At a finite place a line function is locally constant with compact
//! support, stored as disjoint cosets `rep + p^level Z_p` with exact
//! rational values. Fourier transforms use the standard self-dual additive
//! characters: `psi_p(x) = e^{2 pi i {x}_p}` with conductor `Z_p`, and
//! `psi_inf(x) = e^{2 pi i x}`; `1_{Z_p}` and the Gaussian are self-dual.

use std::sync::Arc;

use num::{One, Zero};
use num_complex::Complex64;

use crate::arith::{pow_rat, rat_i, rat_to_f64, unit_part_mod_pk, val_p, Rat};
use crate::mat::Mat2;
use crate::quad::integrate_val;
use crate::symspace::XPoint;
use crate::{Error, Result};

use super::testfn::{ArchFn, FinitePlaceFn};

/// Values carried by finite-place line functions.
pub trait LineValue: Clone + std::fmt::Debug {
    fn lv_zero() -> Self;
    fn lv_add(&self, o: &Self) -> Self;
    fn lv_scale(&self, c: &Rat) -> Self;
    fn lv_is_zero(&self) -> bool;
    fn lv_to_c64(&self) -> Complex64;
}

impl LineValue for Rat {
    fn lv_zero() -> Self {
        Rat::zero()
    }
    fn lv_add(&self, o: &Self) -> Self {
        self + o
    }
    fn lv_scale(&self, c: &Rat) -> Self {
        self * c
    }
    fn lv_is_zero(&self) -> bool {
        self.is_zero()
    }
    fn lv_to_c64(&self) -> Complex64 {
        Complex64::new(rat_to_f64(self), 0.0)
    }
}

impl LineValue for Complex64 {
    fn lv_zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn lv_add(&self, o: &Self) -> Self {
        self + o
    }
    fn lv_scale(&self, c: &Rat) -> Self {
        self * rat_to_f64(c)
    }
    fn lv_is_zero(&self) -> bool {
        self.norm() == 0.0
    }
    fn lv_to_c64(&self) -> Complex64 {
        *self
    }
}

/// A locally constant, compactly supported function on `Q_p`, as disjoint
/// cosets `rep + p^level Z_p` with values.
#[derive(Clone, Debug)]
pub struct FiniteLineFn<V: LineValue = Rat> {
    pub p: u64,
    /// `(rep, level, value)`, pairwise disjoint cosets.
    pub cosets: Vec<(Rat, i64, V)>,
}

impl<V: LineValue> FiniteLineFn<V> {
    pub fn zero_fn(p: u64) -> Self {
        FiniteLineFn { p, cosets: Vec::new() }
    }

    pub fn value_at(&self, b: &Rat) -> V {
        for (rep, level, v) in &self.cosets {
            let d = b - rep;
            if d.is_zero() || val_p(&d, self.p) >= *level {
                return v.clone();
            }
        }
        V::lv_zero()
    }

    /// Additive integral with `vol(Z_p) = 1`.
    pub fn integral(&self) -> V {
        let mut acc = V::lv_zero();
        for (_, level, v) in &self.cosets {
            acc = acc.lv_add(&v.lv_scale(&pow_rat(&rat_i(self.p as i64), -level)));
        }
        acc
    }

    /// Smallest valuation met by the support; `None` when empty.
    pub fn support_min_val(&self) -> Option<i64> {
        self.cosets
            .iter()
            .map(|(rep, level, _)| if rep.is_zero() { *level } else { val_p(rep, self.p).min(*level) })
            .min()
    }

    pub fn max_level(&self) -> i64 {
        self.cosets.iter().map(|(_, l, _)| *l).max().unwrap_or(0)
    }

    pub fn is_zero_fn(&self) -> bool {
        self.cosets.iter().all(|(_, _, v)| v.lv_is_zero())
    }

    pub fn scale(&self, c: &Rat) -> Self {
        FiniteLineFn {
            p: self.p,
            cosets: self
                .cosets
                .iter()
                .map(|(r, l, v)| (r.clone(), *l, v.lv_scale(c)))
                .collect(),
        }
    }

    /// Rewrite on the common refinement at `level >= max_level`, merging
    /// duplicate cosets.
    pub fn refined(&self, level: i64) -> Self {
        assert!(level >= self.max_level());
        let p = self.p;
        let mut out: Vec<(Rat, i64, V)> = Vec::new();
        for (rep, l, v) in &self.cosets {
            let n = (level - l) as u32;
            let count = (p as i64).pow(n.min(12));
            assert!(n <= 12, "refinement too deep");
            for j in 0..count {
                let r = rep + rat_i(j) * pow_rat(&rat_i(p as i64), *l);
                let r = canonical_rep(&r, p, level);
                match out.iter_mut().find(|(r2, _, _)| {
                    let d = &r - &*r2;
                    d.is_zero() || val_p(&d, p) >= level
                }) {
                    Some((_, _, v2)) => *v2 = v2.lv_add(v),
                    None => out.push((r, level, v.clone())),
                }
            }
        }
        FiniteLineFn { p, cosets: out }
    }

    /// Pointwise sum.
    pub fn add(&self, o: &Self) -> Self {
        assert_eq!(self.p, o.p);
        let level = self.max_level().max(o.max_level());
        let mut a = self.refined(level);
        let b = o.refined(level);
        for (rep, l, v) in b.cosets {
            match a.cosets.iter_mut().find(|(r2, _, _)| {
                let d = &rep - &*r2;
                d.is_zero() || val_p(&d, self.p) >= level
            }) {
                Some((_, _, v2)) => *v2 = v2.lv_add(&v),
                None => a.cosets.push((rep, l, v)),
            }
        }
        a.cosets.retain(|(_, _, v)| !v.lv_is_zero());
        a
    }
}

impl FiniteLineFn<Rat> {
    /// The basic line function `1_{Z_p}`.
    pub fn basic(p: u64) -> Self {
        FiniteLineFn { p, cosets: vec![(Rat::zero(), 0, Rat::one())] }
    }

    /// Indicator of `p^m Z_p`.
    pub fn ball(p: u64, m: i64) -> Self {
        FiniteLineFn { p, cosets: vec![(Rat::zero(), m, Rat::one())] }
    }
}

/// Canonical coset representative: the principal part of `r` modulo
/// `p^level`, i.e. the unique rep of the form `a p^v` with
/// `0 <= a < p^(level - v)`.
pub fn canonical_rep(r: &Rat, p: u64, level: i64) -> Rat {
    if r.is_zero() {
        return Rat::zero();
    }
    let v = val_p(r, p);
    if v >= level {
        return Rat::zero();
    }
    let k = (level - v) as u32;
    let u = unit_part_mod_pk(r, p, k);
    rat_i(u) * pow_rat(&rat_i(p as i64), v)
}

/// The additive character `psi_p(r) = e^(2 pi i {r}_p)`.
pub fn psi_p(r: &Rat, p: u64) -> Complex64 {
    if r.is_zero() {
        return Complex64::new(1.0, 0.0);
    }
    let v = val_p(r, p);
    if v >= 0 {
        return Complex64::new(1.0, 0.0);
    }
    let k = (-v) as u32;
    let u = unit_part_mod_pk(r, p, k);
    let frac = u as f64 / (p as f64).powi(k as i32);
    Complex64::from_polar(1.0, std::f64::consts::TAU * frac)
}

/// Exact finite-place Fourier transform by character sums:
/// `g-hat(xi) = sum over cosets of value * p^(-level) * psi(rep * xi)`,
/// supported in `p^(-max level) Z_p` and locally constant of level
/// `-(support min val)`.
pub fn fourier_finite<V: LineValue>(g: &FiniteLineFn<V>) -> FiniteLineFn<Complex64> {
    let p = g.p;
    if g.cosets.is_empty() {
        return FiniteLineFn::zero_fn(p);
    }
    let out_level = -g.support_min_val().unwrap();
    let out_minval = -g.max_level();
    let n = (out_level - out_minval) as u32;
    assert!(n <= 12, "fourier refinement too deep");
    let count = (p as i64).pow(n);
    let mut cosets = Vec::new();
    for j in 0..count {
        let xi = rat_i(j) * pow_rat(&rat_i(p as i64), out_minval);
        let xi = canonical_rep(&xi, p, out_level);
        let mut acc = Complex64::new(0.0, 0.0);
        for (rep, level, v) in &g.cosets {
            let reach = if xi.is_zero() { i64::MIN } else { -val_p(&xi, p) };
            if reach <= *level {
                acc += v.lv_to_c64()
                    * rat_to_f64(&pow_rat(&rat_i(p as i64), -level))
                    * psi_p(&(rep * &xi), p);
            }
        }
        if acc.norm() > 1e-14 {
            cosets.push((xi, out_level, acc));
        }
    }
    FiniteLineFn { p, cosets }
}

/// An archimedean line function: an evaluator with a certified support (or
/// effective-support) radius.
#[derive(Clone)]
pub struct ArchLineFn {
    pub eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    /// `|b| > support` implies `|g(b)|` below the working tail.
    pub support: f64,
}

impl std::fmt::Debug for ArchLineFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ArchLineFn(support <= {})", self.support)
    }
}

impl ArchLineFn {
    pub fn at(&self, b: f64) -> f64 {
        (self.eval)(b)
    }

    pub fn gaussian() -> Self {
        ArchLineFn {
            eval: Arc::new(|b| (-std::f64::consts::PI * b * b).exp()),
            support: 7.0,
        }
    }

    /// Additive integral.
    pub fn integral(&self, tol: f64) -> f64 {
        let e = self.eval.clone();
        integrate_val(move |b| e(b), -self.support, self.support, tol)
    }

    /// Fourier transform value at a point, by quadrature.
    pub fn fourier_at(&self, xi: f64, tol: f64) -> Complex64 {
        let e = self.eval.clone();
        let re = integrate_val(
            {
                let e = e.clone();
                move |b| e(b) * (std::f64::consts::TAU * b * xi).cos()
            },
            -self.support,
            self.support,
            tol,
        );
        let im = integrate_val(
            move |b| e(b) * (std::f64::consts::TAU * b * xi).sin(),
            -self.support,
            self.support,
            tol,
        );
        Complex64::new(re, im)
    }
}

/// `M = x^{-1} E12 x`, the direction matrix of a conjugated unipotent
/// line.
pub fn conj_direction(x: &Mat2<Rat>) -> Result<(Rat, Rat, Rat)> {
    let e12: Mat2<Rat> = Mat2::from_i64(0, 1, 0, 0);
    let xi = x
        .inv()
        .ok_or_else(|| Error::Singular("derive_fx needs an invertible conjugator".into()))?;
    let m = xi.mul(&e12).mul(x);
    Ok((m.e[0][0].clone(), m.e[0][1].clone(), m.e[1][0].clone()))
}

/// Line data of `a -> f(point(a))` along an affine line of X-points with
/// constant invariant coordinate: `point(a)` has coordinates
/// `(t0, y0 + a dy, b0 + a db, c0 + a dc)`.
pub fn line_data_finite(
    f: &FinitePlaceFn,
    p: u64,
    base: &crate::symspace::XPoint<Rat>,
    dir: &(Rat, Rat, Rat),
) -> FiniteLineFn<Rat> {
    let dirs = [&dir.0, &dir.1, &dir.2];
    let bases = [&base.y, &base.b, &base.c];
    match f {
        FinitePlaceFn::Basic => {
            // constant conditions
            if !base.t.is_zero() && val_p(&base.t, p) < 0 {
                return FiniteLineFn::zero_fn(p);
            }
            // conditions v(base_* + a dir_*) >= 0
            let mut current: Option<(Rat, i64)> = None;
            for (dir, cen) in dirs.iter().zip(bases) {
                match intersect_linear(current, dir, cen, 0, p) {
                    Ok(c) => current = c,
                    Err(()) => return FiniteLineFn::zero_fn(p),
                }
            }
            match current {
                Some((rep, lev)) => FiniteLineFn {
                    p,
                    cosets: vec![(canonical_rep(&rep, p, lev), lev, Rat::one())],
                },
                None => panic!("the affine line must have a nonzero direction"),
            }
        }
        FinitePlaceFn::Level { level, balls } => {
            let m = *level as i64;
            let mut cosets = Vec::new();
            'balls: for ball in balls {
                let dt = &base.t - &ball.center.t;
                if !dt.is_zero() && val_p(&dt, p) < m {
                    continue;
                }
                let centers = [&ball.center.y, &ball.center.b, &ball.center.c];
                let mut current: Option<(Rat, i64)> = None;
                for ((dir, cen), tgt) in dirs.iter().zip(bases).zip(centers) {
                    match intersect_linear_offset(current, dir, cen, tgt, m, p) {
                        Ok(c) => current = c,
                        Err(()) => continue 'balls,
                    }
                }
                match current {
                    Some((rep, lev)) => {
                        cosets.push((canonical_rep(&rep, p, lev), lev, ball.value.clone()))
                    }
                    None => panic!("the affine line must have a nonzero direction"),
                }
            }
            FiniteLineFn { p, cosets }
        }
    }
}

/// Intersect the running coset with `{a : v(base + a dir) >= min_val}`.
fn intersect_linear(
    current: Option<(Rat, i64)>,
    dir: &Rat,
    base: &Rat,
    min_val: i64,
    p: u64,
) -> std::result::Result<Option<(Rat, i64)>, ()> {
    if dir.is_zero() {
        if !base.is_zero() && val_p(base, p) < min_val {
            return Err(());
        }
        return Ok(current);
    }
    let rep = -base.clone() / dir;
    let lev = min_val - val_p(dir, p);
    merge_coset(current, rep, lev, p)
}

fn intersect_linear_offset(
    current: Option<(Rat, i64)>,
    dir: &Rat,
    base: &Rat,
    target: &Rat,
    min_val: i64,
    p: u64,
) -> std::result::Result<Option<(Rat, i64)>, ()> {
    // v(base + a dir - target) >= min_val
    let shifted = base.clone() - target.clone();
    intersect_linear(current, dir, &shifted, min_val, p)
}

fn merge_coset(
    current: Option<(Rat, i64)>,
    rep: Rat,
    lev: i64,
    p: u64,
) -> std::result::Result<Option<(Rat, i64)>, ()> {
    match current {
        None => Ok(Some((rep, lev))),
        Some((r0, l0)) => {
            let d = &rep - &r0;
            if !d.is_zero() && val_p(&d, p) < l0.min(lev) {
                return Err(()); // empty intersection
            }
            if lev >= l0 {
                Ok(Some((rep, lev)))
            } else {
                Ok(Some((r0, l0)))
            }
        }
    }
}

/// The two unipotent data: over `chi = 1` the line point is `u(2b)` and
/// over `chi = -1` it is `-u(-tau b)` (the twist by `gamma_0`).
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum UnipotentKind {
    Plus,
    Minus,
}

impl UnipotentKind {
    pub fn center_t(&self) -> i64 {
        match self {
            UnipotentKind::Plus => 1,
            UnipotentKind::Minus => -1,
        }
    }

    /// Coefficient of `b` in the slice coordinate of the line point.
    pub fn b_coeff(&self, tau: i64) -> Rat {
        match self {
            UnipotentKind::Plus => rat_i(2),
            UnipotentKind::Minus => rat_i(-tau),
        }
    }

    pub fn sign(&self) -> i64 {
        self.center_t()
    }
}

/// Finite-place derived line function `b -> f(x^{-1} u(2b) x)` (or its
/// `gamma_0`-twisted variant for the other unipotent datum).
pub fn derive_fx_finite_kind(
    f: &FinitePlaceFn,
    p: u64,
    x: &Mat2<Rat>,
    kind: UnipotentKind,
    tau: i64,
) -> Result<FiniteLineFn<Rat>> {
    let (my, mb, mc) = conj_direction(x)?;
    let coeff = kind.b_coeff(tau);
    let base = crate::symspace::XPoint {
        tau,
        t: rat_i(kind.center_t()),
        y: Rat::zero(),
        b: Rat::zero(),
        c: Rat::zero(),
    };
    let dir = (&coeff * my, &coeff * mb, &coeff * mc);
    Ok(line_data_finite(f, p, &base, &dir))
}

/// Finite-place derived line function `b -> f(x^{-1} u(2b) x)`.
pub fn derive_fx_finite(f: &FinitePlaceFn, p: u64, x: &Mat2<Rat>) -> Result<FiniteLineFn<Rat>> {
    // tau plays no role in the plus case: the base is the identity
    derive_fx_finite_kind(f, p, x, UnipotentKind::Plus, 1)
}

/// Archimedean derived line function, optionally for the twisted datum.
pub fn derive_fx_arch_kind(
    f: &ArchFn,
    tau: i64,
    x: &Mat2<f64>,
    kind: UnipotentKind,
    tail: f64,
) -> Result<ArchLineFn> {
    let e12: Mat2<f64> = Mat2::from_i64(0, 1, 0, 0);
    let xi = x
        .inv()
        .ok_or_else(|| Error::Singular("derive_fx needs an invertible conjugator".into()))?;
    let m = xi.mul(&e12).mul(x);
    let dir_norm =
        (m.e[0][0].powi(2) + m.e[0][1].powi(2) + m.e[1][0].powi(2)).sqrt();
    let coeff = rat_to_f64(&kind.b_coeff(tau));
    let t0 = kind.center_t() as f64;
    let bound = f.coord_bound(tail);
    let support = (bound + 2.0) / (coeff.abs() * dir_norm);
    let f = f.clone();
    let eval = move |b: f64| {
        let s = coeff * b;
        let pt = XPoint {
            tau,
            t: t0,
            y: s * m.e[0][0],
            b: s * m.e[0][1],
            c: s * m.e[1][0],
        };
        f.eval(&pt)
    };
    Ok(ArchLineFn { eval: Arc::new(eval), support })
}

/// Archimedean derived line function `b -> f(x^{-1} u(2b) x)`.
pub fn derive_fx_arch(f: &ArchFn, tau: i64, x: &Mat2<f64>, tail: f64) -> Result<ArchLineFn> {
    derive_fx_arch_kind(f, tau, x, UnipotentKind::Plus, tail)
}

/// Poisson check data: both sides of `sum g(n) = sum g-hat(n)` by direct
/// summation.
pub fn poisson_check(g: &ArchLineFn, tol: f64) -> Result<(f64, f64)> {
    let n_max = g.support.ceil() as i64 + 1;
    let mut lhs = 0.0;
    for n in -n_max..=n_max {
        lhs += g.at(n as f64);
    }
    // dual side: sum g-hat(n) until the terms are negligible for a
    // sustained stretch
    let quad_tol = tol * 1e-3;
    let mut rhs = g.fourier_at(0.0, quad_tol).re;
    let mut tail_run = 0;
    let mut n = 1i64;
    while n < 4000 {
        let t = g.fourier_at(n as f64, quad_tol).re + g.fourier_at(-(n as f64), quad_tol).re;
        rhs += t;
        if t.abs() < tol * 1e-2 {
            tail_run += 1;
            if tail_run >= 5 {
                return Ok((lhs, rhs));
            }
        } else {
            tail_run = 0;
        }
        n += 1;
    }
    Err(Error::Accuracy { wanted: tol, achieved: f64::NAN })
}
