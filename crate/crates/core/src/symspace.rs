//! The symmetric space `X = {h in Res_{E/F} SL2 : h theta(h) = 1}` in
//! explicit coordinates, its invariant-theory map, datum classification,
//! descendants, the Cayley transform, and the Levi retraction.
//!
//! With `E = Q(sqrt tau)` (`tau` squarefree), a point of `X` is
//! `t*I + sqrt(tau) * S` where `S = [[y, b], [c, -y]]` is trace zero over
//! the base field and `t^2 - tau*(y^2 + b*c) = 1`. The scalar part `t` is
//! the half-trace, i.e. the invariant-theory map; the group `SL2` acts by
//! conjugation on `S` alone.

use num::{One, Zero};

use crate::arith::{rat_i, square_class, val_p, QuadAlg, QuadElem, Rat};
use crate::mat::{Mat2, Scalar, ScalarFrom};
use crate::{Error, Result};

/// A point of `X` with coordinates in a ring `T` (exact: `Rat`;
/// archimedean: `f64`).
#[derive(Clone, PartialEq, Debug)]
pub struct XPoint<T: Scalar> {
    /// Squarefree core of `E`.
    pub tau: i64,
    /// Scalar (rational) part of the upper-left entry.
    pub t: T,
    /// `sqrt(tau)`-part of the upper-left entry.
    pub y: T,
    /// Upper-right coordinate (of `sqrt(tau) * b`).
    pub b: T,
    /// Lower-left coordinate.
    pub c: T,
}

/// A point `sqrt(tau) * [[a, b], [c, -a]]` of the normal slice to
/// `1 in X`.
#[derive(Clone, PartialEq, Debug)]
pub struct SlicePoint<T: Scalar> {
    pub tau: i64,
    pub a: T,
    pub b: T,
    pub c: T,
}

impl<T: ScalarFrom> XPoint<T> {
    pub fn identity(tau: i64) -> Self {
        XPoint {
            tau,
            t: T::s_from_i64(1),
            y: T::s_from_i64(0),
            b: T::s_from_i64(0),
            c: T::s_from_i64(0),
        }
    }

    pub fn minus_identity(tau: i64) -> Self {
        XPoint {
            tau,
            t: T::s_from_i64(-1),
            y: T::s_from_i64(0),
            b: T::s_from_i64(0),
            c: T::s_from_i64(0),
        }
    }

    /// `t^2 - tau*(y^2 + bc) - 1`, which must vanish on `X`.
    pub fn invariant_defect(&self) -> T {
        let tau = T::s_from_i64(self.tau);
        let q = self.y.s_mul(&self.y).s_add(&self.b.s_mul(&self.c));
        self.t
            .s_mul(&self.t)
            .s_sub(&tau.s_mul(&q))
            .s_sub(&T::s_from_i64(1))
    }

    /// Trace-zero matrix part `[[y, b], [c, -y]]`.
    pub fn slice_part(&self) -> Mat2<T> {
        Mat2::new(self.y.clone(), self.b.clone(), self.c.clone(), self.y.s_neg())
    }

    /// Conjugation `x -> g x g^{-1}`, acting on the slice part.
    pub fn conj_by(&self, g: &Mat2<T>) -> Self {
        let s = self.slice_part().conj_by(g);
        XPoint {
            tau: self.tau,
            t: self.t.clone(),
            y: s.e[0][0].clone(),
            b: s.e[0][1].clone(),
            c: s.e[1][0].clone(),
        }
    }

    pub fn from_slice_part(tau: i64, t: T, s: &Mat2<T>) -> Self {
        XPoint {
            tau,
            t,
            y: s.e[0][0].clone(),
            b: s.e[0][1].clone(),
            c: s.e[1][0].clone(),
        }
    }
}

impl XPoint<Rat> {
    pub fn new(tau: i64, t: Rat, y: Rat, b: Rat, c: Rat) -> Result<Self> {
        let x = XPoint { tau, t, y, b, c };
        if !x.invariant_defect().is_zero() {
            return Err(Error::Domain("point does not satisfy the X equation".into()));
        }
        Ok(x)
    }

    /// The unipotent point `[[1, sqrt(tau) b], [0, 1]]`, `b != 0`.
    pub fn unipotent(tau: i64, b: Rat) -> Result<Self> {
        if b.is_zero() {
            return Err(Error::Domain("unipotent representative needs b != 0".into()));
        }
        Ok(XPoint { tau, t: rat_i(1), y: Rat::zero(), b, c: Rat::zero() })
    }

    /// Matrix form over `E`.
    pub fn to_mat(&self) -> Mat2<QuadElem> {
        let alg = QuadAlg::new(self.tau).expect("tau squarefree");
        let a = QuadElem::new(alg, self.t.clone(), self.y.clone());
        let ur = QuadElem::new(alg, Rat::zero(), self.b.clone());
        let ll = QuadElem::new(alg, Rat::zero(), self.c.clone());
        Mat2::new(a.clone(), ur, ll, a.conj())
    }

    /// Reads a matrix over `E` back into coordinates, checking shape and
    /// the defining equation.
    pub fn from_mat(m: &Mat2<QuadElem>) -> Result<Self> {
        let alg = m.e[0][0].alg;
        if m.e[1][1] != m.e[0][0].conj() {
            return Err(Error::Domain("diagonal entries are not conjugate".into()));
        }
        if !m.e[0][1].x.is_zero() || !m.e[1][0].x.is_zero() {
            return Err(Error::Domain("off-diagonal entries not in sqrt(tau) F".into()));
        }
        XPoint::new(
            alg.core(),
            m.e[0][0].x.clone(),
            m.e[0][0].y.clone(),
            m.e[0][1].y.clone(),
            m.e[1][0].y.clone(),
        )
    }

    pub fn to_f64(&self) -> XPoint<f64> {
        XPoint {
            tau: self.tau,
            t: crate::arith::rat_to_f64(&self.t),
            y: crate::arith::rat_to_f64(&self.y),
            b: crate::arith::rat_to_f64(&self.b),
            c: crate::arith::rat_to_f64(&self.c),
        }
    }

    /// All coordinates p-integral (membership in the coordinate model of
    /// `X(Z_p)`).
    pub fn is_integral_at(&self, p: u64) -> bool {
        [&self.t, &self.y, &self.b, &self.c]
            .into_iter()
            .all(|r| r.is_zero() || val_p(r, p) >= 0)
    }

    /// Primes where some coordinate is non-integral.
    pub fn denominator_primes(&self) -> Vec<u64> {
        let mut ps = Vec::new();
        for r in [&self.t, &self.y, &self.b, &self.c] {
            if !r.is_zero() {
                for (p, _) in crate::arith::factor(&num::Signed::abs(r.denom())) {
                    ps.push(p);
                }
            }
        }
        ps.sort_unstable();
        ps.dedup();
        ps
    }
}

impl XPoint<f64> {
    /// Euclidean distance between coordinate vectors `(t, y, b, c)`.
    pub fn coord_dist(&self, o: &XPoint<f64>) -> f64 {
        ((self.t - o.t).powi(2)
            + (self.y - o.y).powi(2)
            + (self.b - o.b).powi(2)
            + (self.c - o.c).powi(2))
        .sqrt()
    }
}

impl<T: ScalarFrom> SlicePoint<T> {
    pub fn new(tau: i64, a: T, b: T, c: T) -> Self {
        SlicePoint { tau, a, b, c }
    }

    pub fn zero(tau: i64) -> Self {
        SlicePoint::new(tau, T::s_from_i64(0), T::s_from_i64(0), T::s_from_i64(0))
    }

    /// `a^2 + bc`, i.e. `-det` of the trace-zero matrix part.
    pub fn minus_det(&self) -> T {
        self.a.s_mul(&self.a).s_add(&self.b.s_mul(&self.c))
    }

    pub fn matrix_part(&self) -> Mat2<T> {
        Mat2::new(self.a.clone(), self.b.clone(), self.c.clone(), self.a.s_neg())
    }

    pub fn ad_by(&self, g: &Mat2<T>) -> Self {
        let m = self.matrix_part().conj_by(g);
        SlicePoint {
            tau: self.tau,
            a: m.e[0][0].clone(),
            b: m.e[0][1].clone(),
            c: m.e[1][0].clone(),
        }
    }
}

/// Half-trace: the invariant-theory map `X -> A^1`.
pub fn chi<T: Scalar>(x: &XPoint<T>) -> T {
    x.t.clone()
}

/// Classification of a geometric datum by its half-trace.
#[derive(Clone, Copy, PartialEq, Eq, Debug, serde::Serialize, serde::Deserialize)]
pub enum DatumClass {
    Elliptic,
    RssNonElliptic,
    UnipotentPlus,
    UnipotentMinus,
}

/// A geometric datum: a rational point of the invariant-theory base with
/// its classification data.
#[derive(Clone, PartialEq, Debug, serde::Serialize, serde::Deserialize)]
pub struct GeomDatum {
    /// Value of the invariant-theory map.
    #[serde(with = "crate::arith::rat_string")]
    pub t0: Rat,
    pub class: DatumClass,
    /// Splitting type `Q[T]/(T^2 - 2 t0 T + 1)` as a quadratic etale
    /// algebra; `None` for the non-reduced (unipotent) fibers.
    pub spl: Option<QuadAlg>,
    /// The algebra `E` the datum lives over.
    pub e: QuadAlg,
}

/// Classify the fiber over `t0` for the symmetric space attached to `e`.
pub fn classify(t0: &Rat, e: QuadAlg) -> GeomDatum {
    let disc = t0 * t0 - rat_i(1);
    if disc.is_zero() {
        let class = if t0.is_one() {
            DatumClass::UnipotentPlus
        } else {
            DatumClass::UnipotentMinus
        };
        return GeomDatum { t0: t0.clone(), class, spl: None, e };
    }
    let core = square_class(&disc).expect("nonzero discriminant");
    let spl = QuadAlg::new(core).expect("square class is squarefree");
    let class = if spl == e {
        DatumClass::RssNonElliptic
    } else {
        DatumClass::Elliptic
    };
    GeomDatum { t0: t0.clone(), class, spl: Some(spl), e }
}

/// Descendant algebra: the `L` with descendant pair
/// `(Res Nm^1_{M/E}, Nm^1_{L/F})`, i.e. the reflection of the splitting
/// type through `E`. Undefined for unipotent data.
pub fn descendant(d: &GeomDatum) -> Result<QuadAlg> {
    match d.spl {
        Some(spl) => Ok(spl.reflect_through(&d.e)),
        None => Err(Error::Domain("descendant of a unipotent datum is undefined".into())),
    }
}

/// The Cayley transform `kappa_eps(Y) = -eps (1 + Y)(1 - Y)^{-1}` in slice
/// coordinates: with `q = a^2 + bc` and `D = 1 - tau q`,
/// `t = -eps (1 + tau q)/D` and the slice part is `(-2 eps / D) * Y`.
pub fn cayley(eps: i64, y: &SlicePoint<Rat>) -> Result<XPoint<Rat>> {
    assert!(eps == 1 || eps == -1);
    let q = y.minus_det();
    let d = rat_i(1) - rat_i(y.tau) * &q;
    if d.is_zero() {
        return Err(Error::Singular("cayley: det(1 - Y) = 0".into()));
    }
    let e = rat_i(-eps);
    let t = &e * (rat_i(1) + rat_i(y.tau) * &q) / &d;
    let scale = rat_i(2) * &e / &d;
    Ok(XPoint {
        tau: y.tau,
        t,
        y: &scale * &y.a,
        b: &scale * &y.b,
        c: &scale * &y.c,
    })
}

/// Inverse Cayley transform `-(eps + x)(eps - x)^{-1} / sqrt(tau)`: a
/// scalar multiple `-eps/(1 - eps t)` of the slice part of `x`.
pub fn cayley_inv(eps: i64, x: &XPoint<Rat>) -> Result<SlicePoint<Rat>> {
    assert!(eps == 1 || eps == -1);
    let den = rat_i(1) - rat_i(eps) * &x.t;
    if den.is_zero() {
        return Err(Error::Singular("cayley_inv: det(eps - x) = 0".into()));
    }
    let scale = rat_i(-eps) / &den;
    Ok(SlicePoint {
        tau: x.tau,
        a: &scale * &x.y,
        b: &scale * &x.b,
        c: &scale * &x.c,
    })
}

/// Scalar Cayley map on the invariant-theory base, the bottom row of the
/// commuting square: `q -> -eps (1 + tau q)/(1 - tau q)`.
pub fn cayley_base(eps: i64, tau: i64, q: &Rat) -> Result<Rat> {
    let d = rat_i(1) - rat_i(tau) * q;
    if d.is_zero() {
        return Err(Error::Singular("cayley_base at the singular fiber".into()));
    }
    Ok(rat_i(-eps) * (rat_i(1) + rat_i(tau) * q) / d)
}

/// The slice coordinate scale of the unipotent-line change of variables
/// at `eta`: the map `n -> N` is affine with derivative
/// `-2 eps / ((eps - x)(eps - conj x)) = -eps / (1 - eps chi(eta))`.
pub fn cayley_unipotent_scale(eps: i64, eta: &XPoint<Rat>) -> Result<Rat> {
    let den = rat_i(1) - rat_i(eps) * &eta.t;
    if den.is_zero() {
        return Err(Error::Singular("scale undefined on the singular fiber".into()));
    }
    Ok(rat_i(-eps) / den)
}

/// Truncation sign convention at a datum: `eps = -1` over `chi = 1`,
/// `eps = +1` over `chi = -1`, and `eps = 1` elsewhere.
pub fn eps_for_datum(t0: &Rat) -> i64 {
    if t0.is_one() {
        -1
    } else {
        1
    }
}

/// Galois involution on `G(Q)`: entry-wise conjugation.
pub fn theta(g: &Mat2<QuadElem>) -> Mat2<QuadElem> {
    g.galois_conj()
}

/// Twisted action `g * x = g x theta(g)^{-1}` on matrix points of `X`.
pub fn theta_star(g: &Mat2<QuadElem>, x: &Mat2<QuadElem>) -> Result<Mat2<QuadElem>> {
    let ti = theta(g)
        .inv()
        .ok_or_else(|| Error::Singular("twisted action by a singular matrix".into()))?;
    Ok(g.mul(x).mul(&ti))
}

/// Levi retraction of `eta in B(F) cap X(F)` (lower-left coordinate zero):
/// returns `(eta_M, eta_N, n1)` with `eta = eta_M eta_N`,
/// `eta_M = diag(x, conj x)` in `X_M`, `eta_N` upper unipotent over `E`,
/// and `n1` in the opposite-unipotent line with
/// `gamma n1 theta(gamma n1)^{-1} = eta` for the Hilbert-90 representative
/// `gamma = diag(y0, 1/y0)`.
pub struct LeviRetraction {
    pub eta_m: XPoint<Rat>,
    pub eta_n: Mat2<QuadElem>,
    pub n1: Mat2<QuadElem>,
    /// The Hilbert-90 witness `y0` with `x = y0 / conj(y0)`.
    pub y0: QuadElem,
}

pub fn levi_retract(eta: &XPoint<Rat>) -> Result<LeviRetraction> {
    if !eta.c.is_zero() {
        return Err(Error::Domain("retraction needs a point of B cap X (c = 0)".into()));
    }
    let alg = QuadAlg::new(eta.tau).expect("tau squarefree");
    let x = QuadElem::new(alg, eta.t.clone(), eta.y.clone());
    let eta_m = XPoint::new(eta.tau, eta.t.clone(), eta.y.clone(), Rat::zero(), Rat::zero())?;
    // Hilbert 90: x = y0/conj(y0). Take y0 = (1+x)/2 when x != -1 (so the
    // unipotent fiber gets y0 = 1), and y0 = sqrt(tau) at x = -1.
    let minus_one = QuadElem::from_rat(alg, rat_i(-1));
    let y0 = if x == minus_one {
        QuadElem::sqrt_core(alg)
    } else {
        let half = QuadElem::from_rat(alg, crate::arith::rat(1, 2));
        half.mul(&QuadElem::one(alg).add(&x))
    };
    let norm_y0 = y0.norm(); // = y0 conj(y0), a rational
    // n1 = [[1, sqrt(tau) a / (2 y0 conj(y0))], [0, 1]] with a = eta.b.
    let n1_coef = QuadElem::new(alg, Rat::zero(), &eta.b / (rat_i(2) * &norm_y0));
    let one = QuadElem::one(alg);
    let zero = QuadElem::zero(alg);
    let n1 = Mat2::new(one.clone(), n1_coef, zero.clone(), one.clone());
    // eta_N = eta_M^{-1} eta = [[1, sqrt(tau) a / x], [0, 1]].
    let xinv = x.inv().ok_or_else(|| Error::Singular("eta_M not invertible".into()))?;
    let etan_coef = QuadElem::new(alg, Rat::zero(), eta.b.clone()).mul(&xinv);
    let eta_n = Mat2::new(one.clone(), etan_coef, zero, one);
    Ok(LeviRetraction { eta_m, eta_n, n1, y0 })
}

/// Square class of a nonzero rational, for indexing unipotent orbits by
/// `F^x / (F^x)^2`.
pub fn unipotent_square_class(b: &Rat) -> Result<i64> {
    square_class(b)
}
