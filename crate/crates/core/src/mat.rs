//! Small generic 2x2 matrices over the coefficient rings used in the crate.

use num::Zero;

use crate::arith::{PadicElem, QuadAlg, QuadElem, Rat};

/// Minimal ring interface for matrix entries.
pub trait Scalar: Clone + PartialEq + std::fmt::Debug {
    fn s_add(&self, o: &Self) -> Self;
    fn s_sub(&self, o: &Self) -> Self;
    fn s_mul(&self, o: &Self) -> Self;
    fn s_neg(&self) -> Self;
    /// Multiplicative inverse where it exists.
    fn s_inv(&self) -> Option<Self>;
    fn s_is_zero(&self) -> bool;
}

impl Scalar for Rat {
    fn s_add(&self, o: &Self) -> Self {
        self + o
    }
    fn s_sub(&self, o: &Self) -> Self {
        self - o
    }
    fn s_mul(&self, o: &Self) -> Self {
        self * o
    }
    fn s_neg(&self) -> Self {
        -self.clone()
    }
    fn s_inv(&self) -> Option<Self> {
        if self.is_zero() {
            None
        } else {
            Some(self.recip())
        }
    }
    fn s_is_zero(&self) -> bool {
        self.is_zero()
    }
}

impl Scalar for f64 {
    fn s_add(&self, o: &Self) -> Self {
        self + o
    }
    fn s_sub(&self, o: &Self) -> Self {
        self - o
    }
    fn s_mul(&self, o: &Self) -> Self {
        self * o
    }
    fn s_neg(&self) -> Self {
        -self
    }
    fn s_inv(&self) -> Option<Self> {
        if *self == 0.0 {
            None
        } else {
            Some(1.0 / self)
        }
    }
    fn s_is_zero(&self) -> bool {
        *self == 0.0
    }
}

impl Scalar for QuadElem {
    fn s_add(&self, o: &Self) -> Self {
        self.add(o)
    }
    fn s_sub(&self, o: &Self) -> Self {
        self.sub(o)
    }
    fn s_mul(&self, o: &Self) -> Self {
        self.mul(o)
    }
    fn s_neg(&self) -> Self {
        self.neg()
    }
    fn s_inv(&self) -> Option<Self> {
        self.inv()
    }
    fn s_is_zero(&self) -> bool {
        self.is_zero()
    }
}

impl Scalar for PadicElem {
    fn s_add(&self, o: &Self) -> Self {
        self.add(o)
    }
    fn s_sub(&self, o: &Self) -> Self {
        self.sub(o)
    }
    fn s_mul(&self, o: &Self) -> Self {
        self.mul(o)
    }
    fn s_neg(&self) -> Self {
        self.neg()
    }
    fn s_inv(&self) -> Option<Self> {
        self.inv().ok()
    }
    fn s_is_zero(&self) -> bool {
        self.is_zero_to_prec()
    }
}

/// Rings with canonical integer images, for building constants generically.
pub trait ScalarFrom: Scalar {
    fn s_from_i64(n: i64) -> Self;
}

impl ScalarFrom for Rat {
    fn s_from_i64(n: i64) -> Self {
        crate::arith::rat_i(n)
    }
}

impl ScalarFrom for f64 {
    fn s_from_i64(n: i64) -> Self {
        n as f64
    }
}

/// A 2x2 matrix, row major.
#[derive(Clone, PartialEq, Debug)]
pub struct Mat2<T: Scalar> {
    pub e: [[T; 2]; 2],
}

impl<T: Scalar> Mat2<T> {
    pub fn new(a: T, b: T, c: T, d: T) -> Self {
        Mat2 { e: [[a, b], [c, d]] }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let p = |i: usize, j: usize| {
            self.e[i][0]
                .s_mul(&o.e[0][j])
                .s_add(&self.e[i][1].s_mul(&o.e[1][j]))
        };
        Mat2 { e: [[p(0, 0), p(0, 1)], [p(1, 0), p(1, 1)]] }
    }

    pub fn det(&self) -> T {
        self.e[0][0]
            .s_mul(&self.e[1][1])
            .s_sub(&self.e[0][1].s_mul(&self.e[1][0]))
    }

    pub fn trace(&self) -> T {
        self.e[0][0].s_add(&self.e[1][1])
    }

    /// Inverse for invertible matrices.
    pub fn inv(&self) -> Option<Self> {
        let det_inv = self.det().s_inv()?;
        Some(Mat2 {
            e: [
                [self.e[1][1].s_mul(&det_inv), self.e[0][1].s_neg().s_mul(&det_inv)],
                [self.e[1][0].s_neg().s_mul(&det_inv), self.e[0][0].s_mul(&det_inv)],
            ],
        })
    }

    pub fn add(&self, o: &Self) -> Self {
        let a = |i: usize, j: usize| self.e[i][j].s_add(&o.e[i][j]);
        Mat2 { e: [[a(0, 0), a(0, 1)], [a(1, 0), a(1, 1)]] }
    }

    pub fn sub(&self, o: &Self) -> Self {
        let s = |i: usize, j: usize| self.e[i][j].s_sub(&o.e[i][j]);
        Mat2 { e: [[s(0, 0), s(0, 1)], [s(1, 0), s(1, 1)]] }
    }

    pub fn scale(&self, t: &T) -> Self {
        let m = |i: usize, j: usize| self.e[i][j].s_mul(t);
        Mat2 { e: [[m(0, 0), m(0, 1)], [m(1, 0), m(1, 1)]] }
    }

    pub fn neg(&self) -> Self {
        let m = |i: usize, j: usize| self.e[i][j].s_neg();
        Mat2 { e: [[m(0, 0), m(0, 1)], [m(1, 0), m(1, 1)]] }
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> Mat2<U> {
        Mat2 {
            e: [
                [f(&self.e[0][0]), f(&self.e[0][1])],
                [f(&self.e[1][0]), f(&self.e[1][1])],
            ],
        }
    }

    /// Conjugate `g . self . g^{-1}`; panics if `g` is singular.
    pub fn conj_by(&self, g: &Self) -> Self {
        let gi = g.inv().expect("conjugation by a singular matrix");
        g.mul(self).mul(&gi)
    }
}

impl<T: ScalarFrom> Mat2<T> {
    pub fn identity() -> Self {
        Mat2::new(
            T::s_from_i64(1),
            T::s_from_i64(0),
            T::s_from_i64(0),
            T::s_from_i64(1),
        )
    }

    pub fn from_i64(a: i64, b: i64, c: i64, d: i64) -> Self {
        Mat2::new(
            T::s_from_i64(a),
            T::s_from_i64(b),
            T::s_from_i64(c),
            T::s_from_i64(d),
        )
    }
}

impl Mat2<Rat> {
    pub fn to_f64(&self) -> Mat2<f64> {
        self.map(crate::arith::rat_to_f64)
    }

    /// Entries embedded into a quadratic algebra.
    pub fn embed(&self, alg: QuadAlg) -> Mat2<QuadElem> {
        self.map(|x| QuadElem::from_rat(alg, x.clone()))
    }
}

impl Mat2<QuadElem> {
    /// Entry-wise Galois conjugation: the involution `theta` on `G(Q)`.
    pub fn galois_conj(&self) -> Self {
        self.map(|x| x.conj())
    }

    pub fn identity_e(alg: QuadAlg) -> Self {
        let one = QuadElem::one(alg);
        let zero = QuadElem::zero(alg);
        Mat2::new(one.clone(), zero.clone(), zero, one)
    }
}

/// The Weyl representative `w = [[0, 1], [-1, 0]]`.
pub fn weyl_w<T: ScalarFrom>() -> Mat2<T> {
    Mat2::from_i64(0, 1, -1, 0)
}

/// Upper unipotent `n(u)`.
pub fn upper_unipotent<T: ScalarFrom>(u: T) -> Mat2<T> {
    Mat2::new(T::s_from_i64(1), u, T::s_from_i64(0), T::s_from_i64(1))
}

/// Diagonal torus element `diag(t, 1/t)`; panics on `t = 0`.
pub fn torus_diag<T: ScalarFrom>(t: T) -> Mat2<T> {
    let ti = t.s_inv().expect("torus element needs t != 0");
    Mat2::new(t, T::s_from_i64(0), T::s_from_i64(0), ti)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;

    #[test]
    fn inverse_and_det() {
        let m: Mat2<Rat> = Mat2::from_i64(2, 3, 1, 2);
        assert_eq!(m.det(), crate::arith::rat_i(1));
        let mi = m.inv().unwrap();
        assert_eq!(m.mul(&mi), Mat2::identity());
        let w: Mat2<Rat> = weyl_w();
        assert_eq!(w.mul(&w), Mat2::from_i64(-1, 0, 0, -1));
    }

    #[test]
    fn quad_entries() {
        let alg = QuadAlg::new(-1).unwrap();
        let m: Mat2<Rat> = Mat2::new(rat(1, 2), rat(0, 1), rat(3, 1), rat(2, 1));
        let me = m.embed(alg);
        assert_eq!(me.galois_conj(), me);
        let det = me.det();
        assert_eq!(det, QuadElem::from_rat(alg, rat(1, 1)));
    }
}
