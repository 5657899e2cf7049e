//! Riemann/Hurwitz zeta by Euler-Maclaurin, digamma, and Dirichlet
//! L-values for quadratic characters. These supply the unramified tails of
//! global Tate zeta integrals; the explicit `1/(s-1)` term in the
//! Euler-Maclaurin formula keeps evaluation stable arbitrarily close to
//! the pole.

use num_complex::Complex64;

use crate::arith::QuadraticCharacter;

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const BERNOULLI_2J: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

/// Hurwitz zeta `zeta(s, a) = sum_{n >= 0} (n + a)^{-s}` for `a > 0`,
/// continued to `Re s > -1`, `s != 1`, by Euler-Maclaurin. The simple pole
/// at `s = 1` is carried by the explicit `(M + a)^{1-s}/(s - 1)` term, so
/// values at `s = 1 + 1e-k` are accurate.
pub fn hurwitz_zeta(s: Complex64, a: f64) -> Complex64 {
    assert!(a > 0.0);
    let m = 24usize;
    let mut sum = Complex64::new(0.0, 0.0);
    for n in 0..m {
        sum += (Complex64::new(n as f64 + a, 0.0)).powc(-s);
    }
    let ma = Complex64::new(m as f64 + a, 0.0);
    sum += ma.powc(Complex64::new(1.0, 0.0) - s) / (s - 1.0);
    sum += 0.5 * ma.powc(-s);
    // Bernoulli corrections: B_{2j}/(2j)! * (s)_{2j-1} * (M+a)^{-s-2j+1}
    let mut poch = s; // (s)_1
    let mut fact = 1.0f64; // (2j)!
    for (j, b2j) in BERNOULLI_2J.iter().enumerate() {
        let tj = 2 * (j + 1);
        fact *= ((tj - 1) * tj) as f64;
        if j > 0 {
            let k = (tj - 2) as f64;
            poch *= (s + k - 1.0) * (s + k);
        }
        sum += b2j / fact * poch * ma.powc(-s - (tj as f64 - 1.0));
    }
    sum
}

/// Riemann zeta away from `s = 1` (and stably beside the pole).
pub fn riemann_zeta(s: Complex64) -> Complex64 {
    hurwitz_zeta(s, 1.0)
}

/// Digamma function for positive real argument.
pub fn digamma(mut x: f64) -> f64 {
    assert!(x > 0.0);
    let mut acc = 0.0;
    while x < 12.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // asymptotic series
    acc + x.ln() - 0.5 * inv
        - inv2
            * (1.0 / 12.0
                - inv2
                    * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 / 132.0))))
}

/// Dirichlet L-function of the quadratic character of discriminant `D`,
/// via `L(s, chi) = |D|^{-s} sum_r chi(r) zeta(s, r/|D|)`. At `s = 1` the
/// Hurwitz poles cancel (`sum chi(r) = 0`) and the digamma formula is used.
pub fn dirichlet_l(s: Complex64, kappa: &QuadraticCharacter) -> Complex64 {
    assert!(!kappa.is_trivial(), "use riemann_zeta for the trivial character");
    let d = kappa.discriminant().unsigned_abs();
    if (s - Complex64::new(1.0, 0.0)).norm() < 1e-9 {
        // L(1, chi) = -(1/|D|) sum_r chi(r) psi(r/|D|)
        let mut sum = 0.0;
        for r in 1..d {
            let c = kappa.kron(r as i64);
            if c != 0 {
                sum += c as f64 * digamma(r as f64 / d as f64);
            }
        }
        return Complex64::new(-sum / d as f64, 0.0);
    }
    let mut sum = Complex64::new(0.0, 0.0);
    for r in 1..d {
        let c = kappa.kron(r as i64);
        if c != 0 {
            sum += c as f64 * hurwitz_zeta(s, r as f64 / d as f64);
        }
    }
    Complex64::new(d as f64, 0.0).powc(-s) * sum
}
