//! Adaptive Gauss-Kronrod quadrature for the archimedean integrals.
//!
//! All archimedean integrands in this crate are piecewise smooth with
//! support bounds known in advance, so a 7-15 point Gauss-Kronrod pair with
//! interval bisection is enough. The piecewise-constant truncation weights
//! are integrated separately by locating their jumps (see
//! [`crate::heights::psi_t_weight_quadrature`]).

/// 7-point Gauss / 15-point Kronrod nodes and weights on [-1, 1].
const XGK: [f64; 15] = [
    -0.991455371120813,
    -0.949107912342759,
    -0.864864423359769,
    -0.741531185599394,
    -0.586087235467691,
    -0.405845151377397,
    -0.207784955007898,
    0.0,
    0.207784955007898,
    0.405845151377397,
    0.586087235467691,
    0.741531185599394,
    0.864864423359769,
    0.949107912342759,
    0.991455371120813,
];

const WGK: [f64; 15] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
    0.204432940075298,
    0.190350578064785,
    0.169004726639267,
    0.140653259715525,
    0.104790010322250,
    0.063092092629979,
    0.022935322010529,
];

const WG: [f64; 7] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
    0.381830050505119,
    0.279705391489277,
    0.129484966168870,
];

fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kronrod = 0.0;
    let mut gauss = 0.0;
    for (i, (&x, &wk)) in XGK.iter().zip(WGK.iter()).enumerate() {
        let v = f(c + h * x);
        kronrod += wk * v;
        if i % 2 == 1 {
            gauss += WG[i / 2] * v;
        }
    }
    (kronrod * h, (kronrod - gauss).abs() * h)
}

/// Adaptive integration of `f` over `[a, b]` to the given absolute
/// tolerance. Returns `(value, error_estimate)`.
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    if a == b {
        return (0.0, 0.0);
    }
    struct Seg {
        a: f64,
        b: f64,
        val: f64,
        err: f64,
    }
    let (val, err) = gk15(&mut f, a, b);
    let mut segs = vec![Seg { a, b, val, err }];
    let mut total_err: f64 = err;
    let max_segs = 4000;
    while total_err > tol && segs.len() < max_segs {
        // split the worst segment
        let (idx, _) = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.partial_cmp(&y.1.err).unwrap())
            .unwrap();
        let seg = segs.swap_remove(idx);
        if seg.b - seg.a < 1e-14 * (b - a).abs() {
            // refuse to split further; keep the segment
            segs.push(seg);
            break;
        }
        let m = 0.5 * (seg.a + seg.b);
        let (v1, e1) = gk15(&mut f, seg.a, m);
        let (v2, e2) = gk15(&mut f, m, seg.b);
        total_err = total_err - seg.err + e1 + e2;
        segs.push(Seg { a: seg.a, b: m, val: v1, err: e1 });
        segs.push(Seg { a: m, b: seg.b, val: v2, err: e2 });
    }
    let value = segs.iter().map(|s| s.val).sum();
    let err = segs.iter().map(|s| s.err).sum();
    (value, err)
}

/// Convenience wrapper returning the value only.
pub fn integrate_val(f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    integrate(f, a, b, tol).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomials_and_gaussians() {
        let (v, e) = integrate(|x| x * x, 0.0, 1.0, 1e-12);
        assert!((v - 1.0 / 3.0).abs() < 1e-12, "err est {e}");
        let (v, _) = integrate(|x| (-PI * x * x).exp(), -6.0, 6.0, 1e-12);
        assert!((v - 1.0).abs() < 1e-11);
    }

    #[test]
    fn kink_is_handled_adaptively() {
        let (v, _) = integrate(|x| x.abs(), -1.0, 1.0, 1e-10);
        assert!((v - 1.0).abs() < 1e-9);
    }
}
