//! Factorizable test functions on `X(A)`.
//!
//! A global test function is basic (the indicator of the coordinate-integral
//! points `X(Z_p)`) outside a finite set of primes, carries explicit
//! locally-constant ball data at the ramified primes, and a smooth bump at
//! the real place drawn from a closed parametric family so support and
//! decay bounds are known in advance.

use std::collections::BTreeMap;

use num::Zero;

use crate::arith::{rat_to_f64, val_p, QuadAlg, Rat};
use crate::heights::AdelicPoint;
use crate::mat::Mat2;
use crate::symspace::XPoint;
use crate::{Error, Result};

/// A locally constant ball `center + p^level (Z_p)^4` with a value.
#[derive(Clone, Debug)]
pub struct Ball {
    /// Center with p-integral coordinates.
    pub center: XPoint<Rat>,
    pub value: Rat,
}

/// Local data at one finite place.
#[derive(Clone, Debug)]
pub enum FinitePlaceFn {
    /// Indicator of the coordinate-integral points.
    Basic,
    /// Locally constant of the given level: a finite list of disjoint
    /// coordinate balls `center + p^level` with values.
    Level { level: u32, balls: Vec<Ball> },
}

impl FinitePlaceFn {
    /// Evaluate at a point with rational coordinates.
    pub fn eval(&self, p: u64, x: &XPoint<Rat>) -> Rat {
        match self {
            FinitePlaceFn::Basic => {
                if x.is_integral_at(p) {
                    Rat::from_integer(1.into())
                } else {
                    Rat::zero()
                }
            }
            FinitePlaceFn::Level { level, balls } => {
                for ball in balls {
                    if coords_close(x, &ball.center, p, *level as i64) {
                        return ball.value.clone();
                    }
                }
                Rat::zero()
            }
        }
    }

    pub fn level(&self) -> u32 {
        match self {
            FinitePlaceFn::Basic => 0,
            FinitePlaceFn::Level { level, .. } => *level,
        }
    }

    /// Validate ball centers: integral coordinates, pairwise disjoint, on X.
    pub fn validate(&self, p: u64) -> Result<()> {
        if let FinitePlaceFn::Level { level, balls } = self {
            for (i, b) in balls.iter().enumerate() {
                if !b.center.is_integral_at(p) {
                    return Err(Error::Config(format!(
                        "ball center {i} at p={p} has non-integral coordinates"
                    )));
                }
                for other in &balls[i + 1..] {
                    if coords_close(&b.center, &other.center, p, *level as i64) {
                        return Err(Error::Config(format!("overlapping balls at p={p}")));
                    }
                }
            }
        }
        Ok(())
    }
}

fn coords_close(x: &XPoint<Rat>, y: &XPoint<Rat>, p: u64, level: i64) -> bool {
    for (a, b) in [(&x.t, &y.t), (&x.y, &y.y), (&x.b, &y.b), (&x.c, &y.c)] {
        let d = a - b;
        if !d.is_zero() && val_p(&d, p) < level {
            return false;
        }
    }
    true
}

/// Archimedean bump profiles with certified support/decay.
#[derive(Clone, Copy, PartialEq, Eq, Debug, serde::Serialize, serde::Deserialize)]
pub enum Profile {
    /// `exp(1 - 1/(1 - r^2))` inside the unit ball of the scaled coordinate
    /// distance, 0 outside: compactly supported and smooth.
    Bump,
    /// `exp(-pi r^2)`: Schwartz, with effective support tracked explicitly.
    Gauss,
}

/// The archimedean factor of a test function.
#[derive(Clone, Debug)]
pub struct ArchFn {
    pub profile: Profile,
    pub center: XPoint<f64>,
    pub radius: f64,
    pub amplitude: f64,
}

impl ArchFn {
    pub fn eval(&self, x: &XPoint<f64>) -> f64 {
        let r = x.coord_dist(&self.center) / self.radius;
        match self.profile {
            Profile::Bump => {
                if r * r >= 1.0 {
                    0.0
                } else {
                    self.amplitude * (1.0 - 1.0 / (1.0 - r * r)).exp()
                }
            }
            Profile::Gauss => self.amplitude * (-std::f64::consts::PI * r * r).exp(),
        }
    }

    /// Radius in coordinate distance beyond which the function is below
    /// `tail`: exact for `Bump`, a Gaussian bound for `Gauss`.
    pub fn support_radius(&self, tail: f64) -> f64 {
        match self.profile {
            Profile::Bump => self.radius,
            Profile::Gauss => {
                let a = (self.amplitude.abs() / tail).max(1.0);
                self.radius * (a.ln() / std::f64::consts::PI).sqrt().max(1.0)
            }
        }
    }

    /// Bound on the Euclidean norm of coordinate vectors in the support.
    pub fn coord_bound(&self, tail: f64) -> f64 {
        let c = &self.center;
        let cn = (c.t * c.t + c.y * c.y + c.b * c.b + c.c * c.c).sqrt();
        cn + self.support_radius(tail)
    }
}

/// A factorizable compactly supported function on `X(A)`.
#[derive(Clone, Debug)]
pub struct GlobalTestFn {
    pub e: QuadAlg,
    /// Non-basic finite places only.
    pub finite: BTreeMap<u64, FinitePlaceFn>,
    pub arch: ArchFn,
}

impl GlobalTestFn {
    pub fn new(e: QuadAlg, finite: BTreeMap<u64, FinitePlaceFn>, arch: ArchFn) -> Result<Self> {
        for (p, f) in &finite {
            f.validate(*p)?;
        }
        if arch.center.tau != e.core() {
            return Err(Error::Config("archimedean center has the wrong tau".into()));
        }
        Ok(GlobalTestFn { e, finite, arch })
    }

    pub fn tau(&self) -> i64 {
        self.e.core()
    }

    /// Ramified place set `S(f)`.
    pub fn ramified_places(&self) -> Vec<u64> {
        self.finite.keys().copied().collect()
    }

    pub fn local(&self, p: u64) -> FinitePlaceFn {
        self.finite.get(&p).cloned().unwrap_or(FinitePlaceFn::Basic)
    }

    /// Value at a rational point of `X` (trivial conjugator).
    pub fn eval_rational(&self, x: &XPoint<Rat>) -> f64 {
        self.eval_conjugated(x, &AdelicPoint::identity())
    }

    /// Value `f(g^{-1} eta g)` for a rational point `eta` and an adelic
    /// conjugator `g`.
    pub fn eval_conjugated(&self, eta: &XPoint<Rat>, g: &AdelicPoint) -> f64 {
        // finite part: explicit places are S(f), the support of g, and the
        // denominator primes of eta; everywhere else the value is 1 iff the
        // coordinates are integral, which the denominator list certifies.
        let mut value = 1.0;
        let mut places = self.ramified_places();
        places.extend(g.finite.keys().copied());
        for p in eta.denominator_primes() {
            places.push(p);
        }
        places.sort_unstable();
        places.dedup();
        for p in places {
            let local = self.local(p);
            let x = match g.finite.get(&p) {
                Some(gp) => {
                    let gi = gp.inv().expect("adelic component invertible");
                    eta.conj_by(&gi)
                }
                None => eta.clone(),
            };
            let v = local.eval(p, &x);
            if v.is_zero() {
                return 0.0;
            }
            value *= rat_to_f64(&v);
        }
        // archimedean part
        let gr = g.real_part();
        let gri = gr.inv().expect("real component invertible");
        let xr = eta.to_f64().conj_by(&gri);
        value * self.arch.eval(&xr)
    }

    /// Value at the identity (resp. minus identity) of `X`.
    pub fn eval_center(&self, sign: i64) -> f64 {
        let eta = if sign >= 0 {
            XPoint::identity(self.tau())
        } else {
            XPoint::minus_identity(self.tau())
        };
        self.eval_rational(&eta)
    }

    /// Scale the function by a rational constant (scales every local value
    /// at one chosen finite place, or the amplitude when none exists).
    pub fn scaled(&self, c: f64) -> GlobalTestFn {
        let mut out = self.clone();
        out.arch.amplitude *= c;
        out
    }

    /// Strict height data for enumerating rational points in the support:
    /// a common denominator `D` such that every support point has
    /// coordinates in `(1/D) Z[1/S]`, and a real coordinate-norm bound.
    pub fn support_denominator(&self) -> num::BigInt {
        let mut d = num::BigInt::from(1);
        for (p, f) in &self.finite {
            d *= num::BigInt::from(*p).pow(f.level());
        }
        d
    }
}

/// Value of `f` at an `AdelicPoint`-conjugated point, as a convenience for
/// kernel evaluation: `f(g^{-1} eta g)`.
pub fn eval_conj(f: &GlobalTestFn, eta: &XPoint<Rat>, g: &AdelicPoint) -> f64 {
    f.eval_conjugated(eta, g)
}

/// Real conjugation helper for archimedean evaluation of a real matrix
/// argument.
pub fn arch_value_conj(f: &ArchFn, x: &XPoint<f64>, g: &Mat2<f64>) -> f64 {
    let gi = g.inv().expect("invertible");
    f.eval(&x.conj_by(&gi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{rat, rat_i};
    use crate::mat::torus_diag;

    fn basic_gauss(tau: i64) -> GlobalTestFn {
        GlobalTestFn::new(
            QuadAlg::new(tau).unwrap(),
            BTreeMap::new(),
            ArchFn {
                profile: Profile::Gauss,
                center: XPoint::<f64>::identity(tau),
                radius: 2.0,
                amplitude: 1.0,
            },
        )
        .unwrap()
    }

    #[test]
    fn basic_evaluation() {
        let f = basic_gauss(-1);
        let id = XPoint::identity(-1);
        assert!((f.eval_rational(&id) - 1.0).abs() < 1e-12);
        assert!((f.eval_center(1) - 1.0).abs() < 1e-12);
        // non-integral point vanishes at a basic place
        let x = XPoint::new(-1, rat(3, 5), rat(4, 5), rat_i(0), rat_i(0)).unwrap();
        assert_eq!(f.eval_rational(&x), 0.0);
    }

    #[test]
    fn conjugated_evaluation_moves_support() {
        let f = basic_gauss(-1);
        let eta = XPoint::new(-1, rat_i(0), rat_i(1), rat_i(0), rat_i(0)).unwrap();
        let v0 = f.eval_rational(&eta);
        assert!(v0 > 0.0);
        // conjugating by diag(3, 1/3) at p = 3 keeps integrality here
        let g = AdelicPoint::with_finite(3, torus_diag(rat_i(3)));
        let v1 = f.eval_conjugated(&eta, &g);
        assert!((v0 - v1).abs() < 1e-12);
        // but moves a point with off-diagonal entries out of X(Z_3)
        let eta2 = XPoint::new(-1, rat_i(0), rat_i(1), rat_i(1), rat_i(0)).unwrap();
        assert!(f.eval_rational(&eta2) > 0.0);
        assert_eq!(f.eval_conjugated(&eta2, &g), 0.0);
    }

    #[test]
    fn level_data_and_validation() {
        let center = XPoint::identity(-1);
        let ball = Ball { center: center.clone(), value: rat(1, 2) };
        let lf = FinitePlaceFn::Level { level: 1, balls: vec![ball] };
        assert!(lf.validate(3).is_ok());
        assert_eq!(lf.eval(3, &center), rat(1, 2));
        // a point 3-adically close to the identity
        let near = XPoint::new(-1, rat_i(1), rat_i(3), rat_i(3), rat_i(-3)).unwrap();
        // t=1,y=3,b=3,c=-3: t^2 - tau(y^2+bc) = 1 - (-1)(9-9) = 1 ok
        assert_eq!(lf.eval(3, &near), rat(1, 2));
        let far = XPoint::new(-1, rat_i(1), rat_i(1), rat_i(1), rat_i(-1)).unwrap();
        assert_eq!(lf.eval(3, &far), rat_i(0));
        // overlapping balls rejected
        let bad = FinitePlaceFn::Level {
            level: 1,
            balls: vec![
                Ball { center: center.clone(), value: rat_i(1) },
                Ball { center: near, value: rat_i(2) },
            ],
        };
        assert!(bad.validate(3).is_err());
    }
}
