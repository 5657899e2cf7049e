//! Polyhedral cone combinatorics in ambient dimension at most two, and the
//! truncation indicator functions built from them.
//!
//! Cones are stored by rational generators; dual generators are computed
//! once and cached, so membership, relative interior, and face enumeration
//! are all exact rational tests. The indicator functions `tau`, `tau-hat`,
//! `sigma`, and `Gamma` are evaluated from their general defining sums over
//! the face lattice, not from rank-one closed forms; the closed forms serve
//! as the test oracle.

use num::{Signed, Zero};

use crate::arith::{rat_i, Rat};
use crate::{Error, Result};

/// A rational vector in dimension 1 or 2.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RVec(pub Vec<Rat>);

impl RVec {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn dot(&self, o: &RVec) -> Rat {
        assert_eq!(self.dim(), o.dim());
        self.0
            .iter()
            .zip(&o.0)
            .map(|(a, b)| a * b)
            .fold(Rat::zero(), |acc, t| acc + t)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|c| c.is_zero())
    }

    pub fn neg(&self) -> RVec {
        RVec(self.0.iter().map(|c| -c.clone()).collect())
    }

    fn sub(&self, o: &RVec) -> RVec {
        RVec(self.0.iter().zip(&o.0).map(|(a, b)| a - b).collect())
    }

    /// Primitive representative of the ray through the vector.
    fn primitive(&self) -> RVec {
        assert!(!self.is_zero());
        // Scale so entries are coprime integers with a canonical sign.
        let mut den = num::BigInt::from(1);
        for c in &self.0 {
            den = num::Integer::lcm(&den, c.denom());
        }
        let ints: Vec<num::BigInt> = self.0.iter().map(|c| (c * Rat::from_integer(den.clone())).to_integer()).collect();
        let mut g = num::BigInt::from(0);
        for n in &ints {
            g = num::Integer::gcd(&g, n);
        }
        RVec(ints.iter().map(|n| Rat::from_integer(n / &g)).collect())
    }

    fn rot90(&self) -> RVec {
        assert_eq!(self.dim(), 2);
        RVec(vec![-self.0[1].clone(), self.0[0].clone()])
    }
}

pub fn rvec1(x: Rat) -> RVec {
    RVec(vec![x])
}

pub fn rvec2(x: Rat, y: Rat) -> RVec {
    RVec(vec![x, y])
}

/// A closed convex polyhedral cone, with cached dual generators.
#[derive(Clone, Debug)]
pub struct Cone {
    dim: usize,
    gens: Vec<RVec>,
    dual_gens: Vec<RVec>,
}

fn dedup_primitive(vs: Vec<RVec>) -> Vec<RVec> {
    let mut out: Vec<RVec> = Vec::new();
    for v in vs {
        if v.is_zero() {
            continue;
        }
        let p = v.primitive();
        if !out.contains(&p) {
            out.push(p);
        }
    }
    out
}

/// Generators of the dual cone `{x : <g, x> >= 0 for all g}`.
fn dual_generators(dim: usize, gens: &[RVec]) -> Vec<RVec> {
    match dim {
        1 => {
            let has_pos = gens.iter().any(|g| g.0[0].is_positive());
            let has_neg = gens.iter().any(|g| g.0[0].is_negative());
            match (has_pos, has_neg) {
                (false, false) => vec![rvec1(rat_i(1)), rvec1(rat_i(-1))],
                (true, false) => vec![rvec1(rat_i(1))],
                (false, true) => vec![rvec1(rat_i(-1))],
                (true, true) => vec![],
            }
        }
        2 => {
            if gens.is_empty() {
                return vec![
                    rvec2(rat_i(1), rat_i(0)),
                    rvec2(rat_i(-1), rat_i(0)),
                    rvec2(rat_i(0), rat_i(1)),
                    rvec2(rat_i(0), rat_i(-1)),
                ];
            }
            // Candidate extreme rays of the dual: boundary directions of each
            // halfspace, plus each generator itself (covers the halfplane
            // case, where the boundary rays alone span only the edge line).
            let mut cands = Vec::new();
            for g in gens {
                cands.push(g.rot90());
                cands.push(g.rot90().neg());
                cands.push(g.clone());
            }
            let kept = cands
                .into_iter()
                .filter(|d| gens.iter().all(|g| !g.dot(d).is_negative()))
                .collect();
            dedup_primitive(kept)
        }
        _ => panic!("only ambient dimension 1 or 2 supported"),
    }
}

impl Cone {
    /// Cone generated by the given vectors in the given ambient dimension.
    pub fn from_generators(dim: usize, gens: Vec<RVec>) -> Self {
        assert!(dim == 1 || dim == 2, "only ambient dimension 1 or 2");
        for g in &gens {
            assert_eq!(g.dim(), dim, "generator dimension mismatch");
        }
        let gens = dedup_primitive(gens);
        let dual = dual_generators(dim, &gens);
        // Canonicalize: regenerate from the double dual so equal cones have
        // interchangeable generator sets regardless of input redundancy.
        let gens = dedup_primitive(dual_generators(dim, &dual));
        let dual_gens = dual_generators(dim, &gens);
        Cone { dim, gens, dual_gens }
    }

    pub fn zero(dim: usize) -> Self {
        Cone::from_generators(dim, vec![])
    }

    pub fn full_line() -> Self {
        Cone::from_generators(1, vec![rvec1(rat_i(1)), rvec1(rat_i(-1))])
    }

    pub fn half_line_nonneg() -> Self {
        Cone::from_generators(1, vec![rvec1(rat_i(1))])
    }

    pub fn ambient_dim(&self) -> usize {
        self.dim
    }

    pub fn generators(&self) -> &[RVec] {
        &self.gens
    }

    /// Dimension of the linear span.
    pub fn span_dim(&self) -> usize {
        if self.gens.is_empty() {
            return 0;
        }
        if self.dim == 1 {
            return 1;
        }
        let b = &self.gens[0];
        for g in &self.gens[1..] {
            // rank 2 iff some generator is not parallel to the first
            if !(&b.0[0] * &g.0[1] - &b.0[1] * &g.0[0]).is_zero() {
                return 2;
            }
        }
        1
    }

    fn span_basis(&self) -> Vec<RVec> {
        match self.span_dim() {
            0 => vec![],
            1 => vec![self.gens[0].clone()],
            _ => self.gens[..].to_vec(),
        }
    }

    pub fn contains(&self, x: &RVec) -> bool {
        assert_eq!(x.dim(), self.dim);
        self.dual_gens.iter().all(|d| !d.dot(x).is_negative())
    }

    /// Membership in the relative interior. `rint {0} = {0}`.
    pub fn contains_rint(&self, x: &RVec) -> bool {
        if !self.contains(x) {
            return false;
        }
        let basis = self.span_basis();
        for d in &self.dual_gens {
            let trivial_on_span = basis.iter().all(|b| d.dot(b).is_zero());
            if !trivial_on_span && !d.dot(x).is_positive() {
                return false;
            }
        }
        true
    }

    pub fn dual(&self) -> Cone {
        Cone::from_generators(self.dim, self.dual_gens.clone())
    }

    /// Set equality via double inclusion of generators.
    pub fn same_as(&self, o: &Cone) -> bool {
        self.dim == o.dim
            && self.gens.iter().all(|g| o.contains(g))
            && o.gens.iter().all(|g| self.contains(g))
    }

    /// All faces, including the cone itself and the minimal face (the
    /// lineality space; `{0}` exactly when the cone is pointed).
    pub fn faces(&self) -> Vec<Cone> {
        let mut faces: Vec<Cone> = vec![self.clone()];
        let n = self.dual_gens.len();
        for mask in 1..(1u32 << n.min(16)) {
            let sel: Vec<&RVec> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| &self.dual_gens[i]).collect();
            let sub: Vec<RVec> = self
                .gens
                .iter()
                .filter(|g| sel.iter().all(|d| d.dot(g).is_zero()))
                .cloned()
                .collect();
            let f = Cone::from_generators(self.dim, sub);
            if !faces.iter().any(|known| known.same_as(&f)) {
                faces.push(f);
            }
        }
        faces
    }

    /// The minimal face (lineality space).
    pub fn minimal_face(&self) -> Cone {
        self.faces()
            .into_iter()
            .min_by_key(|f| f.span_dim())
            .expect("a cone has at least one face")
    }

    pub fn is_face_of(&self, c: &Cone) -> bool {
        c.faces().iter().any(|f| f.same_as(self))
    }
}

/// Angle cone `A(F, C) = span(F) + C`; errors unless `F` is a face of `C`.
pub fn angle_cone(f: &Cone, c: &Cone) -> Result<Cone> {
    if !f.is_face_of(c) {
        return Err(Error::Domain("angle cone: F is not a face of C".into()));
    }
    let mut gens = c.gens.clone();
    for b in f.span_basis() {
        gens.push(b.neg());
        gens.push(b);
    }
    Ok(Cone::from_generators(c.dim, gens))
}

pub fn dual_cone(c: &Cone) -> Cone {
    c.dual()
}

/// The general alternating face sum
/// `sigma(F, C)(h) = sum over faces E of F of (-1)^(dim F - dim E)
///  [rint A(E, C)](h) [rint E-dual](h)`.
pub fn sigma_cones(f: &Cone, c: &Cone, h: &RVec) -> Result<i64> {
    if !f.is_face_of(c) {
        return Err(Error::Domain("sigma: F is not a face of C".into()));
    }
    let df = f.span_dim() as i64;
    let mut total = 0i64;
    for e in f.faces() {
        let sign = if (df - e.span_dim() as i64) % 2 == 0 { 1 } else { -1 };
        let a = angle_cone(&e, c)?;
        if a.contains_rint(h) && e.dual().contains_rint(h) {
            total += sign;
        }
    }
    Ok(total)
}

/// The general two-argument alternating face sum
/// `Gamma(C)(h, x) = sum over faces F of C of (-1)^(dim F - dim F0)
///  [rint A(F, C)](h) [rint F-dual](h - x)`, `F0` the minimal face.
pub fn gamma_cones(c: &Cone, h: &RVec, x: &RVec) -> i64 {
    let d0 = c.minimal_face().span_dim() as i64;
    let hx = h.sub(x);
    let mut total = 0i64;
    for f in c.faces() {
        let sign = if (f.span_dim() as i64 - d0) % 2 == 0 { 1 } else { -1 };
        let a = angle_cone(&f, c).expect("face enumeration is consistent");
        if a.contains_rint(h) && f.dual().contains_rint(&hx) {
            total += sign;
        }
    }
    total
}

/// Standard parabolic labels for the rank-one case. Higher-rank face sums
/// are available directly through the [`Cone`] API.
#[derive(Clone, Copy, PartialEq, Eq, Debug, serde::Serialize, serde::Deserialize)]
pub enum ParabolicLabel {
    B,
    G,
}

impl ParabolicLabel {
    pub fn contained_in(&self, q: &ParabolicLabel) -> bool {
        !(matches!(self, ParabolicLabel::G) && matches!(q, ParabolicLabel::B))
    }

    /// Closed positive chamber `cl(a_P^+)` in the one-dimensional `a_0'`.
    pub fn chamber(&self) -> Cone {
        match self {
            ParabolicLabel::B => Cone::half_line_nonneg(),
            ParabolicLabel::G => Cone::zero(1),
        }
    }

    fn check_containment(p: &ParabolicLabel, q: &ParabolicLabel) -> Result<()> {
        if !p.contained_in(q) {
            return Err(Error::Domain(format!("{p:?} is not contained in {q:?}")));
        }
        Ok(())
    }
}

/// A `{0,1}`-valued function on the one-dimensional chamber space.
pub struct IndicatorFn {
    eval: Box<dyn Fn(&Rat) -> i64 + Send + Sync>,
}

impl IndicatorFn {
    pub fn at(&self, h: &Rat) -> i64 {
        (self.eval)(h)
    }
}

/// A `{-1,0,1}`-valued function of two chamber arguments.
pub struct IndicatorDifferenceFn {
    eval: Box<dyn Fn(&Rat, &Rat) -> i64 + Send + Sync>,
}

impl IndicatorDifferenceFn {
    pub fn at(&self, h: &Rat, x: &Rat) -> i64 {
        (self.eval)(h, x)
    }
}

/// `tau_P^Q = [rint A(cl a_Q^+, cl a_P^+)]`.
pub fn tau(p: ParabolicLabel, q: ParabolicLabel) -> Result<IndicatorFn> {
    ParabolicLabel::check_containment(&p, &q)?;
    let a = angle_cone(&q.chamber(), &p.chamber())?;
    Ok(IndicatorFn {
        eval: Box::new(move |h| if a.contains_rint(&rvec1(h.clone())) { 1 } else { 0 }),
    })
}

/// `tau-hat_P^Q = [rint A(cl a_Q^+, cl a_P^+) dual]`.
pub fn tau_hat(p: ParabolicLabel, q: ParabolicLabel) -> Result<IndicatorFn> {
    ParabolicLabel::check_containment(&p, &q)?;
    let a = angle_cone(&q.chamber(), &p.chamber())?.dual();
    Ok(IndicatorFn {
        eval: Box::new(move |h| if a.contains_rint(&rvec1(h.clone())) { 1 } else { 0 }),
    })
}

/// `sigma_P1^P2` from the general face sum.
pub fn sigma(p1: ParabolicLabel, p2: ParabolicLabel) -> Result<IndicatorFn> {
    ParabolicLabel::check_containment(&p1, &p2)?;
    let f = p2.chamber();
    let c = p1.chamber();
    Ok(IndicatorFn {
        eval: Box::new(move |h| {
            sigma_cones(&f, &c, &rvec1(h.clone())).expect("containment checked")
        }),
    })
}

/// `Gamma_P^Q(h, x)` from the general face sum.
pub fn gamma(p: ParabolicLabel, q: ParabolicLabel) -> Result<IndicatorDifferenceFn> {
    ParabolicLabel::check_containment(&p, &q)?;
    let a = angle_cone(&q.chamber(), &p.chamber())?;
    Ok(IndicatorDifferenceFn {
        eval: Box::new(move |h, x| gamma_cones(&a, &rvec1(h.clone()), &rvec1(x.clone()))),
    })
}

/// `epsilon_P^Q = (-1)^(dim a_P^Q)`.
pub fn epsilon(p: ParabolicLabel, q: ParabolicLabel) -> Result<i64> {
    ParabolicLabel::check_containment(&p, &q)?;
    let d = p.chamber().span_dim() as i64 - q.chamber().span_dim() as i64;
    Ok(if d % 2 == 0 { 1 } else { -1 })
}

/// Chamber projection `H_P` of a scalar coordinate: identity for `B`
/// (where `a_B` is the whole line), zero for `G`.
pub fn project_down(p: ParabolicLabel, h: &Rat) -> Rat {
    match p {
        ParabolicLabel::B => h.clone(),
        ParabolicLabel::G => Rat::zero(),
    }
}

/// Complementary projection `H^P`.
pub fn project_up(p: ParabolicLabel, h: &Rat) -> Rat {
    match p {
        ParabolicLabel::B => Rat::zero(),
        ParabolicLabel::G => h.clone(),
    }
}

pub const ALL_LABELS: [ParabolicLabel; 2] = [ParabolicLabel::B, ParabolicLabel::G];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::rat;
    use ParabolicLabel::{B, G};

    fn grid() -> Vec<Rat> {
        // 10^3 rational grid points in [-5, 5]
        (0..1000).map(|i| rat(-5 * 100 + i, 100)).collect()
    }

    #[test]
    fn angle_cone_examples() {
        let zero = Cone::zero(1);
        let ray = Cone::half_line_nonneg();
        assert!(angle_cone(&zero, &ray).unwrap().same_as(&ray));
        assert!(angle_cone(&ray, &ray).unwrap().same_as(&Cone::full_line()));
        assert!(angle_cone(&zero, &zero).unwrap().same_as(&zero));
        // F must be a face of C
        assert!(angle_cone(&ray, &zero).is_err());
    }

    #[test]
    fn dual_examples() {
        assert!(Cone::zero(1).dual().same_as(&Cone::full_line()));
        let ray = Cone::half_line_nonneg();
        assert!(ray.dual().same_as(&ray));
        assert!(Cone::full_line().dual().same_as(&Cone::zero(1)));
    }

    #[test]
    fn rint_examples() {
        let zero = Cone::zero(1);
        assert!(zero.contains_rint(&rvec1(rat_i(0))));
        let ray = Cone::half_line_nonneg();
        assert!(!ray.contains_rint(&rvec1(rat_i(0))));
        assert!(ray.contains_rint(&rvec1(rat_i(1))));
    }

    #[test]
    fn face_lattices() {
        let ray = Cone::half_line_nonneg();
        assert_eq!(ray.faces().len(), 2);
        assert!(Cone::zero(1).is_face_of(&ray));
        // a line has no proper faces
        assert_eq!(Cone::full_line().faces().len(), 1);
        // first quadrant: itself, two edge rays, origin
        let quad = Cone::from_generators(
            2,
            vec![rvec2(rat_i(1), rat_i(0)), rvec2(rat_i(0), rat_i(1))],
        );
        assert_eq!(quad.faces().len(), 4);
        // halfplane: itself and its boundary line
        let half = Cone::from_generators(
            2,
            vec![
                rvec2(rat_i(1), rat_i(0)),
                rvec2(rat_i(-1), rat_i(0)),
                rvec2(rat_i(0), rat_i(1)),
            ],
        );
        assert_eq!(half.faces().len(), 2);
        assert_eq!(half.minimal_face().span_dim(), 1);
    }

    #[test]
    fn two_dimensional_duals() {
        let quad = Cone::from_generators(
            2,
            vec![rvec2(rat_i(1), rat_i(0)), rvec2(rat_i(0), rat_i(1))],
        );
        assert!(quad.dual().same_as(&quad));
        let ray = Cone::from_generators(2, vec![rvec2(rat_i(1), rat_i(0))]);
        let half_up = Cone::from_generators(
            2,
            vec![
                rvec2(rat_i(0), rat_i(1)),
                rvec2(rat_i(0), rat_i(-1)),
                rvec2(rat_i(1), rat_i(0)),
            ],
        );
        // dual of the x-ray is the right halfplane
        let expect = Cone::from_generators(
            2,
            vec![
                rvec2(rat_i(1), rat_i(0)),
                rvec2(rat_i(0), rat_i(1)),
                rvec2(rat_i(0), rat_i(-1)),
            ],
        );
        assert!(ray.dual().same_as(&expect));
        assert!(half_up.dual().dual().same_as(&half_up));
        assert!(Cone::zero(2).dual().same_as(&Cone::from_generators(
            2,
            vec![
                rvec2(rat_i(1), rat_i(0)),
                rvec2(rat_i(-1), rat_i(0)),
                rvec2(rat_i(0), rat_i(1)),
                rvec2(rat_i(0), rat_i(-1)),
            ]
        )));
    }

    #[test]
    fn generic_sums_in_two_dimensions() {
        // the defining sums run over arbitrary face lattices; exercise a
        // two-dimensional chamber (first quadrant) with its edge face
        let quad = Cone::from_generators(
            2,
            vec![rvec2(rat_i(1), rat_i(0)), rvec2(rat_i(0), rat_i(1))],
        );
        let edge = Cone::from_generators(2, vec![rvec2(rat_i(1), rat_i(0))]);
        // sigma(edge, quad) at points on either side of the edge span
        let inside = rvec2(rat_i(2), rat_i(1));
        let on_edge = rvec2(rat_i(2), rat_i(0));
        let s_in = sigma_cones(&edge, &quad, &inside).unwrap();
        let s_on = sigma_cones(&edge, &quad, &on_edge).unwrap();
        assert!(s_in == 0 || s_in == 1);
        assert!(s_on == 0 || s_on == 1);
        // Gamma telescopes: it vanishes at X = 0 and cuts out the box
        // between the chamber and its X-shift for deep X
        let h = rvec2(rat_i(1), rat_i(1));
        assert_eq!(gamma_cones(&quad, &h, &rvec2(rat_i(0), rat_i(0))), 0);
        assert_eq!(gamma_cones(&quad, &h, &rvec2(rat_i(3), rat_i(3))), 1);
        // outside the chamber the box indicator is zero
        let h_out = rvec2(rat_i(-1), rat_i(1));
        assert_eq!(gamma_cones(&quad, &h_out, &rvec2(rat_i(3), rat_i(3))), 0);
        // errors: sigma requires a face
        let off = Cone::from_generators(2, vec![rvec2(rat_i(1), rat_i(1))]);
        assert!(sigma_cones(&off, &quad, &inside).is_err());
    }

    #[test]
    fn tau_hat_closed_forms_on_grid() {
        let thg = tau_hat(G, G).unwrap();
        let thb = tau_hat(B, B).unwrap();
        let thbg = tau_hat(B, G).unwrap();
        for h in grid() {
            assert_eq!(thg.at(&h), 1, "tau-hat_G^G != [R] at {h}");
            assert_eq!(thb.at(&h), i64::from(h.is_zero()), "tau-hat_B^B != [0] at {h}");
            assert_eq!(thbg.at(&h), i64::from(h.is_positive()), "tau-hat_B^G != [R>0] at {h}");
        }
        assert!(tau_hat(G, B).is_err());
    }

    #[test]
    fn sigma_closed_forms_on_grid() {
        let sgg = sigma(G, G).unwrap();
        let sbb = sigma(B, B).unwrap();
        let sbg = sigma(B, G).unwrap();
        for h in grid() {
            assert_eq!(sgg.at(&h), i64::from(h.is_zero()));
            assert_eq!(sbb.at(&h), 0);
            assert_eq!(sbg.at(&h), i64::from(h.is_positive()));
        }
    }

    #[test]
    fn gamma_closed_forms_on_grid() {
        let ggg = gamma(G, G).unwrap();
        let gbb = gamma(B, B).unwrap();
        let gbg = gamma(B, G).unwrap();
        let xs: Vec<Rat> = (-3..4).map(rat_i).collect();
        for h in grid().into_iter().step_by(31) {
            for x in &xs {
                assert_eq!(ggg.at(&h, x), i64::from(h.is_zero()));
                assert_eq!(gbb.at(&h, x), i64::from((&h - x).is_zero()));
                let expect = i64::from(h.is_positive()) - i64::from((&h - x).is_positive());
                assert_eq!(gbg.at(&h, x), expect, "Gamma_B^G at ({h}, {x})");
            }
        }
        // spot values
        assert_eq!(gbg.at(&rat(1, 2), &rat_i(1)), 1);
        assert_eq!(gbg.at(&rat(3, 2), &rat_i(1)), 0);
        assert_eq!(ggg.at(&rat_i(0), &rat_i(7)), 1);
    }

    #[test]
    fn epsilon_signs() {
        assert_eq!(epsilon(G, G).unwrap(), 1);
        assert_eq!(epsilon(B, G).unwrap(), -1);
        assert_eq!(epsilon(B, B).unwrap(), 1);
    }

    #[test]
    fn contraction_relation_on_grid() {
        // tau_P1^P * tau-hat_P = sum over P2 containing P of sigma_P1^P2
        for p1 in ALL_LABELS {
            for p in ALL_LABELS {
                if !p1.contained_in(&p) {
                    continue;
                }
                let t = tau(p1, p).unwrap();
                let th = tau_hat(p, G).unwrap();
                for h in grid() {
                    let lhs = t.at(&h) * th.at(&h);
                    let mut rhs = 0;
                    for p2 in ALL_LABELS {
                        if p.contained_in(&p2) {
                            rhs += sigma(p1, p2).unwrap().at(&h);
                        }
                    }
                    assert_eq!(lhs, rhs, "contraction fails at {h} for {p1:?} in {p:?}");
                }
            }
        }
    }

    #[test]
    fn absorption_lemma_on_grid() {
        // tau-hat_B(H - X) = sum over B <= R <= G of
        //   eps_R^G tau-hat_B^R(H^R) Gamma_R^G(H_R, X_R)
        let th = tau_hat(B, G).unwrap();
        let hs: Vec<Rat> = (0..40).map(|i| rat(i - 20, 4)).collect();
        for h in &hs {
            for x in &hs {
                let lhs = th.at(&(h - x));
                let mut rhs = 0;
                for r in ALL_LABELS {
                    let e = epsilon(r, G).unwrap();
                    let t = tau_hat(B, r).unwrap().at(&project_up(r, h));
                    let g = gamma(r, G)
                        .unwrap()
                        .at(&project_down(r, h), &project_down(r, x));
                    rhs += e * t * g;
                }
                assert_eq!(lhs, rhs, "absorption fails at ({h}, {x})");
            }
        }
    }
}
