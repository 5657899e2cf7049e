//! Galois symmetric pairs of rank-one tori and their coarse trace formula.
//!
//! A generalized biquadratic extension is the compositum `M = L (x) E` of
//! two quadratic etale algebras; it carries three quadratic subalgebras
//! `E, L, L'` with `L'` the reflection of `L` through `E`. The restriction
//! of scalars of the norm-one torus of `M/E` carries exactly two Galois
//! structures, with fixed tori the norm-one tori of `L` and of `L'`, and
//! the symmetric space of the pair for `L` is the norm-one torus of `L'`.
//!
//! The coarse trace formula for such a pair reduces to Poisson summation
//! on a compact abelian group. Its desk-scale incarnation here replaces
//! adelic quotients with unit groups of `(Z/N)[x]/(x^2 - d)`: the rational
//! subgroup and the `T'`-image are explicit subgroups, and both sides of
//! the identity are finite sums evaluated independently.

use num_complex::Complex64;

use crate::arith::QuadAlg;
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Classification

/// A generalized biquadratic extension, recorded through its three
/// quadratic subalgebras.
#[derive(Clone, Copy, PartialEq, Eq, Debug, serde::Serialize, serde::Deserialize)]
pub struct BiquadraticData {
    pub e: QuadAlg,
    pub l: QuadAlg,
    /// The reflection of `l` through `e`.
    pub lp: QuadAlg,
    /// Whether the compositum is a field or contains idempotents.
    pub m_is_field: bool,
}

impl BiquadraticData {
    pub fn new(e: QuadAlg, l: QuadAlg) -> Self {
        let lp = l.reflect_through(&e);
        let m_is_field = !e.is_split() && !l.is_split() && e != l;
        BiquadraticData { e, l, lp, m_is_field }
    }

    /// `core(E) core(L) core(L')` is always a perfect square.
    pub fn core_product(&self) -> i128 {
        self.e.core() as i128 * self.l.core() as i128 * self.lp.core() as i128
    }
}

/// A Galois symmetric pair of rank-one tori, labeled by the algebras:
/// `(Res_{E/F} Nm^1_{M/E}, Nm^1_{L/F})`.
#[derive(Clone, Copy, PartialEq, Eq, Debug, serde::Serialize, serde::Deserialize)]
pub struct TorusPair {
    pub e: QuadAlg,
    /// The algebra of the fixed torus (`l = split` encodes the split torus
    /// `Gm` itself).
    pub l: QuadAlg,
}

/// The two non-isomorphic Galois structures carried by the restriction of
/// scalars of the norm-one torus of `M/E`.
pub fn classify_structures(m: &BiquadraticData) -> Result<[TorusPair; 2]> {
    if m.e.is_split() {
        return Err(Error::Domain("the base quadratic algebra must be a field".into()));
    }
    Ok([TorusPair { e: m.e, l: m.l }, TorusPair { e: m.e, l: m.lp }])
}

/// The symmetric space of a pair, as the algebra `L'` with
/// `S = Nm^1_{L'/F}`: the reflection of the pair's `L` through `E`.
pub fn symmetric_space_of(pair: &TorusPair) -> QuadAlg {
    pair.l.reflect_through(&pair.e)
}

// ---------------------------------------------------------------------------
// Finite abelian groups with explicit character tables

/// A finite abelian group given by an element list and a multiplication
/// table, with a computed basis (cyclic decomposition) and characters.
#[derive(Clone, Debug)]
pub struct FiniteAbelianGroup {
    /// Multiplication table: `mul[i][j]` is the index of the product.
    pub mul: Vec<Vec<usize>>,
    pub identity: usize,
    /// Cyclic basis: element indices with their orders; every element has
    /// a unique exponent vector in these generators.
    basis: Vec<(usize, u32)>,
    /// Exponent vector of each element in the basis.
    exps: Vec<Vec<u32>>,
}

impl FiniteAbelianGroup {
    pub fn from_mul_table(mul: Vec<Vec<usize>>, identity: usize) -> Self {
        let n = mul.len();
        let basis = abelian_basis(&mul, identity);
        // tabulate exponent vectors by enumerating all exponent tuples
        let mut exps = vec![Vec::new(); n];
        let mut seen = vec![false; n];
        let mut tuples = vec![vec![0u32; 0]];
        for &(_, ord) in &basis {
            let mut next = Vec::with_capacity(tuples.len() * ord as usize);
            for t in &tuples {
                for e in 0..ord {
                    let mut t2 = t.clone();
                    t2.push(e);
                    next.push(t2);
                }
            }
            tuples = next;
        }
        for t in tuples {
            let mut g = identity;
            for (k, &(b, _)) in basis.iter().enumerate() {
                for _ in 0..t[k] {
                    g = mul[g][b];
                }
            }
            if !seen[g] {
                seen[g] = true;
                exps[g] = t;
            }
        }
        assert!(seen.iter().all(|&s| s), "basis does not span the group");
        FiniteAbelianGroup { mul, identity, basis, exps }
    }

    pub fn order(&self) -> usize {
        self.mul.len()
    }

    pub fn basis_orders(&self) -> Vec<u32> {
        self.basis.iter().map(|&(_, o)| o).collect()
    }

    pub fn elem_order(&self, g: usize) -> u32 {
        let mut x = g;
        let mut n = 1;
        while x != self.identity {
            x = self.mul[x][g];
            n += 1;
        }
        n
    }

    /// Subgroup generated by the given elements, as a sorted index list.
    pub fn subgroup(&self, gens: &[usize]) -> Vec<usize> {
        let mut in_sub = vec![false; self.order()];
        in_sub[self.identity] = true;
        let mut frontier = vec![self.identity];
        while let Some(x) = frontier.pop() {
            for &g in gens {
                let y = self.mul[x][g];
                if !in_sub[y] {
                    in_sub[y] = true;
                    frontier.push(y);
                }
            }
        }
        (0..self.order()).filter(|&i| in_sub[i]).collect()
    }

    /// Index of each element's coset for the subgroup, with the coset
    /// count.
    pub fn coset_ids(&self, subgroup: &[usize]) -> (Vec<usize>, usize) {
        let mut id = vec![usize::MAX; self.order()];
        let mut count = 0;
        for a in 0..self.order() {
            if id[a] != usize::MAX {
                continue;
            }
            for &h in subgroup {
                id[self.mul[a][h]] = count;
            }
            count += 1;
        }
        (id, count)
    }

    /// Value of the character with the given dual exponent tuple.
    pub fn character_value(&self, k: &[u32], g: usize) -> Complex64 {
        let mut angle = 0.0;
        for (i, &(_, ord)) in self.basis.iter().enumerate() {
            angle +=
                std::f64::consts::TAU * (k[i] as f64) * (self.exps[g][i] as f64) / ord as f64;
        }
        Complex64::from_polar(1.0, angle)
    }

    /// All characters, as dual exponent tuples.
    pub fn characters(&self) -> Vec<Vec<u32>> {
        let mut out = vec![vec![]];
        for &(_, ord) in &self.basis {
            let mut next = Vec::with_capacity(out.len() * ord as usize);
            for t in &out {
                for e in 0..ord {
                    let mut t2 = t.clone();
                    t2.push(e);
                    next.push(t2);
                }
            }
            out = next;
        }
        out
    }
}

/// Cyclic basis of a finite abelian group by maximal-order splitting: a
/// maximal-order element generates a direct factor; recurse on the
/// quotient and lift its basis elements to exact-order representatives.
fn abelian_basis(mul: &[Vec<usize>], identity: usize) -> Vec<(usize, u32)> {
    let n = mul.len();
    if n == 1 {
        return vec![];
    }
    let order_of = |g: usize| -> u32 {
        let mut x = g;
        let mut k = 1;
        while x != identity {
            x = mul[x][g];
            k += 1;
        }
        k
    };
    let g1 = (0..n).max_by_key(|&g| order_of(g)).unwrap();
    let n1 = order_of(g1);
    if (n1 as usize) == n {
        return vec![(g1, n1)];
    }
    // powers of g1 and discrete logs within the cyclic factor
    let mut powers = vec![identity];
    let mut x = g1;
    while x != identity {
        powers.push(x);
        x = mul[x][g1];
    }
    let dlog =
        |y: usize| -> Option<u32> { powers.iter().position(|&p| p == y).map(|i| i as u32) };
    // quotient by <g1>
    let mut coset_of = vec![usize::MAX; n];
    let mut reps = Vec::new();
    for a in 0..n {
        if coset_of[a] != usize::MAX {
            continue;
        }
        let c = reps.len();
        for &p in &powers {
            coset_of[mul[a][p]] = c;
        }
        reps.push(a);
    }
    let qn = reps.len();
    let mut qmul = vec![vec![0usize; qn]; qn];
    for (i, &ri) in reps.iter().enumerate() {
        for (j, &rj) in reps.iter().enumerate() {
            qmul[i][j] = coset_of[mul[ri][rj]];
        }
    }
    let qid = coset_of[identity];
    let qbasis = abelian_basis(&qmul, qid);
    let mut out = vec![(g1, n1)];
    for (qb, m) in qbasis {
        // lift: rep^m lies in <g1>; divide it out to get exact order m
        let mut g = reps[qb];
        let mut gm = identity;
        for _ in 0..m {
            gm = mul[gm][g];
        }
        let t = dlog(gm).expect("g^m lies in the cyclic factor");
        assert!(t % m == 0, "lifting obstruction in abelian basis");
        let shift = (t / m) as usize;
        let inv_shift = ((n1 as usize) - shift % (n1 as usize)) % (n1 as usize);
        for _ in 0..inv_shift {
            g = mul[g][g1];
        }
        debug_assert_eq!(coset_of[g], qb);
        out.push((g, m));
    }
    out
}

// ---------------------------------------------------------------------------
// The finite torus model and its Poisson identity

/// Desk-scale model of the adelic statement: the ambient group models
/// `[T]^1` as the unit group of `(Z/N)[x]/(x^2 - d)`, `gamma` models the
/// rational points, and `h` models the image of `T'(A)`. The symmetric
/// space model is the quotient by `h`.
#[derive(Clone, Debug)]
pub struct FiniteTorusModel {
    pub modulus: u64,
    pub d: i64,
    pub group: FiniteAbelianGroup,
    /// Element labels `(u, v)` for `u + v x`.
    pub labels: Vec<(u64, u64)>,
    /// Sorted indices of the rational-model subgroup.
    pub gamma: Vec<usize>,
    /// Sorted indices of the `T'`-model subgroup (the norm-one units).
    pub h: Vec<usize>,
}

impl FiniteTorusModel {
    pub fn new(modulus: u64, d: i64, gamma_gens: &[(u64, u64)]) -> Result<Self> {
        if modulus < 2 {
            return Err(Error::Config("modulus must be at least 2".into()));
        }
        let n = modulus as i64;
        let dd = d.rem_euclid(n) as u64;
        let mut labels = Vec::new();
        for u in 0..modulus {
            for v in 0..modulus {
                let norm =
                    (u as i64 * u as i64 - dd as i64 * v as i64 * v as i64).rem_euclid(n) as u64;
                if num::integer::gcd(norm, modulus) == 1 {
                    labels.push((u, v));
                }
            }
        }
        let index_of =
            |u: u64, v: u64| -> Option<usize> { labels.iter().position(|&(a, b)| a == u && b == v) };
        let size = labels.len();
        let mut mul = vec![vec![0usize; size]; size];
        for i in 0..size {
            for j in 0..size {
                let (u1, v1) = labels[i];
                let (u2, v2) = labels[j];
                let u = (u1 as i64 * u2 as i64 + dd as i64 * v1 as i64 * v2 as i64).rem_euclid(n)
                    as u64;
                let v = (u1 as i64 * v2 as i64 + v1 as i64 * u2 as i64).rem_euclid(n) as u64;
                mul[i][j] = index_of(u, v).ok_or_else(|| {
                    Error::Config("unit group not closed; inconsistent model".into())
                })?;
            }
        }
        let identity = index_of(1, 0)
            .ok_or_else(|| Error::Config("missing identity in the model".into()))?;
        let group = FiniteAbelianGroup::from_mul_table(mul, identity);
        let h_elems: Vec<usize> = (0..size)
            .filter(|&i| {
                let (u, v) = labels[i];
                (u as i64 * u as i64 - dd as i64 * v as i64 * v as i64).rem_euclid(n) == 1
            })
            .collect();
        let h = group.subgroup(&h_elems);
        let mut ggens = Vec::new();
        for &(u, v) in gamma_gens {
            let idx = index_of(u % modulus, v % modulus).ok_or_else(|| {
                Error::Config(format!("gamma generator ({u},{v}) is not a unit in the model"))
            })?;
            ggens.push(idx);
        }
        let gamma = group.subgroup(&ggens);
        Ok(FiniteTorusModel { modulus, d, group, labels, gamma, h })
    }

    /// Coset structure of the symmetric-space model `A/H`.
    pub fn space_cosets(&self) -> (Vec<usize>, usize) {
        self.group.coset_ids(&self.h)
    }

    /// Product subgroup `Gamma H`, supporting the rational-model points.
    pub fn gamma_h(&self) -> Vec<usize> {
        let mut gens = self.gamma.clone();
        gens.extend(&self.h);
        self.group.subgroup(&gens)
    }
}

/// Matched function on the torus model: the canonical section with
/// `f(a H) = sum over h of Phi(a h)`, i.e. the pullback divided by `|H|`.
pub fn match_test_function(
    model: &FiniteTorusModel,
    f_on_space: &[Complex64],
) -> Result<Vec<Complex64>> {
    let (coset_id, count) = model.space_cosets();
    if f_on_space.len() != count {
        return Err(Error::Config(format!(
            "space function has {} entries, expected {count}",
            f_on_space.len()
        )));
    }
    let hsize = model.h.len() as f64;
    Ok((0..model.group.order())
        .map(|a| f_on_space[coset_id[a]] / hsize)
        .collect())
}

/// Both sides of the coarse identity, evaluated independently: the
/// geometric side sums `f` over the rational-model points of the symmetric
/// space; the spectral side sums the Fourier coefficients of the matched
/// `Phi` over the characters trivial on both subgroups. The shared measure
/// normalization is `|Gamma H| / |A|` per character.
pub fn finite_poisson(
    model: &FiniteTorusModel,
    f_on_space: &[Complex64],
) -> Result<(Complex64, Complex64)> {
    let (coset_id, _) = model.space_cosets();
    let gamma_h = model.gamma_h();
    let mut seen = std::collections::BTreeSet::new();
    let mut geom = Complex64::new(0.0, 0.0);
    for &a in &gamma_h {
        if seen.insert(coset_id[a]) {
            geom += f_on_space[coset_id[a]];
        }
    }
    let phi = match_test_function(model, f_on_space)?;
    let g = &model.group;
    let normalization = gamma_h.len() as f64 / g.order() as f64;
    let mut spec = Complex64::new(0.0, 0.0);
    for chi in g.characters() {
        if gamma_h
            .iter()
            .any(|&s| (g.character_value(&chi, s) - Complex64::new(1.0, 0.0)).norm() > 1e-9)
        {
            continue;
        }
        let mut coeff = Complex64::new(0.0, 0.0);
        for a in 0..g.order() {
            coeff += phi[a] * g.character_value(&chi, a);
        }
        spec += normalization * coeff;
    }
    Ok((geom, spec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn classification_examples() {
        let e = QuadAlg::new(-1).unwrap();
        let l = QuadAlg::new(2).unwrap();
        let m = BiquadraticData::new(e, l);
        assert!(m.m_is_field);
        let pairs = classify_structures(&m).unwrap();
        let cores: Vec<i64> = pairs.iter().map(|p| p.l.core()).collect();
        assert!(cores.contains(&2) && cores.contains(&-2));
        // split compositum: L = split gives partners Gm and the norm torus
        let ms = BiquadraticData::new(e, QuadAlg::split());
        assert!(!ms.m_is_field);
        let ps = classify_structures(&ms).unwrap();
        let cs: Vec<i64> = ps.iter().map(|p| p.l.core()).collect();
        assert!(cs.contains(&1) && cs.contains(&-1));
        // stability under repeated classification
        let m2 = BiquadraticData::new(e, m.lp);
        let pairs2 = classify_structures(&m2).unwrap();
        let mut cores2: Vec<i64> = pairs2.iter().map(|p| p.l.core()).collect();
        cores2.sort_unstable();
        let mut cores1 = cores;
        cores1.sort_unstable();
        assert_eq!(cores1, cores2);
    }

    #[test]
    fn symmetric_space_examples() {
        let e = QuadAlg::new(-1).unwrap();
        let pair = TorusPair { e, l: QuadAlg::new(2).unwrap() };
        assert_eq!(symmetric_space_of(&pair).core(), -2);
        let pair_e = TorusPair { e, l: e };
        assert_eq!(symmetric_space_of(&pair_e), QuadAlg::split());
        let pair_split = TorusPair { e, l: QuadAlg::split() };
        assert_eq!(symmetric_space_of(&pair_split), e);
    }

    #[test]
    fn core_product_is_square_sweep() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut count = 0;
        while count < 100 {
            let de = rng.gen_range(-30i128..30);
            let dl = rng.gen_range(-30i128..30);
            if de == 0 || dl == 0 {
                continue;
            }
            let e = QuadAlg::from_radicand(de).unwrap();
            let l = QuadAlg::from_radicand(dl).unwrap();
            if e.is_split() {
                continue;
            }
            let m = BiquadraticData::new(e, l);
            let prod = m.core_product();
            let r = num::integer::Roots::sqrt(&prod.unsigned_abs());
            assert!(prod > 0 && (r * r) as i128 == prod, "product {prod} not a square");
            assert_eq!(m.lp.reflect_through(&e), l);
            count += 1;
        }
    }

    #[test]
    fn abelian_basis_and_characters() {
        let model = FiniteTorusModel::new(12, 5, &[]).unwrap();
        let g = &model.group;
        let total: usize = g.basis_orders().iter().map(|&o| o as usize).product();
        assert_eq!(total, g.order());
        // character orthogonality
        for chi in g.characters() {
            let mut s = Complex64::new(0.0, 0.0);
            for a in 0..g.order() {
                s += g.character_value(&chi, a);
            }
            if chi.iter().all(|&e| e == 0) {
                assert!((s.re - g.order() as f64).abs() < 1e-8);
            } else {
                assert!(s.norm() < 1e-8, "non-trivial character sums to {s}");
            }
        }
    }

    #[test]
    fn poisson_identity_delta_and_constant() {
        let model = FiniteTorusModel::new(12, 5, &[(5, 2)]).unwrap();
        let (coset_id, count) = model.space_cosets();
        let idc = coset_id[model.group.identity];
        let mut delta = vec![Complex64::new(0.0, 0.0); count];
        delta[idc] = Complex64::new(1.0, 0.0);
        let (geom, spec) = finite_poisson(&model, &delta).unwrap();
        assert!((geom.re - 1.0).abs() < 1e-9);
        assert!((geom - spec).norm() < 1e-9);
        // constant one: geometric side counts the rational model points
        let ones = vec![Complex64::new(1.0, 0.0); count];
        let (geom1, spec1) = finite_poisson(&model, &ones).unwrap();
        assert!((geom1 - spec1).norm() < 1e-9);
        let gamma_h = model.gamma_h();
        let rational: std::collections::BTreeSet<usize> =
            gamma_h.iter().map(|&a| coset_id[a]).collect();
        assert!((geom1.re - rational.len() as f64).abs() < 1e-9);
    }

    #[test]
    fn poisson_identity_random_models() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let mut done = 0;
        while done < 20 {
            let n = *[6u64, 8, 9, 10, 12, 15].get(rng.gen_range(0..6)).unwrap();
            let d = rng.gen_range(-7i64..8);
            let Ok(mut model) = FiniteTorusModel::new(n, d, &[]) else { continue };
            let size = model.group.order();
            let g1 = rng.gen_range(0..size);
            let g2 = rng.gen_range(0..size);
            model.gamma = model.group.subgroup(&[g1, g2]);
            let (_, count) = model.space_cosets();
            let f: Vec<Complex64> = (0..count)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let (geom, spec) = finite_poisson(&model, &f).unwrap();
            assert!((geom - spec).norm() < 1e-9, "N={n}, d={d}: {geom} vs {spec}");
            done += 1;
        }
    }

    #[test]
    fn matching_is_a_section() {
        let model = FiniteTorusModel::new(8, 3, &[(3, 0)]).unwrap();
        let (cid, count) = model.space_cosets();
        let f: Vec<Complex64> = (0..count)
            .map(|i| Complex64::new(i as f64 + 0.5, -(i as f64)))
            .collect();
        let phi = match_test_function(&model, &f).unwrap();
        // averaging back over H reproduces f on every coset
        for a in 0..model.group.order() {
            let mut s = Complex64::new(0.0, 0.0);
            for &h in &model.h {
                s += phi[model.group.mul[a][h]];
            }
            assert!((s - f[cid[a]]).norm() < 1e-9);
        }
        assert!(match_test_function(&model, &f[..count - 1]).is_err());
    }
}
