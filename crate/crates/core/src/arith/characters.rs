//! Quadratic Hecke characters of the idele class group of Q.
//!
//! A quadratic character is determined by a fundamental discriminant `D`
//! (`D = 1` is the trivial character). Its local component at a place `v`
//! is the Hilbert symbol `t -> (t, D)_v`; the finite part on integers prime
//! to `D` is the Kronecker symbol `(D|n)`.

use super::{hilbert_inf, hilbert_p, kronecker, squarefree_part, Rat};
use crate::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, serde::Serialize, serde::Deserialize)]
pub struct QuadraticCharacter {
    disc: i64,
}

impl QuadraticCharacter {
    pub fn trivial() -> Self {
        QuadraticCharacter { disc: 1 }
    }

    pub fn new(disc: i64) -> Result<Self> {
        if disc == 1 {
            return Ok(Self::trivial());
        }
        let is_fundamental = if disc.rem_euclid(4) == 1 {
            squarefree_part(disc as i128)? == disc as i128
        } else if disc % 4 == 0 {
            let m = disc / 4;
            squarefree_part(m as i128).map(|s| s == m as i128).unwrap_or(false)
                && matches!(m.rem_euclid(4), 2 | 3)
        } else {
            false
        };
        if !is_fundamental {
            return Err(Error::Domain(format!("{disc} is not a fundamental discriminant")));
        }
        Ok(QuadraticCharacter { disc })
    }

    pub fn discriminant(&self) -> i64 {
        self.disc
    }

    pub fn is_trivial(&self) -> bool {
        self.disc == 1
    }

    pub fn is_ramified_at(&self, p: u64) -> bool {
        self.disc != 1 && self.disc % (p as i64) == 0
    }

    /// True when the archimedean component is the sign character.
    pub fn is_odd(&self) -> bool {
        self.disc < 0
    }

    pub fn ramified_primes(&self) -> Vec<u64> {
        if self.disc == 1 {
            return Vec::new();
        }
        super::factor(&num::BigInt::from(self.disc.abs()))
            .into_iter()
            .map(|(p, _)| p)
            .collect()
    }

    /// Kronecker symbol value `(D|n)`; the unramified finite-place value on
    /// uniformizers and the classical Dirichlet character on integers.
    pub fn kron(&self, n: i64) -> i64 {
        kronecker(self.disc, n)
    }

    /// Local component at a finite place, as a Hilbert symbol.
    pub fn value_p(&self, t: &Rat, p: u64) -> i64 {
        hilbert_p(t, &super::rat_i(self.disc), p)
    }

    /// Local component at the archimedean place.
    pub fn value_inf(&self, t: &Rat) -> i64 {
        hilbert_inf(t, &super::rat_i(self.disc))
    }
}

/// All fundamental discriminants (other than 1) whose prime support lies in
/// the given set. These are exactly the quadratic Hecke characters that are
/// unramified at every finite place outside the set.
pub fn fundamental_discs_supported_on(primes: &[u64]) -> Vec<i64> {
    let mut odd_parts: Vec<i64> = vec![1];
    for &p in primes {
        if p == 2 {
            continue;
        }
        let p = p as i64;
        let pstar = if p.rem_euclid(4) == 1 { p } else { -p };
        let mut next = Vec::with_capacity(odd_parts.len() * 2);
        for &d in &odd_parts {
            next.push(d);
            next.push(d * pstar);
        }
        odd_parts = next;
    }
    let two_parts: &[i64] = if primes.contains(&2) { &[1, -4, 8, -8] } else { &[1] };
    let mut out = Vec::new();
    for &d in &odd_parts {
        for &t in two_parts {
            let prod = d * t;
            if prod != 1 {
                out.push(prod);
            }
        }
    }
    out.sort_unstable();
    out
}
