//! Geometric half of a relative trace formula for the Galois symmetric pair
//! `(Res_{E/F} SL2, SL2)` over `F = Q`, at desk scale.
//!
//! The crate is organized around the objects the formula is built from:
//!
//! - [`arith`]: exact rationals, quadratic etale algebras, bounded-precision
//!   p-adics, Kronecker/Hilbert symbols and quadratic Hecke characters;
//! - [`cones`]: polyhedral cone combinatorics and the truncation indicator
//!   functions (tau, tau-hat, sigma, Gamma) computed from their defining
//!   face sums;
//! - [`symspace`]: the symmetric space `X = {h : h theta(h) = 1}` in explicit
//!   coordinates, its GIT map, datum classification, reflection and
//!   descendants, and the Cayley transform;
//! - [`heights`]: Iwasawa decompositions, Harish-Chandra heights, the weight
//!   `v(x) = H(x) + H(wx)` and the truncation weight integral;
//! - [`integrals`]: test functions on `X(A)`, derived line functions and their
//!   Fourier transforms, local/global Tate zeta integrals, compact-group
//!   averages, and (weighted) orbital integrals by coset enumeration;
//! - [`expansion`]: assembly of the per-datum distribution `J_o^T(f)` as an
//!   affine function of the truncation parameter, with cross-checks;
//! - [`tori`]: the rank-one tori classification and the coarse trace formula
//!   for tori realized as finite Poisson summation;
//! - [`suite`]: the runnable acceptance checks used by tests and the CLI.

pub mod arith;
pub mod cones;
pub mod expansion;
pub mod heights;
pub mod integrals;
pub mod mat;
pub mod quad;
pub mod special;
pub mod suite;
pub mod symspace;
pub mod tori;

pub use arith::{QuadAlg, QuadElem, QuadraticCharacter, Rat};
pub use mat::Mat2;
pub use symspace::{DatumClass, GeomDatum, SlicePoint, XPoint};

/// Errors shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singular input: {0}")]
    Singular(String),
    #[error("insufficient p-adic precision: {0}")]
    Precision(String),
    #[error("accuracy target not met: wanted {wanted}, achieved {achieved}")]
    Accuracy { wanted: f64, achieved: f64 },
    #[error("enumeration did not stabilize at depth {depth} (partial value {partial})")]
    NotStabilized { depth: u32, partial: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
