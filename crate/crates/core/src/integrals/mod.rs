//! Test-function model, derived line functions and Fourier transforms,
//! local and global Tate zeta integrals, compact-group averages, and
//! (weighted) orbital integrals.

pub mod kappa;
pub mod linefn;
pub mod orbital;
pub mod testfn;
pub mod zeta;

pub use kappa::{kappa_average_finite, kappa_average_global, plain_line_data};
pub use linefn::{
    derive_fx_arch, derive_fx_finite, fourier_finite, poisson_check, ArchLineFn, FiniteLineFn,
};
pub use orbital::{
    diagonal_arch_integral, diagonal_atoms, diagonal_places, orbital_arch, orbital_local,
    OrbitalValue,
};
pub use testfn::{ArchFn, Ball, FinitePlaceFn, GlobalTestFn, Profile};
pub use zeta::{
    zeta_arch, zeta_global, zeta_local, zeta_local_exact, zeta_sderivative, GlobalLineData,
    ZetaValue,
};
