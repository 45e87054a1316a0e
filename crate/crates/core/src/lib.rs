//! Single-photon exchange between emitters inside a Maxwell fish-eye lens,
//! modelled as a multimode cavity in the single-excitation sector.
//!
//! Units: ħ = c = ε₀ = 1, the slab thickness is 1 and the atomic transition
//! frequency ω_a = 1, so the atomic wavelength is λ_a = 2π.

pub mod config;
pub mod coupling;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod geometry;
pub mod krylov;
pub mod legendre;
pub mod modes;
pub mod observables;
pub mod optimizer;
pub mod quadrature;
pub mod run;
pub mod rwa;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
