//! Numerical laboratory for the Bogoliubov trial-state energy of the dilute
//! Bose gas on the unit torus.
//!
//! The crate is organized around the chain
//!
//! ```text
//! potential  ->  kernels  ->  identities / energy
//!     lattice ----^               focktoy (brute-force oracle)
//! ```
//!
//! `potential` solves the zero-energy scattering problem and tabulates the
//! radial Fourier transforms of `V`, `Vf` and `Vw`.  `lattice` enumerates the
//! momentum lattice `2*pi*Z^3` by shells.  `kernels` builds the Bogoliubov
//! kernels with and without the low-momentum cutoff.  `identities` verifies
//! the discrete scattering equation and the sum rule, `energy` assembles the
//! trial-state energy and compares it with the Lee-Huang-Yang closed form,
//! and `focktoy` re-derives the constant bookkeeping on a truncated Fock
//! space with a handful of modes.

pub mod conv;
pub mod energy;
pub mod fitting;
pub mod focktoy;
pub mod fourier;
pub mod identities;
pub mod kernels;
pub mod lattice;
pub mod potential;
pub mod report;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid potential: {0}")]
    InvalidPotential(String),
    #[error("scattering solver failed: {0}")]
    Solver(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parameter regime violation: {0}")]
    Regime(String),
    #[error("lattice sum diverges: {0}")]
    Divergence(String),
    #[error("grid too coarse: {0}")]
    Resolution(String),
    #[error("Fock basis dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("truncation defect {defect:.3e} above tolerance {tol:.3e} in {what}")]
    TruncationDefect { what: String, defect: f64, tol: f64 },
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
