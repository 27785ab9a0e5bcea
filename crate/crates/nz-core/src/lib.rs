//! Perturbative quantum invariants of cusped 3-manifolds.
//!
//! Starting from the gluing data of an ideal triangulation (a Neumann-Zagier
//! datum: integer matrices `A`, `B` and a vector `eta`, together with a shape
//! solution of the gluing equations), this crate computes
//!
//! * the complex volume `S0`,
//! * the 1-loop torsion `tau` (a determinant times a monomial correction,
//!   defined up to sign),
//! * the higher-loop invariants `S_n` for `n >= 2` via truncated formal
//!   power series and formal Gaussian integration,
//!
//! and exposes the triangulation-move calculus (quad rotation, edge change,
//! meridian move, 2-3 move, flattening change) used to verify that these
//! quantities are invariants of the underlying manifold rather than of the
//! chosen triangulation.
//!
//! All floating-point work is done in arbitrary-precision complex arithmetic
//! (MPFR/MPC via `rug`); all combinatorial work (Hermite normal form,
//! flattening solving, symplectic checks) is exact integer/rational
//! arithmetic.

// index-based loops over small dense matrices are the house style here
#![allow(clippy::needless_range_loop)]

pub mod cmat;
pub mod error;
pub mod flatten;
pub mod gluesolve;
pub mod invariants;
pub mod moves;
pub mod mpnum;
pub mod nzio;
pub mod prec;
pub mod qmat;
pub mod series;

pub use error::Error;
pub use prec::Prec;

/// Convenience result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
