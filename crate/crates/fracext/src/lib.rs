//! Asymptotic expansions of the Poisson kernel, the weighted-Neumann Green's
//! function and the boundary Green's function of the degenerate extension
//! operator `D_g = −(1/√g)∂_p(√g y^{1−2γ} g^{pq} ∂_q) + E_g`.
//!
//! The crate is organised around an exact algebra of homogeneous terms
//! ([`homogeneous_algebra`]), homogeneous solvers for the flat operator
//! ([`homogeneous_solver`]), metric jets ([`metric_model`]) and the
//! deficit-killing pipeline ([`expansion_engine`]). A graded-mesh finite
//! volume solver ([`degenerate_fd`]) serves as an independent oracle.

pub mod error;
pub mod scalar;
pub mod homogeneous_algebra;
pub mod hemisphere_spectral;
pub mod homogeneous_solver;
pub mod metric_model;
pub mod degenerate_fd;
pub mod flat_kernels;
pub mod expansion_engine;
pub mod quadrature;
pub mod util;
pub mod verify;
pub mod cli_io;

pub use error::{FracError, Result};
pub use homogeneous_algebra::{AtomKey, AtomSum, Context, Direction, GradedAtom, LatticeExponent};
pub use scalar::Scalar;
#[cfg(feature = "exact")]
pub use scalar::Rational;
