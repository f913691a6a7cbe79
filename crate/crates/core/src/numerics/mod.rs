//! Dense linear algebra used by the controller and the certificates.

mod eig;
mod expm;
mod matrix;
mod riccati;
pub mod vector;

pub use eig::{
    mat_sqrt, spectral_norm, spectral_radius_estimate, sym_eig, sym_eig_pd, weighted_extremes, weighted_spectrum,
    MatrixRoots, SymEig,
};
pub use expm::{discretize_zoh, expm};
pub use matrix::{cholesky_solve, spd_solve, Matrix};
pub use riccati::{solve_dare, Riccati};
