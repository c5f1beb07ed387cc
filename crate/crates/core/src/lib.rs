//! Hypocoercivity certificates for BGK relaxation models.
//!
//! The crate builds the finite-state and Fourier–Hermite mode operators of
//! linear BGK equations, constructs Lyapunov matrices `P` with
//! `C*P + PC ⪰ 2μP`, and simulates the discrete, linear, linearized and
//! nonlinear equations so that the certified rates can be checked against
//! actual trajectories.
//!
//! Module map:
//!
//! * [`basis`]: Hermite functions, Krawtchouk and discrete Hermite polynomials,
//!   and the tridiagonal velocity matrices they induce.
//! * [`entropy`]: entropy generators, relative entropies, Fisher information
//!   and the admissibility constant of the entropy–entropy-production method.
//! * [`discrete_models`]: homogeneous and four-state BGK generators.
//! * [`lyapunov`]: spectral gaps and Lyapunov certificates for finite matrices.
//! * [`mode_operators`]: Fourier-mode operators, block ansätze for `P_k` and
//!   uniform-in-`k` rate certification.
//! * [`simulator`]: Fourier–Hermite time stepping and entropy functionals.

// `!(x > 0.0)` deliberately rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod discrete_models;
pub mod entropy;
mod error;
pub mod linalg;
pub mod lyapunov;
pub mod mode_operators;
pub mod rate;
pub mod simulator;

pub use error::{Error, Result};

/// Complex double.
pub type C64 = num_complex::Complex<f64>;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex vector.
pub type CVector = nalgebra::DVector<C64>;
