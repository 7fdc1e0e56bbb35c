//! Band structure of the one-dimensional Schrodinger operator
//! `-y'' + Q(x) y` with a periodic Hermitian `m x m` matrix potential `Q`.
//!
//! The operator decomposes into a family `L_t` over the quasimomentum
//! `t in (-pi, pi]`, obtained by imposing `y(1) = e^{it} y(0)`,
//! `y'(1) = e^{it} y'(0)` on one period. Its eigenvalues, ordered
//! non-decreasingly, are the Bloch eigenvalues `lambda_n(t)`; their ranges
//! over `t` are the spectral bands, and the open intervals between
//! consecutive bands are the gaps.
//!
//! The crate computes Bloch eigenvalues by a plane-wave Galerkin
//! discretization ([`bloch`]), cross-checks them against an independent
//! monodromy-determinant oracle ([`monodromy`]), and analyses the band/gap
//! layout against the asymptotic window and counting predictions driven by
//! the mean matrix `C` of the potential ([`unperturbed`], [`analysis`]).
//! Scalar potentials additionally get an extended-precision gap prober
//! ([`scalarprec`]) that resolves gap widths far below `f64` resolution.

pub mod analysis;
pub mod bloch;
pub mod calibrate;
pub mod error;
pub mod monodromy;
pub mod pipeline;
pub mod potential;
pub mod report;
pub mod scalarprec;
pub mod unperturbed;

pub use error::{Error, Result};
pub use potential::{FourierTail, MatrixPotential, MeanSpectrum};

/// Dynamically sized complex matrix used throughout the crate.
pub type CMatrix = nalgebra::DMatrix<num_complex::Complex64>;
/// Dynamically sized complex column vector.
pub type CVector = nalgebra::DVector<num_complex::Complex64>;
