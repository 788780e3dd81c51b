//! Compilation of cyclic banded unitaries and their pyramid transforms into
//! ancilla-free quantum circuits, with a dense statevector simulator used to
//! verify every compiled circuit against its matrix oracle.

pub mod banded;
pub mod circuit;
pub mod cli;
pub mod compiler;
pub mod error;
pub mod numerics;
pub mod report;
pub mod scalar;
pub mod simulator;
pub mod truncation;
pub mod wavelet;

pub use error::{Error, Result};

use num_complex::Complex;

/// Working-precision complex matrix.
pub type CMatrix = numerics::Mat<f64>;
/// Working-precision complex vector.
pub type CVector = Vec<Complex<f64>>;
/// Working-precision complex scalar.
pub type C64 = Complex<f64>;

pub use cli::cli_main;
