//! Exact p-adic spectral theory for compact operators on orthonormalizable
//! Banach modules over affinoid algebras.

pub mod eigen;
pub mod error;
pub mod fredholm;
pub mod linalg;
pub mod matrix;
pub mod newton;
pub mod operators;
pub mod poly;
pub mod riesz;
pub mod rings;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use rings::{AffinoidElement, Chart, Coeff, Norm, PadicScalar, RingHom, Valuation};
