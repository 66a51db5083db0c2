//! Spectral measures and functional calculus of operators given as infinite
//! matrices with known column decay.
//!
//! Every computation reduces to resolvent evaluations `R(z,T)x`, obtained by
//! rectangular least squares on finite sections of the matrix. Each solve
//! carries a certified a posteriori error bound.

pub mod collocation;
pub mod decompositions;
pub mod density;
pub mod error;
pub mod funcalc;
pub mod gallery;
pub mod linalg;
pub mod operator;
pub mod poisson;
pub mod quadrature;
pub mod resolvent;
pub mod sets;
pub mod special;
pub mod textio;

pub use error::{Result, SpecError};
pub use num_complex::Complex64 as C64;
pub use operator::{ColumnDecayOperator, DecayVector, Dispersion, Kind, NullSeq};
pub use resolvent::{ResolventOptions, ResolventSolution};
pub use sets::OpenRealSet;
