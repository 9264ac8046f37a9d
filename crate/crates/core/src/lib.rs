//! Operator-valued harmonic analysis on the unit circle, specialized to
//! `d x d` complex matrices with the standard trace.
//!
//! The crate computes the norms, kernels, square functions, atoms and
//! Carleson quantities attached to matrix-valued functions on the circle and
//! their extensions to the disk, and packages them into reproducible
//! verification studies (see [`verify`]).

pub mod atoms;
pub mod carleson;
pub mod circfun;
pub mod diskpoly;
pub mod error;
pub mod extension;
pub mod norms;
pub mod opalg;
pub mod quadrature;
pub mod squarefun;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64;
