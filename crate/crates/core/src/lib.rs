//! n-norms, semi-inner products and norms of multilinear functionals on
//! finite-dimensional real l^p spaces.
//!
//! The crate is organized bottom-up:
//!
//! - [`spaces`]: exponents, vectors, dual functionals, Hölder duality,
//!   permutations and seeded generators.
//! - [`sip`]: the semi-inner product `g` and its one-sided derivative oracle.
//! - [`ortho`]: Gram matrices, projections and left g-orthogonal sequences.
//! - [`nnorms`]: the l^p determinant n-norm and the Gähler n-norm estimator.
//! - [`functionals`]: multilinear n-functionals, currying and norm estimators.
//! - [`verify`]: randomized property suites and their JSON report.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;
pub mod spaces;
pub mod sip;
pub mod ortho;
pub mod nnorms;
pub mod functionals;
pub mod verify;

pub use error::{Error, Result};
pub use spaces::{Conditioning, Conjugate, DualFunctional, PExponent, Permutation, SpaceSpec, Vector};
