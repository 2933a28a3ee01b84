//! Benchmark fixtures shared by the criterion targets.

use ndual_core::functionals::{antisymmetrize, MultiFunctional};
use ndual_core::spaces::{random_tuple, random_vector};
use ndual_core::{Conditioning, SpaceSpec, Vector};

pub fn tuple(d: usize, n: usize, p: f64, seed: u64) -> Vec<Vector> {
    let space = SpaceSpec::new(d, p).expect("valid space");
    random_tuple(&space, n, seed, Conditioning::Generic)
}

/// Antisymmetric order-`n` tensor with coefficients drawn from a random vector.
pub fn antisymmetric_tensor(d: usize, n: usize, seed: u64) -> MultiFunctional {
    let big = SpaceSpec::new(d.pow(n as u32), 2.0).expect("valid space");
    let coeffs = random_vector(&big, seed, Conditioning::Generic).into_coords();
    let space = SpaceSpec::new(d, 2.0).expect("valid space");
    let f = MultiFunctional::new(space, n, coeffs).expect("shape matches");
    antisymmetrize(&f).expect("order at most six")
}
