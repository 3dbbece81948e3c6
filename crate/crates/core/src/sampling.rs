//! Seeded randomness and quasi-random point sets.
//!
//! Every random quantity derives from a single `u64` seed. Each purpose gets
//! its own ChaCha8 stream (`set_stream`), so adding draws in one place never
//! shifts the numbers seen somewhere else.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Stream identifiers.
pub mod stream {
    pub const EXTREMUM: u64 = 1;
    pub const OTSUKI: u64 = 2;
    pub const PLANES: u64 = 3;
    pub const RADIAL: u64 = 4;
    pub const OMORI_YAU: u64 = 5;
    pub const TENSORS: u64 = 6;
    pub const DIAGNOSTICS: u64 = 7;
}

pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

const PRIMES: [u64; 24] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while i > 0 {
        out += (i % base) as f64 * f;
        i /= base;
        f *= inv;
    }
    out
}

/// Halton sequence in `[0,1)^dim` with a seeded Cranley–Patterson shift.
#[derive(Debug, Clone)]
pub struct Halton {
    shift: Vec<f64>,
    index: u64,
}

impl Halton {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim <= PRIMES.len(), "Halton sequence supports at most {} dimensions", PRIMES.len());
        let mut r = rng(seed, stream::EXTREMUM);
        Halton { shift: (0..dim).map(|_| r.random::<f64>()).collect(), index: 1 }
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }
}

impl Iterator for Halton {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        let i = self.index;
        self.index += 1;
        Some(self.shift.iter().zip(PRIMES).map(|(s, b)| (radical_inverse(i, b) + s).fract()).collect())
    }
}

pub fn gaussian_vector(r: &mut impl Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| r.sample(StandardNormal))
}

/// Uniformly distributed unit vector in the inner product `g`.
pub fn random_unit(r: &mut impl Rng, g: &DMatrix<f64>) -> DVector<f64> {
    let n = g.nrows();
    loop {
        let v = gaussian_vector(r, n);
        // map an Euclidean-uniform direction through g^{-1/2}
        let l = g.clone().cholesky().expect("inner product must be positive definite").l();
        let w = l.transpose().solve_upper_triangular(&v).expect("triangular factor is invertible");
        let norm = (w.transpose() * g * &w)[(0, 0)].sqrt();
        if norm > 1e-12 {
            return w / norm;
        }
    }
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with sign
/// correction).
pub fn random_orthogonal(r: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| r.sample(StandardNormal));
    let qr = a.qr();
    let mut q = qr.q();
    let rm = qr.r();
    for j in 0..n {
        if rm[(j, j)] < 0.0 {
            let mut col = q.column_mut(j);
            col *= -1.0;
        }
    }
    q
}
