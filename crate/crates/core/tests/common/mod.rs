//! Random instances and dense reference solvers shared by the integration tests.
#![allow(dead_code)]

use mobsis::mobility::validate_generator;
use mobsis::{EpidemicParams, GeneratorMatrix};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Irreducible generator: a Hamiltonian cycle through a random node order
/// plus each remaining ordered pair with probability `extra`. Rates are
/// uniform on `[0.05, 1)`.
pub fn random_generator(rng: &mut impl Rng, n: usize, extra: f64) -> GeneratorMatrix {
    let mut q = DMatrix::zeros(n, n);
    if n > 1 {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        for k in 0..n {
            q[(order[k], order[(k + 1) % n])] = rng.gen_range(0.05..1.0);
        }
        for i in 0..n {
            for j in 0..n {
                if i != j && q[(i, j)] == 0.0 && rng.gen_bool(extra) {
                    q[(i, j)] = rng.gen_range(0.05..1.0);
                }
            }
        }
        for i in 0..n {
            q[(i, i)] = -q.row(i).sum();
        }
    }
    validate_generator(q).expect("constructed generator is valid")
}

pub fn random_params(rng: &mut impl Rng, n: usize, beta: (f64, f64), delta: (f64, f64)) -> EpidemicParams {
    let beta = (0..n).map(|_| rng.gen_range(beta.0..beta.1)).collect();
    let delta = (0..n).map(|_| rng.gen_range(delta.0..delta.1)).collect();
    EpidemicParams::new(beta, delta).expect("ranges are non-negative")
}

pub fn random_simplex(rng: &mut impl Rng, n: usize) -> DVector<f64> {
    let x = DVector::from_fn(n, |_, _| rng.gen_range(0.05..1.0));
    let sum = x.sum();
    x / sum
}

/// Null vector of `Q^T` from the SVD, normalised to unit sum.
pub fn dense_stationary(q: &DMatrix<f64>) -> DVector<f64> {
    let svd = q.transpose().svd(false, true);
    let v_t = svd.v_t.expect("requested");
    let (k, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let v = v_t.row(k).transpose();
    let sum = v.sum();
    v / sum
}

/// Largest real part over the Schur-form eigenvalues.
pub fn dense_abscissa(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn inf_norm(v: &DVector<f64>) -> f64 {
    v.amax()
}
