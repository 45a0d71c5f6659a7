//! Disease-free and endemic equilibria.
//!
//! At equilibrium `x* = v` and the infected fractions solve
//! `(B - D - L* - diag(p) B) p = 0`. With `A = (L* + D)^-1 B` this is the
//! fixed-point problem `p = H(p) = (I + A diag(p))^-1 A p`. `H` is monotone
//! on `[0, 1]^n` and maps it into itself, so iterating from `1` produces a
//! componentwise non-increasing sequence that converges to the unique
//! strictly positive fixed point whenever `mu(B - D - L*) > 0`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::ModelState;
use crate::error::{Error, Result};
use crate::mobility::{stationary_distribution, GeneratorMatrix};
use crate::spectral::{
    infection_matrix, next_generation_matrix, spectral_abscissa, EpidemicParams, MobilityEquilibrium,
};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const MAX_ITERATIONS: usize = 1_000_000;
/// Bound on `|(B - D - L* - P* B) p*|_inf` for an accepted solution.
pub const RESIDUAL_LIMIT: f64 = 1e-10;

/// `(p, x) = (0, v)`.
pub fn disease_free(g: &GeneratorMatrix) -> Result<ModelState> {
    let v = stationary_distribution(g)?;
    Ok(ModelState {
        p: DVector::zeros(g.n()),
        x: v.into_inner(),
    })
}

/// `H(p)`: solves `(I + A diag(p)) h = A p`.
pub fn h_map(p: &DVector<f64>, a: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = a.nrows();
    if p.len() != n || a.ncols() != n {
        return Err(Error::DimensionMismatch {
            what: "p",
            expected: n,
            found: p.len(),
        });
    }
    let mut system = a.clone();
    for (j, mut column) in system.column_iter_mut().enumerate() {
        column *= p[j];
    }
    for i in 0..n {
        system[(i, i)] += 1.0;
    }
    system.lu().solve(&(a * p)).ok_or(Error::SingularSystem)
}

/// Iterates `p <- H(p)` from `start` until successive iterates differ by at
/// most `tol` in the max norm. Returns the last iterate and the count.
pub fn iterate_h(a: &DMatrix<f64>, start: DVector<f64>, tol: f64) -> Result<(DVector<f64>, usize)> {
    let mut p = start;
    for iteration in 1..=MAX_ITERATIONS {
        let next = h_map(&p, a)?;
        let change = (&next - &p).amax();
        p = next;
        if change <= tol {
            return Ok((p, iteration));
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERATIONS,
    })
}

/// Strictly positive endemic equilibrium `p*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndemicSolution {
    pub p_star: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// `|(B - D - L* - diag(p) B) p|_inf`.
pub fn equilibrium_residual(params: &EpidemicParams, eq: &MobilityEquilibrium, p: &DVector<f64>) -> Result<f64> {
    let mut jacobian = infection_matrix(params, &eq.lstar)?;
    for i in 0..p.len() {
        jacobian[(i, i)] -= p[i] * params.beta()[i];
    }
    Ok((jacobian * p).amax())
}

/// Unique endemic equilibrium, by monotone iteration of `H` from `1`.
pub fn endemic_fixed_point(params: &EpidemicParams, g: &GeneratorMatrix, tol: f64) -> Result<EndemicSolution> {
    params.check_len(g.n())?;
    let eq = MobilityEquilibrium::new(g)?;
    let mu = spectral_abscissa(&infection_matrix(params, &eq.lstar)?)?.value;
    if mu <= 0.0 {
        return Err(Error::NotEndemicRegime { mu });
    }
    let a = next_generation_matrix(params, &eq.lstar)?;
    let (p_star, iterations) = iterate_h(&a, DVector::from_element(g.n(), 1.0), tol)?;
    if let Some(index) = p_star.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::DegenerateSolution { index });
    }
    let residual = equilibrium_residual(params, &eq, &p_star)?;
    if residual > RESIDUAL_LIMIT {
        return Err(Error::ResidualTooLarge {
            residual,
            limit: RESIDUAL_LIMIT,
        });
    }
    Ok(EndemicSolution {
        p_star: p_star.iter().copied().collect(),
        iterations,
        residual,
    })
}

/// Lower corner `eps * u` of an `H`-invariant box `[eps u, 1]`, with `u` the
/// Perron vector of `A`.
///
/// `eps` starts at 1 and is halved until `H(eps u) >= eps u`; such an `eps`
/// exists whenever `rho(A) > 1`.
pub fn lower_box_vector(a: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
    let perron = spectral_abscissa(a)?;
    if perron.value <= 1.0 {
        return Err(Error::NotEndemicRegime { mu: perron.value - 1.0 });
    }
    let u = perron.vector;
    let mut epsilon = 1.0;
    for _ in 0..1100 {
        let corner = &u * epsilon;
        let image = h_map(&corner, a)?;
        if image.iter().zip(corner.iter()).all(|(h, c)| h >= c) {
            return Ok((epsilon, u));
        }
        epsilon *= 0.5;
    }
    Err(Error::NoConvergence { iterations: 1100 })
}

/// `(L* + D)^-1 B` for the stationary mobility of `g`.
pub fn next_generation(params: &EpidemicParams, g: &GeneratorMatrix) -> Result<DMatrix<f64>> {
    params.check_len(g.n())?;
    let eq = MobilityEquilibrium::new(g)?;
    next_generation_matrix(params, &eq.lstar)
}
