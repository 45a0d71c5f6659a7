//! Eigenstructure and stability classification.
//!
//! The sign of the spectral abscissa `mu(B - D - L*)` separates the
//! disease-free regime (`mu <= 0`) from the endemic one (`mu > 0`), with
//! `L* = L(v)` the mobility Laplacian at the stationary distribution. The
//! same threshold reads `R0 = rho((L* + D)^-1 B) > 1`. The remaining
//! quantities in [`StabilityReport`] are the node-wise necessary and
//! sufficient conditions and the mobility-aware sufficient condition built
//! on `lambda2`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mobility::{
    mobility_laplacian, stationary_distribution, GeneratorMatrix, MobilityLaplacian, PopulationDistribution,
    RegionGraph,
};

/// Iteration cap for [`spectral_abscissa`].
pub const PERRON_MAX_ITER: usize = 100_000;
/// Relative tolerance on successive Perron value estimates.
pub const PERRON_TOL: f64 = 1e-12;

/// Per-node infection rates `beta > 0` and recovery rates `delta >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpidemicParams {
    beta: Vec<f64>,
    delta: Vec<f64>,
}

impl EpidemicParams {
    pub fn new(beta: Vec<f64>, delta: Vec<f64>) -> Result<Self> {
        if beta.is_empty() {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: "at least one node is required".to_owned(),
            });
        }
        if delta.len() != beta.len() {
            return Err(Error::DimensionMismatch {
                what: "delta",
                expected: beta.len(),
                found: delta.len(),
            });
        }
        if let Some(i) = beta.iter().position(|&b| !(b > 0.0 && b.is_finite())) {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: format!("beta[{i}] = {} must be positive", beta[i]),
            });
        }
        if let Some(i) = delta.iter().position(|&d| !(d >= 0.0 && d.is_finite())) {
            return Err(Error::InvalidParameter {
                name: "delta",
                reason: format!("delta[{i}] = {} must be non-negative", delta[i]),
            });
        }
        Ok(Self { beta, delta })
    }

    /// Same rates at every node.
    pub fn homogeneous(n: usize, beta: f64, delta: f64) -> Result<Self> {
        Self::new(vec![beta; n], vec![delta; n])
    }

    pub fn n(&self) -> usize {
        self.beta.len()
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    /// `m = min_i (delta_i - beta_i)`.
    pub fn min_slack(&self) -> f64 {
        self.beta
            .iter()
            .zip(&self.delta)
            .map(|(b, d)| d - b)
            .fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if self.n() != n {
            return Err(Error::DimensionMismatch {
                what: "epidemic parameters",
                expected: n,
                found: self.n(),
            });
        }
        Ok(())
    }
}

/// Dominant real eigenvalue with its positive eigenvector (unit 1-norm).
#[derive(Debug, Clone, PartialEq)]
pub struct PerronPair {
    pub value: f64,
    pub vector: DVector<f64>,
    pub iterations: usize,
}

fn check_metzler(m: &DMatrix<f64>) -> Result<()> {
    let (rows, cols) = m.shape();
    if rows != cols || rows == 0 {
        return Err(Error::NotSquare { rows, cols });
    }
    for row in 0..rows {
        for col in 0..cols {
            let value = m[(row, col)];
            if !value.is_finite() {
                return Err(Error::NonFinite { row, col });
            }
            if row != col && value < 0.0 {
                return Err(Error::NotMetzler { row, col });
            }
        }
    }
    Ok(())
}

fn pattern_irreducible(m: &DMatrix<f64>) -> bool {
    let n = m.nrows();
    let edges = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| i != j && m[(i, j)] > 0.0).map(move |j| (i, j)))
        .collect();
    RegionGraph::new(n, edges).is_ok_and(|g| g.is_strongly_connected())
}

/// Spectral abscissa of an irreducible Metzler matrix by shifted power
/// iteration.
///
/// `M + cI` with `c = 1 + max_i |m_ii|` is non-negative, irreducible and has
/// a positive diagonal, so it is primitive and power iteration from the
/// positive start `1/n` converges to its Perron pair. The shift is removed
/// from the value afterwards.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> Result<PerronPair> {
    check_metzler(m)?;
    if !pattern_irreducible(m) {
        return Err(Error::NotIrreducible);
    }
    let n = m.nrows();
    let shift = 1.0 + m.diagonal().amax();
    let mut shifted = m.clone();
    for i in 0..n {
        shifted[(i, i)] += shift;
    }

    let residual_tol = 1e-13 * shift;
    let mut y = DVector::from_element(n, 1.0 / n as f64);
    let mut previous = f64::NAN;
    for iteration in 1..=PERRON_MAX_ITER {
        let z = &shifted * &y;
        // y has unit 1-norm and is positive, so sum(z) is the Rayleigh-type
        // estimate of the Perron value.
        let value = z.sum();
        let residual = (&z - &y * value).amax();
        if (value - previous).abs() <= PERRON_TOL * value.abs() && residual <= residual_tol {
            return Ok(PerronPair {
                value: value - shift,
                vector: y,
                iterations: iteration,
            });
        }
        previous = value;
        y = z / value;
    }
    Err(Error::NoConvergence {
        iterations: PERRON_MAX_ITER,
    })
}

/// `B - D - L*`, the Jacobian of the infected dynamics at the disease-free
/// equilibrium.
pub fn infection_matrix(params: &EpidemicParams, lstar: &MobilityLaplacian) -> Result<DMatrix<f64>> {
    params.check_len(lstar.n())?;
    let mut m = -lstar.matrix().clone();
    for i in 0..params.n() {
        m[(i, i)] += params.beta[i] - params.delta[i];
    }
    Ok(m)
}

/// `A = (L* + D)^-1 B`, non-negative because `L* + D` is a non-singular
/// M-matrix whenever some `delta_i > 0` on an irreducible mobility graph.
pub fn next_generation_matrix(params: &EpidemicParams, lstar: &MobilityLaplacian) -> Result<DMatrix<f64>> {
    params.check_len(lstar.n())?;
    if params.delta.iter().all(|&d| d == 0.0) {
        return Err(Error::SingularMMatrix);
    }
    let n = params.n();
    let mut m_matrix = lstar.matrix().clone();
    for i in 0..n {
        m_matrix[(i, i)] += params.delta[i];
    }
    let b = DMatrix::from_diagonal(&DVector::from_column_slice(&params.beta));
    let mut a = m_matrix.lu().solve(&b).ok_or(Error::SingularMMatrix)?;
    // Entries are non-negative in exact arithmetic.
    a.iter_mut().for_each(|x| *x = x.max(0.0));
    Ok(a)
}

/// `R0 = rho((L* + D)^-1 B)`.
pub fn reproduction_number(params: &EpidemicParams, lstar: &MobilityLaplacian) -> Result<f64> {
    let a = next_generation_matrix(params, lstar)?;
    Ok(spectral_abscissa(&a)?.value)
}

/// `w = v / max_i v_i`.
pub fn laplacian_weights(v: &PopulationDistribution) -> DVector<f64> {
    v.vector() / v.vector().max()
}

/// `S = (W L* + L*^T W) / 2` with `W = diag(v / max_i v_i)`.
pub fn symmetrized_laplacian(lstar: &MobilityLaplacian, v: &PopulationDistribution) -> Result<DMatrix<f64>> {
    let n = lstar.n();
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            what: "v",
            expected: n,
            found: v.len(),
        });
    }
    let w = DMatrix::from_diagonal(&laplacian_weights(v));
    let wl = &w * lstar.matrix();
    Ok((&wl + wl.transpose()) * 0.5)
}

/// Eigenvalues of [`symmetrized_laplacian`] in ascending order.
pub fn symmetrized_spectrum(lstar: &MobilityLaplacian, v: &PopulationDistribution) -> Result<Vec<f64>> {
    let s = symmetrized_laplacian(lstar, v)?;
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(f64::total_cmp);
    Ok(eigenvalues)
}

/// Second-smallest eigenvalue of `(W L* + L*^T W) / 2`.
///
/// A single region has no mobility and only the zero eigenvalue; `0` is
/// returned there, which makes the `lambda2` condition collapse to `m >= 0`.
pub fn lambda2_weighted(lstar: &MobilityLaplacian, v: &PopulationDistribution) -> Result<f64> {
    let spectrum = symmetrized_spectrum(lstar, v)?;
    Ok(spectrum.get(1).copied().unwrap_or(0.0))
}

/// Stationary quantities of the mobility process that every stability test
/// needs.
#[derive(Debug, Clone)]
pub struct MobilityEquilibrium {
    pub v: PopulationDistribution,
    pub lstar: MobilityLaplacian,
    pub weights: DVector<f64>,
    pub lambda2: f64,
}

impl MobilityEquilibrium {
    pub fn new(g: &GeneratorMatrix) -> Result<Self> {
        let v = stationary_distribution(g)?;
        let lstar = mobility_laplacian(g, v.as_slice())?;
        let lambda2 = lambda2_weighted(&lstar, &v)?;
        Ok(Self {
            weights: laplacian_weights(&v),
            v,
            lstar,
            lambda2,
        })
    }

    pub fn n(&self) -> usize {
        self.v.len()
    }

    /// `-lambda2 / (4n + 1)`.
    pub fn m_lower(&self) -> f64 {
        -self.lambda2 / (4 * self.n() + 1) as f64
    }
}

/// Left-hand side of the `lambda2` sufficient condition:
/// `lambda2 / ((1 + sqrt(1 + lambda2 / sum_i w_i (delta_i - beta_i - m)))^2 n + 1) + m`.
///
/// When every node sits at the minimum slack the weighted sum vanishes; the
/// expression's limit there is `m`, which is what is returned.
pub fn lambda2_condition_margin(lambda2: f64, weights: &[f64], params: &EpidemicParams) -> f64 {
    let m = params.min_slack();
    let weighted: f64 = weights
        .iter()
        .zip(params.beta.iter().zip(&params.delta))
        .map(|(w, (b, d))| w * (d - b - m))
        .sum();
    if weighted == 0.0 {
        return m;
    }
    let n = weights.len() as f64;
    let root = 1.0 + (1.0 + lambda2 / weighted).sqrt();
    lambda2 / (root * root * n + 1.0) + m
}

/// The four node-wise / mobility-aware stability conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityConditions {
    /// Necessary: `delta_i > beta_i - nu_i` for every node.
    pub condition_i: bool,
    /// Necessary: `delta_i >= beta_i` for some node.
    pub condition_ii: bool,
    /// Sufficient: `delta_i >= beta_i` for every node.
    pub condition_iii: bool,
    /// Sufficient: the `lambda2` inequality.
    pub condition_iv: bool,
    pub condition_iv_margin: f64,
}

fn conditions_with(params: &EpidemicParams, g: &GeneratorMatrix, eq: &MobilityEquilibrium) -> StabilityConditions {
    let pairs = || params.beta.iter().zip(&params.delta);
    let margin = lambda2_condition_margin(eq.lambda2, eq.weights.as_slice(), params);
    StabilityConditions {
        condition_i: pairs().enumerate().all(|(i, (b, d))| *d > b - g.exit_rate(i)),
        condition_ii: pairs().any(|(b, d)| d >= b),
        condition_iii: pairs().all(|(b, d)| d >= b),
        condition_iv: margin >= 0.0,
        condition_iv_margin: margin,
    }
}

pub fn stability_conditions(params: &EpidemicParams, g: &GeneratorMatrix) -> Result<StabilityConditions> {
    params.check_len(g.n())?;
    let eq = MobilityEquilibrium::new(g)?;
    Ok(conditions_with(params, g, &eq))
}

/// `m_lower = -lambda2 / (4n + 1)`.
pub fn m_lower_bound(g: &GeneratorMatrix) -> Result<f64> {
    Ok(MobilityEquilibrium::new(g)?.m_lower())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    DiseaseFreeStable,
    EndemicStable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub n: usize,
    /// `mu(B - D - L*)`.
    pub mu: f64,
    /// `rho((L* + D)^-1 B)`; absent when every recovery rate is zero.
    pub r0: Option<f64>,
    pub lambda2: f64,
    pub m: f64,
    pub m_lower: f64,
    pub condition_i: bool,
    pub condition_ii: bool,
    pub condition_iii: bool,
    pub condition_iv: bool,
    pub condition_iv_margin: f64,
    pub verdict: Verdict,
}

impl StabilityReport {
    /// Fixed-order table for terminals.
    pub fn to_table(&self) -> String {
        let yes_no = |b: bool| if b { "holds" } else { "fails" };
        let r0 = self
            .r0
            .map_or_else(|| "undefined (all delta = 0)".to_owned(), |r| format!("{r:.6}"));
        let rows = [
            ("nodes", self.n.to_string()),
            ("mu(B-D-L*)", format!("{:.6e}", self.mu)),
            ("R0", r0),
            ("lambda2", format!("{:.6}", self.lambda2)),
            ("m", format!("{:.6}", self.m)),
            ("m_lower", format!("{:.6}", self.m_lower)),
            ("(i)   delta > beta - nu (nec.)", yes_no(self.condition_i).to_owned()),
            ("(ii)  some delta >= beta (nec.)", yes_no(self.condition_ii).to_owned()),
            ("(iii) all delta >= beta (suff.)", yes_no(self.condition_iii).to_owned()),
            ("(iv)  lambda2 bound (suff.)", yes_no(self.condition_iv).to_owned()),
            ("(iv)  margin", format!("{:.6e}", self.condition_iv_margin)),
            ("verdict", format!("{:?}", self.verdict)),
        ];
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        rows.iter().map(|(k, v)| format!("{k:<width$}  {v}\n")).collect()
    }
}

/// Full stability analysis of the disease-free equilibrium.
pub fn classify(params: &EpidemicParams, g: &GeneratorMatrix) -> Result<StabilityReport> {
    params.check_len(g.n())?;
    let eq = MobilityEquilibrium::new(g)?;
    let mu = spectral_abscissa(&infection_matrix(params, &eq.lstar)?)?.value;
    let r0 = match reproduction_number(params, &eq.lstar) {
        Ok(r0) => Some(r0),
        Err(Error::SingularMMatrix) => None,
        Err(e) => return Err(e),
    };
    let c = conditions_with(params, g, &eq);
    Ok(StabilityReport {
        n: g.n(),
        mu,
        r0,
        lambda2: eq.lambda2,
        m: params.min_slack(),
        m_lower: eq.m_lower(),
        condition_i: c.condition_i,
        condition_ii: c.condition_ii,
        condition_iii: c.condition_iii,
        condition_iv: c.condition_iv,
        condition_iv_margin: c.condition_iv_margin,
        verdict: if mu <= 0.0 {
            Verdict::DiseaseFreeStable
        } else {
            Verdict::EndemicStable
        },
    })
}

/// Curing rates that meet the `lambda2` condition with equality.
///
/// Nodes in `pinned` get `delta_i = beta_i + m`, the minimum slack. Every
/// other node gets `delta_i = beta_i + m + s` with the common surplus `s`
/// chosen so the weighted slack sum closes the inequality exactly. Feasible
/// iff `m_lower < m`. For `m >= 0` all nodes sit at `beta + m`.
pub fn curing_rates_for_lambda2_condition(
    g: &GeneratorMatrix,
    beta: &[f64],
    m: f64,
    pinned: &[usize],
) -> Result<Vec<f64>> {
    let n = g.n();
    if beta.len() != n {
        return Err(Error::DimensionMismatch {
            what: "beta",
            expected: n,
            found: beta.len(),
        });
    }
    if let Some(&i) = pinned.iter().find(|&&i| i >= n) {
        return Err(Error::InvalidParameter {
            name: "pinned",
            reason: format!("node {i} out of range"),
        });
    }
    if m >= 0.0 {
        return Ok(beta.iter().map(|b| b + m).collect());
    }
    if pinned.is_empty() || pinned.len() == n {
        return Err(Error::Infeasible(
            "a negative m needs at least one pinned and one free node".to_owned(),
        ));
    }
    let eq = MobilityEquilibrium::new(g)?;
    if m <= eq.m_lower() {
        return Err(Error::Infeasible(format!(
            "m = {m} is not above m_lower = {}",
            eq.m_lower()
        )));
    }

    // lambda2 / (X^2 n + 1) = -m  with  X = 1 + sqrt(1 + lambda2 / S).
    let lambda2 = eq.lambda2;
    let x = ((lambda2 / -m - 1.0) / n as f64).sqrt();
    let required = lambda2 / ((x - 1.0).powi(2) - 1.0);
    let free_weight: f64 = (0..n).filter(|i| !pinned.contains(i)).map(|i| eq.weights[i]).sum();
    let mut surplus = required / free_weight;

    let build = |surplus: f64| -> Vec<f64> {
        (0..n)
            .map(|i| {
                if pinned.contains(&i) {
                    beta[i] + m
                } else {
                    beta[i] + m + surplus
                }
            })
            .collect()
    };
    // Equality holds in exact arithmetic; nudge the surplus up by a few ulps
    // until the evaluated margin is non-negative.
    for _ in 0..64 {
        let delta = build(surplus);
        let params = EpidemicParams::new(beta.to_vec(), delta.clone())?;
        if lambda2_condition_margin(lambda2, eq.weights.as_slice(), &params) >= 0.0 {
            return Ok(delta);
        }
        surplus *= 1.0 + 4.0 * f64::EPSILON;
    }
    Err(Error::NoConvergence { iterations: 64 })
}
