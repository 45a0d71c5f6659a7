//! Deterministic continuum model and its fixed-step RK4 integration.

use std::fmt::Write as _;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::format::g17;
use crate::mobility::GeneratorMatrix;
use crate::spectral::EpidemicParams;

/// Slack allowed outside `[0, 1]` before a step is rejected; smaller
/// excursions are floating-point drift and are clipped.
pub const BOX_SLACK: f64 = 1e-9;
/// Tolerance on `sum(x) = 1` along a trajectory.
pub const TRAJECTORY_SIMPLEX_TOL: f64 = 1e-9;

/// Infected fractions `p` and population fractions `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub p: DVector<f64>,
    pub x: DVector<f64>,
}

impl ModelState {
    pub fn new(p: DVector<f64>, x: DVector<f64>) -> Result<Self> {
        if p.len() != x.len() {
            return Err(Error::DimensionMismatch {
                what: "p",
                expected: x.len(),
                found: p.len(),
            });
        }
        if let Some(node) = p.iter().position(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::InvalidParameter {
                name: "p",
                reason: format!("p[{node}] = {} outside [0, 1]", p[node]),
            });
        }
        if let Some(index) = x.iter().position(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::ZeroPopulationEntry { index });
        }
        let sum = x.sum();
        if (sum - 1.0).abs() > TRAJECTORY_SIMPLEX_TOL {
            return Err(Error::NotNormalized { sum });
        }
        Ok(Self { p, x })
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }
}

fn check_dims(n: usize, params: &EpidemicParams, g: &GeneratorMatrix) -> Result<()> {
    params.check_len(n)?;
    if g.n() != n {
        return Err(Error::DimensionMismatch {
            what: "generator",
            expected: n,
            found: g.n(),
        });
    }
    Ok(())
}

/// Node-wise right-hand side:
/// `p_i' = -delta_i p_i + beta_i p_i (1 - p_i) + sum_j q_ji (p_j - p_i) x_j / x_i`
/// and `x' = Q^T x`.
fn rhs_into(
    p: &[f64],
    x: &[f64],
    params: &EpidemicParams,
    g: &GeneratorMatrix,
    dp: &mut [f64],
    dx: &mut [f64],
) -> Result<()> {
    let (beta, delta) = (params.beta(), params.delta());
    for i in 0..p.len() {
        if !(x[i] > 0.0) {
            return Err(Error::ZeroPopulationEntry { index: i });
        }
        let mut mobility = 0.0;
        let mut inflow = 0.0;
        for &(j, q_ji) in g.incoming(i) {
            mobility += q_ji * (p[j] - p[i]) * x[j];
            inflow += q_ji * x[j];
        }
        dp[i] = -delta[i] * p[i] + beta[i] * p[i] * (1.0 - p[i]) + mobility / x[i];
        dx[i] = inflow - g.exit_rate(i) * x[i];
    }
    Ok(())
}

/// `(dp, dx)` at `state`.
pub fn rhs(state: &ModelState, params: &EpidemicParams, g: &GeneratorMatrix) -> Result<(DVector<f64>, DVector<f64>)> {
    let n = state.n();
    check_dims(n, params, g)?;
    let mut dp = DVector::zeros(n);
    let mut dx = DVector::zeros(n);
    rhs_into(
        state.p.as_slice(),
        state.x.as_slice(),
        params,
        g,
        dp.as_mut_slice(),
        dx.as_mut_slice(),
    )?;
    Ok((dp, dx))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationOptions {
    pub t_end: f64,
    pub dt: f64,
    /// Keep every `output_stride`-th step; the final state is always kept.
    pub output_stride: usize,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        Self {
            t_end: 200.0,
            dt: 0.01,
            output_stride: 10,
        }
    }
}

impl IntegrationOptions {
    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("must be positive, got {}", self.dt),
            });
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "t_end",
                reason: format!("must be positive, got {}", self.t_end),
            });
        }
        if self.output_stride == 0 {
            return Err(Error::InvalidParameter {
                name: "output_stride",
                reason: "must be at least 1".to_owned(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<ModelState>,
    pub params: EpidemicParams,
    pub generator: GeneratorMatrix,
    /// Number of components clipped back into `[0, 1]` after a step.
    pub clipped: usize,
}

impl Trajectory {
    pub fn final_state(&self) -> &ModelState {
        self.states.last().expect("trajectory has at least the initial state")
    }

    pub fn table(&self) -> FractionTable {
        FractionTable {
            n: self.generator.n(),
            times: self.times.clone(),
            p: self.states.iter().map(|s| s.p.iter().copied().collect()).collect(),
            x: self.states.iter().map(|s| s.x.iter().copied().collect()).collect(),
        }
    }
}

/// RK4 integrator state for the joint `(p, x)` system.
struct Rk4<'a> {
    params: &'a EpidemicParams,
    g: &'a GeneratorMatrix,
    n: usize,
    k: [Vec<f64>; 4],
    stage: Vec<f64>,
    clipped: usize,
}

impl<'a> Rk4<'a> {
    fn new(params: &'a EpidemicParams, g: &'a GeneratorMatrix) -> Self {
        let n = g.n();
        Self {
            params,
            g,
            n,
            k: std::array::from_fn(|_| vec![0.0; 2 * n]),
            stage: vec![0.0; 2 * n],
            clipped: 0,
        }
    }

    fn eval(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        let (p, x) = y.split_at(self.n);
        let (dp, dx) = out.split_at_mut(self.n);
        rhs_into(p, x, self.params, self.g, dp, dx)
    }

    /// Advances `y = [p; x]` by `h`, then clips `p` back into the box.
    fn step(&mut self, y: &mut [f64], h: f64, t_after: f64) -> Result<()> {
        let mut k = std::mem::take(&mut self.k);
        self.eval(y, &mut k[0])?;
        for (stage, scale) in [(1, 0.5), (2, 0.5), (3, 1.0)] {
            for (s, (yi, ki)) in self.stage.iter_mut().zip(y.iter().zip(&k[stage - 1])) {
                *s = yi + scale * h * ki;
            }
            let stage_y = std::mem::take(&mut self.stage);
            let result = self.eval(&stage_y, &mut k[stage]);
            self.stage = stage_y;
            result?;
        }
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += h / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
        }
        self.k = k;

        for (node, pi) in y[..self.n].iter_mut().enumerate() {
            if *pi < 0.0 || *pi > 1.0 {
                if *pi < -BOX_SLACK || *pi > 1.0 + BOX_SLACK || pi.is_nan() {
                    return Err(Error::StateEscapedBox {
                        time: t_after,
                        node,
                        value: *pi,
                    });
                }
                *pi = pi.clamp(0.0, 1.0);
                self.clipped += 1;
            }
        }
        if let Some(index) = y[self.n..].iter().position(|&xi| !(xi > 0.0)) {
            return Err(Error::ZeroPopulationEntry { index });
        }
        Ok(())
    }
}

fn pack(state: &ModelState) -> Vec<f64> {
    state.p.iter().chain(state.x.iter()).copied().collect()
}

fn unpack(y: &[f64], n: usize) -> ModelState {
    ModelState {
        p: DVector::from_column_slice(&y[..n]),
        x: DVector::from_column_slice(&y[n..]),
    }
}

/// Classic fixed-step RK4 from `t = 0` to `t_end`. The last step is
/// shortened so the final sample lands exactly on `t_end`.
pub fn integrate(
    initial: &ModelState,
    params: &EpidemicParams,
    g: &GeneratorMatrix,
    options: &IntegrationOptions,
) -> Result<Trajectory> {
    options.validate()?;
    let n = initial.n();
    check_dims(n, params, g)?;

    let full_steps = {
        let ratio = options.t_end / options.dt;
        // Absorb representation error in t_end / dt.
        let rounded = ratio.round();
        if (ratio - rounded).abs() <= 1e-9 * ratio.max(1.0) {
            rounded as usize
        } else {
            ratio.floor() as usize
        }
    };
    let remainder = options.t_end - full_steps as f64 * options.dt;
    let has_partial = remainder > 1e-12 * options.t_end;

    let mut solver = Rk4::new(params, g);
    let mut y = pack(initial);
    let mut times = vec![0.0];
    let mut states = vec![initial.clone()];
    for step in 1..=full_steps {
        let t = if step == full_steps && !has_partial {
            options.t_end
        } else {
            step as f64 * options.dt
        };
        solver.step(&mut y, options.dt, t)?;
        if step % options.output_stride == 0 || (step == full_steps && !has_partial) {
            times.push(t);
            states.push(unpack(&y, n));
        }
    }
    if has_partial {
        solver.step(&mut y, remainder, options.t_end)?;
        times.push(options.t_end);
        states.push(unpack(&y, n));
    }
    Ok(Trajectory {
        times,
        states,
        params: params.clone(),
        generator: g.clone(),
        clipped: solver.clipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitOptions {
    pub dt: f64,
    pub t_max: f64,
    /// Stop once `|dp|_inf + |dx|_inf` falls below this.
    pub tol: f64,
}

impl Default for LimitOptions {
    fn default() -> Self {
        Self {
            dt: 0.01,
            t_max: 500.0,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitStatus {
    Converged,
    Timeout,
}

#[derive(Debug, Clone)]
pub struct LimitState {
    pub state: ModelState,
    pub status: LimitStatus,
    pub time: f64,
}

/// Integrates until the vector field is below `tol` or `t_max` is reached.
pub fn limit_state(
    g: &GeneratorMatrix,
    params: &EpidemicParams,
    initial: &ModelState,
    options: &LimitOptions,
) -> Result<LimitState> {
    IntegrationOptions {
        t_end: options.t_max,
        dt: options.dt,
        output_stride: 1,
    }
    .validate()?;
    let n = initial.n();
    check_dims(n, params, g)?;

    let mut solver = Rk4::new(params, g);
    let mut y = pack(initial);
    let mut derivative = vec![0.0; 2 * n];
    let mut step = 0usize;
    loop {
        let t = step as f64 * options.dt;
        solver.eval(&y, &mut derivative)?;
        let (dp, dx) = derivative.split_at(n);
        let size = dp.iter().fold(0.0f64, |a, v| a.max(v.abs())) + dx.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if size < options.tol {
            return Ok(LimitState {
                state: unpack(&y, n),
                status: LimitStatus::Converged,
                time: t,
            });
        }
        if t >= options.t_max {
            return Ok(LimitState {
                state: unpack(&y, n),
                status: LimitStatus::Timeout,
                time: t,
            });
        }
        step += 1;
        solver.step(&mut y, options.dt, step as f64 * options.dt)?;
    }
}

/// Sampled fractions in the shared CSV layout `t,p_1..p_n,x_1..x_n`.
///
/// Deterministic trajectories and stochastic ensemble means both export
/// through this type. Undefined stochastic fractions (empty nodes) are NaN
/// and print as `nan`.
#[derive(Debug, Clone, PartialEq)]
pub struct FractionTable {
    pub n: usize,
    pub times: Vec<f64>,
    pub p: Vec<Vec<f64>>,
    pub x: Vec<Vec<f64>>,
}

impl FractionTable {
    pub fn header(n: usize) -> String {
        let mut header = String::from("t");
        for prefix in ["p", "x"] {
            for i in 1..=n {
                let _ = write!(header, ",{prefix}_{i}");
            }
        }
        header
    }

    pub fn to_csv(&self) -> String {
        let mut out = Self::header(self.n);
        out.push('\n');
        for ((t, p), x) in self.times.iter().zip(&self.p).zip(&self.x) {
            out.push_str(&g17(*t));
            for v in p.iter().chain(x) {
                out.push(',');
                out.push_str(&g17(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines();
        let header = lines.next().ok_or("empty CSV")?;
        let columns = header.split(',').count();
        if columns < 3 || (columns - 1) % 2 != 0 {
            return Err(format!("malformed header `{header}`"));
        }
        let n = (columns - 1) / 2;
        if header != Self::header(n) {
            return Err(format!("unexpected header `{header}`"));
        }
        let mut table = Self {
            n,
            times: Vec::new(),
            p: Vec::new(),
            x: Vec::new(),
        };
        for (line_no, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
            let values = line
                .split(',')
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| format!("line {}: {e}", line_no + 2))?;
            if values.len() != columns {
                return Err(format!("line {}: expected {columns} fields", line_no + 2));
            }
            table.times.push(values[0]);
            table.p.push(values[1..=n].to_vec());
            table.x.push(values[n + 1..].to_vec());
        }
        Ok(table)
    }
}
