//! Finite-population simulation of SIS dynamics under CTMC mobility.
//!
//! Each individual is susceptible or infected and sits in one region. Event
//! channels per region `k`:
//!
//! | event                         | rate                         |
//! |-------------------------------|------------------------------|
//! | recovery                      | `delta_k i_k`                |
//! | infection                     | `beta_k i_k s_k / (s_k + i_k)` |
//! | susceptible moves `k -> j`    | `q_kj s_k`                   |
//! | infected moves `k -> j`       | `q_kj i_k`                   |
//!
//! Infection is frequency dependent, so the mean field of the per-region
//! infected fraction is `beta p (1 - p)`.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::FractionTable;
use crate::error::{Error, Result};
use crate::mobility::GeneratorMatrix;
use crate::spectral::EpidemicParams;

/// Susceptible and infected head counts per region.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Population {
    pub susceptible: Vec<u64>,
    pub infected: Vec<u64>,
}

impl Population {
    pub fn new(susceptible: Vec<u64>, infected: Vec<u64>) -> Result<Self> {
        if susceptible.len() != infected.len() {
            return Err(Error::DimensionMismatch {
                what: "infected",
                expected: susceptible.len(),
                found: infected.len(),
            });
        }
        if susceptible.is_empty() {
            return Err(Error::InvalidParameter {
                name: "population",
                reason: "at least one region is required".to_owned(),
            });
        }
        Ok(Self { susceptible, infected })
    }

    /// Splits `total` individuals over regions in proportion to `x`
    /// (largest remainder) and infects `round(p_k * size_k)` in each.
    pub fn from_fractions(x: &[f64], p: &[f64], total: u64) -> Result<Self> {
        if x.len() != p.len() {
            return Err(Error::DimensionMismatch {
                what: "p0",
                expected: x.len(),
                found: p.len(),
            });
        }
        let sum: f64 = x.iter().sum();
        let quotas: Vec<f64> = x.iter().map(|xi| xi / sum * total as f64).collect();
        let mut sizes: Vec<u64> = quotas.iter().map(|q| q.floor() as u64).collect();
        let mut order: Vec<usize> = (0..x.len()).collect();
        order.sort_by(|&a, &b| {
            let (ra, rb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        let assigned: u64 = sizes.iter().sum();
        for &k in order.iter().take((total - assigned) as usize) {
            sizes[k] += 1;
        }
        let infected: Vec<u64> = sizes
            .iter()
            .zip(p)
            .map(|(&size, &pk)| ((pk.clamp(0.0, 1.0) * size as f64).round() as u64).min(size))
            .collect();
        let susceptible = sizes.iter().zip(&infected).map(|(s, i)| s - i).collect();
        Self::new(susceptible, infected)
    }

    pub fn n(&self) -> usize {
        self.susceptible.len()
    }

    pub fn size(&self, k: usize) -> u64 {
        self.susceptible[k] + self.infected[k]
    }

    pub fn total(&self) -> u64 {
        (0..self.n()).map(|k| self.size(k)).sum()
    }

    pub fn total_infected(&self) -> u64 {
        self.infected.iter().sum()
    }

    /// Infected fraction per region; `None` where the region is empty.
    pub fn infected_fractions(&self) -> Vec<Option<f64>> {
        (0..self.n())
            .map(|k| match self.size(k) {
                0 => None,
                size => Some(self.infected[k] as f64 / size as f64),
            })
            .collect()
    }

    /// Share of the whole population in each region.
    pub fn occupancy(&self) -> Vec<f64> {
        let total = self.total() as f64;
        (0..self.n()).map(|k| self.size(k) as f64 / total).collect()
    }
}

/// Populations sampled on a fixed time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledRun {
    pub times: Vec<f64>,
    pub states: Vec<Population>,
}

impl SampledRun {
    pub fn table(&self) -> FractionTable {
        FractionTable {
            n: self.states.first().map_or(0, Population::n),
            times: self.times.clone(),
            p: self
                .states
                .iter()
                .map(|s| {
                    s.infected_fractions()
                        .into_iter()
                        .map(|f| f.unwrap_or(f64::NAN))
                        .collect()
                })
                .collect(),
            x: self.states.iter().map(Population::occupancy).collect(),
        }
    }
}

/// Per-replica random stream: ChaCha8 keyed by `seed`, stream `replica`.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

fn check_inputs(pop: &Population, params: &EpidemicParams, g: &GeneratorMatrix) -> Result<()> {
    params.check_len(pop.n())?;
    if g.n() != pop.n() {
        return Err(Error::DimensionMismatch {
            what: "generator",
            expected: pop.n(),
            found: g.n(),
        });
    }
    g.ensure_irreducible()
}

/// Uniform grid `0, h, 2h, ...` closed by `t_end`.
pub fn sample_grid(t_end: f64, interval: f64) -> Result<Vec<f64>> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "t_end",
            reason: format!("must be positive, got {t_end}"),
        });
    }
    if !(interval > 0.0 && interval.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "sample_interval",
            reason: format!("must be positive, got {interval}"),
        });
    }
    let mut grid = Vec::new();
    let mut k = 0u64;
    loop {
        let t = k as f64 * interval;
        if t >= t_end * (1.0 - 1e-12) {
            break;
        }
        grid.push(t);
        k += 1;
    }
    grid.push(t_end);
    Ok(grid)
}

fn node_rate(pop: &Population, params: &EpidemicParams, g: &GeneratorMatrix, k: usize) -> [f64; 4] {
    let (s, i) = (pop.susceptible[k] as f64, pop.infected[k] as f64);
    let infection = if s + i > 0.0 {
        params.beta()[k] * i * s / (s + i)
    } else {
        0.0
    };
    let nu = g.exit_rate(k);
    [params.delta()[k] * i, infection, nu * s, nu * i]
}

/// Exact event-driven (direct method) simulation.
pub fn gillespie_run(
    pop0: &Population,
    params: &EpidemicParams,
    g: &GeneratorMatrix,
    t_end: f64,
    sample_interval: f64,
    seed: u64,
) -> Result<SampledRun> {
    check_inputs(pop0, params, g)?;
    let grid = sample_grid(t_end, sample_interval)?;
    Ok(gillespie_with_rng(pop0, params, g, &grid, &mut replica_rng(seed, 0)))
}

fn gillespie_with_rng<R: Rng>(
    pop0: &Population,
    params: &EpidemicParams,
    g: &GeneratorMatrix,
    grid: &[f64],
    rng: &mut R,
) -> SampledRun {
    let n = pop0.n();
    let mut pop = pop0.clone();
    let mut rates: Vec<[f64; 4]> = (0..n).map(|k| node_rate(&pop, params, g, k)).collect();
    let mut states = Vec::with_capacity(grid.len());
    let mut t = 0.0;

    for &sample_time in grid {
        loop {
            let total: f64 = rates.iter().flat_map(|r| r.iter()).sum();
            if total <= 0.0 {
                break;
            }
            let wait: f64 = rng.sample::<f64, _>(Exp1) / total;
            if t + wait > sample_time {
                // Memorylessness: discard the overshooting draw and resume
                // from the sample time.
                t = sample_time;
                break;
            }
            t += wait;

            let mut target = rng.gen::<f64>() * total;
            let mut chosen = None;
            'scan: for (k, node) in rates.iter().enumerate() {
                for (channel, &rate) in node.iter().enumerate() {
                    if target < rate {
                        chosen = Some((k, channel));
                        break 'scan;
                    }
                    target -= rate;
                }
            }
            // Rounding can leave `target` just past the last positive rate.
            let (k, channel) = chosen.unwrap_or_else(|| last_positive(&rates));

            match channel {
                0 => {
                    pop.infected[k] -= 1;
                    pop.susceptible[k] += 1;
                    rates[k] = node_rate(&pop, params, g, k);
                }
                1 => {
                    pop.susceptible[k] -= 1;
                    pop.infected[k] += 1;
                    rates[k] = node_rate(&pop, params, g, k);
                }
                _ => {
                    let j = pick_destination(g, k, rng);
                    let counts = if channel == 2 {
                        &mut pop.susceptible
                    } else {
                        &mut pop.infected
                    };
                    counts[k] -= 1;
                    counts[j] += 1;
                    rates[k] = node_rate(&pop, params, g, k);
                    rates[j] = node_rate(&pop, params, g, j);
                }
            }
        }
        states.push(pop.clone());
    }
    SampledRun {
        times: grid.to_vec(),
        states,
    }
}

fn last_positive(rates: &[[f64; 4]]) -> (usize, usize) {
    rates
        .iter()
        .enumerate()
        .rev()
        .find_map(|(k, r)| r.iter().rposition(|&rate| rate > 0.0).map(|c| (k, c)))
        .expect("total rate is positive")
}

fn pick_destination<R: Rng>(g: &GeneratorMatrix, k: usize, rng: &mut R) -> usize {
    let outgoing = g.outgoing(k);
    let mut target = rng.gen::<f64>() * g.exit_rate(k);
    for &(j, rate) in outgoing {
        if target < rate {
            return j;
        }
        target -= rate;
    }
    outgoing.last().expect("irreducible generator has exits").0
}

/// Draws the channel counts of `count` individuals that each independently
/// take channel `c` with probability `probs[c]` (or stay put), as a chain of
/// conditional binomials.
fn multinomial<R: Rng>(count: u64, probs: &[f64], out: &mut Vec<u64>, rng: &mut R) {
    out.clear();
    let mut remaining = count;
    let mut mass = 1.0;
    for &p in probs {
        if remaining == 0 || p <= 0.0 {
            out.push(0);
            continue;
        }
        let conditional = (p / mass).clamp(0.0, 1.0);
        let draw = if conditional >= 1.0 {
            remaining
        } else {
            Binomial::new(remaining, conditional)
                .expect("probability in [0, 1]")
                .sample(rng)
        };
        out.push(draw);
        remaining -= draw;
        mass -= p;
    }
}

/// Fixed-step simulation: per step every individual independently migrates
/// along edge `(k, j)` w.p. `q_kj dt`, changes state (infection w.p.
/// `beta_k i_k / (s_k + i_k) dt`, recovery w.p. `delta_k dt`) or stays, at
/// most one event each. Rates are frozen at the start of the step.
pub fn fixed_step_run(
    pop0: &Population,
    params: &EpidemicParams,
    g: &GeneratorMatrix,
    t_end: f64,
    dt: f64,
    sample_interval: f64,
    seed: u64,
) -> Result<SampledRun> {
    check_inputs(pop0, params, g)?;
    let plan = FixedStepPlan::new(params, g, t_end, dt, sample_interval)?;
    Ok(fixed_step_with_rng(pop0, params, g, &plan, &mut replica_rng(seed, 0)))
}

struct FixedStepPlan {
    dt: f64,
    steps: u64,
    sample_every: u64,
    grid: Vec<f64>,
}

impl FixedStepPlan {
    fn new(params: &EpidemicParams, g: &GeneratorMatrix, t_end: f64, dt: f64, sample_interval: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("must be positive, got {dt}"),
            });
        }
        for k in 0..g.n() {
            let probability = (g.exit_rate(k) + params.beta()[k].max(params.delta()[k])) * dt;
            if probability > 1.0 {
                return Err(Error::StepTooLarge { node: k, probability });
            }
        }
        let whole = |ratio: f64, name: &'static str| -> Result<u64> {
            let rounded = ratio.round();
            if rounded < 1.0 || (ratio - rounded).abs() > 1e-9 * ratio.max(1.0) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be a positive multiple of dt = {dt}"),
                });
            }
            Ok(rounded as u64)
        };
        let steps = whole(t_end / dt, "t_end")?;
        let sample_every = whole(sample_interval / dt, "sample_interval")?;
        let grid = (0..=steps)
            .filter(|s| s % sample_every == 0 || *s == steps)
            .map(|s| if s == steps { t_end } else { s as f64 * dt })
            .collect();
        Ok(Self {
            dt,
            steps,
            sample_every,
            grid,
        })
    }
}

fn fixed_step_with_rng<R: Rng>(
    pop0: &Population,
    params: &EpidemicParams,
    g: &GeneratorMatrix,
    plan: &FixedStepPlan,
    rng: &mut R,
) -> SampledRun {
    let n = pop0.n();
    let dt = plan.dt;
    let mut pop = pop0.clone();
    let mut states = vec![pop.clone()];
    let mut probs = Vec::new();
    let mut counts = Vec::new();
    let mut next_s = vec![0u64; n];
    let mut next_i = vec![0u64; n];

    for step in 1..=plan.steps {
        next_s.copy_from_slice(&pop.susceptible);
        next_i.copy_from_slice(&pop.infected);
        for k in 0..n {
            let outgoing = g.outgoing(k);
            let size = pop.size(k);
            if size == 0 {
                continue;
            }
            let share = pop.infected[k] as f64 / size as f64;
            for infected in [false, true] {
                let count = if infected { pop.infected[k] } else { pop.susceptible[k] };
                if count == 0 {
                    continue;
                }
                probs.clear();
                probs.extend(outgoing.iter().map(|&(_, q)| q * dt));
                probs.push(if infected {
                    params.delta()[k] * dt
                } else {
                    params.beta()[k] * share * dt
                });
                multinomial(count, &probs, &mut counts, rng);

                let (from, to) = if infected {
                    (&mut next_i, &mut next_s)
                } else {
                    (&mut next_s, &mut next_i)
                };
                for (&(j, _), &moved) in outgoing.iter().zip(&counts) {
                    from[k] -= moved;
                    from[j] += moved;
                }
                let switched = *counts.last().expect("state-change channel");
                from[k] -= switched;
                to[k] += switched;
            }
        }
        pop.susceptible.copy_from_slice(&next_s);
        pop.infected.copy_from_slice(&next_i);
        if step % plan.sample_every == 0 || step == plan.steps {
            states.push(pop.clone());
        }
    }
    SampledRun {
        times: plan.grid.clone(),
        states,
    }
}

/// Which simulator an ensemble uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method", deny_unknown_fields)]
pub enum Method {
    Gillespie,
    FixedStep { dt: f64 },
}

/// Replica-averaged infected fractions.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    /// `mean_p[t][k]`; `None` when region `k` was empty in every replica.
    pub mean_p: Vec<Vec<Option<f64>>>,
    /// Mean population share per region.
    pub mean_x: Vec<Vec<f64>>,
    /// Replicas excluded from `mean_p[t][k]` because the region was empty.
    pub empty_samples: Vec<Vec<usize>>,
    pub replicas: usize,
    pub seed: u64,
}

impl EnsembleResult {
    pub fn table(&self) -> FractionTable {
        FractionTable {
            n: self.mean_x.first().map_or(0, Vec::len),
            times: self.times.clone(),
            p: self
                .mean_p
                .iter()
                .map(|row| row.iter().map(|v| v.unwrap_or(f64::NAN)).collect())
                .collect(),
            x: self.mean_x.clone(),
        }
    }
}

/// Averages per-region infected fractions across replicas sharing a grid.
pub fn ensemble_average(runs: &[SampledRun], seed: u64) -> Result<EnsembleResult> {
    let first = runs.first().ok_or(Error::InvalidParameter {
        name: "runs",
        reason: "at least one replica is required".to_owned(),
    })?;
    if let Some(replica) = runs
        .iter()
        .position(|r| r.times != first.times || r.states.len() != first.times.len())
    {
        return Err(Error::GridMismatch { replica });
    }
    let n = first.states[0].n();
    let samples = first.times.len();
    let mut mean_p = Vec::with_capacity(samples);
    let mut mean_x = Vec::with_capacity(samples);
    let mut empty_samples = Vec::with_capacity(samples);
    for t in 0..samples {
        let mut sum_p = vec![0.0; n];
        let mut defined = vec![0usize; n];
        let mut sum_x = vec![0.0; n];
        for run in runs {
            let state = &run.states[t];
            for (k, f) in state.infected_fractions().into_iter().enumerate() {
                if let Some(f) = f {
                    sum_p[k] += f;
                    defined[k] += 1;
                }
            }
            for (k, x) in state.occupancy().into_iter().enumerate() {
                sum_x[k] += x;
            }
        }
        mean_p.push(
            sum_p
                .iter()
                .zip(&defined)
                .map(|(&s, &c)| (c > 0).then(|| s / c as f64))
                .collect(),
        );
        mean_x.push(sum_x.iter().map(|s| s / runs.len() as f64).collect());
        empty_samples.push(defined.iter().map(|&c| runs.len() - c).collect());
    }
    Ok(EnsembleResult {
        times: first.times.clone(),
        mean_p,
        mean_x,
        empty_samples,
        replicas: runs.len(),
        seed,
    })
}

/// Runs `replicas` independent simulations in parallel, replica `r` on
/// stream `r` of `seed`, and returns them in replica order.
#[allow(clippy::too_many_arguments)]
pub fn run_replicas(
    pop0: &Population,
    params: &EpidemicParams,
    g: &GeneratorMatrix,
    method: Method,
    t_end: f64,
    sample_interval: f64,
    replicas: usize,
    seed: u64,
) -> Result<Vec<SampledRun>> {
    check_inputs(pop0, params, g)?;
    match method {
        Method::Gillespie => {
            let grid = sample_grid(t_end, sample_interval)?;
            Ok((0..replicas)
                .into_par_iter()
                .map(|r| gillespie_with_rng(pop0, params, g, &grid, &mut replica_rng(seed, r as u64)))
                .collect())
        }
        Method::FixedStep { dt } => {
            let plan = FixedStepPlan::new(params, g, t_end, dt, sample_interval)?;
            Ok((0..replicas)
                .into_par_iter()
                .map(|r| fixed_step_with_rng(pop0, params, g, &plan, &mut replica_rng(seed, r as u64)))
                .collect())
        }
    }
}

/// [`run_replicas`] followed by [`ensemble_average`].
#[allow(clippy::too_many_arguments)]
pub fn run_ensemble(
    pop0: &Population,
    params: &EpidemicParams,
    g: &GeneratorMatrix,
    method: Method,
    t_end: f64,
    sample_interval: f64,
    replicas: usize,
    seed: u64,
) -> Result<EnsembleResult> {
    let runs = run_replicas(pop0, params, g, method, t_end, sample_interval, replicas, seed)?;
    ensemble_average(&runs, seed)
}
