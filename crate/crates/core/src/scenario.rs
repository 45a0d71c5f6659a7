//! Scenario files and the run/reproduce flows behind the CLI.
//!
//! A scenario is a JSON document (`"schema": 1`, unknown keys rejected)
//! naming a mobility graph, a rate assignment, epidemic parameters, initial
//! conditions and a mode. The bundled figure scenarios live in
//! `scenarios/*.json` and are compiled into the binary.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dynamics::{integrate, FractionTable, IntegrationOptions, ModelState};
use crate::equilibria::{endemic_fixed_point, EndemicSolution, DEFAULT_TOL};
use crate::error::Error;
use crate::mobility::{
    make_graph, metropolis_hastings_rates, stationary_distribution, uniform_out_rates, GeneratorMatrix, GraphDocument,
    GraphKind, PopulationDistribution, RegionGraph,
};
use crate::plot::line_chart;
use crate::spectral::{
    classify, curing_rates_for_lambda2_condition, EpidemicParams, MobilityEquilibrium, StabilityReport, Verdict,
};
use crate::stochastic::{run_ensemble, EnsembleResult, Method, Population};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("{0}")]
    UnknownFigure(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Model(#[from] Error),

    #[error("expectation check failed: {0}")]
    CheckFailed(String),
}

impl ScenarioError {
    fn config(field: impl Into<String>, message: impl fmt::Display) -> Self {
        Self::Config {
            field: field.into(),
            message: message.to_string(),
        }
    }

    /// 0 success, 2 config error, 3 numerical failure, 4 regime error,
    /// 5 a figure-level expectation did not hold.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } | Self::UnknownFigure(_) | Self::Io { .. } => 2,
            Self::CheckFailed(_) => 5,
            Self::Model(e) => match e {
                Error::NotEndemicRegime { .. } => 4,
                Error::NoConvergence { .. }
                | Error::StateEscapedBox { .. }
                | Error::ResidualTooLarge { .. }
                | Error::StepTooLarge { .. }
                | Error::SingularSystem
                | Error::SingularMMatrix
                | Error::DegenerateSolution { .. } => 3,
                _ => 2,
            },
        }
    }
}

type Result<T, E = ScenarioError> = std::result::Result<T, E>;

/// A number applied to every node, or one value per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerNode {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl PerNode {
    fn expand(&self, n: usize, field: &str) -> Result<Vec<f64>> {
        match self {
            Self::Scalar(v) => Ok(vec![*v; n]),
            Self::Vector(v) if v.len() == n => Ok(v.clone()),
            Self::Vector(v) => Err(ScenarioError::config(
                field,
                format!("expected {n} values (one per node), got {}", v.len()),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphSpec {
    Topology { kind: GraphKind, n: usize },
    Explicit(GraphDocument),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetSpec {
    Named(NamedTarget),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedTarget {
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RateSpec {
    /// `q_ij = nu_i / outdegree(i)`.
    UniformOut {
        nu: PerNode,
    },
    MetropolisHastings {
        target: TargetSpec,
        base_rate: f64,
    },
}

/// Curing rates chosen to meet the `lambda2` condition with equality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lambda2Delta {
    /// `m = m_factor * m_lower`.
    pub m_factor: f64,
    /// 1-based nodes held at the minimum slack.
    pub pinned: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeltaSpec {
    Rates(PerNode),
    FromLambda2Condition { lambda2_condition: Lambda2Delta },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Deterministic,
    Stochastic,
    Analyze,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StochasticMethod {
    #[default]
    FixedStep,
    Gillespie,
}

/// Output file names, relative to the output directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    pub trajectory_csv: Option<String>,
    pub plot_svg: Option<String>,
    pub report_json: Option<String>,
    /// Setting this demands an endemic equilibrium; a disease-free regime is
    /// then an error.
    pub endemic_json: Option<String>,
    pub deterministic_csv: Option<String>,
    pub provenance: Option<String>,
}

/// Figure-level outcomes checked after a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectations {
    pub verdict: Option<Verdict>,
    pub condition_iv: Option<bool>,
    /// `|p(t_end)|_inf` below this.
    pub final_p_below: Option<f64>,
    /// `|p(t_end) - p*|_inf` below this.
    pub final_p_near_endemic: Option<f64>,
    /// `|x(t_end) - target|_inf` below this (Metropolis-Hastings target, or
    /// `v` otherwise).
    pub final_x_near_target: Option<f64>,
    /// Ensemble mean within this of the deterministic trajectory for
    /// `t >= gap_from`.
    pub ensemble_gap_below: Option<f64>,
    pub gap_from: Option<f64>,
}

fn default_p0() -> PerNode {
    PerNode::Scalar(0.01)
}
fn default_t_end() -> f64 {
    200.0
}
fn default_dt() -> f64 {
    0.01
}
fn default_sample_interval() -> f64 {
    1.0
}
fn default_replicas() -> usize {
    20
}
fn default_population() -> u64 {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema: u32,
    pub name: String,
    #[serde(default)]
    pub description: Option<String>,
    /// Values the scenario fixes that the source figure does not state.
    #[serde(default)]
    pub assumptions: Vec<String>,
    pub graph: GraphSpec,
    #[serde(default)]
    pub rates: Option<RateSpec>,
    pub beta: PerNode,
    pub delta: DeltaSpec,
    #[serde(default = "default_p0")]
    pub p0: PerNode,
    /// Defaults to the stationary distribution.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    pub mode: Mode,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_sample_interval")]
    pub sample_interval: f64,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    /// Total population is this times `n`, split according to `x0`.
    #[serde(default = "default_population")]
    pub population_per_node: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub method: StochasticMethod,
    /// Stochastic mode: also integrate the continuum model from the same
    /// initial fractions.
    #[serde(default)]
    pub compare_deterministic: bool,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub expect: Expectations,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ScenarioError::config(if path.is_empty() { ".".to_owned() } else { path }, e.into_inner())
        })?;
        if config.schema != SCHEMA_VERSION {
            return Err(ScenarioError::config(
                "schema",
                format!("unsupported schema {}, expected {SCHEMA_VERSION}", config.schema),
            ));
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            context: format!("reading {}", path.display()),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Resolves graph, rates and parameters into model objects.
    pub fn build(&self) -> Result<Model> {
        let (graph, explicit) = match &self.graph {
            GraphSpec::Topology { kind, n } => (
                make_graph(*kind, *n).map_err(|e| ScenarioError::config("graph", e))?,
                None,
            ),
            GraphSpec::Explicit(doc) => (doc.graph().map_err(|e| ScenarioError::config("graph", e))?, Some(doc)),
        };
        let n = graph.n();
        let mut target = None;
        let generator = match (&self.rates, explicit) {
            (Some(_), Some(doc)) if doc.rates.is_some() => {
                return Err(ScenarioError::config("rates", "graph already lists explicit rates"));
            }
            (None, Some(doc)) => doc.generator().map_err(|e| ScenarioError::config("graph.rates", e))?,
            (None, None) => return Err(ScenarioError::config("rates", "a rate assignment is required")),
            (Some(spec), _) => {
                let (q, t) = build_rates(&graph, spec)?;
                target = t;
                q
            }
        };
        if !generator.is_irreducible() {
            return Err(ScenarioError::config("graph", Error::NotIrreducible));
        }

        let beta = self.beta.expand(n, "beta")?;
        let delta = match &self.delta {
            DeltaSpec::Rates(rates) => rates.expand(n, "delta")?,
            DeltaSpec::FromLambda2Condition { lambda2_condition } => {
                let field = "delta.lambda2_condition";
                let pinned = lambda2_condition
                    .pinned
                    .iter()
                    .map(|&i| {
                        if (1..=n).contains(&i) {
                            Ok(i - 1)
                        } else {
                            Err(ScenarioError::config(
                                format!("{field}.pinned"),
                                format!("node {i} not in 1..={n}"),
                            ))
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                let eq = MobilityEquilibrium::new(&generator)?;
                let m = lambda2_condition.m_factor * eq.m_lower();
                curing_rates_for_lambda2_condition(&generator, &beta, m, &pinned)
                    .map_err(|e| ScenarioError::config(field, e))?
            }
        };
        let params = EpidemicParams::new(beta, delta).map_err(|e| match &e {
            Error::InvalidParameter { name, .. } => ScenarioError::config(*name, e.clone()),
            _ => ScenarioError::config("delta", e),
        })?;

        let p0 = self.p0.expand(n, "p0")?;
        if let Some(i) = p0.iter().position(|p| !(0.0..=1.0).contains(p)) {
            return Err(ScenarioError::config(
                "p0",
                format!("p0[{i}] = {} outside [0, 1]", p0[i]),
            ));
        }
        let x0 = match &self.x0 {
            Some(x) if x.len() != n => {
                return Err(ScenarioError::config(
                    "x0",
                    format!("expected {n} values, got {}", x.len()),
                ));
            }
            Some(x) => PopulationDistribution::new(DVector::from_column_slice(x))
                .map_err(|e| ScenarioError::config("x0", e))?
                .into_inner(),
            None => stationary_distribution(&generator)?.into_inner(),
        };
        let initial = ModelState::new(DVector::from_vec(p0), x0).map_err(|e| ScenarioError::config("x0", e))?;

        if self.mode == Mode::Stochastic {
            if self.replicas == 0 {
                return Err(ScenarioError::config("replicas", "must be at least 1"));
            }
            if self.population_per_node == 0 {
                return Err(ScenarioError::config("population_per_node", "must be at least 1"));
            }
        }
        for (field, value) in [
            ("t_end", self.t_end),
            ("dt", self.dt),
            ("sample_interval", self.sample_interval),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ScenarioError::config(field, format!("must be positive, got {value}")));
            }
        }

        Ok(Model {
            generator,
            params,
            initial,
            target,
        })
    }

    fn output_stride(&self) -> usize {
        ((self.sample_interval / self.dt).round() as usize).max(1)
    }
}

fn build_rates(graph: &RegionGraph, spec: &RateSpec) -> Result<(GeneratorMatrix, Option<PopulationDistribution>)> {
    let n = graph.n();
    match spec {
        RateSpec::UniformOut { nu } => {
            let nu = nu.expand(n, "rates.nu")?;
            let q = uniform_out_rates(graph, &nu).map_err(|e| ScenarioError::config("rates", e))?;
            Ok((q, None))
        }
        RateSpec::MetropolisHastings { target, base_rate } => {
            let target = match target {
                TargetSpec::Named(NamedTarget::Uniform) => PopulationDistribution::uniform(n),
                TargetSpec::Vector(t) if t.len() != n => {
                    return Err(ScenarioError::config(
                        "rates.target",
                        format!("expected {n} values, got {}", t.len()),
                    ));
                }
                TargetSpec::Vector(t) => PopulationDistribution::normalized(DVector::from_column_slice(t))
                    .map_err(|e| ScenarioError::config("rates.target", e))?,
            };
            let q =
                metropolis_hastings_rates(graph, &target, *base_rate).map_err(|e| ScenarioError::config("rates", e))?;
            Ok((q, Some(target)))
        }
    }
}

/// Resolved scenario.
#[derive(Debug, Clone)]
pub struct Model {
    pub generator: GeneratorMatrix,
    pub params: EpidemicParams,
    pub initial: ModelState,
    /// Metropolis-Hastings target, when the rates were built from one.
    pub target: Option<PopulationDistribution>,
}

/// Which artefacts to write.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    Csv,
    Svg,
    Json,
    #[default]
    All,
}

impl OutputFormat {
    fn wants(self, other: OutputFormat) -> bool {
        self == OutputFormat::All || self == other
    }
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "svg" => Ok(Self::Svg),
            "json" => Ok(Self::Json),
            "all" => Ok(Self::All),
            _ => Err(format!("unknown format `{s}` (csv, svg, json, all)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub format: OutputFormat,
    /// Forces analyze mode regardless of the config.
    pub analyze: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("out"),
            seed: None,
            format: OutputFormat::All,
            analyze: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub name: String,
    pub mode: Mode,
    pub written: Vec<PathBuf>,
    pub report: Option<StabilityReport>,
    pub endemic: Option<EndemicSolution>,
    pub table: FractionTable,
    pub deterministic: Option<FractionTable>,
    pub ensemble: Option<EnsembleResult>,
    pub checks: Vec<CheckOutcome>,
}

impl RunSummary {
    pub fn all_checks_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

struct Writer<'a> {
    dir: &'a Path,
    format: OutputFormat,
    written: Vec<PathBuf>,
}

impl Writer<'_> {
    fn write(&mut self, kind: OutputFormat, name: &str, contents: &str) -> Result<()> {
        if !self.format.wants(kind) {
            return Ok(());
        }
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|source| ScenarioError::Io {
            context: format!("writing {}", path.display()),
            source,
        })?;
        self.written.push(path);
        Ok(())
    }
}

fn inf_norm_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Largest gap between two tables on shared sample times `t >= from`.
pub fn table_gap(a: &FractionTable, b: &FractionTable, from: f64) -> f64 {
    a.times
        .iter()
        .zip(a.p.iter().zip(&b.p))
        .filter(|(t, _)| **t >= from)
        .map(|(_, (pa, pb))| {
            pa.iter()
                .zip(pb)
                .filter(|(x, y)| x.is_finite() && y.is_finite())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// Executes a scenario and writes its artefacts.
pub fn run(config: &ScenarioConfig, options: &RunOptions) -> Result<RunSummary> {
    let model = config.build()?;
    let mode = if options.analyze { Mode::Analyze } else { config.mode };
    let seed = options.seed.unwrap_or(config.seed);
    fs::create_dir_all(&options.out_dir).map_err(|source| ScenarioError::Io {
        context: format!("creating {}", options.out_dir.display()),
        source,
    })?;
    let mut writer = Writer {
        dir: &options.out_dir,
        format: options.format,
        written: Vec::new(),
    };
    let name = &config.name;
    let outputs = &config.outputs;
    let file = |explicit: &Option<String>, suffix: &str| explicit.clone().unwrap_or_else(|| format!("{name}{suffix}"));

    let deterministic_options = IntegrationOptions {
        t_end: config.t_end,
        dt: config.dt,
        output_stride: config.output_stride(),
    };

    let mut report = None;
    let mut endemic = None;
    let mut deterministic = None;
    let mut ensemble = None;
    let table = match mode {
        Mode::Deterministic | Mode::Analyze => {
            if mode == Mode::Analyze
                || outputs.report_json.is_some()
                || config.expect.verdict.is_some()
                || config.expect.condition_iv.is_some()
            {
                let r = classify(&model.params, &model.generator)?;
                writer.write(
                    OutputFormat::Json,
                    &file(&outputs.report_json, "_report.json"),
                    &to_json(&r),
                )?;
                report = Some(r);
            }
            if mode == Mode::Analyze || outputs.endemic_json.is_some() || config.expect.final_p_near_endemic.is_some() {
                match endemic_fixed_point(&model.params, &model.generator, DEFAULT_TOL) {
                    Ok(solution) => {
                        writer.write(
                            OutputFormat::Json,
                            &file(&outputs.endemic_json, "_endemic.json"),
                            &to_json(&solution),
                        )?;
                        endemic = Some(solution);
                    }
                    // Disease-free regimes have no endemic state to report
                    // unless one was explicitly requested.
                    Err(Error::NotEndemicRegime { .. }) | Err(Error::SingularMMatrix)
                        if outputs.endemic_json.is_none() && config.expect.final_p_near_endemic.is_none() => {}
                    Err(e) => return Err(e.into()),
                }
            }
            integrate(&model.initial, &model.params, &model.generator, &deterministic_options)?.table()
        }
        Mode::Stochastic => {
            let total = config.population_per_node * model.generator.n() as u64;
            let pop0 = Population::from_fractions(model.initial.x.as_slice(), model.initial.p.as_slice(), total)?;
            let method = match config.method {
                StochasticMethod::FixedStep => Method::FixedStep { dt: config.dt },
                StochasticMethod::Gillespie => Method::Gillespie,
            };
            let result = run_ensemble(
                &pop0,
                &model.params,
                &model.generator,
                method,
                config.t_end,
                config.sample_interval,
                config.replicas,
                seed,
            )?;
            if config.compare_deterministic || config.expect.ensemble_gap_below.is_some() {
                let matched = ModelState::new(
                    DVector::from_iterator(
                        pop0.n(),
                        pop0.infected_fractions().into_iter().map(|f| f.unwrap_or(0.0)),
                    ),
                    DVector::from_vec(pop0.occupancy()),
                )?;
                let det = integrate(&matched, &model.params, &model.generator, &deterministic_options)?.table();
                writer.write(
                    OutputFormat::Csv,
                    &file(&outputs.deterministic_csv, "_deterministic.csv"),
                    &det.to_csv(),
                )?;
                deterministic = Some(det);
            }
            let table = result.table();
            ensemble = Some(result);
            table
        }
    };

    writer.write(
        OutputFormat::Csv,
        &file(&outputs.trajectory_csv, ".csv"),
        &table.to_csv(),
    )?;
    let title = config.description.clone().unwrap_or_else(|| name.clone());
    writer.write(
        OutputFormat::Svg,
        &file(&outputs.plot_svg, ".svg"),
        &line_chart(&table, &title),
    )?;

    let checks = evaluate(
        config,
        &model,
        &table,
        report.as_ref(),
        endemic.as_ref(),
        deterministic.as_ref(),
    )?;
    let provenance = provenance_note(config, mode, seed, &checks, report.as_ref());
    writer.write(
        OutputFormat::All,
        &file(&outputs.provenance, "_provenance.md"),
        &provenance,
    )?;

    Ok(RunSummary {
        name: name.clone(),
        mode,
        written: writer.written,
        report,
        endemic,
        table,
        deterministic,
        ensemble,
        checks,
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serialisable");
    s.push('\n');
    s
}

fn evaluate(
    config: &ScenarioConfig,
    model: &Model,
    table: &FractionTable,
    report: Option<&StabilityReport>,
    endemic: Option<&EndemicSolution>,
    deterministic: Option<&FractionTable>,
) -> Result<Vec<CheckOutcome>> {
    let expect = &config.expect;
    let mut checks = Vec::new();
    let mut push = |name: &str, passed: bool, detail: String| {
        checks.push(CheckOutcome {
            name: name.to_owned(),
            passed,
            detail,
        })
    };
    let final_p = table.p.last().map(Vec::as_slice).unwrap_or(&[]);
    let final_x = table.x.last().map(Vec::as_slice).unwrap_or(&[]);

    if let Some(verdict) = expect.verdict {
        let got = report.map(|r| r.verdict);
        push(
            "verdict",
            got == Some(verdict),
            format!("expected {verdict:?}, got {got:?}"),
        );
    }
    if let Some(iv) = expect.condition_iv {
        let got = report.map(|r| r.condition_iv);
        let margin = report.map_or(f64::NAN, |r| r.condition_iv_margin);
        push(
            "condition_iv",
            got == Some(iv),
            format!("expected {iv}, got {got:?} (margin {margin:e})"),
        );
    }
    if let Some(limit) = expect.final_p_below {
        let max = final_p.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max);
        push(
            "final_p_below",
            max < limit,
            format!("|p(t_end)|_inf = {max:e} (limit {limit:e})"),
        );
    }
    if let Some(limit) = expect.final_p_near_endemic {
        let gap = endemic.map_or(f64::INFINITY, |e| inf_norm_gap(final_p, &e.p_star));
        push(
            "final_p_near_endemic",
            gap < limit,
            format!("|p(t_end) - p*|_inf = {gap:e} (limit {limit:e})"),
        );
    }
    if let Some(limit) = expect.final_x_near_target {
        let target = match &model.target {
            Some(t) => t.clone(),
            None => stationary_distribution(&model.generator)?,
        };
        let gap = inf_norm_gap(final_x, target.as_slice());
        push(
            "final_x_near_target",
            gap <= limit,
            format!("|x(t_end) - target|_inf = {gap:e} (limit {limit:e})"),
        );
    }
    if let Some(limit) = expect.ensemble_gap_below {
        let from = expect.gap_from.unwrap_or(0.0);
        let gap = deterministic.map_or(f64::INFINITY, |d| table_gap(table, d, from));
        push(
            "ensemble_gap_below",
            gap <= limit,
            format!("max gap for t >= {from}: {gap:e} (limit {limit:e})"),
        );
    }
    Ok(checks)
}

fn provenance_note(
    config: &ScenarioConfig,
    mode: Mode,
    seed: u64,
    checks: &[CheckOutcome],
    report: Option<&StabilityReport>,
) -> String {
    let mut note = format!("# {}\n\n", config.name);
    if let Some(d) = &config.description {
        note.push_str(d);
        note.push_str("\n\n");
    }
    note.push_str(&format!(
        "mode: {mode:?}, t_end: {}, dt: {}, sample_interval: {}, seed: {seed}\n",
        config.t_end, config.dt, config.sample_interval
    ));
    if mode == Mode::Stochastic {
        note.push_str(&format!(
            "replicas: {}, population per node: {}, method: {:?}\n",
            config.replicas, config.population_per_node, config.method
        ));
    }
    note.push_str("\n## Assumed values\n\n");
    if config.assumptions.is_empty() {
        note.push_str("none\n");
    }
    for a in &config.assumptions {
        note.push_str(&format!("- {a}\n"));
    }
    if let Some(r) = report {
        note.push_str("\n## Stability report\n\n```\n");
        note.push_str(&r.to_table());
        note.push_str("```\n");
    }
    note.push_str("\n## Checks\n\n");
    if checks.is_empty() {
        note.push_str("none\n");
    }
    for c in checks {
        note.push_str(&format!(
            "- [{}] {}: {}\n",
            if c.passed { "pass" } else { "FAIL" },
            c.name,
            c.detail
        ));
    }
    note
}

/// Bundled figure scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig1a,
    Fig1b,
    Fig1c,
    Fig1d,
    Fig2Line,
    Fig2Ring,
    Fig2Star,
    Fig2Complete,
    Fig3,
}

impl Figure {
    pub const ALL: [Figure; 9] = [
        Self::Fig1a,
        Self::Fig1b,
        Self::Fig1c,
        Self::Fig1d,
        Self::Fig2Line,
        Self::Fig2Ring,
        Self::Fig2Star,
        Self::Fig2Complete,
        Self::Fig3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Fig1a => "fig1a",
            Self::Fig1b => "fig1b",
            Self::Fig1c => "fig1c",
            Self::Fig1d => "fig1d",
            Self::Fig2Line => "fig2_line",
            Self::Fig2Ring => "fig2_ring",
            Self::Fig2Star => "fig2_star",
            Self::Fig2Complete => "fig2_complete",
            Self::Fig3 => "fig3",
        }
    }

    pub fn scenario_json(self) -> &'static str {
        match self {
            Self::Fig1a => include_str!("../scenarios/fig1a.json"),
            Self::Fig1b => include_str!("../scenarios/fig1b.json"),
            Self::Fig1c => include_str!("../scenarios/fig1c.json"),
            Self::Fig1d => include_str!("../scenarios/fig1d.json"),
            Self::Fig2Line => include_str!("../scenarios/fig2_line.json"),
            Self::Fig2Ring => include_str!("../scenarios/fig2_ring.json"),
            Self::Fig2Star => include_str!("../scenarios/fig2_star.json"),
            Self::Fig2Complete => include_str!("../scenarios/fig2_complete.json"),
            Self::Fig3 => include_str!("../scenarios/fig3.json"),
        }
    }

    pub fn config(self) -> ScenarioConfig {
        ScenarioConfig::from_json(self.scenario_json()).expect("bundled scenario parses")
    }
}

impl FromStr for Figure {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|f| f.name() == s).ok_or_else(|| {
            let known: Vec<_> = Self::ALL.iter().map(|f| f.name()).collect();
            ScenarioError::UnknownFigure(format!("unknown figure `{s}` (known: {})", known.join(", ")))
        })
    }
}

/// Runs the bundled scenario for `figure`.
pub fn reproduce(figure: Figure, options: &RunOptions) -> Result<RunSummary> {
    run(&figure.config(), options)
}
