//! SIS epidemics on a network of regions coupled by Markovian mobility.
//!
//! Individuals jump between regions according to a continuous-time Markov
//! chain with generator `Q` while undergoing susceptible-infected-susceptible
//! dynamics inside their current region. In the continuum limit the infected
//! fractions `p` and population fractions `x` obey
//!
//! ```text
//! p' = (B - D - L(x)) p - diag(p) B p
//! x' = Q^T x
//! ```
//!
//! The crate provides the generator and Laplacian machinery
//! ([`mobility`]), the spectral stability analysis ([`spectral`]),
//! deterministic integration ([`dynamics`]), equilibrium computation
//! ([`equilibria`]), finite-population simulation ([`stochastic`]) and the
//! scenario runner behind the `mobsis` binary ([`scenario`]).

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod equilibria;
pub mod error;
pub mod format;
pub mod mobility;
pub mod plot;
pub mod scenario;
pub mod spectral;
pub mod stochastic;

pub use error::{Error, Result};
pub use mobility::{GeneratorMatrix, GraphKind, MobilityLaplacian, PopulationDistribution, RegionGraph};
pub use spectral::{EpidemicParams, StabilityReport, Verdict};
