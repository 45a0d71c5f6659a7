//! C ABI over `mobsis`.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_from_*`
//! functions and released with the matching `*_free`. Every fallible call
//! returns a [`MobsisStatus`]; on failure a description is available from
//! [`mobsis_last_error`] on the same thread. Vectors are caller-owned
//! `double` buffers whose length is passed alongside; matrices are row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use mobsis::dynamics::{integrate, IntegrationOptions, ModelState, Trajectory};
use mobsis::equilibria::endemic_fixed_point;
use mobsis::mobility::{
    make_graph, metropolis_hastings_rates, stationary_distribution, uniform_out_rates, validate_generator,
};
use mobsis::spectral::{classify, curing_rates_for_lambda2_condition, MobilityEquilibrium};
use mobsis::{EpidemicParams, Error, GeneratorMatrix, GraphKind, PopulationDistribution, Verdict};
use nalgebra::{DMatrix, DVector};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MobsisStatus {
    Ok = 0,
    NullPointer = 1,
    /// Malformed input: bad sign pattern, wrong length, out-of-range value.
    InvalidArgument = 2,
    /// The mobility chain is not irreducible.
    NotIrreducible = 3,
    /// An iteration failed to converge or a state left its invariant box.
    NumericalFailure = 4,
    /// An endemic equilibrium was requested in the disease-free regime.
    NotEndemic = 5,
    /// An output buffer length does not match the model size.
    BufferSize = 6,
    /// A Rust panic was caught at the boundary.
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MobsisGraphKind {
    Line = 0,
    Ring = 1,
    /// Node 0 is the hub.
    Star = 2,
    Complete = 3,
}

impl From<MobsisGraphKind> for GraphKind {
    fn from(kind: MobsisGraphKind) -> Self {
        match kind {
            MobsisGraphKind::Line => GraphKind::Line,
            MobsisGraphKind::Ring => GraphKind::Ring,
            MobsisGraphKind::Star => GraphKind::Star,
            MobsisGraphKind::Complete => GraphKind::Complete,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MobsisVerdict {
    DiseaseFreeStable = 0,
    EndemicStable = 1,
}

/// Stability report. `r0` is NaN when every curing rate is zero.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobsisReport {
    pub n: usize,
    pub mu: f64,
    pub r0: f64,
    pub lambda2: f64,
    pub m: f64,
    pub m_lower: f64,
    pub condition_i: bool,
    pub condition_ii: bool,
    pub condition_iii: bool,
    pub condition_iv: bool,
    pub condition_iv_margin: f64,
    pub verdict: MobsisVerdict,
}

/// Validated mobility generator.
pub struct MobsisGenerator(GeneratorMatrix);

/// Per-node infection and curing rates.
pub struct MobsisParams(EpidemicParams);

/// Sampled deterministic trajectory.
pub struct MobsisTrajectory(Trajectory);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).expect("NUL bytes removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = message);
}

struct Failure(MobsisStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::NotIrreducible => MobsisStatus::NotIrreducible,
            Error::NotEndemicRegime { .. } => MobsisStatus::NotEndemic,
            Error::NoConvergence { .. }
            | Error::StateEscapedBox { .. }
            | Error::ResidualTooLarge { .. }
            | Error::SingularSystem
            | Error::SingularMMatrix
            | Error::DegenerateSolution { .. } => MobsisStatus::NumericalFailure,
            _ => MobsisStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(MobsisStatus::NullPointer, format!("`{what}` is null"))
}

/// Runs `body`, converting errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> MobsisStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_last_error(String::new());
            MobsisStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("panic inside mobsis".to_owned());
            MobsisStatus::Panic
        }
    }
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, expected: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    if len != expected {
        return Err(Failure(
            MobsisStatus::BufferSize,
            format!("`{what}` has length {len}, expected {expected}"),
        ));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Description of the last failure on this thread; empty after a success.
/// Valid until the next mobsis call on the same thread.
#[no_mangle]
pub extern "C" fn mobsis_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Validates the row-major `n x n` rate matrix `q`. The diagonal is
/// recomputed from the off-diagonal rates.
///
/// # Safety
/// `q` must point to `n * n` doubles and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn mobsis_generator_from_matrix(
    q: *const f64,
    n: usize,
    out: *mut *mut MobsisGenerator,
) -> MobsisStatus {
    guard(|| {
        let values = input(q, n * n, "q")?;
        let g = validate_generator(DMatrix::from_row_slice(n, n, values))?;
        emit(out, MobsisGenerator(g))
    })
}

/// `q_ij = nu_i / outdegree(i)` on the named topology.
///
/// # Safety
/// `nu` must point to `n` doubles and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn mobsis_generator_uniform(
    kind: MobsisGraphKind,
    n: usize,
    nu: *const f64,
    out: *mut *mut MobsisGenerator,
) -> MobsisStatus {
    guard(|| {
        let nu = input(nu, n, "nu")?;
        let g = uniform_out_rates(&make_graph(kind.into(), n)?, nu)?;
        emit(out, MobsisGenerator(g))
    })
}

/// Metropolis-Hastings rates on the named topology with stationary
/// distribution `target` (normalised internally).
///
/// # Safety
/// `target` must point to `n` doubles and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn mobsis_generator_metropolis_hastings(
    kind: MobsisGraphKind,
    n: usize,
    target: *const f64,
    base_rate: f64,
    out: *mut *mut MobsisGenerator,
) -> MobsisStatus {
    guard(|| {
        let target = PopulationDistribution::normalized(DVector::from_column_slice(input(target, n, "target")?))?;
        let g = metropolis_hastings_rates(&make_graph(kind.into(), n)?, &target, base_rate)?;
        emit(out, MobsisGenerator(g))
    })
}

/// Number of regions, or 0 for a null handle.
///
/// # Safety
/// `g` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mobsis_generator_n(g: *const MobsisGenerator) -> usize {
    g.as_ref().map_or(0, |g| g.0.n())
}

/// # Safety
/// `g` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mobsis_generator_free(g: *mut MobsisGenerator) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// Stationary distribution `v` into `out` (length `n`).
///
/// # Safety
/// `g` must be a live handle and `out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mobsis_stationary_distribution(
    g: *const MobsisGenerator,
    out: *mut f64,
    len: usize,
) -> MobsisStatus {
    guard(|| {
        let g = &handle(g, "g")?.0;
        let out = output(out, len, g.n(), "out")?;
        out.copy_from_slice(stationary_distribution(g)?.as_slice());
        Ok(())
    })
}

/// # Safety
/// `beta` and `delta` must point to `n` doubles and `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn mobsis_params_new(
    beta: *const f64,
    delta: *const f64,
    n: usize,
    out: *mut *mut MobsisParams,
) -> MobsisStatus {
    guard(|| {
        let params = EpidemicParams::new(input(beta, n, "beta")?.to_vec(), input(delta, n, "delta")?.to_vec())?;
        emit(out, MobsisParams(params))
    })
}

/// # Safety
/// `params` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mobsis_params_free(params: *mut MobsisParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

/// Full stability report.
///
/// # Safety
/// `g` and `params` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mobsis_classify(
    g: *const MobsisGenerator,
    params: *const MobsisParams,
    out: *mut MobsisReport,
) -> MobsisStatus {
    guard(|| {
        let (g, params) = (&handle(g, "g")?.0, &handle(params, "params")?.0);
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let r = classify(params, g)?;
        *out = MobsisReport {
            n: r.n,
            mu: r.mu,
            r0: r.r0.unwrap_or(f64::NAN),
            lambda2: r.lambda2,
            m: r.m,
            m_lower: r.m_lower,
            condition_i: r.condition_i,
            condition_ii: r.condition_ii,
            condition_iii: r.condition_iii,
            condition_iv: r.condition_iv,
            condition_iv_margin: r.condition_iv_margin,
            verdict: match r.verdict {
                Verdict::DiseaseFreeStable => MobsisVerdict::DiseaseFreeStable,
                Verdict::EndemicStable => MobsisVerdict::EndemicStable,
            },
        };
        Ok(())
    })
}

/// Endemic equilibrium `p*` into `out`; [`MobsisStatus::NotEndemic`] in the
/// disease-free regime.
///
/// # Safety
/// `g` and `params` must be live handles and `out` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn mobsis_endemic_fixed_point(
    g: *const MobsisGenerator,
    params: *const MobsisParams,
    tol: f64,
    out: *mut f64,
    len: usize,
) -> MobsisStatus {
    guard(|| {
        let (g, params) = (&handle(g, "g")?.0, &handle(params, "params")?.0);
        let out = output(out, len, g.n(), "out")?;
        out.copy_from_slice(&endemic_fixed_point(params, g, tol)?.p_star);
        Ok(())
    })
}

/// Curing rates meeting the `lambda2` condition with equality for
/// `m = m_factor * m_lower`. Nodes listed in `pinned` (0-based) sit at
/// `beta + m`.
///
/// # Safety
/// `g` must be a live handle, `beta` and `out` must point to `n` doubles and
/// `pinned` to `pinned_len` indices (it may be null when `pinned_len` is 0).
#[no_mangle]
pub unsafe extern "C" fn mobsis_lambda2_curing_rates(
    g: *const MobsisGenerator,
    beta: *const f64,
    m_factor: f64,
    pinned: *const usize,
    pinned_len: usize,
    out: *mut f64,
    len: usize,
) -> MobsisStatus {
    guard(|| {
        let g = &handle(g, "g")?.0;
        let beta = input(beta, g.n(), "beta")?;
        let pinned = if pinned_len == 0 {
            &[][..]
        } else if pinned.is_null() {
            return Err(null("pinned"));
        } else {
            std::slice::from_raw_parts(pinned, pinned_len)
        };
        let out = output(out, len, g.n(), "out")?;
        let m = m_factor * MobilityEquilibrium::new(g)?.m_lower();
        out.copy_from_slice(&curing_rates_for_lambda2_condition(g, beta, m, pinned)?);
        Ok(())
    })
}

/// RK4 integration from `(p0, x0)`; `x0` may be null to start from the
/// stationary distribution. Every `output_stride`-th step is kept, plus the
/// final state at exactly `t_end`.
///
/// # Safety
/// `g` and `params` must be live handles, `p0` must point to `n` doubles,
/// `x0` to `n` doubles or be null, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mobsis_integrate(
    g: *const MobsisGenerator,
    params: *const MobsisParams,
    p0: *const f64,
    x0: *const f64,
    n: usize,
    t_end: f64,
    dt: f64,
    output_stride: usize,
    out: *mut *mut MobsisTrajectory,
) -> MobsisStatus {
    guard(|| {
        let (g, params) = (&handle(g, "g")?.0, &handle(params, "params")?.0);
        let p0 = DVector::from_column_slice(input(p0, n, "p0")?);
        let x0 = if x0.is_null() {
            stationary_distribution(g)?.into_inner()
        } else {
            DVector::from_column_slice(input(x0, n, "x0")?)
        };
        let options = IntegrationOptions {
            t_end,
            dt,
            output_stride,
        };
        let trajectory = integrate(&ModelState::new(p0, x0)?, params, g, &options)?;
        emit(out, MobsisTrajectory(trajectory))
    })
}

/// Number of stored samples, or 0 for a null handle.
///
/// # Safety
/// `trajectory` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mobsis_trajectory_len(trajectory: *const MobsisTrajectory) -> usize {
    trajectory.as_ref().map_or(0, |t| t.0.times.len())
}

/// Time and state of sample `index`. `p` and `x` must each hold `n` doubles;
/// either may be null to skip it.
///
/// # Safety
/// `trajectory` must be a live handle and `t` writable; non-null `p`/`x`
/// must point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn mobsis_trajectory_sample(
    trajectory: *const MobsisTrajectory,
    index: usize,
    t: *mut f64,
    p: *mut f64,
    x: *mut f64,
    n: usize,
) -> MobsisStatus {
    guard(|| {
        let trajectory = &handle(trajectory, "trajectory")?.0;
        let len = trajectory.times.len();
        if index >= len {
            return Err(Failure(
                MobsisStatus::InvalidArgument,
                format!("sample {index} out of range (have {len})"),
            ));
        }
        let state = &trajectory.states[index];
        *t.as_mut().ok_or_else(|| null("t"))? = trajectory.times[index];
        if !p.is_null() {
            output(p, n, state.n(), "p")?.copy_from_slice(state.p.as_slice());
        }
        if !x.is_null() {
            output(x, n, state.n(), "x")?.copy_from_slice(state.x.as_slice());
        }
        Ok(())
    })
}

/// # Safety
/// `trajectory` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mobsis_trajectory_free(trajectory: *mut MobsisTrajectory) {
    if !trajectory.is_null() {
        drop(Box::from_raw(trajectory));
    }
}
