//! C ABI for the trajdiff solver.
//!
//! Problems, solutions and batches are opaque heap handles released with
//! their `*_free` function. Every fallible call returns a [`TdStatus`];
//! on failure [`td_last_error_message`] describes the most recent error
//! raised on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use trajdiff::solver::{guess_rng, solve_batch_with, solve_with_layout};
use trajdiff::{Error, GradientMethod, NlpProblem, Problem, ProblemKind, Solution, SolveError, SolverConfig};

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnknownName = 3,
    Dimension = 4,
    InvalidProblem = 5,
    InvalidConfig = 6,
    NonFinite = 7,
    BarrierDomain = 8,
    StepRejected = 9,
    Panic = 10,
}

impl From<&Error> for TdStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Dimension { .. } => TdStatus::Dimension,
            Error::InvalidProblem(_) | Error::MissingLayout => TdStatus::InvalidProblem,
            Error::InvalidConfig(_) => TdStatus::InvalidConfig,
            Error::NonFinite { .. } => TdStatus::NonFinite,
            Error::BarrierDomain { .. } => TdStatus::BarrierDomain,
            Error::StepRejected { .. } => TdStatus::StepRejected,
            Error::UnknownName { .. } => TdStatus::UnknownName,
        }
    }
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TdGradient {
    Exact = 0,
    FiniteDifference = 1,
    Smoothed = 2,
}

/// Diffusion settings. Obtain defaults from [`td_config_default`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TdConfig {
    pub alpha: f64,
    pub mu: f64,
    pub sigma0: f64,
    pub gamma: f64,
    pub sigma_min: f64,
    pub iterations: u64,
    pub barrier_weight: f64,
    pub barrier_decay: f64,
    pub seed: u64,
    /// 0 disables snapshots.
    pub snapshot_stride: u64,
    pub gradient: TdGradient,
    /// Finite-difference step.
    pub fd_step: f64,
    /// Smoothed estimator draws and standard deviation; the draws are
    /// seeded from `seed`.
    pub smoothing_samples: u64,
    pub smoothing_stddev: f64,
}

impl From<&SolverConfig> for TdConfig {
    fn from(c: &SolverConfig) -> Self {
        let GradientMethod::FiniteDifference { step: fd_step } = GradientMethod::finite_difference() else {
            unreachable!()
        };
        let GradientMethod::Smoothed { samples, stddev, .. } = GradientMethod::smoothed(0) else {
            unreachable!()
        };
        let mut out = TdConfig {
            alpha: c.alpha,
            mu: c.mu,
            sigma0: c.sigma0,
            gamma: c.gamma,
            sigma_min: c.sigma_min,
            iterations: c.iterations as u64,
            barrier_weight: c.barrier_weight,
            barrier_decay: c.barrier_decay,
            seed: c.seed,
            snapshot_stride: c.snapshot_stride as u64,
            gradient: TdGradient::Exact,
            fd_step,
            smoothing_samples: samples as u64,
            smoothing_stddev: stddev,
        };
        match c.gradient {
            GradientMethod::Exact => {}
            GradientMethod::FiniteDifference { step } => {
                out.gradient = TdGradient::FiniteDifference;
                out.fd_step = step;
            }
            GradientMethod::Smoothed { samples, stddev, .. } => {
                out.gradient = TdGradient::Smoothed;
                out.smoothing_samples = samples as u64;
                out.smoothing_stddev = stddev;
            }
        }
        out
    }
}

impl TdConfig {
    fn to_solver(self) -> Result<SolverConfig, Error> {
        let usize_of = |v: u64, what: &str| {
            usize::try_from(v).map_err(|_| Error::InvalidConfig(format!("{what} {v} does not fit in usize")))
        };
        let gradient = match self.gradient {
            TdGradient::Exact => GradientMethod::Exact,
            TdGradient::FiniteDifference => GradientMethod::FiniteDifference { step: self.fd_step },
            TdGradient::Smoothed => GradientMethod::Smoothed {
                samples: usize_of(self.smoothing_samples, "smoothing_samples")?,
                stddev: self.smoothing_stddev,
                seed: self.seed,
            },
        };
        let cfg = SolverConfig {
            alpha: self.alpha,
            mu: self.mu,
            sigma0: self.sigma0,
            gamma: self.gamma,
            sigma_min: self.sigma_min,
            iterations: usize_of(self.iterations, "iterations")?,
            barrier_weight: self.barrier_weight,
            barrier_decay: self.barrier_decay,
            seed: self.seed,
            snapshot_stride: usize_of(self.snapshot_stride, "snapshot_stride")?,
            gradient,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Opaque benchmark problem.
pub struct TdProblem(Problem);

/// Opaque result of one chain.
pub struct TdSolution(Solution);

/// Opaque result of a batch; chains are borrowed from it.
pub struct TdBatch(Vec<Result<TdSolution, SolveError>>);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: TdStatus, msg: impl Into<String>) -> TdStatus {
    set_error(msg.into());
    status
}

fn fail_with(e: &Error) -> TdStatus {
    fail(e.into(), e.to_string())
}

fn guarded(f: impl FnOnce() -> TdStatus) -> TdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(TdStatus::Panic, format!("panic: {msg}"))
        }
    }
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn td_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn td_clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// # Safety
/// `out` must be null or point to writable storage for a `TdConfig`.
#[no_mangle]
pub unsafe extern "C" fn td_config_default(out: *mut TdConfig) -> TdStatus {
    if out.is_null() {
        return fail(TdStatus::NullPointer, "config output is null");
    }
    out.write(TdConfig::from(&SolverConfig::default()));
    TdStatus::Ok
}

/// Recomputes `gamma` so the noise reaches `sigma_min` at the default
/// fraction of `iterations`.
///
/// # Safety
/// `config` must be null or point to a valid `TdConfig`.
#[no_mangle]
pub unsafe extern "C" fn td_config_reanneal(config: *mut TdConfig) -> TdStatus {
    let Some(c) = config.as_mut() else {
        return fail(TdStatus::NullPointer, "config is null");
    };
    c.gamma = trajdiff::solver::annealing_gamma(c.sigma0, c.sigma_min, c.iterations as usize);
    TdStatus::Ok
}

/// Builds a benchmark by name (`pendulum`, `bugtrap`, `toy_kkt`).
///
/// # Safety
/// `name` must be null or a NUL-terminated string; `out` must be null or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn td_problem_new(name: *const c_char, out: *mut *mut TdProblem) -> TdStatus {
    if name.is_null() || out.is_null() {
        return fail(TdStatus::NullPointer, "problem name or output is null");
    }
    out.write(ptr::null_mut());
    let Ok(name) = CStr::from_ptr(name).to_str() else {
        return fail(TdStatus::InvalidArgument, "problem name is not UTF-8");
    };
    guarded(|| match name.parse::<ProblemKind>().and_then(ProblemKind::build) {
        Ok(p) => {
            out.write(Box::into_raw(Box::new(TdProblem(p))));
            TdStatus::Ok
        }
        Err(e) => fail_with(&e),
    })
}

/// # Safety
/// `problem` must be null or a handle from [`td_problem_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn td_problem_free(problem: *mut TdProblem) {
    if !problem.is_null() {
        drop(Box::from_raw(problem));
    }
}

/// Number of decision variables, or 0 for a null handle.
///
/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn td_problem_num_variables(problem: *const TdProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.0.num_variables())
}

/// # Safety
/// `problem` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn td_problem_num_constraints(problem: *const TdProblem) -> usize {
    problem.as_ref().map_or(0, |p| p.0.num_constraints())
}

/// Writes the randomized initial guess for `seed` into `out[0..len]`;
/// `len` must equal the number of variables.
///
/// # Safety
/// `problem` must be a live handle and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn td_problem_initial_guess(
    problem: *const TdProblem,
    seed: u64,
    out: *mut f64,
    len: usize,
) -> TdStatus {
    let Some(p) = problem.as_ref() else {
        return fail(TdStatus::NullPointer, "problem is null");
    };
    if out.is_null() {
        return fail(TdStatus::NullPointer, "output buffer is null");
    }
    let n = p.0.num_variables();
    if len != n {
        return fail_with(&Error::Dimension {
            what: "initial guess buffer",
            expected: n,
            got: len,
        });
    }
    guarded(|| {
        let guess = p.0.initial_guess(&mut guess_rng(seed));
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(&guess);
        TdStatus::Ok
    })
}

unsafe fn slice_arg<'a>(data: *const f64, len: usize, what: &str) -> Result<&'a [f64], TdStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(fail(TdStatus::NullPointer, format!("{what} is null")));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

/// Runs one diffusion chain from `x0` (length `n`) and multipliers
/// `lambda0` (length `m`; null means all zeros). On failure `*out` is
/// null.
///
/// # Safety
/// `problem` and `config` must be live; `x0` valid for `n` reads;
/// `lambda0` null or valid for `m` reads; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn td_solve(
    problem: *const TdProblem,
    config: *const TdConfig,
    x0: *const f64,
    n: usize,
    lambda0: *const f64,
    m: usize,
    out: *mut *mut TdSolution,
) -> TdStatus {
    if out.is_null() {
        return fail(TdStatus::NullPointer, "solution output is null");
    }
    out.write(ptr::null_mut());
    let (Some(p), Some(c)) = (problem.as_ref(), config.as_ref()) else {
        return fail(TdStatus::NullPointer, "problem or config is null");
    };
    let x0 = match slice_arg(x0, n, "x0") {
        Ok(s) => s,
        Err(s) => return s,
    };
    let zeros;
    let lambda0 = if lambda0.is_null() {
        zeros = vec![0.0; m];
        &zeros[..]
    } else {
        match slice_arg(lambda0, m, "lambda0") {
            Ok(s) => s,
            Err(s) => return s,
        }
    };
    guarded(|| {
        let cfg = match c.to_solver() {
            Ok(cfg) => cfg,
            Err(e) => return fail_with(&e),
        };
        match solve_with_layout(&p.0, x0, lambda0, &cfg, p.0.layout()) {
            Ok(sol) => {
                out.write(Box::into_raw(Box::new(TdSolution(sol))));
                TdStatus::Ok
            }
            Err(e) => fail_with(&e.error),
        }
    })
}

/// Runs `chains` independent diffusion chains from the row-major
/// `x0s[chains × n]`; chain `i` uses seed `config.seed + i` and zero
/// multipliers. `threads = 0` uses the global pool. Individual chain
/// failures are reported through [`td_batch_status`].
///
/// # Safety
/// `problem` and `config` must be live; `x0s` valid for `chains · n`
/// reads; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn td_solve_batch(
    problem: *const TdProblem,
    config: *const TdConfig,
    x0s: *const f64,
    chains: usize,
    n: usize,
    threads: usize,
    out: *mut *mut TdBatch,
) -> TdStatus {
    if out.is_null() {
        return fail(TdStatus::NullPointer, "batch output is null");
    }
    out.write(ptr::null_mut());
    let (Some(p), Some(c)) = (problem.as_ref(), config.as_ref()) else {
        return fail(TdStatus::NullPointer, "problem or config is null");
    };
    let expected = p.0.num_variables();
    if n != expected {
        return fail_with(&Error::Dimension {
            what: "batch row length",
            expected,
            got: n,
        });
    }
    let Some(total) = chains.checked_mul(n) else {
        return fail(TdStatus::InvalidArgument, "batch size overflows");
    };
    let flat = match slice_arg(x0s, total, "x0s") {
        Ok(s) => s,
        Err(s) => return s,
    };
    guarded(|| {
        let cfg = match c.to_solver() {
            Ok(cfg) => cfg,
            Err(e) => return fail_with(&e),
        };
        let rows: Vec<Vec<f64>> = (0..chains).map(|i| flat[i * n..(i + 1) * n].to_vec()).collect();
        let layout = p.0.layout();
        let lambda0 = vec![0.0; p.0.num_constraints()];
        let threads = (threads > 0).then_some(threads);
        let batch = solve_batch_with(&p.0, &rows, threads, |i, x0| {
            let mut chain = cfg.clone();
            chain.seed = cfg.seed.wrapping_add(i as u64);
            solve_with_layout(&p.0, x0, &lambda0, &chain, layout)
        });
        match batch {
            Ok(b) => {
                out.write(Box::into_raw(Box::new(TdBatch(
                    b.results.into_iter().map(|r| r.map(TdSolution)).collect(),
                ))));
                TdStatus::Ok
            }
            Err(e) => fail_with(&e),
        }
    })
}

/// # Safety
/// `batch` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn td_batch_free(batch: *mut TdBatch) {
    if !batch.is_null() {
        drop(Box::from_raw(batch));
    }
}

/// # Safety
/// `batch` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn td_batch_len(batch: *const TdBatch) -> usize {
    batch.as_ref().map_or(0, |b| b.0.len())
}

/// Status of chain `index`; on failure the message is stored as the last
/// error.
///
/// # Safety
/// `batch` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn td_batch_status(batch: *const TdBatch, index: usize) -> TdStatus {
    let Some(b) = batch.as_ref() else {
        return fail(TdStatus::NullPointer, "batch is null");
    };
    match b.0.get(index) {
        None => fail(TdStatus::InvalidArgument, format!("chain {index} out of range")),
        Some(Ok(_)) => TdStatus::Ok,
        Some(Err(e)) => fail_with(&e.error),
    }
}

/// Borrowed view of a successful chain, or null. Valid while the batch
/// lives; do not free it.
///
/// # Safety
/// `batch` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn td_batch_solution(batch: *const TdBatch, index: usize) -> *const TdSolution {
    match batch.as_ref().and_then(|b| b.0.get(index)) {
        Some(Ok(sol)) => sol as *const TdSolution,
        _ => ptr::null(),
    }
}

/// # Safety
/// `solution` must be null or a handle returned by [`td_solve`].
#[no_mangle]
pub unsafe extern "C" fn td_solution_free(solution: *mut TdSolution) {
    if !solution.is_null() {
        drop(Box::from_raw(solution));
    }
}

/// `‖h(x̄)‖²` at the final point, NaN for a null handle.
///
/// # Safety
/// `solution` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn td_solution_violation(solution: *const TdSolution) -> f64 {
    solution.as_ref().map_or(f64::NAN, |s| s.0.violation)
}

/// # Safety
/// `solution` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn td_solution_cost(solution: *const TdSolution) -> f64 {
    solution.as_ref().map_or(f64::NAN, |s| s.0.cost)
}

/// # Safety
/// `solution` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn td_solution_iterations(solution: *const TdSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.0.iterations)
}

/// # Safety
/// `solution` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn td_solution_duration_ms(solution: *const TdSolution) -> f64 {
    solution.as_ref().map_or(f64::NAN, |s| s.0.duration_ms())
}

/// Number of trace records (one per iteration).
///
/// # Safety
/// `solution` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn td_solution_trace_len(solution: *const TdSolution) -> usize {
    solution.as_ref().map_or(0, |s| s.0.trace.len())
}

unsafe fn copy_out(solution: *const TdSolution, out: *mut f64, len: usize, pick: impl Fn(&Solution) -> Vec<f64>) -> TdStatus {
    let Some(s) = solution.as_ref() else {
        return fail(TdStatus::NullPointer, "solution is null");
    };
    if out.is_null() {
        return fail(TdStatus::NullPointer, "output buffer is null");
    }
    let values = pick(&s.0);
    if values.len() != len {
        return fail_with(&Error::Dimension {
            what: "output buffer",
            expected: values.len(),
            got: len,
        });
    }
    std::slice::from_raw_parts_mut(out, len).copy_from_slice(&values);
    TdStatus::Ok
}

/// Copies the final decision vector; `len` must equal its length.
///
/// # Safety
/// `solution` must be live and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn td_solution_xbar(solution: *const TdSolution, out: *mut f64, len: usize) -> TdStatus {
    copy_out(solution, out, len, |s| s.xbar.clone())
}

/// # Safety
/// `solution` must be live and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn td_solution_lambda(solution: *const TdSolution, out: *mut f64, len: usize) -> TdStatus {
    copy_out(solution, out, len, |s| s.lambda.clone())
}

/// Copies the per-iteration `‖h‖²` trace; `len` must equal
/// [`td_solution_trace_len`].
///
/// # Safety
/// `solution` must be live and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn td_solution_hsq_trace(solution: *const TdSolution, out: *mut f64, len: usize) -> TdStatus {
    copy_out(solution, out, len, |s| s.trace.hsq().collect())
}
