//! Equality-constrained Langevin diffusion.
//!
//! Each chain carries a decision vector `x̄` and a multiplier vector `λ`.
//! One Euler-Maruyama step is
//!
//! ```text
//! g   = ∇c(x̄) + J(x̄)ᵀλ + μ J(x̄)ᵀh(x̄) + β ∇B(x̄)
//! x̄' = x̄ − (α/2) g + σᵢ √α ε,      ε ~ N(0, I)
//! λ'  = λ + α μ h(x̄)
//! ```
//!
//! with `σᵢ = max(σ₀ γⁱ, σ_min)` and `B` the log-barrier of the finite
//! variable bounds. With `σ ≡ 0` the recurrence is plain constrained
//! differential optimization, which the gradient-descent baseline reuses.

use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diffgrad::{self, GradientMethod, ScalarFunction};
use crate::dual::Scalar;
use crate::error::{Error, Result};
use crate::nlp::{first_bound_violation, ConstraintsOf, CostOf, Layout, NlpProblem};

/// Maximum number of halvings when a step leaves the barrier domain.
pub const MAX_STEP_RETRIES: usize = 20;

/// Fraction of the run after which the noise reaches its floor by default.
pub const DEFAULT_ANNEAL_FRACTION: f64 = 0.8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Euler-Maruyama step size.
    pub alpha: f64,
    /// Quadratic penalty coefficient.
    pub mu: f64,
    pub sigma0: f64,
    /// Geometric decay of the noise level per iteration.
    pub gamma: f64,
    pub sigma_min: f64,
    pub iterations: usize,
    /// Log-barrier coefficient; 0 disables bound handling.
    pub barrier_weight: f64,
    /// Per-iteration geometric decay of the barrier weight (1 keeps it fixed).
    pub barrier_decay: f64,
    pub seed: u64,
    /// Decision-vector snapshot stride; 0 disables snapshots.
    pub snapshot_stride: usize,
    pub gradient: GradientMethod,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let (sigma0, sigma_min, iterations) = (0.1, 1e-4, 20_000);
        SolverConfig {
            alpha: 0.06,
            mu: 10.0,
            sigma0,
            gamma: annealing_gamma(sigma0, sigma_min, iterations),
            sigma_min,
            iterations,
            barrier_weight: 0.0075,
            barrier_decay: 1.0,
            seed: 0,
            snapshot_stride: 100,
            gradient: GradientMethod::Exact,
        }
    }
}

/// Decay factor that takes `sigma0` to `sigma_min` after
/// [`DEFAULT_ANNEAL_FRACTION`] of `iterations`.
pub fn annealing_gamma(sigma0: f64, sigma_min: f64, iterations: usize) -> f64 {
    if !(sigma0 > 0.0 && sigma_min > 0.0 && sigma_min < sigma0) {
        return 1.0;
    }
    let steps = (DEFAULT_ANNEAL_FRACTION * iterations as f64).max(1.0);
    (sigma_min / sigma0).powf(1.0 / steps)
}

impl SolverConfig {
    /// Recomputes `gamma` for the current `sigma0`, `sigma_min` and `iterations`.
    pub fn reanneal(mut self) -> Self {
        self.gamma = annealing_gamma(self.sigma0, self.sigma_min, self.iterations);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return fail(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return fail(format!("mu must be positive, got {}", self.mu));
        }
        if !(self.sigma_min >= 0.0 && self.sigma0 >= self.sigma_min && self.sigma0.is_finite()) {
            return fail(format!(
                "need sigma0 >= sigma_min >= 0, got sigma0 = {}, sigma_min = {}",
                self.sigma0, self.sigma_min
            ));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return fail(format!("gamma must lie in (0, 1], got {}", self.gamma));
        }
        if self.iterations == 0 {
            return fail("iterations must be at least 1".into());
        }
        if !(self.barrier_weight >= 0.0 && self.barrier_weight.is_finite()) {
            return fail(format!("barrier weight must be non-negative, got {}", self.barrier_weight));
        }
        if !(self.barrier_decay > 0.0 && self.barrier_decay <= 1.0) {
            return fail(format!("barrier decay must lie in (0, 1], got {}", self.barrier_decay));
        }
        self.gradient.validate()
    }

    pub fn barrier_weight_at(&self, iter: usize) -> f64 {
        if self.barrier_decay == 1.0 {
            self.barrier_weight
        } else {
            self.barrier_weight * self.barrier_decay.powi(iter as i32)
        }
    }
}

/// `σᵢ = max(σ₀ γⁱ, σ_min)`.
pub fn noise_schedule(iter: usize, config: &SolverConfig) -> f64 {
    (config.sigma0 * config.gamma.powi(iter as i32)).max(config.sigma_min)
}

/// `B(x̄) = −Σ [ln(x̄_U,i − x̄ᵢ) + ln(x̄ᵢ − x̄_L,i)]` over finite bounds.
pub fn barrier_value(lower: &[f64], upper: &[f64], x: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for (i, &xi) in x.iter().enumerate() {
        let (lo, hi) = (lower[i], upper[i]);
        check_interior(i, xi, lo, hi)?;
        if hi.is_finite() {
            total -= (hi - xi).ln();
        }
        if lo.is_finite() {
            total -= (xi - lo).ln();
        }
    }
    Ok(total)
}

pub fn barrier_gradient(lower: &[f64], upper: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    x.iter()
        .enumerate()
        .map(|(i, &xi)| {
            let (lo, hi) = (lower[i], upper[i]);
            check_interior(i, xi, lo, hi)?;
            let mut g = 0.0;
            if hi.is_finite() {
                g += 1.0 / (hi - xi);
            }
            if lo.is_finite() {
                g -= 1.0 / (xi - lo);
            }
            Ok(g)
        })
        .collect()
}

fn check_interior(index: usize, value: f64, lower: f64, upper: f64) -> Result<()> {
    if value > lower && value < upper {
        Ok(())
    } else {
        Err(Error::BarrierDomain {
            index,
            value,
            lower,
            upper,
        })
    }
}

/// Everything one step needs at the current point.
#[derive(Clone, Debug)]
pub(crate) struct PointEval {
    pub cost: f64,
    pub h: Vec<f64>,
    /// Drift without the barrier term.
    pub velocity: Vec<f64>,
    /// Full drift including the barrier term.
    pub drift: Vec<f64>,
}

impl PointEval {
    pub fn hsq(&self) -> f64 {
        self.h.iter().map(|v| v * v).sum()
    }

    pub fn energy(&self) -> f64 {
        0.5 * self.velocity.iter().map(|v| v * v).sum::<f64>() + 0.5 * self.hsq()
    }
}

/// `c(x̄) + wᵀh(x̄)` for a fixed weight vector `w`.
struct WeightedObjective<'a, P> {
    problem: &'a P,
    weights: &'a [f64],
}

impl<P: NlpProblem> ScalarFunction for WeightedObjective<'_, P> {
    fn eval<S: Scalar>(&self, x: &[S]) -> S {
        let mut h = vec![S::zero(); self.problem.num_constraints()];
        self.problem.constraints(x, &mut h);
        h.iter()
            .zip(self.weights)
            .fold(self.problem.cost(x), |acc, (&hi, &w)| acc + hi * w)
    }
}

/// `∇c + Jᵀw` by the requested method.
fn lagrangian_gradient<P: NlpProblem>(
    nlp: &P,
    x: &[f64],
    weights: &[f64],
    method: &GradientMethod,
) -> Result<Vec<f64>> {
    match method {
        GradientMethod::Exact => {
            let mut g = nlp.cost_gradient(x)?;
            if nlp.num_constraints() > 0 {
                let jtw = nlp.constraint_vjp(x, weights)?;
                g.iter_mut().zip(&jtw).for_each(|(a, b)| *a += b);
            }
            Ok(g)
        }
        GradientMethod::FiniteDifference { .. } => {
            let mut g = diffgrad::gradient(&CostOf(nlp), x, method)?;
            if nlp.num_constraints() > 0 {
                let jac = diffgrad::jacobian(&ConstraintsOf(nlp), x, method)?;
                let jtw = jac.tr_mul(&DVector::from_column_slice(weights));
                g.iter_mut().zip(jtw.iter()).for_each(|(a, b)| *a += b);
            }
            Ok(g)
        }
        GradientMethod::Smoothed { .. } => {
            let f = WeightedObjective {
                problem: nlp,
                weights,
            };
            diffgrad::gradient(&f, x, method)
        }
    }
}

pub(crate) fn evaluate<P: NlpProblem>(
    nlp: &P,
    x: &[f64],
    lambda: &[f64],
    mu: f64,
    barrier_weight: f64,
    method: &GradientMethod,
) -> Result<PointEval> {
    check_dim("decision vector", nlp.num_variables(), x.len())?;
    check_dim("multiplier vector", nlp.num_constraints(), lambda.len())?;
    let barrier = if barrier_weight > 0.0 {
        Some(barrier_gradient(nlp.lower_bounds(), nlp.upper_bounds(), x)?)
    } else {
        None
    };
    let cost = nlp.cost(x);
    let h = nlp.constraint_values(x);
    if !cost.is_finite() {
        return Err(Error::NonFinite {
            what: "cost",
            coordinate: None,
        });
    }
    if let Some(i) = h.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "constraints",
            coordinate: Some(i),
        });
    }
    let weights: Vec<f64> = lambda.iter().zip(&h).map(|(l, hi)| l + mu * hi).collect();
    let velocity = lagrangian_gradient(nlp, x, &weights, method)?;
    let mut drift = velocity.clone();
    if let Some(bg) = barrier {
        drift
            .iter_mut()
            .zip(&bg)
            .for_each(|(d, b)| *d += barrier_weight * b);
    }
    if let Some(i) = drift.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "drift",
            coordinate: Some(i),
        });
    }
    Ok(PointEval {
        cost,
        h,
        velocity,
        drift,
    })
}

fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { what, expected, got })
    }
}

/// `∇c(x̄) + J(x̄)ᵀλ + μ J(x̄)ᵀh(x̄) + β ∇B(x̄)` with exact derivatives.
pub fn drift<P: NlpProblem>(
    nlp: &P,
    xbar: &[f64],
    lambda: &[f64],
    mu: f64,
    barrier_weight: f64,
) -> Result<Vec<f64>> {
    drift_with(nlp, xbar, lambda, mu, barrier_weight, &GradientMethod::Exact)
}

pub fn drift_with<P: NlpProblem>(
    nlp: &P,
    xbar: &[f64],
    lambda: &[f64],
    mu: f64,
    barrier_weight: f64,
    method: &GradientMethod,
) -> Result<Vec<f64>> {
    Ok(evaluate(nlp, xbar, lambda, mu, barrier_weight, method)?.drift)
}

/// `½‖v‖² + ½‖h‖²` where `v` is the drift without the barrier term.
pub fn energy<P: NlpProblem>(nlp: &P, xbar: &[f64], lambda: &[f64], mu: f64) -> Result<f64> {
    Ok(evaluate(nlp, xbar, lambda, mu, 0.0, &GradientMethod::Exact)?.energy())
}

/// The scalar whose gradient the drift is:
/// `c(x̄) + λᵀh(x̄) + (μ/2)‖h(x̄)‖² + β B(x̄)`.
pub struct MeritFunction<'a, P> {
    pub problem: &'a P,
    pub lambda: &'a [f64],
    pub mu: f64,
    pub barrier_weight: f64,
}

impl<P: NlpProblem> ScalarFunction for MeritFunction<'_, P> {
    fn eval<S: Scalar>(&self, x: &[S]) -> S {
        let p = self.problem;
        let mut h = vec![S::zero(); p.num_constraints()];
        p.constraints(x, &mut h);
        let mut total = p.cost(x);
        for (&hi, &l) in h.iter().zip(self.lambda) {
            total += hi * l + hi * hi * (0.5 * self.mu);
        }
        if self.barrier_weight > 0.0 {
            let mut barrier = S::zero();
            for (i, &xi) in x.iter().enumerate() {
                let (lo, hi) = (p.lower_bounds()[i], p.upper_bounds()[i]);
                if hi.is_finite() {
                    barrier -= (-xi + hi).ln();
                }
                if lo.is_finite() {
                    barrier -= (xi - lo).ln();
                }
            }
            total += barrier * self.barrier_weight;
        }
        total
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub xbar: Vec<f64>,
    pub lambda: Vec<f64>,
    pub iter: usize,
    /// Noise level used by the most recent step.
    pub sigma: f64,
}

impl ChainState {
    pub fn new(xbar: Vec<f64>, lambda: Vec<f64>) -> Self {
        ChainState {
            xbar,
            lambda,
            iter: 0,
            sigma: 0.0,
        }
    }
}

/// Parameters of one Euler-Maruyama step.
#[derive(Clone, Copy, Debug)]
pub(crate) struct StepParams<'a> {
    pub alpha: f64,
    pub mu: f64,
    pub sigma: f64,
    pub barrier_weight: f64,
    pub method: &'a GradientMethod,
}

/// The shared stepping kernel. Returns the new state and the evaluation at
/// the pre-step point. `rng` is only drawn from when `sigma > 0`.
pub(crate) fn advance<P: NlpProblem, R: Rng + ?Sized>(
    nlp: &P,
    state: &ChainState,
    params: StepParams<'_>,
    rng: &mut R,
) -> Result<(ChainState, PointEval)> {
    let eval = evaluate(
        nlp,
        &state.xbar,
        &state.lambda,
        params.mu,
        params.barrier_weight,
        params.method,
    )?;
    let n = state.xbar.len();
    let guard_bounds = params.barrier_weight > 0.0;
    let (lower, upper) = (nlp.lower_bounds(), nlp.upper_bounds());
    let mut next = vec![0.0; n];
    let mut alpha = params.alpha;
    let mut accepted = false;
    for _ in 0..=MAX_STEP_RETRIES {
        let half = 0.5 * alpha;
        for (i, xn) in next.iter_mut().enumerate() {
            *xn = state.xbar[i] - half * eval.drift[i];
        }
        if params.sigma > 0.0 {
            let scale = params.sigma * alpha.sqrt();
            for xn in next.iter_mut() {
                let eps: f64 = rng.sample(StandardNormal);
                *xn += scale * eps;
            }
        }
        if !guard_bounds || first_bound_violation(&next, lower, upper).is_none() {
            accepted = true;
            break;
        }
        alpha *= 0.5;
    }
    if !accepted {
        return Err(Error::StepRejected {
            retries: MAX_STEP_RETRIES,
        });
    }
    let step = params.alpha * params.mu;
    let lambda = state
        .lambda
        .iter()
        .zip(&eval.h)
        .map(|(l, h)| l + step * h)
        .collect();
    Ok((
        ChainState {
            xbar: next,
            lambda,
            iter: state.iter + 1,
            sigma: params.sigma,
        },
        eval,
    ))
}

fn step_method(config: &SolverConfig, iter: usize) -> GradientMethod {
    match config.gradient {
        GradientMethod::Smoothed {
            samples,
            stddev,
            seed,
        } => GradientMethod::Smoothed {
            samples,
            stddev,
            seed: seed ^ config.seed.rotate_left(32) ^ (iter as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
        },
        ref other => other.clone(),
    }
}

/// One Euler-Maruyama step of the constrained diffusion.
pub fn step<P: NlpProblem, R: Rng + ?Sized>(
    nlp: &P,
    state: &ChainState,
    config: &SolverConfig,
    rng: &mut R,
) -> Result<ChainState> {
    config.validate()?;
    let method = step_method(config, state.iter);
    let params = StepParams {
        alpha: config.alpha,
        mu: config.mu,
        sigma: noise_schedule(state.iter, config),
        barrier_weight: config.barrier_weight_at(state.iter),
        method: &method,
    };
    Ok(advance(nlp, state, params, rng)?.0)
}

/// Diagnostics at one iteration, taken at the pre-step point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub cost: f64,
    pub hsq: f64,
    pub energy: f64,
    pub sigma: f64,
    pub barrier_weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub iter: usize,
    pub xbar: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    pub snapshot_stride: usize,
    pub snapshots: Vec<Snapshot>,
}

impl Trace {
    pub fn with_stride(snapshot_stride: usize) -> Self {
        Trace {
            records: Vec::new(),
            snapshot_stride,
            snapshots: Vec::new(),
        }
    }

    pub(crate) fn record(&mut self, iter: usize, eval: &PointEval, sigma: f64, barrier_weight: f64, x: &[f64]) {
        self.records.push(TraceRecord {
            iter,
            cost: eval.cost,
            hsq: eval.hsq(),
            energy: eval.energy(),
            sigma,
            barrier_weight,
        });
        if self.snapshot_stride > 0 && iter.is_multiple_of(self.snapshot_stride) {
            self.snapshots.push(Snapshot {
                iter,
                xbar: x.to_vec(),
            });
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn hsq(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.hsq)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    /// Which routine produced this (`diffusion`, `gd`, `bfgs`).
    pub solver: String,
    pub xbar: Vec<f64>,
    pub lambda: Vec<f64>,
    /// `‖h(x̄)‖²` at the final point.
    pub violation: f64,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub layout: Option<Layout>,
    pub trace: Trace,
    pub duration: Duration,
    /// Echo of the configuration that produced this run.
    pub config: serde_json::Value,
}

impl Solution {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn finish<P: NlpProblem>(
        nlp: &P,
        solver: &str,
        state: ChainState,
        trace: Trace,
        started: Instant,
        converged: bool,
        config: serde_json::Value,
        layout: Option<Layout>,
    ) -> Self {
        let h = nlp.constraint_values(&state.xbar);
        Solution {
            solver: solver.to_string(),
            violation: h.iter().map(|v| v * v).sum(),
            cost: nlp.cost(&state.xbar),
            iterations: state.iter,
            xbar: state.xbar,
            lambda: state.lambda,
            converged,
            layout,
            trace,
            duration: started.elapsed(),
            config,
        }
    }

    pub fn duration_ms(&self) -> f64 {
        self.duration.as_secs_f64() * 1e3
    }

    /// Controls and states, when the problem is a transcribed trajectory.
    pub fn trajectory(&self) -> Result<crate::nlp::Trajectory> {
        crate::nlp::DecisionVector {
            data: self.xbar.clone(),
            layout: self.layout,
        }
        .unpack()
    }
}

/// A failed run with whatever was computed before the failure.
#[derive(Debug, Clone, thiserror::Error)]
#[error("{error}")]
pub struct SolveError {
    pub error: Error,
    pub partial: Option<Box<Solution>>,
}

impl From<Error> for SolveError {
    fn from(error: Error) -> Self {
        SolveError { error, partial: None }
    }
}

pub(crate) fn check_start<P: NlpProblem>(nlp: &P, x0: &[f64], lambda0: &[f64], guard_bounds: bool) -> Result<()> {
    check_dim("initial decision vector", nlp.num_variables(), x0.len())?;
    check_dim("initial multipliers", nlp.num_constraints(), lambda0.len())?;
    if guard_bounds {
        if let Some(i) = first_bound_violation(x0, nlp.lower_bounds(), nlp.upper_bounds()) {
            return Err(Error::BarrierDomain {
                index: i,
                value: x0[i],
                lower: nlp.lower_bounds()[i],
                upper: nlp.upper_bounds()[i],
            });
        }
    }
    Ok(())
}

pub fn noise_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// RNG stream for drawing initial guesses, independent of the noise stream.
pub fn guess_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// Runs one chain for `config.iterations` steps.
pub fn solve<P: NlpProblem>(
    nlp: &P,
    x0: &[f64],
    lambda0: &[f64],
    config: &SolverConfig,
) -> Result<Solution, SolveError> {
    solve_with_layout(nlp, x0, lambda0, config, None)
}

pub fn solve_with_layout<P: NlpProblem>(
    nlp: &P,
    x0: &[f64],
    lambda0: &[f64],
    config: &SolverConfig,
    layout: Option<Layout>,
) -> Result<Solution, SolveError> {
    config.validate()?;
    check_start(nlp, x0, lambda0, config.barrier_weight > 0.0)?;
    let started = Instant::now();
    let echo = serde_json::to_value(config).unwrap_or_default();
    let mut rng = noise_rng(config.seed);
    let mut state = ChainState::new(x0.to_vec(), lambda0.to_vec());
    let mut trace = Trace::with_stride(config.snapshot_stride);
    trace.records.reserve(config.iterations);
    for i in 0..config.iterations {
        let method = step_method(config, i);
        let sigma = noise_schedule(i, config);
        let beta = config.barrier_weight_at(i);
        let params = StepParams {
            alpha: config.alpha,
            mu: config.mu,
            sigma,
            barrier_weight: beta,
            method: &method,
        };
        match advance(nlp, &state, params, &mut rng) {
            Ok((next, eval)) => {
                trace.record(i, &eval, sigma, beta, &state.xbar);
                state = next;
            }
            Err(error) => {
                let partial = Solution::finish(nlp, "diffusion", state, trace, started, false, echo, layout);
                return Err(SolveError {
                    error,
                    partial: Some(Box::new(partial)),
                });
            }
        }
    }
    Ok(Solution::finish(nlp, "diffusion", state, trace, started, true, echo, layout))
}

#[derive(Debug)]
pub struct BatchResult {
    pub results: Vec<Result<Solution, SolveError>>,
    pub wall_clock: Duration,
}

impl BatchResult {
    pub fn wall_clock_ms(&self) -> f64 {
        self.wall_clock.as_secs_f64() * 1e3
    }

    pub fn all_ok(&self) -> bool {
        self.results.iter().all(Result::is_ok)
    }
}

/// Runs `x0s.len()` independent chains; chain `i` uses seed `seed + i`.
///
/// `threads = None` uses the global rayon pool.
pub fn solve_batch<P: NlpProblem>(
    nlp: &P,
    x0s: &[Vec<f64>],
    config: &SolverConfig,
    threads: Option<usize>,
) -> Result<BatchResult> {
    solve_batch_with(nlp, x0s, threads, |i, x0| {
        let mut cfg = config.clone();
        cfg.seed = config.seed.wrapping_add(i as u64);
        let lambda0 = vec![0.0; nlp.num_constraints()];
        solve(nlp, x0, &lambda0, &cfg)
    })
}

/// Runs `run(i, x0s[i])` for every chain, in parallel, preserving order.
pub fn solve_batch_with<P, F>(
    _nlp: &P,
    x0s: &[Vec<f64>],
    threads: Option<usize>,
    run: F,
) -> Result<BatchResult>
where
    P: NlpProblem,
    F: Fn(usize, &[f64]) -> Result<Solution, SolveError> + Sync + Send,
{
    let started = Instant::now();
    let work = || -> Vec<Result<Solution, SolveError>> {
        x0s.par_iter()
            .enumerate()
            .map(|(i, x0)| run(i, x0))
            .collect()
    };
    let results = match threads {
        Some(t) => {
            if t == 0 {
                return Err(Error::InvalidConfig("thread count must be at least 1".into()));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("cannot build thread pool: {e}")))?
                .install(work)
        }
        None => work(),
    };
    Ok(BatchResult {
        results,
        wall_clock: started.elapsed(),
    })
}
