//! Deterministic comparison methods: noise-free constrained differential
//! optimization and BFGS on the quadratic-penalty merit.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::diffgrad::GradientMethod;
use crate::error::{Error, Result};
use crate::nlp::{first_bound_violation, Layout, NlpProblem};
use crate::solver::{
    advance, barrier_value, check_start, evaluate, noise_rng, ChainState, PointEval, Solution,
    SolveError, StepParams, Trace,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BfgsSettings {
    /// Sufficient-decrease constant of the Armijo test.
    pub armijo: f64,
    pub backtrack: f64,
    pub max_line_search: usize,
}

impl Default for BfgsSettings {
    fn default() -> Self {
        BfgsSettings {
            armijo: 1e-4,
            backtrack: 0.5,
            max_line_search: 30,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub alpha: f64,
    pub mu: f64,
    pub barrier_weight: f64,
    pub iterations: usize,
    pub bfgs: BfgsSettings,
    /// BFGS stops once the merit gradient norm drops to this value.
    pub tolerance: f64,
    pub snapshot_stride: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            alpha: 0.06,
            mu: 10.0,
            barrier_weight: 0.0075,
            iterations: 20_000,
            bfgs: BfgsSettings::default(),
            tolerance: 1e-8,
            snapshot_stride: 100,
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return fail(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return fail(format!("mu must be positive, got {}", self.mu));
        }
        if !(self.barrier_weight >= 0.0 && self.barrier_weight.is_finite()) {
            return fail(format!("barrier weight must be non-negative, got {}", self.barrier_weight));
        }
        if self.iterations == 0 {
            return fail("iterations must be at least 1".into());
        }
        let b = &self.bfgs;
        if !(b.armijo > 0.0 && b.armijo < 1.0 && b.backtrack > 0.0 && b.backtrack < 1.0) {
            return fail("armijo constant and backtracking factor must lie in (0, 1)".into());
        }
        if !(self.tolerance >= 0.0) {
            return fail(format!("tolerance must be non-negative, got {}", self.tolerance));
        }
        Ok(())
    }
}

/// The diffusion recurrence with `σ ≡ 0`.
pub fn gradient_descent_cdo<P: NlpProblem>(
    nlp: &P,
    x0: &[f64],
    lambda0: &[f64],
    config: &BaselineConfig,
) -> Result<Solution, SolveError> {
    gradient_descent_cdo_with_layout(nlp, x0, lambda0, config, None)
}

pub fn gradient_descent_cdo_with_layout<P: NlpProblem>(
    nlp: &P,
    x0: &[f64],
    lambda0: &[f64],
    config: &BaselineConfig,
    layout: Option<Layout>,
) -> Result<Solution, SolveError> {
    config.validate()?;
    check_start(nlp, x0, lambda0, config.barrier_weight > 0.0)?;
    let started = Instant::now();
    let echo = serde_json::to_value(config).unwrap_or_default();
    // Never drawn from: sigma is zero.
    let mut rng = noise_rng(0);
    let method = GradientMethod::Exact;
    let mut state = ChainState::new(x0.to_vec(), lambda0.to_vec());
    let mut trace = Trace::with_stride(config.snapshot_stride);
    trace.records.reserve(config.iterations);
    for i in 0..config.iterations {
        let params = StepParams {
            alpha: config.alpha,
            mu: config.mu,
            sigma: 0.0,
            barrier_weight: config.barrier_weight,
            method: &method,
        };
        match advance(nlp, &state, params, &mut rng) {
            Ok((next, eval)) => {
                trace.record(i, &eval, 0.0, config.barrier_weight, &state.xbar);
                state = next;
            }
            Err(error) => {
                let partial = Solution::finish(nlp, "gd", state, trace, started, false, echo, layout);
                return Err(SolveError {
                    error,
                    partial: Some(Box::new(partial)),
                });
            }
        }
    }
    Ok(Solution::finish(nlp, "gd", state, trace, started, true, echo, layout))
}

/// `c(x̄) + (μ/2)‖h(x̄)‖² + β B(x̄)`; infinite outside the barrier domain.
pub fn penalty_merit<P: NlpProblem>(nlp: &P, x: &[f64], mu: f64, barrier_weight: f64) -> f64 {
    let h = nlp.constraint_values(x);
    let hsq: f64 = h.iter().map(|v| v * v).sum();
    let mut merit = nlp.cost(x) + 0.5 * mu * hsq;
    if barrier_weight > 0.0 {
        match barrier_value(nlp.lower_bounds(), nlp.upper_bounds(), x) {
            Ok(b) => merit += barrier_weight * b,
            Err(_) => return f64::INFINITY,
        }
    }
    if merit.is_nan() {
        f64::INFINITY
    } else {
        merit
    }
}

fn merit_eval<P: NlpProblem>(nlp: &P, x: &[f64], config: &BaselineConfig) -> Result<PointEval> {
    let zeros = vec![0.0; nlp.num_constraints()];
    evaluate(nlp, x, &zeros, config.mu, config.barrier_weight, &GradientMethod::Exact)
}

/// Dense BFGS with Armijo backtracking on the penalty merit (no multipliers).
///
/// An accepted step is refined once by minimizing the quadratic model of
/// the merit along the search direction, kept only if it lowers the merit.
pub fn bfgs_penalty<P: NlpProblem>(nlp: &P, x0: &[f64], config: &BaselineConfig) -> Result<Solution, SolveError> {
    bfgs_penalty_with_layout(nlp, x0, config, None)
}

pub fn bfgs_penalty_with_layout<P: NlpProblem>(
    nlp: &P,
    x0: &[f64],
    config: &BaselineConfig,
    layout: Option<Layout>,
) -> Result<Solution, SolveError> {
    config.validate()?;
    let m = nlp.num_constraints();
    check_start(nlp, x0, &vec![0.0; m], config.barrier_weight > 0.0)?;
    let started = Instant::now();
    let echo = serde_json::to_value(config).unwrap_or_default();
    let n = x0.len();
    let guard = config.barrier_weight > 0.0;
    let settings = &config.bfgs;

    let multipliers = |x: &[f64]| -> Vec<f64> {
        nlp.constraint_values(x).iter().map(|h| config.mu * h).collect()
    };

    let mut x = DVector::from_column_slice(x0);
    let mut eval = merit_eval(nlp, x.as_slice(), config)?;
    let mut merit = penalty_merit(nlp, x.as_slice(), config.mu, config.barrier_weight);
    let mut grad = DVector::from_column_slice(&eval.drift);
    let mut inv_hessian = DMatrix::<f64>::identity(n, n);
    let mut scaled = false;
    let mut trace = Trace::with_stride(config.snapshot_stride);
    let mut converged = false;
    let mut iter = 0;

    while iter < config.iterations {
        trace.record(iter, &eval, 0.0, config.barrier_weight, x.as_slice());
        if grad.norm() <= config.tolerance {
            converged = true;
            break;
        }
        let mut direction = -(&inv_hessian * &grad);
        let mut slope = grad.dot(&direction);
        if !(slope < 0.0) {
            inv_hessian.fill_with_identity();
            direction = -grad.clone();
            slope = grad.dot(&direction);
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..settings.max_line_search {
            let trial = &x + t * &direction;
            let inside = !guard || first_bound_violation(trial.as_slice(), nlp.lower_bounds(), nlp.upper_bounds()).is_none();
            if inside {
                let trial_merit = penalty_merit(nlp, trial.as_slice(), config.mu, config.barrier_weight);
                if trial_merit <= merit + settings.armijo * t * slope {
                    accepted = Some((trial, trial_merit));
                    break;
                }
            }
            t *= settings.backtrack;
        }
        let Some((mut next, mut next_merit)) = accepted else {
            break;
        };
        // Quadratic model through φ(0), φ'(0), φ(t); exact on quadratics.
        let curvature = next_merit - merit - slope * t;
        if curvature > 0.0 {
            let t_model = -slope * t * t / (2.0 * curvature);
            if t_model.is_finite() && t_model > 0.0 && (t_model - t).abs() > 1e-12 * t {
                let trial = &x + t_model * &direction;
                let inside = !guard
                    || first_bound_violation(trial.as_slice(), nlp.lower_bounds(), nlp.upper_bounds()).is_none();
                if inside {
                    let trial_merit = penalty_merit(nlp, trial.as_slice(), config.mu, config.barrier_weight);
                    if trial_merit < next_merit && trial_merit <= merit + settings.armijo * t_model * slope {
                        next = trial;
                        next_merit = trial_merit;
                    }
                }
            }
        }
        let next_eval = match merit_eval(nlp, next.as_slice(), config) {
            Ok(e) => e,
            Err(error) => {
                let state = ChainState {
                    lambda: multipliers(x.as_slice()),
                    xbar: x.as_slice().to_vec(),
                    iter,
                    sigma: 0.0,
                };
                let partial = Solution::finish(nlp, "bfgs", state, trace, started, false, echo, layout);
                return Err(SolveError {
                    error,
                    partial: Some(Box::new(partial)),
                });
            }
        };
        let next_grad = DVector::from_column_slice(&next_eval.drift);
        let s = &next - &x;
        let y = &next_grad - &grad;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if !scaled {
                inv_hessian *= sy / y.dot(&y);
                scaled = true;
            }
            let rho = 1.0 / sy;
            let hy = &inv_hessian * &y;
            let yhy = y.dot(&hy);
            // H ← H − ρ(H y sᵀ + s yᵀ H) + (ρ² yᵀHy + ρ) s sᵀ
            inv_hessian.ger(-rho, &hy, &s, 1.0);
            inv_hessian.ger(-rho, &s, &hy, 1.0);
            inv_hessian.ger(rho * rho * yhy + rho, &s, &s, 1.0);
        }
        x = next;
        grad = next_grad;
        eval = next_eval;
        merit = next_merit;
        iter += 1;
    }

    let state = ChainState {
        lambda: multipliers(x.as_slice()),
        xbar: x.as_slice().to_vec(),
        iter,
        sigma: 0.0,
    };
    Ok(Solution::finish(nlp, "bfgs", state, trace, started, converged, echo, layout))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dual::Scalar;
    use crate::problems::{toy_kkt_problem, ToyKkt};

    struct Bowl {
        center: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    }

    impl Bowl {
        fn new(center: Vec<f64>) -> Self {
            let n = center.len();
            Bowl {
                center,
                lower: vec![f64::NEG_INFINITY; n],
                upper: vec![f64::INFINITY; n],
            }
        }
    }

    impl NlpProblem for Bowl {
        fn num_variables(&self) -> usize {
            self.center.len()
        }
        fn num_constraints(&self) -> usize {
            0
        }
        fn lower_bounds(&self) -> &[f64] {
            &self.lower
        }
        fn upper_bounds(&self) -> &[f64] {
            &self.upper
        }
        fn cost<S: Scalar>(&self, x: &[S]) -> S {
            // Ill-conditioned coupled quadratic.
            let mut total = S::zero();
            for (i, (&xi, &ci)) in x.iter().zip(&self.center).enumerate() {
                let d = xi - ci;
                total += d * d * (1.0 + i as f64 * 2.0);
            }
            let d0 = x[0] - self.center[0];
            let d1 = x[1] - self.center[1];
            total + d0 * d1 * 0.8
        }
        fn constraints<S: Scalar>(&self, _x: &[S], _out: &mut [S]) {}
    }

    #[test]
    fn gd_converges_on_toy_problem() {
        let toy = toy_kkt_problem();
        let cfg = BaselineConfig {
            barrier_weight: 0.0,
            ..BaselineConfig::default()
        };
        let sol = gradient_descent_cdo(&toy, &[0.9, -0.4], &[0.0], &cfg).unwrap();
        assert!((sol.xbar[0] - 0.5).abs() < 1e-3 && (sol.xbar[1] - 0.5).abs() < 1e-3);
        assert!((sol.lambda[0] - ToyKkt::MULTIPLIER).abs() < 1e-3);
        assert_eq!(sol.trace.len(), cfg.iterations);
        assert!(sol.trace.records.iter().all(|r| r.sigma == 0.0));
    }

    #[test]
    fn bfgs_penalty_minimizer_on_toy_problem() {
        // Penalty minimizer: x = μ/(1 + 2μ) · (1, 1).
        let toy = toy_kkt_problem();
        let cfg = BaselineConfig {
            mu: 100.0,
            barrier_weight: 0.0,
            iterations: 200,
            ..BaselineConfig::default()
        };
        let sol = bfgs_penalty(&toy, &[-1.0, 2.0], &cfg).unwrap();
        let exact = 100.0 / 201.0;
        assert!((sol.xbar[0] - exact).abs() < 1e-7 && (sol.xbar[1] - exact).abs() < 1e-7);
        assert!((sol.xbar[0] - 0.5).abs() < 1e-2);
        assert!(sol.converged);
    }

    #[test]
    fn bfgs_on_quadratic_bowl() {
        let center = vec![1.0, -2.0, 0.5];
        let bowl = Bowl::new(center.clone());
        let cfg = BaselineConfig {
            barrier_weight: 0.0,
            iterations: 100,
            ..BaselineConfig::default()
        };
        let sol = bfgs_penalty(&bowl, &[0.0, 0.0, 0.0], &cfg).unwrap();
        assert!(sol.converged);
        for (a, b) in sol.xbar.iter().zip(&center) {
            assert!((a - b).abs() < 1e-8, "{:?}", sol.xbar);
        }
        assert!(sol.iterations <= center.len() + 2, "took {} iterations", sol.iterations);
    }

    #[test]
    fn bfgs_merit_decreases_monotonically() {
        let toy = toy_kkt_problem();
        let cfg = BaselineConfig {
            mu: 30.0,
            barrier_weight: 0.0,
            iterations: 100,
            ..BaselineConfig::default()
        };
        let sol = bfgs_penalty(&toy, &[3.0, -2.0], &cfg).unwrap();
        let merits: Vec<f64> = sol
            .trace
            .records
            .iter()
            .map(|r| r.cost + 0.5 * cfg.mu * r.hsq)
            .collect();
        assert!(merits.windows(2).all(|w| w[1] <= w[0]), "{merits:?}");
    }

    #[test]
    fn baseline_config_validation() {
        assert!(BaselineConfig::default().validate().is_ok());
        assert!(BaselineConfig { alpha: 0.0, ..Default::default() }.validate().is_err());
        assert!(BaselineConfig { iterations: 0, ..Default::default() }.validate().is_err());
        let mut bad = BaselineConfig::default();
        bad.bfgs.backtrack = 1.0;
        assert!(bad.validate().is_err());
    }
}
