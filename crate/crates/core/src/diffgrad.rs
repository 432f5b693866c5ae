//! Gradients and Jacobians by forward-mode dual numbers, central finite
//! differences, or antithetic randomized smoothing.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dual::{Dual, Scalar};
use crate::error::{Error, Result};

/// Default relative step for central differences.
pub const DEFAULT_FD_STEP: f64 = 1e-6;
pub const DEFAULT_SMOOTHING_SAMPLES: usize = 64;
pub const DEFAULT_SMOOTHING_STDDEV: f64 = 1e-2;

/// A scalar field written generically over the numeric type.
pub trait ScalarFunction: Sync {
    fn eval<S: Scalar>(&self, x: &[S]) -> S;
}

/// A vector field `ℝⁿ → ℝᵐ` written generically over the numeric type.
pub trait VectorFunction: Sync {
    fn output_dim(&self) -> usize;
    fn eval<S: Scalar>(&self, x: &[S], out: &mut [S]);
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GradientMethod {
    /// Forward-mode dual numbers.
    #[default]
    Exact,
    /// Central differences with step `step · max(1, |xᵢ|)`.
    FiniteDifference { step: f64 },
    /// Antithetic Gaussian smoothing.
    Smoothed { samples: usize, stddev: f64, seed: u64 },
}

impl GradientMethod {
    pub fn finite_difference() -> Self {
        GradientMethod::FiniteDifference {
            step: DEFAULT_FD_STEP,
        }
    }

    pub fn smoothed(seed: u64) -> Self {
        GradientMethod::Smoothed {
            samples: DEFAULT_SMOOTHING_SAMPLES,
            stddev: DEFAULT_SMOOTHING_STDDEV,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            GradientMethod::Exact => Ok(()),
            GradientMethod::FiniteDifference { step } => {
                if step > 0.0 && step.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidConfig(format!(
                        "finite-difference step must be positive, got {step}"
                    )))
                }
            }
            GradientMethod::Smoothed {
                samples, stddev, ..
            } => {
                if samples < 2 {
                    Err(Error::InvalidConfig(format!(
                        "smoothing needs at least 2 samples, got {samples}"
                    )))
                } else if !(stddev > 0.0 && stddev.is_finite()) {
                    Err(Error::InvalidConfig(format!(
                        "smoothing stddev must be positive, got {stddev}"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }
}

fn finite(v: f64, what: &'static str, coordinate: Option<usize>) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFinite { what, coordinate })
    }
}

pub fn gradient<F: ScalarFunction>(f: &F, x: &[f64], method: &GradientMethod) -> Result<Vec<f64>> {
    method.validate()?;
    match *method {
        GradientMethod::Exact => exact_gradient(f, x),
        GradientMethod::FiniteDifference { step } => {
            finite_difference_gradient(|p| f.eval(p), x, step)
        }
        GradientMethod::Smoothed {
            samples,
            stddev,
            seed,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            smoothed_gradient(|p| f.eval(p), x, samples, stddev, &mut rng)
        }
    }
}

/// One dual-number pass per coordinate.
pub fn exact_gradient<F: ScalarFunction>(f: &F, x: &[f64]) -> Result<Vec<f64>> {
    let mut probe: Vec<Dual> = x.iter().map(|&v| Dual::constant(v)).collect();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i].eps = 1.0;
        let out = f.eval(&probe);
        probe[i].eps = 0.0;
        finite(out.re, "function value", Some(i))?;
        grad.push(finite(out.eps, "derivative", Some(i))?);
    }
    Ok(grad)
}

#[inline]
fn fd_step(step: f64, xi: f64) -> f64 {
    step * xi.abs().max(1.0)
}

pub fn finite_difference_gradient(
    f: impl Fn(&[f64]) -> f64,
    x: &[f64],
    step: f64,
) -> Result<Vec<f64>> {
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let h = fd_step(step, x[i]);
        probe[i] = x[i] + h;
        let fp = finite(f(&probe), "function value", Some(i))?;
        probe[i] = x[i] - h;
        let fm = finite(f(&probe), "function value", Some(i))?;
        probe[i] = x[i];
        grad.push((fp - fm) / (2.0 * h));
    }
    Ok(grad)
}

/// Average of `(f(x+σε) − f(x−σε)) / (2σ) · ε` over `samples` standard
/// normal draws. Unbiased for linear `f`; exactly zero for constant `f`.
pub fn smoothed_gradient<R: rand::Rng + ?Sized>(
    f: impl Fn(&[f64]) -> f64,
    x: &[f64],
    samples: usize,
    stddev: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let n = x.len();
    let mut grad = vec![0.0; n];
    let mut eps = vec![0.0; n];
    let mut plus = vec![0.0; n];
    let mut minus = vec![0.0; n];
    for _ in 0..samples {
        for i in 0..n {
            eps[i] = StandardNormal.sample(rng);
            plus[i] = x[i] + stddev * eps[i];
            minus[i] = x[i] - stddev * eps[i];
        }
        let fp = finite(f(&plus), "function value", None)?;
        let fm = finite(f(&minus), "function value", None)?;
        let slope = (fp - fm) / (2.0 * stddev);
        for i in 0..n {
            grad[i] += slope * eps[i];
        }
    }
    let inv = 1.0 / samples as f64;
    grad.iter_mut().for_each(|g| *g *= inv);
    Ok(grad)
}

pub fn jacobian<H: VectorFunction>(h: &H, x: &[f64], method: &GradientMethod) -> Result<DMatrix<f64>> {
    method.validate()?;
    let m = h.output_dim();
    let n = x.len();
    match *method {
        GradientMethod::Exact => exact_jacobian(h, x),
        GradientMethod::FiniteDifference { step } => {
            let mut jac = DMatrix::zeros(m, n);
            let mut probe = x.to_vec();
            let mut fp = vec![0.0; m];
            let mut fm = vec![0.0; m];
            for j in 0..n {
                let dx = fd_step(step, x[j]);
                probe[j] = x[j] + dx;
                h.eval(&probe, &mut fp);
                probe[j] = x[j] - dx;
                h.eval(&probe, &mut fm);
                probe[j] = x[j];
                for i in 0..m {
                    finite(fp[i], "constraint value", Some(j))?;
                    finite(fm[i], "constraint value", Some(j))?;
                    jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * dx);
                }
            }
            Ok(jac)
        }
        GradientMethod::Smoothed {
            samples,
            stddev,
            seed,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut jac = DMatrix::zeros(m, n);
            let mut eps = vec![0.0; n];
            let mut plus = vec![0.0; n];
            let mut minus = vec![0.0; n];
            let mut fp = vec![0.0; m];
            let mut fm = vec![0.0; m];
            for _ in 0..samples {
                for j in 0..n {
                    eps[j] = StandardNormal.sample(&mut rng);
                    plus[j] = x[j] + stddev * eps[j];
                    minus[j] = x[j] - stddev * eps[j];
                }
                h.eval(&plus, &mut fp);
                h.eval(&minus, &mut fm);
                for i in 0..m {
                    let slope = (finite(fp[i], "constraint value", None)?
                        - finite(fm[i], "constraint value", None)?)
                        / (2.0 * stddev);
                    for j in 0..n {
                        jac[(i, j)] += slope * eps[j];
                    }
                }
            }
            jac /= samples as f64;
            Ok(jac)
        }
    }
}

/// Dense Jacobian, one dual-number pass per column.
pub fn exact_jacobian<H: VectorFunction>(h: &H, x: &[f64]) -> Result<DMatrix<f64>> {
    let m = h.output_dim();
    let n = x.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut probe: Vec<Dual> = x.iter().map(|&v| Dual::constant(v)).collect();
    let mut out = vec![Dual::default(); m];
    for j in 0..n {
        probe[j].eps = 1.0;
        h.eval(&probe, &mut out);
        probe[j].eps = 0.0;
        for (i, o) in out.iter().enumerate() {
            finite(o.re, "constraint value", Some(j))?;
            jac[(i, j)] = finite(o.eps, "constraint derivative", Some(j))?;
        }
    }
    Ok(jac)
}

/// Largest coordinate-wise `|g_exact − g_fd| / max(1, |g_exact|)`.
pub fn check_gradient<F: ScalarFunction>(f: &F, x: &[f64], step: f64) -> Result<f64> {
    if !(step > 0.0) {
        return Err(Error::InvalidConfig(format!("step must be positive, got {step}")));
    }
    let exact = exact_gradient(f, x)?;
    let fd = finite_difference_gradient(|p| f.eval(p), x, step)?;
    Ok(max_relative_error(&exact, &fd))
}

pub(crate) fn max_relative_error(reference: &[f64], other: &[f64]) -> f64 {
    reference
        .iter()
        .zip(other)
        .map(|(r, o)| (r - o).abs() / r.abs().max(1.0))
        .fold(0.0, f64::max)
}
