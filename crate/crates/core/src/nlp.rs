//! Equality-constrained nonlinear programs and the direct transcription of
//! discrete-time optimal control problems into them.
//!
//! A transcribed trajectory uses the flat layout
//! `[u_0, …, u_{K-1}, x_0, …, x_K]`; its constraints stack the dynamics
//! defects `x_{k+1} − f(x_k, u_k)` for `k = 0..K` followed by the
//! initial-condition block `x_0 − x_init`.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::diffgrad::{exact_gradient, exact_jacobian, ScalarFunction, VectorFunction};
use crate::dual::{Dual, Scalar};
use crate::error::{Error, Result};

/// `min c(x̄)  s.t.  h(x̄) = 0,  x̄_L ≤ x̄ ≤ x̄_U`.
///
/// The derivative hooks default to dense forward-mode differentiation;
/// structured problems override them.
pub trait NlpProblem: Sync {
    fn num_variables(&self) -> usize;
    fn num_constraints(&self) -> usize;
    fn lower_bounds(&self) -> &[f64];
    fn upper_bounds(&self) -> &[f64];

    fn cost<S: Scalar>(&self, x: &[S]) -> S;
    fn constraints<S: Scalar>(&self, x: &[S], out: &mut [S]);

    fn constraint_values(&self, x: &[f64]) -> Vec<f64> {
        let mut h = vec![0.0; self.num_constraints()];
        self.constraints(x, &mut h);
        h
    }

    fn cost_gradient(&self, x: &[f64]) -> Result<Vec<f64>>
    where
        Self: Sized,
    {
        exact_gradient(&CostOf(self), x)
    }

    fn constraint_jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>>
    where
        Self: Sized,
    {
        exact_jacobian(&ConstraintsOf(self), x)
    }

    /// `J(x̄)ᵀ w`.
    fn constraint_vjp(&self, x: &[f64], w: &[f64]) -> Result<Vec<f64>>
    where
        Self: Sized,
    {
        if self.num_constraints() == 0 {
            return Ok(vec![0.0; x.len()]);
        }
        let jac = self.constraint_jacobian(x)?;
        Ok(jac.tr_mul(&DVector::from_column_slice(w)).data.into())
    }
}

/// Views the cost of an [`NlpProblem`] as a [`ScalarFunction`].
pub struct CostOf<'a, P>(pub &'a P);

impl<P: NlpProblem> ScalarFunction for CostOf<'_, P> {
    fn eval<S: Scalar>(&self, x: &[S]) -> S {
        self.0.cost(x)
    }
}

/// Views the constraints of an [`NlpProblem`] as a [`VectorFunction`].
pub struct ConstraintsOf<'a, P>(pub &'a P);

impl<P: NlpProblem> VectorFunction for ConstraintsOf<'_, P> {
    fn output_dim(&self) -> usize {
        self.0.num_constraints()
    }
    fn eval<S: Scalar>(&self, x: &[S], out: &mut [S]) {
        self.0.constraints(x, out)
    }
}

/// The `i`-th constraint row as a scalar function.
pub struct ConstraintRow<'a, P> {
    pub problem: &'a P,
    pub row: usize,
}

impl<P: NlpProblem> ScalarFunction for ConstraintRow<'_, P> {
    fn eval<S: Scalar>(&self, x: &[S]) -> S {
        let mut out = vec![S::zero(); self.problem.num_constraints()];
        self.problem.constraints(x, &mut out);
        out[self.row]
    }
}

pub fn validate_bounds(n: usize, lower: &[f64], upper: &[f64]) -> Result<()> {
    if lower.len() != n {
        return Err(Error::Dimension {
            what: "lower bounds",
            expected: n,
            got: lower.len(),
        });
    }
    if upper.len() != n {
        return Err(Error::Dimension {
            what: "upper bounds",
            expected: n,
            got: upper.len(),
        });
    }
    for (i, (&lo, &hi)) in lower.iter().zip(upper).enumerate() {
        if lo.is_nan() || hi.is_nan() {
            return Err(Error::InvalidProblem(format!("bound {i} is NaN")));
        }
        if !(lo < hi) {
            return Err(Error::InvalidProblem(format!(
                "bound {i} has empty interior: [{lo}, {hi}]"
            )));
        }
    }
    Ok(())
}

/// True when every coordinate lies strictly inside its finite bounds.
pub fn is_strictly_interior(x: &[f64], lower: &[f64], upper: &[f64]) -> bool {
    first_bound_violation(x, lower, upper).is_none()
}

pub(crate) fn first_bound_violation(x: &[f64], lower: &[f64], upper: &[f64]) -> Option<usize> {
    x.iter()
        .zip(lower.iter().zip(upper))
        .position(|(&v, (&lo, &hi))| !(v > lo && v < hi))
}

/// A discrete-time optimal control problem
/// `min φ(x_K) + Σ ℓ(x_k, u_k)  s.t.  x_{k+1} = f(x_k, u_k), x_0 = x_init`.
pub trait OcpDefinition: Sync {
    fn horizon(&self) -> usize;
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    fn initial_state(&self) -> &[f64];

    fn dynamics<S: Scalar>(&self, x: &[S], u: &[S], next: &mut [S]);
    fn running_cost<S: Scalar>(&self, x: &[S], u: &[S]) -> S;
    fn terminal_cost<S: Scalar>(&self, x: &[S]) -> S;

    fn control_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let nu = self.control_dim();
        (vec![f64::NEG_INFINITY; nu], vec![f64::INFINITY; nu])
    }

    fn state_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let nx = self.state_dim();
        (vec![f64::NEG_INFINITY; nx], vec![f64::INFINITY; nx])
    }
}

/// Shape of a transcribed trajectory inside the flat decision vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub horizon: usize,
    pub state_dim: usize,
    pub control_dim: usize,
}

impl Layout {
    pub fn new(horizon: usize, state_dim: usize, control_dim: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidProblem("horizon must be at least 1".into()));
        }
        if state_dim == 0 {
            return Err(Error::InvalidProblem("state dimension must be at least 1".into()));
        }
        Ok(Layout {
            horizon,
            state_dim,
            control_dim,
        })
    }

    pub fn num_variables(&self) -> usize {
        self.horizon * self.control_dim + (self.horizon + 1) * self.state_dim
    }

    pub fn num_constraints(&self) -> usize {
        (self.horizon + 1) * self.state_dim
    }

    pub fn control_range(&self, k: usize) -> Range<usize> {
        let start = k * self.control_dim;
        start..start + self.control_dim
    }

    pub fn state_range(&self, k: usize) -> Range<usize> {
        let start = self.horizon * self.control_dim + k * self.state_dim;
        start..start + self.state_dim
    }

    /// Rows of the dynamics defect for step `k`.
    pub fn defect_range(&self, k: usize) -> Range<usize> {
        let start = k * self.state_dim;
        start..start + self.state_dim
    }

    pub fn initial_condition_range(&self) -> Range<usize> {
        self.defect_range(self.horizon)
    }
}

/// Controls and states of a transcribed trajectory, one entry per stage.
pub type Trajectory = (Vec<Vec<f64>>, Vec<Vec<f64>>);

/// A flat decision vector, optionally tagged with its trajectory layout.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionVector {
    pub data: Vec<f64>,
    pub layout: Option<Layout>,
}

impl DecisionVector {
    pub fn untyped(data: Vec<f64>) -> Self {
        DecisionVector { data, layout: None }
    }

    pub fn with_layout(data: Vec<f64>, layout: Layout) -> Result<Self> {
        if data.len() != layout.num_variables() {
            return Err(Error::Dimension {
                what: "decision vector",
                expected: layout.num_variables(),
                got: data.len(),
            });
        }
        Ok(DecisionVector {
            data,
            layout: Some(layout),
        })
    }

    /// Concatenates controls then states.
    pub fn pack(controls: &[Vec<f64>], states: &[Vec<f64>]) -> Result<Self> {
        let horizon = controls.len();
        if horizon == 0 {
            return Err(Error::InvalidProblem("at least one control is required".into()));
        }
        if states.len() != horizon + 1 {
            return Err(Error::Dimension {
                what: "state count",
                expected: horizon + 1,
                got: states.len(),
            });
        }
        let nu = controls[0].len();
        let nx = states[0].len();
        let layout = Layout::new(horizon, nx, nu)?;
        let mut data = Vec::with_capacity(layout.num_variables());
        for u in controls {
            if u.len() != nu {
                return Err(Error::Dimension {
                    what: "control vector",
                    expected: nu,
                    got: u.len(),
                });
            }
            data.extend_from_slice(u);
        }
        for x in states {
            if x.len() != nx {
                return Err(Error::Dimension {
                    what: "state vector",
                    expected: nx,
                    got: x.len(),
                });
            }
            data.extend_from_slice(x);
        }
        Ok(DecisionVector {
            data,
            layout: Some(layout),
        })
    }

    pub fn unpack(&self) -> Result<Trajectory> {
        let layout = self.layout.ok_or(Error::MissingLayout)?;
        if self.data.len() != layout.num_variables() {
            return Err(Error::Dimension {
                what: "decision vector",
                expected: layout.num_variables(),
                got: self.data.len(),
            });
        }
        let controls = (0..layout.horizon)
            .map(|k| self.data[layout.control_range(k)].to_vec())
            .collect();
        let states = (0..=layout.horizon)
            .map(|k| self.data[layout.state_range(k)].to_vec())
            .collect();
        Ok((controls, states))
    }
}

fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            got,
        })
    }
}

/// Forward simulation `x_{k+1} = f(x_k, u_k)` from `x0`.
pub fn rollout<O: OcpDefinition>(ocp: &O, controls: &[Vec<f64>], x0: &[f64]) -> Result<Vec<Vec<f64>>> {
    check_dim("control count", ocp.horizon(), controls.len())?;
    check_dim("initial state", ocp.state_dim(), x0.len())?;
    let mut states = Vec::with_capacity(controls.len() + 1);
    states.push(x0.to_vec());
    for u in controls {
        check_dim("control vector", ocp.control_dim(), u.len())?;
        let mut next = vec![0.0; ocp.state_dim()];
        ocp.dynamics(states.last().unwrap(), u, &mut next);
        states.push(next);
    }
    Ok(states)
}

/// An [`OcpDefinition`] viewed as an [`NlpProblem`].
#[derive(Clone, Debug)]
pub struct Transcription<O> {
    ocp: O,
    layout: Layout,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl<O: OcpDefinition> Transcription<O> {
    pub fn new(ocp: O) -> Result<Self> {
        let layout = Layout::new(ocp.horizon(), ocp.state_dim(), ocp.control_dim())?;
        check_dim("initial state", layout.state_dim, ocp.initial_state().len())?;
        if ocp.initial_state().iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidProblem("initial state must be finite".into()));
        }
        let (u_lo, u_hi) = ocp.control_bounds();
        let (x_lo, x_hi) = ocp.state_bounds();
        check_dim("control lower bounds", layout.control_dim, u_lo.len())?;
        check_dim("control upper bounds", layout.control_dim, u_hi.len())?;
        check_dim("state lower bounds", layout.state_dim, x_lo.len())?;
        check_dim("state upper bounds", layout.state_dim, x_hi.len())?;

        let n = layout.num_variables();
        let mut lower = Vec::with_capacity(n);
        let mut upper = Vec::with_capacity(n);
        for _ in 0..layout.horizon {
            lower.extend_from_slice(&u_lo);
            upper.extend_from_slice(&u_hi);
        }
        for _ in 0..=layout.horizon {
            lower.extend_from_slice(&x_lo);
            upper.extend_from_slice(&x_hi);
        }
        validate_bounds(n, &lower, &upper)?;
        Ok(Transcription {
            ocp,
            layout,
            lower,
            upper,
        })
    }

    pub fn ocp(&self) -> &O {
        &self.ocp
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn decision_vector(&self, data: Vec<f64>) -> Result<DecisionVector> {
        DecisionVector::with_layout(data, self.layout)
    }

    /// `∂f/∂x` (nx×nx) and `∂f/∂u` (nx×nu) at one stage, column by column.
    pub fn stage_jacobians(&self, x: &[f64], u: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
        let (nx, nu) = (self.layout.state_dim, self.layout.control_dim);
        let mut xd: Vec<Dual> = x.iter().map(|&v| Dual::constant(v)).collect();
        let mut ud: Vec<Dual> = u.iter().map(|&v| Dual::constant(v)).collect();
        let mut next = vec![Dual::default(); nx];
        let mut a = DMatrix::zeros(nx, nx);
        let mut b = DMatrix::zeros(nx, nu);
        for j in 0..nx {
            xd[j].eps = 1.0;
            self.ocp.dynamics(&xd, &ud, &mut next);
            xd[j].eps = 0.0;
            for i in 0..nx {
                a[(i, j)] = next[i].eps;
            }
        }
        for j in 0..nu {
            ud[j].eps = 1.0;
            self.ocp.dynamics(&xd, &ud, &mut next);
            ud[j].eps = 0.0;
            for i in 0..nx {
                b[(i, j)] = next[i].eps;
            }
        }
        (a, b)
    }

    fn ensure_finite(values: &[f64], what: &'static str) -> Result<()> {
        match values.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::NonFinite {
                what,
                coordinate: Some(i),
            }),
            None => Ok(()),
        }
    }
}

impl<O: OcpDefinition> NlpProblem for Transcription<O> {
    fn num_variables(&self) -> usize {
        self.layout.num_variables()
    }

    fn num_constraints(&self) -> usize {
        self.layout.num_constraints()
    }

    fn lower_bounds(&self) -> &[f64] {
        &self.lower
    }

    fn upper_bounds(&self) -> &[f64] {
        &self.upper
    }

    fn cost<S: Scalar>(&self, x: &[S]) -> S {
        let l = &self.layout;
        let mut total = self.ocp.terminal_cost(&x[l.state_range(l.horizon)]);
        for k in 0..l.horizon {
            total += self
                .ocp
                .running_cost(&x[l.state_range(k)], &x[l.control_range(k)]);
        }
        total
    }

    fn constraints<S: Scalar>(&self, x: &[S], out: &mut [S]) {
        let l = &self.layout;
        let mut next = vec![S::zero(); l.state_dim];
        for k in 0..l.horizon {
            self.ocp
                .dynamics(&x[l.state_range(k)], &x[l.control_range(k)], &mut next);
            let rows = l.defect_range(k);
            for ((o, &xn), &f) in out[rows].iter_mut().zip(&x[l.state_range(k + 1)]).zip(&next) {
                *o = xn - f;
            }
        }
        let init = self.ocp.initial_state();
        for ((o, &x0), &xi) in out[l.initial_condition_range()]
            .iter_mut()
            .zip(&x[l.state_range(0)])
            .zip(init)
        {
            *o = x0 - xi;
        }
    }

    fn cost_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let l = self.layout;
        let mut grad = vec![0.0; x.len()];
        let mut xd = vec![Dual::default(); l.state_dim];
        let mut ud = vec![Dual::default(); l.control_dim];
        for k in 0..l.horizon {
            let (xr, ur) = (l.state_range(k), l.control_range(k));
            for (d, &v) in xd.iter_mut().zip(&x[xr.clone()]) {
                *d = Dual::constant(v);
            }
            for (d, &v) in ud.iter_mut().zip(&x[ur.clone()]) {
                *d = Dual::constant(v);
            }
            for j in 0..l.state_dim {
                xd[j].eps = 1.0;
                grad[xr.start + j] += self.ocp.running_cost(&xd, &ud).eps;
                xd[j].eps = 0.0;
            }
            for j in 0..l.control_dim {
                ud[j].eps = 1.0;
                grad[ur.start + j] += self.ocp.running_cost(&xd, &ud).eps;
                ud[j].eps = 0.0;
            }
        }
        let xr = l.state_range(l.horizon);
        for (d, &v) in xd.iter_mut().zip(&x[xr.clone()]) {
            *d = Dual::constant(v);
        }
        for j in 0..l.state_dim {
            xd[j].eps = 1.0;
            grad[xr.start + j] += self.ocp.terminal_cost(&xd).eps;
            xd[j].eps = 0.0;
        }
        Self::ensure_finite(&grad, "cost gradient")?;
        Ok(grad)
    }

    fn constraint_jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let l = self.layout;
        let mut jac = DMatrix::zeros(l.num_constraints(), l.num_variables());
        for k in 0..l.horizon {
            let (a, b) = self.stage_jacobians(&x[l.state_range(k)], &x[l.control_range(k)]);
            let rows = l.defect_range(k);
            let (xs, xn, us) = (
                l.state_range(k).start,
                l.state_range(k + 1).start,
                l.control_range(k).start,
            );
            for i in 0..l.state_dim {
                let r = rows.start + i;
                jac[(r, xn + i)] += 1.0;
                for j in 0..l.state_dim {
                    jac[(r, xs + j)] -= a[(i, j)];
                }
                for j in 0..l.control_dim {
                    jac[(r, us + j)] -= b[(i, j)];
                }
            }
        }
        let rows = l.initial_condition_range();
        let xs = l.state_range(0).start;
        for i in 0..l.state_dim {
            jac[(rows.start + i, xs + i)] = 1.0;
        }
        Self::ensure_finite(jac.as_slice(), "constraint jacobian")?;
        Ok(jac)
    }

    fn constraint_vjp(&self, x: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        let l = self.layout;
        let mut out = vec![0.0; x.len()];
        for k in 0..l.horizon {
            let (a, b) = self.stage_jacobians(&x[l.state_range(k)], &x[l.control_range(k)]);
            let wk = &w[l.defect_range(k)];
            let (xs, xn, us) = (
                l.state_range(k).start,
                l.state_range(k + 1).start,
                l.control_range(k).start,
            );
            for i in 0..l.state_dim {
                out[xn + i] += wk[i];
            }
            for j in 0..l.state_dim {
                let mut acc = 0.0;
                for i in 0..l.state_dim {
                    acc += a[(i, j)] * wk[i];
                }
                out[xs + j] -= acc;
            }
            for j in 0..l.control_dim {
                let mut acc = 0.0;
                for i in 0..l.state_dim {
                    acc += b[(i, j)] * wk[i];
                }
                out[us + j] -= acc;
            }
        }
        let w_init = &w[l.initial_condition_range()];
        let xs = l.state_range(0).start;
        for i in 0..l.state_dim {
            out[xs + i] += w_init[i];
        }
        Self::ensure_finite(&out, "constraint jacobian product")?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffgrad::GradientMethod;
    use proptest::prelude::*;

    /// `x_{k+1} = x_k + u_k` with scalar state and control.
    #[derive(Debug)]
    struct Integrator {
        horizon: usize,
        x_init: Vec<f64>,
    }

    impl OcpDefinition for Integrator {
        fn horizon(&self) -> usize {
            self.horizon
        }
        fn state_dim(&self) -> usize {
            1
        }
        fn control_dim(&self) -> usize {
            1
        }
        fn initial_state(&self) -> &[f64] {
            &self.x_init
        }
        fn dynamics<S: Scalar>(&self, x: &[S], u: &[S], next: &mut [S]) {
            next[0] = x[0] + u[0];
        }
        fn running_cost<S: Scalar>(&self, x: &[S], u: &[S]) -> S {
            x[0] * x[0] + u[0] * u[0] * 0.5
        }
        fn terminal_cost<S: Scalar>(&self, x: &[S]) -> S {
            (x[0] - 1.0) * (x[0] - 1.0)
        }
    }

    /// Two states, two controls, nonlinear coupling.
    #[derive(Debug)]
    struct Swirl {
        x_init: Vec<f64>,
        bad_bounds: bool,
    }

    impl OcpDefinition for Swirl {
        fn horizon(&self) -> usize {
            3
        }
        fn state_dim(&self) -> usize {
            2
        }
        fn control_dim(&self) -> usize {
            2
        }
        fn initial_state(&self) -> &[f64] {
            &self.x_init
        }
        fn dynamics<S: Scalar>(&self, x: &[S], u: &[S], next: &mut [S]) {
            next[0] = x[0] + (x[1] * u[0]).sin() * 0.1;
            next[1] = x[1] * x[0].cos() + u[1] * u[0] * 0.3;
        }
        fn running_cost<S: Scalar>(&self, x: &[S], u: &[S]) -> S {
            x[0] * x[1] + u[0].exp() + u[1] * u[1]
        }
        fn terminal_cost<S: Scalar>(&self, x: &[S]) -> S {
            x[0] * x[0] * x[1]
        }
        fn control_bounds(&self) -> (Vec<f64>, Vec<f64>) {
            if self.bad_bounds {
                (vec![0.0, 1.0], vec![0.0, 2.0])
            } else {
                (vec![-1.0, f64::NEG_INFINITY], vec![1.0, 3.0])
            }
        }
    }

    fn swirl() -> Transcription<Swirl> {
        Transcription::new(Swirl {
            x_init: vec![0.2, -0.4],
            bad_bounds: false,
        })
        .unwrap()
    }

    #[test]
    fn dimensions_follow_layout() {
        let t = swirl();
        assert_eq!(t.num_variables(), 3 * 2 + 4 * 2);
        assert_eq!(t.num_constraints(), 4 * 2);
        assert_eq!(t.lower_bounds()[0], -1.0);
        assert_eq!(t.upper_bounds()[1], 3.0);
        assert_eq!(t.lower_bounds()[6], f64::NEG_INFINITY);
    }

    #[test]
    fn hand_computed_residual() {
        let t = Transcription::new(Integrator {
            horizon: 1,
            x_init: vec![0.0],
        })
        .unwrap();
        let h = t.constraint_values(&[1.0, 0.0, 2.0]);
        assert_eq!(h, vec![1.0, 0.0]);
    }

    #[test]
    fn construction_errors() {
        let err = Transcription::new(Integrator {
            horizon: 0,
            x_init: vec![0.0],
        });
        assert!(err.is_err());
        let err = Transcription::new(Integrator {
            horizon: 2,
            x_init: vec![0.0, 1.0],
        })
        .unwrap_err();
        assert!(matches!(err, Error::Dimension { what: "initial state", .. }));
        let err = Transcription::new(Swirl {
            x_init: vec![0.0, 0.0],
            bad_bounds: true,
        })
        .unwrap_err();
        assert!(matches!(err, Error::InvalidProblem(_)));
    }

    #[test]
    fn pack_and_unpack() {
        let v = DecisionVector::pack(&[vec![3.0]], &[vec![1.0], vec![2.0]]).unwrap();
        assert_eq!(v.data, vec![3.0, 1.0, 2.0]);
        let (u, x) = v.unpack().unwrap();
        assert_eq!(u, vec![vec![3.0]]);
        assert_eq!(x, vec![vec![1.0], vec![2.0]]);

        assert!(DecisionVector::pack(&[], &[vec![1.0]]).is_err());
        assert!(DecisionVector::pack(&[vec![1.0]], &[vec![1.0]]).is_err());
        assert!(DecisionVector::pack(&[vec![1.0], vec![1.0, 2.0]], &vec![vec![1.0]; 3]).is_err());
        assert_eq!(
            DecisionVector::untyped(vec![1.0]).unpack().unwrap_err(),
            Error::MissingLayout
        );
        let wrong = DecisionVector {
            data: vec![1.0, 2.0],
            layout: Some(Layout::new(1, 1, 1).unwrap()),
        };
        assert!(wrong.unpack().is_err());
    }

    #[test]
    fn structured_derivatives_match_dense_dual_passes() {
        let t = swirl();
        let x: Vec<f64> = (0..t.num_variables()).map(|i| 0.1 * i as f64 - 0.55).collect();

        let structured = t.constraint_jacobian(&x).unwrap();
        let dense = exact_jacobian(&ConstraintsOf(&t), &x).unwrap();
        assert!((&structured - &dense).abs().max() < 1e-14);

        let g = t.cost_gradient(&x).unwrap();
        let g_dense = crate::diffgrad::gradient(&CostOf(&t), &x, &GradientMethod::Exact).unwrap();
        for (a, b) in g.iter().zip(&g_dense) {
            assert!((a - b).abs() < 1e-13);
        }

        let w: Vec<f64> = (0..t.num_constraints()).map(|i| (i as f64).sin()).collect();
        let vjp = t.constraint_vjp(&x, &w).unwrap();
        let expect = dense.tr_mul(&DVector::from_column_slice(&w));
        for (a, b) in vjp.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn rollout_rejects_wrong_count() {
        let ocp = Integrator {
            horizon: 2,
            x_init: vec![0.0],
        };
        assert!(rollout(&ocp, &[vec![1.0]], &[0.0]).is_err());
        assert_eq!(
            rollout(&ocp, &[vec![1.0], vec![2.0]], &[0.5]).unwrap(),
            vec![vec![0.5], vec![1.5], vec![3.5]]
        );
    }

    proptest! {
        #[test]
        fn rollouts_are_feasible_and_cost_is_preserved(
            controls in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 2), 3),
            x0 in prop::collection::vec(-2.0f64..2.0, 2),
        ) {
            let t = Transcription::new(Swirl { x_init: x0.clone(), bad_bounds: false }).unwrap();
            let states = rollout(t.ocp(), &controls, &x0).unwrap();
            let v = DecisionVector::pack(&controls, &states).unwrap();
            let h = t.constraint_values(&v.data);
            prop_assert_eq!(h.len(), t.num_constraints());
            for r in h {
                prop_assert!(r.abs() <= 1e-12);
            }
            let direct = t.ocp().terminal_cost(&states[3])
                + (0..3).map(|k| t.ocp().running_cost(&states[k], &controls[k])).sum::<f64>();
            prop_assert!((t.cost(&v.data) - direct).abs() <= 1e-12 * direct.abs().max(1.0));
        }

        #[test]
        fn unpack_inverts_pack(
            k in 1usize..5, nx in 1usize..4, nu in 0usize..3,
            seed in any::<u64>(),
        ) {
            let layout = Layout::new(k, nx, nu).unwrap();
            let data: Vec<f64> = (0..layout.num_variables())
                .map(|i| ((seed.wrapping_add(i as u64) % 1000) as f64) * 0.01)
                .collect();
            let v = DecisionVector::with_layout(data.clone(), layout).unwrap();
            let (u, x) = v.unpack().unwrap();
            prop_assert_eq!(u.len(), k);
            prop_assert_eq!(x.len(), k + 1);
            let repacked = DecisionVector::pack(&u, &x).unwrap();
            prop_assert_eq!(repacked.data, data);
        }
    }
}
