//! Benchmark problems: pendulum swingup, unicycle bug trap, and a small
//! equality-constrained quadratic with a closed-form KKT point.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dual::Scalar;
use crate::error::{Error, Result};
use crate::nlp::{Layout, NlpProblem, OcpDefinition, Transcription};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PendulumParams {
    pub mass: f64,
    pub length: f64,
    pub gravity: f64,
    pub dt: f64,
    pub horizon: usize,
    pub torque_lower: f64,
    pub torque_upper: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        PendulumParams {
            mass: 1.0,
            length: 1.0,
            gravity: 9.81,
            dt: 0.1,
            horizon: 50,
            torque_lower: -1.0,
            torque_upper: 1.0,
        }
    }
}

impl PendulumParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass", self.mass),
            ("length", self.length),
            ("gravity", self.gravity),
            ("dt", self.dt),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidProblem(format!("pendulum {name} must be positive, got {v}")));
            }
        }
        if self.horizon == 0 {
            return Err(Error::InvalidProblem("pendulum horizon must be at least 1".into()));
        }
        if !(self.torque_lower < self.torque_upper) {
            return Err(Error::InvalidProblem(format!(
                "torque bounds [{}, {}] are empty",
                self.torque_lower, self.torque_upper
            )));
        }
        Ok(())
    }
}

/// One explicit-Euler step of the damped-free pendulum; `θ = 0` is upright.
pub fn pendulum_dynamics<S: Scalar>(x: &[S], u: &[S], params: &PendulumParams, next: &mut [S]) {
    let (theta, theta_dot) = (x[0], x[1]);
    let mgl = params.mass * params.gravity * params.length;
    let inertia = params.mass * params.length * params.length;
    let theta_ddot = (u[0] - (theta - PI).sin() * mgl) / inertia;
    next[0] = theta + theta_dot * params.dt;
    next[1] = theta_dot + theta_ddot * params.dt;
}

/// Swing up from hanging (`θ = π`) to upright under tight torque limits.
#[derive(Clone, Debug)]
pub struct Pendulum {
    pub params: PendulumParams,
    x_init: [f64; 2],
}

impl Pendulum {
    pub fn new(params: PendulumParams) -> Result<Self> {
        params.validate()?;
        Ok(Pendulum {
            params,
            x_init: [PI, 0.0],
        })
    }

    /// Box the initial-guess states are drawn from.
    pub fn guess_box(&self) -> ([f64; 2], [f64; 2]) {
        ([-PI, -4.0], [2.0 * PI, 4.0])
    }
}

impl OcpDefinition for Pendulum {
    fn horizon(&self) -> usize {
        self.params.horizon
    }
    fn state_dim(&self) -> usize {
        2
    }
    fn control_dim(&self) -> usize {
        1
    }
    fn initial_state(&self) -> &[f64] {
        &self.x_init
    }
    fn dynamics<S: Scalar>(&self, x: &[S], u: &[S], next: &mut [S]) {
        pendulum_dynamics(x, u, &self.params, next)
    }
    fn running_cost<S: Scalar>(&self, _x: &[S], u: &[S]) -> S {
        u[0] * u[0] * (self.params.dt * 0.01)
    }
    fn terminal_cost<S: Scalar>(&self, x: &[S]) -> S {
        x[0] * x[0] * 10.0 + x[1] * x[1]
    }
    fn control_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![self.params.torque_lower], vec![self.params.torque_upper])
    }
}

pub fn pendulum_ocp(params: PendulumParams) -> Result<Pendulum> {
    Pendulum::new(params)
}

pub fn unicycle_dynamics<S: Scalar>(x: &[S], u: &[S], dt: f64, next: &mut [S]) {
    let (px, py, heading) = (x[0], x[1], x[2]);
    let (v, omega) = (u[0], u[1]);
    next[0] = px + v * heading.cos() * dt;
    next[1] = py + v * heading.sin() * dt;
    next[2] = heading + omega * dt;
}

/// Axis-aligned rectangle given by center and half extents.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub center: [f64; 2],
    pub half: [f64; 2],
}

impl Rect {
    pub fn new(center: [f64; 2], half: [f64; 2]) -> Self {
        Rect { center, half }
    }

    /// Signed distance, negative inside.
    pub fn signed_distance<S: Scalar>(&self, p: &[S]) -> S {
        let dx = (p[0] - self.center[0]).abs() - self.half[0];
        let dy = (p[1] - self.center[1]).abs() - self.half[1];
        let zero = S::zero();
        let (ox, oy) = (dx.max(zero), dy.max(zero));
        let outside = ox * ox + oy * oy;
        // sqrt has an unbounded slope at 0; the outside term is zero there.
        let outside = if outside.value() > 0.0 {
            outside.sqrt()
        } else {
            outside
        };
        outside + dx.max(dy).min(zero)
    }

    pub fn inflate(&self, by: f64) -> Rect {
        Rect::new(self.center, [self.half[0] + by, self.half[1] + by])
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        (p[0] - self.center[0]).abs() <= self.half[0] && (p[1] - self.center[1]).abs() <= self.half[1]
    }

    fn bounding(rects: &[Rect]) -> Rect {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for r in rects {
            for a in 0..2 {
                lo[a] = lo[a].min(r.center[a] - r.half[a]);
                hi[a] = hi[a].max(r.center[a] + r.half[a]);
            }
        }
        Rect::new(
            [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0],
            [(hi[0] - lo[0]) / 2.0, (hi[1] - lo[1]) / 2.0],
        )
    }
}

/// A U-shaped obstacle (base plus two arms), a start pose inside the
/// cavity, and a goal behind the base.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BugTrapGeometry {
    pub base: Rect,
    pub arms: [Rect; 2],
    pub goal: [f64; 2],
    pub start: [f64; 3],
    pub obstacle_weight: f64,
    pub margin: f64,
    pub smoothing: f64,
    pub goal_weight: f64,
    pub horizon: usize,
    pub dt: f64,
    pub v_max: f64,
    pub omega_max: f64,
}

impl Default for BugTrapGeometry {
    fn default() -> Self {
        BugTrapGeometry {
            base: Rect::new([1.5, 0.0], [0.5, 1.5]),
            arms: [
                Rect::new([0.5, 1.25], [1.5, 0.25]),
                Rect::new([0.5, -1.25], [1.5, 0.25]),
            ],
            goal: [4.0, 0.0],
            start: [0.0, 0.0, 0.0],
            obstacle_weight: 20.0,
            margin: 0.1,
            smoothing: 0.1,
            goal_weight: 4.0,
            horizon: 80,
            dt: 0.1,
            v_max: 2.0,
            omega_max: 4.0,
        }
    }
}

impl BugTrapGeometry {
    pub fn rects(&self) -> [Rect; 3] {
        [self.base, self.arms[0], self.arms[1]]
    }

    /// The cavity, i.e. the gap between the arms on the inner side of the base.
    pub fn cavity(&self) -> Rect {
        let x_lo = self.arms[0].center[0] - self.arms[0].half[0];
        let x_hi = self.base.center[0] - self.base.half[0];
        let (a, b) = (&self.arms[0], &self.arms[1]);
        let (top, bottom) = if a.center[1] > b.center[1] { (a, b) } else { (b, a) };
        let y_hi = top.center[1] - top.half[1];
        let y_lo = bottom.center[1] + bottom.half[1];
        Rect::new(
            [(x_lo + x_hi) / 2.0, (y_lo + y_hi) / 2.0],
            [(x_hi - x_lo) / 2.0, (y_hi - y_lo) / 2.0],
        )
    }

    /// Bounding box of all three rectangles.
    pub fn trap_box(&self) -> Rect {
        Rect::bounding(&self.rects())
    }

    /// "Stuck" region used to judge baseline failures.
    pub fn inflated_trap_box(&self) -> Rect {
        self.trap_box().inflate(0.5)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("obstacle weight", self.obstacle_weight),
            ("smoothing length", self.smoothing),
            ("goal weight", self.goal_weight),
            ("dt", self.dt),
            ("v_max", self.v_max),
            ("omega_max", self.omega_max),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidProblem(format!("bug trap {name} must be positive, got {v}")));
            }
        }
        if self.horizon == 0 {
            return Err(Error::InvalidProblem("bug trap horizon must be at least 1".into()));
        }
        for r in self.rects() {
            if !(r.half[0] > 0.0 && r.half[1] > 0.0) {
                return Err(Error::InvalidProblem("rectangles need positive half extents".into()));
            }
        }
        let cavity = self.cavity();
        if !(cavity.half[0] > 0.0 && cavity.half[1] > 0.0) {
            return Err(Error::InvalidProblem("arms and base leave no cavity".into()));
        }
        let start = [self.start[0], self.start[1]];
        if !cavity.contains(start) {
            return Err(Error::InvalidProblem("start must lie inside the cavity".into()));
        }
        if self.trap_box().contains(self.goal) {
            return Err(Error::InvalidProblem("goal must lie outside the trap".into()));
        }
        Ok(())
    }

    /// `w · Σ softplus((margin − sd)/len) · len` over the three rectangles.
    pub fn obstacle_penalty<S: Scalar>(&self, p: &[S]) -> S {
        let mut total = S::zero();
        for r in self.rects() {
            let z = (-r.signed_distance(p) + self.margin) / self.smoothing;
            total += z.softplus() * self.smoothing;
        }
        total * self.obstacle_weight
    }
}

#[derive(Clone, Debug)]
pub struct BugTrap {
    pub geometry: BugTrapGeometry,
}

impl BugTrap {
    pub fn new(geometry: BugTrapGeometry) -> Result<Self> {
        geometry.validate()?;
        Ok(BugTrap { geometry })
    }

    /// Initial-guess states are scattered over the cavity.
    pub fn guess_box(&self) -> ([f64; 3], [f64; 3]) {
        let c = self.geometry.cavity();
        (
            [c.center[0] - c.half[0], c.center[1] - c.half[1], -PI],
            [c.center[0] + c.half[0], c.center[1] + c.half[1], PI],
        )
    }
}

impl OcpDefinition for BugTrap {
    fn horizon(&self) -> usize {
        self.geometry.horizon
    }
    fn state_dim(&self) -> usize {
        3
    }
    fn control_dim(&self) -> usize {
        2
    }
    fn initial_state(&self) -> &[f64] {
        &self.geometry.start
    }
    fn dynamics<S: Scalar>(&self, x: &[S], u: &[S], next: &mut [S]) {
        unicycle_dynamics(x, u, self.geometry.dt, next)
    }
    fn running_cost<S: Scalar>(&self, x: &[S], u: &[S]) -> S {
        let effort = (u[0] * u[0] + u[1] * u[1]) * (self.geometry.dt * 0.01);
        self.geometry.obstacle_penalty(x) + effort
    }
    fn terminal_cost<S: Scalar>(&self, x: &[S]) -> S {
        let dx = x[0] - self.geometry.goal[0];
        let dy = x[1] - self.geometry.goal[1];
        (dx * dx + dy * dy) * self.geometry.goal_weight
    }
    fn control_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let g = &self.geometry;
        (vec![0.0, -g.omega_max], vec![g.v_max, g.omega_max])
    }
}

pub fn bugtrap_ocp(geometry: BugTrapGeometry) -> Result<BugTrap> {
    BugTrap::new(geometry)
}

/// `min ½‖x‖²  s.t.  x₁ + x₂ − 1 = 0`, with `x* = (½, ½)`, `λ* = −½`.
#[derive(Clone, Debug, Default)]
pub struct ToyKkt {
    bounds: [Vec<f64>; 2],
}

impl ToyKkt {
    pub const SOLUTION: [f64; 2] = [0.5, 0.5];
    pub const MULTIPLIER: f64 = -0.5;

    pub fn new() -> Self {
        ToyKkt {
            bounds: [vec![f64::NEG_INFINITY; 2], vec![f64::INFINITY; 2]],
        }
    }
}

impl NlpProblem for ToyKkt {
    fn num_variables(&self) -> usize {
        2
    }
    fn num_constraints(&self) -> usize {
        1
    }
    fn lower_bounds(&self) -> &[f64] {
        &self.bounds[0]
    }
    fn upper_bounds(&self) -> &[f64] {
        &self.bounds[1]
    }
    fn cost<S: Scalar>(&self, x: &[S]) -> S {
        (x[0] * x[0] + x[1] * x[1]) * 0.5
    }
    fn constraints<S: Scalar>(&self, x: &[S], out: &mut [S]) {
        out[0] = x[0] + x[1] - 1.0;
    }
}

pub fn toy_kkt_problem() -> ToyKkt {
    ToyKkt::new()
}

/// Benchmark names accepted on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Pendulum,
    Bugtrap,
    ToyKkt,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 3] = [ProblemKind::Pendulum, ProblemKind::Bugtrap, ProblemKind::ToyKkt];

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Pendulum => "pendulum",
            ProblemKind::Bugtrap => "bugtrap",
            ProblemKind::ToyKkt => "toy_kkt",
        }
    }

    pub fn valid_names() -> String {
        Self::ALL.map(|k| k.name()).join(", ")
    }

    pub fn build(self) -> Result<Problem> {
        Ok(match self {
            ProblemKind::Pendulum => {
                Problem::Pendulum(Transcription::new(Pendulum::new(PendulumParams::default())?)?)
            }
            ProblemKind::Bugtrap => {
                Problem::BugTrap(Transcription::new(BugTrap::new(BugTrapGeometry::default())?)?)
            }
            ProblemKind::ToyKkt => Problem::ToyKkt(ToyKkt::new()),
        })
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownName {
                kind: "problem",
                name: s.to_string(),
                valid: Self::valid_names(),
            })
    }
}

/// A built benchmark, usable wherever an [`NlpProblem`] is expected.
#[derive(Clone, Debug)]
pub enum Problem {
    Pendulum(Transcription<Pendulum>),
    BugTrap(Transcription<BugTrap>),
    ToyKkt(ToyKkt),
}

macro_rules! dispatch {
    ($self:expr, $p:ident => $body:expr) => {
        match $self {
            Problem::Pendulum($p) => $body,
            Problem::BugTrap($p) => $body,
            Problem::ToyKkt($p) => $body,
        }
    };
}

impl Problem {
    pub fn kind(&self) -> ProblemKind {
        match self {
            Problem::Pendulum(_) => ProblemKind::Pendulum,
            Problem::BugTrap(_) => ProblemKind::Bugtrap,
            Problem::ToyKkt(_) => ProblemKind::ToyKkt,
        }
    }

    pub fn layout(&self) -> Option<Layout> {
        match self {
            Problem::Pendulum(t) => Some(t.layout()),
            Problem::BugTrap(t) => Some(t.layout()),
            Problem::ToyKkt(_) => None,
        }
    }

    /// Randomized starting point: controls at bound midpoints (0 when a
    /// side is unbounded) and states uniform over the problem's guess box.
    pub fn initial_guess<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Problem::Pendulum(t) => {
                let (lo, hi) = t.ocp().guess_box();
                trajectory_guess(t, &lo, &hi, rng)
            }
            Problem::BugTrap(t) => {
                let (lo, hi) = t.ocp().guess_box();
                trajectory_guess(t, &lo, &hi, rng)
            }
            Problem::ToyKkt(_) => (0..2).map(|_| rng.random_range(-1.0..1.0)).collect(),
        }
    }
}

pub fn trajectory_guess<O: OcpDefinition, R: Rng + ?Sized>(
    t: &Transcription<O>,
    state_lo: &[f64],
    state_hi: &[f64],
    rng: &mut R,
) -> Vec<f64> {
    let layout = t.layout();
    let mut x = vec![0.0; layout.num_variables()];
    let (lower, upper) = (t.lower_bounds(), t.upper_bounds());
    for k in 0..layout.horizon {
        for i in layout.control_range(k) {
            let (lo, hi) = (lower[i], upper[i]);
            x[i] = if lo.is_finite() && hi.is_finite() {
                0.5 * (lo + hi)
            } else {
                0.0
            };
        }
    }
    for k in 0..=layout.horizon {
        for (j, i) in layout.state_range(k).enumerate() {
            x[i] = rng.random_range(state_lo[j]..state_hi[j]);
        }
    }
    x
}

impl NlpProblem for Problem {
    fn num_variables(&self) -> usize {
        dispatch!(self, p => p.num_variables())
    }
    fn num_constraints(&self) -> usize {
        dispatch!(self, p => p.num_constraints())
    }
    fn lower_bounds(&self) -> &[f64] {
        dispatch!(self, p => p.lower_bounds())
    }
    fn upper_bounds(&self) -> &[f64] {
        dispatch!(self, p => p.upper_bounds())
    }
    fn cost<S: Scalar>(&self, x: &[S]) -> S {
        dispatch!(self, p => p.cost(x))
    }
    fn constraints<S: Scalar>(&self, x: &[S], out: &mut [S]) {
        dispatch!(self, p => p.constraints(x, out))
    }
    fn cost_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        dispatch!(self, p => p.cost_gradient(x))
    }
    fn constraint_jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        dispatch!(self, p => p.constraint_jacobian(x))
    }
    fn constraint_vjp(&self, x: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        dispatch!(self, p => p.constraint_vjp(x, w))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffgrad::{check_gradient, ScalarFunction};
    use rand::SeedableRng;

    fn pend() -> PendulumParams {
        PendulumParams::default()
    }

    #[test]
    fn pendulum_equilibria() {
        let mut next = [0.0; 2];
        pendulum_dynamics(&[PI, 0.0], &[0.0], &pend(), &mut next);
        assert_eq!(next, [PI, 0.0]);
        pendulum_dynamics(&[0.0, 0.0], &[0.0], &pend(), &mut next);
        assert!(next[0] == 0.0 && next[1].abs() < 1e-15);
    }

    #[test]
    fn pendulum_quarter_turn() {
        let mut next = [0.0; 2];
        pendulum_dynamics(&[PI / 2.0, 0.0], &[0.0], &pend(), &mut next);
        assert_eq!(next[0], PI / 2.0);
        assert!((next[1] - 0.981).abs() < 1e-12);
    }

    #[test]
    fn pendulum_costs() {
        let p = Pendulum::new(pend()).unwrap();
        assert_eq!(p.terminal_cost(&[0.0, 0.0]), 0.0);
        assert_eq!(p.terminal_cost(&[1.0, 2.0]), 14.0);
        assert!((p.running_cost(&[0.3, -2.0], &[1.0]) - 0.001).abs() < 1e-15);
        assert_eq!(p.control_bounds(), (vec![-1.0], vec![1.0]));
        assert_eq!(p.initial_state(), &[PI, 0.0]);
    }

    #[test]
    fn pendulum_params_validated() {
        let mut bad = pend();
        bad.torque_lower = 1.0;
        assert!(Pendulum::new(bad).is_err());
        let bad = PendulumParams { mass: 0.0, ..pend() };
        assert!(Pendulum::new(bad).is_err());
    }

    #[test]
    fn unicycle_steps() {
        let mut next = [0.0; 3];
        unicycle_dynamics(&[0.0, 0.0, 0.0], &[1.0, 0.0], 0.1, &mut next);
        assert_eq!(next, [0.1, 0.0, 0.0]);
        unicycle_dynamics(&[0.3, -0.2, 1.0], &[0.0, 2.0], 0.1, &mut next);
        assert_eq!(next, [0.3, -0.2, 1.2]);
        unicycle_dynamics(&[0.0, 0.0, PI / 2.0], &[1.0, 0.0], 0.1, &mut next);
        assert!(next[0].abs() < 1e-16 && (next[1] - 0.1).abs() < 1e-16);
        assert_eq!(next[2], PI / 2.0);
    }

    #[test]
    fn explicit_euler_matches_vector_field() {
        let p = pend();
        let x = [0.4, -1.3];
        let mut next = [0.0; 2];
        pendulum_dynamics(&x, &[0.7], &p, &mut next);
        let field = [x[1], 0.7 - 9.81 * (x[0] - PI).sin()];
        for i in 0..2 {
            assert!(((next[i] - x[i]) / p.dt - field[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn signed_distance_of_rectangle() {
        let r = Rect::new([1.0, 2.0], [0.5, 0.25]);
        assert!((r.signed_distance(&[1.0, 2.0]) + 0.25).abs() < 1e-15);
        assert!((r.signed_distance(&[2.5, 2.0]) - 1.0).abs() < 1e-15);
        assert!((r.signed_distance(&[1.5 + 3.0, 2.25 + 4.0]) - 5.0).abs() < 1e-12);
        assert_eq!(r.signed_distance(&[1.5, 2.0]), 0.0);
    }

    #[test]
    fn bugtrap_costs() {
        let bt = BugTrap::new(BugTrapGeometry::default()).unwrap();
        let g = &bt.geometry;
        let goal = [g.goal[0], g.goal[1], 0.3];
        assert_eq!(bt.terminal_cost(&goal), 0.0);

        let far = [20.0, 20.0];
        assert!(g.obstacle_penalty(&far) <= 1e-6 * g.obstacle_weight);

        let base = g.base;
        let min_half = base.half[0].min(base.half[1]);
        let at_center = g.obstacle_penalty(&base.center);
        assert!(at_center >= g.obstacle_weight * (g.margin + min_half), "{at_center}");
    }

    #[test]
    fn bugtrap_geometry_is_a_u() {
        let g = BugTrapGeometry::default();
        g.validate().unwrap();
        let cavity = g.cavity();
        assert!(cavity.contains([g.start[0], g.start[1]]));
        assert!(!g.inflated_trap_box().contains(g.goal));
        let mut bad = g.clone();
        bad.goal = [0.0, 0.0];
        assert!(bad.validate().is_err());
        let mut bad = g;
        bad.start = [5.0, 5.0, 0.0];
        assert!(bad.validate().is_err());
    }

    struct Penalty(BugTrapGeometry);
    impl ScalarFunction for Penalty {
        fn eval<S: Scalar>(&self, x: &[S]) -> S {
            self.0.obstacle_penalty(x)
        }
    }

    #[test]
    fn obstacle_penalty_is_smooth_across_boundaries() {
        let g = BugTrapGeometry::default();
        let f = Penalty(g.clone());
        for r in g.rects() {
            let [cx, cy] = r.center;
            let [hx, hy] = r.half;
            for p in [
                [cx + hx, cy + 0.3 * hy],
                [cx - hx, cy - 0.2 * hy],
                [cx + 0.4 * hx, cy + hy],
                [cx - 0.1 * hx, cy - hy],
                [cx + hx + 0.02, cy + hy + 0.03],
            ] {
                let err = check_gradient(&f, &p, 1e-7).unwrap();
                assert!(err < 1e-5, "{p:?}: {err}");
            }
        }
    }

    #[test]
    fn toy_problem_values() {
        let toy = toy_kkt_problem();
        assert_eq!(toy.cost(&[0.5, 0.5]), 0.25);
        assert_eq!(toy.constraint_values(&[0.5, 0.5]), vec![0.0]);
        let g = toy.cost_gradient(&ToyKkt::SOLUTION).unwrap();
        let jt = toy.constraint_vjp(&ToyKkt::SOLUTION, &[ToyKkt::MULTIPLIER]).unwrap();
        assert_eq!([g[0] + jt[0], g[1] + jt[1]], [0.0, 0.0]);
    }

    #[test]
    fn problem_names_round_trip() {
        for k in ProblemKind::ALL {
            assert_eq!(k.name().parse::<ProblemKind>().unwrap(), k);
            assert_eq!(k.build().unwrap().kind(), k);
        }
        let err = "nosuch".parse::<ProblemKind>().unwrap_err();
        assert!(err.to_string().contains("pendulum, bugtrap, toy_kkt"));
    }

    #[test]
    fn dimensions_of_built_problems() {
        let p = ProblemKind::Pendulum.build().unwrap();
        assert_eq!((p.num_variables(), p.num_constraints()), (50 + 51 * 2, 51 * 2));
        let small = Transcription::new(Pendulum::new(PendulumParams { horizon: 2, ..pend() }).unwrap()).unwrap();
        assert_eq!((small.num_variables(), small.num_constraints()), (8, 6));
        let b = ProblemKind::Bugtrap.build().unwrap();
        assert_eq!((b.num_variables(), b.num_constraints()), (80 * 2 + 81 * 3, 81 * 3));
    }

    #[test]
    fn guesses_are_interior_and_seeded() {
        for kind in ProblemKind::ALL {
            let p = kind.build().unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
            let a = p.initial_guess(&mut rng);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
            assert_eq!(a, p.initial_guess(&mut rng));
            assert!(crate::nlp::is_strictly_interior(&a, p.lower_bounds(), p.upper_bounds()));
        }
    }

    #[test]
    fn pendulum_defect_block_structure() {
        // Rows of defect k: −∂f/∂x_k, −∂f/∂u_k, and +I on x_{k+1}.
        let t = Transcription::new(Pendulum::new(PendulumParams { horizon: 2, ..pend() }).unwrap()).unwrap();
        let x = [0.3, -0.6, 1.1, 0.4, 2.0, -1.0, 0.5, 0.2];
        let jac = t.constraint_jacobian(&x).unwrap();
        let l = t.layout();
        let dt = 0.1;
        for k in 0..2 {
            let theta = x[l.state_range(k).start];
            let r = l.defect_range(k).start;
            let (xs, xn, us) = (l.state_range(k).start, l.state_range(k + 1).start, l.control_range(k).start);
            let a = [[1.0, dt], [-(dt * 9.81 * (theta - PI).cos()), 1.0]];
            let b = [0.0, dt];
            for i in 0..2 {
                for j in 0..2 {
                    assert!((jac[(r + i, xs + j)] + a[i][j]).abs() < 1e-14);
                    assert_eq!(jac[(r + i, xn + j)], if i == j { 1.0 } else { 0.0 });
                }
                assert!((jac[(r + i, us)] + b[i]).abs() < 1e-15);
            }
        }
    }
}
