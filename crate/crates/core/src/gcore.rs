//! G-expectation primitives: the volatility band, the scalar generating
//! functions, admissible volatility controls and driving paths.
//!
//! A G-expectation is represented as `sup_θ E[X(∫θ dW)]` over controls `θ`
//! valued in `[σ_lower, σ_upper]`. Under a fixed control the canonical
//! process is `B = ∫θ dW` with `d⟨B⟩ = θ² dt`; the auxiliary process
//! `B' = ∫θ⁻¹ dW` has `d⟨B'⟩ = θ⁻² dt` and `d⟨B, B'⟩ = dt`.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// The volatility band `[σ_lower, σ_upper]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct GParams {
    sigma_lower: f64,
    sigma_upper: f64,
}

#[derive(Deserialize)]
struct RawParams {
    sigma_lower: f64,
    sigma_upper: f64,
}

impl TryFrom<RawParams> for GParams {
    type Error = Error;
    fn try_from(raw: RawParams) -> Result<Self> {
        GParams::new(raw.sigma_lower, raw.sigma_upper)
    }
}

impl GParams {
    pub fn new(sigma_lower: f64, sigma_upper: f64) -> Result<Self> {
        if !(sigma_lower.is_finite() && sigma_upper.is_finite()) {
            return Err(Error::InvalidParams("volatility bounds must be finite".into()));
        }
        if sigma_lower <= 0.0 {
            return Err(Error::InvalidParams(format!(
                "sigma_lower must be positive, got {sigma_lower}"
            )));
        }
        if sigma_lower >= sigma_upper {
            return Err(Error::InvalidParams(format!(
                "sigma_lower ({sigma_lower}) must be strictly below sigma_upper ({sigma_upper})"
            )));
        }
        Ok(Self { sigma_lower, sigma_upper })
    }

    pub fn lower(&self) -> f64 {
        self.sigma_lower
    }

    pub fn upper(&self) -> f64 {
        self.sigma_upper
    }

    /// Ellipticity constant `σ_lower²`.
    pub fn lambda0(&self) -> f64 {
        self.sigma_lower * self.sigma_lower
    }

    pub fn contains(&self, gamma: f64) -> bool {
        gamma >= self.sigma_lower && gamma <= self.sigma_upper
    }

    pub fn g(&self, a: f64) -> f64 {
        g_scalar(a, self)
    }

    pub fn g_tilde(&self, a: f64) -> f64 {
        g_tilde_scalar(a, self)
    }
}

/// `G(a) = ½ σ_upper² a⁺ − ½ σ_lower² a⁻`, i.e. `½ sup_γ γ² a`.
pub fn g_scalar(a: f64, params: &GParams) -> f64 {
    0.5 * params.sigma_upper.powi(2) * a.max(0.0) - 0.5 * params.sigma_lower.powi(2) * (-a).max(0.0)
}

/// `G̃(a) = ½ sup_γ γ⁻² a` for the auxiliary process `B'`.
pub fn g_tilde_scalar(a: f64, params: &GParams) -> f64 {
    0.5 * a.max(0.0) / params.sigma_lower.powi(2) - 0.5 * (-a).max(0.0) / params.sigma_upper.powi(2)
}

/// Uniform time grid on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidParams(format!("horizon must be positive, got {horizon}")));
        }
        if n_steps == 0 {
            return Err(Error::InvalidParams("n_steps must be positive".into()));
        }
        Ok(Self { horizon, n_steps })
    }

    /// Grid whose step does not exceed `max_dt`.
    pub fn with_max_step(horizon: f64, max_dt: f64) -> Result<Self> {
        let n = (horizon / max_dt).ceil().max(1.0) as usize;
        Self::new(horizon, n)
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    /// `t_k = k · dt`, with `t_n = T` exactly.
    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.horizon
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.time(k)).collect()
    }
}

/// Description of a control before validation against a band and grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicySpec {
    Constant(f64),
    /// One value per step.
    Piecewise(Vec<f64>),
    /// Alternates between the two values every `period` steps.
    Alternating { first: f64, second: f64, period: usize },
    /// `before` on `[0, at)`, `after` on `[at, T]`.
    Switch { before: f64, after: f64, at: f64 },
}

impl PolicySpec {
    pub fn label(&self) -> String {
        match self {
            PolicySpec::Constant(g) => format!("constant({g})"),
            PolicySpec::Piecewise(v) => format!("piecewise[{}]", v.len()),
            PolicySpec::Alternating { first, second, period } => {
                format!("alternating({first},{second};{period})")
            }
            PolicySpec::Switch { before, after, at } => format!("switch({before}->{after}@{at})"),
        }
    }

    /// `{σ_lower, σ_upper, bang-bang}`: the default comparison dictionary.
    pub fn default_dictionary(params: &GParams) -> Vec<PolicySpec> {
        vec![
            PolicySpec::Constant(params.lower()),
            PolicySpec::Constant(params.upper()),
            PolicySpec::Alternating { first: params.upper(), second: params.lower(), period: 1 },
        ]
    }
}

/// Nearest-node lookup table `γ*(t, x, y) ∈ {σ_lower, σ_upper}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackTable {
    pub times: Vec<f64>,
    pub x_min: f64,
    pub y_min: f64,
    pub dx: f64,
    pub dy: f64,
    pub nx: usize,
    pub ny: usize,
    /// `upper[j][i * ny + l]` is true where the control is `σ_upper` at
    /// `(times[j], x_i, y_l)`.
    pub upper: Vec<Vec<bool>>,
    pub sigma_lower: f64,
    pub sigma_upper: f64,
}

impl FeedbackTable {
    pub fn value(&self, t: f64, x: f64, y: f64) -> f64 {
        let j = nearest_sorted(&self.times, t);
        let i = nearest_index(self.x_min, self.dx, self.nx, x);
        let l = nearest_index(self.y_min, self.dy, self.ny, y);
        if self.upper[j][i * self.ny + l] {
            self.sigma_upper
        } else {
            self.sigma_lower
        }
    }
}

fn nearest_index(min: f64, step: f64, n: usize, v: f64) -> usize {
    let r = ((v - min) / step).round();
    if r.is_nan() || r <= 0.0 {
        0
    } else {
        (r as usize).min(n - 1)
    }
}

fn nearest_sorted(values: &[f64], t: f64) -> usize {
    match values.binary_search_by(|v| v.total_cmp(&t)) {
        Ok(i) => i,
        Err(0) => 0,
        Err(i) if i == values.len() => values.len() - 1,
        Err(i) => {
            if (t - values[i - 1]) <= (values[i] - t) {
                i - 1
            } else {
                i
            }
        }
    }
}

/// A validated volatility control.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlPolicy {
    Constant(f64),
    PiecewiseConstant(Vec<f64>),
    Feedback(Arc<FeedbackTable>),
}

impl ControlPolicy {
    pub fn is_feedback(&self) -> bool {
        matches!(self, ControlPolicy::Feedback(_))
    }

    /// Control on `[t_k, t_{k+1})`. Feedback policies read the state at `t_k`.
    pub fn value(&self, k: usize, t: f64, state: Option<(f64, f64)>) -> Result<f64> {
        match self {
            ControlPolicy::Constant(g) => Ok(*g),
            ControlPolicy::PiecewiseConstant(v) => Ok(v[k]),
            ControlPolicy::Feedback(table) => {
                let (x, y) = state.ok_or(Error::MissingStateSource)?;
                Ok(table.value(t, x, y))
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            ControlPolicy::Constant(g) => format!("constant({g})"),
            ControlPolicy::PiecewiseConstant(v) => format!("piecewise[{}]", v.len()),
            ControlPolicy::Feedback(t) => format!("feedback[{}x{}x{}]", t.times.len(), t.nx, t.ny),
        }
    }
}

/// Validate a policy description against the band and expand it on the grid.
pub fn make_policy(spec: &PolicySpec, params: &GParams, grid: &TimeGrid) -> Result<ControlPolicy> {
    let check = |g: f64| -> Result<f64> {
        if params.contains(g) {
            Ok(g)
        } else {
            Err(Error::OutOfBand { value: g, lower: params.lower(), upper: params.upper() })
        }
    };
    let n = grid.n_steps();
    match spec {
        PolicySpec::Constant(g) => Ok(ControlPolicy::Constant(check(*g)?)),
        PolicySpec::Piecewise(values) => {
            if values.len() != n {
                return Err(Error::Shape(format!(
                    "piecewise policy has {} values for {n} steps",
                    values.len()
                )));
            }
            let v = values.iter().map(|&g| check(g)).collect::<Result<Vec<_>>>()?;
            Ok(ControlPolicy::PiecewiseConstant(v))
        }
        PolicySpec::Alternating { first, second, period } => {
            let (a, b) = (check(*first)?, check(*second)?);
            let period = (*period).max(1);
            let v = (0..n).map(|k| if (k / period) % 2 == 0 { a } else { b }).collect();
            Ok(ControlPolicy::PiecewiseConstant(v))
        }
        PolicySpec::Switch { before, after, at } => {
            let (a, b) = (check(*before)?, check(*after)?);
            let v = (0..n).map(|k| if grid.time(k) < *at { a } else { b }).collect();
            Ok(ControlPolicy::PiecewiseConstant(v))
        }
    }
}

/// Running Neumaier sum, so that cumulative quadratic variations of constant
/// controls land on the exact total.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct RunningSum {
    sum: f64,
    comp: f64,
}

impl RunningSum {
    fn add(&mut self, v: f64) -> f64 {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
        self.sum + self.comp
    }
}

/// One discretized realization of `(W, B, ⟨B⟩, B', ⟨B'⟩)` under a control.
#[derive(Debug, Clone, PartialEq)]
pub struct DrivingPath {
    dt: f64,
    /// Wiener increments, one per step.
    pub dw: Vec<f64>,
    /// Control on each step.
    pub theta: Vec<f64>,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub qv: Vec<f64>,
    pub bprime: Vec<f64>,
    pub qvprime: Vec<f64>,
    sums: [RunningSum; 5],
}

impl DrivingPath {
    pub fn empty(dt: f64, n_steps: usize) -> Self {
        let cap = n_steps + 1;
        let mut p = Self {
            dt,
            dw: Vec::with_capacity(n_steps),
            theta: Vec::with_capacity(n_steps),
            w: Vec::with_capacity(cap),
            b: Vec::with_capacity(cap),
            qv: Vec::with_capacity(cap),
            bprime: Vec::with_capacity(cap),
            qvprime: Vec::with_capacity(cap),
            sums: Default::default(),
        };
        for v in [&mut p.w, &mut p.b, &mut p.qv, &mut p.bprime, &mut p.qvprime] {
            v.push(0.0);
        }
        p
    }

    pub fn push_step(&mut self, theta: f64, dw: f64) {
        self.theta.push(theta);
        self.dw.push(dw);
        let k = self.dw.len() - 1;
        let incs = [dw, self.db(k), self.dqv(k), self.dbprime(k), self.dqvprime(k)];
        let outs = [&mut self.w, &mut self.b, &mut self.qv, &mut self.bprime, &mut self.qvprime];
        for ((sum, inc), out) in self.sums.iter_mut().zip(incs).zip(outs) {
            out.push(sum.add(inc));
        }
    }

    pub fn n_steps(&self) -> usize {
        self.dw.len()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `ΔB_k = θ_k ΔW_k`.
    pub fn db(&self, k: usize) -> f64 {
        self.theta[k] * self.dw[k]
    }

    /// `Δ⟨B⟩_k = θ_k² dt`.
    pub fn dqv(&self, k: usize) -> f64 {
        self.theta[k] * self.theta[k] * self.dt
    }

    /// `ΔB'_k = ΔW_k / θ_k`.
    pub fn dbprime(&self, k: usize) -> f64 {
        self.dw[k] / self.theta[k]
    }

    /// `Δ⟨B'⟩_k = dt / θ_k²`.
    pub fn dqvprime(&self, k: usize) -> f64 {
        self.dt / (self.theta[k] * self.theta[k])
    }

    /// `Δ⟨B, B'⟩_k = dt`.
    pub fn dcross(&self, _k: usize) -> f64 {
        self.dt
    }

    /// First step violating the quadratic-variation band of `B` or `B'`.
    pub fn qv_band_violation(&self, params: &GParams) -> Option<usize> {
        let (lo, hi) = (params.lower(), params.upper());
        let dt = self.dt;
        (0..self.n_steps()).find(|&k| {
            let q = self.dqv(k);
            let qp = self.dqvprime(k);
            !(lo * lo * dt <= q && q <= hi * hi * dt && dt / (hi * hi) <= qp && qp <= dt / (lo * lo))
        })
    }
}

/// Supplies the controlled state for feedback policies.
pub trait StateSource {
    /// State at node `k`; `path` already holds increments `0..k`.
    fn state(&mut self, k: usize, path: &DrivingPath) -> Result<(f64, f64)>;
}

/// Draw one driving path. The `k`-th Wiener increment is the `k`-th normal
/// drawn from `rng`, independent of the policy.
pub fn sample_driving_with<R: Rng + ?Sized>(
    policy: &ControlPolicy,
    grid: &TimeGrid,
    rng: &mut R,
    mut source: Option<&mut dyn StateSource>,
) -> Result<DrivingPath> {
    if policy.is_feedback() && source.is_none() {
        return Err(Error::MissingStateSource);
    }
    let dt = grid.dt();
    let sqrt_dt = dt.sqrt();
    let mut path = DrivingPath::empty(dt, grid.n_steps());
    for k in 0..grid.n_steps() {
        let state = match source.as_deref_mut() {
            Some(src) if policy.is_feedback() => Some(src.state(k, &path)?),
            _ => None,
        };
        let theta = policy.value(k, grid.time(k), state)?;
        let z: f64 = rng.sample(StandardNormal);
        path.push_step(theta, sqrt_dt * z);
    }
    if let Some(src) = source {
        if policy.is_feedback() {
            src.state(grid.n_steps(), &path)?;
        }
    }
    Ok(path)
}

/// Draw the driving path for stream seed `seed` (see [`rng::path_seed`]).
pub fn sample_driving(
    policy: &ControlPolicy,
    grid: &TimeGrid,
    seed: u64,
    source: Option<&mut dyn StateSource>,
) -> Result<DrivingPath> {
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
    sample_driving_with(policy, grid, &mut rng, source)
}

/// Convenience: the driving path of path `index` under root seed `root`.
pub fn sample_driving_indexed(
    policy: &ControlPolicy,
    grid: &TimeGrid,
    root: u64,
    index: u64,
    source: Option<&mut dyn StateSource>,
) -> Result<DrivingPath> {
    sample_driving(policy, grid, rng::path_seed(root, index), source)
}

/// Terminal functions with closed-form G-heat values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleShape {
    Square,
    NegSquare,
    Identity,
    Abs,
}

/// `Ê[φ(B_t)]` for the listed shapes; convex shapes take `σ_upper`,
/// concave ones `σ_lower`.
pub fn g_normal_oracle(shape: OracleShape, t: f64, params: &GParams) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidParams(format!("oracle time must be positive, got {t}")));
    }
    Ok(match shape {
        OracleShape::Square => params.upper().powi(2) * t,
        OracleShape::NegSquare => -params.lower().powi(2) * t,
        OracleShape::Identity => 0.0,
        OracleShape::Abs => params.upper() * (2.0 * t / PI).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> GParams {
        GParams::new(1.0, 2.0).unwrap()
    }

    #[test]
    fn g_examples() {
        let p = params();
        assert_eq!(g_scalar(0.0, &p), 0.0);
        assert_eq!(g_scalar(1.0, &p), 2.0);
        assert_eq!(g_scalar(-1.0, &p), -0.5);
        assert_eq!(g_tilde_scalar(0.0, &p), 0.0);
        assert_eq!(g_tilde_scalar(1.0, &p), 0.5);
        assert_eq!(g_tilde_scalar(-1.0, &p), -0.125);
    }

    #[test]
    fn g_is_elliptic_and_subadditive_on_grid() {
        let p = params();
        let pts: Vec<f64> = (0..100).map(|i| -5.0 + 10.0 * i as f64 / 99.0).collect();
        for &a in &pts {
            for &b in &pts {
                if a >= b {
                    let lhs = g_scalar(a, &p) - g_scalar(b, &p);
                    assert!(lhs >= 0.5 * p.lambda0() * (a - b) - 1e-12);
                }
                assert!(g_scalar(a + b, &p) <= g_scalar(a, &p) + g_scalar(b, &p) + 1e-12);
            }
        }
    }

    #[test]
    fn band_is_validated() {
        assert!(GParams::new(2.0, 1.0).is_err());
        assert!(GParams::new(0.0, 1.0).is_err());
        assert!(GParams::new(1.0, 1.0).is_err());
    }

    #[test]
    fn make_policy_examples() {
        let p = params();
        let g = TimeGrid::new(1.0, 10).unwrap();
        assert_eq!(make_policy(&PolicySpec::Constant(2.0), &p, &g).unwrap(), ControlPolicy::Constant(2.0));
        assert!(matches!(
            make_policy(&PolicySpec::Constant(3.0), &p, &g),
            Err(Error::OutOfBand { value, .. }) if value == 3.0
        ));
        let alt = PolicySpec::Alternating { first: 1.0, second: 2.0, period: 1 };
        match make_policy(&alt, &p, &g).unwrap() {
            ControlPolicy::PiecewiseConstant(v) => {
                assert_eq!(v.len(), 10);
                assert_eq!(&v[..3], &[1.0, 2.0, 1.0]);
            }
            other => panic!("unexpected {other:?}"),
        }
        let bad = PolicySpec::Piecewise(vec![1.0; 9]);
        assert!(matches!(make_policy(&bad, &p, &g), Err(Error::Shape(_))));
    }

    #[test]
    fn time_grid_ends_on_horizon() {
        let g = TimeGrid::new(0.7, 3).unwrap();
        assert_eq!(g.time(3), 0.7);
        assert_eq!(g.time(1), 0.7 / 3.0);
    }

    #[test]
    fn constant_control_quadratic_variations_are_exact() {
        let p = params();
        let g = TimeGrid::new(1.0, 100).unwrap();
        let pol = make_policy(&PolicySpec::Constant(2.0), &p, &g).unwrap();
        let path = sample_driving(&pol, &g, 11, None).unwrap();
        assert_eq!(*path.qv.last().unwrap(), 4.0);
        assert_eq!(*path.qvprime.last().unwrap(), 0.25);
        assert_eq!(path.b[0], 0.0);
        assert_eq!(path.bprime[0], 0.0);
        assert!(path.qv_band_violation(&p).is_none());
    }

    #[test]
    fn feedback_without_source_is_rejected() {
        let g = TimeGrid::new(1.0, 4).unwrap();
        let table = FeedbackTable {
            times: vec![0.0],
            x_min: 0.0,
            y_min: 0.0,
            dx: 1.0,
            dy: 1.0,
            nx: 1,
            ny: 1,
            upper: vec![vec![true]],
            sigma_lower: 1.0,
            sigma_upper: 2.0,
        };
        let pol = ControlPolicy::Feedback(Arc::new(table));
        assert_eq!(sample_driving(&pol, &g, 0, None), Err(Error::MissingStateSource));
    }

    #[test]
    fn oracle_examples() {
        let p = params();
        assert_eq!(g_normal_oracle(OracleShape::Square, 1.0, &p).unwrap(), 4.0);
        assert_eq!(g_normal_oracle(OracleShape::Identity, 1.0, &p).unwrap(), 0.0);
        assert_eq!(g_normal_oracle(OracleShape::NegSquare, 1.0, &p).unwrap(), -1.0);
        assert!(g_normal_oracle(OracleShape::Abs, 0.0, &p).is_err());
    }
}
