//! The degenerate Hamiltonian G-SDE
//!
//! ```text
//! dX = (A X + M Y) dt
//! dY = b1(X, Y) dt + b2(X, Y) d⟨B⟩ + Q dB
//! ```
//!
//! simulated by explicit Euler under one volatility control at a time, and
//! the semigroup `P̄_T f(z)` estimated as a maximum over a control dictionary
//! with common random numbers.

mod expr;

pub use expr::{parse_drift, DriftFn, Expr, Func, Rect, LIPSCHITZ_GRID};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gcore::{sample_driving_with, ControlPolicy, DrivingPath, StateSource, TimeGrid};
use crate::rng;
use crate::stats::MeanSe;

/// Test function `f(x, y)`.
pub type TestFn<'a> = &'a (dyn Fn(f64, f64) -> f64 + Sync);

/// Coefficients of the Hamiltonian system, with optional perturbation drifts
/// `b̄1` (dt channel) and `b̄2` (d⟨B⟩ channel).
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSystem {
    pub a: f64,
    pub m: f64,
    pub q: f64,
    pub b1: DriftFn,
    pub b2: DriftFn,
    /// Declared Lipschitz constant of `(b1, b2)`.
    pub k: f64,
    pub b1_bar: Option<DriftFn>,
    pub b2_bar: Option<DriftFn>,
}

/// Result of cross-checking the declared `K` on the working box.
#[derive(Debug, Clone, Serialize)]
pub struct LipschitzReport {
    pub declared: f64,
    /// Sum of the grid gradient estimates of `b1` and `b2`.
    pub grid_estimate: f64,
    /// Largest `(|Δb1| + |Δb2|) / |Δz|` over random pairs.
    pub pair_max_ratio: f64,
    pub holds: bool,
}

impl HamiltonianSystem {
    pub fn new(a: f64, m: f64, q: f64, b1: DriftFn, b2: DriftFn, k: f64) -> Result<Self> {
        if !(a.is_finite() && m.is_finite() && q.is_finite()) {
            return Err(Error::InvalidParams("A, M and Q must be finite".into()));
        }
        if q * m == 0.0 {
            return Err(Error::InvalidParams(format!("QM must be nonzero, got Q = {q}, M = {m}")));
        }
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::InvalidParams(format!("Lipschitz constant K must be positive, got {k}")));
        }
        Ok(Self { a, m, q, b1, b2, k, b1_bar: None, b2_bar: None })
    }

    /// `dX = Y dt, dY = (−X − Y) dt + dB` on the given box.
    pub fn damped_oscillator(domain: Rect) -> Self {
        let b1 = parse_drift("-x - y", domain).expect("static drift");
        Self::new(0.0, 1.0, 1.0, b1, DriftFn::zero(domain), 2f64.sqrt()).expect("static system")
    }

    /// `dX = Y dt, dY = dB`: the G-Brownian motion drives `Y` directly.
    pub fn free_particle(domain: Rect) -> Self {
        Self::new(0.0, 1.0, 1.0, DriftFn::zero(domain), DriftFn::zero(domain), 1.0).expect("static system")
    }

    pub fn with_perturbation(mut self, b1_bar: Option<DriftFn>, b2_bar: Option<DriftFn>) -> Self {
        self.b1_bar = b1_bar;
        self.b2_bar = b2_bar;
        self
    }

    /// The system without perturbation drifts.
    pub fn reference(&self) -> Self {
        Self { b1_bar: None, b2_bar: None, ..self.clone() }
    }

    pub fn has_perturbation(&self) -> bool {
        self.b1_bar.is_some() || self.b2_bar.is_some()
    }

    /// Total `dt`-channel drift `b1 + b̄1`.
    #[inline]
    pub fn drift_dt(&self, x: f64, y: f64) -> Result<f64> {
        let mut v = if self.b1.is_zero() { 0.0 } else { self.b1.eval(x, y)? };
        if let Some(bar) = &self.b1_bar {
            v += bar.eval(x, y)?;
        }
        Ok(v)
    }

    /// Total `d⟨B⟩`-channel drift `b2 + b̄2`.
    #[inline]
    pub fn drift_qv(&self, x: f64, y: f64) -> Result<f64> {
        let mut v = if self.b2.is_zero() { 0.0 } else { self.b2.eval(x, y)? };
        if let Some(bar) = &self.b2_bar {
            v += bar.eval(x, y)?;
        }
        Ok(v)
    }

    /// Largest step the explicit scheme accepts: `1 / (4K)`.
    pub fn step_limit(&self) -> f64 {
        1.0 / (4.0 * self.k)
    }

    pub fn check_step(&self, grid: &TimeGrid) -> Result<()> {
        let limit = self.step_limit();
        if grid.dt() > limit {
            Err(Error::StepTooLarge { dt: grid.dt(), limit })
        } else {
            Ok(())
        }
    }

    /// Compare the declared `K` with grid and random-pair estimates on the box
    /// of `b1`.
    pub fn check_lipschitz(&self, n_pairs: usize, seed: u64) -> Result<LipschitzReport> {
        let d = self.b1.domain();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0_f64;
        for _ in 0..n_pairs {
            let z = (rng.random_range(d.x_min..=d.x_max), rng.random_range(d.y_min..=d.y_max));
            let w = (rng.random_range(d.x_min..=d.x_max), rng.random_range(d.y_min..=d.y_max));
            let dist = (z.0 - w.0).hypot(z.1 - w.1);
            if dist == 0.0 {
                continue;
            }
            let diff = (self.b1.eval(z.0, z.1)? - self.b1.eval(w.0, w.1)?).abs()
                + (self.b2.eval(z.0, z.1)? - self.b2.eval(w.0, w.1)?).abs();
            worst = worst.max(diff / dist);
        }
        let grid_estimate = self.b1.lipschitz() + self.b2.lipschitz();
        let slack = 1.0 + 1e-9;
        Ok(LipschitzReport {
            declared: self.k,
            grid_estimate,
            pair_max_ratio: worst,
            holds: worst <= self.k * slack && grid_estimate <= self.k * slack,
        })
    }

    /// One explicit Euler step.
    #[inline]
    pub fn step(&self, x: f64, y: f64, dt: f64, dqv: f64, db: f64) -> Result<(f64, f64)> {
        let nx = x + (self.a * x + self.m * y) * dt;
        let ny = y + self.drift_dt(x, y)? * dt + self.drift_qv(x, y)? * dqv + self.q * db;
        Ok((nx, ny))
    }
}

/// Positions and momenta at every grid node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatePath {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl StatePath {
    pub fn terminal(&self) -> (f64, f64) {
        (*self.x.last().expect("nonempty path"), *self.y.last().expect("nonempty path"))
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Euler recursion driven by a precomputed driving path.
pub fn euler_simulate(
    system: &HamiltonianSystem,
    driving: &DrivingPath,
    z0: (f64, f64),
    grid: &TimeGrid,
) -> Result<StatePath> {
    if driving.n_steps() != grid.n_steps() {
        return Err(Error::Shape(format!(
            "driving path has {} steps, grid has {}",
            driving.n_steps(),
            grid.n_steps()
        )));
    }
    system.check_step(grid)?;
    let n = grid.n_steps();
    let dt = grid.dt();
    let mut xs = Vec::with_capacity(n + 1);
    let mut ys = Vec::with_capacity(n + 1);
    let (mut x, mut y) = z0;
    xs.push(x);
    ys.push(y);
    for k in 0..n {
        (x, y) = system.step(x, y, dt, driving.dqv(k), driving.db(k))?;
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::NonFinite { step: k + 1 });
        }
        xs.push(x);
        ys.push(y);
    }
    Ok(StatePath { x: xs, y: ys })
}

/// Co-simulates the state so feedback controls can read it.
struct EulerSource<'a> {
    system: &'a HamiltonianSystem,
    dt: f64,
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl StateSource for EulerSource<'_> {
    fn state(&mut self, k: usize, path: &DrivingPath) -> Result<(f64, f64)> {
        while self.xs.len() <= k {
            let j = self.xs.len() - 1;
            let (x, y) = self.system.step(self.xs[j], self.ys[j], self.dt, path.dqv(j), path.db(j))?;
            if !(x.is_finite() && y.is_finite()) {
                return Err(Error::NonFinite { step: j + 1 });
            }
            self.xs.push(x);
            self.ys.push(y);
        }
        Ok((self.xs[k], self.ys[k]))
    }
}

/// Driving path and state path of one Monte Carlo path under `policy`.
/// Feedback policies are co-simulated with the state.
pub fn simulate_with_rng<R: Rng + ?Sized>(
    system: &HamiltonianSystem,
    policy: &ControlPolicy,
    z0: (f64, f64),
    grid: &TimeGrid,
    rng: &mut R,
) -> Result<(DrivingPath, StatePath)> {
    system.check_step(grid)?;
    if policy.is_feedback() {
        let mut src = EulerSource {
            system,
            dt: grid.dt(),
            xs: vec![z0.0],
            ys: vec![z0.1],
        };
        let driving = sample_driving_with(policy, grid, rng, Some(&mut src))?;
        let states = StatePath { x: src.xs, y: src.ys };
        Ok((driving, states))
    } else {
        let driving = sample_driving_with(policy, grid, rng, None)?;
        let states = euler_simulate(system, &driving, z0, grid)?;
        Ok((driving, states))
    }
}

/// [`simulate_with_rng`] for path `index` under root seed `root`.
pub fn simulate_path(
    system: &HamiltonianSystem,
    policy: &ControlPolicy,
    z0: (f64, f64),
    grid: &TimeGrid,
    root: u64,
    index: u64,
) -> Result<(DrivingPath, StatePath)> {
    simulate_with_rng(system, policy, z0, grid, &mut rng::path_rng(root, index))
}

/// Terminal state of path `index` without materializing the path. Performs
/// the same arithmetic as [`simulate_path`].
pub fn terminal_state(
    system: &HamiltonianSystem,
    policy: &ControlPolicy,
    z0: (f64, f64),
    grid: &TimeGrid,
    root: u64,
    index: u64,
) -> Result<(f64, f64)> {
    let mut rng = rng::path_rng(root, index);
    let dt = grid.dt();
    let sqrt_dt = dt.sqrt();
    let (mut x, mut y) = z0;
    for k in 0..grid.n_steps() {
        let theta = policy.value(k, grid.time(k), Some((x, y)))?;
        let z: f64 = rng.sample(StandardNormal);
        let dw = sqrt_dt * z;
        (x, y) = system.step(x, y, dt, theta * theta * dt, theta * dw)?;
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::NonFinite { step: k + 1 });
        }
    }
    Ok((x, y))
}

/// Mean and standard error of `f(X_T, Y_T)` under one control.
pub fn mc_expectation(
    system: &HamiltonianSystem,
    policy: &ControlPolicy,
    f: TestFn<'_>,
    z0: (f64, f64),
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<MeanSe> {
    if n_paths < 2 {
        return Err(Error::InvalidParams("n_paths must be at least 2".into()));
    }
    system.check_step(grid)?;
    let values = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let (x, y) = terminal_state(system, policy, z0, grid, seed, i)?;
            Ok(f(x, y))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(MeanSe::from_samples(&values))
}

#[derive(Debug, Clone, Serialize)]
pub struct ControlEstimate {
    pub control: String,
    pub mean: f64,
    pub se: f64,
}

/// Dictionary estimate of `P̄_T f(z)`.
#[derive(Debug, Clone, Serialize)]
pub struct SemigroupEstimate {
    /// Maximum of the per-control means.
    pub value: f64,
    /// Standard error of the maximizing control.
    pub se: f64,
    pub argmax: usize,
    pub per_control: Vec<ControlEstimate>,
    pub n_paths: usize,
    pub dictionary: String,
}

/// `max_θ E_θ f(X_T, Y_T)` over `dictionary`, every control reusing the same
/// Wiener streams.
pub fn semigroup_sup(
    system: &HamiltonianSystem,
    dictionary: &[ControlPolicy],
    f: TestFn<'_>,
    z0: (f64, f64),
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<SemigroupEstimate> {
    if dictionary.is_empty() {
        return Err(Error::InvalidParams("control dictionary is empty".into()));
    }
    let mut per_control = Vec::with_capacity(dictionary.len());
    for policy in dictionary {
        let est = mc_expectation(system, policy, f, z0, grid, n_paths, seed)?;
        per_control.push(ControlEstimate { control: policy.label(), mean: est.mean, se: est.se });
    }
    let argmax = per_control
        .iter()
        .enumerate()
        .fold(0, |best, (i, c)| if c.mean > per_control[best].mean { i } else { best });
    let labels: Vec<&str> = per_control.iter().map(|c| c.control.as_str()).collect();
    Ok(SemigroupEstimate {
        value: per_control[argmax].mean,
        se: per_control[argmax].se,
        argmax,
        dictionary: labels.join(", "),
        per_control,
        n_paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcore::{make_policy, GParams, PolicySpec};

    fn params() -> GParams {
        GParams::new(1.0, 2.0).unwrap()
    }

    #[test]
    fn qm_must_be_nonzero() {
        let r = Rect::square(5.0);
        assert!(HamiltonianSystem::new(0.0, 0.0, 1.0, DriftFn::zero(r), DriftFn::zero(r), 1.0).is_err());
        assert!(HamiltonianSystem::new(0.0, 1.0, 0.0, DriftFn::zero(r), DriftFn::zero(r), 1.0).is_err());
    }

    #[test]
    fn zero_noise_flow_is_linear_transport() {
        let sys = HamiltonianSystem::free_particle(Rect::square(5.0));
        let grid = TimeGrid::new(1.0, 1000).unwrap();
        let mut driving = DrivingPath::empty(grid.dt(), grid.n_steps());
        for _ in 0..grid.n_steps() {
            driving.push_step(1.0, 0.0);
        }
        let path = euler_simulate(&sys, &driving, (1.0, 2.0), &grid).unwrap();
        let (x, y) = path.terminal();
        assert!((x - 3.0).abs() < 1e-9, "{x}");
        assert_eq!(y, 2.0);
    }

    #[test]
    fn constant_test_function_has_zero_se() {
        let sys = HamiltonianSystem::damped_oscillator(Rect::square(5.0));
        let grid = TimeGrid::new(1.0, 50).unwrap();
        let pol = make_policy(&PolicySpec::Constant(1.5), &params(), &grid).unwrap();
        let est = mc_expectation(&sys, &pol, &|_, _| 3.0, (0.0, 0.0), &grid, 100, 1).unwrap();
        assert_eq!(est.mean, 3.0);
        assert_eq!(est.se, 0.0);
        let sup = semigroup_sup(&sys, &[pol], &|_, _| 3.0, (0.0, 0.0), &grid, 100, 1).unwrap();
        assert_eq!(sup.value, 3.0);
    }

    #[test]
    fn streaming_and_materialized_paths_agree_bitwise() {
        let sys = HamiltonianSystem::damped_oscillator(Rect::square(5.0));
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let pol = make_policy(
            &PolicySpec::Alternating { first: 1.0, second: 2.0, period: 3 },
            &params(),
            &grid,
        )
        .unwrap();
        for i in 0..5 {
            let (_, path) = simulate_path(&sys, &pol, (0.3, -0.2), &grid, 9, i).unwrap();
            let t = terminal_state(&sys, &pol, (0.3, -0.2), &grid, 9, i).unwrap();
            assert_eq!(path.terminal(), t);
        }
    }

    #[test]
    fn step_guard() {
        let sys = HamiltonianSystem::damped_oscillator(Rect::square(5.0));
        let grid = TimeGrid::new(1.0, 2).unwrap();
        assert!(matches!(sys.check_step(&grid), Err(Error::StepTooLarge { .. })));
    }

    #[test]
    fn declared_lipschitz_constant_is_checked() {
        let sys = HamiltonianSystem::damped_oscillator(Rect::square(5.0));
        let rep = sys.check_lipschitz(2000, 3).unwrap();
        assert!(rep.holds, "{rep:?}");
        let mut tight = sys.clone();
        tight.k = 1.0;
        assert!(!tight.check_lipschitz(2000, 3).unwrap().holds);
    }

    #[test]
    fn semigroup_needs_a_dictionary() {
        let sys = HamiltonianSystem::free_particle(Rect::square(5.0));
        let grid = TimeGrid::new(1.0, 8).unwrap();
        assert!(semigroup_sup(&sys, &[], &|_, y| y, (0.0, 0.0), &grid, 10, 0).is_err());
    }
}
