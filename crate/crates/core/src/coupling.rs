//! Coupling by change of measure for the Hamiltonian system.
//!
//! A deterministic schedule `Θ₁` steers a shifted copy of the system, started
//! at `z + h` and driven by the same noise, onto the base process at time
//! `T`. The extra drift is absorbed by a Girsanov density `R₁(T)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gcore::{ControlPolicy, DrivingPath, GParams, TimeGrid};
use crate::gsde::{euler_simulate, simulate_path, HamiltonianSystem, StatePath, TestFn};
use crate::quadrature::GaussLegendre;
use crate::stats::{compensated_sum, MeanSe};

/// Exponents above this are reported as overflow.
pub const OVERFLOW_GUARD: f64 = 700.0;

/// Default Gauss–Legendre order for schedule integrals.
pub const DEFAULT_QUAD_POINTS: usize = 64;

/// `Σ(T) = σ̲⁻² T (1/T + 1/T² + 1 + T)² + σ̄² T (1 + T)²`.
pub fn sigma_t(t: f64, params: &GParams) -> Result<f64> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidParams(format!("horizon must be positive, got {t}")));
    }
    let lo = params.lower();
    let hi = params.upper();
    let a = 1.0 / t + 1.0 / (t * t) + 1.0 + t;
    Ok(t * a * a / (lo * lo) + hi * hi * t * (1.0 + t) * (1.0 + t))
}

/// `Λ₁(T) = ∫₀ᵀ s(T−s)/T² e^{−2sA} M² ds`.
pub fn lambda1(a: f64, m: f64, t: f64, quad_points: usize) -> Result<f64> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidParams(format!("horizon must be positive, got {t}")));
    }
    let gl = GaussLegendre::new(quad_points.max(1));
    let value = gl.integrate(0.0, t, |s| s * (t - s) / (t * t) * (-2.0 * s * a).exp() * m * m);
    if !(value.abs() >= 1e-14) {
        return Err(Error::DegenerateCoupling(value));
    }
    Ok(value)
}

/// Coupling schedule tabulated on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingSchedule {
    pub a: f64,
    pub m: f64,
    pub horizon: f64,
    pub h: (f64, f64),
    pub lambda1: f64,
    /// `M Λ₁⁻¹ (h₁ + ∫₀ᵀ (T−u)/T e^{−uA} M h₂ du)`.
    pub kappa: f64,
    pub times: Vec<f64>,
    pub v1: Vec<f64>,
    pub alpha1: Vec<f64>,
    pub gamma1: Vec<f64>,
    pub gamma1prime: Vec<f64>,
    pub theta1x: Vec<f64>,
    pub theta1y: Vec<f64>,
    /// Euler image `Θ̂₁` of the schedule on the grid.
    pub hat_x: Vec<f64>,
    pub hat_y: Vec<f64>,
}

impl CouplingSchedule {
    pub fn gamma1_at(&self, s: f64) -> f64 {
        let t = self.horizon;
        (t - s) / t * self.h.1 - self.kappa * s * (t - s) / (t * t) * (-s * self.a).exp()
    }

    /// Exact derivative of `γ₁`.
    pub fn gamma1prime_at(&self, s: f64) -> f64 {
        let t = self.horizon;
        let poly = s * (t - s) / (t * t);
        let dpoly = (t - 2.0 * s) / (t * t);
        -self.h.1 / t - self.kappa * (dpoly - self.a * poly) * (-s * self.a).exp()
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn theta_end(&self) -> (f64, f64) {
        (*self.theta1x.last().unwrap(), *self.theta1y.last().unwrap())
    }

    pub fn hat_end(&self) -> (f64, f64) {
        (*self.hat_x.last().unwrap(), *self.hat_y.last().unwrap())
    }

    /// `(max |γ₁′|, max |Θ₁|)` over the grid nodes.
    pub fn sup_norms(&self) -> (f64, f64) {
        let gp = self.gamma1prime.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let th = self
            .theta1x
            .iter()
            .zip(&self.theta1y)
            .fold(0.0_f64, |m, (x, y)| m.max(x.hypot(*y)));
        (gp, th)
    }
}

pub fn build_schedule(
    a: f64,
    m: f64,
    horizon: f64,
    h: (f64, f64),
    grid: &TimeGrid,
    quad_points: usize,
) -> Result<CouplingSchedule> {
    if (grid.horizon() - horizon).abs() > 1e-12 * horizon.max(1.0) {
        return Err(Error::Shape(format!("grid horizon {} differs from T = {horizon}", grid.horizon())));
    }
    let t = horizon;
    let l1 = lambda1(a, m, t, quad_points)?;
    let gl = GaussLegendre::new(quad_points.max(1));
    let c_h = h.0 + gl.integrate(0.0, t, |u| (t - u) / t * (-u * a).exp() * m * h.1);
    let kappa = m * c_h / l1;

    let n = grid.n_steps();
    let times = grid.times();
    let mut sched = CouplingSchedule {
        a,
        m,
        horizon: t,
        h,
        lambda1: l1,
        kappa,
        v1: times.iter().map(|s| (t - s) / t).collect(),
        alpha1: Vec::with_capacity(n + 1),
        gamma1: Vec::with_capacity(n + 1),
        gamma1prime: Vec::with_capacity(n + 1),
        theta1x: Vec::with_capacity(n + 1),
        theta1y: Vec::with_capacity(n + 1),
        hat_x: Vec::with_capacity(n + 1),
        hat_y: Vec::with_capacity(n + 1),
        times,
    };
    for k in 0..=n {
        let s = sched.times[k];
        let alpha = -kappa * s * (t - s) / (t * t) * (-s * a).exp();
        sched.alpha1.push(alpha);
        sched.gamma1.push(sched.v1[k] * h.1 + alpha);
        sched.gamma1prime.push(sched.gamma1prime_at(s));
    }

    // Θ₁ˣ(s) = e^{As}(h₁ + M ∫₀ˢ e^{−uA} γ₁(u) du), accumulated per step.
    let mut integral = 0.0;
    let mut comp = 0.0;
    sched.theta1x.push(h.0);
    sched.theta1y.push(h.1);
    for k in 0..n {
        let (s0, s1) = (sched.times[k], sched.times[k + 1]);
        let piece = gl.integrate(s0, s1, |u| (-u * a).exp() * sched.gamma1_at(u));
        let y = piece - comp;
        let next = integral + y;
        comp = (next - integral) - y;
        integral = next;
        sched.theta1x.push((a * s1).exp() * (h.0 + m * integral));
        sched.theta1y.push(sched.gamma1[k + 1]);
    }

    let dt = grid.dt();
    let (mut dx, mut dy) = h;
    sched.hat_x.push(dx);
    sched.hat_y.push(dy);
    for k in 0..n {
        (dx, dy) = (dx + (a * dx + m * dy) * dt, dy + sched.gamma1prime[k] * dt);
        sched.hat_x.push(dx);
        sched.hat_y.push(dy);
    }
    Ok(sched)
}

/// Base path, shifted path and the drift corrections along them.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoupledPaths {
    pub base: StatePath,
    pub shifted: StatePath,
    /// `Φ₁` at the left node of every step.
    pub phi1: Vec<f64>,
    /// `Φ₂` at the left node of every step.
    pub phi2: Vec<f64>,
    #[serde(skip)]
    pub driving: DrivingPath,
    pub horizon: f64,
    pub h: (f64, f64),
}

/// Simulate `(X^z, Y^z)` and the shifted process with identical increments.
pub fn coupled_simulate(
    system: &HamiltonianSystem,
    driving: &DrivingPath,
    z: (f64, f64),
    schedule: &CouplingSchedule,
    grid: &TimeGrid,
) -> Result<CoupledPaths> {
    let n = grid.n_steps();
    if schedule.n_steps() != n || (schedule.horizon - grid.horizon()).abs() > 1e-12 * grid.horizon() {
        return Err(Error::Shape(format!(
            "schedule has {} steps over T = {}, grid has {} over T = {}",
            schedule.n_steps(),
            schedule.horizon,
            n,
            grid.horizon()
        )));
    }
    let base = euler_simulate(system, driving, z, grid)?;
    let dt = grid.dt();
    let (a, m, q) = (system.a, system.m, system.q);
    let mut xs = Vec::with_capacity(n + 1);
    let mut ys = Vec::with_capacity(n + 1);
    let mut phi1 = Vec::with_capacity(n);
    let mut phi2 = Vec::with_capacity(n);
    let (mut x, mut y) = (z.0 + schedule.h.0, z.1 + schedule.h.1);
    xs.push(x);
    ys.push(y);
    for k in 0..n {
        let (bx, by) = (base.x[k], base.y[k]);
        let b1 = system.drift_dt(bx, by)?;
        let b2 = system.drift_qv(bx, by)?;
        let gp = schedule.gamma1prime[k];
        phi1.push((b1 - system.drift_dt(x, y)? + gp) / q);
        phi2.push((b2 - system.drift_qv(x, y)?) / q);
        let nx = x + (a * x + m * y) * dt;
        let ny = y + b1 * dt + b2 * driving.dqv(k) + q * driving.db(k) + gp * dt;
        if !(nx.is_finite() && ny.is_finite()) {
            return Err(Error::NonFinite { step: k + 1 });
        }
        (x, y) = (nx, ny);
        xs.push(x);
        ys.push(y);
    }
    Ok(CoupledPaths {
        base,
        shifted: StatePath { x: xs, y: ys },
        phi1,
        phi2,
        driving: driving.clone(),
        horizon: grid.horizon(),
        h: schedule.h,
    })
}

/// Largest node-wise deviation of the simulated gap from `Θ̂₁`, relative to
/// `max(|z_k|, |z̃_k|, |Θ̂_k|, 1)`.
pub fn identity_defect(paths: &CoupledPaths, schedule: &CouplingSchedule) -> f64 {
    let mut worst = 0.0_f64;
    for k in 0..paths.base.len() {
        let (bx, by) = (paths.base.x[k], paths.base.y[k]);
        let (sx, sy) = (paths.shifted.x[k], paths.shifted.y[k]);
        let (hx, hy) = (schedule.hat_x[k], schedule.hat_y[k]);
        let scale = bx.hypot(by).max(sx.hypot(sy)).max(hx.hypot(hy)).max(1.0);
        let err = (sx - bx - hx).hypot(sy - by - hy);
        worst = worst.max(err / scale);
    }
    worst
}

/// Running Girsanov density `R_k = exp(−I_k − ½ Q_k)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityPath {
    pub q: f64,
    pub integral: Vec<f64>,
    pub quad: Vec<f64>,
    pub density: Vec<f64>,
}

impl DensityPath {
    pub fn terminal(&self) -> f64 {
        *self.density.last().unwrap()
    }

    pub fn log_terminal(&self) -> f64 {
        -self.integral.last().unwrap() - 0.5 * self.quad.last().unwrap()
    }
}

/// Density of the shift `(g¹, g²)` tilted by `q`:
/// `I = q Σ (g¹ ΔB′ + g² ΔB)`, `Q = q² Σ (g¹² Δ⟨B′⟩ + g²² Δ⟨B⟩ + 2 g¹ g² dt)`.
/// `q = 1` gives `R₁`; `q = p/(p−1)` gives the tilted density `R̃₁`.
pub fn girsanov_exponent(g1: &[f64], g2: &[f64], driving: &DrivingPath, q: f64) -> Result<DensityPath> {
    let n = driving.n_steps();
    for (name, g) in [("g1", g1), ("g2", g2)] {
        if g.len() != n && g.len() != n + 1 {
            return Err(Error::Shape(format!("{name} has length {}, path has {n} steps", g.len())));
        }
    }
    if !(q >= 1.0) {
        return Err(Error::InvalidParams(format!("tilt must be at least 1, got {q}")));
    }
    let mut integral = Vec::with_capacity(n + 1);
    let mut quad = Vec::with_capacity(n + 1);
    let mut density = Vec::with_capacity(n + 1);
    let (mut si, mut ci, mut sq, mut cq) = (0.0, 0.0, 0.0, 0.0);
    integral.push(0.0);
    quad.push(0.0);
    density.push(1.0);
    for k in 0..n {
        let (a, b) = (g1[k], g2[k]);
        let di = a * driving.dbprime(k) + b * driving.db(k);
        let dq = a * a * driving.dqvprime(k) + b * b * driving.dqv(k) + 2.0 * a * b * driving.dcross(k);
        neumaier(&mut si, &mut ci, di);
        neumaier(&mut sq, &mut cq, dq);
        let i = q * (si + ci);
        let qq = q * q * (sq + cq);
        integral.push(i);
        quad.push(qq);
        density.push((-i - 0.5 * qq).exp());
    }
    Ok(DensityPath { q, integral, quad, density })
}

fn neumaier(sum: &mut f64, comp: &mut f64, v: f64) {
    let t = *sum + v;
    if sum.abs() >= v.abs() {
        *comp += (*sum - t) + v;
    } else {
        *comp += (v - t) + *sum;
    }
    *sum = t;
}

/// `R₁^q = R̃₁ · exp(½ (q² − q) Q₁)` where `Q₁` is the untilted quadratic term.
pub fn tilt_compensator(q: f64, quad1: f64) -> f64 {
    0.5 * (q * q - q) * quad1
}

/// `(Σ (Φ₁² Δ⟨B′⟩ + Φ₂² Δ⟨B⟩ + 2 Φ₁ Φ₂ dt),  value / (Σ(T) |h|²))`.
pub fn phi_quadratic_form(paths: &CoupledPaths, params: &GParams) -> Result<(f64, f64)> {
    let d = &paths.driving;
    let value = compensated_sum((0..d.n_steps()).map(|k| {
        let (a, b) = (paths.phi1[k], paths.phi2[k]);
        a * a * d.dqvprime(k) + b * b * d.dqv(k) + 2.0 * a * b * d.dcross(k)
    }));
    let h2 = paths.h.0 * paths.h.0 + paths.h.1 * paths.h.1;
    let ratio = if h2 == 0.0 { 0.0 } else { value / (sigma_t(paths.horizon, params)? * h2) };
    Ok((value, ratio))
}

/// Per-control part of a Novikov estimate.
#[derive(Debug, Clone, Serialize)]
pub struct NovikovControl {
    pub control: String,
    pub mean: f64,
    pub se: f64,
    pub max_exponent: f64,
}

/// Dictionary-sup estimate of `Ê exp((½ + δ) ∫ (g¹² d⟨B′⟩ + g²² d⟨B⟩ + 2 g¹ g² dt))`.
#[derive(Debug, Clone, Serialize)]
pub struct NovikovEstimate {
    pub value: f64,
    pub se: f64,
    pub delta: f64,
    pub max_exponent: f64,
    pub per_control: Vec<NovikovControl>,
    pub finite: bool,
}

/// `g1`, `g2` are evaluated along base paths of `system` started at `z0`.
#[allow(clippy::too_many_arguments)]
pub fn novikov_estimate(
    g1: TestFn<'_>,
    g2: TestFn<'_>,
    system: &HamiltonianSystem,
    dictionary: &[ControlPolicy],
    delta: f64,
    z0: (f64, f64),
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<NovikovEstimate> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParams(format!("delta must be positive, got {delta}")));
    }
    if dictionary.is_empty() || n_paths < 2 {
        return Err(Error::InvalidParams("need a nonempty dictionary and at least 2 paths".into()));
    }
    let mut per_control = Vec::with_capacity(dictionary.len());
    for policy in dictionary {
        let exponents = (0..n_paths as u64)
            .into_par_iter()
            .map(|i| {
                let (driving, path) = simulate_path(system, policy, z0, grid, seed, i)?;
                let quad = compensated_sum((0..grid.n_steps()).map(|k| {
                    let a = g1(path.x[k], path.y[k]);
                    let b = g2(path.x[k], path.y[k]);
                    a * a * driving.dqvprime(k) + b * b * driving.dqv(k) + 2.0 * a * b * driving.dcross(k)
                }));
                Ok((0.5 + delta) * quad)
            })
            .collect::<Result<Vec<f64>>>()?;
        let max_exponent = exponents.iter().fold(f64::NEG_INFINITY, |m, &e| m.max(e));
        if !(max_exponent <= OVERFLOW_GUARD) {
            return Err(Error::OverflowDetected { exponent: max_exponent, guard: OVERFLOW_GUARD });
        }
        let values: Vec<f64> = exponents.iter().map(|e| e.exp()).collect();
        let est = MeanSe::from_samples(&values);
        per_control.push(NovikovControl { control: policy.label(), mean: est.mean, se: est.se, max_exponent });
    }
    let best = per_control
        .iter()
        .enumerate()
        .fold(0, |b, (i, c)| if c.mean > per_control[b].mean { i } else { b });
    let max_exponent = per_control.iter().fold(f64::NEG_INFINITY, |m, c| m.max(c.max_exponent));
    Ok(NovikovEstimate {
        value: per_control[best].mean,
        se: per_control[best].se,
        delta,
        max_exponent,
        finite: per_control[best].mean.is_finite(),
        per_control,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcore::{make_policy, sample_driving_indexed, PolicySpec};
    use crate::gsde::Rect;

    fn params() -> GParams {
        GParams::new(1.0, 2.0).unwrap()
    }

    #[test]
    fn sigma_t_values() {
        let p = params();
        assert_eq!(sigma_t(1.0, &p).unwrap(), 32.0);
        assert_eq!(sigma_t(2.0, &p).unwrap(), 100.125);
        assert!(sigma_t(0.0, &p).is_err());
    }

    #[test]
    fn lambda1_closed_forms() {
        assert!((lambda1(0.0, 1.0, 1.0, 64).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert!((lambda1(0.0, 2.0, 2.0, 64).unwrap() - 4.0 / 3.0).abs() < 1e-14);
        assert!(matches!(lambda1(0.0, 0.0, 1.0, 64), Err(Error::DegenerateCoupling(_))));
    }

    #[test]
    fn schedule_spot_values() {
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let s = build_schedule(0.0, 1.0, 1.0, (1.0, 0.0), &grid, 64).unwrap();
        let mid = 32;
        assert!((s.theta1x[mid] - 0.5).abs() < 1e-10, "{}", s.theta1x[mid]);
        assert!((s.theta1y[mid] + 1.5).abs() < 1e-10, "{}", s.theta1y[mid]);
        for (k, &t) in s.times.iter().enumerate() {
            assert!((s.gamma1[k] + 6.0 * t * (1.0 - t)).abs() < 1e-12);
            assert!((s.gamma1prime[k] + 6.0 * (1.0 - 2.0 * t)).abs() < 1e-12);
        }
        assert_eq!((s.theta1x[0], s.theta1y[0]), (1.0, 0.0));
        assert_eq!(*s.gamma1.last().unwrap(), 0.0);

        let s = build_schedule(0.0, 1.0, 1.0, (0.0, 1.0), &grid, 64).unwrap();
        for (k, &t) in s.times.iter().enumerate() {
            assert!((s.theta1x[k] - t * (1.0 - t) * (1.0 - t)).abs() < 1e-12);
        }
    }

    #[test]
    fn schedule_endpoint_vanishes() {
        for &a in &[-2.0, -0.5, 0.0, 1.0, 2.0] {
            for &m in &[-2.0, -1.0, 1.0, 2.0] {
                for &t in &[0.1, 1.0, 4.0] {
                    let grid = TimeGrid::new(t, 100).unwrap();
                    let h = (0.3, -0.7);
                    let s = build_schedule(a, m, t, h, &grid, 64).unwrap();
                    let (x, y) = s.theta_end();
                    assert!(x.hypot(y) <= 1e-8 * h.0.hypot(h.1), "A={a} M={m} T={t}: {x} {y}");
                }
            }
        }
    }

    #[test]
    fn coupled_gap_tracks_discrete_schedule() {
        let p = params();
        let sys = HamiltonianSystem::damped_oscillator(Rect::square(5.0));
        let grid = TimeGrid::new(1.0, 200).unwrap();
        let sched = build_schedule(sys.a, sys.m, 1.0, (0.3, -0.2), &grid, 64).unwrap();
        let pol = make_policy(&PolicySpec::Constant(1.5), &p, &grid).unwrap();
        for i in 0..5 {
            let d = sample_driving_indexed(&pol, &grid, 3, i, None).unwrap();
            let cp = coupled_simulate(&sys, &d, (1.0, -1.0), &sched, &grid).unwrap();
            assert!(identity_defect(&cp, &sched) < 1e-12);
        }
    }

    #[test]
    fn zero_drift_phi_is_schedule_derivative() {
        let p = params();
        let sys = HamiltonianSystem::free_particle(Rect::square(5.0));
        let grid = TimeGrid::new(1.0, 256).unwrap();
        let sched = build_schedule(0.0, 1.0, 1.0, (1.0, 0.0), &grid, 64).unwrap();
        let pol = make_policy(&PolicySpec::Constant(1.0), &p, &grid).unwrap();
        let d = sample_driving_indexed(&pol, &grid, 1, 0, None).unwrap();
        let cp = coupled_simulate(&sys, &d, (0.0, 0.0), &sched, &grid).unwrap();
        assert!(cp.phi2.iter().all(|&v| v == 0.0));
        for k in 0..grid.n_steps() {
            assert_eq!(cp.phi1[k], sched.gamma1prime[k]);
        }
        let (value, _) = phi_quadratic_form(&cp, &p).unwrap();
        let dt = grid.dt();
        assert!((value - 12.0).abs() < 30.0 * dt * dt, "{value}");
    }

    #[test]
    fn zero_shift_gives_unit_density() {
        let p = params();
        let grid = TimeGrid::new(1.0, 50).unwrap();
        let pol = make_policy(&PolicySpec::Constant(1.5), &p, &grid).unwrap();
        let d = sample_driving_indexed(&pol, &grid, 1, 0, None).unwrap();
        let z = vec![0.0; 50];
        let r = girsanov_exponent(&z, &z, &d, 1.0).unwrap();
        assert!(r.density.iter().all(|&v| v == 1.0));
        assert!(girsanov_exponent(&z[..10], &z, &d, 1.0).is_err());
    }

    #[test]
    fn tilt_identity_holds_pathwise() {
        let p = params();
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let pol = make_policy(&PolicySpec::Constant(1.3), &p, &grid).unwrap();
        let d = sample_driving_indexed(&pol, &grid, 5, 2, None).unwrap();
        let g1: Vec<f64> = (0..100).map(|k| (k as f64 * 0.1).sin()).collect();
        let g2: Vec<f64> = (0..100).map(|k| 0.5 - k as f64 * 0.01).collect();
        let q = 2.0;
        let r1 = girsanov_exponent(&g1, &g2, &d, 1.0).unwrap();
        let rt = girsanov_exponent(&g1, &g2, &d, q).unwrap();
        let lhs = q * r1.log_terminal();
        let rhs = rt.log_terminal() + tilt_compensator(q, *r1.quad.last().unwrap());
        assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn novikov_trivial_and_bounded() {
        let p = params();
        let sys = HamiltonianSystem::damped_oscillator(Rect::square(5.0));
        let grid = TimeGrid::new(0.5, 50).unwrap();
        let dict: Vec<_> = PolicySpec::default_dictionary(&p)
            .iter()
            .map(|s| make_policy(s, &p, &grid).unwrap())
            .collect();
        let zero = |_: f64, _: f64| 0.0;
        let est = novikov_estimate(&zero, &zero, &sys, &dict, 0.2, (0.0, 0.0), &grid, 20, 1).unwrap();
        assert_eq!(est.value, 1.0);
        let c = 0.8;
        let g = move |x: f64, _: f64| c * x.sin();
        let delta = 0.3;
        let est = novikov_estimate(&g, &zero, &sys, &dict, delta, (1.0, 0.0), &grid, 50, 1).unwrap();
        let bound = ((1.0 + 2.0 * delta) * (1.0 + 4.0) * c * c * 0.5).exp();
        assert!(est.value <= bound && est.value >= 1.0);
    }
}
