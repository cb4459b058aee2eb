//! Grid solver for the fully nonlinear backward equation
//!
//! ```text
//! ∂t u + (A x + M y) ∂x u + b1 ∂y u + 2 G(b2 ∂y u + ½ Q² ∂yy u) = 0,   u(T) = f
//! ```
//!
//! whose value at `(0, z)` is `P̄_T f(z)`. The scheme is explicit and
//! monotone: first derivatives are upwinded, `∂yy` is centered, and the
//! Hamiltonian `2G(a) = max(σ_lower² a, σ_upper² a)` is maximized exactly per
//! node, which also yields the bang-bang feedback control.
//!
//! No diffusion is added in `x`. Boundary nodes are filled by linear
//! extrapolation from the two nearest interior nodes.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gcore::{ControlPolicy, FeedbackTable, GParams, TimeGrid};
use crate::gsde::{HamiltonianSystem, Rect, TestFn};

/// Grid resolution and output options.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HjbSettings {
    /// The domain is `[-L, L]²`.
    pub half_width: f64,
    pub nx: usize,
    pub ny: usize,
    /// Time steps; `None` picks the smallest count meeting the monotonicity
    /// condition with a 0.9 safety factor.
    #[serde(default)]
    pub n_steps: Option<usize>,
    /// Number of stored time levels (value and control), at least 2.
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
}

fn default_snapshots() -> usize {
    33
}

impl HjbSettings {
    pub fn new(half_width: f64, nx: usize, ny: usize) -> Self {
        Self { half_width, nx, ny, n_steps: None, snapshots: default_snapshots() }
    }
}

/// Time-step restrictions of the explicit scheme.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CflReport {
    pub dt: f64,
    /// `dx / max|A x + M y|`.
    pub transport_limit: f64,
    /// `dy² / (σ_upper² Q²)`.
    pub diffusion_limit: f64,
    /// Largest `dt` keeping every update a convex combination of old values.
    pub monotone_limit: f64,
}

#[derive(Debug, Clone)]
pub struct HjbSolution {
    pub domain: Rect,
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub grid: TimeGrid,
    /// Stored time levels, increasing, first 0 and last T.
    pub snapshot_times: Vec<f64>,
    /// `values[j][i * ny + l] = u(snapshot_times[j], x_i, y_l)`.
    pub values: Vec<Vec<f64>>,
    /// `upper[j][i * ny + l]` is true where `γ* = σ_upper` on the step that
    /// starts at `snapshot_times[j]`. The last level (time T) repeats the
    /// previous one.
    pub upper: Vec<Vec<bool>>,
    pub cfl: CflReport,
    pub sigma_lower: f64,
    pub sigma_upper: f64,
}

impl HjbSolution {
    pub fn x(&self, i: usize) -> f64 {
        self.domain.x_min + i as f64 * self.dx
    }

    pub fn y(&self, l: usize) -> f64 {
        self.domain.y_min + l as f64 * self.dy
    }

    /// `u(0, ·)` on the grid.
    pub fn initial_values(&self) -> &[f64] {
        &self.values[0]
    }

    pub fn terminal_values(&self) -> &[f64] {
        self.values.last().expect("at least two levels")
    }

    /// Bilinear interpolation of stored level `level` at `z`.
    pub fn interpolate(&self, level: usize, z: (f64, f64)) -> Result<f64> {
        let (x, y) = z;
        if !self.domain.contains(x, y) {
            return Err(Error::OutOfDomain { x, y });
        }
        let u = &self.values[level];
        let fx = snap(((x - self.domain.x_min) / self.dx).clamp(0.0, (self.nx - 1) as f64));
        let fy = snap(((y - self.domain.y_min) / self.dy).clamp(0.0, (self.ny - 1) as f64));
        let i = (fx.floor() as usize).min(self.nx - 2);
        let l = (fy.floor() as usize).min(self.ny - 2);
        let (sx, sy) = (fx - i as f64, fy - l as f64);
        let at = |a: usize, b: usize| u[a * self.ny + b];
        let v = (1.0 - sx) * (1.0 - sy) * at(i, l)
            + sx * (1.0 - sy) * at(i + 1, l)
            + (1.0 - sx) * sy * at(i, l + 1)
            + sx * sy * at(i + 1, l + 1);
        Ok(v)
    }
}

// Fractional grid coordinates within rounding of a node land on the node.
fn snap(f: f64) -> f64 {
    let r = f.round();
    if (f - r).abs() < 1e-9 {
        r
    } else {
        f
    }
}

/// Bilinear interpolation of `u(0, ·)` at `z`.
pub fn hjb_value_at(sol: &HjbSolution, z: (f64, f64)) -> Result<f64> {
    sol.interpolate(0, z)
}

/// Feedback control table from the stored control levels.
pub fn extract_policy(sol: &HjbSolution) -> ControlPolicy {
    ControlPolicy::Feedback(Arc::new(FeedbackTable {
        times: sol.snapshot_times.clone(),
        x_min: sol.domain.x_min,
        y_min: sol.domain.y_min,
        dx: sol.dx,
        dy: sol.dy,
        nx: sol.nx,
        ny: sol.ny,
        upper: sol.upper.clone(),
        sigma_lower: sol.sigma_lower,
        sigma_upper: sol.sigma_upper,
    }))
}

struct Coefficients {
    velocity: Vec<f64>,
    drift_dt: Vec<f64>,
    drift_qv: Vec<f64>,
}

fn coefficients(system: &HamiltonianSystem, domain: &Rect, nx: usize, ny: usize, dx: f64, dy: f64) -> Result<Coefficients> {
    let mut velocity = vec![0.0; nx * ny];
    let mut drift_dt = vec![0.0; nx * ny];
    let mut drift_qv = vec![0.0; nx * ny];
    for i in 0..nx {
        let x = domain.x_min + i as f64 * dx;
        for l in 0..ny {
            let y = domain.y_min + l as f64 * dy;
            let idx = i * ny + l;
            velocity[idx] = system.a * x + system.m * y;
            drift_dt[idx] = system.drift_dt(x, y)?;
            drift_qv[idx] = system.drift_qv(x, y)?;
        }
    }
    Ok(Coefficients { velocity, drift_dt, drift_qv })
}

fn cfl_limits(c: &Coefficients, params: &GParams, q: f64, dx: f64, dy: f64) -> (f64, f64, f64) {
    let hi2 = params.upper().powi(2);
    let mut vmax = 0.0_f64;
    let mut rate = 0.0_f64;
    for idx in 0..c.velocity.len() {
        let v = c.velocity[idx].abs();
        vmax = vmax.max(v);
        let r = v / dx + c.drift_dt[idx].abs() / dy + hi2 * c.drift_qv[idx].abs() / dy + hi2 * q * q / (dy * dy);
        rate = rate.max(r);
    }
    let transport = if vmax > 0.0 { dx / vmax } else { f64::INFINITY };
    let diffusion = dy * dy / (hi2 * q * q);
    (transport, diffusion, 1.0 / rate)
}

/// Smallest step count meeting the monotonicity condition with a 0.9 factor.
pub fn stable_steps(
    system: &HamiltonianSystem,
    params: &GParams,
    horizon: f64,
    settings: &HjbSettings,
) -> Result<usize> {
    let domain = Rect::square(settings.half_width);
    let (dx, dy) = spacings(&domain, settings.nx, settings.ny)?;
    let c = coefficients(system, &domain, settings.nx, settings.ny, dx, dy)?;
    let (_, _, monotone) = cfl_limits(&c, params, system.q, dx, dy);
    Ok((horizon / (0.9 * monotone)).ceil().max(1.0) as usize)
}

fn spacings(domain: &Rect, nx: usize, ny: usize) -> Result<(f64, f64)> {
    if nx < 4 || ny < 4 {
        return Err(Error::InvalidParams("HJB grid needs at least 4 nodes per axis".into()));
    }
    Ok((
        (domain.x_max - domain.x_min) / (nx - 1) as f64,
        (domain.y_max - domain.y_min) / (ny - 1) as f64,
    ))
}

/// Solve backward from `u(T) = f` on `[-L, L]²`.
pub fn solve_hjb(
    system: &HamiltonianSystem,
    params: &GParams,
    f: TestFn<'_>,
    horizon: f64,
    settings: &HjbSettings,
) -> Result<HjbSolution> {
    let domain = Rect::square(settings.half_width);
    let (nx, ny) = (settings.nx, settings.ny);
    let (dx, dy) = spacings(&domain, nx, ny)?;
    let coef = coefficients(system, &domain, nx, ny, dx, dy)?;
    let (transport_limit, diffusion_limit, monotone_limit) = cfl_limits(&coef, params, system.q, dx, dy);
    let n_steps = match settings.n_steps {
        Some(n) => n,
        None => (horizon / (0.9 * monotone_limit)).ceil().max(1.0) as usize,
    };
    let grid = TimeGrid::new(horizon, n_steps)?;
    let dt = grid.dt();
    let cfl = CflReport { dt, transport_limit, diffusion_limit, monotone_limit };
    if dt > monotone_limit {
        return Err(Error::CflViolation { dt, limit: monotone_limit });
    }

    let mut u = vec![0.0; nx * ny];
    for i in 0..nx {
        let x = domain.x_min + i as f64 * dx;
        for l in 0..ny {
            let v = f(x, domain.y_min + l as f64 * dy);
            if !v.is_finite() {
                return Err(Error::NonFinite { step: n_steps });
            }
            u[i * ny + l] = v;
        }
    }

    let levels = settings.snapshots.max(2);
    // Step indices to store, descending so they are met in solve order.
    let mut store: Vec<usize> = (0..levels)
        .map(|j| ((j as f64 / (levels - 1) as f64) * n_steps as f64).round() as usize)
        .collect();
    store.dedup();
    let mut values_rev = vec![u.clone()];
    let mut upper_rev: Vec<Vec<bool>> = Vec::new();
    let mut times_rev = vec![grid.time(n_steps)];
    let mut next_store = store.len() as isize - 2;

    let lo2 = params.lower().powi(2);
    let hi2 = params.upper().powi(2);
    let half_q2 = 0.5 * system.q * system.q;
    let (inv_dx, inv_dy, inv_dy2) = (1.0 / dx, 1.0 / dy, 1.0 / (dy * dy));

    let mut next = vec![0.0; nx * ny];
    let mut upper = vec![true; nx * ny];
    for k in (0..n_steps).rev() {
        {
            let u = &u;
            let coef = &coef;
            next.par_chunks_mut(ny)
                .zip(upper.par_chunks_mut(ny))
                .enumerate()
                .filter(|(i, _)| *i > 0 && *i < nx - 1)
                .for_each(|(i, (row, up_row))| {
                    for l in 1..ny - 1 {
                        let idx = i * ny + l;
                        let c = u[idx];
                        let v = coef.velocity[idx];
                        let ux = if v >= 0.0 { (u[idx + ny] - c) * inv_dx } else { (c - u[idx - ny]) * inv_dx };
                        let up = (u[idx + 1] - c) * inv_dy;
                        let down = (c - u[idx - 1]) * inv_dy;
                        let b1 = coef.drift_dt[idx];
                        let b2 = coef.drift_qv[idx];
                        let uy1 = if b1 >= 0.0 { up } else { down };
                        let uy2 = if b2 >= 0.0 { up } else { down };
                        let uyy = (u[idx + 1] - 2.0 * c + u[idx - 1]) * inv_dy2;
                        let arg = b2 * uy2 + half_q2 * uyy;
                        let is_upper = arg >= 0.0;
                        let ham = if is_upper { hi2 * arg } else { lo2 * arg };
                        row[l] = c + dt * (v * ux + b1 * uy1 + ham);
                        up_row[l] = is_upper;
                    }
                });
        }
        extrapolate_boundary(&mut next, &mut upper, nx, ny);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: k });
        }
        std::mem::swap(&mut u, &mut next);
        if next_store >= 0 && store[next_store as usize] == k {
            values_rev.push(u.clone());
            upper_rev.push(upper.clone());
            times_rev.push(grid.time(k));
            next_store -= 1;
        }
    }

    values_rev.reverse();
    times_rev.reverse();
    upper_rev.reverse();
    // The terminal level has no step of its own; reuse the last control.
    let last = upper_rev.last().cloned().unwrap_or_else(|| vec![true; nx * ny]);
    upper_rev.push(last);

    Ok(HjbSolution {
        domain,
        nx,
        ny,
        dx,
        dy,
        grid,
        snapshot_times: times_rev,
        values: values_rev,
        upper: upper_rev,
        cfl,
        sigma_lower: params.lower(),
        sigma_upper: params.upper(),
    })
}

fn extrapolate_boundary(u: &mut [f64], upper: &mut [bool], nx: usize, ny: usize) {
    for i in 1..nx - 1 {
        let r = i * ny;
        u[r] = 2.0 * u[r + 1] - u[r + 2];
        u[r + ny - 1] = 2.0 * u[r + ny - 2] - u[r + ny - 3];
        upper[r] = upper[r + 1];
        upper[r + ny - 1] = upper[r + ny - 2];
    }
    let last = (nx - 1) * ny;
    for l in 0..ny {
        u[l] = 2.0 * u[ny + l] - u[2 * ny + l];
        u[last + l] = 2.0 * u[last - ny + l] - u[last - 2 * ny + l];
        upper[l] = upper[ny + l];
        upper[last + l] = upper[last - ny + l];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> GParams {
        GParams::new(1.0, 2.0).unwrap()
    }

    #[test]
    fn constants_are_preserved() {
        let sys = HamiltonianSystem::damped_oscillator(Rect::square(4.0));
        let s = HjbSettings::new(4.0, 41, 41);
        let sol = solve_hjb(&sys, &params(), &|_, _| 0.7, 1.0, &s).unwrap();
        assert!(sol.initial_values().iter().all(|&v| v == 0.7));
        assert!(sol.upper.iter().flatten().all(|&b| b), "zero argument breaks ties to σ_upper");
    }

    #[test]
    fn terminal_level_is_f() {
        let sys = HamiltonianSystem::damped_oscillator(Rect::square(4.0));
        let s = HjbSettings::new(4.0, 21, 21);
        let f = |x: f64, y: f64| 1.0 / (1.0 + x * x + y * y);
        let sol = solve_hjb(&sys, &params(), &f, 0.5, &s).unwrap();
        for i in 0..sol.nx {
            for l in 0..sol.ny {
                assert_eq!(sol.terminal_values()[i * sol.ny + l], f(sol.x(i), sol.y(l)));
            }
        }
        assert_eq!(sol.snapshot_times[0], 0.0);
        assert_eq!(*sol.snapshot_times.last().unwrap(), 0.5);
    }

    #[test]
    fn cfl_violation_is_reported() {
        let sys = HamiltonianSystem::free_particle(Rect::square(4.0));
        let mut s = HjbSettings::new(4.0, 81, 81);
        s.n_steps = Some(10);
        assert!(matches!(solve_hjb(&sys, &params(), &|_, y| y * y, 1.0, &s), Err(Error::CflViolation { .. })));
    }

    #[test]
    fn interpolation_hits_nodes_and_rejects_outside() {
        let sys = HamiltonianSystem::free_particle(Rect::square(2.0));
        let s = HjbSettings::new(2.0, 21, 21);
        let sol = solve_hjb(&sys, &params(), &|x, y| x + 2.0 * y, 0.1, &s).unwrap();
        let node = sol.values[0][3 * sol.ny + 7];
        assert_eq!(hjb_value_at(&sol, (sol.x(3), sol.y(7))).unwrap(), node);
        assert!(matches!(hjb_value_at(&sol, (2.5, 0.0)), Err(Error::OutOfDomain { .. })));
    }
}
