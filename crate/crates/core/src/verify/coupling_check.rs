use serde::{Deserialize, Serialize};

use crate::coupling::{build_schedule, coupled_simulate, identity_defect, lambda1, DEFAULT_QUAD_POINTS};
use crate::error::{Error, Result};
use crate::gcore::{make_policy, sample_driving_indexed, GParams, PolicySpec, TimeGrid};
use crate::gsde::HamiltonianSystem;
use crate::stats::linear_fit;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingCheckOptions {
    pub z: (f64, f64),
    pub h: (f64, f64),
    pub horizon: f64,
    /// The order study uses `dt = 2^{-k}` for each `k`.
    pub dt_exponents: Vec<u32>,
    /// Simulated paths per step size for the identity check.
    pub identity_paths: usize,
    pub seed: u64,
    pub quad_points: usize,
}

impl Default for CouplingCheckOptions {
    fn default() -> Self {
        Self {
            z: (1.0, -1.0),
            h: (0.3, 0.0),
            horizon: 1.0,
            dt_exponents: vec![6, 7, 8, 9, 10],
            identity_paths: 20,
            seed: 0,
            quad_points: DEFAULT_QUAD_POINTS,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EndpointEntry {
    pub a: f64,
    pub m: f64,
    pub horizon: f64,
    pub h: (f64, f64),
    pub start_exact: bool,
    /// `|Θ₁(T)| / |h|`.
    pub end_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OrderEntry {
    pub dt: f64,
    pub n_steps: usize,
    /// Largest relative deviation of the simulated gap from `Θ̂₁`.
    pub identity_defect: f64,
    /// Mean of `|(X̃_n, Ỹ_n) − (X_n, Y_n)|` over the simulated paths.
    pub endpoint_gap: f64,
    /// `|Θ̂₁(T)|`.
    pub hat_end: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CouplingCheckReport {
    /// `Θ₁(½)` for `A = 0, M = 1, T = 1, h = (1, 0)`.
    pub spot_value: (f64, f64),
    pub spot_error: f64,
    pub spot_ok: bool,
    pub endpoints: Vec<EndpointEntry>,
    pub max_end_ratio: f64,
    pub endpoints_ok: bool,
    pub order: Vec<OrderEntry>,
    pub max_identity_defect: f64,
    pub identity_ok: bool,
    /// Slope of `log endpoint_gap` against `log dt`.
    pub observed_order: f64,
    pub order_ok: bool,
    /// `max_T T |Λ₁(T)⁻¹|` over `T ∈ [0.05, 4]` for the system's `(A, M)`.
    pub lambda_inverse_c: f64,
    /// `max_T sup|γ₁′| / ((1/T + 1/T²)|h|)`.
    pub gamma_prime_c: f64,
    /// `max_T sup|Θ₁| / ((1 + T)|h|)`.
    pub theta_c: f64,
    pub pass: bool,
}

const SPOT_TOL: f64 = 1e-10;
const END_TOL: f64 = 1e-8;
const IDENTITY_TOL: f64 = 1e-12;
const MIN_ORDER: f64 = 0.9;

fn bound_horizons() -> Vec<f64> {
    (0..=16).map(|k| 0.05 * 80f64.powf(k as f64 / 16.0)).collect()
}

/// Schedule, coupled-identity and endpoint-convergence checks.
pub fn coupling_check(
    system: &HamiltonianSystem,
    params: &GParams,
    opts: &CouplingCheckOptions,
) -> Result<CouplingCheckReport> {
    if opts.h == (0.0, 0.0) {
        return Err(Error::InvalidParams("coupling check needs a nonzero shift h".into()));
    }
    if opts.dt_exponents.len() < 2 || opts.identity_paths == 0 {
        return Err(Error::InvalidParams("need at least two step sizes and one path".into()));
    }
    let qp = opts.quad_points;
    let h_norm = opts.h.0.hypot(opts.h.1);

    let spot_grid = TimeGrid::new(1.0, 64)?;
    let spot = build_schedule(0.0, 1.0, 1.0, (1.0, 0.0), &spot_grid, qp)?;
    let spot_value = (spot.theta1x[32], spot.theta1y[32]);
    let spot_error = (spot_value.0 - 0.5).hypot(spot_value.1 + 1.5);

    let mut endpoints = Vec::new();
    for &a in &[-2.0, -0.5, 0.0, 1.0, 2.0] {
        for &m in &[-2.0, -1.0, 1.0, 2.0] {
            for &t in &[0.1, 1.0, 4.0] {
                for &h in &[(1.0, 0.0), (0.0, 1.0), (0.3, -0.7)] {
                    let grid = TimeGrid::new(t, 100)?;
                    let s = build_schedule(a, m, t, h, &grid, qp)?;
                    let (x, y) = s.theta_end();
                    endpoints.push(EndpointEntry {
                        a,
                        m,
                        horizon: t,
                        h,
                        start_exact: (s.theta1x[0], s.theta1y[0]) == h,
                        end_ratio: x.hypot(y) / h.0.hypot(h.1),
                    });
                }
            }
        }
    }
    let max_end_ratio = endpoints.iter().fold(0.0_f64, |m, e| m.max(e.end_ratio));
    let endpoints_ok = endpoints.iter().all(|e| e.start_exact) && max_end_ratio <= END_TOL;

    let policy = make_policy(&PolicySpec::Constant(params.lower()), params, &TimeGrid::new(opts.horizon, 1)?)?;
    let mut order = Vec::new();
    for &k in &opts.dt_exponents {
        let dt = 0.5f64.powi(k as i32);
        let n_steps = (opts.horizon / dt).round().max(1.0) as usize;
        let grid = TimeGrid::new(opts.horizon, n_steps)?;
        let sched = build_schedule(system.a, system.m, opts.horizon, opts.h, &grid, qp)?;
        let mut defect = 0.0_f64;
        let mut gap = 0.0;
        for i in 0..opts.identity_paths as u64 {
            let d = sample_driving_indexed(&policy, &grid, opts.seed, i, None)?;
            let cp = coupled_simulate(system, &d, opts.z, &sched, &grid)?;
            defect = defect.max(identity_defect(&cp, &sched));
            let n = grid.n_steps();
            gap += (cp.shifted.x[n] - cp.base.x[n]).hypot(cp.shifted.y[n] - cp.base.y[n]);
        }
        let (hx, hy) = sched.hat_end();
        order.push(OrderEntry {
            dt: grid.dt(),
            n_steps,
            identity_defect: defect,
            endpoint_gap: gap / opts.identity_paths as f64,
            hat_end: hx.hypot(hy),
        });
    }
    let max_identity_defect = order.iter().fold(0.0_f64, |m, e| m.max(e.identity_defect));
    let xs: Vec<f64> = order.iter().map(|e| e.dt.ln()).collect();
    let ys: Vec<f64> = order.iter().map(|e| e.endpoint_gap.ln()).collect();
    let (_, observed_order, _) = linear_fit(&xs, &ys);

    let mut lambda_inverse_c = 0.0_f64;
    let mut gamma_prime_c = 0.0_f64;
    let mut theta_c = 0.0_f64;
    for t in bound_horizons() {
        lambda_inverse_c = lambda_inverse_c.max(t / lambda1(system.a, system.m, t, qp)?.abs());
        let grid = TimeGrid::new(t, 200)?;
        let s = build_schedule(system.a, system.m, t, opts.h, &grid, qp)?;
        let (gp, th) = s.sup_norms();
        gamma_prime_c = gamma_prime_c.max(gp / ((1.0 / t + 1.0 / (t * t)) * h_norm));
        theta_c = theta_c.max(th / ((1.0 + t) * h_norm));
    }

    let spot_ok = spot_error <= SPOT_TOL;
    let identity_ok = max_identity_defect <= IDENTITY_TOL;
    let order_ok = observed_order >= MIN_ORDER;
    Ok(CouplingCheckReport {
        spot_value,
        spot_error,
        spot_ok,
        endpoints,
        max_end_ratio,
        endpoints_ok,
        order,
        max_identity_defect,
        identity_ok,
        observed_order,
        order_ok,
        lambda_inverse_c,
        gamma_prime_c,
        theta_c,
        pass: spot_ok && endpoints_ok && identity_ok && order_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gsde::Rect;

    #[test]
    fn damped_oscillator_passes_with_first_order_endpoints() {
        let params = GParams::new(1.0, 2.0).unwrap();
        let sys = HamiltonianSystem::damped_oscillator(Rect::square(6.0));
        let opts = CouplingCheckOptions { identity_paths: 3, ..Default::default() };
        let r = coupling_check(&sys, &params, &opts).unwrap();
        assert!(r.pass, "{r:?}");
        assert!((r.observed_order - 1.0).abs() < 0.1, "{}", r.observed_order);
        for e in &r.order {
            assert!((e.endpoint_gap / e.hat_end - 1.0).abs() < 1e-6);
        }
        assert!(r.lambda_inverse_c.is_finite() && r.gamma_prime_c.is_finite() && r.theta_c.is_finite());
    }
}
