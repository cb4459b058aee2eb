use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gcore::GParams;
use crate::quadrature::GaussLegendre;
use crate::rng::path_rng;
use crate::stats::linear_fit;

/// `E exp(−a |z − ξ|²)` for `ξ ~ N(0, v I₂)`.
pub fn inner_expectation_oracle(a: f64, z: (f64, f64), v: f64) -> f64 {
    let s = 1.0 + 2.0 * a * v;
    (-a * (z.0 * z.0 + z.1 * z.1) / s).exp() / s
}

/// `P(|ξ − z| ≤ r)` for `ξ ~ N(0, v I₂)`, by polar quadrature around `z`.
pub fn gaussian_ball_measure(z: (f64, f64), r: f64, v: f64, quad_points: usize) -> f64 {
    if z == (0.0, 0.0) {
        return -(-r * r / (2.0 * v)).exp_m1();
    }
    let gl = GaussLegendre::new(quad_points.max(2));
    let n_angle = 4 * quad_points.max(2);
    gl.integrate(0.0, r, |rho| {
        let mut s = 0.0;
        for k in 0..n_angle {
            let phi = 2.0 * PI * k as f64 / n_angle as f64;
            let x = z.0 + rho * phi.cos();
            let y = z.1 + rho * phi.sin();
            s += (-(x * x + y * y) / (2.0 * v)).exp();
        }
        s * 2.0 * PI / n_angle as f64 * rho / (2.0 * PI * v)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrabilityOptions {
    pub s_min: f64,
    pub t_max: f64,
    pub quad_points: usize,
    pub n_mc: usize,
    pub seed: u64,
}

impl Default for IntegrabilityOptions {
    fn default() -> Self {
        Self { s_min: 1e-3, t_max: 1.0, quad_points: 64, n_mc: 20_000, seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InnerEntry {
    pub s: f64,
    /// Monte Carlo `μ₀(e^{−c|z−·|²/s³})`.
    pub inner: f64,
    pub inner_se: f64,
    pub oracle: f64,
    /// `inner^{−1/p}`.
    pub integrand: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IntegrabilityReport {
    pub p: f64,
    pub z: (f64, f64),
    pub c_phi: f64,
    /// Per-coordinate variance of the reference Gaussian.
    pub variance: f64,
    pub s_range: (f64, f64),
    /// `∫ ds / inner(s)^{1/p}` over `s_range`.
    pub integral: f64,
    pub integral_oracle: f64,
    pub finite: bool,
    pub entries: Vec<InnerEntry>,
    /// Log-log slope of the inner expectation on the smallest decade.
    pub inner_exponent: f64,
    /// `inner_exponent / p < 1`: the integral also converges at `s → 0`.
    pub integrable_at_zero: bool,
    /// Log-log slope of `μ₀(B(z, s^{3/2}))` on the smallest decade.
    pub ball_exponent: f64,
    /// The small-ball exponent printed for this example.
    pub stated_ball_exponent: f64,
    /// The inner expectation is a lower bound for the invariant expectation.
    pub note: String,
}

/// Monte Carlo estimate of `E exp(−a|z − ξ|²)` under `N(0, v I₂)`.
/// Narrow kernels are sampled from `N(z, I/(2a))` with the Gaussian density as
/// weight, wide ones directly from `N(0, v I)`.
fn inner_mc(a: f64, z: (f64, f64), v: f64, normals: &[(f64, f64)]) -> (f64, f64) {
    let n = normals.len() as f64;
    let w = 1.0 / (2.0 * a);
    let samples: Vec<f64> = if w < v {
        let sd = w.sqrt();
        normals
            .iter()
            .map(|&(u1, u2)| {
                let x = z.0 + sd * u1;
                let y = z.1 + sd * u2;
                (PI / a) * (-(x * x + y * y) / (2.0 * v)).exp() / (2.0 * PI * v)
            })
            .collect()
    } else {
        let sd = v.sqrt();
        normals
            .iter()
            .map(|&(u1, u2)| {
                let dx = z.0 - sd * u1;
                let dy = z.1 - sd * u2;
                (-a * (dx * dx + dy * dy)).exp()
            })
            .collect()
    };
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Integrability of `s ↦ μ₀(e^{−c|z−·|²/s³})^{−1/p}` on `[s_min, t_max]` with
/// `μ₀ = N(0, σ_lower²/2 · I₂)`.
pub fn phi_integrability_check(
    p: f64,
    z: (f64, f64),
    c_phi: f64,
    params: &GParams,
    opts: &IntegrabilityOptions,
) -> Result<IntegrabilityReport> {
    if !(p > 1.0 && c_phi > 0.0) {
        return Err(Error::InvalidParams("need p > 1 and c_phi > 0".into()));
    }
    if !(opts.s_min > 0.0 && opts.t_max > opts.s_min && opts.n_mc >= 2) {
        return Err(Error::InvalidParams("need 0 < s_min < t_max and n_mc >= 2".into()));
    }
    let v = params.lower() * params.lower() / 2.0;
    let mut rng = path_rng(opts.seed, 0);
    let normals: Vec<(f64, f64)> = (0..opts.n_mc)
        .map(|_| (rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)))
        .collect();

    let entry = |s: f64| -> Result<InnerEntry> {
        let a = c_phi / (s * s * s);
        let (inner, inner_se) = inner_mc(a, z, v, &normals);
        let integrand = inner.powf(-1.0 / p);
        if !integrand.is_finite() {
            return Err(Error::QuadratureDivergence { s });
        }
        Ok(InnerEntry { s, inner, inner_se, oracle: inner_expectation_oracle(a, z, v), integrand })
    };

    // Substitute s = e^u and integrate in u.
    let gl = GaussLegendre::new(opts.quad_points.max(2));
    let (u0, u1) = (opts.s_min.ln(), opts.t_max.ln());
    let mut err = None;
    let integral = gl.integrate(u0, u1, |u| {
        let s = u.exp();
        match entry(s) {
            Ok(e) => e.integrand * s,
            Err(e) => {
                err.get_or_insert(e);
                f64::NAN
            }
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    let integral_oracle = gl.integrate(u0, u1, |u| {
        let s = u.exp();
        inner_expectation_oracle(c_phi / (s * s * s), z, v).powf(-1.0 / p) * s
    });

    let n_log = 25;
    let entries = (0..n_log)
        .map(|k| entry((u0 + (u1 - u0) * k as f64 / (n_log - 1) as f64).exp()))
        .collect::<Result<Vec<_>>>()?;

    // Small-s exponents over the first decade.
    let decade: Vec<f64> = (0..8).map(|k| opts.s_min * 10f64.powf(k as f64 / 7.0)).collect();
    let xs: Vec<f64> = decade.iter().map(|s| s.ln()).collect();
    let inner_logs = decade
        .iter()
        .map(|&s| entry(s).map(|e| e.inner.ln()))
        .collect::<Result<Vec<_>>>()?;
    let (_, inner_exponent, _) = linear_fit(&xs, &inner_logs);
    let ball_logs: Vec<f64> =
        decade.iter().map(|&s| gaussian_ball_measure(z, s.powf(1.5), v, opts.quad_points).ln()).collect();
    let (_, ball_exponent, _) = linear_fit(&xs, &ball_logs);

    Ok(IntegrabilityReport {
        p,
        z,
        c_phi,
        variance: v,
        s_range: (opts.s_min, opts.t_max),
        integral,
        integral_oracle,
        finite: integral.is_finite(),
        entries,
        inner_exponent,
        integrable_at_zero: inner_exponent / p < 1.0,
        ball_exponent,
        stated_ball_exponent: 1.5,
        note: "invariant expectation replaced by the Gaussian invariant measure of the lower-volatility \
               control; this bounds it from below"
            .into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mc_inner_matches_closed_form_in_both_regimes() {
        let mut rng = path_rng(9, 0);
        let normals: Vec<(f64, f64)> = (0..20_000)
            .map(|_| (rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)))
            .collect();
        for &(a, z) in &[(0.1, (0.0, 0.0)), (1e3, (0.0, 0.0)), (1e6, (0.3, -0.2)), (0.5, (1.0, 1.0))] {
            let (m, se) = inner_mc(a, z, 0.5, &normals);
            let exact = inner_expectation_oracle(a, z, 0.5);
            assert!((m - exact).abs() <= 4.0 * se + 1e-12 * exact, "a={a}: {m} vs {exact} (se {se})");
        }
    }

    #[test]
    fn ball_measure_polar_matches_centered_closed_form() {
        let z = (1e-12, 0.0);
        let r = 0.7;
        let exact = -(-r * r / (2.0 * 0.5f64)).exp_m1();
        assert!((gaussian_ball_measure(z, r, 0.5, 32) - exact).abs() < 1e-9);
    }

    #[test]
    fn default_example_is_finite_with_cubic_small_s_decay() {
        let params = GParams::new(1.0, 2.0).unwrap();
        let r = phi_integrability_check(2.0, (0.0, 0.0), 1.0, &params, &IntegrabilityOptions::default()).unwrap();
        assert!(r.finite);
        assert!((r.integral / r.integral_oracle - 1.0).abs() < 0.01);
        assert!((r.entries.last().unwrap().inner - inner_expectation_oracle(1.0, (0.0, 0.0), 0.5)).abs() < 0.01);
        assert!((r.inner_exponent - 3.0).abs() < 0.1, "{}", r.inner_exponent);
        assert!((r.ball_exponent - 3.0).abs() < 0.05, "{}", r.ball_exponent);
    }
}
