use serde::{Deserialize, Serialize};

use super::harnack::density_moments;
use super::{build_dictionary, TestFunction};
use crate::coupling::{sigma_t, DEFAULT_QUAD_POINTS};
use crate::error::{Error, Result};
use crate::gcore::{GParams, PolicySpec, TimeGrid};
use crate::gsde::{semigroup_sup, HamiltonianSystem};
use crate::rng::substream;
use crate::stats::{linear_fit, Estimate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientOptions {
    pub dictionary: Vec<PolicySpec>,
    pub max_dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub h_norms: Vec<f64>,
    pub quad_points: usize,
}

impl GradientOptions {
    pub fn new(params: &GParams) -> Self {
        Self {
            dictionary: PolicySpec::default_dictionary(params),
            max_dt: 0.01,
            n_paths: 20_000,
            seed: 0,
            h_norms: vec![1e-1, 1e-2, 1e-3],
            quad_points: DEFAULT_QUAD_POINTS,
        }
    }
}

const DIRECTIONS: [(f64, f64); 4] = [
    (1.0, 0.0),
    (0.0, 1.0),
    (std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2),
    (std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2),
];

#[derive(Debug, Clone, Serialize)]
pub struct SlopeEntry {
    pub h_norm: f64,
    pub direction: (f64, f64),
    /// `|P̄_T f(z + h) − P̄_T f(z)| / |h|`.
    pub slope: f64,
}

/// Density diagnostics at one shift size.
#[derive(Debug, Clone, Serialize)]
pub struct LogDensityEntry {
    pub h_norm: f64,
    /// `max_θ E |log R₁|`.
    pub abs_log: Estimate,
    /// `max_θ E |R₁ − 1|^{p/(p−1)}`.
    pub abs_dev: Estimate,
    /// `Σ(T)|h|² + √Σ(T)|h|`.
    pub sigma_form: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradientReport {
    pub z: (f64, f64),
    pub horizon: f64,
    pub p: f64,
    pub sigma: f64,
    pub sup_norm: f64,
    /// `(P̄_T |f|^p(z))^{1/p}`.
    pub power_norm: Estimate,
    pub value: Estimate,
    pub slopes: Vec<SlopeEntry>,
    /// Largest slope at the smallest `|h|`.
    pub max_slope: f64,
    /// `max_slope / (‖f‖_∞ √Σ(T))`.
    pub fitted_c_sup: f64,
    /// `max_slope / ((P̄_T |f|^p)^{1/p} √Σ(T))`.
    pub fitted_c_p: f64,
    pub log_density: Vec<LogDensityEntry>,
    /// `E|log R₁| ≈ a + b|h|`: `(a, b, rms)`.
    pub log_fit: (f64, f64, f64),
    /// `max E|log R₁| / (Σ|h|² + √Σ|h|)` over the shifts.
    pub log_ratio: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn gradient_check(
    system: &HamiltonianSystem,
    params: &GParams,
    f: &TestFunction,
    z: (f64, f64),
    horizon: f64,
    p: f64,
    opts: &GradientOptions,
) -> Result<GradientReport> {
    if !(p > 1.0) {
        return Err(Error::InvalidParams(format!("p must exceed 1, got {p}")));
    }
    if opts.h_norms.is_empty() || opts.h_norms.iter().any(|&h| !(h > 0.0)) {
        return Err(Error::InvalidParams("shift sizes must be positive".into()));
    }
    let fun = f.compile()?;
    let grid = TimeGrid::with_max_step(horizon, opts.max_dt)?;
    let dictionary = build_dictionary(&opts.dictionary, params, &grid)?;
    let sigma = sigma_t(horizon, params)?;
    let sup_norm = f.sup_norm()?;
    let seed = substream(opts.seed, 3);

    let base = semigroup_sup(system, &dictionary, &*fun, z, &grid, opts.n_paths, seed)?;
    let abs_p = |x: f64, y: f64| fun(x, y).abs().powf(p);
    let pw = semigroup_sup(system, &dictionary, &abs_p, z, &grid, opts.n_paths, seed)?;
    let power_norm = Estimate {
        value: pw.value.powf(1.0 / p),
        se: pw.value.powf(1.0 / p - 1.0) / p * pw.se,
    };

    let mut slopes = Vec::new();
    for &hn in &opts.h_norms {
        for d in DIRECTIONS {
            let zh = (z.0 + hn * d.0, z.1 + hn * d.1);
            let shifted = semigroup_sup(system, &dictionary, &*fun, zh, &grid, opts.n_paths, seed)?;
            slopes.push(SlopeEntry { h_norm: hn, direction: d, slope: (shifted.value - base.value).abs() / hn });
        }
    }
    let h_min = opts.h_norms.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_slope = slopes.iter().filter(|s| s.h_norm == h_min).fold(0.0_f64, |m, s| m.max(s.slope));

    let q = p / (p - 1.0);
    let dseed = substream(opts.seed, 4);
    let mut log_density = Vec::new();
    for &hn in &opts.h_norms {
        let dm = density_moments(
            system,
            params,
            &dictionary,
            z,
            (hn, 0.0),
            &grid,
            &[q],
            opts.n_paths,
            dseed,
            opts.quad_points,
        )?;
        log_density.push(LogDensityEntry {
            h_norm: hn,
            abs_log: dm.abs_log,
            abs_dev: dm.abs_dev[0],
            sigma_form: sigma * hn * hn + sigma.sqrt() * hn,
        });
    }
    let xs: Vec<f64> = log_density.iter().map(|e| e.h_norm).collect();
    let ys: Vec<f64> = log_density.iter().map(|e| e.abs_log.value).collect();
    let log_fit = linear_fit(&xs, &ys);
    let log_ratio = log_density.iter().fold(0.0_f64, |m, e| m.max(e.abs_log.value / e.sigma_form));

    let root = sigma.sqrt();
    Ok(GradientReport {
        z,
        horizon,
        p,
        sigma,
        sup_norm,
        power_norm,
        value: Estimate { value: base.value, se: base.se },
        slopes,
        max_slope,
        fitted_c_sup: if sup_norm > 0.0 { max_slope / (sup_norm * root) } else { 0.0 },
        fitted_c_p: if power_norm.value > 0.0 { max_slope / (power_norm.value * root) } else { 0.0 },
        log_density,
        log_fit,
        log_ratio,
    })
}

/// Gradient checks across horizons, testing the `√Σ(T)` scaling.
#[derive(Debug, Clone, Serialize)]
pub struct GradientShapeReport {
    pub reports: Vec<GradientReport>,
    /// `fitted_c_sup` per horizon.
    pub constants: Vec<f64>,
    pub mean_constant: f64,
    /// `max |C_T / mean − 1|`.
    pub max_deviation: f64,
    /// All constants within ±20% of their mean.
    pub stable: bool,
    /// Slope of `log max_slope` against `log Σ(T)`.
    pub log_slope: f64,
    pub log_slope_rms: f64,
    /// `log_slope` lies in `[0.4, 0.6]`.
    pub slope_ok: bool,
    pub pass: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn gradient_shape(
    system: &HamiltonianSystem,
    params: &GParams,
    f: &TestFunction,
    z: (f64, f64),
    horizons: &[f64],
    p: f64,
    opts: &GradientOptions,
) -> Result<GradientShapeReport> {
    if horizons.len() < 2 {
        return Err(Error::InvalidParams("shape check needs at least two horizons".into()));
    }
    let reports = horizons
        .iter()
        .map(|&t| gradient_check(system, params, f, z, t, p, opts))
        .collect::<Result<Vec<_>>>()?;
    let constants: Vec<f64> = reports.iter().map(|r| r.fitted_c_sup).collect();
    let mean_constant = constants.iter().sum::<f64>() / constants.len() as f64;
    let max_deviation = constants.iter().fold(0.0_f64, |m, c| m.max((c / mean_constant - 1.0).abs()));
    let stable = mean_constant > 0.0 && max_deviation <= 0.2;
    let xs: Vec<f64> = reports.iter().map(|r| r.sigma.ln()).collect();
    let ys: Vec<f64> = reports.iter().map(|r| r.max_slope.ln()).collect();
    let (_, log_slope, log_slope_rms) = linear_fit(&xs, &ys);
    let slope_ok = (0.4..=0.6).contains(&log_slope);
    Ok(GradientShapeReport {
        reports,
        constants,
        mean_constant,
        max_deviation,
        stable,
        log_slope,
        log_slope_rms,
        slope_ok,
        pass: stable && slope_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gsde::Rect;

    #[test]
    fn constant_function_has_flat_semigroup() {
        let params = GParams::new(1.0, 2.0).unwrap();
        let sys = HamiltonianSystem::damped_oscillator(Rect::square(6.0));
        let mut opts = GradientOptions::new(&params);
        opts.n_paths = 500;
        opts.max_dt = 0.05;
        let r = gradient_check(&sys, &params, &TestFunction::Constant { value: 2.0 }, (0.0, 0.0), 1.0, 2.0, &opts)
            .unwrap();
        assert!(r.slopes.iter().all(|s| s.slope == 0.0));
        assert_eq!(r.fitted_c_sup, 0.0);
        // Smaller shifts give smaller density deviations.
        let logs: Vec<f64> = r.log_density.iter().map(|e| e.abs_log.value).collect();
        assert!(logs.windows(2).all(|w| w[1] < w[0]), "{logs:?}");
    }
}
