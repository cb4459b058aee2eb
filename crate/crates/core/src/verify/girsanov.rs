use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{
    build_schedule, coupled_simulate, girsanov_exponent, phi_quadratic_form, tilt_compensator, DEFAULT_QUAD_POINTS,
};
use crate::error::{Error, Result};
use crate::gcore::{make_policy, sample_driving_indexed, ControlPolicy, GParams, PolicySpec, TimeGrid};
use crate::gsde::{HamiltonianSystem, Rect};
use crate::stats::{Estimate, MeanSe};

/// Which shift the density is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    /// `g¹ ≡ c`, `g² ≡ 0`.
    G1Only,
    /// `g¹ ≡ 0`, `g² ≡ c`.
    G2Only,
    /// `(Φ₁, Φ₂)` along coupled paths of the system.
    Coupled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GirsanovOptions {
    /// Constant controls; every channel is tested under each.
    pub controls: Vec<f64>,
    pub c: f64,
    pub z: (f64, f64),
    pub h: (f64, f64),
    pub n_paths: usize,
    pub seed: u64,
    /// Steps of the deterministic zero-drift check.
    pub deterministic_steps: usize,
    /// Tilt `p` for the pathwise compensator identity.
    pub tilt_p: f64,
    pub quad_points: usize,
}

impl GirsanovOptions {
    pub fn new(params: &GParams) -> Self {
        Self {
            controls: vec![params.lower(), params.upper()],
            c: 0.5,
            z: (0.0, 0.0),
            h: (0.3, 0.0),
            n_paths: 100_000,
            seed: 0,
            deterministic_steps: 1 << 16,
            tilt_p: 2.0,
            quad_points: DEFAULT_QUAD_POINTS,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct UnitMeanEntry {
    pub channel: Channel,
    pub control: f64,
    pub mean: Estimate,
    /// `|mean − 1| / se`.
    pub z_score: f64,
    pub within_3se: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct GirsanovReport {
    pub entries: Vec<UnitMeanEntry>,
    pub unit_means_ok: bool,
    /// `Σ Φ₁² Δ⟨B′⟩` for zero drifts, `A = 0, M = Q = 1, T = 1, h = (1, 0)`, `θ ≡ σ_lower`.
    pub deterministic_value: f64,
    /// Its exact value `12 / σ_lower²`.
    pub deterministic_exact: f64,
    pub deterministic_error: f64,
    pub deterministic_ok: bool,
    /// Largest `|q log R₁ − log R̃₁ − ½(q² − q)Q₁|` over the simulated coupled paths.
    pub tilt_defect: f64,
    pub tilt_ok: bool,
    pub pass: bool,
}

const DETERMINISTIC_TOL: f64 = 1e-8;
const TILT_TOL: f64 = 1e-10;

/// Unit-mean checks of the discrete Girsanov density and the pathwise
/// identities of the coupling density.
pub fn girsanov_check(
    system: &HamiltonianSystem,
    params: &GParams,
    grid: &TimeGrid,
    opts: &GirsanovOptions,
) -> Result<GirsanovReport> {
    if opts.controls.is_empty() || opts.n_paths < 2 {
        return Err(Error::InvalidParams("need at least one control and two paths".into()));
    }
    if !(opts.tilt_p > 1.0) {
        return Err(Error::InvalidParams(format!("tilt p must exceed 1, got {}", opts.tilt_p)));
    }
    let n = grid.n_steps();
    let schedule = build_schedule(system.a, system.m, grid.horizon(), opts.h, grid, opts.quad_points)?;
    let q = opts.tilt_p / (opts.tilt_p - 1.0);
    let mut entries = Vec::new();
    let mut tilt_defect = 0.0_f64;

    for &theta in &opts.controls {
        let policy: ControlPolicy = make_policy(&PolicySpec::Constant(theta), params, grid)?;
        for channel in [Channel::G1Only, Channel::G2Only, Channel::Coupled] {
            let per_path = (0..opts.n_paths as u64)
                .into_par_iter()
                .map(|i| {
                    let d = sample_driving_indexed(&policy, grid, opts.seed, i, None)?;
                    match channel {
                        Channel::G1Only | Channel::G2Only => {
                            let (g1, g2) = if channel == Channel::G1Only { (opts.c, 0.0) } else { (0.0, opts.c) };
                            let r = girsanov_exponent(&vec![g1; n], &vec![g2; n], &d, 1.0)?;
                            Ok((r.terminal(), 0.0))
                        }
                        Channel::Coupled => {
                            let cp = coupled_simulate(system, &d, opts.z, &schedule, grid)?;
                            let r1 = girsanov_exponent(&cp.phi1, &cp.phi2, &d, 1.0)?;
                            let rt = girsanov_exponent(&cp.phi1, &cp.phi2, &d, q)?;
                            let lhs = q * r1.log_terminal();
                            let rhs = rt.log_terminal() + tilt_compensator(q, *r1.quad.last().unwrap());
                            Ok((r1.terminal(), (lhs - rhs).abs() / lhs.abs().max(1.0)))
                        }
                    }
                })
                .collect::<Result<Vec<(f64, f64)>>>()?;
            let values: Vec<f64> = per_path.iter().map(|v| v.0).collect();
            tilt_defect = per_path.iter().fold(tilt_defect, |m, v| m.max(v.1));
            let est = MeanSe::from_samples(&values);
            let z_score = if est.se > 0.0 { (est.mean - 1.0).abs() / est.se } else { 0.0 };
            entries.push(UnitMeanEntry {
                channel,
                control: theta,
                mean: est.into(),
                z_score,
                within_3se: est.within(1.0, 3.0) || est.mean == 1.0,
            });
        }
    }

    let deterministic_value = zero_drift_quadratic_form(params, opts.deterministic_steps, opts.quad_points)?;
    let deterministic_exact = 12.0 / (params.lower() * params.lower());
    let deterministic_error = (deterministic_value - deterministic_exact).abs();

    let unit_means_ok = entries.iter().all(|e| e.within_3se);
    let deterministic_ok = deterministic_error <= DETERMINISTIC_TOL;
    let tilt_ok = tilt_defect <= TILT_TOL;
    Ok(GirsanovReport {
        entries,
        unit_means_ok,
        deterministic_value,
        deterministic_exact,
        deterministic_error,
        deterministic_ok,
        tilt_defect,
        tilt_ok,
        pass: unit_means_ok && deterministic_ok && tilt_ok,
    })
}

/// The quadratic form of `Φ` for the zero-drift free particle, where `Φ₁ = γ₁′`
/// and the value does not depend on the noise.
pub fn zero_drift_quadratic_form(params: &GParams, n_steps: usize, quad_points: usize) -> Result<f64> {
    let system = HamiltonianSystem::free_particle(Rect::square(5.0));
    let grid = TimeGrid::new(1.0, n_steps)?;
    let schedule = build_schedule(0.0, 1.0, 1.0, (1.0, 0.0), &grid, quad_points)?;
    let policy = make_policy(&PolicySpec::Constant(params.lower()), params, &grid)?;
    let d = sample_driving_indexed(&policy, &grid, 0, 0, None)?;
    let cp = coupled_simulate(&system, &d, (0.0, 0.0), &schedule, &grid)?;
    Ok(phi_quadratic_form(&cp, params)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_run_has_unit_means_and_exact_identities() {
        let params = GParams::new(1.0, 2.0).unwrap();
        let sys = HamiltonianSystem::damped_oscillator(Rect::square(6.0));
        let grid = TimeGrid::new(1.0, 50).unwrap();
        let opts = GirsanovOptions { n_paths: 4000, deterministic_steps: 1 << 12, ..GirsanovOptions::new(&params) };
        let r = girsanov_check(&sys, &params, &grid, &opts).unwrap();
        assert_eq!(r.entries.len(), 6);
        assert!(r.unit_means_ok && r.tilt_ok, "{r:?}");
        assert!(r.deterministic_error < 30.0 / (1u64 << 24) as f64);
    }
}
