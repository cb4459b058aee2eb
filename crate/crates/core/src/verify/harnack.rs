use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{argmax, build_dictionary, TestFunction};
use crate::coupling::{build_schedule, coupled_simulate, girsanov_exponent, sigma_t, DEFAULT_QUAD_POINTS};
use crate::error::{Error, Result};
use crate::gcore::{ControlPolicy, GParams, PolicySpec, TimeGrid};
use crate::gsde::{simulate_path, terminal_state, HamiltonianSystem};
use crate::hjb::{hjb_value_at, solve_hjb, HjbSettings, HjbSolution};
use crate::rng::substream;
use crate::stats::{Estimate, MeanSe};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Maximum over the control dictionary of Monte Carlo means.
    McDictionary,
    /// Grid solution of the HJB equation.
    Hjb,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnackOptions {
    pub dictionary: Vec<PolicySpec>,
    /// Largest Euler step; the grid uses `ceil(T / max_dt)` steps.
    pub max_dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default = "default_quad")]
    pub quad_points: usize,
    pub hjb: HjbSettings,
}

fn default_quad() -> usize {
    DEFAULT_QUAD_POINTS
}

impl HarnackOptions {
    pub fn new(params: &GParams) -> Self {
        Self {
            dictionary: PolicySpec::default_dictionary(params),
            max_dt: 0.01,
            n_paths: 20_000,
            seed: 0,
            quad_points: DEFAULT_QUAD_POINTS,
            hjb: HjbSettings::new(6.0, 161, 161),
        }
    }

    fn grid(&self, horizon: f64) -> Result<TimeGrid> {
        TimeGrid::with_max_step(horizon, self.max_dt)
    }
}

/// Moments of the coupling density `R₁(T)` over a control dictionary.
#[derive(Debug, Clone, Serialize)]
pub struct DensityMoments {
    pub controls: Vec<String>,
    /// Tilt exponents `q`.
    pub q: Vec<f64>,
    /// `max_θ E_θ R₁^q`, one entry per tilt.
    pub moment: Vec<Estimate>,
    /// `E_θ R₁` per control; equals 1 for a martingale density.
    pub unit_mean: Vec<Estimate>,
    /// `max_θ E_θ |log R₁|`.
    pub abs_log: Estimate,
    /// `max_θ E_θ |R₁ − 1|^q`, one entry per tilt.
    pub abs_dev: Vec<Estimate>,
    /// Largest pathwise quadratic term `∫ (Φ₁² d⟨B′⟩ + Φ₂² d⟨B⟩ + 2Φ₁Φ₂ dt)`.
    pub max_quad: f64,
    /// `max_quad / (Σ(T) |h|²)`, the empirical constant of the quadratic bound.
    pub phi_ratio: f64,
}

fn sup_of(per_control: &[MeanSe]) -> Estimate {
    let i = argmax(per_control.iter().map(|m| m.mean));
    per_control[i].into()
}

/// Simulate coupled pairs from `z` and `z + h` under every control and
/// collect `R₁^q`, `|log R₁|` and `|R₁ − 1|^q`.
#[allow(clippy::too_many_arguments)]
pub fn density_moments(
    system: &HamiltonianSystem,
    params: &GParams,
    dictionary: &[ControlPolicy],
    z: (f64, f64),
    h: (f64, f64),
    grid: &TimeGrid,
    qs: &[f64],
    n_paths: usize,
    seed: u64,
    quad_points: usize,
) -> Result<DensityMoments> {
    if n_paths < 2 {
        return Err(Error::InvalidParams("n_paths must be at least 2".into()));
    }
    let schedule = build_schedule(system.a, system.m, grid.horizon(), h, grid, quad_points)?;
    let mut moments = vec![Vec::with_capacity(dictionary.len()); qs.len()];
    let mut devs = vec![Vec::with_capacity(dictionary.len()); qs.len()];
    let mut abs_logs = Vec::with_capacity(dictionary.len());
    let mut unit_mean = Vec::with_capacity(dictionary.len());
    let mut max_quad = 0.0_f64;
    for policy in dictionary {
        let samples = (0..n_paths as u64)
            .into_par_iter()
            .map(|i| {
                let (driving, _) = simulate_path(system, policy, z, grid, seed, i)?;
                let paths = coupled_simulate(system, &driving, z, &schedule, grid)?;
                let r = girsanov_exponent(&paths.phi1, &paths.phi2, &driving, 1.0)?;
                Ok((r.log_terminal(), *r.quad.last().unwrap()))
            })
            .collect::<Result<Vec<(f64, f64)>>>()?;
        max_quad = samples.iter().fold(max_quad, |m, s| m.max(s.1));
        let r: Vec<f64> = samples.iter().map(|s| s.0.exp()).collect();
        unit_mean.push(MeanSe::from_samples(&r).into());
        abs_logs.push(MeanSe::from_samples(&samples.iter().map(|s| s.0.abs()).collect::<Vec<_>>()));
        for (j, &q) in qs.iter().enumerate() {
            let rq: Vec<f64> = samples.iter().map(|s| (q * s.0).exp()).collect();
            moments[j].push(MeanSe::from_samples(&rq));
            let dq: Vec<f64> = r.iter().map(|v| (v - 1.0).abs().powf(q)).collect();
            devs[j].push(MeanSe::from_samples(&dq));
        }
    }
    let h2 = h.0 * h.0 + h.1 * h.1;
    let phi_ratio = if h2 > 0.0 { max_quad / (sigma_t(grid.horizon(), params)? * h2) } else { 0.0 };
    Ok(DensityMoments {
        controls: dictionary.iter().map(|p| p.label()).collect(),
        q: qs.to_vec(),
        moment: moments.iter().map(|m| sup_of(m)).collect(),
        unit_mean,
        abs_log: sup_of(&abs_logs),
        abs_dev: devs.iter().map(|m| sup_of(m)).collect(),
        max_quad,
        phi_ratio,
    })
}

/// One point of the Harnack check.
#[derive(Debug, Clone, Serialize)]
pub struct HarnackReport {
    pub z: (f64, f64),
    pub h: (f64, f64),
    pub h_norm: f64,
    pub p: f64,
    pub horizon: f64,
    pub estimator: Estimator,
    /// `P̄_T f(z + h)`.
    pub shifted_value: Estimate,
    /// `P̄_T f^p(z)`.
    pub power_value: Estimate,
    /// `max_θ E R₁^{p/(p−1)}`.
    pub density_moment: Estimate,
    /// `(P̄_T f(z + h))^p`.
    pub lhs: Estimate,
    /// `P̄_T f^p(z) · (E R₁^{p/(p−1)})^{p−1}`.
    pub rhs_exact: Estimate,
    pub sigma: f64,
    /// Smallest `C ≥ 0` with `lhs ≤ P̄_T f^p(z) exp(C p Σ(T)|h|² / (2(p−1)))`.
    pub fitted_c: f64,
    /// `C` implied by the density factor alone.
    pub density_c: f64,
    /// `P̄_T f^p(z) exp(C p Σ(T)|h|² / (2(p−1)))` at the grid-wide constant.
    pub rhs_sigma: Option<f64>,
    /// `rhs_exact + 3 SE − lhs`.
    pub slack: f64,
    pub pass: bool,
}

fn pow_estimate(e: Estimate, p: f64) -> Estimate {
    Estimate { value: e.value.powf(p), se: (p * e.value.powf(p - 1.0)).abs() * e.se }
}

fn product_estimate(a: Estimate, b: Estimate) -> Estimate {
    Estimate { value: a.value * b.value, se: (b.value * a.se).hypot(a.value * b.se) }
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    z: (f64, f64),
    h: (f64, f64),
    p: f64,
    horizon: f64,
    estimator: Estimator,
    sigma: f64,
    shifted_value: Estimate,
    power_value: Estimate,
    density_moment: Estimate,
) -> HarnackReport {
    let lhs = pow_estimate(shifted_value, p);
    let factor = pow_estimate(density_moment, p - 1.0);
    let rhs_exact = product_estimate(power_value, factor);
    let combined = lhs.se.hypot(rhs_exact.se);
    let slack = rhs_exact.value + 3.0 * combined - lhs.value;
    let h2 = h.0 * h.0 + h.1 * h.1;
    let scale = 2.0 * (p - 1.0) / (p * sigma * h2);
    let (fitted_c, density_c) = if h2 > 0.0 {
        (
            ((lhs.value / power_value.value).ln() * scale).max(0.0),
            (factor.value.ln() * scale).max(0.0),
        )
    } else {
        (0.0, 0.0)
    };
    HarnackReport {
        z,
        h,
        h_norm: h2.sqrt(),
        p,
        horizon,
        estimator,
        shifted_value,
        power_value,
        density_moment,
        lhs,
        rhs_exact,
        sigma,
        fitted_c,
        density_c,
        rhs_sigma: None,
        slack,
        pass: slack >= 0.0,
    }
}

fn terminal_set(
    system: &HamiltonianSystem,
    dictionary: &[ControlPolicy],
    z: (f64, f64),
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<Vec<(f64, f64)>>> {
    dictionary
        .iter()
        .map(|policy| {
            (0..n_paths as u64)
                .into_par_iter()
                .map(|i| terminal_state(system, policy, z, grid, seed, i))
                .collect()
        })
        .collect()
}

fn sup_mean(set: &[Vec<(f64, f64)>], g: impl Fn(f64, f64) -> f64) -> Estimate {
    let per: Vec<MeanSe> = set
        .iter()
        .map(|paths| MeanSe::from_samples(&paths.iter().map(|&(x, y)| g(x, y)).collect::<Vec<_>>()))
        .collect();
    sup_of(&per)
}

fn tilt(p: f64) -> Result<f64> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidParams(format!("p must exceed 1, got {p}")));
    }
    Ok(p / (p - 1.0))
}

/// Harnack check at a single `(z, h, p, T)`.
#[allow(clippy::too_many_arguments)]
pub fn harnack_check(
    system: &HamiltonianSystem,
    params: &GParams,
    f: &TestFunction,
    z: (f64, f64),
    h: (f64, f64),
    p: f64,
    horizon: f64,
    estimator: Estimator,
    opts: &HarnackOptions,
) -> Result<HarnackReport> {
    let grid = harnack_grid(system, params, f, &[z], &[h], &[p], &[horizon], &[estimator], opts)?;
    Ok(grid.points.into_iter().next().expect("one point"))
}

/// Harnack checks over a full `(z, h, p, T)` grid, sharing simulations.
#[derive(Debug, Clone, Serialize)]
pub struct HarnackGridReport {
    pub function: String,
    pub points: Vec<HarnackReport>,
    /// Smallest single `C` for which the exponential form holds on every point.
    pub fitted_c: f64,
    /// The exponential form holds everywhere at `fitted_c` (3 SE slack).
    pub sigma_form_holds: bool,
    /// Largest `C` implied by the density factor alone.
    pub density_c: f64,
    /// Largest empirical constant of the quadratic bound on `Φ`.
    pub phi_ratio: f64,
    /// `(E R₁^{p/(p−1)})^{p−1}` is non-increasing in `p` within 3 SE.
    pub p_monotone: bool,
    /// Density moments per `(T, z, h)` in loop order.
    pub moments: Vec<DensityMoments>,
    pub all_pass: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn harnack_grid(
    system: &HamiltonianSystem,
    params: &GParams,
    f: &TestFunction,
    zs: &[(f64, f64)],
    hs: &[(f64, f64)],
    ps: &[f64],
    horizons: &[f64],
    estimators: &[Estimator],
    opts: &HarnackOptions,
) -> Result<HarnackGridReport> {
    f.check_nonnegative()?;
    let fun = f.compile()?;
    let qs = ps.iter().map(|&p| tilt(p)).collect::<Result<Vec<_>>>()?;
    let mc_seed = substream(opts.seed, 1);
    let density_seed = substream(opts.seed, 2);
    let mut points = Vec::new();
    let mut moments_table = Vec::new();
    let mut p_monotone = true;
    let mut phi_ratio = 0.0_f64;

    for &horizon in horizons {
        let grid = opts.grid(horizon)?;
        let dictionary = build_dictionary(&opts.dictionary, params, &grid)?;
        let sigma = sigma_t(horizon, params)?;

        let mut hjb: BTreeMap<usize, HjbSolution> = BTreeMap::new();
        if estimators.contains(&Estimator::Hjb) {
            hjb.insert(usize::MAX, solve_hjb(system, params, &*fun, horizon, &opts.hjb)?);
            for (j, &p) in ps.iter().enumerate() {
                let fp = |x: f64, y: f64| fun(x, y).powf(p);
                hjb.insert(j, solve_hjb(system, params, &fp, horizon, &opts.hjb)?);
            }
        }
        let mc = estimators.contains(&Estimator::McDictionary);

        for &z in zs {
            let base_set = if mc {
                Some(terminal_set(system, &dictionary, z, &grid, opts.n_paths, mc_seed)?)
            } else {
                None
            };
            for &h in hs {
                let zh = (z.0 + h.0, z.1 + h.1);
                let shift_set = if mc {
                    Some(terminal_set(system, &dictionary, zh, &grid, opts.n_paths, mc_seed)?)
                } else {
                    None
                };
                let dm = density_moments(
                    system,
                    params,
                    &dictionary,
                    z,
                    h,
                    &grid,
                    &qs,
                    opts.n_paths,
                    density_seed,
                    opts.quad_points,
                )?;
                phi_ratio = phi_ratio.max(dm.phi_ratio);

                // (E R^q)^{p-1} must not increase with p.
                let mut order: Vec<usize> = (0..ps.len()).collect();
                order.sort_by(|&a, &b| ps[a].total_cmp(&ps[b]));
                for w in order.windows(2) {
                    let a = pow_estimate(dm.moment[w[0]], ps[w[0]] - 1.0);
                    let b = pow_estimate(dm.moment[w[1]], ps[w[1]] - 1.0);
                    if b.value > a.value + 3.0 * a.se.hypot(b.se) {
                        p_monotone = false;
                    }
                }

                for (j, &p) in ps.iter().enumerate() {
                    for &estimator in estimators {
                        let (shifted, power) = match estimator {
                            Estimator::McDictionary => {
                                let (bs, ss) = (base_set.as_ref().unwrap(), shift_set.as_ref().unwrap());
                                (sup_mean(ss, &fun), sup_mean(bs, |x, y| fun(x, y).powf(p)))
                            }
                            Estimator::Hjb => (
                                Estimate::exact(hjb_value_at(&hjb[&usize::MAX], zh)?),
                                Estimate::exact(hjb_value_at(&hjb[&j], z)?),
                            ),
                        };
                        points.push(assemble(z, h, p, horizon, estimator, sigma, shifted, power, dm.moment[j]));
                    }
                }
                moments_table.push(dm);
            }
        }
    }

    let fitted_c = points.iter().fold(0.0_f64, |m, r| m.max(r.fitted_c));
    let density_c = points.iter().fold(0.0_f64, |m, r| m.max(r.density_c));
    let mut sigma_form_holds = fitted_c.is_finite();
    for r in &mut points {
        let h2 = r.h_norm * r.h_norm;
        let rhs = r.power_value.value * (fitted_c * r.p * r.sigma * h2 / (2.0 * (r.p - 1.0))).exp();
        r.rhs_sigma = Some(rhs);
        let se = r.lhs.se.hypot(r.power_value.se * rhs / r.power_value.value.max(f64::MIN_POSITIVE));
        if r.lhs.value > rhs + 3.0 * se {
            sigma_form_holds = false;
        }
    }
    let all_pass = points.iter().all(|r| r.pass);
    Ok(HarnackGridReport {
        function: f.label(),
        points,
        fitted_c,
        sigma_form_holds,
        density_c,
        phi_ratio,
        p_monotone,
        moments: moments_table,
        all_pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gsde::Rect;

    fn setup() -> (HamiltonianSystem, GParams, HarnackOptions) {
        let params = GParams::new(1.0, 2.0).unwrap();
        let mut opts = HarnackOptions::new(&params);
        opts.n_paths = 2000;
        opts.max_dt = 0.02;
        opts.hjb = HjbSettings::new(5.0, 61, 61);
        (HamiltonianSystem::damped_oscillator(Rect::square(6.0)), params, opts)
    }

    #[test]
    fn zero_shift_reduces_to_jensen() {
        let (sys, params, opts) = setup();
        let f = TestFunction::InverseQuadratic;
        for est in [Estimator::McDictionary, Estimator::Hjb] {
            let r = harnack_check(&sys, &params, &f, (0.0, 0.0), (0.0, 0.0), 2.0, 1.0, est, &opts).unwrap();
            assert_eq!(r.density_moment.value, 1.0);
            assert_eq!(r.rhs_exact.value, r.power_value.value);
            assert!(r.lhs.value <= r.rhs_exact.value + 1e-12, "{r:?}");
        }
    }

    #[test]
    fn constant_function_has_unit_lhs() {
        let (sys, params, opts) = setup();
        let f = TestFunction::Constant { value: 1.0 };
        let r = harnack_check(&sys, &params, &f, (0.0, 0.0), (0.3, 0.0), 2.0, 1.0, Estimator::McDictionary, &opts)
            .unwrap();
        assert_eq!(r.lhs.value, 1.0);
        assert!(r.rhs_exact.value >= 1.0);
        assert!(r.pass);
    }

    #[test]
    fn negative_function_is_rejected() {
        let (sys, params, opts) = setup();
        let r = harnack_check(&sys, &params, &TestFunction::TanhY, (0.0, 0.0), (0.1, 0.0), 2.0, 1.0,
            Estimator::McDictionary, &opts);
        assert!(matches!(r, Err(Error::InvalidF { .. })));
    }

    #[test]
    fn linear_drift_moments_match_closed_form() {
        // With linear drift, Φ is deterministic and E R^q = exp(½(q² − q) Q₁).
        let (sys, params, _) = setup();
        let grid = TimeGrid::new(1.0, 100).unwrap();
        let dict = build_dictionary(&[PolicySpec::Constant(1.0)], &params, &grid).unwrap();
        let dm = density_moments(&sys, &params, &dict, (1.0, -1.0), (0.3, 0.0), &grid, &[2.0], 4000, 1, 64).unwrap();
        let exact = (0.5 * (4.0 - 2.0) * dm.max_quad).exp();
        assert!((dm.moment[0].value - exact).abs() < 3.0 * dm.moment[0].se, "{:?} vs {exact}", dm.moment[0]);
        assert!((dm.unit_mean[0].value - 1.0).abs() < 3.0 * dm.unit_mean[0].se);
    }
}
