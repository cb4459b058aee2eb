use std::fmt::Write as _;

use clap::ValueEnum;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use super::config::ExperimentConfig;
use super::report::{Fitted, FittedMap};
use crate::error::Result;
use crate::gcore::{make_policy, sample_driving_indexed, PolicySpec};
use crate::gsde::{euler_simulate, semigroup_sup};
use crate::hjb::{hjb_value_at, solve_hjb};
use crate::stats::{Estimate, MeanSe};
use crate::verify::{
    build_dictionary, coupling_check, girsanov_check, gradient_shape, harnack_grid, invariant_check,
    phi_integrability_check, weak_solution_check, CouplingCheckOptions, GirsanovOptions, GradientOptions,
    HarnackOptions, IntegrabilityOptions, InvariantOptions, WeakSolutionOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Simulate,
    Semigroup,
    Hjb,
    CouplingCheck,
    GirsanovCheck,
    Harnack,
    Gradient,
    Invariant,
    WeakSolution,
    PhiIntegrability,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Semigroup => "semigroup",
            Command::Hjb => "hjb",
            Command::CouplingCheck => "coupling-check",
            Command::GirsanovCheck => "girsanov-check",
            Command::Harnack => "harnack",
            Command::Gradient => "gradient",
            Command::Invariant => "invariant",
            Command::WeakSolution => "weak-solution",
            Command::PhiIntegrability => "phi-integrability",
        }
    }
}

/// What a command produced, before tagging.
pub struct Outcome {
    pub results: Value,
    pub fitted: FittedMap,
    pub pass: bool,
    /// `(file name, contents)` of CSV dumps.
    pub csv: Vec<(&'static str, String)>,
    /// Human summary for the terminal.
    pub summary: String,
}

impl Outcome {
    fn new(results: impl Serialize, pass: bool, summary: String) -> Self {
        Self {
            results: serde_json::to_value(results).expect("reports serialize"),
            fitted: FittedMap::new(),
            pass,
            csv: Vec::new(),
            summary,
        }
    }

    fn fit(mut self, name: &str, value: Fitted) -> Self {
        self.fitted.insert(name.into(), value);
        self
    }
}

pub fn execute(command: Command, cfg: &ExperimentConfig, want_csv: bool) -> Result<Outcome> {
    match command {
        Command::Simulate => simulate(cfg, want_csv),
        Command::Semigroup => semigroup(cfg),
        Command::Hjb => hjb(cfg, want_csv),
        Command::CouplingCheck => coupling(cfg),
        Command::GirsanovCheck => girsanov(cfg),
        Command::Harnack => harnack(cfg),
        Command::Gradient => gradient(cfg),
        Command::Invariant => invariant(cfg),
        Command::WeakSolution => weak(cfg),
        Command::PhiIntegrability => phi(cfg),
    }
}

#[derive(Serialize)]
struct SimulateResults {
    policy: String,
    n_paths: usize,
    horizon: f64,
    n_steps: usize,
    mean_x: Estimate,
    mean_y: Estimate,
    second_moment_x: Estimate,
    second_moment_y: Estimate,
    /// `⟨B⟩_T` per path, whose range must lie in `[σ_lower² T, σ_upper² T]`.
    qv_terminal_min: f64,
    qv_terminal_max: f64,
    band_violations: usize,
}

fn simulate(cfg: &ExperimentConfig, want_csv: bool) -> Result<Outcome> {
    let system = cfg.build_system()?;
    let grid = cfg.time_grid()?;
    let spec = cfg.simulate.policy.clone().unwrap_or(PolicySpec::Constant(cfg.params.lower()));
    let policy = make_policy(&spec, &cfg.params, &grid)?;
    let z0 = cfg.simulate.z0;
    let seed = cfg.run.seed;
    let per_path = (0..cfg.run.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let d = sample_driving_indexed(&policy, &grid, seed, i, None)?;
            let path = euler_simulate(&system, &d, z0, &grid)?;
            let (x, y) = path.terminal();
            Ok((x, y, *d.qv.last().unwrap_or(&0.0), d.qv_band_violation(&cfg.params).is_some()))
        })
        .collect::<Result<Vec<_>>>()?;
    let col = |f: fn(&(f64, f64, f64, bool)) -> f64| -> Estimate {
        MeanSe::from_samples(&per_path.iter().map(f).collect::<Vec<_>>()).into()
    };
    let band_violations = per_path.iter().filter(|p| p.3).count();
    let res = SimulateResults {
        policy: spec.label(),
        n_paths: cfg.run.n_paths,
        horizon: grid.horizon(),
        n_steps: grid.n_steps(),
        mean_x: col(|p| p.0),
        mean_y: col(|p| p.1),
        second_moment_x: col(|p| p.0 * p.0),
        second_moment_y: col(|p| p.1 * p.1),
        qv_terminal_min: per_path.iter().fold(f64::INFINITY, |m, p| m.min(p.2)),
        qv_terminal_max: per_path.iter().fold(f64::NEG_INFINITY, |m, p| m.max(p.2)),
        band_violations,
    };
    let summary = format!(
        "{} paths under {}: E X_T = {:.4} ± {:.4}, E Y_T = {:.4} ± {:.4}, band violations {}",
        res.n_paths, res.policy, res.mean_x.value, res.mean_x.se, res.mean_y.value, res.mean_y.se, band_violations
    );
    let mut out = Outcome::new(&res, band_violations == 0, summary);
    if want_csv {
        let mut csv = String::from("path,step,t,x,y,theta,b,qv,bprime,qvprime\n");
        for i in 0..cfg.simulate.dump_paths.min(cfg.run.n_paths) as u64 {
            let d = sample_driving_indexed(&policy, &grid, seed, i, None)?;
            let path = euler_simulate(&system, &d, z0, &grid)?;
            for k in 0..=grid.n_steps() {
                let theta = d.theta.get(k).or(d.theta.last()).copied().unwrap_or(f64::NAN);
                writeln!(
                    csv,
                    "{i},{k},{},{},{},{theta},{},{},{},{}",
                    grid.time(k),
                    path.x[k],
                    path.y[k],
                    d.b[k],
                    d.qv[k],
                    d.bprime[k],
                    d.qvprime[k]
                )
                .expect("write to string");
            }
        }
        out.csv.push(("paths.csv", csv));
    }
    Ok(out)
}

fn semigroup(cfg: &ExperimentConfig) -> Result<Outcome> {
    let system = cfg.build_system()?;
    let grid = cfg.time_grid()?;
    let dictionary = build_dictionary(&cfg.dictionary(), &cfg.params, &grid)?;
    let f = cfg.semigroup.f.compile()?;
    let est = semigroup_sup(&system, &dictionary, &*f, cfg.semigroup.z, &grid, cfg.run.n_paths, cfg.run.seed)?;
    let pass = est.value.is_finite();
    let mut summary = format!("P̄_T f(z) = {:.6} ± {:.6} (argmax {})", est.value, est.se, est.per_control[est.argmax].control);
    for c in &est.per_control {
        let _ = write!(summary, "\n  {:<28} {:.6} ± {:.6}", c.control, c.mean, c.se);
    }
    Ok(Outcome::new(json!({ "function": cfg.semigroup.f.label(), "z": cfg.semigroup.z, "estimate": est }), pass, summary))
}

fn hjb(cfg: &ExperimentConfig, want_csv: bool) -> Result<Outcome> {
    let system = cfg.build_system()?;
    let f = cfg.hjb.f.compile()?;
    let sol = solve_hjb(&system, &cfg.params, &*f, cfg.grid.horizon, &cfg.estimator.hjb)?;
    let values = cfg
        .hjb
        .points
        .iter()
        .map(|&z| Ok(json!({ "z": z, "value": hjb_value_at(&sol, z)? })))
        .collect::<Result<Vec<_>>>()?;
    let finite = sol.initial_values().iter().all(|v| v.is_finite());
    let upper_share = sol.upper[0].iter().filter(|&&u| u).count() as f64 / sol.upper[0].len() as f64;
    let summary = format!(
        "HJB on {}x{} nodes, {} steps (dt {:.3e}, monotone limit {:.3e}); σ_upper share at t = 0: {:.3}",
        sol.nx,
        sol.ny,
        sol.grid.n_steps(),
        sol.cfl.dt,
        sol.cfl.monotone_limit,
        upper_share
    );
    let mut out = Outcome::new(
        json!({
            "function": cfg.hjb.f.label(),
            "points": values,
            "cfl": sol.cfl,
            "n_steps": sol.grid.n_steps(),
            "upper_share_t0": upper_share,
        }),
        finite,
        summary,
    );
    if want_csv {
        let mut csv = String::from("x,y,u0,control0\n");
        for i in 0..sol.nx {
            for l in 0..sol.ny {
                let j = i * sol.ny + l;
                let control = if sol.upper[0][j] { sol.sigma_upper } else { sol.sigma_lower };
                writeln!(csv, "{},{},{},{control}", sol.x(i), sol.y(l), sol.values[0][j]).expect("write to string");
            }
        }
        out.csv.push(("grid.csv", csv));
    }
    Ok(out)
}

fn coupling(cfg: &ExperimentConfig) -> Result<Outcome> {
    let system = cfg.build_system()?;
    let c = &cfg.coupling;
    let opts = CouplingCheckOptions {
        z: c.z,
        h: c.h,
        horizon: cfg.grid.horizon,
        dt_exponents: c.dt_exponents.clone(),
        identity_paths: c.identity_paths,
        seed: cfg.run.seed,
        quad_points: c.quad_points,
    };
    let r = coupling_check(&system, &cfg.params, &opts)?;
    let summary = format!(
        "Θ₁(½) = ({:.12}, {:.12}); max |Θ₁(T)|/|h| = {:.2e}; identity defect {:.2e}; endpoint order {:.3}",
        r.spot_value.0, r.spot_value.1, r.max_end_ratio, r.max_identity_defect, r.observed_order
    );
    Ok(Outcome::new(&r, r.pass, summary)
        .fit("lambda_inverse_c", Fitted::new(r.lambda_inverse_c))
        .fit("gamma_prime_c", Fitted::new(r.gamma_prime_c))
        .fit("theta_c", Fitted::new(r.theta_c))
        .fit("endpoint_order", Fitted::new(r.observed_order)))
}

fn girsanov(cfg: &ExperimentConfig) -> Result<Outcome> {
    let system = cfg.build_system()?;
    let grid = cfg.time_grid()?;
    let mut controls: Vec<f64> = cfg
        .dictionary()
        .iter()
        .filter_map(|s| if let PolicySpec::Constant(v) = s { Some(*v) } else { None })
        .collect();
    if controls.is_empty() {
        controls = vec![cfg.params.lower(), cfg.params.upper()];
    }
    let g = &cfg.girsanov;
    let opts = GirsanovOptions {
        controls,
        c: g.c,
        z: g.z,
        h: g.h,
        n_paths: cfg.run.n_paths,
        seed: cfg.run.seed,
        deterministic_steps: g.deterministic_steps,
        ..GirsanovOptions::new(&cfg.params)
    };
    let r = girsanov_check(&system, &cfg.params, &grid, &opts)?;
    let mut summary = String::new();
    for e in &r.entries {
        let _ = writeln!(summary, "  {:?} θ = {}: E R = {:.5} ± {:.5}", e.channel, e.control, e.mean.value, e.mean.se);
    }
    let _ = write!(
        summary,
        "zero-drift quadratic form {:.12} (exact {}); tilt identity defect {:.2e}",
        r.deterministic_value, r.deterministic_exact, r.tilt_defect
    );
    Ok(Outcome::new(&r, r.pass, summary))
}

fn harnack(cfg: &ExperimentConfig) -> Result<Outcome> {
    let system = cfg.build_system()?;
    let h = &cfg.harnack;
    let opts = HarnackOptions {
        dictionary: cfg.dictionary(),
        max_dt: h.max_dt,
        n_paths: cfg.run.n_paths,
        seed: cfg.run.seed,
        hjb: cfg.estimator.hjb,
        ..HarnackOptions::new(&cfg.params)
    };
    let r = harnack_grid(&system, &cfg.params, &h.f, &h.zs, &h.hs, &h.ps, &h.horizons, &h.estimators, &opts)?;
    let failing = r.points.iter().filter(|p| !p.pass).count();
    let summary = format!(
        "{} points, {} failing; fitted C = {:.4}, density C = {:.4}, Φ ratio = {:.4}, p-monotone {}",
        r.points.len(),
        failing,
        r.fitted_c,
        r.density_c,
        r.phi_ratio,
        r.p_monotone
    );
    let pass = r.all_pass && r.sigma_form_holds && r.p_monotone;
    Ok(Outcome::new(&r, pass, summary)
        .fit("harnack_c", Fitted::new(r.fitted_c))
        .fit("density_c", Fitted::new(r.density_c))
        .fit("phi_ratio", Fitted::new(r.phi_ratio)))
}

fn gradient(cfg: &ExperimentConfig) -> Result<Outcome> {
    let system = cfg.build_system()?;
    let g = &cfg.gradient;
    let opts = GradientOptions {
        dictionary: cfg.dictionary(),
        max_dt: g.max_dt,
        n_paths: cfg.run.n_paths,
        seed: cfg.run.seed,
        h_norms: g.h_norms.clone(),
        ..GradientOptions::new(&cfg.params)
    };
    let r = gradient_shape(&system, &cfg.params, &g.f, g.z, &g.horizons, g.p, &opts)?;
    let summary = format!(
        "constants {:?}; max deviation {:.1}%; log-slope {:.3}",
        r.constants,
        100.0 * r.max_deviation,
        r.log_slope
    );
    let mut out = Outcome::new(&r, r.pass, summary)
        .fit("gradient_c_mean", Fitted::new(r.mean_constant))
        .fit("gradient_log_slope", Fitted::with_residual(r.log_slope, r.log_slope_rms));
    for rep in &r.reports {
        out = out.fit(&format!("gradient_c_p_T{}", rep.horizon), Fitted::new(rep.fitted_c_p));
    }
    Ok(out)
}

fn invariant(cfg: &ExperimentConfig) -> Result<Outcome> {
    let i = &cfg.invariant;
    let opts = InvariantOptions {
        t_long: i.t_long,
        dt: i.dt,
        n_paths: cfg.run.n_paths,
        seed: cfg.run.seed,
        tolerance: i.tolerance,
    };
    let r = invariant_check(&cfg.params, &opts)?;
    let summary = format!(
        "oracle diag({:.4}, {:.4}); empirical ({:.4} ± {:.4}, {:.4} ± {:.4}); stated variance {} (factor {:.2})",
        r.oracle[0][0], r.oracle[1][1], r.m_xx.value, r.m_xx.se, r.m_yy.value, r.m_yy.se, r.stated_variance,
        r.discrepancy_factor
    );
    Ok(Outcome::new(&r, r.pass, summary))
}

fn weak(cfg: &ExperimentConfig) -> Result<Outcome> {
    let system = cfg.build_system()?;
    let w = &cfg.weak_solution;
    let opts = WeakSolutionOptions {
        z: w.z,
        margin: w.margin,
        dictionary: cfg.dictionary(),
        n_steps: w.n_steps,
        n_paths: cfg.run.n_paths,
        seed: cfg.run.seed,
    };
    let r = weak_solution_check(&system, w.epsilon, w.p, &cfg.params, &opts)?;
    let summary = format!(
        "exponential moment {} (tail slope {:.3}); t0 = {:.4}, δ = {:.4}; Novikov {}; weak solution {}",
        r.hypothesis.value.map_or("infinite".into(), |v| format!("{v:.6}")),
        r.hypothesis.tail_slope,
        r.t0,
        r.delta,
        r.novikov.as_ref().map_or(r.overflow.clone().unwrap_or_default(), |n| format!("{:.6} ± {:.6}", n.value, n.se)),
        r.weak_solution
    );
    Ok(Outcome::new(&r, r.weak_solution, summary))
}

fn phi(cfg: &ExperimentConfig) -> Result<Outcome> {
    let c = &cfg.phi_integrability;
    let opts = IntegrabilityOptions {
        s_min: c.s_min,
        t_max: c.t_max,
        quad_points: c.quad_points,
        n_mc: cfg.run.n_paths,
        seed: cfg.run.seed,
    };
    let r = phi_integrability_check(c.p, c.z, c.c_phi, &cfg.params, &opts)?;
    let summary = format!(
        "integral {:.6} (oracle {:.6}); inner exponent {:.3}; ball exponent {:.3} (stated {})",
        r.integral, r.integral_oracle, r.inner_exponent, r.ball_exponent, r.stated_ball_exponent
    );
    Ok(Outcome::new(&r, r.finite, summary)
        .fit("inner_exponent", Fitted::new(r.inner_exponent))
        .fit("ball_exponent", Fitted::new(r.ball_exponent)))
}
