//! Experiment configuration. Every block has defaults, so a config file may
//! set only what a command needs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gcore::{GParams, PolicySpec, TimeGrid};
use crate::gsde::{parse_drift, HamiltonianSystem, Rect};
use crate::hjb::HjbSettings;
use crate::verify::{Estimator, TestFunction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub params: GParams,
    #[serde(default)]
    pub system: SystemConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub semigroup: SemigroupConfig,
    #[serde(default)]
    pub hjb: HjbConfig,
    #[serde(default)]
    pub coupling: CouplingConfig,
    #[serde(default)]
    pub girsanov: GirsanovConfig,
    #[serde(default)]
    pub harnack: HarnackConfig,
    #[serde(default)]
    pub gradient: GradientConfig,
    #[serde(default)]
    pub invariant: InvariantConfig,
    #[serde(default)]
    pub weak_solution: WeakSolutionConfig,
    #[serde(default)]
    pub phi_integrability: PhiIntegrabilityConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    pub a: f64,
    pub m: f64,
    pub q: f64,
    pub b1: String,
    pub b2: String,
    pub b1_bar: Option<String>,
    pub b2_bar: Option<String>,
    /// Drifts are analysed on `[-box, box]²`.
    #[serde(rename = "box")]
    pub half_width: f64,
    /// Declared Lipschitz constant; estimated from the drifts when absent.
    pub k: Option<f64>,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            a: 0.0,
            m: 1.0,
            q: 1.0,
            b1: "-x - y".into(),
            b2: "0".into(),
            b1_bar: None,
            b2_bar: None,
            half_width: 6.0,
            k: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub horizon: f64,
    pub n_steps: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { horizon: 1.0, n_steps: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    /// Defaults to `{σ_lower, σ_upper, alternating}`.
    pub dictionary: Option<Vec<PolicySpec>>,
    pub hjb: HjbSettings,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self { dictionary: None, hjb: HjbSettings::new(6.0, 161, 161) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub n_paths: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { seed: 0, n_paths: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub z0: (f64, f64),
    /// Defaults to `σ_lower`.
    pub policy: Option<PolicySpec>,
    /// Number of paths written to `paths.csv`.
    pub dump_paths: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { z0: (0.0, 0.0), policy: None, dump_paths: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SemigroupConfig {
    pub z: (f64, f64),
    pub f: TestFunction,
}

impl Default for SemigroupConfig {
    fn default() -> Self {
        Self { z: (0.0, 0.0), f: TestFunction::InverseQuadratic }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HjbConfig {
    pub f: TestFunction,
    pub points: Vec<(f64, f64)>,
}

impl Default for HjbConfig {
    fn default() -> Self {
        Self { f: TestFunction::InverseQuadratic, points: vec![(0.0, 0.0)] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CouplingConfig {
    pub z: (f64, f64),
    pub h: (f64, f64),
    pub quad_points: usize,
    /// The endpoint-order study uses `dt = 2^{-k}` for these `k`.
    pub dt_exponents: Vec<u32>,
    /// Paths per identity check.
    pub identity_paths: usize,
}

impl Default for CouplingConfig {
    fn default() -> Self {
        Self { z: (1.0, -1.0), h: (0.3, 0.0), quad_points: 64, dt_exponents: vec![6, 7, 8, 9, 10], identity_paths: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GirsanovConfig {
    /// Constant shift used in the single-channel checks.
    pub c: f64,
    pub z: (f64, f64),
    pub h: (f64, f64),
    /// Steps of the deterministic zero-drift check.
    pub deterministic_steps: usize,
}

impl Default for GirsanovConfig {
    fn default() -> Self {
        Self { c: 0.5, z: (0.0, 0.0), h: (0.3, 0.0), deterministic_steps: 1 << 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HarnackConfig {
    pub f: TestFunction,
    pub zs: Vec<(f64, f64)>,
    pub hs: Vec<(f64, f64)>,
    pub ps: Vec<f64>,
    pub horizons: Vec<f64>,
    pub estimators: Vec<Estimator>,
    pub max_dt: f64,
}

impl Default for HarnackConfig {
    fn default() -> Self {
        Self {
            f: TestFunction::InverseQuadratic,
            zs: vec![(0.0, 0.0)],
            hs: vec![(0.3, 0.0)],
            ps: vec![2.0],
            horizons: vec![1.0],
            estimators: vec![Estimator::McDictionary],
            max_dt: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GradientConfig {
    pub f: TestFunction,
    pub z: (f64, f64),
    pub horizons: Vec<f64>,
    pub p: f64,
    pub h_norms: Vec<f64>,
    pub max_dt: f64,
}

impl Default for GradientConfig {
    fn default() -> Self {
        Self {
            f: TestFunction::TanhY,
            z: (0.0, 0.0),
            horizons: vec![0.5, 1.0, 2.0],
            p: 2.0,
            h_norms: vec![1e-1, 1e-2, 1e-3],
            max_dt: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InvariantConfig {
    pub t_long: f64,
    pub dt: f64,
    pub tolerance: f64,
}

impl Default for InvariantConfig {
    fn default() -> Self {
        Self { t_long: 200.0, dt: 0.01, tolerance: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeakSolutionConfig {
    pub epsilon: f64,
    pub p: f64,
    pub z: (f64, f64),
    pub margin: f64,
    pub n_steps: usize,
}

impl Default for WeakSolutionConfig {
    fn default() -> Self {
        Self { epsilon: 0.5, p: 2.0, z: (0.0, 0.0), margin: 0.1, n_steps: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhiIntegrabilityConfig {
    pub p: f64,
    pub z: (f64, f64),
    pub c_phi: f64,
    pub s_min: f64,
    pub t_max: f64,
    pub quad_points: usize,
}

impl Default for PhiIntegrabilityConfig {
    fn default() -> Self {
        Self { p: 2.0, z: (0.0, 0.0), c_phi: 1.0, s_min: 1e-3, t_max: 1.0, quad_points: 64 }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| Error::InvalidParams(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn dictionary(&self) -> Vec<PolicySpec> {
        self.estimator.dictionary.clone().unwrap_or_else(|| PolicySpec::default_dictionary(&self.params))
    }

    pub fn time_grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.grid.horizon, self.grid.n_steps)
    }

    /// The configured system with its perturbations attached.
    pub fn build_system(&self) -> Result<HamiltonianSystem> {
        let s = &self.system;
        if !(s.half_width > 0.0) {
            return Err(Error::InvalidParams(format!("system.box must be positive, got {}", s.half_width)));
        }
        let domain = Rect::square(s.half_width);
        let b1 = parse_drift(&s.b1, domain)?;
        let b2 = parse_drift(&s.b2, domain)?;
        let b1_bar = s.b1_bar.as_deref().map(|e| parse_drift(e, domain)).transpose()?;
        let b2_bar = s.b2_bar.as_deref().map(|e| parse_drift(e, domain)).transpose()?;
        let k = match s.k {
            Some(k) => k,
            None => (b1.lipschitz() + b2.lipschitz()).max(1e-3),
        };
        Ok(HamiltonianSystem::new(s.a, s.m, s.q, b1, b2, k)?.with_perturbation(b1_bar, b2_bar))
    }

    /// Cross-field checks with actionable messages.
    pub fn validate(&self) -> Result<()> {
        let system = self.build_system()?;
        let lip = system.check_lipschitz(1000, 0)?;
        if !lip.holds {
            return Err(Error::InvalidParams(format!(
                "system.k = {} is below the drift Lipschitz estimate {:.6} on the box; raise system.k",
                lip.declared,
                lip.grid_estimate.max(lip.pair_max_ratio)
            )));
        }
        let grid = self.time_grid()?;
        if grid.dt() > system.step_limit() {
            return Err(Error::InvalidParams(format!(
                "grid step {} exceeds 1/(4K) = {}; raise grid.n_steps to at least {}",
                grid.dt(),
                system.step_limit(),
                (grid.horizon() / system.step_limit()).ceil()
            )));
        }
        for spec in self.dictionary() {
            crate::gcore::make_policy(&spec, &self.params, &grid)?;
        }
        if self.run.n_paths < 2 {
            return Err(Error::InvalidParams("run.n_paths must be at least 2".into()));
        }
        let ps = self.harnack.ps.iter().chain([&self.gradient.p, &self.weak_solution.p, &self.phi_integrability.p]);
        for &p in ps {
            if !(p > 1.0) {
                return Err(Error::InvalidParams(format!("every p must exceed 1, got {p}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"params": {"sigma_lower": 1.0, "sigma_upper": 2.0}}"#).unwrap();
        assert_eq!(cfg.system.b1, "-x - y");
        assert_eq!(cfg.dictionary().len(), 3);
        let sys = cfg.build_system().unwrap();
        assert!((sys.k - 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn inverted_band_is_rejected() {
        let e = ExperimentConfig::from_json(r#"{"params": {"sigma_lower": 2.0, "sigma_upper": 1.0}}"#).unwrap_err();
        assert!(e.to_string().contains("strictly below"), "{e}");
    }

    #[test]
    fn cross_field_checks() {
        let base = r#"{"params": {"sigma_lower": 1.0, "sigma_upper": 2.0}, "#;
        let too_coarse = format!("{base}\"grid\": {{\"horizon\": 1.0, \"n_steps\": 2}}}}");
        assert!(ExperimentConfig::from_json(&too_coarse).unwrap_err().to_string().contains("n_steps"));
        let small_k = format!("{base}\"system\": {{\"k\": 0.5}}}}");
        assert!(ExperimentConfig::from_json(&small_k).unwrap_err().to_string().contains("system.k"));
        let degenerate = format!("{base}\"system\": {{\"m\": 0.0}}}}");
        assert!(ExperimentConfig::from_json(&degenerate).is_err());
        let unknown = format!("{base}\"sytem\": {{}}}}");
        assert!(ExperimentConfig::from_json(&unknown).is_err());
    }
}
