//! Harnesses that check the Harnack inequality, the gradient estimates, the
//! invariant measure of the damped oscillator and the weak-solution criterion
//! numerically. Unknown constants are fitted and reported, never assumed.

mod coupling_check;
mod girsanov;
mod gradient;
mod harnack;
mod integrability;
mod invariant;
mod weak;

pub use coupling_check::{coupling_check, CouplingCheckOptions, CouplingCheckReport, EndpointEntry, OrderEntry};
pub use girsanov::{
    girsanov_check, zero_drift_quadratic_form, Channel, GirsanovOptions, GirsanovReport, UnitMeanEntry,
};
pub use gradient::{gradient_check, gradient_shape, GradientOptions, GradientReport, GradientShapeReport, SlopeEntry};
pub use harnack::{
    density_moments, harnack_check, harnack_grid, DensityMoments, Estimator, HarnackGridReport, HarnackOptions,
    HarnackReport,
};
pub use integrability::{
    gaussian_ball_measure, inner_expectation_oracle, phi_integrability_check, IntegrabilityOptions,
    IntegrabilityReport,
};
pub use invariant::{euler_stationary_covariance, invariant_check, lyapunov_2x2, InvariantOptions, InvariantReport};
pub use weak::{exponential_moment, weak_solution_check, ExponentialMoment, WeakSolutionOptions, WeakSolutionReport};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gcore::{make_policy, ControlPolicy, GParams, PolicySpec, TimeGrid};
use crate::gsde::Expr;

/// Bounded test functions used by the harnesses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    /// `1 / (1 + x² + y²)`.
    InverseQuadratic,
    /// `tanh(y)`.
    TanhY,
    /// `min(exp(−(x² + y²) / (2 w²)), cap)`.
    ClippedGaussian { width: f64, cap: f64 },
    Constant { value: f64 },
    /// Arbitrary expression in `x` and `y`.
    Expr { source: String },
}

/// A compiled test function.
pub type BoxedFn = Box<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Half-width of the box on which sup norms and signs of expression test
/// functions are sampled.
const PROBE_HALF_WIDTH: f64 = 10.0;
const PROBE_NODES: usize = 201;

impl TestFunction {
    pub fn compile(&self) -> Result<BoxedFn> {
        Ok(match self.clone() {
            TestFunction::InverseQuadratic => Box::new(|x, y| 1.0 / (1.0 + x * x + y * y)),
            TestFunction::TanhY => Box::new(|_, y| y.tanh()),
            TestFunction::ClippedGaussian { width, cap } => {
                if !(width > 0.0 && cap > 0.0) {
                    return Err(Error::InvalidParams("clipped Gaussian needs width > 0 and cap > 0".into()));
                }
                Box::new(move |x, y| (-(x * x + y * y) / (2.0 * width * width)).exp().min(cap))
            }
            TestFunction::Constant { value } => Box::new(move |_, _| value),
            TestFunction::Expr { source } => {
                let e = Expr::parse(&source)?;
                Box::new(move |x, y| e.eval(x, y).unwrap_or(f64::NAN))
            }
        })
    }

    pub fn label(&self) -> String {
        match self {
            TestFunction::InverseQuadratic => "1/(1+x^2+y^2)".into(),
            TestFunction::TanhY => "tanh(y)".into(),
            TestFunction::ClippedGaussian { width, cap } => format!("min(exp(-r^2/(2*{width}^2)), {cap})"),
            TestFunction::Constant { value } => format!("{value}"),
            TestFunction::Expr { source } => source.clone(),
        }
    }

    /// `‖f‖_∞`, exact for the catalog and sampled for expressions.
    pub fn sup_norm(&self) -> Result<f64> {
        Ok(match self {
            TestFunction::InverseQuadratic | TestFunction::TanhY => 1.0,
            TestFunction::ClippedGaussian { cap, .. } => cap.min(1.0),
            TestFunction::Constant { value } => value.abs(),
            TestFunction::Expr { .. } => {
                let f = self.compile()?;
                probe(&f).into_iter().fold(0.0_f64, |m, (_, _, v)| m.max(v.abs()))
            }
        })
    }

    /// `InvalidF` at the first probe point where `f < 0` or `f` is not finite.
    pub fn check_nonnegative(&self) -> Result<()> {
        let f = self.compile()?;
        match self {
            TestFunction::TanhY => Err(Error::InvalidF { x: 0.0, y: -1.0, value: (-1.0f64).tanh() }),
            _ => match probe(&f).into_iter().find(|&(_, _, v)| !(v >= 0.0 && v.is_finite())) {
                Some((x, y, value)) => Err(Error::InvalidF { x, y, value }),
                None => Ok(()),
            },
        }
    }
}

fn probe(f: &BoxedFn) -> Vec<(f64, f64, f64)> {
    let step = 2.0 * PROBE_HALF_WIDTH / (PROBE_NODES - 1) as f64;
    let mut out = Vec::with_capacity(PROBE_NODES * PROBE_NODES);
    for i in 0..PROBE_NODES {
        for j in 0..PROBE_NODES {
            let x = -PROBE_HALF_WIDTH + i as f64 * step;
            let y = -PROBE_HALF_WIDTH + j as f64 * step;
            out.push((x, y, f(x, y)));
        }
    }
    out
}

pub(crate) fn build_dictionary(specs: &[PolicySpec], params: &GParams, grid: &TimeGrid) -> Result<Vec<ControlPolicy>> {
    if specs.is_empty() {
        return Err(Error::InvalidParams("control dictionary is empty".into()));
    }
    specs.iter().map(|s| make_policy(s, params, grid)).collect()
}

/// Index of the largest value.
pub(crate) fn argmax(values: impl IntoIterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, v) in values.into_iter().enumerate() {
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_signs_and_norms() {
        assert!(TestFunction::InverseQuadratic.check_nonnegative().is_ok());
        assert!(matches!(TestFunction::TanhY.check_nonnegative(), Err(Error::InvalidF { .. })));
        let e = TestFunction::Expr { source: "x - 1".into() };
        assert!(matches!(e.check_nonnegative(), Err(Error::InvalidF { .. })));
        assert_eq!(e.sup_norm().unwrap(), 11.0);
        let g = TestFunction::ClippedGaussian { width: 1.0, cap: 0.5 };
        assert_eq!(g.compile().unwrap()(0.0, 0.0), 0.5);
    }

    #[test]
    fn catalog_round_trips_through_json() {
        let f = TestFunction::ClippedGaussian { width: 2.0, cap: 0.8 };
        let s = serde_json::to_string(&f).unwrap();
        assert_eq!(s, r#"{"kind":"clipped_gaussian","width":2.0,"cap":0.8}"#);
        assert_eq!(serde_json::from_str::<TestFunction>(&s).unwrap(), f);
    }
}
