//! `report.json` assembly. Every number in `results` is tagged: the
//! `value`/`mean` of an object carrying an `se` field keep that pair, any other
//! number becomes `{"value": x, "tag": t}` with `t` one of `exact`, `fitted` or `mc`.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{json, Map, Value};

/// Fields of an object with an `se` that the standard error belongs to.
const SE_FIELDS: &[&str] = &["value", "mean", "se", "n"];

/// Monte Carlo quantities reported without their own standard error.
const MC_KEYS: &[&str] = &[
    "slack",
    "max_slope",
    "slope",
    "z_score",
    "tilt_defect",
    "max_quad",
    "max_exponent",
    "rel_err",
    "rel_err_xx",
    "rel_err_yy",
    "m_xx",
    "m_yy",
    "max_deviation",
    "log_ratio",
    "integral",
    "inner",
    "inner_se",
    "integrand",
    "endpoint_gap",
    "pair_max_ratio",
];

/// Empirical constants and fitted slopes.
const FITTED_KEYS: &[&str] = &[
    "density_c",
    "phi_ratio",
    "constants",
    "mean_constant",
    "log_slope",
    "log_slope_rms",
    "log_fit",
    "observed_order",
    "lambda_inverse_c",
    "gamma_prime_c",
    "theta_c",
    "inner_exponent",
    "ball_exponent",
    "tail_slope",
    "discrepancy_factor",
];

fn tag_for(key: Option<&str>, inherited: Option<&'static str>) -> &'static str {
    if let Some(t) = inherited {
        return t;
    }
    match key {
        Some(k) if k.contains("fitted") || FITTED_KEYS.contains(&k) => "fitted",
        Some(k) if MC_KEYS.contains(&k) => "mc",
        _ => "exact",
    }
}

fn tag_value(v: Value, key: Option<&str>, inherited: Option<&'static str>) -> Value {
    match v {
        Value::Number(_) => json!({ "value": v, "tag": tag_for(key, inherited) }),
        Value::Array(items) => {
            let t = Some(tag_for(key, inherited)).filter(|t| *t != "exact").or(inherited);
            Value::Array(items.into_iter().map(|x| tag_value(x, key, t)).collect())
        }
        Value::Object(map) => {
            let has_se = map.contains_key("se");
            let t = Some(tag_for(key, inherited)).filter(|t| *t != "exact").or(inherited);
            Value::Object(
                map.into_iter()
                    .map(|(k, x)| {
                        if has_se && SE_FIELDS.contains(&k.as_str()) {
                            (k, x)
                        } else {
                            let tagged = tag_value(x, Some(&k), t);
                            (k, tagged)
                        }
                    })
                    .collect(),
            )
        }
        other => other,
    }
}

/// Tag every number of a serialized result tree.
pub fn tag_numbers(v: Value) -> Value {
    tag_value(v, None, None)
}

/// A reported empirical constant.
#[derive(Debug, Clone, Serialize)]
pub struct Fitted {
    pub value: Option<f64>,
    pub tag: &'static str,
    /// Fit residual, when the constant comes from a regression.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
}

impl Fitted {
    pub fn new(value: f64) -> Self {
        Self { value: Some(value).filter(|v| v.is_finite()), tag: "fitted", residual: None }
    }

    pub fn with_residual(value: f64, residual: f64) -> Self {
        Self { residual: Some(residual), ..Self::new(value) }
    }
}

pub type FittedMap = BTreeMap<String, Fitted>;

pub fn version() -> &'static str {
    option_env!("GHARNACK_GIT_DESCRIBE").unwrap_or(concat!("v", env!("CARGO_PKG_VERSION")))
}

pub fn assemble(command: &str, config: Value, results: Value, fitted: &FittedMap, pass: bool, timestamp: &str) -> Value {
    let mut top = Map::new();
    top.insert("command".into(), json!(command));
    top.insert("config".into(), config);
    top.insert("results".into(), tag_numbers(results));
    top.insert("fitted_constants".into(), serde_json::to_value(fitted).expect("fitted constants serialize"));
    top.insert("pass".into(), json!(pass));
    top.insert("version".into(), json!(version()));
    top.insert("timestamp".into(), json!(timestamp));
    Value::Object(top)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_are_tagged_by_context() {
        let v = json!({
            "value": {"value": 1.0, "se": 0.1},
            "sigma": 32.0,
            "fitted_c": 0.5,
            "constants": [0.1, 0.2],
            "slack": 0.01,
            "nested": {"horizon": 1.0, "flag": true}
        });
        let t = tag_numbers(v);
        assert_eq!(t["value"], json!({"value": 1.0, "se": 0.1}));
        assert_eq!(t["sigma"]["tag"], "exact");
        assert_eq!(t["fitted_c"]["tag"], "fitted");
        assert_eq!(t["constants"][1]["tag"], "fitted");
        assert_eq!(t["slack"]["tag"], "mc");
        assert_eq!(t["nested"]["horizon"]["tag"], "exact");
        assert_eq!(t["nested"]["flag"], true);
    }

    #[test]
    fn every_number_ends_up_tagged() {
        fn check(v: &Value) {
            match v {
                Value::Number(_) => panic!("untagged number"),
                Value::Array(a) => a.iter().for_each(check),
                Value::Object(m) if m.contains_key("tag") => {}
                Value::Object(m) if m.contains_key("se") => {
                    m.iter().filter(|(k, _)| !SE_FIELDS.contains(&k.as_str())).for_each(|(_, x)| check(x))
                }
                Value::Object(m) => m.values().for_each(check),
                _ => {}
            }
        }
        check(&tag_numbers(json!({"a": [1, [2, {"b": 3}]], "c": {"d": 4.5, "e": {"mean": 1, "se": 0, "k": 2}}})));
    }
}
