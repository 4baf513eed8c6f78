//! Scenario files: JSON with exact fields written as integers or `"p/q"` strings.

use std::fs;
use std::path::Path;

use combflow::combs::{build_comb, CombSpec};
use combflow::flux::{PiecewiseAffineFlux2, Polynomial};
use combflow::illposed::{Angle, DemoConfig};
use combflow::{CounterexampleFlux, DensityField, Horizon, PlanarFlux, Point2, Rational, Vec2};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FluxSpec {
    Counterexample,
    PiecewiseAffine { breakpoints: Vec<(Rational, Vec2)>, left_slope: Box<Vec2>, right_slope: Box<Vec2> },
    /// Scalar polynomial flux, coefficients in increasing degree.
    Polynomial { coeffs: Vec<f64> },
}

impl FluxSpec {
    pub fn planar(&self) -> Result<Box<dyn PlanarFlux>, CliError> {
        match self {
            FluxSpec::Counterexample => Ok(Box::new(CounterexampleFlux)),
            FluxSpec::PiecewiseAffine { breakpoints, left_slope, right_slope } => Ok(Box::new(
                PiecewiseAffineFlux2::new(breakpoints.clone(), (**left_slope).clone(), (**right_slope).clone())
                    .map_err(|e| CliError::Config(format!("flux: {e}")))?,
            )),
            FluxSpec::Polynomial { .. } => Err(CliError::Config("a planar flux is required; got a scalar polynomial".into())),
        }
    }

    pub fn scalar(&self) -> Result<Polynomial, CliError> {
        match self {
            FluxSpec::Polynomial { coeffs } if !coeffs.is_empty() => Ok(Polynomial::new(coeffs.clone())),
            FluxSpec::Polynomial { .. } => Err(CliError::Config("polynomial flux needs coefficients".into())),
            _ => Err(CliError::Config("a scalar polynomial flux is required".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum BetaSpec {
    Cos { cos: Rational },
    Radians { radians: f64 },
}

impl BetaSpec {
    pub fn angle(&self) -> Result<Angle, CliError> {
        match self {
            BetaSpec::Cos { cos } => Angle::from_cos(cos.clone()),
            BetaSpec::Radians { radians } => Angle::from_radians(*radians),
        }
        .map_err(|e| CliError::Config(format!("beta: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RiemannSpec {
    pub left: f64,
    pub right: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub cells: usize,
    pub t_end: f64,
    pub cfl: f64,
    pub l1_tolerance: f64,
    pub viscosity_n: Vec<f64>,
    /// Step sizes for `n = 1`; scaled by `1/n` for other `n`.
    pub viscosity_h: Vec<f64>,
}

impl Default for RiemannSpec {
    fn default() -> Self {
        RiemannSpec {
            left: 1.0,
            right: -1.0,
            x_min: -2.0,
            x_max: 4.0,
            cells: 4000,
            t_end: 1.0,
            cfl: 0.9,
            l1_tolerance: 1e-2,
            viscosity_n: vec![1.0, 4.0, 16.0],
            viscosity_h: vec![0.02, 0.01, 0.005],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompactnessSpec {
    /// `epsilon = 2^-nu` for `nu` in this inclusive range.
    pub nu: (i32, i32),
    pub comb_level: i32,
    pub comb_nu: (i32, i32),
    pub comb_t_end: f64,
    pub bv_epsilon: f64,
    pub bv_grid: usize,
}

impl Default for CompactnessSpec {
    fn default() -> Self {
        CompactnessSpec { nu: (3, 7), comb_level: 1, comb_nu: (2, 5), comb_t_end: 24.0, bv_epsilon: 0.05, bv_grid: 400 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default = "default_name")]
    pub name: String,
    pub flux: FluxSpec,
    #[serde(default)]
    pub field: Option<DensityField>,
    /// Extra comb patches appended to `field` (or to a background-3 field).
    #[serde(default)]
    pub combs: Vec<CombSpec>,
    #[serde(default)]
    pub points: Vec<Point2>,
    #[serde(default)]
    pub t_end: Option<Rational>,
    #[serde(default)]
    pub beta: Option<BetaSpec>,
    #[serde(default)]
    pub levels: Option<(i32, i32)>,
    #[serde(default)]
    pub samples: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub demo: Option<DemoConfig>,
    #[serde(default)]
    pub riemann: Option<RiemannSpec>,
    #[serde(default)]
    pub compactness: Option<CompactnessSpec>,
}

fn default_name() -> String {
    "scenario".into()
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// The configured field with comb patches appended, if either is present.
    pub fn density_field(&self) -> Result<Option<DensityField>, CliError> {
        if self.field.is_none() && self.combs.is_empty() {
            return Ok(None);
        }
        let mut field = self.field.clone().unwrap_or(DensityField {
            background: 3.into(),
            patches: Vec::new(),
            horizon: Horizon::unbounded(),
        });
        for spec in &self.combs {
            field.patches.push(build_comb(spec).map_err(|e| CliError::Config(format!("comb: {e}")))?);
        }
        Ok(Some(field))
    }
}

/// Inclusive integer range written `a..b`, `a..=b` or `a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LevelRange(pub i32, pub i32);

impl LevelRange {
    pub fn iter(self) -> std::ops::RangeInclusive<i32> {
        self.0..=self.1
    }
}

pub fn parse_range(s: &str) -> Result<LevelRange, String> {
    let parse = |t: &str| t.trim().parse::<i32>().map_err(|e| format!("{t:?}: {e}"));
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (parse(a)?, parse(b.trim_start_matches('='))?),
        None => {
            let v = parse(s)?;
            (v, v)
        }
    };
    if a > b {
        return Err(format!("empty range {s}"));
    }
    Ok(LevelRange(a, b))
}

pub fn parse_rational(s: &str) -> Result<Rational, String> {
    s.parse::<Rational>().map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("0..4"), Ok(LevelRange(0, 4)));
        assert_eq!(parse_range("1..=5"), Ok(LevelRange(1, 5)));
        assert_eq!(parse_range("3"), Ok(LevelRange(3, 3)));
        assert!(parse_range("4..1").is_err());
        assert!(parse_range("x").is_err());
    }

    #[test]
    fn scenario_round_trip() {
        let text = r#"{
            "name": "single",
            "flux": {"kind": "counterexample"},
            "field": {
                "background": 3,
                "patches": [{"value": 4, "velocity": {"x1": 0, "x2": 1},
                             "support0": [{"lo": {"x1": 0, "x2": 0}, "hi": {"x1": 1, "x2": 3}}]}],
                "horizon": {"start": 0, "end": null}
            },
            "points": [{"x1": "1/2", "x2": 5}],
            "t_end": "12",
            "beta": {"cos": "1/3"}
        }"#;
        let s: Scenario = serde_json::from_str(text).unwrap();
        assert_eq!(s.points[0].x1, Rational::new(1, 2).unwrap());
        assert!(s.density_field().unwrap().is_some());
        let again: Scenario = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn rejects_missing_flux_and_floats_in_exact_fields() {
        assert!(serde_json::from_str::<Scenario>(r#"{"name": "x"}"#).is_err());
        assert!(serde_json::from_str::<Scenario>(r#"{"flux": {"kind": "counterexample"}, "t_end": 0.5}"#).is_err());
        assert!(serde_json::from_str::<Scenario>(r#"{"flux": {"kind": "counterexample"}, "bogus": 1}"#).is_err());
    }
}
