//! Experiment configuration files.
//!
//! A config is a JSON object; every field has a default, so `{}` is valid.
//! Unknown fields are rejected so that typos surface as errors.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use serde_json::Value;

use selroute::sim::Mode;
use selroute::NetworkConfig;

use crate::error::{CliError, Result};

/// SIR threshold as written in the config: a bare number is linear, a string
/// with a `dB` suffix is in decibels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Linear(f64),
    Decibel(f64),
}

impl Threshold {
    pub fn linear(&self) -> f64 {
        match *self {
            Threshold::Linear(v) => v,
            Threshold::Decibel(db) => 10f64.powf(db / 10.0),
        }
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let t = text.trim();
        let (number, db) = match t.strip_suffix("dB").or_else(|| t.strip_suffix("db")) {
            Some(rest) => (rest.trim(), true),
            None => (t, false),
        };
        let v: f64 = number
            .parse()
            .map_err(|_| format!("`{text}` is neither a number nor `<number>dB`"))?;
        if !v.is_finite() {
            return Err(format!("`{text}` is not finite"));
        }
        Ok(if db {
            Threshold::Decibel(v)
        } else {
            Threshold::Linear(v)
        })
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Threshold::Linear(v) => write!(f, "{v}"),
            Threshold::Decibel(v) => write!(f, "{v}dB"),
        }
    }
}

impl Serialize for Threshold {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match *self {
            Threshold::Linear(v) => s.serialize_f64(v),
            Threshold::Decibel(_) => s.serialize_str(&self.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for Threshold {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Threshold;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a linear number or a string like \"10dB\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Threshold, E> {
                Ok(Threshold::Linear(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Threshold, E> {
                Ok(Threshold::Linear(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Threshold, E> {
                Ok(Threshold::Linear(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Threshold, E> {
                Threshold::parse(v).map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub lambda: f64,
    pub p: f64,
    pub alpha: f64,
    pub beta: Threshold,
    pub rho: f64,
    pub mu: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            p: 0.05,
            alpha: 3.0,
            beta: Threshold::Decibel(10.0),
            rho: 1.0,
            mu: 1.0,
        }
    }
}

impl ModelConfig {
    pub fn network(&self) -> Result<NetworkConfig> {
        let field_err = |e: selroute::Error| match e {
            selroute::Error::InvalidParameter { name, .. }
            | selroute::Error::Domain { name, .. } => {
                CliError::config(format!("model.{name}"), e.to_string())
            }
            other => CliError::Model(other),
        };
        NetworkConfig::new(self.lambda, self.p, self.alpha, self.beta.linear())
            .and_then(|c| c.with_rho(self.rho))
            .and_then(|c| c.with_mu(self.mu))
            .map_err(field_err)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

/// One swept parameter: either explicit `values`, or `points` samples from
/// `start` to `stop` (inclusive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default)]
    pub spacing: Spacing,
}

impl Axis {
    pub fn explicit(name: &str, values: Vec<f64>) -> Self {
        Self {
            name: name.into(),
            values: Some(values),
            start: None,
            stop: None,
            points: None,
            spacing: Spacing::Linear,
        }
    }

    pub fn range(name: &str, start: f64, stop: f64, points: usize) -> Self {
        Self {
            name: name.into(),
            values: None,
            start: Some(start),
            stop: Some(stop),
            points: Some(points),
            spacing: Spacing::Linear,
        }
    }

    /// Grid values, validated to be finite, non-empty and strictly monotone.
    pub fn values(&self, field: &str) -> Result<Vec<f64>> {
        let vals = match (&self.values, self.start, self.stop, self.points) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(start), Some(stop), Some(points)) => {
                if points == 0 {
                    return Err(CliError::config(format!("{field}.points"), "must be >= 1"));
                }
                if points == 1 {
                    vec![start]
                } else {
                    if start == stop {
                        return Err(CliError::config(
                            field,
                            "start equals stop with more than one point",
                        ));
                    }
                    let step = |i: usize| i as f64 / (points - 1) as f64;
                    match self.spacing {
                        Spacing::Linear => (0..points)
                            .map(|i| start + (stop - start) * step(i))
                            .collect(),
                        Spacing::Log => {
                            if !(start > 0.0 && stop > 0.0) {
                                return Err(CliError::config(
                                    field,
                                    "log spacing needs positive start and stop",
                                ));
                            }
                            let (a, b) = (start.ln(), stop.ln());
                            (0..points).map(|i| (a + (b - a) * step(i)).exp()).collect()
                        }
                    }
                }
            }
            _ => {
                return Err(CliError::config(
                    field,
                    "give either `values` or all of `start`, `stop`, `points`",
                ));
            }
        };
        if vals.is_empty() {
            return Err(CliError::config(
                format!("{field}.values"),
                "must not be empty",
            ));
        }
        if let Some(v) = vals.iter().find(|v| !v.is_finite()) {
            return Err(CliError::config(field, format!("non-finite value {v}")));
        }
        let increasing = vals.windows(2).all(|w| w[0] < w[1]);
        let decreasing = vals.windows(2).all(|w| w[0] > w[1]);
        if !(increasing || decreasing) {
            return Err(CliError::config(field, "values must be strictly monotone"));
        }
        Ok(vals)
    }
}

/// Relay rule as requested in a config; absent parameters are optimised per
/// sweep cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProtocolChoice {
    /// Missing `phi` and `r_m` are jointly optimised; a given `phi` alone gets
    /// the best `r_m` for that angle.
    SelectionRegion {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        phi: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r_m: Option<f64>,
    },
    /// Missing `phi` is optimised.
    NearestNeighbor {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        phi: Option<f64>,
    },
    /// Missing `radius` uses the default candidate radius.
    BestProgress {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        radius: Option<f64>,
    },
}

impl ProtocolChoice {
    pub fn label(&self) -> String {
        let num = |v: f64| format!("{v:.6}");
        match *self {
            ProtocolChoice::SelectionRegion {
                phi: None,
                r_m: None,
            } => "selection_region(opt)".into(),
            ProtocolChoice::SelectionRegion {
                phi: Some(phi),
                r_m: None,
            } => {
                format!("selection_region(phi={},r_m=opt)", num(phi))
            }
            ProtocolChoice::SelectionRegion {
                phi: Some(phi),
                r_m: Some(r),
            } => {
                format!("selection_region(phi={},r_m={})", num(phi), num(r))
            }
            ProtocolChoice::SelectionRegion {
                phi: None,
                r_m: Some(r),
            } => {
                format!("selection_region(phi=?,r_m={})", num(r))
            }
            ProtocolChoice::NearestNeighbor { phi: None } => "nearest_neighbor(opt)".into(),
            ProtocolChoice::NearestNeighbor { phi: Some(phi) } => {
                format!("nearest_neighbor(phi={})", num(phi))
            }
            ProtocolChoice::BestProgress { radius: None } => "best_progress".into(),
            ProtocolChoice::BestProgress { radius: Some(r) } => {
                format!("best_progress(radius={})", num(r))
            }
        }
    }

    fn check(&self, field: &str) -> Result<()> {
        let positive = |name: &str, v: Option<f64>| match v {
            Some(x) if !(x.is_finite() && x > 0.0) => Err(CliError::config(
                format!("{field}.{name}"),
                format!("{x} must be finite and > 0"),
            )),
            _ => Ok(()),
        };
        match *self {
            ProtocolChoice::SelectionRegion {
                phi: None,
                r_m: Some(_),
            } => Err(CliError::config(
                format!("{field}.phi"),
                "a fixed r_m needs a fixed phi",
            )),
            ProtocolChoice::SelectionRegion { phi, r_m } => {
                positive("phi", phi)?;
                match r_m {
                    Some(r) if !(r.is_finite() && r >= 0.0) => Err(CliError::config(
                        format!("{field}.r_m"),
                        format!("{r} must be finite and >= 0"),
                    )),
                    _ => Ok(()),
                }
            }
            ProtocolChoice::NearestNeighbor { phi } => positive("phi", phi),
            ProtocolChoice::BestProgress { radius } => positive("radius", radius),
        }
    }

    /// The four rules of the standard protocol comparison.
    pub fn standard_set() -> Vec<Self> {
        vec![
            ProtocolChoice::BestProgress { radius: None },
            ProtocolChoice::SelectionRegion {
                phi: None,
                r_m: None,
            },
            ProtocolChoice::NearestNeighbor { phi: None },
            ProtocolChoice::NearestNeighbor {
                phi: Some(std::f64::consts::FRAC_PI_2),
            },
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RouteConfig {
    pub source: [f64; 2],
    pub dest: [f64; 2],
    pub max_hops: u64,
}

impl Default for RouteConfig {
    fn default() -> Self {
        Self {
            source: [0.0, 0.0],
            dest: [20.0, 0.0],
            max_hops: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateConfig {
    /// Replaces the tolerance of every check (negative controls).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

/// Fixed-angle mode of `optimize`: the reference distance is optimised at this
/// angle only.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_phi: Option<f64>,
    /// Number of coarse angle samples of the joint search.
    pub phi_grid: Option<usize>,
}

pub const DEFAULT_TRIALS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub sweep: Vec<Axis>,
    pub protocols: Vec<ProtocolChoice>,
    pub trials: u64,
    pub seed: u64,
    pub mode: Mode,
    pub output: OutputConfig,
    pub route: RouteConfig,
    pub optimize: OptimizeConfig,
    pub validate: ValidateConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            sweep: Vec::new(),
            protocols: Vec::new(),
            trials: DEFAULT_TRIALS,
            seed: 0,
            mode: Mode::SemiAnalytic,
            output: OutputConfig::default(),
            route: RouteConfig::default(),
            optimize: OptimizeConfig::default(),
            validate: ValidateConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parses a config, or the `config` member of a run sidecar.
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let value: Value = serde_json::from_str(text)?;
        match value {
            Value::Object(ref map) if map.contains_key("config") && map.contains_key("command") => {
                serde_json::from_value(map["config"].clone())
            }
            other => serde_json::from_value(other),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text).map_err(|source| CliError::ConfigParse {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Checks that do not depend on the command.
    pub fn validate(&self) -> Result<()> {
        self.model.network()?;
        if self.trials == 0 {
            return Err(CliError::config("trials", "must be >= 1"));
        }
        for (i, axis) in self.sweep.iter().enumerate() {
            axis.values(&format!("sweep[{i}]"))?;
        }
        for (i, proto) in self.protocols.iter().enumerate() {
            proto.check(&format!("protocols[{i}]"))?;
        }
        if let Some(phi) = self.optimize.fixed_phi {
            if !(phi > 0.0 && phi < std::f64::consts::TAU) {
                return Err(CliError::config(
                    "optimize.fixed_phi",
                    format!("{phi} must lie in (0, 2π)"),
                ));
            }
        }
        if self.optimize.phi_grid == Some(0) {
            return Err(CliError::config("optimize.phi_grid", "must be >= 1"));
        }
        if let Some(tol) = self.validate.tolerance {
            if !(tol >= 0.0) {
                return Err(CliError::config(
                    "validate.tolerance",
                    format!("{tol} must be >= 0"),
                ));
            }
        }
        let finite = |v: [f64; 2]| v.iter().all(|x| x.is_finite());
        if !finite(self.route.source) {
            return Err(CliError::config(
                "route.source",
                "coordinates must be finite",
            ));
        }
        if !finite(self.route.dest) {
            return Err(CliError::config("route.dest", "coordinates must be finite"));
        }
        if self.route.max_hops == 0 {
            return Err(CliError::config("route.max_hops", "must be >= 1"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decibels_convert_exactly() {
        assert_eq!(Threshold::parse("10dB").unwrap().linear(), 10.0);
        assert_eq!(Threshold::parse(" 20 dB").unwrap().linear(), 100.0);
        assert_eq!(Threshold::parse("0dB").unwrap().linear(), 1.0);
        assert_eq!(Threshold::parse("10").unwrap(), Threshold::Linear(10.0));
        assert!(Threshold::parse("ten").is_err());
        assert!(Threshold::parse("inf").is_err());
    }

    #[test]
    fn threshold_round_trips_through_json() {
        for t in [Threshold::Linear(7.5), Threshold::Decibel(10.0)] {
            let text = serde_json::to_string(&t).unwrap();
            assert_eq!(serde_json::from_str::<Threshold>(&text).unwrap(), t);
        }
        assert_eq!(
            serde_json::from_str::<Threshold>("10").unwrap(),
            Threshold::Linear(10.0)
        );
    }

    #[test]
    fn empty_config_uses_defaults() {
        let cfg = ExperimentConfig::from_json("{}").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        let net = cfg.model.network().unwrap();
        assert_eq!(
            (net.lambda, net.p, net.alpha, net.beta),
            (1.0, 0.05, 3.0, 10.0)
        );
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = ExperimentConfig::from_json(r#"{"model": {"lamda": 2}}"#).unwrap_err();
        assert!(err.to_string().contains("lamda"), "{err}");
    }

    #[test]
    fn axis_grids() {
        assert_eq!(
            Axis::range("p", 0.0, 1.0, 3).values("a").unwrap(),
            vec![0.0, 0.5, 1.0]
        );
        assert_eq!(
            Axis::range("p", 0.3, 0.3, 1).values("a").unwrap(),
            vec![0.3]
        );
        let log = Axis {
            spacing: Spacing::Log,
            ..Axis::range("p", 0.01, 1.0, 3)
        };
        let v = log.values("a").unwrap();
        assert!((v[1] - 0.1).abs() < 1e-15);
        assert!(Axis::range("p", 0.0, 1.0, 0).values("a").is_err());
        assert!(Axis::explicit("p", vec![]).values("a").is_err());
        assert!(Axis::explicit("p", vec![0.1, 0.3, 0.2])
            .values("a")
            .is_err());
        assert!(Axis::explicit("p", vec![0.3, 0.2]).values("a").is_ok());
    }

    #[test]
    fn invalid_fields_are_named() {
        let mut cfg = ExperimentConfig::default();
        cfg.model.p = 1.5;
        match cfg.validate() {
            Err(CliError::Config { field, .. }) => assert_eq!(field, "model.p"),
            other => panic!("{other:?}"),
        }
        let cfg = ExperimentConfig {
            protocols: vec![ProtocolChoice::SelectionRegion {
                phi: None,
                r_m: Some(0.2),
            }],
            ..Default::default()
        };
        match cfg.validate() {
            Err(CliError::Config { field, .. }) => assert_eq!(field, "protocols[0].phi"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sidecar_form_is_accepted() {
        let cfg = ExperimentConfig {
            seed: 42,
            ..Default::default()
        };
        let sidecar = serde_json::json!({"command": "optimize", "config": cfg});
        assert_eq!(
            ExperimentConfig::from_json(&sidecar.to_string()).unwrap(),
            cfg
        );
    }
}
