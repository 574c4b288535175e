//! Scenario files.
//!
//! A scenario is a JSON document with a `schema_version` field. Unknown keys
//! are rejected. Lengths may be given in meters or as strings with a unit
//! (`"1.5 cm"`, `"750 um"`).

use std::f64::consts::TAU;
use std::fmt;
use std::path::Path;

use microswim_core::guidance::IlosParams;
use microswim_core::model::{DisturbanceSpec, SwimmerParams};
use microswim_core::paths::{ParametricCurve, PathSpec};
use microswim_core::sim::{Controller, Estimate, SimConfig};
use microswim_core::{Error as CoreError, Vec2};
use serde::Deserialize;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub field: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error")?;
        if let Some(line) = self.line {
            write!(f, " at line {line}")?;
        }
        if let Some(field) = &self.field {
            write!(f, ": field `{field}`")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

/// A length in meters, or a number followed by `m`, `cm`, `mm`, `um` or `µm`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Length {
    Meters(f64),
    Text(String),
}

impl Length {
    pub fn meters(&self) -> Result<f64, String> {
        match self {
            Length::Meters(v) => Ok(*v),
            Length::Text(s) => parse_length(s),
        }
    }
}

pub fn parse_length(text: &str) -> Result<f64, String> {
    let t = text.trim();
    let split = t
        .find(|c: char| c.is_alphabetic() || c == 'µ')
        .unwrap_or(t.len());
    let (num, unit) = t.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| format!("cannot read a length from {text:?}"))?;
    let scale = match unit.trim() {
        "" | "m" => 1.0,
        "cm" => 1e-2,
        "mm" => 1e-3,
        "um" | "µm" => 1e-6,
        other => return Err(format!("unknown length unit {other:?}")),
    };
    Ok(value * scale)
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    #[serde(default)]
    pub notes: Option<String>,
    pub controller: Controller,
    pub dt: f64,
    pub duration: f64,
    pub initial_p: [Length; 2],
    #[serde(default)]
    pub initial_s: f64,
    pub path: PathFile,
    pub ilos: IlosFile,
    pub swimmer: SwimmerFile,
    #[serde(default)]
    pub disturbance: DisturbanceSpec,
    #[serde(default)]
    pub d_hat: Estimate,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PathFile {
    Circle {
        #[serde(default = "origin")]
        center: [Length; 2],
        radius: Length,
    },
    Line {
        #[serde(default)]
        theta_r: f64,
    },
    Ellipse {
        #[serde(default = "origin")]
        center: [Length; 2],
        semi_x: Length,
        semi_y: Length,
    },
}

fn origin() -> [Length; 2] {
    [Length::Meters(0.0), Length::Meters(0.0)]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IlosFile {
    pub alpha_d: f64,
    pub sigma0: f64,
    pub delta_los: Length,
    pub k_d: f64,
    #[serde(default = "default_omega0")]
    pub omega0: f64,
}

fn default_omega0() -> f64 {
    TAU
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwimmerFile {
    pub beta: f64,
    #[serde(default)]
    pub f_so: Option<f64>,
    #[serde(default)]
    pub omega_so: Option<f64>,
    #[serde(default = "one")]
    pub e11: f64,
}

fn one() -> f64 {
    1.0
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub sim: SimConfig,
    pub notes: Option<String>,
}

/// Line (1-based) of the first occurrence of `"key"` in the source.
fn line_of(source: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    source
        .lines()
        .position(|l| l.contains(&needle))
        .map(|i| i + 1)
}

struct Ctx<'a> {
    source: &'a str,
}

impl Ctx<'_> {
    fn err(&self, field: &str, message: impl Into<String>) -> ConfigError {
        let key = field.rsplit('.').next().unwrap_or(field);
        ConfigError {
            line: line_of(self.source, key),
            field: Some(field.to_string()),
            message: message.into(),
        }
    }

    fn core(&self, section: &str, e: CoreError) -> ConfigError {
        match e {
            CoreError::InvalidParameter { name, reason } => {
                self.err(&format!("{section}.{name}"), reason)
            }
            other => self.err(section, other.to_string()),
        }
    }

    fn length(&self, field: &str, l: &Length) -> Result<f64, ConfigError> {
        let v = l.meters().map_err(|m| self.err(field, m))?;
        if !v.is_finite() {
            return Err(self.err(field, "must be finite"));
        }
        Ok(v)
    }

    fn point(&self, field: &str, p: &[Length; 2]) -> Result<Vec2, ConfigError> {
        Ok(Vec2::new(
            self.length(field, &p[0])?,
            self.length(field, &p[1])?,
        ))
    }
}

pub fn parse_scenario(source: &str) -> Result<Scenario, ConfigError> {
    let file: ScenarioFile = serde_json::from_str(source).map_err(|e| ConfigError {
        line: Some(e.line()),
        field: None,
        message: e.to_string(),
    })?;
    let cx = Ctx { source };
    if file.schema_version != SCHEMA_VERSION {
        return Err(cx.err(
            "schema_version",
            format!("unsupported version {}, expected {SCHEMA_VERSION}", file.schema_version),
        ));
    }

    let path = match &file.path {
        PathFile::Circle { center, radius } => {
            let center = cx.point("path.center", center)?;
            let radius = cx.length("path.radius", radius)?;
            PathSpec::circle(center, radius).map_err(|e| cx.core("path", e))?
        }
        PathFile::Line { theta_r } => PathSpec::line(*theta_r).map_err(|e| cx.core("path", e))?,
        PathFile::Ellipse {
            center,
            semi_x,
            semi_y,
        } => {
            let center = cx.point("path.center", center)?;
            let a = cx.length("path.semi_x", semi_x)?;
            let b = cx.length("path.semi_y", semi_y)?;
            PathSpec::Parametric(
                ParametricCurve::ellipse(center, a, b).map_err(|e| cx.core("path", e))?,
            )
        }
    };

    let il = &file.ilos;
    let ilos = IlosParams {
        alpha_d: il.alpha_d,
        sigma0: il.sigma0,
        delta_los: cx.length("ilos.delta_los", &il.delta_los)?,
        k_d: il.k_d,
        omega0: il.omega0,
    };
    ilos.validate().map_err(|e| cx.core("ilos", e))?;

    let sw = &file.swimmer;
    let omega_so = match (sw.f_so, sw.omega_so) {
        (Some(f), None) => TAU * f,
        (None, Some(w)) => w,
        _ => {
            return Err(cx.err(
                "swimmer",
                "give exactly one of `f_so` (Hz) and `omega_so` (rad/s)",
            ))
        }
    };
    let swimmer = SwimmerParams::new(sw.beta, omega_so, sw.e11).map_err(|e| {
        let e = match e {
            CoreError::InvalidParameter { name: "omega_so", reason } if sw.f_so.is_some() => {
                CoreError::InvalidParameter { name: "f_so", reason }
            }
            e => e,
        };
        cx.core("swimmer", e)
    })?;

    file.disturbance
        .validate()
        .map_err(|e| cx.core("disturbance", e))?;

    let sim = SimConfig {
        dt: file.dt,
        duration: file.duration,
        initial_p: cx.point("initial_p", &file.initial_p)?,
        initial_s: file.initial_s,
        controller: file.controller,
        path,
        ilos,
        swimmer,
        disturbance: file.disturbance,
        estimate: file.d_hat,
        seed: file.seed,
    };
    sim.validate().map_err(|e| match e {
        CoreError::InvalidParameter { name, reason } => cx.err(name, reason),
        other => cx.err("scenario", other.to_string()),
    })?;
    Ok(Scenario {
        sim,
        notes: file.notes,
    })
}

pub fn load_scenario(path: &Path) -> Result<(Scenario, Vec<u8>), ConfigError> {
    let bytes = std::fs::read(path).map_err(|e| ConfigError {
        line: None,
        field: None,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    let text = std::str::from_utf8(&bytes).map_err(|_| ConfigError {
        line: None,
        field: None,
        message: "file is not UTF-8".into(),
    })?;
    Ok((parse_scenario(text)?, bytes))
}
