//! Run configuration: strict JSON schema, `--set` overrides and semantic checks.

use std::f64::consts::TAU;
use std::fmt;
use std::path::{Path, PathBuf};

use fracwave::timestepper::BreakingResponse;
use fracwave::{
    Coefficients, FractionalOrder, Grid, Integrator, ModelKind, ModelParams, SolverConfig,
    StepSize,
};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// A configuration problem; always exit code 1.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub grid: GridSection,
    pub initial: Initial,
    #[serde(default)]
    pub solver: SolverSection,
    pub output: OutputSection,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelKind,
    pub nu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Coefficients>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(rename = "L", default = "default_length")]
    pub length: f64,
    #[serde(rename = "N")]
    pub n: usize,
}

fn default_length() -> f64 {
    TAU
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Initial {
    Zero,
    Constant {
        value: f64,
    },
    /// `amplitude · cos(2πk x / L + phase)`
    Mode {
        k: u32,
        amplitude: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `amplitude · exp(−((x − center)/width)²)`, center defaulting to `L/2`
    Gaussian {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<f64>,
        width: f64,
        amplitude: f64,
    },
    /// A snapshot CSV (`x,u` header) on the configured grid.
    File {
        path: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum DtSetting {
    Fixed(f64),
    Named(DtName),
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "lowercase")]
pub enum DtName {
    Auto,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    /// Defaults to the model's preferred integrator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrator: Option<Integrator>,
    #[serde(default = "auto")]
    pub dt: DtSetting,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    pub t_end: f64,
    /// Defaults to `t_end`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_every: Option<f64>,
    #[serde(default = "yes")]
    pub dealias: bool,
    #[serde(default = "default_slope")]
    pub breaking_slope_threshold: f64,
    #[serde(default = "default_tail")]
    pub tail_fraction_threshold: f64,
    #[serde(default = "halt")]
    pub on_breaking: BreakingResponse,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection {
            integrator: None,
            dt: auto(),
            cfl: default_cfl(),
            t_end: 1.0,
            snapshot_every: None,
            dealias: true,
            breaking_slope_threshold: default_slope(),
            tail_fraction_threshold: default_tail(),
            on_breaking: halt(),
        }
    }
}

fn auto() -> DtSetting {
    DtSetting::Named(DtName::Auto)
}
fn default_cfl() -> f64 {
    SolverConfig::DEFAULT_CFL
}
fn yes() -> bool {
    true
}
fn default_slope() -> f64 {
    SolverConfig::DEFAULT_SLOPE_THRESHOLD
}
fn default_tail() -> f64 {
    SolverConfig::DEFAULT_TAIL_THRESHOLD
}
fn halt() -> BreakingResponse {
    BreakingResponse::Halt
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    #[serde(default)]
    pub snapshot_format: SnapshotFormat,
    #[serde(default = "yes")]
    pub manifest: bool,
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "lowercase")]
pub enum SnapshotFormat {
    #[default]
    Csv,
}

/// Reads `path` as JSON, applies `key=value` overrides, and deserializes into `T`.
///
/// Without overrides the file is deserialized directly so errors carry the
/// line and column; with overrides they carry the dotted key path.
pub fn load<T: DeserializeOwned>(path: &Path, overrides: &[String]) -> Result<T, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| bad(format!("cannot read config {}: {e}", path.display())))?;
    let describe = |e: serde_path_to_error::Error<serde_json::Error>| {
        let path_str = e.path().to_string();
        let inner = e.into_inner();
        if path_str == "." || path_str.is_empty() {
            bad(format!("{}: {inner}", path.display()))
        } else {
            bad(format!("{}: at `{path_str}`: {inner}", path.display()))
        }
    };
    if overrides.is_empty() {
        let mut de = serde_json::Deserializer::from_str(&text);
        let value = serde_path_to_error::deserialize(&mut de).map_err(describe)?;
        de.end().map_err(|e| bad(format!("{}: {e}", path.display())))?;
        return Ok(value);
    }
    let mut value: Value = serde_json::from_str(&text)
        .map_err(|e| bad(format!("{}: {e}", path.display())))?;
    apply_overrides(&mut value, overrides)?;
    from_value(value).map_err(|e| bad(format!("{} (after --set): {}", path.display(), e.0)))
}

/// Deserializes a JSON value, naming the offending key on failure.
pub fn from_value<T: DeserializeOwned>(value: Value) -> Result<T, ConfigError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let p = e.path().to_string();
        bad(format!("at `{p}`: {}", e.into_inner()))
    })
}

/// Applies `a.b.c=value` assignments; values parse as JSON, falling back to strings.
pub fn apply_overrides(root: &mut Value, overrides: &[String]) -> Result<(), ConfigError> {
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| bad(format!("--set expects key=value, got `{item}`")))?;
        let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        let mut node = &mut *root;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            if part.is_empty() {
                return Err(bad(format!("--set: empty path segment in `{key}`")));
            }
            let obj = match node {
                Value::Object(map) => map,
                _ => {
                    return Err(bad(format!(
                        "--set: `{}` is not an object",
                        parts[..i].join(".")
                    )))
                }
            };
            if i + 1 == parts.len() {
                obj.insert(part.to_string(), parsed.clone());
                break;
            }
            node = obj
                .entry(part.to_string())
                .or_insert_with(|| Value::Object(Default::default()));
        }
    }
    Ok(())
}

/// Everything a run needs, validated.
pub struct Prepared {
    pub grid: Grid,
    pub model: ModelParams,
    pub solver: SolverConfig,
}

impl RunConfig {
    pub fn prepare(&self, allow_low_nu: bool) -> Result<Prepared, ConfigError> {
        prepare_parts(&self.model, &self.grid, &self.initial, &self.solver, allow_low_nu)
    }
}

pub fn prepare_parts(
    model: &ModelSection,
    grid: &GridSection,
    initial: &Initial,
    solver: &SolverSection,
    allow_low_nu: bool,
) -> Result<Prepared, ConfigError> {
    let grid = Grid::new(grid.length, grid.n).map_err(|e| bad(format!("grid: {e}")))?;
    let params = model.params(allow_low_nu)?;
    let solver_cfg = solver.to_config(model.kind)?;
    if solver_cfg.integrator == Integrator::Ifrk4 && model.kind != ModelKind::Fkdv {
        return Err(bad(format!(
            "solver.integrator: ifrk4 requires model.kind = fkdv, got {}",
            model.kind.name()
        )));
    }
    initial.validate(&grid)?;
    Ok(Prepared {
        grid,
        model: params,
        solver: solver_cfg,
    })
}

/// Validates ν: at least 1, or at least 1/2 with `allow_low_nu`.
pub fn order(nu: f64, allow_low_nu: bool) -> Result<FractionalOrder, ConfigError> {
    if allow_low_nu {
        FractionalOrder::new(nu)
    } else {
        FractionalOrder::strict(nu).map_err(|e| {
            fracwave::Error::Parameter(format!("{e} (pass --allow-low-nu to permit nu >= 1/2)"))
        })
    }
    .map_err(|e| bad(format!("nu: {e}")))
}

impl ModelSection {
    pub fn params(&self, allow_low_nu: bool) -> Result<ModelParams, ConfigError> {
        let nu = order(self.nu, allow_low_nu).map_err(|e| bad(format!("model.{}", e.0)))?;
        let mut model = ModelParams::with_order(self.kind, nu);
        if let Some(c) = &self.coefficients {
            model = model
                .with_coefficients(*c)
                .map_err(|e| bad(format!("model.coefficients: {e}")))?;
        }
        Ok(model)
    }
}

impl SolverSection {
    pub fn to_config(&self, kind: ModelKind) -> Result<SolverConfig, ConfigError> {
        let mut cfg = SolverConfig::new(kind, self.t_end);
        if let Some(i) = self.integrator {
            cfg.integrator = i;
        }
        cfg.dt = match self.dt {
            DtSetting::Fixed(dt) => StepSize::Fixed(dt),
            DtSetting::Named(DtName::Auto) => StepSize::Auto,
        };
        cfg.cfl = self.cfl;
        cfg.snapshot_every = self.snapshot_every.unwrap_or(cfg.snapshot_every);
        cfg.dealias = self.dealias;
        cfg.breaking_slope_threshold = self.breaking_slope_threshold;
        cfg.tail_fraction_threshold = self.tail_fraction_threshold;
        cfg.on_breaking = self.on_breaking;
        cfg.validate().map_err(|e| bad(format!("solver: {e}")))?;
        Ok(cfg)
    }
}

impl Initial {
    pub fn validate(&self, grid: &Grid) -> Result<(), ConfigError> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(bad(format!("initial.{name} must be finite")))
            }
        };
        match self {
            Initial::Zero | Initial::File { .. } => Ok(()),
            Initial::Constant { value } => finite("value", *value),
            Initial::Mode { k, amplitude, phase } => {
                finite("amplitude", *amplitude)?;
                finite("phase", *phase)?;
                if *k as usize >= grid.n_points() / 2 {
                    return Err(bad(format!(
                        "initial.k must be below N/2 = {}, got {k}",
                        grid.n_points() / 2
                    )));
                }
                Ok(())
            }
            Initial::Gaussian {
                center,
                width,
                amplitude,
            } => {
                finite("amplitude", *amplitude)?;
                finite("center", center.unwrap_or(0.0))?;
                if !(width.is_finite() && *width > 0.0) {
                    return Err(bad(format!("initial.width must be positive, got {width}")));
                }
                Ok(())
            }
        }
    }

    /// Same datum with its amplitude replaced (amplitude sweeps).
    pub fn with_amplitude(&self, amplitude: f64) -> Result<Initial, ConfigError> {
        Ok(match self {
            Initial::Constant { .. } => Initial::Constant { value: amplitude },
            Initial::Mode { k, phase, .. } => Initial::Mode {
                k: *k,
                amplitude,
                phase: *phase,
            },
            Initial::Gaussian { center, width, .. } => Initial::Gaussian {
                center: *center,
                width: *width,
                amplitude,
            },
            Initial::Zero | Initial::File { .. } => {
                return Err(bad("an amplitude sweep needs constant, mode or gaussian initial data"))
            }
        })
    }
}
