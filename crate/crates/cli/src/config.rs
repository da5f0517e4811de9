//! JSON run configuration.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use waveobs_core::obstime::Mode;
use waveobs_core::problem::{catalog_spec, BcSpec, ProblemSpec, Side};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Either a full problem, or `{"catalog": name}` with optional overrides.
    pub problem: Value,
    pub grid: GridSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeFlag>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub simulate: SimulateOptions,
    #[serde(default)]
    pub observe: ObserveOptions,
    #[serde(default)]
    pub reconstruct: ReconstructConfig,
    #[serde(default)]
    pub obstime: ObstimeOptions,
    #[serde(default)]
    pub convergence: ConvergenceOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spherical: Option<SphericalOptions>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub nt: usize,
    /// Observation time `T`, measured from the problem's `t0`.
    pub duration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ModeFlag {
    #[value(name = "two_sided")]
    TwoSided,
    #[value(name = "one_sided_left")]
    OneSidedLeft,
    #[value(name = "one_sided_right")]
    OneSidedRight,
}

impl ModeFlag {
    pub fn mode(self) -> Mode {
        match self {
            ModeFlag::TwoSided => Mode::TwoSided,
            _ => Mode::OneSided,
        }
    }

    pub fn observed(self) -> Option<Side> {
        match self {
            ModeFlag::TwoSided => None,
            ModeFlag::OneSidedLeft => Some(Side::Left),
            ModeFlag::OneSidedRight => Some(Side::Right),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModeFlag::TwoSided => "two_sided",
            ModeFlag::OneSidedLeft => "one_sided_left",
            ModeFlag::OneSidedRight => "one_sided_right",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateOptions {
    /// Number of evenly spaced time levels written out.
    pub slices: usize,
}

impl Default for SimulateOptions {
    fn default() -> Self {
        SimulateOptions { slices: 11 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObserveOptions {
    pub trials: usize,
    pub amplitude: f64,
}

impl Default for ObserveOptions {
    fn default() -> Self {
        ObserveOptions {
            trials: 0,
            amplitude: 0.01,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconstructConfig {
    /// Spatial resolution of the backward solve; the forward `nx` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nx: Option<usize>,
    pub enforce_time_condition: bool,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        ReconstructConfig {
            nx: None,
            enforce_time_condition: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObstimeOptions {
    pub t0_start: f64,
    pub t0_stop: f64,
    pub t0_step: f64,
    pub horizon: f64,
}

impl Default for ObstimeOptions {
    fn default() -> Self {
        ObstimeOptions {
            t0_start: -2.0,
            t0_stop: 2.0,
            t0_step: 0.1,
            horizon: 50.0,
        }
    }
}

impl ObstimeOptions {
    pub fn t0_grid(&self) -> anyhow::Result<Vec<f64>> {
        if !(self.t0_step > 0.0) || !(self.t0_stop >= self.t0_start) {
            bail!("obstime: need t0_step > 0 and t0_stop >= t0_start");
        }
        let n = ((self.t0_stop - self.t0_start) / self.t0_step + 1e-9).floor() as usize;
        Ok((0..=n).map(|k| self.t0_start + k as f64 * self.t0_step).collect())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergenceOptions {
    pub levels: usize,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        ConvergenceOptions { levels: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Delegate {
    Simulate,
    Observe,
    Reconstruct,
    Obstime,
    Convergence,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphericalOptions {
    pub dim: u32,
    pub r1: f64,
    pub r2: f64,
    #[serde(default = "default_delegate")]
    pub delegate: Delegate,
}

fn default_delegate() -> Delegate {
    Delegate::Reconstruct
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogRef {
    catalog: String,
    name: Option<String>,
    c: Option<String>,
    f: Option<String>,
    length: Option<f64>,
    t0: Option<f64>,
    window: Option<f64>,
    bc_left: Option<BcSpec>,
    bc_right: Option<BcSpec>,
    phi: Option<String>,
    psi: Option<String>,
}

/// Schema violations in the configuration.
#[derive(Debug)]
pub struct SchemaError(pub String);

impl std::fmt::Display for SchemaError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config: {}", self.0)
    }
}

impl std::error::Error for SchemaError {}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> anyhow::Result<RunConfig> {
        let config: RunConfig = serde_json::from_str(text).map_err(|e| SchemaError(e.to_string()))?;
        config.problem_spec()?;
        Ok(config)
    }

    pub fn problem_spec(&self) -> anyhow::Result<ProblemSpec> {
        let schema = |e: serde_json::Error| SchemaError(format!("problem: {e}"));
        if self.problem.get("catalog").is_none() {
            return Ok(serde_json::from_value(self.problem.clone()).map_err(schema)?);
        }
        let r: CatalogRef = serde_json::from_value(self.problem.clone()).map_err(schema)?;
        let mut spec = catalog_spec(&r.catalog)?;
        if r.name.is_some() {
            spec.name = r.name;
        }
        macro_rules! apply {
            ($($field:ident),*) => {
                $(if let Some(v) = r.$field {
                    spec.$field = v;
                })*
            };
        }
        apply!(c, f, length, t0, window, bc_left, bc_right, phi, psi);
        Ok(spec)
    }
}
