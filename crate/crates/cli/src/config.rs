//! Experiment configuration: a versioned JSON document. Every section has
//! defaults, so `{"schema_version": 1}` is a complete config.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use qfridge::mpemba::{OptimizerConfig, UnitaryFamily};
use qfridge::RefrigeratorParams;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub model: RefrigeratorParams,
    #[serde(default)]
    pub time_grid: GridSpec,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default = "default_family")]
    pub family: UnitaryFamily,
    #[serde(default = "SweepSpec::steady_default")]
    pub steady_sweep: SweepSpec,
    #[serde(default = "SweepSpec::timing_default")]
    pub timing_sweep: SweepSpec,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_family() -> UnitaryFamily {
    UnitaryFamily::Global
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            model: RefrigeratorParams::default(),
            time_grid: GridSpec::default(),
            thresholds: Thresholds::default(),
            optimizer: OptimizerConfig::default(),
            family: default_family(),
            steady_sweep: SweepSpec::steady_default(),
            timing_sweep: SweepSpec::timing_default(),
            output_dir: None,
        }
    }
}

/// Log-spaced sampling in units of the slowest relaxation time `1/|Re λ2|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub start_factor: f64,
    pub end_factor: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            start_factor: 0.1,
            end_factor: 20.0,
            points: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Trace-distance threshold defining the steady-state time.
    pub epsilon: f64,
    /// Qubit-temperature tolerance for the cooling (settling) time.
    pub temperature_tolerance: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            epsilon: qfridge::dynamics::DEFAULT_EPSILON,
            temperature_tolerance: 1e-3,
        }
    }
}

/// A swept model parameter. The tied variants set several couplings at once.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    G,
    KappaC,
    KappaH,
    KappaW,
    /// `κ_c = κ_h = κ_w`.
    Kappa,
    /// `κ_h = κ_w`.
    KappaHw,
}

impl SweepParam {
    pub fn apply(self, p: &mut RefrigeratorParams, value: f64) {
        match self {
            SweepParam::G => p.g = value,
            SweepParam::KappaC => p.kappa_c = value,
            SweepParam::KappaH => p.kappa_h = value,
            SweepParam::KappaW => p.kappa_w = value,
            SweepParam::Kappa => {
                p.kappa_c = value;
                p.kappa_h = value;
                p.kappa_w = value;
            }
            SweepParam::KappaHw => {
                p.kappa_h = value;
                p.kappa_w = value;
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::G => "g",
            SweepParam::KappaC => "kappa_c",
            SweepParam::KappaH => "kappa_h",
            SweepParam::KappaW => "kappa_w",
            SweepParam::Kappa => "kappa",
            SweepParam::KappaHw => "kappa_hw",
        }
    }

    fn default_spacing(self) -> Spacing {
        match self {
            SweepParam::G => Spacing::Linear,
            _ => Spacing::Log,
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub param: SweepParam,
    pub start: f64,
    pub end: f64,
    pub points: usize,
    /// Linear for `g`, logarithmic for couplings unless given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<Spacing>,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        let n = self.points;
        if n == 1 {
            return vec![self.start];
        }
        let f = |i: usize| i as f64 / (n - 1) as f64;
        let mut v: Vec<f64> = match self.spacing.unwrap_or(self.param.default_spacing()) {
            Spacing::Linear => (0..n)
                .map(|i| self.start + (self.end - self.start) * f(i))
                .collect(),
            Spacing::Log => {
                let (a, b) = (self.start.log10(), self.end.log10());
                (0..n).map(|i| 10f64.powf(a + (b - a) * f(i))).collect()
            }
        };
        // endpoints exactly as configured
        v[0] = self.start;
        v[n - 1] = self.end;
        v
    }

    fn validate(&self, what: &str) -> Result<()> {
        ensure!(self.points >= 1, "{what}: at least one point required");
        ensure!(
            self.start.is_finite() && self.end.is_finite(),
            "{what}: range must be finite"
        );
        if self.spacing.unwrap_or(self.param.default_spacing()) == Spacing::Log {
            ensure!(
                self.start > 0.0 && self.end > 0.0,
                "{what}: log spacing needs a positive range"
            );
        }
        ensure!(
            self.start >= 0.0 && self.end >= 0.0,
            "{what}: values must be non-negative"
        );
        Ok(())
    }
}

/// Two-dimensional grid; rows are emitted with `y` varying fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub x: Axis,
    pub y: Axis,
}

impl SweepSpec {
    /// Cooling map over `g` and `κ_h = κ_w` (with `κ_c` from the model).
    pub fn steady_default() -> Self {
        Self {
            x: Axis {
                param: SweepParam::G,
                start: 0.01,
                end: 0.6,
                points: 30,
                spacing: None,
            },
            y: Axis {
                param: SweepParam::KappaHw,
                start: 1e-5,
                end: 1e-2,
                points: 30,
                spacing: None,
            },
        }
    }

    /// Mpemba time over `g` and tied couplings.
    pub fn timing_default() -> Self {
        Self {
            x: Axis {
                param: SweepParam::G,
                start: 1e-3,
                end: 0.3,
                points: 6,
                spacing: None,
            },
            y: Axis {
                param: SweepParam::Kappa,
                start: 1e-5,
                end: 1e-3,
                points: 6,
                spacing: None,
            },
        }
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        let ys = self.y.values();
        self.x
            .values()
            .into_iter()
            .flat_map(|x| ys.iter().map(move |&y| (x, y)))
            .collect()
    }

    fn validate(&self, what: &str) -> Result<()> {
        self.x.validate(&format!("{what}.x"))?;
        self.y.validate(&format!("{what}.y"))?;
        ensure!(
            self.x.param != self.y.param,
            "{what}: both axes sweep `{}`",
            self.x.param
        );
        Ok(())
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        if cfg.schema_version != SCHEMA_VERSION {
            bail!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            );
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every numeric bound; run before any computation.
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.optimizer.validate()?;
        let g = &self.time_grid;
        ensure!(
            g.start_factor > 0.0 && g.end_factor > g.start_factor && g.points >= 2,
            "time_grid: need 0 < start_factor < end_factor and at least two points"
        );
        ensure!(
            self.thresholds.epsilon > 0.0,
            "thresholds.epsilon must be positive"
        );
        ensure!(
            self.thresholds.temperature_tolerance > 0.0,
            "thresholds.temperature_tolerance must be positive"
        );
        self.steady_sweep.validate("steady_sweep")?;
        self.timing_sweep.validate("timing_sweep")?;
        Ok(())
    }
}
