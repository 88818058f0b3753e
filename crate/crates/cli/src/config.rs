//! Run configuration: strict JSON, frequencies in units of `ω_m`.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use freezegate::channel::{FidelityMethod, Regime};
use freezegate::propagator::PropagatorConfig;
use freezegate::{Error, Param, ProtocolParams};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    EffectiveModel,
    Floquet,
    Trajectory,
    Fidelity,
    Scan,
    Optimize,
    GateTimeSweep,
    ReproducePaper,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().expect("string"))
    }
}

/// Evenly spaced grid; `log` spaces in `ln`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridRange {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    #[serde(default)]
    pub log: bool,
}

impl GridRange {
    pub fn values(&self) -> Vec<f64> {
        if self.log {
            freezegate::scan::geomspace(self.lo, self.hi, self.n)
        } else {
            freezegate::floquet::linspace(self.lo, self.hi, self.n)
        }
    }
}

/// Command-specific settings; absent fields take per-command defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Options {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regime: Option<Regime>,
    /// Sweep parameter (floquet) or varied parameter (scan).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parameter: Option<Param>,
    /// Explicit grid; takes precedence over `range`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub range: Option<GridRange>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bracket: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    /// Trajectory samples or Haar samples.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Initial dressed product state, e.g. `gm_e1_g2`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<FidelityMethod>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub free: Option<Vec<Param>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default = "ProtocolParams::baseline")]
    pub params: ProtocolParams,
    #[serde(default)]
    pub cfg: PropagatorConfig,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub options: Options,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn keyed(prefix: &str, e: Error) -> anyhow::Error {
    match e {
        Error::InvalidParam { field, reason } => anyhow::anyhow!("{prefix}.{field}: {reason}"),
        other => anyhow::anyhow!("{prefix}: {other}"),
    }
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            params: ProtocolParams::baseline(),
            cfg: PropagatorConfig::default(),
            output_dir: default_output(),
            seed: 0,
            options: Options::default(),
        }
    }

    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let c: Self = serde_json::from_str(text).context("config")?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.params.omega_m != 1.0 {
            bail!(
                "params.omega_m: frequencies are in units of omega_m, which must be 1 (got {})",
                self.params.omega_m
            );
        }
        self.params.validate().map_err(|e| keyed("params", e))?;
        self.cfg.validate().map_err(|e| keyed("cfg", e))?;
        let o = &self.options;
        if let Some(r) = &o.range {
            if r.n < 2 {
                bail!("options.range.n: needs at least 2 points, got {}", r.n);
            }
            if !(r.lo.is_finite() && r.hi.is_finite()) || r.lo == r.hi {
                bail!("options.range: lo and hi must be finite and distinct");
            }
            if r.log && (r.lo <= 0.0 || r.hi <= 0.0) {
                bail!("options.range: log spacing needs positive bounds");
            }
        }
        if let Some(t) = o.t_final {
            if !(t.is_finite() && t >= 0.0) {
                bail!("options.t_final: must be finite and >= 0, got {t}");
            }
        }
        if let Some(s) = &o.initial {
            freezegate::floquet::BranchLabel::parse(s).map_err(|e| keyed("options.initial", e))?;
        }
        Ok(())
    }

    /// Grid from `options.grid`, then `options.range`, then `default`.
    pub fn grid_or(&self, default: GridRange) -> Vec<f64> {
        self.options
            .grid
            .clone()
            .unwrap_or_else(|| self.options.range.unwrap_or(default).values())
    }
}
