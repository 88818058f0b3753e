//! Single-parameter scans of the on-regime infidelity and off-regime ratio.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::infidelity_on;
use crate::dressed::{effective_model, off_ratio, solve_omega_d_on, solve_omega_d_on_auto};
use crate::error::{Error, Result};
use crate::params::{Param, ProtocolParams};
use crate::propagator::PropagatorConfig;

/// Parameters a scan may vary.
pub const SCANNABLE: [Param; 5] = [
    Param::JM1,
    Param::DriveAmp,
    Param::Omega2,
    Param::J12,
    Param::OmegaDOff,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    pub varied: Param,
    pub grid: Vec<f64>,
    pub fixed: ProtocolParams,
    /// Root bracket for `ω_d^on`; auto-widened from `(0.9 ω_1, ω_1)` if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bracket: Option<(f64, f64)>,
}

impl ScanSpec {
    pub fn validate(&self) -> Result<()> {
        if !SCANNABLE.contains(&self.varied) {
            return Err(Error::InvalidParam {
                field: "varied",
                reason: format!("`{}` cannot be scanned", self.varied),
            });
        }
        if self.grid.len() < 2 {
            return Err(Error::InvalidParam {
                field: "grid",
                reason: "needs at least 2 points".into(),
            });
        }
        let up = self.grid.windows(2).all(|w| w[0] < w[1]);
        let down = self.grid.windows(2).all(|w| w[0] > w[1]);
        if !(up || down) {
            return Err(Error::InvalidParam {
                field: "grid",
                reason: "must be strictly monotone".into(),
            });
        }
        self.fixed.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanRow {
    pub value: f64,
    /// NaN when the point failed.
    pub infidelity_on: f64,
    pub off_ratio: f64,
    pub omega_d_on: f64,
    pub t_gate: f64,
    /// `ok`, or the failure class and message.
    pub status: String,
}

impl ScanRow {
    pub const HEADER: [&'static str; 6] =
        ["value", "infidelity_on", "off_ratio", "omega_d_on", "t_gate", "status"];

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

fn failure(e: &Error) -> String {
    let class = match e {
        Error::NoRootInBracket { .. } | Error::MissingDriveFrequency => "root-failure",
        Error::StepTooCoarse { .. } | Error::NonUnitary { .. } => "convergence-failure",
        _ => "error",
    };
    format!("{class}: {e}")
}

/// One scan point. Failures are recorded in the row.
pub fn scan_point(
    fixed: &ProtocolParams,
    varied: Param,
    value: f64,
    bracket: Option<(f64, f64)>,
    cfg: PropagatorConfig,
) -> ScanRow {
    let mut p = fixed.with(varied, value);
    let nan = f64::NAN;
    let mut row = ScanRow {
        value,
        infidelity_on: nan,
        off_ratio: off_ratio(&p),
        omega_d_on: nan,
        t_gate: nan,
        status: "ok".into(),
    };
    let root = match (p.omega_d_on, bracket) {
        (Some(w), _) => Ok(w),
        (None, Some(b)) => solve_omega_d_on(&p, b).map(|r| r.omega_d),
        (None, None) => solve_omega_d_on_auto(&p).map(|r| r.omega_d),
    };
    match root {
        Ok(w) => {
            p.omega_d_on = Some(w);
            row.omega_d_on = w;
            row.t_gate = effective_model(&p, w).t_gate;
        }
        Err(e) => {
            row.status = failure(&e);
            return row;
        }
    }
    match infidelity_on(&p, cfg) {
        Ok(i) => row.infidelity_on = i,
        Err(e) => row.status = failure(&e),
    }
    row
}

/// Evaluates every grid point (in parallel); row order follows the grid.
pub fn run_scan(spec: &ScanSpec, cfg: PropagatorConfig) -> Result<Vec<ScanRow>> {
    spec.validate()?;
    cfg.validate()?;
    Ok(spec
        .grid
        .par_iter()
        .map(|&v| scan_point(&spec.fixed, spec.varied, v, spec.bracket, cfg))
        .collect())
}

/// Index of the lowest successful point, if it is not on the grid boundary.
pub fn interior_minimum(rows: &[ScanRow]) -> Option<usize> {
    let (k, _) = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_ok())
        .min_by(|a, b| a.1.infidelity_on.total_cmp(&b.1.infidelity_on))?;
    (k > 0 && k + 1 < rows.len()).then_some(k)
}

/// `n` values spaced evenly in `ln` between `lo` and `hi`.
pub fn geomspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    crate::floquet::linspace(lo.ln(), hi.ln(), n)
        .into_iter()
        .map(f64::exp)
        .collect()
}
