//! Joint calibration of the protocol parameters by restarted Nelder–Mead,
//! and the gate-time trade-off sweep built on it.
//!
//! Couplings are searched in `ln` coordinates, drive amplitude and `ω_2`
//! linearly. Failed evaluations score [`PENALTY`].

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{evaluate_point, infidelity_on};
use crate::dressed::resolve_omega_d_on;
use crate::error::{Error, Result};
use crate::params::{Param, ProtocolParams};
use crate::propagator::PropagatorConfig;

pub const OPTIMIZABLE: [Param; 4] = [Param::JM1, Param::J12, Param::DriveAmp, Param::Omega2];
pub const PENALTY: f64 = 1.0;
pub const RESTARTS: usize = 3;
pub const MIN_BUDGET: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSettings {
    /// Resolution used while searching.
    pub search: PropagatorConfig,
    /// Resolution of the final re-evaluation reported in [`OptResult`].
    pub report: PropagatorConfig,
    /// Stop when the simplex objective spread falls below
    /// `f_tol · max(|f_best|, 1e-12)`.
    pub f_tol: f64,
    /// Stop when every vertex is within `x_tol` of the best (search units).
    pub x_tol: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            search: PropagatorConfig::default().with_steps(128).unchecked(),
            report: PropagatorConfig::default(),
            f_tol: 1e-4,
            x_tol: 1e-7,
        }
    }
}

impl OptimizerSettings {
    /// Reduced resolution for smoke runs.
    pub fn quick() -> Self {
        Self {
            report: PropagatorConfig::default().with_steps(128).unchecked(),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEntry {
    pub restart: usize,
    pub params: ProtocolParams,
    pub infidelity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptResult {
    pub best_params: ProtocolParams,
    /// Re-evaluated at the report resolution.
    pub best_infidelity: f64,
    /// Objective at the search resolution.
    pub search_infidelity: f64,
    pub off_ratio: f64,
    pub t_gate: f64,
    pub evaluations: usize,
    /// False when the budget ran out before the simplex contracted.
    pub converged: bool,
    pub trace: Vec<TraceEntry>,
    pub warnings: Vec<String>,
}

fn to_coord(param: Param, v: f64) -> f64 {
    match param {
        Param::JM1 | Param::J12 => v.ln(),
        _ => v,
    }
}

fn from_coord(param: Param, x: f64) -> f64 {
    match param {
        Param::JM1 | Param::J12 => x.exp(),
        _ => x,
    }
}

/// Initial simplex edge per coordinate.
fn edge(param: Param, p: &ProtocolParams) -> f64 {
    match param {
        Param::JM1 | Param::J12 => 0.15,
        Param::DriveAmp => 0.1 * p.drive_amp.max(1e-3),
        _ => 2e-4,
    }
}

fn apply(base: &ProtocolParams, free: &[Param], x: &[f64]) -> ProtocolParams {
    free.iter()
        .zip(x)
        .fold(*base, |p, (&param, &xi)| p.with(param, from_coord(param, xi)))
}

/// Rounds to 12 significant digits for cache keys.
fn key(x: &[f64]) -> Vec<u64> {
    x.iter()
        .map(|&v| format!("{v:.11e}").parse::<f64>().unwrap_or(v).to_bits())
        .collect()
}

struct Objective<'a> {
    base: &'a ProtocolParams,
    free: &'a [Param],
    cfg: PropagatorConfig,
    cache: HashMap<Vec<u64>, f64>,
    budget: usize,
    evaluations: usize,
    restart: usize,
    trace: Vec<TraceEntry>,
}

trait Evaluator {
    fn eval(&mut self, x: &[f64]) -> f64;
    fn exhausted(&self) -> bool;
}

impl Evaluator for Objective<'_> {
    fn exhausted(&self) -> bool {
        self.evaluations >= self.budget
    }

    fn eval(&mut self, x: &[f64]) -> f64 {
        let k = key(x);
        if let Some(&v) = self.cache.get(&k) {
            return v;
        }
        let p = apply(self.base, self.free, x);
        let v = if p.validate().is_ok() {
            infidelity_on(&p, self.cfg).unwrap_or(PENALTY)
        } else {
            PENALTY
        };
        self.evaluations += 1;
        self.cache.insert(k, v);
        self.trace.push(TraceEntry {
            restart: self.restart,
            params: p,
            infidelity: v,
        });
        v
    }
}

struct Run {
    x: Vec<f64>,
    f: f64,
    converged: bool,
}

/// Standard Nelder–Mead (reflection 1, expansion 2, contraction ½, shrink ½)
/// until convergence or budget exhaustion.
fn nelder_mead(obj: &mut impl Evaluator, start: Vec<Vec<f64>>, f_tol: f64, x_tol: f64) -> Run {
    let mut simplex: Vec<(Vec<f64>, f64)> = start
        .into_iter()
        .map(|x| {
            let f = obj.eval(&x);
            (x, f)
        })
        .collect();
    let n = simplex.len() - 1;
    let combine = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(ai, bi)| ai + t * (bi - ai)).collect()
    };
    let mut converged = false;
    while !obj.exhausted() {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[n].1);
        let spread = simplex
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if worst - best <= f_tol * best.abs().max(1e-12) || spread <= x_tol {
            converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..simplex[0].0.len())
            .map(|i| simplex[..n].iter().map(|(x, _)| x[i]).sum::<f64>() / n as f64)
            .collect();
        let xr = combine(&centroid, &simplex[n].0, -1.0);
        let fr = obj.eval(&xr);
        if fr < simplex[0].1 {
            let xe = combine(&centroid, &simplex[n].0, -2.0);
            let fe = obj.eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = combine(&centroid, &xr, 0.5);
                let fc = obj.eval(&xc);
                (xc, fc)
            } else {
                let xc = combine(&centroid, &simplex[n].0, 0.5);
                let fc = obj.eval(&xc);
                (xc, fc)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let x0 = simplex[0].0.clone();
                for v in simplex.iter_mut().skip(1) {
                    if obj.exhausted() {
                        break;
                    }
                    let x = combine(&x0, &v.0, 0.5);
                    let f = obj.eval(&x);
                    *v = (x, f);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, f) = simplex.swap_remove(0);
    Run { x, f, converged }
}

/// Restart 0 uses the axis-aligned simplex at the start point; later
/// restarts shift the start by up to one edge per coordinate and use a
/// randomly signed, randomly scaled simplex, from stream `r` of `seed`.
fn initial_simplex(x0: &[f64], edges: &[f64], restart: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    let centre: Vec<f64> = if restart == 0 {
        x0.to_vec()
    } else {
        x0.iter()
            .zip(edges)
            .map(|(x, e)| x + e * rng.random_range(-1.0..1.0))
            .collect()
    };
    let mut simplex = vec![centre.clone()];
    for i in 0..x0.len() {
        let mut v = centre.clone();
        let scale = if restart == 0 {
            1.0
        } else {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            sign * rng.random_range(0.5..1.5)
        };
        v[i] += scale * edges[i];
        simplex.push(v);
    }
    simplex
}

/// Minimizes the on-regime infidelity over `free` from `baseline`.
///
/// The budget (objective evaluations, cache hits excluded) is split evenly
/// over [`RESTARTS`] restarts, which run in parallel. The winner is
/// re-evaluated at `settings.report`.
pub fn optimize_joint(
    baseline: &ProtocolParams,
    free: &[Param],
    budget: usize,
    seed: u64,
    settings: &OptimizerSettings,
) -> Result<OptResult> {
    baseline.validate()?;
    if free.is_empty() || free.iter().any(|p| !OPTIMIZABLE.contains(p)) {
        return Err(Error::InvalidParam {
            field: "free",
            reason: format!("must be a non-empty subset of {OPTIMIZABLE:?}"),
        });
    }
    let mut seen = free.to_vec();
    seen.sort();
    seen.dedup();
    if seen.len() != free.len() {
        return Err(Error::InvalidParam {
            field: "free",
            reason: "duplicate parameter".into(),
        });
    }
    if budget < MIN_BUDGET {
        return Err(Error::InvalidParam {
            field: "budget",
            reason: format!("must be >= {MIN_BUDGET}, got {budget}"),
        });
    }
    let mut base = *baseline;
    base.omega_d_on = None;
    let x0: Vec<f64> = free.iter().map(|&p| to_coord(p, base.get(p))).collect();
    let edges: Vec<f64> = free.iter().map(|&p| edge(p, &base)).collect();
    let per_run = budget / RESTARTS;

    let runs: Vec<(Run, Vec<TraceEntry>, usize)> = (0..RESTARTS)
        .into_par_iter()
        .map(|r| {
            let share = if r == 0 { budget - per_run * (RESTARTS - 1) } else { per_run };
            let mut obj = Objective {
                base: &base,
                free,
                cfg: settings.search,
                cache: HashMap::new(),
                budget: share,
                evaluations: 0,
                restart: r,
                trace: Vec::new(),
            };
            let run = nelder_mead(
                &mut obj,
                initial_simplex(&x0, &edges, r, seed),
                settings.f_tol,
                settings.x_tol,
            );
            (run, obj.trace, obj.evaluations)
        })
        .collect();

    let evaluations = runs.iter().map(|r| r.2).sum();
    let trace: Vec<TraceEntry> = runs.iter().flat_map(|r| r.1.iter().cloned()).collect();
    let (best_run, _, _) = runs
        .iter()
        .min_by(|a, b| a.0.f.total_cmp(&b.0.f))
        .expect("at least one restart");
    let converged = runs.iter().any(|r| r.0.converged);

    let mut best = apply(&base, free, &best_run.x);
    best.omega_d_on = Some(resolve_omega_d_on(&best)?);
    let report = evaluate_point(&best, settings.report)?;
    let mut warnings = best.hierarchy_warnings();
    if !converged {
        warnings.push(format!(
            "BudgetExhaustedBeforeConvergence: {evaluations} evaluations used"
        ));
    }
    if best_run.f >= PENALTY {
        warnings.push("no successful objective evaluation".into());
    }
    Ok(OptResult {
        best_params: best,
        best_infidelity: report.infidelity,
        search_infidelity: best_run.f,
        off_ratio: report.off_ratio,
        t_gate: report.t_gate,
        evaluations,
        converged,
        trace,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GateTimeRow {
    pub j_12: f64,
    pub t_gate: f64,
    pub infidelity_on: f64,
    pub off_ratio: f64,
    pub j_m1: f64,
    pub drive_amp: f64,
    pub omega_2: f64,
    pub evaluations: usize,
    pub converged: bool,
    pub status: String,
}

impl GateTimeRow {
    pub const HEADER: [&'static str; 10] = [
        "j_12",
        "t_gate",
        "infidelity_on",
        "off_ratio",
        "j_m1",
        "drive_amp",
        "omega_2",
        "evaluations",
        "converged",
        "status",
    ];
}

/// For each `J_12` (with `ω_d^off` fixed) minimize over `{J_m1, Ω, ω_2}`
/// starting from `baseline`. Per-point failures are recorded in the row.
pub fn gate_time_sweep(
    baseline: &ProtocolParams,
    j12_grid: &[f64],
    omega_d_off: f64,
    budget: usize,
    seed: u64,
    settings: &OptimizerSettings,
) -> Result<Vec<GateTimeRow>> {
    if j12_grid.is_empty() || j12_grid.iter().any(|&j| !(j > 0.0)) {
        return Err(Error::InvalidParam {
            field: "j12_grid",
            reason: "values must be positive".into(),
        });
    }
    if !(j12_grid.windows(2).all(|w| w[0] < w[1]) || j12_grid.windows(2).all(|w| w[0] > w[1])) {
        return Err(Error::InvalidParam {
            field: "j12_grid",
            reason: "must be strictly monotone".into(),
        });
    }
    let free = [Param::JM1, Param::DriveAmp, Param::Omega2];
    Ok(j12_grid
        .par_iter()
        .map(|&j| {
            let start = baseline.with(Param::J12, j).with(Param::OmegaDOff, omega_d_off);
            match optimize_joint(&start, &free, budget, seed, settings) {
                Ok(r) => GateTimeRow {
                    j_12: j,
                    t_gate: r.t_gate,
                    infidelity_on: r.best_infidelity,
                    off_ratio: r.off_ratio,
                    j_m1: r.best_params.j_m1,
                    drive_amp: r.best_params.drive_amp,
                    omega_2: r.best_params.omega_2,
                    evaluations: r.evaluations,
                    converged: r.converged,
                    status: "ok".into(),
                },
                Err(e) => GateTimeRow {
                    j_12: j,
                    t_gate: f64::NAN,
                    infidelity_on: f64::NAN,
                    off_ratio: f64::NAN,
                    j_m1: f64::NAN,
                    drive_amp: f64::NAN,
                    omega_2: f64::NAN,
                    evaluations: 0,
                    converged: false,
                    status: format!("error: {e}"),
                },
            }
        })
        .collect())
}

/// Coefficient of determination of the least-squares line `y = a + b x`.
pub fn linear_r_squared(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if syy == 0.0 {
        return 1.0;
    }
    sxy * sxy / (sxx * syy)
}
