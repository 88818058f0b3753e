//! Time-ordered propagation of the lab-frame Hamiltonian.
//!
//! The Hamiltonian is periodic with `τ = 2π/ω_d`, so long evolutions are
//! assembled as `U(t) = U(r, 0) · U(τ)^n` with `t = nτ + r`. The final
//! partial period uses `ceil(N r/τ)` equal steps.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dressed::dress_modulator;
use crate::error::{Error, Result};
use crate::linalg::{expm_hermitian, identity, matrix_power, unitarize};
use crate::params::ProtocolParams;
use crate::pauli::{frame_map, pauli_on, LabHamiltonian, OperatorMatrix, Pauli, QuantumState, Qubit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// One exponential per step at the step midpoint (order 2).
    #[serde(rename = "piecewise-exponential-midpoint")]
    Midpoint,
    /// Two-exponential commutator-free Magnus scheme on Gauss nodes (order 4).
    #[serde(rename = "commutator-free-magnus-4")]
    Magnus4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagatorConfig {
    pub steps_per_period: usize,
    pub method: Method,
    pub unitarity_tol: f64,
    /// Maximum change of the final state when the step is halved. `None`
    /// skips the check (used inside optimizers).
    pub convergence_tol: Option<f64>,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        Self {
            steps_per_period: 1024,
            method: Method::Magnus4,
            unitarity_tol: 1e-10,
            convergence_tol: Some(1e-8),
        }
    }
}

impl PropagatorConfig {
    pub fn with_steps(self, steps_per_period: usize) -> Self {
        Self {
            steps_per_period,
            ..self
        }
    }

    pub fn unchecked(self) -> Self {
        Self {
            convergence_tol: None,
            ..self
        }
    }

    /// Same configuration at twice the resolution.
    pub fn refined(self) -> Self {
        self.with_steps(2 * self.steps_per_period)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps_per_period == 0 {
            return Err(Error::Precondition("steps_per_period must be >= 1".into()));
        }
        if !(self.unitarity_tol > 0.0) {
            return Err(Error::Precondition("unitarity_tol must be > 0".into()));
        }
        Ok(())
    }
}

const ROOT3_6: f64 = 0.288_675_134_594_812_9; // √3/6

/// Lab-frame propagator with its single-period unitary cached.
#[derive(Debug, Clone)]
pub struct Propagator {
    ham: LabHamiltonian,
    cfg: PropagatorConfig,
    period: f64,
    one_period: DMatrix<C64>,
    raw_defect: f64,
}

impl Propagator {
    pub fn new(p: &ProtocolParams, omega_d: f64, cfg: PropagatorConfig) -> Result<Self> {
        cfg.validate()?;
        if !(omega_d.is_finite() && omega_d > 0.0) {
            return Err(Error::Precondition(format!(
                "drive frequency must be finite and > 0, got {omega_d}"
            )));
        }
        let ham = LabHamiltonian::new(p, omega_d);
        let period = 2.0 * PI / omega_d;
        let mut prop = Self {
            ham,
            cfg,
            period,
            one_period: identity(8),
            raw_defect: 0.0,
        };
        let raw = prop.evolve_between(0.0, period, cfg.steps_per_period);
        let defect = OperatorMatrix::from_matrix(raw.clone()).unitarity_defect();
        if defect >= cfg.unitarity_tol {
            return Err(Error::NonUnitary {
                defect,
                tol: cfg.unitarity_tol,
            });
        }
        // Strip the accumulated round-off (mostly non-unitary) before the
        // period is raised to large powers.
        prop.one_period = unitarize(&raw);
        prop.raw_defect = defect;
        Ok(prop)
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn omega_d(&self) -> f64 {
        self.ham.omega_d
    }

    pub fn config(&self) -> &PropagatorConfig {
        &self.cfg
    }

    /// `‖U†U − I‖_max` of the single-period product before re-unitarization.
    pub fn unitarity_defect(&self) -> f64 {
        self.raw_defect
    }

    pub fn single_period(&self) -> OperatorMatrix {
        OperatorMatrix::from_matrix(self.one_period.clone())
    }

    fn step(&self, t: f64, h: f64) -> DMatrix<C64> {
        match self.cfg.method {
            Method::Midpoint => expm_hermitian(self.ham.at(t + 0.5 * h).matrix(), h),
            Method::Magnus4 => {
                let h1 = self.ham.at(t + (0.5 - ROOT3_6) * h);
                let h2 = self.ham.at(t + (0.5 + ROOT3_6) * h);
                let (a, b) = (0.25 + ROOT3_6, 0.25 - ROOT3_6);
                let first = &h1.scale(a) + &h2.scale(b);
                let second = &h1.scale(b) + &h2.scale(a);
                expm_hermitian(second.matrix(), h) * expm_hermitian(first.matrix(), h)
            }
        }
    }

    /// Direct time-ordered product over `[t0, t1]` with `steps` equal steps.
    pub fn evolve_between(&self, t0: f64, t1: f64, steps: usize) -> DMatrix<C64> {
        let mut u = identity(8);
        if steps == 0 || t1 == t0 {
            return u;
        }
        let h = (t1 - t0) / steps as f64;
        for k in 0..steps {
            u = self.step(t0 + k as f64 * h, h) * u;
        }
        u
    }

    /// `U(t, 0)` through the periodic decomposition.
    pub fn evolution(&self, t: f64) -> OperatorMatrix {
        let n = (t / self.period).floor();
        let r = t - n * self.period;
        let steps = (self.cfg.steps_per_period as f64 * r / self.period).ceil() as usize;
        let partial = if r > 0.0 {
            unitarize(&self.evolve_between(0.0, r, steps.max(1)))
        } else {
            identity(8)
        };
        OperatorMatrix::from_matrix(partial * matrix_power(&self.one_period, n as u64))
    }
}

pub(crate) fn check_time(t: f64) -> Result<()> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Precondition(format!("time must be finite and >= 0, got {t}")));
    }
    Ok(())
}

/// Compares a result against the same computation at twice the resolution.
pub(crate) fn check_convergence<T>(
    cfg: &PropagatorConfig,
    coarse: &T,
    fine: impl FnOnce() -> Result<T>,
    distance: impl Fn(&T, &T) -> f64,
) -> Result<()> {
    if let Some(tol) = cfg.convergence_tol {
        let change = distance(coarse, &fine()?);
        if !(change <= tol) {
            return Err(Error::StepTooCoarse {
                steps: cfg.steps_per_period,
                change,
                tol,
            });
        }
    }
    Ok(())
}

pub fn single_period_propagator(
    p: &ProtocolParams,
    omega_d: f64,
    cfg: PropagatorConfig,
) -> Result<OperatorMatrix> {
    Ok(Propagator::new(p, omega_d, cfg)?.single_period())
}

/// State at `t_final` under the lab-frame Hamiltonian.
pub fn propagate(
    p: &ProtocolParams,
    omega_d: f64,
    t_final: f64,
    cfg: PropagatorConfig,
    initial: &QuantumState,
) -> Result<QuantumState> {
    check_time(t_final)?;
    if initial.dim() != 8 {
        return Err(Error::Precondition(format!(
            "initial state has dimension {}, expected 8",
            initial.dim()
        )));
    }
    if (initial.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::Precondition("initial state is not normalized".into()));
    }
    let run = |cfg: PropagatorConfig| -> Result<QuantumState> {
        Ok(Propagator::new(p, omega_d, cfg)?.evolution(t_final).apply(initial))
    };
    let out = run(cfg)?;
    check_convergence(&cfg, &out, || run(cfg.refined()), |a, b| a.distance(b))?;
    Ok(out)
}

/// One sample of a time-domain trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub t: f64,
    /// Populations of `|m q1 q2⟩` in basis-index order.
    pub populations: [f64; 8],
    /// `⟨σ^z⟩` for M, Q1, Q2.
    pub sz: [f64; 3],
    /// `⟨g_m|ρ_m|g_m⟩` in the rotating frame.
    pub modulator_fidelity: f64,
}

impl TrajectoryRow {
    pub const HEADER: [&'static str; 13] = [
        "t", "p000", "p001", "p010", "p011", "p100", "p101", "p110", "p111", "sz_m", "sz_1",
        "sz_2", "modulator_fidelity",
    ];

    pub fn values(&self) -> Vec<f64> {
        let mut v = vec![self.t];
        v.extend(self.populations);
        v.extend(self.sz);
        v.push(self.modulator_fidelity);
        v
    }
}

/// Population of the modulator dressed ground state after moving `psi` to
/// the rotating frame at time `t`.
pub fn modulator_fidelity(p: &ProtocolParams, omega_d: f64, t: f64, psi: &QuantumState) -> f64 {
    let g = dress_modulator(p.drive_amp, p.omega_m - omega_d).ground_state;
    let rotated = frame_map(omega_d, t).apply(psi);
    let a = rotated.amplitudes();
    (0..4)
        .map(|rest| {
            (g.amplitudes()[0].conj() * a[rest] + g.amplitudes()[1].conj() * a[4 + rest])
                .norm_sqr()
        })
        .sum()
}

/// Uniformly sampled trajectory on `[0, t_final]`.
pub fn export_trajectory(
    p: &ProtocolParams,
    omega_d: f64,
    initial: &QuantumState,
    t_final: f64,
    samples: usize,
    cfg: PropagatorConfig,
) -> Result<Vec<TrajectoryRow>> {
    if samples < 2 {
        return Err(Error::Precondition("trajectory needs at least 2 samples".into()));
    }
    // Validates the end state, including the convergence check.
    propagate(p, omega_d, t_final, cfg, initial)?;
    let prop = Propagator::new(p, omega_d, cfg)?;
    let sz: Vec<OperatorMatrix> = Qubit::ALL.iter().map(|&q| pauli_on(Pauli::Z, q)).collect();
    Ok((0..samples)
        .map(|k| {
            let t = t_final * k as f64 / (samples - 1) as f64;
            let psi = prop.evolution(t).apply(initial);
            let pops = psi.populations();
            TrajectoryRow {
                t,
                populations: pops.try_into().expect("8 amplitudes"),
                sz: [0, 1, 2].map(|q| sz[q].expectation(&psi).re),
                modulator_fidelity: modulator_fidelity(p, omega_d, t, &psi),
            }
        })
        .collect())
}
