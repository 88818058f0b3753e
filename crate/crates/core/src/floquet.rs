//! Floquet quasienergies over a parameter sweep, with branch tracking.
//!
//! Quasienergies are taken from the rotating-frame Floquet operator
//! `U_F = W(τ)·U(τ) = −U(τ)`: same eigenvectors as the lab-frame period
//! propagator, eigenvalues shifted by `ω_d/2` so that the branches of the
//! dressed three-qubit levels sit near zero instead of at the zone edge.

use std::fmt;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::Serialize;

use crate::dressed::{dress_modulator, effective_model};
use crate::error::{Error, Result};
use crate::linalg::{max_abs, unitary_eigen};
use crate::params::{Param, ProtocolParams};
use crate::pauli::{OperatorMatrix, QuantumState};
use crate::propagator::{Propagator, PropagatorConfig};

/// Overlaps closer than this cannot order an assignment.
const TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Level {
    #[serde(rename = "g")]
    Ground,
    #[serde(rename = "e")]
    Excited,
}

impl Level {
    fn letter(self) -> char {
        match self {
            Level::Ground => 'g',
            Level::Excited => 'e',
        }
    }
}

/// Dressed product state `|s_m s_1 s_2⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct BranchLabel {
    pub m: Level,
    pub q1: Level,
    pub q2: Level,
}

impl BranchLabel {
    pub const fn new(m: Level, q1: Level, q2: Level) -> Self {
        Self { m, q1, q2 }
    }

    /// Label of dressed product index `4m + 2q1 + q2`.
    pub fn from_index(idx: usize) -> Self {
        let lvl = |bit: usize| if bit == 0 { Level::Ground } else { Level::Excited };
        Self::new(lvl(idx >> 2 & 1), lvl(idx >> 1 & 1), lvl(idx & 1))
    }

    pub fn index(&self) -> usize {
        let bit = |l: Level| (l == Level::Excited) as usize;
        4 * bit(self.m) + 2 * bit(self.q1) + bit(self.q2)
    }

    /// Compact identifier such as `gm_g1_e2`.
    pub fn key(&self) -> String {
        format!("{}m_{}1_{}2", self.m.letter(), self.q1.letter(), self.q2.letter())
    }

    pub fn parse(key: &str) -> Result<Self> {
        (0..8)
            .map(Self::from_index)
            .find(|l| l.key() == key)
            .ok_or_else(|| Error::BranchNotFound(key.to_string()))
    }
}

impl fmt::Display for BranchLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{}_m {}_1 {}_2⟩", self.m.letter(), self.q1.letter(), self.q2.letter())
    }
}

pub const GM_G1_E2: BranchLabel = BranchLabel::new(Level::Ground, Level::Ground, Level::Excited);
pub const GM_E1_G2: BranchLabel = BranchLabel::new(Level::Ground, Level::Excited, Level::Ground);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FloquetSpectrum {
    pub parameter: Param,
    pub omega_d: f64,
    pub sweep_values: Vec<f64>,
    /// `[point][branch]`, in `(−ω_d/2, ω_d/2]`.
    pub quasienergies: Vec<Vec<f64>>,
    /// Dressed product state dominating each branch at the first sweep point.
    pub labels: Vec<BranchLabel>,
    /// `[point][branch]` population of the modulator dressed ground state.
    pub modulator_weight: Vec<Vec<f64>>,
    /// Smallest assigned overlap between point `k−1` and `k` (1 at `k = 0`).
    pub continuity: Vec<f64>,
    /// Points whose continuity dropped below 0.5.
    pub crossing_window: Vec<bool>,
    /// Per point: does "modulator weight > 0.5" select the same branches as
    /// "quasienergy < 0"?
    pub selection_agrees: Vec<bool>,
}

impl FloquetSpectrum {
    pub fn branch(&self, label: BranchLabel) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| *l == label)
            .ok_or_else(|| Error::BranchNotFound(label.key()))
    }

    /// Branches whose modulator weight exceeds 0.5 at every sweep point.
    pub fn modulator_ground_branches(&self) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&b| self.modulator_weight.iter().all(|w| w[b] > 0.5))
            .collect()
    }

    pub fn branch_values(&self, branch: usize) -> Vec<f64> {
        self.quasienergies.iter().map(|row| row[branch]).collect()
    }

    /// Separation of two branches at each sweep point, folded modulo `ω_d`.
    pub fn separation(&self, a: usize, b: usize) -> Vec<f64> {
        self.quasienergies
            .iter()
            .map(|row| {
                let d = (row[a] - row[b]).abs() % self.omega_d;
                d.min(self.omega_d - d)
            })
            .collect()
    }
}

/// Eigen-decomposition of one Floquet operator.
#[derive(Debug, Clone)]
pub struct FloquetPoint {
    pub quasienergies: Vec<f64>,
    pub vectors: DMatrix<C64>,
}

fn principal(eps: f64, omega_d: f64) -> f64 {
    let half = omega_d / 2.0;
    let mut e = eps;
    while e <= -half {
        e += omega_d;
    }
    while e > half {
        e -= omega_d;
    }
    e
}

/// Quasienergies `−arg(λ)/τ` of the rotating-frame Floquet operator.
pub fn floquet_point(u_period: &OperatorMatrix, omega_d: f64) -> FloquetPoint {
    let tau = 2.0 * PI / omega_d;
    let rotated = -u_period.matrix();
    let (values, vectors) = unitary_eigen(&rotated);
    let quasienergies = values
        .iter()
        .map(|z| principal(-z.arg() / tau, omega_d))
        .collect();
    FloquetPoint {
        quasienergies,
        vectors,
    }
}

/// `H_eff = (i/τ) log U_F` on the principal branch, and its Hermiticity defect.
pub fn effective_hamiltonian(u_period: &OperatorMatrix, omega_d: f64) -> (OperatorMatrix, f64) {
    let pt = floquet_point(u_period, omega_d);
    let d = DMatrix::from_diagonal(&DVector::from_iterator(
        8,
        pt.quasienergies.iter().map(|&e| C64::new(e, 0.0)),
    ));
    let h = &pt.vectors * d * pt.vectors.adjoint();
    let defect = max_abs(&(&h - h.adjoint()));
    (OperatorMatrix::from_matrix(h), defect)
}

/// Dressed product basis `|s_m⟩|s_1⟩|s_2⟩` at `p, ω_d`, as columns.
pub fn dressed_product_basis(p: &ProtocolParams, omega_d: f64) -> DMatrix<C64> {
    let m = dress_modulator(p.drive_amp, p.omega_m - omega_d);
    let e = effective_model(p, omega_d);
    let modes = [
        [&m.ground_state, &m.excited_state],
        [&e.q1_ground, &e.q1_excited],
        [&e.q2_ground, &e.q2_excited],
    ];
    let mut basis = DMatrix::zeros(8, 8);
    for idx in 0..8 {
        let s = QuantumState::product(&[
            modes[0][idx >> 2 & 1],
            modes[1][idx >> 1 & 1],
            modes[2][idx & 1],
        ]);
        basis.set_column(idx, s.amplitudes());
    }
    basis
}

fn overlaps(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<f64> {
    (a.adjoint() * b).map(|z| z.norm_sqr())
}

/// Greedy maximal-overlap assignment `row → column`. Fails if a decision
/// rests on a tie.
fn assign(o: &DMatrix<f64>, point: usize, value: f64) -> Result<(Vec<usize>, f64)> {
    let n = o.nrows();
    let mut pairs: Vec<(usize, usize, f64)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, o[(i, j)]))
        .collect();
    pairs.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    let mut row_to_col = vec![usize::MAX; n];
    let mut col_taken = vec![false; n];
    let mut worst = f64::INFINITY;
    for (idx, &(i, j, w)) in pairs.iter().enumerate() {
        if row_to_col[i] != usize::MAX || col_taken[j] {
            continue;
        }
        // A competing free pair of equal weight sharing this row or column
        // makes the choice arbitrary.
        let tie = pairs[idx + 1..]
            .iter()
            .take_while(|p| w - p.2 < TIE_TOL)
            .any(|&(i2, j2, _)| {
                (i2 == i && !col_taken[j2] && j2 != j)
                    || (j2 == j && row_to_col[i2] == usize::MAX && i2 != i)
            });
        if tie && w > TIE_TOL {
            return Err(Error::BranchTrackingAmbiguous { point, value });
        }
        row_to_col[i] = j;
        col_taken[j] = true;
        worst = worst.min(w);
    }
    Ok((row_to_col, worst))
}

/// Quasienergy spectrum over a sweep of one parameter at fixed `ω_d`.
///
/// Branches are labeled at the first sweep point by maximal overlap with the
/// dressed product basis of that point and then continued by maximal
/// eigenvector overlap between neighbouring points.
pub fn floquet_spectrum(
    p: &ProtocolParams,
    omega_d: f64,
    parameter: Param,
    grid: &[f64],
    cfg: PropagatorConfig,
) -> Result<FloquetSpectrum> {
    if grid.is_empty() {
        return Err(Error::Precondition("sweep grid is empty".into()));
    }
    let increasing = grid.windows(2).all(|w| w[0] < w[1]);
    let decreasing = grid.windows(2).all(|w| w[0] > w[1]);
    if !(increasing || decreasing) {
        return Err(Error::Precondition("sweep grid must be strictly monotone".into()));
    }
    let points: Vec<FloquetPoint> = grid
        .par_iter()
        .map(|&v| {
            let q = p.with(parameter, v);
            Propagator::new(&q, omega_d, cfg).map(|prop| floquet_point(&prop.single_period(), omega_d))
        })
        .collect::<Result<_>>()?;

    let first = p.with(parameter, grid[0]);
    let dressed = dressed_product_basis(&first, omega_d);
    // Rows: dressed labels; columns: eigenvectors at the first point.
    let (label_to_vec, _) = assign(&overlaps(&dressed, &points[0].vectors), 0, grid[0])?;
    let labels: Vec<BranchLabel> = (0..8).map(BranchLabel::from_index).collect();

    let mut current: Vec<DVector<C64>> = label_to_vec
        .iter()
        .map(|&k| points[0].vectors.column(k).into_owned())
        .collect();
    let mut quasienergies = Vec::with_capacity(grid.len());
    let mut modulator_weight = Vec::with_capacity(grid.len());
    let mut continuity = Vec::with_capacity(grid.len());
    let mut selection_agrees = Vec::with_capacity(grid.len());

    for (k, pt) in points.iter().enumerate() {
        let (order, worst) = if k == 0 {
            (label_to_vec.clone(), 1.0)
        } else {
            let prev = DMatrix::from_columns(&current);
            assign(&overlaps(&prev, &pt.vectors), k, grid[k])?
        };
        current = order.iter().map(|&j| pt.vectors.column(j).into_owned()).collect();
        let eps: Vec<f64> = order.iter().map(|&j| pt.quasienergies[j]).collect();

        let q = p.with(parameter, grid[k]);
        let g = dress_modulator(q.drive_amp, q.omega_m - omega_d).ground_state;
        let weights: Vec<f64> = current.iter().map(|v| modulator_weight_of(v, &g)).collect();
        selection_agrees.push(
            weights
                .iter()
                .zip(&eps)
                .all(|(&w, &e)| (w > 0.5) == (e < 0.0)),
        );
        quasienergies.push(eps);
        modulator_weight.push(weights);
        continuity.push(worst);
    }

    Ok(FloquetSpectrum {
        parameter,
        omega_d,
        sweep_values: grid.to_vec(),
        quasienergies,
        labels,
        modulator_weight,
        crossing_window: continuity.iter().map(|&c| c < 0.5).collect(),
        continuity,
        selection_agrees,
    })
}

fn modulator_weight_of(v: &DVector<C64>, g: &QuantumState) -> f64 {
    let g = g.amplitudes();
    (0..4)
        .map(|rest| (g[0].conj() * v[rest] + g[1].conj() * v[4 + rest]).norm_sqr())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossingGap {
    pub gap: f64,
    /// Sweep value of the refined minimum.
    pub location: f64,
    pub grid_index: usize,
    /// False when the minimum sits on the sweep boundary (no refinement).
    pub interior: bool,
}

/// Minimum separation of two branches, refined by a parabola through the
/// squared separation at the grid minimum and its neighbours (exact for a
/// hyperbolic avoided crossing on a uniform grid).
pub fn avoided_crossing_gap(
    spec: &FloquetSpectrum,
    branch_a: BranchLabel,
    branch_b: BranchLabel,
) -> Result<CrossingGap> {
    let a = spec.branch(branch_a)?;
    let b = spec.branch(branch_b)?;
    let sep = spec.separation(a, b);
    let x = &spec.sweep_values;
    let (k, &d) = sep
        .iter()
        .enumerate()
        .min_by(|l, r| l.1.total_cmp(r.1))
        .ok_or_else(|| Error::Precondition("empty spectrum".into()))?;
    if k == 0 || k + 1 == sep.len() {
        return Ok(CrossingGap {
            gap: d,
            location: x[k],
            grid_index: k,
            interior: false,
        });
    }
    let (x0, x1, x2) = (x[k - 1], x[k], x[k + 1]);
    let (y0, y1, y2) = (sep[k - 1].powi(2), sep[k].powi(2), sep[k + 1].powi(2));
    // Lagrange parabola through the three points.
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let curv = (d12 - d01) / (x2 - x0);
    let (gap2, location) = if curv > 0.0 {
        let slope = d01 - curv * (x0 + x1);
        let xm = (-slope / (2.0 * curv)).clamp(x0.min(x2), x0.max(x2));
        let ym = y1 + d01 * (xm - x1) + curv * (xm - x0) * (xm - x1);
        (ym.max(0.0), xm)
    } else {
        (y1, x1)
    };
    Ok(CrossingGap {
        gap: gap2.sqrt().min(d),
        location,
        grid_index: k,
        interior: true,
    })
}

/// `n` evenly spaced values on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect(),
    }
}
