//! Frozen-modulator projection and the effective two-qubit model.
//!
//! With the modulator held in the ground state `|g_m⟩` of
//! `H'_m = (Ω/2)σ^x − (Δ_m/2)σ^z`, the M–Q1 exchange collapses onto its
//! expectation values and Q1 sees a renormalized local field:
//! `H'_1 = −(Δ_1/2)σ^z + (J_m1/2)(⟨σ_m^x⟩σ^x + ⟨σ_m^y⟩σ^y)`.
//! Everything here is closed form and cheap; the lab-frame simulation in
//! [`crate::channel`] is what ultimately judges it.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{c, eigh};
use crate::params::ProtocolParams;
use crate::pauli::{OperatorMatrix, Pauli, QuantumState};

/// Grid size used to locate sign changes before bisection.
pub const ROOT_SCAN_POINTS: usize = 2000;

#[derive(Debug, Clone, PartialEq)]
pub struct DressedModulator {
    /// `ω'_m = √(Ω² + Δ_m²)`.
    pub omega_m_prime: f64,
    pub sx: f64,
    pub sy: f64,
    pub sz: f64,
    pub ground_state: QuantumState,
    pub excited_state: QuantumState,
    /// Set when Ω = Δ_m = 0; the ground state is then the convention `|0⟩`.
    pub degenerate: bool,
}

/// Ground state of `(Ω/2)σ^x − (Δ_m/2)σ^z` in closed form.
///
/// The matrix is real, so the returned state is real with a non-negative
/// first nonzero component, and `sy` is exactly zero.
pub fn dress_modulator(drive_amp: f64, delta_m: f64) -> DressedModulator {
    let omega_m_prime = drive_amp.hypot(delta_m);
    let (degenerate, a, b) = if omega_m_prime == 0.0 {
        (true, 1.0, 0.0)
    } else {
        // (Ω, Δ − ω') and (Δ + ω', −Ω) both solve (H + ω'/2)v = 0; pick the
        // one without cancellation.
        let (a, b) = if delta_m <= 0.0 {
            (drive_amp, delta_m - omega_m_prime)
        } else {
            (delta_m + omega_m_prime, -drive_amp)
        };
        let n = a.hypot(b);
        let (a, b) = (a / n, b / n);
        let (a, b) = if a < 0.0 || (a == 0.0 && b < 0.0) {
            (-a, -b)
        } else {
            (a, b)
        };
        (false, a, b)
    };
    let ground = QuantumState::from_raw(DVector::from_vec(vec![c(a, 0.0), c(b, 0.0)]));
    // Orthogonal partner with the same phase convention.
    let (ea, eb) = if b > 0.0 || (b == 0.0 && a < 0.0) {
        (b, -a)
    } else {
        (-b, a)
    };
    let excited = QuantumState::from_raw(DVector::from_vec(vec![c(ea, 0.0), c(eb, 0.0)]));
    DressedModulator {
        omega_m_prime,
        sx: 2.0 * a * b,
        sy: 0.0,
        sz: a * a - b * b,
        ground_state: ground,
        excited_state: excited,
        degenerate,
    }
}

/// Closed-form effective two-qubit quantities at one drive frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct DressedModel {
    pub omega_d: f64,
    pub delta_1: f64,
    pub delta_2: f64,
    pub modulator: DressedModulator,
    pub omega_1_prime: f64,
    pub omega_2_prime: f64,
    /// `ω'_1 − ω'_2`; its zero is the interaction-on condition.
    pub signed_detuning: f64,
    /// `Δ'_12 = |ω'_1 − ω'_2|`.
    pub delta_12_prime: f64,
    /// Freezing margin `Δ'_m1 = |ω'_m − |Δ_1||`.
    pub delta_m1_prime: f64,
    /// `|⟨0|g_1⟩⟨1|e_1⟩|`.
    pub overlap_factor: f64,
    pub j12_eff: f64,
    /// `J_12 |⟨g_1 e_2|σ^+σ^- + σ^-σ^+|e_1 g_2⟩|`: the exchange matrix element
    /// between the energy-ordered single-excitation pair. Equals `j12_eff`
    /// when `Δ_2 ≥ 0`; for `Δ_2 < 0` the Q2 ground state is `|1⟩` and the two
    /// differ.
    pub j12_exchange: f64,
    /// `π / (2 J_12,eff)`, infinite when the effective coupling vanishes.
    pub t_gate: f64,
    pub q1_ground: QuantumState,
    pub q1_excited: QuantumState,
    pub q2_ground: QuantumState,
    pub q2_excited: QuantumState,
    /// `ω'_1 < 1e-12`: the Q1 eigenbasis is a convention, not physics.
    pub degenerate_eigenbasis: bool,
    h1: OperatorMatrix,
    h2: OperatorMatrix,
}

impl DressedModel {
    /// Local Hamiltonian `H'_1` of Q1 with the modulator frozen.
    pub fn h1(&self) -> &OperatorMatrix {
        &self.h1
    }

    /// `H'_2 = −(Δ_2/2)σ^z`.
    pub fn h2(&self) -> &OperatorMatrix {
        &self.h2
    }

    /// Local basis change `[g_1 e_1] ⊗ [g_2 e_2]` mapping `|ij⟩` to dressed states.
    pub fn local_basis(&self) -> OperatorMatrix {
        let cols = |g: &QuantumState, e: &QuantumState| {
            OperatorMatrix::from_matrix(DMatrix::from_columns(&[
                g.amplitudes().clone(),
                e.amplitudes().clone(),
            ]))
        };
        cols(&self.q1_ground, &self.q1_excited).kron(&cols(&self.q2_ground, &self.q2_excited))
    }

    pub fn freezing_ratio(&self, p: &ProtocolParams) -> f64 {
        self.delta_m1_prime / p.j_m1
    }
}

fn omega_1_prime(delta_1: f64, j_m1: f64, m: &DressedModulator) -> f64 {
    (delta_1 * delta_1 + j_m1 * j_m1 * (m.sx * m.sx + m.sy * m.sy)).sqrt()
}

/// Cheap signed detuning `ω'_1 − ω'_2` without eigenvectors.
pub fn signed_detuning(p: &ProtocolParams, omega_d: f64) -> f64 {
    let m = dress_modulator(p.drive_amp, p.omega_m - omega_d);
    omega_1_prime(p.omega_1 - omega_d, p.j_m1, &m) - (p.omega_2 - omega_d).abs()
}

pub fn effective_model(p: &ProtocolParams, omega_d: f64) -> DressedModel {
    let delta_1 = p.omega_1 - omega_d;
    let delta_2 = p.omega_2 - omega_d;
    let modulator = dress_modulator(p.drive_amp, p.omega_m - omega_d);
    let w1 = omega_1_prime(delta_1, p.j_m1, &modulator);
    let w2 = delta_2.abs();

    let half = |v: f64| v / 2.0;
    let h1 = &(&Pauli::Z.matrix().scale(-half(delta_1))
        + &Pauli::X.matrix().scale(half(p.j_m1 * modulator.sx)))
        + &Pauli::Y.matrix().scale(half(p.j_m1 * modulator.sy));
    let h2 = Pauli::Z.matrix().scale(-half(delta_2));

    let degenerate_eigenbasis = w1 < 1e-12;
    let (q1_ground, q1_excited) = if degenerate_eigenbasis {
        (QuantumState::basis(2, 0), QuantumState::basis(2, 1))
    } else {
        let (_, v) = eigh(h1.matrix());
        (
            QuantumState::from_raw(v.column(0).into_owned()),
            QuantumState::from_raw(v.column(1).into_owned()),
        )
    };
    let (q2_ground, q2_excited) = if delta_2 >= 0.0 {
        (QuantumState::basis(2, 0), QuantumState::basis(2, 1))
    } else {
        (QuantumState::basis(2, 1), QuantumState::basis(2, 0))
    };

    let overlap_factor = overlap_factor(&q1_ground, &q1_excited);
    let j12_eff = overlap_factor * p.j_12;
    let j12_exchange = p.j_12 * exchange_element(&q1_ground, &q1_excited, &q2_ground, &q2_excited);
    let t_gate = if j12_eff > 0.0 {
        PI / (2.0 * j12_eff)
    } else {
        f64::INFINITY
    };

    DressedModel {
        omega_d,
        delta_1,
        delta_2,
        omega_1_prime: w1,
        omega_2_prime: w2,
        signed_detuning: w1 - w2,
        delta_12_prime: (w1 - w2).abs(),
        delta_m1_prime: (modulator.omega_m_prime - delta_1.abs()).abs(),
        modulator,
        overlap_factor,
        j12_eff,
        j12_exchange,
        t_gate,
        q1_ground,
        q1_excited,
        q2_ground,
        q2_excited,
        degenerate_eigenbasis,
        h1,
        h2,
    }
}

/// `|⟨0|g⟩⟨1|e⟩|`.
pub fn overlap_factor(ground: &QuantumState, excited: &QuantumState) -> f64 {
    (ground.amplitudes()[0] * excited.amplitudes()[1]).norm()
}

/// `|⟨g_1 e_2|σ_1^+σ_2^- + σ_1^-σ_2^+|e_1 g_2⟩|` with `σ^+ = |0⟩⟨1|`.
fn exchange_element(
    g1: &QuantumState,
    e1: &QuantumState,
    g2: &QuantumState,
    e2: &QuantumState,
) -> f64 {
    let (g1, e1, g2, e2) = (g1.amplitudes(), e1.amplitudes(), g2.amplitudes(), e2.amplitudes());
    // ⟨a|σ^+|b⟩ = a_0* b_1 and ⟨a|σ^-|b⟩ = a_1* b_0.
    let up = |a: &DVector<C64>, b: &DVector<C64>| a[0].conj() * b[1];
    let down = |a: &DVector<C64>, b: &DVector<C64>| a[1].conj() * b[0];
    (up(g1, e1) * down(e2, g2) + down(g1, e1) * up(e2, g2)).norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootReport {
    pub omega_d: f64,
    /// `|Δ'_12|` at the returned root.
    pub residual: f64,
    /// Sign changes (or exact zeros) seen on the scan grid.
    pub roots_on_grid: usize,
    pub bracket: (f64, f64),
}

/// Zero of `ω'_1 − ω'_2` inside `bracket`, the one nearest the lower edge.
pub fn solve_omega_d_on(p: &ProtocolParams, bracket: (f64, f64)) -> Result<RootReport> {
    let (lo, hi) = bracket;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::Precondition(format!(
            "root bracket must be finite and increasing, got ({lo}, {hi})"
        )));
    }
    let n = ROOT_SCAN_POINTS;
    let grid: Vec<f64> = (0..n)
        .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
        .collect();
    let values: Vec<f64> = grid.iter().map(|&w| signed_detuning(p, w)).collect();

    let mut first: Option<(usize, bool)> = None;
    let mut count = 0;
    for k in 0..n {
        if values[k] == 0.0 {
            count += 1;
            first.get_or_insert((k, true));
        } else if k + 1 < n && values[k + 1] != 0.0 && values[k].signum() != values[k + 1].signum()
        {
            count += 1;
            first.get_or_insert((k, false));
        }
    }

    let Some((k, exact)) = first else {
        let (at, min) = grid
            .iter()
            .zip(&values)
            .map(|(&w, &v)| (w, v.abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty grid");
        return Err(Error::NoRootInBracket {
            lo,
            hi,
            min_abs_detuning: min,
            at,
        });
    };

    let omega_d = if exact {
        grid[k]
    } else {
        let (mut a, mut b) = (grid[k], grid[k + 1]);
        let mut fa = values[k];
        let width = 1e-14 * a.abs().max(b.abs()).max(1.0);
        while b - a > width {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            let fm = signed_detuning(p, mid);
            if fm == 0.0 {
                a = mid;
                b = mid;
                break;
            }
            if fm.signum() == fa.signum() {
                a = mid;
                fa = fm;
            } else {
                b = mid;
            }
        }
        if signed_detuning(p, a).abs() <= signed_detuning(p, b).abs() {
            a
        } else {
            b
        }
    };
    Ok(RootReport {
        omega_d,
        residual: signed_detuning(p, omega_d).abs(),
        roots_on_grid: count,
        bracket,
    })
}

/// Root search starting from `(0.9 ω_1, ω_1)` and widening the lower edge
/// geometrically down to `0.5 ω_1`.
pub fn solve_omega_d_on_auto(p: &ProtocolParams) -> Result<RootReport> {
    let hi = p.omega_1;
    let floor = 0.5 * p.omega_1;
    let mut width = 0.1 * p.omega_1;
    loop {
        let lo = (hi - width).max(floor);
        match solve_omega_d_on(p, (lo, hi)) {
            Ok(r) => return Ok(r),
            Err(e) if lo <= floor => return Err(e),
            Err(_) => width *= 2.0,
        }
    }
}

/// Interaction-on drive frequency: the stored value when present, otherwise
/// solved with [`solve_omega_d_on_auto`].
pub fn resolve_omega_d_on(p: &ProtocolParams) -> Result<f64> {
    match p.omega_d_on {
        Some(w) => Ok(w),
        None => solve_omega_d_on_auto(p).map(|r| r.omega_d),
    }
}

/// `R = Δ'_12(ω_d^off) / J_12,eff^off`; `f64::INFINITY` when the effective
/// coupling is below `1e-300`.
pub fn off_ratio(p: &ProtocolParams) -> f64 {
    let m = effective_model(p, p.omega_d_off);
    if m.j12_eff < 1e-300 {
        f64::INFINITY
    } else {
        m.delta_12_prime / m.j12_eff
    }
}

/// Applies a global phase to each eigenvector; used to check phase invariance.
pub fn rephase(state: &QuantumState, phase: f64) -> QuantumState {
    QuantumState::from_raw(state.amplitudes() * C64::from_polar(1.0, phase))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    // Independent 2×2 oracle: generic Hermitian eigen-solver on the complex
    // matrix, no closed form.
    fn oracle_ground(drive_amp: f64, delta_m: f64) -> (f64, f64, f64) {
        let h = &Pauli::X.matrix().scale(drive_amp / 2.0) + &Pauli::Z.matrix().scale(-delta_m / 2.0);
        let (vals, v) = eigh(h.matrix());
        let g = QuantumState::from_raw(v.column(0).into_owned());
        let sx = Pauli::X.matrix().expectation(&g).re;
        let sz = Pauli::Z.matrix().expectation(&g).re;
        (vals[1] - vals[0], sx, sz)
    }

    #[test]
    fn resonant_drive_ground_is_minus_x() {
        let m = dress_modulator(0.07, 0.0);
        assert!(close(m.omega_m_prime, 0.07, 1e-16));
        assert!(close(m.sx, -1.0, 1e-15));
        assert!(close(m.sz, 0.0, 1e-15));
        assert_eq!(m.sy, 0.0);
    }

    #[test]
    fn undriven_ground_is_zero() {
        let m = dress_modulator(0.0, 0.5);
        assert_eq!(m.omega_m_prime, 0.5);
        assert_eq!(m.sx, 0.0);
        assert_eq!(m.sz, 1.0);
        assert!(!m.degenerate);
    }

    #[test]
    fn three_four_five_matches_oracle() {
        let m = dress_modulator(3.0, 4.0);
        let (split, sx, sz) = oracle_ground(3.0, 4.0);
        assert!(close(m.omega_m_prime, 5.0, 1e-14));
        assert!(close(split, 5.0, 1e-12));
        assert!(close(m.sx, -0.6, 1e-14) && close(sx, -0.6, 1e-12));
        assert!(close(m.sz, 0.8, 1e-14) && close(sz, 0.8, 1e-12));
    }

    #[test]
    fn degenerate_modulator_is_flagged() {
        let m = dress_modulator(0.0, 0.0);
        assert!(m.degenerate);
        assert_eq!(m.ground_state, QuantumState::basis(2, 0));
    }

    #[test]
    fn unmodulated_qubit_reduces_to_bare_detuning() {
        let p = ProtocolParams {
            j_m1: 0.0,
            ..ProtocolParams::baseline()
        };
        let m = effective_model(&p, 0.99);
        assert!(close(m.omega_1_prime, 0.01, 1e-15));
        assert_eq!(m.q1_ground, QuantumState::basis(2, 0));
        assert_eq!(m.q1_excited, QuantumState::basis(2, 1));
        assert_eq!(m.j12_eff, p.j_12);
        assert!(close(
            m.delta_12_prime,
            ((p.omega_1 - 0.99f64).abs() - (p.omega_2 - 0.99f64).abs()).abs(),
            1e-15
        ));
    }

    #[test]
    fn far_detuned_drive_recovers_bare_splitting() {
        let p = ProtocolParams::baseline();
        for wd in [100.0, -100.0] {
            let m = effective_model(&p, wd);
            assert!((m.delta_12_prime - 0.0017).abs() < 1e-5, "{}", m.delta_12_prime);
        }
    }

    #[test]
    fn off_regime_baseline_composed_step_by_step() {
        // Oracle: ground-state Bloch vector of H'_1 is −n with
        // n = (J sx, 0, −Δ_1)/ω'_1, giving |⟨0|g⟩⟨1|e⟩| = (1 + Δ_1/ω'_1)/2.
        let p = ProtocolParams::baseline();
        let wd = p.omega_d_off;
        let dm = p.omega_m - wd;
        let wmp = (p.drive_amp * p.drive_amp + dm * dm).sqrt();
        let sx = -p.drive_amp / wmp;
        let d1 = p.omega_1 - wd;
        let w1 = (d1 * d1 + (p.j_m1 * sx).powi(2)).sqrt();
        let w2 = (p.omega_2 - wd).abs();
        let jeff = p.j_12 * (1.0 + d1 / w1) / 2.0;

        let m = effective_model(&p, wd);
        assert!(close(m.delta_12_prime, (w1 - w2).abs(), 1e-15));
        assert!(close(m.j12_eff, jeff, 1e-16));
        let r = off_ratio(&p);
        assert!(close(r, (w1 - w2).abs() / jeff, 1e-9));
        assert!(r > 200.0, "R = {r}");
    }

    #[test]
    fn exchange_element_matches_literal_overlap_below_q2() {
        let p = ProtocolParams::baseline();
        let on = effective_model(&p, 0.9972);
        assert!(on.delta_2 > 0.0);
        assert!(close(on.j12_exchange, on.j12_eff, 1e-18));
        // Above ω_2 the Q2 ordering flips and the resonant pair couples
        // through the complementary overlap (1 − Δ_1/ω'_1)/2.
        let off = effective_model(&p, p.omega_d_off);
        let expect = p.j_12 * (1.0 - off.delta_1 / off.omega_1_prime) / 2.0;
        assert!(close(off.j12_exchange, expect, 1e-16));
    }

    #[test]
    fn gate_time_identity() {
        let m = effective_model(&ProtocolParams::optimized_reference(), 0.9957);
        assert!(close(m.t_gate * 2.0 * m.j12_eff, PI, 1e-12));
        assert!(m.j12_eff <= ProtocolParams::optimized_reference().j_12);
    }

    #[test]
    fn degenerate_q1_eigenbasis_is_flagged() {
        let p = ProtocolParams {
            j_m1: 0.0,
            ..ProtocolParams::baseline()
        };
        assert!(effective_model(&p, p.omega_1).degenerate_eigenbasis);
        assert!(!effective_model(&p, 0.99).degenerate_eigenbasis);
    }

    #[test]
    fn unmodulated_crossing_bracket_behaviour() {
        let p = ProtocolParams {
            j_m1: 0.0,
            ..ProtocolParams::baseline()
        };
        let mid = 0.5 * (p.omega_1 + p.omega_2);
        assert!(matches!(
            solve_omega_d_on(&p, (0.9, 0.999)),
            Err(Error::NoRootInBracket { .. })
        ));
        let r = solve_omega_d_on(&p, (0.99, 1.01)).unwrap();
        assert!(close(r.omega_d, mid, 1e-13), "{} vs {mid}", r.omega_d);
        assert_eq!(r.roots_on_grid, 1);
    }

    #[test]
    fn baseline_has_root_below_omega_1() {
        let p = ProtocolParams::baseline();
        let r = solve_omega_d_on_auto(&p).unwrap();
        assert!(r.omega_d < p.omega_1);
        assert!(effective_model(&p, r.omega_d).delta_12_prime < 1e-10);
        assert!(r.residual < 1e-12);
        // Oracle: dense scan brackets the same root.
        let n = 200_000;
        let (lo, hi) = r.bracket;
        let mut found = None;
        let mut prev = signed_detuning(&p, lo);
        for k in 1..=n {
            let w = lo + (hi - lo) * k as f64 / n as f64;
            let v = signed_detuning(&p, w);
            if v.signum() != prev.signum() {
                found = Some(w);
                break;
            }
            prev = v;
        }
        let w = found.expect("dense scan finds the crossing");
        assert!((w - r.omega_d).abs() <= (hi - lo) / n as f64);
    }

    #[test]
    fn symmetric_pair_without_modulator_shift() {
        // ω_2 = ω_1 and no drive: ⟨σ_m^x⟩ = 0, the modulator shift vanishes
        // and every drive frequency is resonant.
        let p = ProtocolParams {
            omega_2: 1.0,
            drive_amp: 0.0,
            ..ProtocolParams::baseline()
        };
        let r = solve_omega_d_on(&p, (0.9, 0.99)).unwrap();
        assert!(effective_model(&p, r.omega_d).delta_12_prime < 1e-10);
        // With a drive the shift never vanishes: reported with its grid minimum.
        let q = ProtocolParams {
            omega_2: 1.0,
            ..ProtocolParams::baseline()
        };
        match solve_omega_d_on(&q, (0.9, 0.99)) {
            Err(Error::NoRootInBracket {
                min_abs_detuning, ..
            }) => assert!(min_abs_detuning > 0.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn vanishing_coupling_gives_infinite_ratio() {
        let p = ProtocolParams {
            j_12: 0.0,
            ..ProtocolParams::baseline()
        };
        assert_eq!(off_ratio(&p), f64::INFINITY);
    }

    #[test]
    fn optimized_reference_ratio() {
        let r = off_ratio(&ProtocolParams::optimized_reference());
        assert!((r / 474.2 - 1.0).abs() < 0.01, "R = {r}");
    }

    #[test]
    fn asymptotes_on_both_sides() {
        let p = ProtocolParams::baseline();
        let left = effective_model(&p, -100.0).signed_detuning;
        let right = effective_model(&p, 100.0).signed_detuning;
        assert!(close(left, p.omega_1 - p.omega_2, 1e-5));
        assert!(close(right, p.omega_2 - p.omega_1, 1e-5));
    }

    #[test]
    fn detuning_is_continuous_in_drive_frequency() {
        let p = ProtocolParams::baseline();
        let h = 1e-7;
        let mut w = 0.9;
        while w < 1.1 {
            let jump = (signed_detuning(&p, w + h) - signed_detuning(&p, w)).abs();
            assert!(jump < 10.0 * h, "jump {jump} at {w}");
            w += 0.001;
        }
    }

    proptest! {
        #[test]
        fn overlap_factor_ignores_eigenvector_phases(a in 0.0..6.3f64, b in 0.0..6.3f64, wd in 0.95..1.01f64) {
            let m = effective_model(&ProtocolParams::baseline(), wd);
            let base = overlap_factor(&m.q1_ground, &m.q1_excited);
            let shifted = overlap_factor(&rephase(&m.q1_ground, a), &rephase(&m.q1_excited, b));
            prop_assert!((base - shifted).abs() < 1e-15);
        }

        #[test]
        fn modulator_state_is_pure(om in 0.0..1.0f64, dm in -1.0..1.0f64) {
            let m = dress_modulator(om, dm);
            prop_assert!((m.sx * m.sx + m.sy * m.sy + m.sz * m.sz - 1.0).abs() < 1e-12);
            prop_assert!((m.omega_m_prime - (om * om + dm * dm).sqrt()).abs() < 1e-14);
            prop_assert_eq!(m.sy, 0.0);
            prop_assert!(m.ground_state.inner(&m.excited_state).norm() < 1e-15);
        }

        #[test]
        fn unmodulated_reduction(wd in 0.5..1.5f64) {
            let p = ProtocolParams { j_m1: 0.0, ..ProtocolParams::baseline() };
            let m = effective_model(&p, wd);
            prop_assert_eq!(m.omega_1_prime, (p.omega_1 - wd).abs());
        }

        #[test]
        fn gate_time_decreases_with_coupling(j in 1e-6..1e-3f64, factor in 1.01..3.0f64) {
            let p = ProtocolParams::baseline();
            let wd = 0.997;
            let t1 = effective_model(&p.with(crate::params::Param::J12, j), wd).t_gate;
            let t2 = effective_model(&p.with(crate::params::Param::J12, j * factor), wd).t_gate;
            prop_assert!(t2 < t1);
        }
    }

    #[test]
    fn root_residual_over_random_hierarchical_params() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut solved = 0;
        let mut tried = 0;
        while solved < 100 {
            tried += 1;
            assert!(tried < 10_000, "too few parameter sets with a sign change");
            let j_12 = 10f64.powf(rng.random_range(-5.0..-3.5));
            let j_m1 = j_12 * rng.random_range(3.0..60.0);
            let drive_amp = j_m1 * rng.random_range(10.0..40.0);
            let p = ProtocolParams {
                omega_2: 1.0 + rng.random_range(1e-4..3e-3),
                j_m1,
                j_12,
                drive_amp,
                ..ProtocolParams::baseline()
            };
            if let Ok(r) = solve_omega_d_on_auto(&p) {
                assert!(effective_model(&p, r.omega_d).delta_12_prime < 1e-10);
                solved += 1;
            }
        }
    }
}
