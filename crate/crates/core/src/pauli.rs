//! Pauli algebra on the three-qubit register and the lab/rotating-frame
//! Hamiltonians.
//!
//! Tensor-product ordering is (M, Q1, Q2) with the modulator as the most
//! significant factor: basis index `4·m + 2·q1 + q2`, where `0` is the +1
//! eigenstate of σ^z. Every embedding in the crate goes through [`embed`].

use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::linalg::{c, identity, kron, max_abs};
use crate::params::ProtocolParams;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Dense square complex operator (dimension 2, 4, 8 or 16 in practice).
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix(DMatrix<C64>);

impl OperatorMatrix {
    pub fn from_matrix(m: DMatrix<C64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "operator must be square");
        Self(m)
    }

    pub fn identity(dim: usize) -> Self {
        Self(identity(dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn diagonal(entries: &[C64]) -> Self {
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(entries)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.0[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self(kron(&self.0, &other.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(&self.0 * c(s, 0.0))
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    /// Largest entry modulus.
    pub fn max_norm(&self) -> f64 {
        max_abs(&self.0)
    }

    /// `‖H − H†‖_max`.
    pub fn hermiticity_defect(&self) -> f64 {
        max_abs(&(&self.0 - self.0.adjoint()))
    }

    /// `‖U†U − I‖_max`.
    pub fn unitarity_defect(&self) -> f64 {
        max_abs(&(self.0.adjoint() * &self.0 - identity(self.dim())))
    }

    /// Spectral norm (largest singular value).
    pub fn operator_norm(&self) -> f64 {
        self.0.clone().svd(false, false).singular_values.max()
    }

    /// `exp(−i dt H)` for Hermitian `self`.
    pub fn exp_hermitian(&self, dt: f64) -> Self {
        Self(crate::linalg::expm_hermitian(&self.0, dt))
    }

    pub fn apply(&self, state: &QuantumState) -> QuantumState {
        QuantumState(&self.0 * &state.0)
    }

    pub fn expectation(&self, state: &QuantumState) -> C64 {
        state.0.dotc(&(&self.0 * &state.0))
    }
}

impl Mul for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        OperatorMatrix(&self.0 * &rhs.0)
    }
}

impl Add for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn add(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        OperatorMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn sub(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        OperatorMatrix(&self.0 - &rhs.0)
    }
}

/// Pure state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState(DVector<C64>);

impl QuantumState {
    /// Wraps and normalizes the amplitudes. Panics on the zero vector.
    pub fn new(amplitudes: DVector<C64>) -> Self {
        let n = amplitudes.norm();
        assert!(n > 0.0, "zero state vector");
        Self(amplitudes / c(n, 0.0))
    }

    /// Wraps without normalizing.
    pub fn from_raw(amplitudes: DVector<C64>) -> Self {
        Self(amplitudes)
    }

    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = DVector::zeros(dim);
        v[index] = ONE;
        Self(v)
    }

    /// Tensor product in the order given (first factor most significant).
    pub fn product(factors: &[&QuantumState]) -> Self {
        let mut v = DVector::from_element(1, ONE);
        for f in factors {
            v = v.kronecker(&f.0);
        }
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &QuantumState) -> C64 {
        self.0.dotc(&other.0)
    }

    pub fn populations(&self) -> Vec<f64> {
        self.0.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn distance(&self, other: &QuantumState) -> f64 {
        (&self.0 - &other.0).norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix(self) -> OperatorMatrix {
        let m = match self {
            Pauli::I => [ONE, ZERO, ZERO, ONE],
            Pauli::X => [ZERO, ONE, ONE, ZERO],
            Pauli::Y => [ZERO, -I, I, ZERO],
            Pauli::Z => [ONE, ZERO, ZERO, -ONE],
        };
        OperatorMatrix(DMatrix::from_row_slice(2, 2, &m))
    }
}

/// Register slot, in tensor-product order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Qubit {
    Modulator = 0,
    Q1 = 1,
    Q2 = 2,
}

impl Qubit {
    pub const ALL: [Qubit; 3] = [Qubit::Modulator, Qubit::Q1, Qubit::Q2];
}

/// Embeds a single-qubit operator on `qubit` into the 8-dimensional register.
pub fn embed(op: &OperatorMatrix, qubit: Qubit) -> OperatorMatrix {
    assert_eq!(op.dim(), 2);
    let id = OperatorMatrix::identity(2);
    let mut factors = [&id, &id, &id];
    factors[qubit as usize] = op;
    factors[0].kron(factors[1]).kron(factors[2])
}

pub fn pauli_on(p: Pauli, qubit: Qubit) -> OperatorMatrix {
    embed(&p.matrix(), qubit)
}

fn pauli_pair(p: Pauli, a: Qubit, b: Qubit) -> OperatorMatrix {
    &pauli_on(p, a) * &pauli_on(p, b)
}

/// Lab-frame Hamiltonian split into its static part and the operator
/// multiplying `Ω cos(ω_d t)`.
#[derive(Debug, Clone)]
pub struct LabHamiltonian {
    pub static_part: OperatorMatrix,
    pub drive_operator: OperatorMatrix,
    pub drive_amp: f64,
    pub omega_d: f64,
}

impl LabHamiltonian {
    pub fn new(p: &ProtocolParams, omega_d: f64) -> Self {
        let z = |q| pauli_on(Pauli::Z, q);
        let terms = [
            z(Qubit::Modulator).scale(-p.omega_m / 2.0),
            z(Qubit::Q1).scale(-p.omega_1 / 2.0),
            z(Qubit::Q2).scale(-p.omega_2 / 2.0),
            pauli_pair(Pauli::X, Qubit::Modulator, Qubit::Q1).scale(p.j_m1),
            pauli_pair(Pauli::X, Qubit::Q1, Qubit::Q2).scale(p.j_12),
        ];
        let static_part = terms
            .iter()
            .fold(OperatorMatrix::zeros(8), |acc, t| &acc + t);
        Self {
            static_part,
            drive_operator: pauli_on(Pauli::X, Qubit::Modulator),
            drive_amp: p.drive_amp,
            omega_d,
        }
    }

    pub fn drive_coefficient(&self, t: f64) -> f64 {
        self.drive_amp * (self.omega_d * t).cos()
    }

    pub fn at(&self, t: f64) -> OperatorMatrix {
        &self.static_part + &self.drive_operator.scale(self.drive_coefficient(t))
    }
}

/// `H(t) = −Σ (ω_k/2) σ_k^z + J_m1 σ_m^x σ_1^x + J_12 σ_1^x σ_2^x + Ω cos(ω_d t) σ_m^x`.
pub fn build_lab_hamiltonian(p: &ProtocolParams, omega_d: f64, t: f64) -> OperatorMatrix {
    LabHamiltonian::new(p, omega_d).at(t)
}

/// Time-independent rotating-wave Hamiltonian in the frame of [`frame_map`]:
/// `(Ω/2)σ_m^x − Σ (Δ_k/2)σ_k^z + (J_m1/2)(XX+YY)_{m1} + (J_12/2)(XX+YY)_{12}`
/// with `Δ_k = ω_k − ω_d`.
pub fn build_rotating_hamiltonian(p: &ProtocolParams, omega_d: f64) -> OperatorMatrix {
    let z = |q| pauli_on(Pauli::Z, q);
    let exchange = |a, b| &pauli_pair(Pauli::X, a, b) + &pauli_pair(Pauli::Y, a, b);
    let terms = [
        pauli_on(Pauli::X, Qubit::Modulator).scale(p.drive_amp / 2.0),
        z(Qubit::Modulator).scale(-(p.omega_m - omega_d) / 2.0),
        z(Qubit::Q1).scale(-(p.omega_1 - omega_d) / 2.0),
        z(Qubit::Q2).scale(-(p.omega_2 - omega_d) / 2.0),
        exchange(Qubit::Modulator, Qubit::Q1).scale(p.j_m1 / 2.0),
        exchange(Qubit::Q1, Qubit::Q2).scale(p.j_12 / 2.0),
    ];
    terms
        .iter()
        .fold(OperatorMatrix::zeros(8), |acc, t| &acc + t)
}

/// Phase `exp(−i (ω_d t/2) z)` of a single qubit with σ^z eigenvalue `z`.
fn frame_phase(omega_d: f64, t: f64, z: f64) -> C64 {
    C64::from_polar(1.0, -omega_d * t * z / 2.0)
}

/// `W(t) = exp(−i (ω_d t/2)(σ_m^z + σ_1^z + σ_2^z))`; rotating-frame states
/// are `W(t)|ψ_lab⟩`.
pub fn frame_map(omega_d: f64, t: f64) -> OperatorMatrix {
    frame_map_on(omega_d, t, 3)
}

/// Frame map restricted to `n` qubits (same diagonal structure).
pub fn frame_map_on(omega_d: f64, t: f64, n: u32) -> OperatorMatrix {
    let dim = 1usize << n;
    let entries: Vec<C64> = (0..dim)
        .map(|idx| {
            let z: f64 = (0..n)
                .map(|k| if idx >> k & 1 == 0 { 1.0 } else { -1.0 })
                .sum();
            frame_phase(omega_d, t, z)
        })
        .collect();
    OperatorMatrix::diagonal(&entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigh, expm_hermitian};

    fn decoupled(omega: [f64; 3]) -> ProtocolParams {
        ProtocolParams {
            omega_m: omega[0],
            omega_1: omega[1],
            omega_2: omega[2],
            j_m1: 0.0,
            j_12: 0.0,
            drive_amp: 0.0,
            omega_d_on: None,
            omega_d_off: 1.0,
        }
    }

    // Independent oracle: every term assembled from explicit 2×2 blocks with
    // nalgebra's Kronecker product, without going through `embed`.
    fn oracle_lab(p: &ProtocolParams, omega_d: f64, t: f64) -> DMatrix<C64> {
        let x = DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
        let z = DMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]);
        let id = DMatrix::<C64>::identity(2, 2);
        let k3 = |a: &DMatrix<C64>, b: &DMatrix<C64>, cc: &DMatrix<C64>| {
            a.kronecker(b).kronecker(cc)
        };
        let r = |v: f64| c(v, 0.0);
        k3(&z, &id, &id) * r(-p.omega_m / 2.0)
            + k3(&id, &z, &id) * r(-p.omega_1 / 2.0)
            + k3(&id, &id, &z) * r(-p.omega_2 / 2.0)
            + k3(&x, &x, &id) * r(p.j_m1)
            + k3(&id, &x, &x) * r(p.j_12)
            + k3(&x, &id, &id) * r(p.drive_amp * (omega_d * t).cos())
    }

    #[test]
    fn decoupled_lab_spectrum() {
        let h = build_lab_hamiltonian(&decoupled([1.0; 3]), 1.0, 0.3);
        let (vals, _) = eigh(h.matrix());
        let expect = [-1.5, -0.5, -0.5, -0.5, 0.5, 0.5, 0.5, 1.5];
        for (v, e) in vals.iter().zip(expect) {
            assert!((v - e).abs() < 1e-14);
        }
    }

    #[test]
    fn drive_term_at_time_zero() {
        let mut p = decoupled([1.0; 3]);
        p.drive_amp = 0.07;
        let with = build_lab_hamiltonian(&p, 1.004, 0.0);
        p.drive_amp = 0.0;
        let without = build_lab_hamiltonian(&p, 1.004, 0.0);
        let diff = &with - &without;
        let expect = pauli_on(Pauli::X, Qubit::Modulator).scale(0.07);
        assert!((&diff - &expect).max_norm() < 1e-16);
    }

    #[test]
    fn lab_hamiltonian_matches_tensor_oracle_at_half_period() {
        let p = ProtocolParams::baseline();
        let wd = 1.004;
        let t = std::f64::consts::PI / wd;
        let h = build_lab_hamiltonian(&p, wd, t);
        assert!(max_abs(&(h.matrix() - oracle_lab(&p, wd, t))) < 1e-16);
        // cos(ω_d t) = −1 at this time
        let mut q = p;
        q.drive_amp = -p.drive_amp;
        assert!(max_abs(&(h.matrix() - oracle_lab(&q, wd, 0.0))) < 1e-15);
    }

    #[test]
    fn built_hamiltonians_are_hermitian() {
        let p = ProtocolParams::baseline();
        for t in [0.0, 0.7, 13.1] {
            assert!(build_lab_hamiltonian(&p, 1.004, t).hermiticity_defect() < 1e-14);
        }
        assert!(build_rotating_hamiltonian(&p, 1.004).hermiticity_defect() < 1e-14);
    }

    #[test]
    fn rotating_frame_vanishes_at_common_resonance() {
        let h = build_rotating_hamiltonian(&decoupled([1.0; 3]), 1.0);
        assert_eq!(h.max_norm(), 0.0);
    }

    #[test]
    fn decoupled_rotating_frame_spectrum() {
        let mut p = decoupled([1.0, 1.02, 0.97]);
        p.drive_amp = 0.05;
        let wd = 0.99;
        let (vals, _) = eigh(build_rotating_hamiltonian(&p, wd).matrix());
        let dm = p.omega_m - wd;
        let wmp = (p.drive_amp.powi(2) + dm * dm).sqrt();
        let d1 = p.omega_1 - wd;
        let d2 = p.omega_2 - wd;
        let mut expect: Vec<f64> = Vec::new();
        for a in [-1.0, 1.0] {
            for b in [-1.0, 1.0] {
                for cc in [-1.0, 1.0] {
                    expect.push(a * wmp / 2.0 + b * d1 / 2.0 + cc * d2 / 2.0);
                }
            }
        }
        expect.sort_by(f64::total_cmp);
        for (v, e) in vals.iter().zip(&expect) {
            assert!((v - e).abs() < 1e-14, "{v} vs {e}");
        }
    }

    #[test]
    fn rotating_ground_energy_matches_dense_solver() {
        // Ground energy through a generic dense solver on the real-symmetric
        // embedding [[Re, −Im], [Im, Re]] of the complex Hermitian matrix.
        let h = build_rotating_hamiltonian(&ProtocolParams::baseline(), 1.004);
        let m = h.matrix();
        let real = DMatrix::from_fn(16, 16, |i, j| {
            let z = m[(i % 8, j % 8)];
            match (i < 8, j < 8) {
                (true, true) | (false, false) => z.re,
                (true, false) => -z.im,
                (false, true) => z.im,
            }
        });
        let oracle = real.symmetric_eigenvalues().min();
        let (vals, _) = eigh(m);
        assert!((vals[0] - oracle).abs() < 1e-12);
    }

    #[test]
    fn frame_map_identity_and_period() {
        assert!((&frame_map(1.3, 0.0) - &OperatorMatrix::identity(8)).max_norm() < 1e-16);
        let wd = 1.3;
        let w = frame_map(wd, 2.0 * std::f64::consts::PI / wd);
        assert!((&w - &OperatorMatrix::identity(8).scale(-1.0)).max_norm() < 1e-14);
        for i in 0..8 {
            for j in 0..8 {
                if i != j {
                    assert_eq!(w.get(i, j), ZERO);
                }
            }
            assert!((w.get(i, i).norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn frame_map_turns_lab_precession_into_detuning() {
        // Single decoupled qubit, ω = 1.1, ω_d = 1.0, initial |+x⟩: in the
        // rotating frame the Bloch vector precesses at Δ = 0.1 about z.
        let omega: f64 = 1.1;
        let wd: f64 = 1.0;
        let h = Pauli::Z.matrix().scale(-omega / 2.0);
        let plus = QuantumState::new(DVector::from_vec(vec![ONE, ONE]));
        for t in [0.5, 3.0, 17.0, 40.0] {
            let u = OperatorMatrix::from_matrix(expm_hermitian(h.matrix(), t));
            let rotated = frame_map_on(wd, t, 1).apply(&u.apply(&plus));
            let sx = Pauli::X.matrix().expectation(&rotated).re;
            let sy = Pauli::Y.matrix().expectation(&rotated).re;
            let delta = omega - wd;
            // H' = −(Δ/2)σ^z rotates +x towards −y at rate Δ.
            assert!((sx - (delta * t).cos()).abs() < 1e-12);
            assert!((sy + (delta * t).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn embedding_acts_on_one_factor_only() {
        let zero = QuantumState::basis(2, 0);
        let plus = QuantumState::new(DVector::from_vec(vec![ONE, ONE]));
        for k in Qubit::ALL {
            let mut factors = [&zero, &zero, &zero];
            factors[k as usize] = &plus;
            let psi = QuantumState::product(&factors);
            for q in Qubit::ALL {
                let sx = pauli_on(Pauli::X, q).expectation(&psi).re;
                let expect = if q == k { 1.0 } else { 0.0 };
                assert!((sx - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn most_significant_factor_is_modulator() {
        let one = QuantumState::basis(2, 1);
        let zero = QuantumState::basis(2, 0);
        let psi = QuantumState::product(&[&one, &zero, &zero]);
        assert_eq!(psi.populations()[4], 1.0);
        let z = pauli_on(Pauli::Z, Qubit::Modulator);
        assert_eq!(z.get(4, 4), -ONE);
        assert_eq!(z.get(3, 3), ONE);
    }
}
