//! Oracles written independently of the library's Hamiltonian builders and
//! integrators.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C;

use freezegate::ProtocolParams;

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn sx() -> DMatrix<C> {
    DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
}

pub fn sy() -> DMatrix<C> {
    DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
}

pub fn sz() -> DMatrix<C> {
    DMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
}

pub fn id2() -> DMatrix<C> {
    DMatrix::identity(2, 2)
}

pub fn kron3(a: &DMatrix<C>, b: &DMatrix<C>, d: &DMatrix<C>) -> DMatrix<C> {
    a.kronecker(b).kronecker(d)
}

/// Diagonal of `H_0 = −Σ (ω_k/2) σ_k^z` in the (M, Q1, Q2) basis.
pub fn bare_energies(p: &ProtocolParams) -> [f64; 8] {
    let w = [p.omega_m, p.omega_1, p.omega_2];
    std::array::from_fn(|idx| {
        (0..3)
            .map(|k| {
                let bit = idx >> (2 - k) & 1;
                let z = if bit == 0 { 1.0 } else { -1.0 };
                -w[k] * z / 2.0
            })
            .sum()
    })
}

/// Static coupling `J_m1 σ^xσ^x + J_12 σ^xσ^x` and drive operator `σ_m^x`.
pub fn couplings(p: &ProtocolParams) -> (DMatrix<C>, DMatrix<C>) {
    let v = kron3(&sx(), &sx(), &id2()) * c(p.j_m1, 0.) + kron3(&id2(), &sx(), &sx()) * c(p.j_12, 0.);
    (v, kron3(&sx(), &id2(), &id2()))
}

pub fn lab_hamiltonian(p: &ProtocolParams, omega_d: f64, t: f64) -> DMatrix<C> {
    let e = bare_energies(p);
    let (v, d) = couplings(p);
    DMatrix::from_diagonal(&DVector::from_iterator(8, e.iter().map(|&x| c(x, 0.))))
        + v
        + d * c(p.drive_amp * (omega_d * t).cos(), 0.)
}

/// Adaptive Dormand–Prince 5(4) integration of the lab-frame Schrödinger
/// equation in the interaction picture of `H_0`. Returns the lab-frame state.
pub fn dormand_prince(p: &ProtocolParams, omega_d: f64, psi0: &DVector<C>, t_final: f64, tol: f64) -> DVector<C> {
    let e = bare_energies(p);
    let (v, d) = couplings(p);
    let rhs = |t: f64, y: &DVector<C>| -> DVector<C> {
        let ph: Vec<C> = e.iter().map(|&x| C::from_polar(1.0, x * t)).collect();
        let z = DVector::from_iterator(8, (0..8).map(|k| ph[k].conj() * y[k]));
        let h = &v + &d * c(p.drive_amp * (omega_d * t).cos(), 0.);
        let w = h * z;
        DVector::from_iterator(8, (0..8).map(|j| c(0., -1.) * ph[j] * w[j]))
    };
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const CN: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let mut y = psi0.clone();
    let mut t = 0.0;
    let mut h: f64 = 0.05;
    while t < t_final {
        h = h.min(t_final - t);
        let mut k: Vec<DVector<C>> = Vec::with_capacity(7);
        k.push(rhs(t, &y));
        for s in 1..7 {
            let mut ys = y.clone();
            for (j, kj) in k.iter().enumerate() {
                if A[s - 1][j] != 0.0 {
                    ys += kj * c(h * A[s - 1][j], 0.);
                }
            }
            k.push(rhs(t + CN[s] * h, &ys));
        }
        let mut y5 = y.clone();
        let mut err = DVector::<C>::zeros(8);
        for s in 0..7 {
            y5 += &k[s] * c(h * B5[s], 0.);
            err += &k[s] * c(h * (B5[s] - B4[s]), 0.);
        }
        let e_norm = err.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if e_norm <= tol {
            t += h;
            y = y5;
        }
        let factor = if e_norm == 0.0 { 5.0 } else { 0.9 * (tol / e_norm).powf(0.2) };
        h *= factor.clamp(0.2, 5.0);
    }
    DVector::from_iterator(8, (0..8).map(|j| C::from_polar(1.0, -e[j] * t_final) * y[j]))
}
