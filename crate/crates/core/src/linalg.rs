//! Dense complex helpers shared by the physics modules.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64 as C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub(crate) fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a.kronecker(b)
}

pub(crate) fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Scale a vector so that its first component with modulus above `1e-12`
/// is real and positive.
pub(crate) fn fix_phase(v: &mut DVector<C64>) {
    if let Some(z) = v.iter().copied().find(|z| z.norm() > 1e-12) {
        let phase = z.conj() / z.norm();
        v.iter_mut().for_each(|x| *x *= phase);
    }
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending,
/// eigenvectors phase-fixed column by column.
pub(crate) fn eigh(h: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let n = h.nrows();
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let mut v: DVector<C64> = eig.eigenvectors.column(k).into_owned();
        fix_phase(&mut v);
        vectors.set_column(col, &v);
    }
    (values, vectors)
}

/// `exp(-i dt H)` for Hermitian `H`, through its eigen-decomposition.
///
/// The eigenvector matrix is re-orthonormalized by QR: the raw solver output
/// is unitary only to ~1e-15, which compounds over thousands of steps.
pub(crate) fn expm_hermitian(h: &DMatrix<C64>, dt: f64) -> DMatrix<C64> {
    let eig = SymmetricEigen::new(h.clone());
    let v = &eig.eigenvectors.clone().qr().q();
    let mut scaled = v.clone();
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let phase = C64::from_polar(1.0, -dt * lambda);
        scaled.column_mut(k).iter_mut().for_each(|x| *x *= phase);
    }
    scaled * v.adjoint()
}

/// Eigenvalues and orthonormal eigenvectors of a unitary matrix through its
/// complex Schur form (diagonal for normal matrices up to round-off).
pub(crate) fn unitary_eigen(u: &DMatrix<C64>) -> (Vec<C64>, DMatrix<C64>) {
    let (q, t) = Schur::new(u.clone()).unpack();
    let values = (0..u.nrows()).map(|k| t[(k, k)]).collect();
    (values, q)
}

/// Nearest unitary in Frobenius norm (polar factor `W V†` of the SVD).
pub(crate) fn unitarize(m: &DMatrix<C64>) -> DMatrix<C64> {
    let svd = m.clone().svd(true, true);
    svd.u.expect("u requested") * svd.v_t.expect("v_t requested")
}

pub(crate) fn matrix_power(u: &DMatrix<C64>, mut n: u64) -> DMatrix<C64> {
    let dim = u.nrows();
    let mut result = DMatrix::<C64>::identity(dim, dim);
    let mut base = u.clone();
    while n > 0 {
        if n & 1 == 1 {
            result = &result * &base;
        }
        n >>= 1;
        if n > 0 {
            base = &base * &base;
        }
    }
    result
}

pub(crate) fn identity(dim: usize) -> DMatrix<C64> {
    DMatrix::from_fn(dim, dim, |i, j| if i == j { ONE } else { ZERO })
}
