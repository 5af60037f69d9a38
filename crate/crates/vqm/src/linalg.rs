//! Dense complex linear algebra kernel for small multi-qubit problems.
//!
//! Everything here operates on `nalgebra` dynamic matrices over `Complex64`,
//! sized for density matrices up to 7 qubits and pure states up to 12 qubits.
//! All functions are pure; none mutate their inputs.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;
pub type RMat = DMatrix<f64>;
pub type RVec = DVector<f64>;

/// Hermiticity tolerance used by [`eig_hermitian`].
pub const HERMITICITY_TOL: f64 = 1e-10;

/// Relative eigenvalue cutoff for [`pinv_hermitian`]: density-matrix kernels
/// from pure states are exactly rank-deficient, so a fixed relative cut keeps
/// the pseudo-inverse from amplifying numerical noise.
pub const PINV_REL_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix is not Hermitian: max |h - h^dag| = {0:.3e}")]
    NotHermitian(f64),
    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    BadIndex { index: usize, n_qubits: usize },
}

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn pauli_x() -> CMat {
    CMat::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(1.0), cr(0.0)])
}

pub fn pauli_y() -> CMat {
    CMat::from_row_slice(2, 2, &[cr(0.0), c(0.0, -1.0), c(0.0, 1.0), cr(0.0)])
}

pub fn pauli_z() -> CMat {
    CMat::from_row_slice(2, 2, &[cr(1.0), cr(0.0), cr(0.0), cr(-1.0)])
}

/// Kronecker product. Dimensions multiply: (m×n) ⊗ (p×q) -> (mp×nq).
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn dagger(a: &CMat) -> CMat {
    a.adjoint()
}

pub fn trace(a: &CMat) -> Complex64 {
    a.diagonal().sum()
}

/// Largest entrywise absolute deviation between two matrices.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch in max_abs_diff");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn hermiticity_defect(a: &CMat) -> f64 {
    max_abs_diff(a, &a.adjoint())
}

/// Replace `a` by its Hermitian part (a + a^dag)/2.
pub fn hermitize(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending.
///
/// Returns (w, v) with h = v diag(w) v^dag and v unitary.
pub fn eig_hermitian(h: &CMat) -> Result<(RVec, CMat), LinalgError> {
    let defect = hermiticity_defect(h);
    if defect > HERMITICITY_TOL {
        return Err(LinalgError::NotHermitian(defect));
    }
    let sym = hermitize(h);
    let eig = sym.symmetric_eigen();
    let n = h.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .expect("eigenvalue comparison")
    });
    let w = RVec::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut v = CMat::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        v.set_column(col, &eig.eigenvectors.column(i));
    }
    Ok((w, v))
}

/// exp(-i t h) for Hermitian h, via eigendecomposition.
pub fn unitary_from_hamiltonian(h: &CMat, t: f64) -> Result<CMat, LinalgError> {
    let (w, v) = eig_hermitian(h)?;
    let n = h.nrows();
    let mut phases = CMat::zeros(n, n);
    for k in 0..n {
        phases[(k, k)] = c(0.0, -t * w[k]).exp();
    }
    Ok(&v * phases * v.adjoint())
}

/// exp(-i t (phi_x X + phi_y Y + phi_z Z)) in closed Pauli form:
/// cos(|phi| t) I - i sin(|phi| t) (phi_hat . sigma). The |phi| -> 0 limit is I.
pub fn single_qubit_field_unitary(phi: [f64; 3], t: f64) -> CMat {
    let norm = (phi[0] * phi[0] + phi[1] * phi[1] + phi[2] * phi[2]).sqrt();
    if norm == 0.0 {
        return identity(2);
    }
    let (nx, ny, nz) = (phi[0] / norm, phi[1] / norm, phi[2] / norm);
    let angle = norm * t;
    let (s, cs) = (angle.sin(), angle.cos());
    // cos I - i sin (n.sigma), written out entrywise
    CMat::from_row_slice(
        2,
        2,
        &[
            c(cs, -s * nz),
            c(-s * ny, -s * nx),
            c(s * ny, -s * nx),
            c(cs, s * nz),
        ],
    )
}

/// Reduced density matrix over `keep` (0-based qubit indices, qubit 0 is the
/// most significant bit of the basis index). Kept qubits stay in ascending
/// index order.
pub fn partial_trace(rho: &CMat, n_qubits: usize, keep: &[usize]) -> Result<CMat, LinalgError> {
    let dim = 1usize << n_qubits;
    assert_eq!(rho.nrows(), dim, "density matrix dim must be 2^n_qubits");
    assert_eq!(rho.ncols(), dim, "density matrix must be square");
    for &q in keep {
        if q >= n_qubits {
            return Err(LinalgError::BadIndex {
                index: q,
                n_qubits,
            });
        }
    }
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    let traced: Vec<usize> = (0..n_qubits).filter(|q| !kept.contains(q)).collect();

    let dim_keep = 1usize << kept.len();
    let dim_tr = 1usize << traced.len();
    // bit position of qubit q in a basis index (qubit 0 = msb)
    let pos = |q: usize| n_qubits - 1 - q;

    let compose = |sub: usize, qubits: &[usize]| -> usize {
        let mut idx = 0usize;
        for (bit, &q) in qubits.iter().enumerate() {
            if (sub >> (qubits.len() - 1 - bit)) & 1 == 1 {
                idx |= 1 << pos(q);
            }
        }
        idx
    };

    let mut out = CMat::zeros(dim_keep, dim_keep);
    for a in 0..dim_keep {
        for b in 0..dim_keep {
            let mut acc = cr(0.0);
            for t in 0..dim_tr {
                let row = compose(a, &kept) | compose(t, &traced);
                let col = compose(b, &kept) | compose(t, &traced);
                acc += rho[(row, col)];
            }
            out[(a, b)] = acc;
        }
    }
    Ok(out)
}

/// Column-major vectorization, so that vec(A X B) = (B^T kron A) vec(X).
pub fn vec_cols(a: &CMat) -> CVec {
    CVec::from_iterator(a.nrows() * a.ncols(), a.iter().copied())
}

/// Moore-Penrose pseudo-inverse of a Hermitian matrix: eigenvalues with
/// |w| > tol * max|w| are inverted, the rest zeroed.
pub fn pinv_hermitian(a: &CMat, rel_tol: f64) -> Result<CMat, LinalgError> {
    let (w, v) = eig_hermitian(a)?;
    let w_max = w.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let cut = rel_tol * w_max;
    let n = a.nrows();
    let mut inv = CMat::zeros(n, n);
    for k in 0..n {
        if w[k].abs() > cut {
            inv[(k, k)] = cr(1.0 / w[k]);
        }
    }
    Ok(&v * inv * v.adjoint())
}

/// Pseudo-inverse of a real symmetric matrix with the same eigenvalue cut.
/// Also reports whether any eigenvalue was dropped (rank deficiency).
pub fn pinv_symmetric(a: &RMat, rel_tol: f64) -> (RMat, bool) {
    let sym = (a + a.transpose()).scale(0.5);
    let eig = sym.symmetric_eigen();
    let w_max = eig.eigenvalues.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let cut = rel_tol * w_max;
    let n = a.nrows();
    let mut dropped = false;
    let mut inv_diag = RVec::zeros(n);
    for k in 0..n {
        if eig.eigenvalues[k].abs() > cut && w_max > 0.0 {
            inv_diag[k] = 1.0 / eig.eigenvalues[k];
        } else {
            dropped = true;
        }
    }
    let v = &eig.eigenvectors;
    let inv = v * RMat::from_diagonal(&inv_diag) * v.transpose();
    (inv, dropped)
}

/// Basis column vector |index> in a 2^n_qubits space.
pub fn basis_state(n_qubits: usize, index: usize) -> CVec {
    let dim = 1usize << n_qubits;
    assert!(index < dim);
    let mut v = CVec::zeros(dim);
    v[index] = cr(1.0);
    v
}

/// (|0...0> + |1...1>)/sqrt(2).
pub fn ghz_state(n_qubits: usize) -> CVec {
    let dim = 1usize << n_qubits;
    let mut v = CVec::zeros(dim);
    let a = cr(1.0 / 2.0f64.sqrt());
    v[0] = a;
    v[dim - 1] = a;
    v
}

pub fn outer(v: &CVec) -> CMat {
    v * v.adjoint()
}

/// Embed a single-qubit operator on qubit `q` of an n-qubit register.
pub fn embed_one(op: &CMat, q: usize, n_qubits: usize) -> CMat {
    assert_eq!(op.nrows(), 2);
    assert!(q < n_qubits);
    let left = identity(1usize << q);
    let right = identity(1usize << (n_qubits - q - 1));
    kron(&kron(&left, op), &right)
}

/// Embed a two-qubit operator acting on (qa, qb) of an n-qubit register,
/// where the 4x4 operator indexes its basis as |b_a b_b>.
pub fn embed_pair(op: &CMat, qa: usize, qb: usize, n_qubits: usize) -> CMat {
    assert_eq!(op.nrows(), 4);
    assert!(qa < n_qubits && qb < n_qubits && qa != qb);
    let dim = 1usize << n_qubits;
    let pos_a = n_qubits - 1 - qa;
    let pos_b = n_qubits - 1 - qb;
    let mut out = CMat::zeros(dim, dim);
    for col in 0..dim {
        let ba = (col >> pos_a) & 1;
        let bb = (col >> pos_b) & 1;
        let sub_col = (ba << 1) | bb;
        let base = col & !(1 << pos_a) & !(1 << pos_b);
        for sub_row in 0..4 {
            let entry = op[(sub_row, sub_col)];
            if entry != cr(0.0) {
                let row = base | ((sub_row >> 1) << pos_a) | ((sub_row & 1) << pos_b);
                out[(row, col)] += entry;
            }
        }
    }
    out
}
