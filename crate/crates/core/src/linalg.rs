//! Dense Hermitian helpers on top of nalgebra's symmetric eigen-solver.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Smallest eigenvalue of a Hermitian matrix and a unit eigenvector.
pub fn hermitian_min_eig(m: &CMatrix) -> Result<(f64, CVector)> {
    extreme_eig(m, true)
}

/// Largest eigenvalue of a Hermitian matrix and a unit eigenvector.
pub fn hermitian_max_eig(m: &CMatrix) -> Result<(f64, CVector)> {
    extreme_eig(m, false)
}

/// Sorted (ascending) eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Result<Vec<f64>> {
    check_square(m)?;
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let eig = m.clone().symmetric_eigen();
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite eigenvalue".into()));
    }
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

fn extreme_eig(m: &CMatrix, smallest: bool) -> Result<(f64, CVector)> {
    check_square(m)?;
    if m.nrows() == 0 {
        return Err(Error::Domain("eigen-solve of an empty matrix".into()));
    }
    let eig = m.clone().symmetric_eigen();
    let mut best = 0;
    for (i, &v) in eig.eigenvalues.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::Numeric("non-finite eigenvalue".into()));
        }
        let b = eig.eigenvalues[best];
        if (smallest && v < b) || (!smallest && v > b) {
            best = i;
        }
    }
    let mut vec: CVector = eig.eigenvectors.column(best).into_owned();
    let norm = vec.norm();
    vec /= Complex64::new(norm, 0.0);
    normalize_phase(&mut vec);
    Ok((eig.eigenvalues[best], vec))
}

/// Rotates a vector so that its largest-magnitude entry is real positive.
/// Makes eigenvector output deterministic up to degenerate subspaces.
pub fn normalize_phase(v: &mut CVector) {
    let mut idx = 0;
    let mut best = -1.0;
    for (i, c) in v.iter().enumerate() {
        if c.norm() > best + 1e-14 {
            best = c.norm();
            idx = i;
        }
    }
    if best > 0.0 {
        let phase = v[idx] / Complex64::new(v[idx].norm(), 0.0);
        let rot = phase.conj();
        v.iter_mut().for_each(|c| *c *= rot);
    }
}

/// Hermitian form `v* M v` (real part; the imaginary part vanishes for Hermitian `M`).
pub fn quadratic_form(m: &CMatrix, v: &CVector) -> f64 {
    let mv = m * v;
    v.dotc(&mv).re
}

fn check_square(m: &CMatrix) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Shape { expected: m.nrows(), got: m.ncols() });
    }
    Ok(())
}

/// Largest absolute deviation from Hermitian symmetry and the offending (j, k).
pub fn hermitian_defect(m: &CMatrix) -> (f64, usize, usize) {
    let n = m.nrows();
    let mut worst = (0.0, 0, 0);
    for j in 0..n {
        for k in j..n {
            let d = (m[(j, k)] - m[(k, j)].conj()).norm();
            if d > worst.0 {
                worst = (d, j, k);
            }
        }
    }
    worst
}

/// Principal submatrix on the given index list.
pub fn submatrix(m: &CMatrix, indices: &[usize]) -> CMatrix {
    CMatrix::from_fn(indices.len(), indices.len(), |a, b| m[(indices[a], indices[b])])
}
