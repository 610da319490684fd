//! Dense symmetric linear algebra helpers shared by every operator module.
//!
//! Kernels and ranks are computed through symmetric eigendecompositions with
//! a relative zero threshold `dim * eps * lambda_max`, overridable wherever it
//! matters. Non-identity stalk inner products are handled by conjugating with
//! the SPD square root, so eigensolvers only ever see ordinary symmetric
//! matrices.

use nalgebra::{DMatrix, DVector};

/// Default numerical-zero threshold for an operator of the given dimension
/// and largest absolute eigenvalue.
pub fn default_zero_tol(dim: usize, lambda_max: f64) -> f64 {
    dim as f64 * f64::EPSILON * lambda_max.abs()
}

/// Max absolute entry of `a - a^T`.
pub fn symmetry_residual(a: &DMatrix<f64>) -> f64 {
    let mut r = 0.0f64;
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            r = r.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    r
}

/// Averages a matrix with its transpose.
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted
/// ascending; eigenvectors are the matching columns.
pub fn sorted_symmetric_eigen(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = a.nrows();
    if n == 0 {
        return (DVector::zeros(0), DMatrix::zeros(0, 0));
    }
    let eig = symmetrize(a).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (out, &i) in order.iter().enumerate() {
        vectors.set_column(out, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Largest eigenvalue of a symmetric matrix (0 for the empty matrix).
pub fn lambda_max(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    let (vals, _) = sorted_symmetric_eigen(a);
    vals[vals.len() - 1]
}

fn zero_tol_for(vals: &DVector<f64>, tol: Option<f64>) -> f64 {
    tol.unwrap_or_else(|| {
        let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        default_zero_tol(vals.len(), scale)
    })
}

/// Orthonormal basis (as columns) of the kernel of a symmetric PSD matrix.
pub fn kernel_basis(a: &DMatrix<f64>, tol: Option<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let (vals, vecs) = sorted_symmetric_eigen(a);
    let cut = zero_tol_for(&vals, tol);
    let dim = vals.iter().filter(|v| v.abs() <= cut).count();
    let mut basis = DMatrix::zeros(n, dim);
    let mut col = 0;
    for i in 0..n {
        if vals[i].abs() <= cut {
            basis.set_column(col, &vecs.column(i));
            col += 1;
        }
    }
    basis
}

/// Moore-Penrose pseudoinverse of a symmetric PSD matrix.
pub fn pinv_psd(a: &DMatrix<f64>, tol: Option<f64>) -> DMatrix<f64> {
    psd_function(a, tol, |v| 1.0 / v)
}

/// Pseudoinverse square root `A^{+/2}` of a symmetric PSD matrix.
pub fn pinv_sqrt_psd(a: &DMatrix<f64>, tol: Option<f64>) -> DMatrix<f64> {
    psd_function(a, tol, |v| 1.0 / v.sqrt())
}

/// Applies `f` to the eigenvalues above the zero threshold; eigenvalues at or
/// below it are sent to zero.
fn psd_function(a: &DMatrix<f64>, tol: Option<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let n = a.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let (vals, vecs) = sorted_symmetric_eigen(a);
    let cut = zero_tol_for(&vals, tol);
    let mapped = DVector::from_iterator(n, vals.iter().map(|&v| if v > cut { f(v) } else { 0.0 }));
    &vecs * DMatrix::from_diagonal(&mapped) * vecs.transpose()
}

/// Square root and inverse square root of a symmetric positive-definite
/// matrix. Returns `None` if any eigenvalue is at or below `tol`.
pub fn spd_sqrt(a: &DMatrix<f64>, tol: f64) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    if n == 0 {
        return Some((DMatrix::zeros(0, 0), DMatrix::zeros(0, 0)));
    }
    let (vals, vecs) = sorted_symmetric_eigen(a);
    if vals[0] <= tol {
        return None;
    }
    let sqrt = DVector::from_iterator(n, vals.iter().map(|v| v.sqrt()));
    let inv = DVector::from_iterator(n, vals.iter().map(|v| 1.0 / v.sqrt()));
    Some((
        &vecs * DMatrix::from_diagonal(&sqrt) * vecs.transpose(),
        &vecs * DMatrix::from_diagonal(&inv) * vecs.transpose(),
    ))
}

/// Rank of a general rectangular matrix by SVD.
pub fn rank(a: &DMatrix<f64>, tol: Option<f64>) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let svd = a.clone().svd(false, false);
    let smax = svd.singular_values.iter().fold(0.0f64, |m, v| m.max(*v));
    let cut = tol.unwrap_or_else(|| default_zero_tol(a.nrows().max(a.ncols()), smax));
    svd.singular_values.iter().filter(|s| **s > cut).count()
}

/// Orthonormal basis (as columns) of the null space of a general matrix.
pub fn nullspace(a: &DMatrix<f64>, tol: Option<f64>) -> DMatrix<f64> {
    let (rows, cols) = a.shape();
    if cols == 0 {
        return DMatrix::zeros(0, 0);
    }
    if rows == 0 {
        return DMatrix::identity(cols, cols);
    }
    // Kernel of A equals kernel of the PSD matrix A^T A.
    kernel_basis(&(a.transpose() * a), tol.map(|t| t * t))
}

/// Least-norm solution of `A x = b` via the SVD pseudoinverse.
pub fn least_norm_solve(a: &DMatrix<f64>, b: &DVector<f64>, tol: Option<f64>) -> DVector<f64> {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return DVector::zeros(cols);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |m, v| m.max(*v));
    let cut = tol.unwrap_or_else(|| default_zero_tol(rows.max(cols), smax));
    svd.solve(b, cut).expect("svd solve")
}

/// Largest singular value (0 for empty matrices).
pub fn operator_norm(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    let svd = a.clone().svd(false, false);
    svd.singular_values.iter().fold(0.0f64, |m, v| m.max(*v))
}

/// Operator-norm residual of `Q^T Q - I`, the orthogonality defect of `Q`.
pub fn orthogonality_residual(q: &DMatrix<f64>) -> f64 {
    let n = q.ncols();
    let gram = q.transpose() * q;
    operator_norm(&(gram - DMatrix::identity(n, n)))
}

/// Whether `a` is symmetric positive-definite within `tol`.
pub fn is_spd(a: &DMatrix<f64>, tol: f64) -> bool {
    if a.nrows() != a.ncols() {
        return false;
    }
    if a.nrows() == 0 {
        return true;
    }
    if symmetry_residual(a) > tol {
        return false;
    }
    let (vals, _) = sorted_symmetric_eigen(a);
    vals[0] > tol
}

/// Frobenius inner product norm squared.
pub fn frobenius_sq(a: &DMatrix<f64>) -> f64 {
    a.iter().map(|v| v * v).sum()
}
