use nalgebra::DMatrix;

use super::KernelError;

/// Symmetric PSD square root via the spectral decomposition.
///
/// Eigenvalues down to `-1e-10 * max(1, ‖M‖)` are clamped to zero; anything
/// more negative is rejected.
pub fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>, KernelError> {
    if !m.is_square() {
        return Err(KernelError::Dimension(format!(
            "psd_sqrt needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = m.amax().max(1.0);
    let asymmetry = (m - m.transpose()).amax();
    if asymmetry > 1e-10 * scale {
        return Err(KernelError::NotSymmetric { asymmetry });
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let min_eig = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min_eig < -1e-10 * scale {
        return Err(KernelError::Indefinite {
            min_eigenvalue: min_eig,
        });
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let q = &eig.eigenvectors;
    let s = q * DMatrix::from_diagonal(&roots) * q.transpose();
    Ok((&s + s.transpose()) * 0.5)
}

/// Orthonormal basis (as columns) of the column space of `m`.
///
/// Singular values below `rel_tol * σ_max` are treated as zero.
pub fn orthonormal_column_basis(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let rows = m.nrows();
    if m.ncols() == 0 || rows == 0 {
        return DMatrix::zeros(rows, 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return DMatrix::zeros(rows, 0);
    }
    let keep: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s > rel_tol * smax)
        .map(|(i, _)| i)
        .collect();
    let mut basis = DMatrix::zeros(rows, keep.len());
    for (k, &i) in keep.iter().enumerate() {
        basis.set_column(k, &u.column(i));
    }
    basis
}
