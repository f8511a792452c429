//! ℓ₁ Lewis weights and the Lewis position of the polar body `Z°`.
//!
//! The weights solve `w_i = (a_iᵀ M(w)⁻¹ a_i)^{1/2}` with `M(w) = Aᵀ W⁻¹ A`.
//! With `T = M^{1/2}`, `u_i = T⁻¹a_i / ‖T⁻¹a_i‖` and `c_i = ‖T⁻¹a_i‖ = w_i`,
//! the body `K₁ = T Z° = {x : Σ c_i |⟨x, u_i⟩| <= 1}` satisfies
//! `Σ c_i u_i u_iᵀ = I`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::kernel::{psd_sqrt, KernelError};

pub const TOL_LEWIS: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LewisError {
    #[error("Lewis iteration did not converge in {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("Lewis matrix is numerically singular")]
    Singular,
    #[error("generator matrix must have full column rank and no zero rows")]
    BadGenerators,
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LewisWeights {
    pub weights: Vec<f64>,
    pub iterations: usize,
    /// Max relative change of the last update.
    pub change: f64,
    /// Relative fixed-point residual after each iteration.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LewisPosition {
    pub weights: Vec<f64>,
    pub transform: DMatrix<f64>,
    pub c: Vec<f64>,
    /// Rows are the unit directions `u_i`.
    pub directions: DMatrix<f64>,
    /// `‖Σ c_i u_i u_iᵀ - I‖_F`.
    pub residual: f64,
    pub iterations: usize,
}

fn lewis_matrix(a: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut scaled = a.clone();
    for (i, &wi) in w.iter().enumerate() {
        let s = 1.0 / wi.sqrt();
        scaled.row_mut(i).scale_mut(s);
    }
    scaled.transpose() * scaled
}

/// `a_iᵀ M⁻¹ a_i` for every row.
fn quadratic_forms(a: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<Vec<f64>, LewisError> {
    let chol = m.clone().cholesky().ok_or(LewisError::Singular)?;
    let sol = chol.solve(&a.transpose());
    let forms: Vec<f64> = (0..a.nrows())
        .map(|i| a.row(i).transpose().dot(&sol.column(i)))
        .collect();
    if forms.iter().any(|f| !f.is_finite() || *f <= 0.0) {
        return Err(LewisError::Singular);
    }
    Ok(forms)
}

fn isotropy_residual(c: &[f64], dirs: &DMatrix<f64>) -> f64 {
    let d = dirs.ncols();
    let mut acc = -DMatrix::<f64>::identity(d, d);
    for (i, &ci) in c.iter().enumerate() {
        let u = dirs.row(i).transpose();
        acc += &u * u.transpose() * ci;
    }
    acc.norm()
}

/// Fixed-point iteration `w ← (a_iᵀ M(w)⁻¹ a_i)^{1/2}` from `w = d/m`.
///
/// Stops once the relative change is below `tol` and the isotropy residual
/// of the induced position is below `tol` as well.
pub fn lewis_weights(
    a: &DMatrix<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<LewisWeights, LewisError> {
    let (m, d) = a.shape();
    if m == 0 || d == 0 || m < d || (0..m).any(|i| a.row(i).amax() == 0.0) {
        return Err(LewisError::BadGenerators);
    }
    let mut w = vec![d as f64 / m as f64; m];
    let mut history = Vec::new();
    let mut change = f64::INFINITY;
    for it in 1..=max_iter {
        let mmat = lewis_matrix(a, &w);
        let forms = quadratic_forms(a, &mmat)?;
        let next: Vec<f64> = forms.iter().map(|f| f.sqrt()).collect();
        change = next
            .iter()
            .zip(&w)
            .map(|(n, o)| ((n - o) / o).abs())
            .fold(0.0, f64::max);
        w = next;
        history.push(change);
        if change <= tol {
            let pos = position(a, &w, it)?;
            if pos.residual <= tol {
                return Ok(LewisWeights {
                    weights: w,
                    iterations: it,
                    change,
                    history,
                });
            }
        }
    }
    let residual = position(a, &w, max_iter)
        .map(|p| p.residual)
        .unwrap_or(change);
    Err(LewisError::NonConvergence {
        iterations: max_iter,
        residual: residual.max(change),
    })
}

fn position(a: &DMatrix<f64>, w: &[f64], iterations: usize) -> Result<LewisPosition, LewisError> {
    let d = a.ncols();
    let mmat = lewis_matrix(a, w);
    let t = psd_sqrt(&mmat)?;
    let t_inv = t.clone().try_inverse().ok_or(LewisError::Singular)?;
    let mut dirs = DMatrix::zeros(a.nrows(), d);
    let mut c = Vec::with_capacity(a.nrows());
    for i in 0..a.nrows() {
        let ti: DVector<f64> = &t_inv * a.row(i).transpose();
        let norm = ti.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(LewisError::Singular);
        }
        dirs.set_row(i, &(ti / norm).transpose());
        c.push(norm);
    }
    let residual = isotropy_residual(&c, &dirs);
    Ok(LewisPosition {
        weights: w.to_vec(),
        transform: t,
        c,
        directions: dirs,
        residual,
        iterations,
    })
}

/// Lewis position induced by converged weights.
pub fn lewis_transform(a: &DMatrix<f64>, weights: &LewisWeights) -> Result<LewisPosition, LewisError> {
    position(a, &weights.weights, weights.iterations)
}

/// Weights and position in one call.
pub fn lewis_position(a: &DMatrix<f64>, tol: f64, max_iter: usize) -> Result<LewisPosition, LewisError> {
    let w = lewis_weights(a, tol, max_iter)?;
    lewis_transform(a, &w)
}

impl LewisPosition {
    pub fn dim(&self) -> usize {
        self.directions.ncols()
    }

    /// Gauge of `K₁`: `Σ c_i |⟨x, u_i⟩|`.
    pub fn k1_norm(&self, x: &[f64]) -> f64 {
        let xv = DVector::from_column_slice(x);
        let proj = &self.directions * xv;
        proj.iter().zip(&self.c).map(|(p, c)| c * p.abs()).sum()
    }

    pub fn weight_sum(&self) -> f64 {
        self.c.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InclusionReport {
    pub samples: usize,
    /// Largest of `‖x‖₂ - ‖x‖_{K₁}` and `‖x‖_{K₁} - √d‖x‖₂` over samples.
    pub max_violation: f64,
    /// Direction attaining `max_violation`.
    pub worst_direction: Vec<f64>,
}

impl InclusionReport {
    pub fn passed(&self, tol: f64) -> bool {
        self.max_violation <= tol
    }
}

/// Sample unit directions and check `‖x‖₂ <= ‖x‖_{K₁} <= √d ‖x‖₂`.
pub fn check_inclusions<R: Rng + ?Sized>(
    pos: &LewisPosition,
    samples: usize,
    rng: &mut R,
) -> InclusionReport {
    let d = pos.dim();
    let root_d = (d as f64).sqrt();
    let mut worst = f64::NEG_INFINITY;
    let mut worst_dir = vec![0.0; d];
    for _ in 0..samples.max(1) {
        let mut x: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n == 0.0 {
            continue;
        }
        x.iter_mut().for_each(|v| *v /= n);
        let k = pos.k1_norm(&x);
        let viol = (1.0 - k).max(k - root_d);
        if viol > worst {
            worst = viol;
            worst_dir = x;
        }
    }
    InclusionReport {
        samples: samples.max(1),
        max_violation: worst.max(0.0),
        worst_direction: worst_dir,
    }
}
