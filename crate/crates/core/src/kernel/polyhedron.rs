use nalgebra::{DMatrix, DVector};

use super::KernelError;

/// `{z in R^n : E z = e, lower <= z <= upper}`; bounds may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyhedron {
    eq_matrix: DMatrix<f64>,
    eq_rhs: DVector<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Polyhedron {
    /// All of `R^n`: no equalities, free bounds.
    pub fn free(num_vars: usize) -> Self {
        Self {
            eq_matrix: DMatrix::zeros(0, num_vars),
            eq_rhs: DVector::zeros(0),
            lower: vec![f64::NEG_INFINITY; num_vars],
            upper: vec![f64::INFINITY; num_vars],
        }
    }

    /// Box `[lower, upper]` with no equalities.
    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, KernelError> {
        let n = lower.len();
        Self::free(n).with_bounds(lower, upper)
    }

    pub fn with_equalities(
        mut self,
        matrix: DMatrix<f64>,
        rhs: DVector<f64>,
    ) -> Result<Self, KernelError> {
        if matrix.ncols() != self.num_vars() {
            return Err(KernelError::Dimension(format!(
                "equality matrix has {} columns, polyhedron has {} variables",
                matrix.ncols(),
                self.num_vars()
            )));
        }
        if matrix.nrows() != rhs.len() {
            return Err(KernelError::Dimension(format!(
                "equality matrix has {} rows but right-hand side has length {}",
                matrix.nrows(),
                rhs.len()
            )));
        }
        if matrix.iter().chain(rhs.iter()).any(|x| !x.is_finite()) {
            return Err(KernelError::Dimension("non-finite equality data".into()));
        }
        self.eq_matrix = matrix;
        self.eq_rhs = rhs;
        Ok(self)
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, KernelError> {
        if lower.len() != self.num_vars() || upper.len() != self.num_vars() {
            return Err(KernelError::Dimension(format!(
                "bounds have lengths {}/{}, expected {}",
                lower.len(),
                upper.len(),
                self.num_vars()
            )));
        }
        for (j, (&lo, &hi)) in lower.iter().zip(&upper).enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY
            {
                return Err(KernelError::Dimension(format!(
                    "invalid bounds [{lo}, {hi}] on variable {j}"
                )));
            }
        }
        self.lower = lower;
        self.upper = upper;
        Ok(self)
    }

    /// Replace the bounds of a single variable.
    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) -> Result<(), KernelError> {
        if var >= self.num_vars() {
            return Err(KernelError::Dimension(format!("no variable {var}")));
        }
        if lower.is_nan() || upper.is_nan() || lower > upper {
            return Err(KernelError::Dimension(format!(
                "invalid bounds [{lower}, {upper}] on variable {var}"
            )));
        }
        self.lower[var] = lower;
        self.upper[var] = upper;
        Ok(())
    }

    pub fn num_vars(&self) -> usize {
        self.lower.len()
    }

    pub fn num_equalities(&self) -> usize {
        self.eq_matrix.nrows()
    }

    pub fn eq_matrix(&self) -> &DMatrix<f64> {
        &self.eq_matrix
    }

    pub fn eq_rhs(&self) -> &DVector<f64> {
        &self.eq_rhs
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// True when every variable has `lower == upper`.
    pub fn is_fully_fixed(&self) -> bool {
        self.lower.iter().zip(&self.upper).all(|(lo, hi)| lo == hi)
    }

    /// Largest violation of any constraint at `z` (bounds and equalities).
    pub fn max_violation(&self, z: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, &v) in z.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        for i in 0..self.num_equalities() {
            let row_val: f64 = (0..self.num_vars())
                .map(|j| self.eq_matrix[(i, j)] * z[j])
                .sum();
            worst = worst.max((row_val - self.eq_rhs[i]).abs());
        }
        worst
    }

    /// Feasibility test scaled by the magnitude of the data.
    pub fn contains(&self, z: &[f64], tol: f64) -> bool {
        z.len() == self.num_vars() && self.max_violation(z) <= tol * (1.0 + self.data_scale(z))
    }

    pub(crate) fn data_scale(&self, z: &[f64]) -> f64 {
        let emax = self.eq_matrix.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let rmax = self.eq_rhs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let zmax = z.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        rmax.max(emax * zmax)
    }
}
