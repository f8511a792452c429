//! Zonotopes `Z = Aᵀ B∞ᵐ`, their gauge, the gauge of the polar body, and
//! the input normalization that makes an instance full-dimensional.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::kernel::{lp_solve, orthonormal_column_basis, KernelError, LpSolution, LpStatus, Polyhedron, Sense, TOL_FEAS};

/// Relative residual below which a vector counts as lying in the span of the generators.
pub const SPAN_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ZonotopeError {
    #[error("generator matrix is empty or has no nonzero row")]
    Degenerate,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("vector {index} lies outside the span of the generators (residual {residual:e})")]
    OutsideSpan { index: usize, residual: f64 },
    #[error("point lies outside the span of the generators (residual {residual:e})")]
    PointOutsideSpan { residual: f64 },
    #[error("vector {index} has zonotope norm {norm} > 1")]
    OutsideBody { index: usize, norm: f64 },
    #[error("{n} vectors exceed the ambient dimension {d}")]
    TooManyVectors { n: usize, d: usize },
    #[error("preimage of vector {index} is invalid: {reason}")]
    BadPreimage { index: usize, reason: String },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// The body `Aᵀ B∞ᵐ`; rows of `A` are segment generators.
#[derive(Debug, Clone, PartialEq)]
pub struct Zonotope {
    a: DMatrix<f64>,
}

impl Zonotope {
    /// Wraps a generator matrix. Requires `m >= 1`, `d >= 1` and no zero rows;
    /// full rank is only guaranteed after [`preprocess`].
    pub fn new(a: DMatrix<f64>) -> Result<Self, ZonotopeError> {
        if a.nrows() == 0 || a.ncols() == 0 {
            return Err(ZonotopeError::Degenerate);
        }
        if a.iter().any(|x| !x.is_finite()) {
            return Err(ZonotopeError::Dimension("non-finite generator entry".into()));
        }
        if (0..a.nrows()).any(|i| a.row(i).iter().all(|&x| x == 0.0)) {
            return Err(ZonotopeError::Degenerate);
        }
        Ok(Self { a })
    }

    /// The unit cube `[-1, 1]^d`.
    pub fn cube(d: usize) -> Self {
        Self {
            a: DMatrix::identity(d, d),
        }
    }

    pub fn generators(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn num_generators(&self) -> usize {
        self.a.nrows()
    }

    /// `λ Z`, same orientation.
    pub fn scaled(&self, lambda: f64) -> Self {
        Self { a: &self.a * lambda }
    }

    /// Gauge `‖x‖_Z` together with a minimizing coefficient vector `u`
    /// (`Aᵀu = x`, `‖u‖∞ = ‖x‖_Z`).
    pub fn norm_with_preimage(&self, x: &[f64]) -> Result<(f64, Vec<f64>), ZonotopeError> {
        let d = self.dim();
        let m = self.num_generators();
        if x.len() != d {
            return Err(ZonotopeError::Dimension(format!(
                "point has dimension {}, zonotope has {}",
                x.len(),
                d
            )));
        }
        if x.iter().all(|&v| v == 0.0) {
            return Ok((0.0, vec![0.0; m]));
        }
        // Canonical orientation: the gauge is symmetric, so solve for the sign
        // with a positive leading entry and mirror the preimage.
        let flip = x.iter().find(|&&v| v != 0.0).is_some_and(|&v| v < 0.0);
        let xs: Vec<f64> = if flip { x.iter().map(|v| -v).collect() } else { x.to_vec() };

        let sol = self.norm_lp(&xs)?;
        let lambda = match sol.status {
            LpStatus::Optimal => sol.objective,
            LpStatus::Unbounded => {
                return Err(KernelError::Numerical("norm LP unbounded for nonzero x".into()).into())
            }
            LpStatus::Infeasible => {
                return Err(KernelError::Numerical("norm LP infeasible".into()).into())
            }
        };
        let residual = self.span_residual(&xs);
        if lambda <= 0.0 || residual > SPAN_TOL * (1.0 + norm2(&xs)) {
            return Err(ZonotopeError::PointOutsideSpan { residual });
        }
        let sgn = if flip { -1.0 } else { 1.0 };
        let u: Vec<f64> = sol.point[..m].iter().map(|v| sgn * v / lambda).collect();
        Ok((1.0 / lambda, u))
    }

    /// `max λ  s.t.  Aᵀu - λx = 0,  -1 <= u <= 1,  λ >= 0`; then `‖x‖_Z = 1/λ*`.
    fn norm_lp(&self, x: &[f64]) -> Result<LpSolution, ZonotopeError> {
        let d = self.dim();
        let m = self.num_generators();
        let mut eq = DMatrix::zeros(d, m + 1);
        eq.view_mut((0, 0), (d, m)).copy_from(&self.a.transpose());
        for i in 0..d {
            eq[(i, m)] = -x[i];
        }
        let mut lower = vec![-1.0; m + 1];
        let mut upper = vec![1.0; m + 1];
        lower[m] = 0.0;
        upper[m] = f64::INFINITY;
        let poly = Polyhedron::free(m + 1)
            .with_equalities(eq, DVector::zeros(d))?
            .with_bounds(lower, upper)?;
        let mut c = vec![0.0; m + 1];
        c[m] = 1.0;
        Ok(lp_solve(&c, &poly, Sense::Maximize)?)
    }

    /// `‖x‖_Z = min{‖u‖∞ : Aᵀu = x}`.
    pub fn norm(&self, x: &[f64]) -> Result<f64, ZonotopeError> {
        self.norm_with_preimage(x).map(|(t, _)| t)
    }

    /// A dual certificate `y` with `⟨x, y⟩ = ‖x‖_Z · ‖Ay‖₁`.
    pub fn norm_certificate(&self, x: &[f64]) -> Result<Vec<f64>, ZonotopeError> {
        if x.len() != self.dim() {
            return Err(ZonotopeError::Dimension("certificate point dimension".into()));
        }
        let sol = self.norm_lp(x)?;
        if !sol.is_optimal() {
            return Err(KernelError::Numerical("certificate LP not optimal".into()).into());
        }
        // The λ column is -x, so its zero reduced cost gives ⟨x, y⟩ = -1.
        Ok(sol.duals.iter().map(|v| -v).collect())
    }

    /// Gauge of the polar body: `‖Ay‖₁ = Σ |⟨a_i, y⟩|`.
    pub fn polar_norm(&self, y: &[f64]) -> Result<f64, ZonotopeError> {
        if y.len() != self.dim() {
            return Err(ZonotopeError::Dimension(format!(
                "point has dimension {}, zonotope has {}",
                y.len(),
                self.dim()
            )));
        }
        Ok((0..self.num_generators())
            .map(|i| {
                self.a
                    .row(i)
                    .iter()
                    .zip(y)
                    .map(|(a, b)| a * b)
                    .sum::<f64>()
                    .abs()
            })
            .sum())
    }

    /// `x ∈ tZ`, up to `TOL_FEAS`.
    pub fn contains(&self, x: &[f64], t: f64) -> Result<bool, ZonotopeError> {
        Ok(self.norm(x)? <= t + TOL_FEAS)
    }

    /// Euclidean distance from `x` to the column space of `Aᵀ`.
    pub fn span_residual(&self, x: &[f64]) -> f64 {
        let q = orthonormal_column_basis(&self.a.transpose(), 1e-12);
        let xv = DVector::from_column_slice(x);
        let proj = &q * (q.transpose() * &xv);
        (xv - proj).norm()
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Vectors `v_1..v_n` (rows of `V`), optionally with cube preimages `u_i`
/// (rows of `U`, `v_i = Aᵀu_i`).
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFamily {
    v: DMatrix<f64>,
    u: Option<DMatrix<f64>>,
}

impl VectorFamily {
    pub fn new(v: DMatrix<f64>) -> Self {
        Self { v, u: None }
    }

    pub fn with_preimages(v: DMatrix<f64>, u: DMatrix<f64>) -> Self {
        Self { v, u: Some(u) }
    }

    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn preimages(&self) -> Option<&DMatrix<f64>> {
        self.u.as_ref()
    }

    pub fn len(&self) -> usize {
        self.v.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.v.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.v.ncols()
    }

    pub fn vector(&self, i: usize) -> Vec<f64> {
        self.v.row(i).iter().copied().collect()
    }

    /// `Σ coeffs_i v_i` for the listed indices.
    pub fn combination(&self, indices: &[usize], coeffs: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.dim()];
        for (&i, &c) in indices.iter().zip(coeffs) {
            if c == 0.0 {
                continue;
            }
            for (a, v) in acc.iter_mut().zip(self.v.row(i).iter()) {
                *a += c * v;
            }
        }
        acc
    }

    /// `Σ x_i v_i` over all vectors.
    pub fn signed_sum(&self, x: &[f64]) -> Vec<f64> {
        let idx: Vec<usize> = (0..self.len()).collect();
        self.combination(&idx, x)
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            v: &self.v * lambda,
            u: self.u.clone(),
        }
    }

    /// Fill in preimages from the norm LP when they are missing.
    pub fn ensure_preimages(&mut self, z: &Zonotope) -> Result<(), ZonotopeError> {
        if self.u.is_some() {
            return Ok(());
        }
        let mut u = DMatrix::zeros(self.len(), z.num_generators());
        for i in 0..self.len() {
            let (_, pre) = z.norm_with_preimage(&self.vector(i))?;
            for (j, p) in pre.iter().enumerate() {
                u[(i, j)] = *p;
            }
        }
        self.u = Some(u);
        Ok(())
    }
}

/// Maps reduced-coordinate vectors back to the original ambient space.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisChange {
    /// `d_raw x r` with orthonormal columns; `None` when no reduction happened.
    pub basis: Option<DMatrix<f64>>,
    /// Indices of the generator rows kept from the raw matrix.
    pub kept_generators: Vec<usize>,
    pub raw_dim: usize,
}

impl BasisChange {
    pub fn to_original(&self, x: &[f64]) -> Vec<f64> {
        match &self.basis {
            None => x.to_vec(),
            Some(q) => (q * DVector::from_column_slice(x)).iter().copied().collect(),
        }
    }
}

/// Options for [`preprocess`].
#[derive(Debug, Clone, Copy)]
pub struct PreprocessOptions {
    pub tol_feas: f64,
    /// Shrink vectors with `‖v‖_Z > 1` onto the boundary instead of rejecting.
    pub rescale_outside: bool,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        Self {
            tol_feas: TOL_FEAS,
            rescale_outside: false,
        }
    }
}

/// Drop zero generators, reduce to the span of the generators, and check
/// that every vector lies in `Z` and that `n <= d`.
pub fn preprocess(
    a_raw: &DMatrix<f64>,
    family: &VectorFamily,
    opts: PreprocessOptions,
) -> Result<(Zonotope, VectorFamily, BasisChange), ZonotopeError> {
    let d_raw = a_raw.ncols();
    if family.dim() != d_raw {
        return Err(ZonotopeError::Dimension(format!(
            "vectors have dimension {}, generators {}",
            family.dim(),
            d_raw
        )));
    }
    let kept: Vec<usize> = (0..a_raw.nrows())
        .filter(|&i| a_raw.row(i).iter().any(|&x| x != 0.0))
        .collect();
    if kept.is_empty() || d_raw == 0 {
        return Err(ZonotopeError::Degenerate);
    }
    let mut a = DMatrix::zeros(kept.len(), d_raw);
    for (k, &i) in kept.iter().enumerate() {
        a.set_row(k, &a_raw.row(i));
    }

    let q = orthonormal_column_basis(&a.transpose(), 1e-12);
    let rank = q.ncols();
    let v = family.vectors();
    for i in 0..family.len() {
        let vi = v.row(i).transpose();
        let resid = (&vi - &q * (q.transpose() * &vi)).norm();
        if resid > SPAN_TOL * (1.0 + vi.norm()) {
            return Err(ZonotopeError::OutsideSpan {
                index: i,
                residual: resid,
            });
        }
    }

    let (a_red, v_red, basis) = if rank < d_raw {
        (&a * &q, v * &q, Some(q))
    } else {
        (a.clone(), v.clone(), None)
    };

    let u_red = match family.preimages() {
        None => None,
        Some(u) => {
            if u.nrows() != family.len() || u.ncols() != a_raw.nrows() {
                return Err(ZonotopeError::Dimension(format!(
                    "preimages are {}x{}, expected {}x{}",
                    u.nrows(),
                    u.ncols(),
                    family.len(),
                    a_raw.nrows()
                )));
            }
            for i in 0..family.len() {
                let ui = u.row(i);
                if ui.amax() > 1.0 + opts.tol_feas {
                    return Err(ZonotopeError::BadPreimage {
                        index: i,
                        reason: format!("‖u‖∞ = {} > 1", ui.amax()),
                    });
                }
                let recon = a_raw.transpose() * ui.transpose();
                let err = (recon - v.row(i).transpose()).norm();
                if err > 1e-8 {
                    return Err(ZonotopeError::BadPreimage {
                        index: i,
                        reason: format!("‖Aᵀu - v‖₂ = {err:e}"),
                    });
                }
            }
            let mut uk = DMatrix::zeros(family.len(), kept.len());
            for (k, &j) in kept.iter().enumerate() {
                uk.set_column(k, &u.column(j));
            }
            Some(uk)
        }
    };

    let zono = Zonotope { a: a_red };
    if family.len() > zono.dim() {
        return Err(ZonotopeError::TooManyVectors {
            n: family.len(),
            d: zono.dim(),
        });
    }
    let mut v_out = v_red;
    let mut u_out = u_red;
    for i in 0..family.len() {
        let vi: Vec<f64> = v_out.row(i).iter().copied().collect();
        let norm = zono.norm(&vi)?;
        if norm > 1.0 + opts.tol_feas {
            if !opts.rescale_outside {
                return Err(ZonotopeError::OutsideBody { index: i, norm });
            }
            let row = v_out.row(i) / norm;
            v_out.set_row(i, &row);
            // Rescaled vectors get fresh preimages below.
            u_out = None;
        }
    }
    let mut fam = match u_out {
        Some(u) => VectorFamily::with_preimages(v_out, u),
        None => VectorFamily::new(v_out),
    };
    if family.preimages().is_some() && fam.preimages().is_none() {
        fam.ensure_preimages(&zono)?;
    }
    Ok((
        zono,
        fam,
        BasisChange {
            basis,
            kept_generators: kept,
            raw_dim: d_raw,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_gen() -> Zonotope {
        Zonotope::new(DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0])).unwrap()
    }

    #[test]
    fn cube_norm_is_linf() {
        assert!((Zonotope::cube(2).norm(&[3.0, 0.0]).unwrap() - 3.0).abs() < 1e-12);
        assert!((Zonotope::cube(3).norm(&[0.5, -0.7, 0.2]).unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn three_generator_norm() {
        let z = three_gen();
        let (t, u) = z.norm_with_preimage(&[2.0, 2.0]).unwrap();
        assert!((t - 1.0).abs() < 1e-12);
        assert!(u.iter().all(|x| x.abs() <= 1.0 + 1e-12));
        assert!((u[0] + u[2] - 2.0).abs() < 1e-12 && (u[1] + u[2] - 2.0).abs() < 1e-12);
        assert_eq!(z.norm(&[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn polar_norm_direct() {
        assert_eq!(Zonotope::cube(2).polar_norm(&[1.0, 1.0]).unwrap(), 2.0);
        assert_eq!(three_gen().polar_norm(&[1.0, 1.0]).unwrap(), 4.0);
        assert_eq!(three_gen().polar_norm(&[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn membership_examples() {
        let c = Zonotope::cube(2);
        assert!(c.contains(&[1.0, 1.0], 1.0).unwrap());
        assert!(!c.contains(&[1.01, 0.0], 1.0).unwrap());
        assert!(!three_gen().contains(&[2.0, 2.0], 0.99).unwrap());
    }

    #[test]
    fn outside_span_is_an_error() {
        let z = Zonotope::new(DMatrix::from_row_slice(1, 2, &[1.0, 0.0])).unwrap();
        assert!(matches!(
            z.norm(&[0.0, 1.0]),
            Err(ZonotopeError::PointOutsideSpan { .. })
        ));
    }

    #[test]
    fn certificate_attains_duality() {
        let z = three_gen();
        let x = [0.3, -1.7];
        let y = z.norm_certificate(&x).unwrap();
        let lhs: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
        let rhs = z.norm(&x).unwrap() * z.polar_norm(&y).unwrap();
        assert!((lhs - rhs).abs() < 1e-9, "{lhs} vs {rhs}");
    }

    #[test]
    fn preprocess_identity_unchanged() {
        let v = DMatrix::from_row_slice(2, 2, &[0.5, -1.0, 0.2, 0.3]);
        let fam = VectorFamily::new(v.clone());
        let (z, f, bc) = preprocess(&DMatrix::identity(2, 2), &fam, Default::default()).unwrap();
        assert_eq!(z.generators(), &DMatrix::<f64>::identity(2, 2));
        assert_eq!(f.vectors(), &v);
        assert!(bc.basis.is_none());
    }

    #[test]
    fn preprocess_drops_zero_rows() {
        let a = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let fam = VectorFamily::new(DMatrix::from_row_slice(1, 2, &[1.0, 0.5]));
        let (z, _, bc) = preprocess(&a, &fam, Default::default()).unwrap();
        assert_eq!(z.num_generators(), 3);
        assert_eq!(bc.kept_generators, vec![0, 1, 3]);
    }

    #[test]
    fn preprocess_rejections() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let fam = VectorFamily::new(DMatrix::from_row_slice(1, 2, &[0.5, 0.5]));
        assert!(matches!(
            preprocess(&a, &fam, Default::default()),
            Err(ZonotopeError::OutsideSpan { index: 0, .. })
        ));
        let fam = VectorFamily::new(DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 1.5, 0.0]));
        assert!(matches!(
            preprocess(&DMatrix::identity(2, 2), &fam, Default::default()),
            Err(ZonotopeError::OutsideBody { index: 1, .. })
        ));
        let opts = PreprocessOptions {
            rescale_outside: true,
            ..Default::default()
        };
        let (_, f, _) = preprocess(&DMatrix::identity(2, 2), &fam, opts).unwrap();
        assert!((f.vectors()[(1, 0)] - 1.0).abs() < 1e-12);
        let fam = VectorFamily::new(DMatrix::from_row_slice(2, 1, &[0.5, 0.25]));
        assert!(matches!(
            preprocess(&DMatrix::identity(1, 1), &fam, Default::default()),
            Err(ZonotopeError::TooManyVectors { n: 2, d: 1 })
        ));
    }
}
