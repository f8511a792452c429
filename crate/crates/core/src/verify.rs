//! Independent checks: exhaustive sign search, the polar description of
//! coordinate bodies, Gaussian width of the Lewis body, and report rows.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::coloring::BalanceReport;
use crate::kernel::{lp_solve, orthonormal_column_basis, KernelError, LpStatus, Polyhedron, Sense};
use crate::lewis::LewisPosition;
use crate::zonotope::{VectorFamily, Zonotope, ZonotopeError};

/// Largest family the exhaustive oracle accepts.
pub const ORACLE_MAX_N: usize = 22;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VerifyError {
    #[error("exhaustive search is capped at n = {ORACLE_MAX_N}, got n = {0}")]
    TooLarge(usize),
    #[error("vector family has no preimages; compute them with the norm LP first")]
    MissingPreimages,
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("LP did not reach an optimum ({0:?})")]
    Lp(LpStatus),
    #[error(transparent)]
    Zonotope(#[from] ZonotopeError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub best_signs: Vec<i8>,
    pub opt: f64,
    pub evaluations: u64,
}

fn signs_from_mask(n: usize, mask: u64) -> Vec<f64> {
    // mask order equals lexicographic order with -1 < +1; x_0 is pinned to +1.
    (0..n)
        .map(|i| {
            if i == 0 || mask >> (n - 1 - i) & 1 == 1 {
                1.0
            } else {
                -1.0
            }
        })
        .collect()
}

/// Exact `min_x ‖Σ x_i v_i‖_Z` over `x ∈ {±1}ⁿ` with `x_0 = +1`.
///
/// Ties go to the lexicographically smallest sign vector.
pub fn brute_force_min_discrepancy(z: &Zonotope, fam: &VectorFamily) -> Result<OracleResult, VerifyError> {
    let n = fam.len();
    if n > ORACLE_MAX_N {
        return Err(VerifyError::TooLarge(n));
    }
    if n == 0 {
        return Err(VerifyError::Argument("empty family".into()));
    }
    let count = 1u64 << (n - 1);
    let (opt, mask) = (0..count)
        .into_par_iter()
        .map(|mask| -> Result<(f64, u64), VerifyError> {
            let x = signs_from_mask(n, mask);
            Ok((z.norm(&fam.signed_sum(&x))?, mask))
        })
        .try_reduce(
            || (f64::INFINITY, u64::MAX),
            |a, b| {
                let pick_b = b.0 < a.0 || (b.0 == a.0 && b.1 < a.1);
                Ok(if pick_b { b } else { a })
            },
        )?;
    Ok(OracleResult {
        best_signs: signs_from_mask(n, mask).iter().map(|&s| s as i8).collect(),
        opt,
        evaluations: count,
    })
}

/// Both sides of `‖V_Sᵀy‖_Z = sup_{b ∈ B₁ᵐ ∩ F} ⟨Σ_{i∈S} y_i u_i, b⟩`,
/// where `F` is the column space of `A`.
#[derive(Debug, Clone)]
pub struct PolarCheck {
    basis: DMatrix<f64>,
}

impl PolarCheck {
    pub fn new(z: &Zonotope) -> Result<Self, VerifyError> {
        Ok(Self {
            basis: orthonormal_column_basis(z.generators(), 1e-12),
        })
    }

    pub fn sides(
        &self,
        z: &Zonotope,
        fam: &VectorFamily,
        subset: &[usize],
        y: &[f64],
    ) -> Result<(f64, f64), VerifyError> {
        if subset.is_empty() || subset.len() != y.len() {
            return Err(VerifyError::Argument("subset and y must be nonempty and of equal length".into()));
        }
        let u = fam.preimages().ok_or(VerifyError::MissingPreimages)?;
        if subset.iter().any(|&i| i >= fam.len()) {
            return Err(VerifyError::Argument("subset index out of range".into()));
        }
        let lhs = z.norm(&fam.combination(subset, y))?;

        let m = z.num_generators();
        let r = self.basis.ncols();
        let mut w = DVector::zeros(m);
        for (&i, &yi) in subset.iter().zip(y) {
            w += u.row(i).transpose() * yi;
        }
        // Variables: basis coordinates (r, free), b⁺ (m), b⁻ (m), slack.
        let nv = r + 2 * m + 1;
        let mut eq = DMatrix::zeros(m + 1, nv);
        eq.view_mut((0, 0), (m, r)).copy_from(&self.basis);
        for j in 0..m {
            eq[(j, r + j)] = -1.0;
            eq[(j, r + m + j)] = 1.0;
            eq[(m, r + j)] = 1.0;
            eq[(m, r + m + j)] = 1.0;
        }
        eq[(m, nv - 1)] = 1.0;
        let mut rhs = DVector::zeros(m + 1);
        rhs[m] = 1.0;
        let mut lower = vec![0.0; nv];
        lower[..r].fill(f64::NEG_INFINITY);
        let poly = Polyhedron::free(nv)
            .with_equalities(eq, rhs)?
            .with_bounds(lower, vec![f64::INFINITY; nv])?;
        let mut obj = vec![0.0; nv];
        for j in 0..m {
            obj[r + j] = w[j];
            obj[r + m + j] = -w[j];
        }
        let sol = lp_solve(&obj, &poly, Sense::Maximize)?;
        if !sol.is_optimal() {
            return Err(VerifyError::Lp(sol.status));
        }
        Ok((lhs, sol.objective))
    }
}

/// Largest `|LHS - RHS|` over `trials` Gaussian `y ∈ R^S`.
pub fn polar_identity_check<R: Rng + ?Sized>(
    z: &Zonotope,
    fam: &VectorFamily,
    subset: &[usize],
    trials: usize,
    rng: &mut R,
) -> Result<f64, VerifyError> {
    let check = PolarCheck::new(z)?;
    let mut gap: f64 = 0.0;
    for _ in 0..trials {
        let y: Vec<f64> = subset.iter().map(|_| rng.sample(StandardNormal)).collect();
        let (lhs, rhs) = check.sides(z, fam, subset, &y)?;
        gap = gap.max((lhs - rhs).abs());
    }
    Ok(gap)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WidthEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
    pub d: usize,
}

/// `max ⟨g, x⟩` over `K₁ = {x : Σ c_i |⟨x, u_i⟩| <= 1}`.
pub fn k1_support(pos: &LewisPosition, g: &[f64]) -> Result<f64, VerifyError> {
    let d = pos.dim();
    let m = pos.c.len();
    if g.len() != d {
        return Err(VerifyError::Argument("direction has wrong dimension".into()));
    }
    // Variables: x (d, free), s⁺ (m), s⁻ (m), slack.
    let nv = d + 2 * m + 1;
    let mut eq = DMatrix::zeros(m + 1, nv);
    eq.view_mut((0, 0), (m, d)).copy_from(&pos.directions);
    for j in 0..m {
        eq[(j, d + j)] = -1.0;
        eq[(j, d + m + j)] = 1.0;
        eq[(m, d + j)] = pos.c[j];
        eq[(m, d + m + j)] = pos.c[j];
    }
    eq[(m, nv - 1)] = 1.0;
    let mut rhs = DVector::zeros(m + 1);
    rhs[m] = 1.0;
    let mut lower = vec![0.0; nv];
    lower[..d].fill(f64::NEG_INFINITY);
    let poly = Polyhedron::free(nv)
        .with_equalities(eq, rhs)?
        .with_bounds(lower, vec![f64::INFINITY; nv])?;
    let mut obj = vec![0.0; nv];
    obj[..d].copy_from_slice(g);
    let sol = lp_solve(&obj, &poly, Sense::Maximize)?;
    if !sol.is_optimal() {
        return Err(VerifyError::Lp(sol.status));
    }
    Ok(sol.objective)
}

/// `K₁` is the polar of the zonotope generated by the rows `c_i u_i`, so its
/// support function is that zonotope's gauge.
pub fn k1_polar_zonotope(pos: &LewisPosition) -> Result<Zonotope, VerifyError> {
    let mut gens = pos.directions.clone();
    for (i, &c) in pos.c.iter().enumerate() {
        gens.row_mut(i).scale_mut(c);
    }
    Ok(Zonotope::new(gens)?)
}

/// Monte-Carlo estimate of `E sup_{x∈K₁} ⟨g, x⟩`.
///
/// Each supremum is the optimum of the support LP, evaluated through its
/// dual (the gauge LP of [`k1_polar_zonotope`]), which has `d` rows instead
/// of `m + 1`. [`k1_support`] solves the primal form.
pub fn width_estimate<R: Rng + ?Sized>(
    pos: &LewisPosition,
    samples: usize,
    rng: &mut R,
) -> Result<WidthEstimate, VerifyError> {
    if samples < 2 {
        return Err(VerifyError::Argument("width estimate needs at least 2 samples".into()));
    }
    let d = pos.dim();
    let zc = k1_polar_zonotope(pos)?;
    let mut values = Vec::with_capacity(samples);
    for _ in 0..samples {
        let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        values.push(zc.norm(&g)?);
    }
    let (mean, stderr) = mean_stderr(&values);
    Ok(WidthEstimate { mean, stderr, samples, d })
}

/// Sample mean and `sd / √n` with the unbiased variance.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `√(2/π) · max_j 1/‖u_j‖_{K₁}`: a width lower bound from single directions.
pub fn width_lower_bound(pos: &LewisPosition) -> f64 {
    let radius = (0..pos.directions.nrows())
        .map(|j| {
            let u: Vec<f64> = pos.directions.row(j).iter().copied().collect();
            1.0 / pos.k1_norm(&u)
        })
        .fold(0.0, f64::max);
    (2.0 / std::f64::consts::PI).sqrt() * radius
}

/// One line of a balancing report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub kind: String,
    pub d: usize,
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    pub c0: f64,
    pub discrepancy: f64,
    pub bound: f64,
    pub ratio: f64,
    pub rounds: usize,
    pub c_final: f64,
    pub opt: Option<f64>,
}

pub const CSV_HEADER: &str = "kind,d,m,n,seed,c0,discrepancy,bound,ratio,rounds,c_final,opt,opt_ratio";

impl ReportRow {
    /// `discrepancy / opt`, undefined when `opt` is absent or zero.
    pub fn opt_ratio(&self) -> Option<f64> {
        self.opt.filter(|&o| o > 0.0).map(|o| self.discrepancy / o)
    }

    pub fn to_csv(&self) -> String {
        let na = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.kind,
            self.d,
            self.m,
            self.n,
            self.seed,
            self.c0,
            self.discrepancy,
            self.bound,
            self.ratio,
            self.rounds,
            self.c_final,
            na(self.opt),
            na(self.opt_ratio())
        )
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "kind: {}\nd: {}\nm: {}\nn: {}\nseed: {}\nc0: {}\ndiscrepancy: {}\nbound: {}\nratio: {}\nrounds: {}\nc_final: {}\n",
            self.kind,
            self.d,
            self.m,
            self.n,
            self.seed,
            self.c0,
            self.discrepancy,
            self.bound,
            self.ratio,
            self.rounds,
            self.c_final
        );
        if let Some(opt) = self.opt {
            s.push_str(&format!("opt: {opt}\n"));
            match self.opt_ratio() {
                Some(r) => s.push_str(&format!("opt_ratio: {r}\n")),
                None => s.push_str("opt_ratio: NA\n"),
            }
        }
        s
    }
}

pub fn bound_report(kind: &str, report: &BalanceReport, oracle: Option<&OracleResult>) -> ReportRow {
    ReportRow {
        kind: kind.to_string(),
        d: report.d,
        m: report.m,
        n: report.n,
        seed: report.seed,
        c0: report.c0,
        discrepancy: report.discrepancy,
        bound: report.bound,
        ratio: report.ratio,
        rounds: report.rounds,
        c_final: report.c_final,
        opt: oracle.map(|o| o.opt),
    }
}
