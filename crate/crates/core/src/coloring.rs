//! Coordinate bodies, a constructive partial-coloring step and the iterated
//! balancing driver.
//!
//! For an index set `S` the coordinate body is `K_S = {a ∈ R^S : Σ a_i v_i ∈ Z}`.
//! It is represented through the lift `{(a, u) : Σ a_i v_i = Aᵀu, ‖u‖∞ <= s}`,
//! whose projection onto the `a` coordinates is `s K_S`.
//!
//! A partial-coloring step draws `g ~ N(0, I_S)` and projects it onto
//! `s K_S ∩ ([-1, 1]^S - y)`. Coordinates that land within `TOL_TIGHT` of
//! `±1` are frozen. A draw is accepted once at least half of the active
//! coordinates are frozen; after `retries` rejected draws the multiplier `c`
//! in `s = c √(k log₂(2d/k))` doubles.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::kernel::{lp_solve, project_weighted, KernelError, Polyhedron, Sense};
use crate::zonotope::{VectorFamily, Zonotope, ZonotopeError};

/// Distance to `±1` below which a coordinate counts as colored.
pub const TOL_TIGHT: f64 = 1e-7;
/// Largest active set handed to exhaustive search under `exact_finish`.
pub const EXACT_FINISH_MAX: usize = 8;
/// Constant `C` for which `‖Σ x_i v_i‖_Z <= C √(n log₂(2d/n))` is expected
/// on the benchmark suite with default parameters.
pub const C_IMPL: f64 = 8.0;
/// Default standard deviation of the Gaussian target.
pub const GAUSS_SCALE: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ColoringError {
    #[error("empty index set")]
    EmptyIndexSet,
    #[error("scale must be positive, got {0}")]
    BadScale(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("point is not strictly inside the box on the active set")]
    NotActive,
    #[error(
        "partial coloring gave up after {attempts} draws (best: {best_tight} of {needed} tight, increment {best_increment})"
    )]
    Exhausted {
        attempts: usize,
        needed: usize,
        best_tight: usize,
        best_increment: f64,
        best_point: Vec<f64>,
    },
    #[error(transparent)]
    Zonotope(#[from] ZonotopeError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// `√(k · log₂(2d/k))`.
pub fn scale_profile(k: usize, d: usize) -> f64 {
    let k = k as f64;
    (k * (2.0 * d as f64 / k).log2()).sqrt()
}

/// The lifted description of `s K_S`.
#[derive(Debug, Clone)]
pub struct CoordinateBodyLift {
    indices: Vec<usize>,
    scale: f64,
    /// Variables `(a_S, u)`; equalities `V_Sᵀa - Aᵀu = 0`; `|u_j| <= s`, `a` free.
    poly: Polyhedron,
    gens: DMatrix<f64>,
    vs_t: DMatrix<f64>,
}

pub fn build_coordinate_body(
    z: &Zonotope,
    fam: &VectorFamily,
    indices: &[usize],
    scale: f64,
) -> Result<CoordinateBodyLift, ColoringError> {
    if indices.is_empty() {
        return Err(ColoringError::EmptyIndexSet);
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(ColoringError::BadScale(scale));
    }
    if fam.dim() != z.dim() {
        return Err(ColoringError::Dimension(format!(
            "vectors have dimension {}, zonotope {}",
            fam.dim(),
            z.dim()
        )));
    }
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != indices.len() || *sorted.last().unwrap() >= fam.len() {
        return Err(ColoringError::Dimension("index set has repeats or out-of-range entries".into()));
    }
    let d = z.dim();
    let m = z.num_generators();
    let k = sorted.len();
    let mut vs_t = DMatrix::zeros(d, k);
    for (c, &i) in sorted.iter().enumerate() {
        vs_t.set_column(c, &fam.vectors().row(i).transpose());
    }
    let mut eq = DMatrix::zeros(d, k + m);
    eq.view_mut((0, 0), (d, k)).copy_from(&vs_t);
    eq.view_mut((0, k), (d, m)).copy_from(&(-z.generators().transpose()));
    let mut lower = vec![f64::NEG_INFINITY; k + m];
    let mut upper = vec![f64::INFINITY; k + m];
    for j in k..k + m {
        lower[j] = -scale;
        upper[j] = scale;
    }
    let poly = Polyhedron::free(k + m)
        .with_equalities(eq, DVector::zeros(d))?
        .with_bounds(lower, upper)?;
    Ok(CoordinateBodyLift {
        indices: sorted,
        scale,
        poly,
        gens: z.generators().clone(),
        vs_t,
    })
}

impl CoordinateBodyLift {
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn polyhedron(&self) -> &Polyhedron {
        &self.poly
    }

    /// Lift restricted to coefficient bounds `lower <= a <= upper`.
    pub fn with_box(&self, lower: &[f64], upper: &[f64]) -> Result<Polyhedron, ColoringError> {
        let k = self.indices.len();
        if lower.len() != k || upper.len() != k {
            return Err(ColoringError::Dimension("box bounds length".into()));
        }
        let mut lo = self.poly.lower().to_vec();
        let mut hi = self.poly.upper().to_vec();
        lo[..k].copy_from_slice(lower);
        hi[..k].copy_from_slice(upper);
        Ok(self.poly.clone().with_bounds(lo, hi)?)
    }

    /// Feasibility of the lift with `a` fixed, i.e. `a ∈ s K_S`.
    pub fn contains(&self, a: &[f64]) -> Result<bool, ColoringError> {
        let k = self.indices.len();
        if a.len() != k {
            return Err(ColoringError::Dimension("coefficient vector length".into()));
        }
        let m = self.gens.nrows();
        let target = &self.vs_t * DVector::from_column_slice(a);
        let poly = Polyhedron::free(m)
            .with_equalities(self.gens.transpose(), target)?
            .with_bounds(vec![-self.scale; m], vec![self.scale; m])?;
        Ok(lp_solve(&vec![0.0; m], &poly, Sense::Minimize)?.is_optimal())
    }
}

/// Tuning of the partial-coloring step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColoringParams {
    pub c0: f64,
    pub retries: usize,
    pub max_doublings: usize,
    pub tol_tight: f64,
    pub exact_finish: bool,
    /// Standard deviation of the Gaussian target.
    pub gauss_scale: f64,
}

impl Default for ColoringParams {
    fn default() -> Self {
        Self {
            c0: 2.0,
            retries: 16,
            max_doublings: 30,
            tol_tight: TOL_TIGHT,
            exact_finish: false,
            gauss_scale: GAUSS_SCALE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartialColoring {
    /// New values on the index set, in index-set order.
    pub y: Vec<f64>,
    /// `‖Σ (y_i - y'_i) v_i‖_Z`.
    pub increment: f64,
    /// `c √(k log₂(2d/k))` for the accepted multiplier.
    pub scale_used: f64,
    pub multiplier: f64,
    pub attempts: usize,
    pub tight: usize,
    /// Chosen by endpoint enumeration instead of a Gaussian projection.
    pub enumerated: bool,
}

fn tighten(y: &mut [f64], tol: f64) -> usize {
    let mut count = 0;
    for v in y.iter_mut() {
        *v = v.clamp(-1.0, 1.0);
        if v.abs() >= 1.0 - tol {
            *v = v.signum();
            count += 1;
        }
    }
    count
}

fn increment_norm(
    z: &Zonotope,
    fam: &VectorFamily,
    indices: &[usize],
    y: &[f64],
    y_new: &[f64],
) -> Result<f64, ColoringError> {
    let diff: Vec<f64> = y.iter().zip(y_new).map(|(a, b)| a - b).collect();
    Ok(z.norm(&fam.combination(indices, &diff))?)
}

/// One round: move `y` (given on `indices`, all strictly inside `(-1, 1)`)
/// so that at least `⌈k/2⌉` coordinates reach `±1`.
pub fn partial_coloring<R: Rng + ?Sized>(
    z: &Zonotope,
    fam: &VectorFamily,
    indices: &[usize],
    y: &[f64],
    params: &ColoringParams,
    rng: &mut R,
) -> Result<PartialColoring, ColoringError> {
    let k = indices.len();
    if k == 0 {
        return Err(ColoringError::EmptyIndexSet);
    }
    if y.len() != k {
        return Err(ColoringError::Dimension("y length differs from index set".into()));
    }
    if y.iter().any(|v| !(v.abs() < 1.0)) {
        return Err(ColoringError::NotActive);
    }
    let d = z.dim();
    let profile = scale_profile(k, d);
    if k <= 2 {
        return enumerate_endpoints(z, fam, indices, y, params, profile);
    }

    let needed = k.div_ceil(2);
    let m = z.num_generators();
    let lower: Vec<f64> = y.iter().map(|v| -1.0 - v).collect();
    let upper: Vec<f64> = y.iter().map(|v| 1.0 - v).collect();
    let mut weights = vec![0.0; k + m];
    weights[..k].fill(1.0);
    let start = vec![0.0; k + m];

    let mut attempts = 0;
    let mut best: Option<(usize, f64, Vec<f64>)> = None;
    let mut c = params.c0;
    for _ in 0..=params.max_doublings {
        let scale = c * profile;
        // Leave room for the clamping of near-tight coordinates.
        let shrunk = scale * (1.0 - 1e-9) - params.tol_tight * k as f64;
        let lift = build_coordinate_body(z, fam, indices, shrunk.max(0.5 * scale))?;
        let poly = lift.with_box(&lower, &upper)?;
        for _ in 0..params.retries.max(1) {
            attempts += 1;
            let mut target = vec![0.0; k + m];
            for t in target.iter_mut().take(k) {
                *t = params.gauss_scale * rng.sample::<f64, _>(StandardNormal);
            }
            let sol = match project_weighted(&target, &weights, &poly, Some(&start)) {
                Ok(s) => s,
                Err(KernelError::NonConvergence { .. } | KernelError::Numerical(_)) => continue,
                Err(e) => return Err(e.into()),
            };
            let mut y_new: Vec<f64> = y.iter().zip(&sol.point[..k]).map(|(a, b)| a + b).collect();
            let tight = tighten(&mut y_new, params.tol_tight);
            let increment = increment_norm(z, fam, indices, y, &y_new)?;
            if tight >= needed && increment <= scale {
                return Ok(PartialColoring {
                    y: y_new,
                    increment,
                    scale_used: scale,
                    multiplier: c,
                    attempts,
                    tight,
                    enumerated: false,
                });
            }
            let improves = best
                .as_ref()
                .is_none_or(|(bt, bi, _)| tight > *bt || (tight == *bt && increment < *bi));
            if improves {
                best = Some((tight, increment, y_new));
            }
        }
        c *= 2.0;
    }
    let (best_tight, best_increment, best_point) = best.unwrap_or((0, f64::INFINITY, y.to_vec()));
    Err(ColoringError::Exhausted {
        attempts,
        needed,
        best_tight,
        best_increment,
        best_point,
    })
}

/// Each coordinate becomes `-1`, `+1`, or stays; at least `⌈k/2⌉` must move
/// to an endpoint. The cheapest completion wins; ties prefer more fixed
/// coordinates, then enumeration order.
fn enumerate_endpoints(
    z: &Zonotope,
    fam: &VectorFamily,
    indices: &[usize],
    y: &[f64],
    params: &ColoringParams,
    profile: f64,
) -> Result<PartialColoring, ColoringError> {
    let k = indices.len();
    let needed = k.div_ceil(2);
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let total = 3usize.pow(k as u32);
    for code in 0..total {
        let mut rem = code;
        let mut cand = y.to_vec();
        let mut fixed = 0;
        for c in cand.iter_mut() {
            match rem % 3 {
                0 => {
                    *c = 1.0;
                    fixed += 1;
                }
                1 => {
                    *c = -1.0;
                    fixed += 1;
                }
                _ => {}
            }
            rem /= 3;
        }
        if fixed < needed {
            continue;
        }
        let inc = increment_norm(z, fam, indices, y, &cand)?;
        let better = best
            .as_ref()
            .is_none_or(|(bi, bf, _)| inc < *bi || (inc == *bi && fixed > *bf));
        if better {
            best = Some((inc, fixed, cand));
        }
    }
    let (increment, tight, y_new) = best.expect("at least one completion fixes every coordinate");
    let mut c = params.c0;
    let mut doublings = 0;
    while increment > c * profile && doublings < 64 {
        c *= 2.0;
        doublings += 1;
    }
    Ok(PartialColoring {
        y: y_new,
        increment,
        scale_used: c * profile,
        multiplier: c,
        attempts: 0,
        tight,
        enumerated: true,
    })
}

/// Log entry for one accepted round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub active_before: usize,
    pub active_after: usize,
    pub scale_used: f64,
    pub multiplier: f64,
    pub attempts: usize,
    pub tight_gained: usize,
    pub increment: f64,
    pub exact: bool,
}

/// Fractional coloring state between rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ColoringState {
    pub y: Vec<f64>,
    pub round: usize,
    pub log: Vec<RoundRecord>,
}

impl ColoringState {
    pub fn new(n: usize) -> Self {
        Self {
            y: vec![0.0; n],
            round: 0,
            log: Vec::new(),
        }
    }

    pub fn active(&self) -> Vec<usize> {
        (0..self.y.len()).filter(|&i| self.y[i].abs() < 1.0).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceReport {
    pub signs: Vec<i8>,
    pub discrepancy: f64,
    pub bound: f64,
    pub ratio: f64,
    pub rounds: usize,
    pub c_final: f64,
    pub seed: u64,
    pub c0: f64,
    pub n: usize,
    pub d: usize,
    pub m: usize,
    pub log: Vec<RoundRecord>,
}

impl BalanceReport {
    pub fn signs_f64(&self) -> Vec<f64> {
        self.signs.iter().map(|&s| s as f64).collect()
    }

    pub fn increment_total(&self) -> f64 {
        self.log.iter().map(|r| r.increment).sum()
    }
}

/// Exhaustive sign choice for the active coordinates, minimizing the final discrepancy.
fn exact_completion(
    z: &Zonotope,
    fam: &VectorFamily,
    y: &[f64],
    active: &[usize],
) -> Result<Vec<f64>, ColoringError> {
    let k = active.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u64..(1u64 << k) {
        let mut cand = y.to_vec();
        for (b, &i) in active.iter().enumerate() {
            cand[i] = if mask >> b & 1 == 1 { -1.0 } else { 1.0 };
        }
        let val = z.norm(&fam.signed_sum(&cand))?;
        if best.as_ref().is_none_or(|(bv, _)| val < *bv) {
            best = Some((val, cand));
        }
    }
    Ok(best.expect("nonempty enumeration").1)
}

/// Iterated partial coloring from `y = 0` until every coordinate is a sign.
///
/// The random stream is `ChaCha8Rng::seed_from_u64(seed)`.
pub fn balance(
    z: &Zonotope,
    fam: &VectorFamily,
    params: &ColoringParams,
    seed: u64,
) -> Result<BalanceReport, ColoringError> {
    let n = fam.len();
    let d = z.dim();
    if n == 0 || fam.dim() != d {
        return Err(ColoringError::Dimension("empty family or dimension mismatch".into()));
    }
    if n > d {
        return Err(ZonotopeError::TooManyVectors { n, d }.into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = ColoringState::new(n);
    loop {
        let active = state.active();
        if active.is_empty() {
            break;
        }
        let y_active: Vec<f64> = active.iter().map(|&i| state.y[i]).collect();
        if params.exact_finish && active.len() <= EXACT_FINISH_MAX {
            let done = exact_completion(z, fam, &state.y, &active)?;
            let new_active: Vec<f64> = active.iter().map(|&i| done[i]).collect();
            let increment = increment_norm(z, fam, &active, &y_active, &new_active)?;
            let profile = scale_profile(active.len(), d);
            state.log.push(RoundRecord {
                active_before: active.len(),
                active_after: 0,
                scale_used: increment.max(params.c0 * profile),
                multiplier: params.c0,
                attempts: 0,
                tight_gained: active.len(),
                increment,
                exact: true,
            });
            state.y = done;
            state.round += 1;
            break;
        }
        let step = partial_coloring(z, fam, &active, &y_active, params, &mut rng)?;
        for (&i, &v) in active.iter().zip(&step.y) {
            state.y[i] = v;
        }
        let after = state.active().len();
        state.log.push(RoundRecord {
            active_before: active.len(),
            active_after: after,
            scale_used: step.scale_used,
            multiplier: step.multiplier,
            attempts: step.attempts,
            tight_gained: active.len() - after,
            increment: step.increment,
            exact: false,
        });
        state.round += 1;
    }

    let signs: Vec<i8> = state.y.iter().map(|&v| if v > 0.0 { 1 } else { -1 }).collect();
    let xs: Vec<f64> = signs.iter().map(|&s| s as f64).collect();
    let discrepancy = z.norm(&fam.signed_sum(&xs))?;
    let bound = scale_profile(n, d);
    let c_final = state
        .log
        .iter()
        .map(|r| r.multiplier)
        .fold(params.c0, f64::max);
    Ok(BalanceReport {
        signs,
        discrepancy,
        bound,
        ratio: discrepancy / bound,
        rounds: state.round,
        c_final,
        seed,
        c0: params.c0,
        n,
        d,
        m: z.num_generators(),
        log: state.log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cube_family(rows: &[&[f64]]) -> VectorFamily {
        let d = rows[0].len();
        VectorFamily::new(DMatrix::from_row_slice(rows.len(), d, &rows.concat()))
    }

    #[test]
    fn zero_vector_body_is_everything() {
        let z = Zonotope::cube(2);
        let fam = cube_family(&[&[0.0, 0.0]]);
        let lift = build_coordinate_body(&z, &fam, &[0], 1.0).unwrap();
        assert!(lift.contains(&[1e6]).unwrap());
    }

    #[test]
    fn coordinate_vectors_give_linf_ball() {
        let z = Zonotope::cube(3);
        let fam = VectorFamily::new(DMatrix::identity(3, 3));
        let lift = build_coordinate_body(&z, &fam, &[0, 1, 2], 1.0).unwrap();
        assert!(lift.contains(&[1.0, -1.0, 0.5]).unwrap());
        assert!(!lift.contains(&[1.001, 0.0, 0.0]).unwrap());
        let lift = build_coordinate_body(&z, &fam, &[0, 2], 2.0).unwrap();
        assert!(lift.contains(&[2.0, -1.5]).unwrap());
        assert!(!lift.contains(&[2.1, 0.0]).unwrap());
    }

    #[test]
    fn bad_arguments() {
        let z = Zonotope::cube(2);
        let fam = cube_family(&[&[1.0, 0.0]]);
        assert!(matches!(
            build_coordinate_body(&z, &fam, &[], 1.0),
            Err(ColoringError::EmptyIndexSet)
        ));
        assert!(matches!(
            build_coordinate_body(&z, &fam, &[0], 0.0),
            Err(ColoringError::BadScale(_))
        ));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            partial_coloring(&z, &fam, &[0], &[1.0], &ColoringParams::default(), &mut rng),
            Err(ColoringError::NotActive)
        ));
    }

    #[test]
    fn single_vector_goes_to_an_endpoint() {
        let z = Zonotope::cube(3);
        let fam = cube_family(&[&[0.4, -1.0, 0.2]]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pc = partial_coloring(&z, &fam, &[0], &[0.0], &ColoringParams::default(), &mut rng).unwrap();
        assert_eq!(pc.y[0].abs(), 1.0);
        assert!(pc.increment <= 1.0 + 1e-12);
        assert!(pc.increment <= pc.scale_used);
    }

    #[test]
    fn opposite_pair_cancels() {
        let z = Zonotope::cube(2);
        let fam = cube_family(&[&[0.5, 0.25], &[-0.5, -0.25]]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pc = partial_coloring(&z, &fam, &[0, 1], &[0.0, 0.0], &ColoringParams::default(), &mut rng)
            .unwrap();
        assert!(pc.enumerated);
        assert!(pc.increment <= 1e-6);
        assert_eq!(pc.y[0], pc.y[1]);
        assert_eq!(pc.tight, 2);
    }

    #[test]
    fn cube_round_meets_contract() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let d = 8;
        let v = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..=1.0));
        let z = Zonotope::cube(d);
        let fam = VectorFamily::new(v);
        let params = ColoringParams {
            c0: 2.0,
            ..Default::default()
        };
        let idx: Vec<usize> = (0..d).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let pc = partial_coloring(&z, &fam, &idx, &vec![0.0; d], &params, &mut rng).unwrap();
        assert!(pc.tight >= 4);
        assert!(pc.increment <= pc.scale_used);
        assert!(pc.y.iter().all(|v| v.abs() <= 1.0));
        let ones = pc.y.iter().filter(|v| v.abs() == 1.0).count();
        assert_eq!(ones, pc.tight);
    }

    #[test]
    fn balance_small_cases() {
        let z = Zonotope::cube(4);
        let fam = cube_family(&[&[1.0, 0.0, 0.0, 0.0]]);
        let r = balance(&z, &fam, &ColoringParams::default(), 3).unwrap();
        assert_eq!(r.signs.len(), 1);
        assert!((r.discrepancy - 1.0).abs() < 1e-12);

        let z = Zonotope::cube(2);
        let fam = cube_family(&[&[1.0, 0.0], &[0.0, 1.0]]);
        let r = balance(&z, &fam, &ColoringParams::default(), 3).unwrap();
        assert!((r.discrepancy - 1.0).abs() < 1e-12);

        let fam = cube_family(&[&[0.3, -0.7], &[0.3, -0.7]]);
        let r = balance(&z, &fam, &ColoringParams::default(), 3).unwrap();
        assert!(r.discrepancy <= r.bound * 2.0);
        assert_eq!(r.discrepancy, 0.0);
    }

    #[test]
    fn exact_finish_is_optimal_for_tiny_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let d = 6;
        let v = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..=1.0));
        let z = Zonotope::cube(d);
        let fam = VectorFamily::new(v);
        let params = ColoringParams {
            exact_finish: true,
            ..Default::default()
        };
        let r = balance(&z, &fam, &params, 0).unwrap();
        assert_eq!(r.rounds, 1);
        assert!(r.log[0].exact);
        let brute = crate::verify::brute_force_min_discrepancy(&z, &fam).unwrap();
        assert!((r.discrepancy - brute.opt).abs() < 1e-9);
    }

    #[test]
    fn tighten_clamps_near_endpoints() {
        let mut y = vec![0.99999999, -1.0000001, 0.5, -0.9];
        assert_eq!(tighten(&mut y, TOL_TIGHT), 2);
        assert_eq!(y, vec![1.0, -1.0, 0.5, -0.9]);
    }
}
