//! Primal active-set method for weighted Euclidean projection
//!
//!   min ½ Σ w_j (z_j - t_j)²  s.t.  E z = e,  l <= z <= u,
//!
//! with `w_j >= 0`. Variables with zero weight (the lifted generator
//! coefficients of a zonotope constraint) carry no curvature, so the working
//! set keeps them "basic": the free zero-weight columns of `E` stay linearly
//! independent, and the free columns together span the row space of `E`.
//! Under those two invariants every equality-constrained subproblem has a
//! unique solution, obtained from a Schur complement system of size
//! `rows + #free zero-weight columns`.
//!
//! Zero-weight variables that are neither free nor at a bound are "temporary"
//! members of the working set; their multiplier must vanish at optimality.

use nalgebra::{DMatrix, DVector};

use super::{lp_solve, KernelError, Polyhedron, Sense, TOL_FEAS};

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub point: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

/// Euclidean projection of `g` onto `poly`.
pub fn project_polyhedron(g: &[f64], poly: &Polyhedron) -> Result<Vec<f64>, KernelError> {
    let weights = vec![1.0; poly.num_vars()];
    project_weighted(g, &weights, poly, None).map(|s| s.point)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Free,
    Lower,
    Upper,
    Temp,
}

/// Weighted projection; `start`, when given, must be feasible.
pub fn project_weighted(
    target: &[f64],
    weights: &[f64],
    poly: &Polyhedron,
    start: Option<&[f64]>,
) -> Result<QpSolution, KernelError> {
    let n = poly.num_vars();
    if target.len() != n || weights.len() != n {
        return Err(KernelError::Dimension(format!(
            "target/weights have lengths {}/{}, polyhedron has {} variables",
            target.len(),
            weights.len(),
            n
        )));
    }
    if target.iter().any(|t| !t.is_finite()) || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(KernelError::Dimension(
            "target must be finite and weights finite and nonnegative".into(),
        ));
    }

    let z0 = match start {
        Some(s) => {
            if s.len() != n || !poly.contains(s, 10.0 * TOL_FEAS) {
                return Err(KernelError::Dimension("start point is not feasible".into()));
            }
            s.to_vec()
        }
        None => {
            let sol = lp_solve(&vec![0.0; n], poly, Sense::Minimize)?;
            if !sol.is_optimal() {
                return Err(KernelError::Infeasible);
            }
            sol.point
        }
    };
    if poly.is_fully_fixed() {
        return Ok(QpSolution {
            objective: objective(target, weights, &z0),
            point: z0,
            iterations: 0,
        });
    }

    let (em, ev) = independent_rows(poly.eq_matrix(), poly.eq_rhs());
    let mut solver = ActiveSet::new(em, ev, poly.lower(), poly.upper(), target, weights, z0);
    solver.solve()?;

    let point = solver.z;
    let scale = 1.0 + poly.data_scale(&point);
    let viol = poly.max_violation(&point);
    if viol > 1e-7 * scale {
        return Err(KernelError::Numerical(format!(
            "projection drifted off the polyhedron (violation {viol:e})"
        )));
    }
    Ok(QpSolution {
        objective: objective(target, weights, &point),
        point,
        iterations: solver.iterations,
    })
}

fn objective(target: &[f64], weights: &[f64], z: &[f64]) -> f64 {
    0.5 * z
        .iter()
        .zip(target)
        .zip(weights)
        .map(|((z, t), w)| w * (z - t) * (z - t))
        .sum::<f64>()
}

/// Drop linearly dependent equality rows (each kept row normalized).
fn independent_rows(e: &DMatrix<f64>, rhs: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let mut span = Span::new(e.ncols());
    let mut keep = Vec::new();
    for i in 0..e.nrows() {
        let row = e.row(i).transpose();
        if span.try_add(&row) {
            keep.push(i);
        }
    }
    let mut em = DMatrix::zeros(keep.len(), e.ncols());
    let mut ev = DVector::zeros(keep.len());
    for (k, &i) in keep.iter().enumerate() {
        let norm = e.row(i).norm();
        em.set_row(k, &(e.row(i) / norm));
        ev[k] = rhs[i] / norm;
    }
    (em, ev)
}

/// Incremental orthonormal basis (two-pass modified Gram-Schmidt).
struct Span {
    dim: usize,
    basis: Vec<DVector<f64>>,
}

impl Span {
    fn new(dim: usize) -> Self {
        Self {
            dim,
            basis: Vec::new(),
        }
    }

    fn rank(&self) -> usize {
        self.basis.len()
    }

    fn try_add(&mut self, v: &DVector<f64>) -> bool {
        if self.basis.len() >= self.dim {
            return false;
        }
        let norm = v.norm();
        if norm == 0.0 {
            return false;
        }
        let mut r = v / norm;
        for _ in 0..2 {
            for q in &self.basis {
                let c = q.dot(&r);
                r.axpy(-c, q, 1.0);
            }
        }
        let rn = r.norm();
        if rn <= 1e-9 {
            return false;
        }
        self.basis.push(r / rn);
        true
    }
}

struct ActiveSet<'a> {
    e: DMatrix<f64>,
    rhs: DVector<f64>,
    lo: &'a [f64],
    hi: &'a [f64],
    target: &'a [f64],
    w: &'a [f64],
    z: Vec<f64>,
    state: Vec<State>,
    frozen: Vec<bool>,
    iterations: usize,
    degenerate_run: usize,
    bland: bool,
}

struct Eqp {
    step: Vec<f64>,
    lambda: DVector<f64>,
}

impl<'a> ActiveSet<'a> {
    fn new(
        e: DMatrix<f64>,
        rhs: DVector<f64>,
        lo: &'a [f64],
        hi: &'a [f64],
        target: &'a [f64],
        w: &'a [f64],
        mut z: Vec<f64>,
    ) -> Self {
        let n = z.len();
        let rows = e.nrows();
        let mut state = vec![State::Temp; n];
        let mut at_bound = vec![None; n];
        for j in 0..n {
            let eps = 1e-12 * (1.0 + z[j].abs());
            if lo[j].is_finite() && z[j] - lo[j] <= eps {
                z[j] = lo[j];
                at_bound[j] = Some(State::Lower);
            } else if hi[j].is_finite() && hi[j] - z[j] <= eps {
                z[j] = hi[j];
                at_bound[j] = Some(State::Upper);
            }
        }
        // Interior zero-weight columns: a maximal independent subset is free.
        let mut zero_span = Span::new(rows);
        for j in 0..n {
            if at_bound[j].is_none() {
                if w[j] > 0.0 {
                    state[j] = State::Free;
                } else if zero_span.try_add(&e.column(j).into_owned()) {
                    state[j] = State::Free;
                }
            }
        }
        // The free columns must span the rows; repair with bound columns.
        let mut free_span = Span::new(rows);
        for q in &zero_span.basis {
            free_span.try_add(q);
        }
        for j in 0..n {
            if state[j] == State::Free && w[j] > 0.0 {
                free_span.try_add(&e.column(j).into_owned());
            }
        }
        for j in 0..n {
            if let Some(b) = at_bound[j] {
                if free_span.rank() < rows && free_span.try_add(&e.column(j).into_owned()) {
                    state[j] = State::Free;
                } else {
                    state[j] = b;
                }
            }
        }
        Self {
            e,
            rhs,
            lo,
            hi,
            target,
            w,
            z,
            state,
            frozen: vec![false; n],
            iterations: 0,
            degenerate_run: 0,
            bland: false,
        }
    }

    fn gradient(&self) -> Vec<f64> {
        self.z
            .iter()
            .zip(self.target)
            .zip(self.w)
            .map(|((z, t), w)| w * (z - t))
            .collect()
    }

    fn residual(&self) -> DVector<f64> {
        let z = DVector::from_column_slice(&self.z);
        &self.rhs - &self.e * z
    }

    fn solve(&mut self) -> Result<(), KernelError> {
        let n = self.z.len();
        let rows = self.e.nrows();
        let cap = 50 * (n + rows) + 500;
        let mut pending: Option<(usize, f64)> = None;
        let scale = 1.0
            + self.target.iter().fold(0.0f64, |m, t| m.max(t.abs()))
            + self.z.iter().fold(0.0f64, |m, t| m.max(t.abs()));

        loop {
            self.iterations += 1;
            if self.iterations > cap {
                let grad = self.gradient();
                let residual = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
                return Err(KernelError::NonConvergence {
                    iterations: self.iterations,
                    residual,
                });
            }
            if self.degenerate_run > 50 {
                self.bland = true;
            }

            if let Some((j, mu)) = pending.take() {
                if self.null_step(j, mu)? {
                    continue;
                }
            }

            let grad = self.gradient();
            let eqp = self.solve_eqp(&grad)?;
            let zmax = self.z.iter().fold(0.0f64, |m, t| m.max(t.abs()));
            let step_tol = 1e-11 * (scale + zmax);
            let pmax = eqp.step.iter().fold(0.0f64, |m, p| m.max(p.abs()));

            if pmax <= step_tol {
                // Stationary on the working set: inspect multipliers.
                let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
                let tol_mu = 1e-9 * (1.0 + gmax);
                let mut release: Option<(usize, f64, f64)> = None;
                for j in 0..n {
                    let s = self.state[j];
                    if s == State::Free || self.frozen[j] {
                        continue;
                    }
                    let mu = grad[j] + self.e.column(j).dot(&eqp.lambda);
                    let viol = match s {
                        State::Lower => -mu,
                        State::Upper => mu,
                        State::Temp => mu.abs(),
                        State::Free => unreachable!(),
                    };
                    if viol > tol_mu {
                        let better = match release {
                            None => true,
                            Some((_, _, v)) => !self.bland && viol > v,
                        };
                        if better {
                            release = Some((j, mu, viol));
                        }
                    }
                }
                match release {
                    None => return Ok(()),
                    Some((j, mu, _)) => {
                        self.state[j] = State::Free;
                        if self.w[j] == 0.0 {
                            pending = Some((j, mu));
                        }
                    }
                }
                continue;
            }

            let free: Vec<usize> = (0..n).filter(|&j| self.state[j] == State::Free).collect();
            let (alpha, blocking) = self.ratio_test(&eqp.step, &free, 1.0);
            for &j in &free {
                self.z[j] += alpha * eqp.step[j];
            }
            if alpha <= 1e-14 {
                self.degenerate_run += 1;
            } else {
                self.degenerate_run = 0;
            }
            if let Some((b, st)) = blocking {
                self.pin(b, st);
            }
        }
    }

    fn pin(&mut self, j: usize, st: State) {
        self.z[j] = if st == State::Lower { self.lo[j] } else { self.hi[j] };
        self.state[j] = st;
    }

    /// Largest step `α <= cap` along `dir` restricted to `idx`, with the blocking variable.
    fn ratio_test(&self, dir: &[f64], idx: &[usize], cap: f64) -> (f64, Option<(usize, State)>) {
        let mut alpha = cap;
        let mut block = None;
        for &j in idx {
            let p = dir[j];
            if p == 0.0 {
                continue;
            }
            let (limit, st) = if p < 0.0 {
                if !self.lo[j].is_finite() {
                    continue;
                }
                (((self.z[j] - self.lo[j]) / -p).max(0.0), State::Lower)
            } else {
                if !self.hi[j].is_finite() {
                    continue;
                }
                (((self.hi[j] - self.z[j]) / p).max(0.0), State::Upper)
            };
            if limit < alpha {
                alpha = limit;
                block = Some((j, st));
            }
        }
        (alpha, block)
    }

    /// After releasing zero-weight variable `j`, restore independence of the
    /// free zero-weight columns. Returns true when a step or exchange happened.
    fn null_step(&mut self, j: usize, mu: f64) -> Result<bool, KernelError> {
        let n = self.z.len();
        let rows = self.e.nrows();
        let others: Vec<usize> = (0..n)
            .filter(|&i| i != j && self.state[i] == State::Free && self.w[i] == 0.0)
            .collect();
        let col_j = self.e.column(j).into_owned();
        let coeffs = if others.is_empty() {
            DVector::zeros(0)
        } else {
            let mut ez = DMatrix::zeros(rows, others.len());
            for (k, &i) in others.iter().enumerate() {
                ez.set_column(k, &self.e.column(i));
            }
            match least_squares(&ez, &col_j) {
                Some(c) => c,
                None => return Ok(false),
            }
        };
        let mut fit = DVector::zeros(rows);
        for (k, &i) in others.iter().enumerate() {
            fit.axpy(coeffs[k], &self.e.column(i), 1.0);
        }
        if (&col_j - fit).norm() > 1e-9 * (1.0 + col_j.norm()) {
            return Ok(false);
        }

        // E (e_j - Σ coeffs_k e_{others_k}) = 0; orient to move j downhill.
        let sign = if mu > 0.0 { -1.0 } else { 1.0 };
        let mut dir = vec![0.0; n];
        dir[j] = sign;
        for (k, &i) in others.iter().enumerate() {
            dir[i] = -sign * coeffs[k];
        }
        let mut support = others.clone();
        support.push(j);
        let (mut alpha, mut block) = self.ratio_test(&dir, &support, f64::INFINITY);
        if !alpha.is_finite() {
            for d in dir.iter_mut() {
                *d = -*d;
            }
            (alpha, block) = self.ratio_test(&dir, &support, f64::INFINITY);
        }
        match block {
            Some((b, st)) if alpha.is_finite() => {
                for &i in &support {
                    self.z[i] += alpha * dir[i];
                }
                self.pin(b, st);
                if alpha <= 1e-14 {
                    self.degenerate_run += 1;
                } else {
                    self.degenerate_run = 0;
                }
            }
            _ => {
                // Every variable on the null direction is unbounded: swap a
                // dependent partner out as a temporary instead.
                let partner = others
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| coeffs[*k].abs() > 1e-9)
                    .max_by(|a, b| coeffs[a.0].abs().total_cmp(&coeffs[b.0].abs()))
                    .map(|(_, &i)| i);
                match partner {
                    Some(i) => self.state[i] = State::Temp,
                    None => {
                        self.state[j] = State::Temp;
                        self.frozen[j] = true;
                    }
                }
            }
        }
        Ok(true)
    }

    fn solve_eqp(&self, grad: &[f64]) -> Result<Eqp, KernelError> {
        let n = self.z.len();
        let rows = self.e.nrows();
        let p_idx: Vec<usize> = (0..n)
            .filter(|&j| self.state[j] == State::Free && self.w[j] > 0.0)
            .collect();
        let z_idx: Vec<usize> = (0..n)
            .filter(|&j| self.state[j] == State::Free && self.w[j] == 0.0)
            .collect();
        let nz = z_idx.len();

        let mut ep_scaled = DMatrix::zeros(rows, p_idx.len());
        let mut rhs1 = self.residual();
        for (k, &j) in p_idx.iter().enumerate() {
            let col = self.e.column(j);
            ep_scaled.set_column(k, &(col / self.w[j].sqrt()));
            rhs1.axpy(grad[j] / self.w[j], &col, 1.0);
        }
        let schur = &ep_scaled * ep_scaled.transpose();

        let size = rows + nz;
        let mut kkt = DMatrix::zeros(size, size);
        kkt.view_mut((0, 0), (rows, rows)).copy_from(&(-schur));
        for (k, &j) in z_idx.iter().enumerate() {
            let col = self.e.column(j);
            kkt.view_mut((0, rows + k), (rows, 1)).copy_from(&col);
            kkt.view_mut((rows + k, 0), (1, rows)).copy_from(&col.transpose());
        }
        let mut rhs = DVector::zeros(size);
        rhs.rows_mut(0, rows).copy_from(&rhs1);
        for (k, &j) in z_idx.iter().enumerate() {
            rhs[rows + k] = -grad[j];
        }

        let sol = if size == 0 {
            DVector::zeros(0)
        } else {
            let lu_sol = kkt.clone().lu().solve(&rhs).filter(|s| {
                s.iter().all(|v| v.is_finite())
                    && (&kkt * s - &rhs).amax() <= 1e-8 * (1.0 + rhs.amax())
            });
            match lu_sol {
                Some(s) => s,
                None => kkt
                    .clone()
                    .svd(true, true)
                    .solve(&rhs, 1e-12 * kkt.amax().max(1.0))
                    .map_err(|e| KernelError::Numerical(e.to_string()))?,
            }
        };
        let lambda = sol.rows(0, rows).into_owned();
        let mut step = vec![0.0; n];
        for (k, &j) in z_idx.iter().enumerate() {
            step[j] = sol[rows + k];
        }
        for &j in &p_idx {
            step[j] = -(grad[j] + self.e.column(j).dot(&lambda)) / self.w[j];
        }
        Ok(Eqp { step, lambda })
    }
}

/// Least-squares solution of `a x ≈ b` for a tall or square `a` of full column rank.
fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if a.ncols() > a.nrows() {
        // More columns than rows: certainly dependent; use the SVD minimum-norm fit.
        return a.clone().svd(true, true).solve(b, 1e-12).ok();
    }
    let qr = a.clone().qr();
    let q = qr.q();
    let r = qr.r();
    let qtb = q.transpose() * b;
    r.solve_upper_triangular(&qtb)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .or_else(|| a.clone().svd(true, true).solve(b, 1e-12).ok())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_inside_is_fixed() {
        let p = Polyhedron::boxed(vec![-1.0; 2], vec![1.0; 2]).unwrap();
        let x = project_polyhedron(&[0.3, -0.2], &p).unwrap();
        assert!((x[0] - 0.3).abs() < 1e-12 && (x[1] + 0.2).abs() < 1e-12);
    }

    #[test]
    fn box_clamp() {
        let p = Polyhedron::boxed(vec![-1.0; 2], vec![1.0; 2]).unwrap();
        let x = project_polyhedron(&[2.0, 0.0], &p).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && x[1].abs() < 1e-12);
    }

    #[test]
    fn hyperplane() {
        let p = Polyhedron::free(2)
            .with_equalities(
                DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
                DVector::from_vec(vec![1.0]),
            )
            .unwrap();
        let x = project_polyhedron(&[2.0, 2.0], &p).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-10 && (x[1] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn simplex_corner() {
        // Probability simplex in R^3; projecting (2, 0, 0) lands on e1.
        let p = Polyhedron::boxed(vec![0.0; 3], vec![f64::INFINITY; 3])
            .unwrap()
            .with_equalities(
                DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]),
                DVector::from_vec(vec![1.0]),
            )
            .unwrap();
        let x = project_polyhedron(&[2.0, 0.0, 0.0], &p).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-10 && x[1].abs() < 1e-10 && x[2].abs() < 1e-10);
        let x = project_polyhedron(&[0.5, 0.5, -1.0], &p).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-10 && (x[1] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn empty_polyhedron_is_infeasible() {
        let p = Polyhedron::boxed(vec![0.0; 2], vec![1.0; 2])
            .unwrap()
            .with_equalities(
                DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
                DVector::from_vec(vec![5.0]),
            )
            .unwrap();
        assert_eq!(project_polyhedron(&[0.0, 0.0], &p), Err(KernelError::Infeasible));
    }

    #[test]
    fn zero_weight_lift() {
        // Project a onto {a : |a| <= s} written as a = u1 + u2, |u_i| <= 1.
        let p = Polyhedron::free(3)
            .with_equalities(
                DMatrix::from_row_slice(1, 3, &[1.0, -1.0, -1.0]),
                DVector::from_vec(vec![0.0]),
            )
            .unwrap()
            .with_bounds(
                vec![f64::NEG_INFINITY, -1.0, -1.0],
                vec![f64::INFINITY, 1.0, 1.0],
            )
            .unwrap();
        let s = project_weighted(&[5.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &p, Some(&[0.0; 3])).unwrap();
        assert!((s.point[0] - 2.0).abs() < 1e-10, "{:?}", s.point);
        let s = project_weighted(&[-0.5, 0.0, 0.0], &[1.0, 0.0, 0.0], &p, None).unwrap();
        assert!((s.point[0] + 0.5).abs() < 1e-10, "{:?}", s.point);
    }
}
