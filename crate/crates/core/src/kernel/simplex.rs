//! Bounded-variable primal simplex on a dense tableau.
//!
//! Two phases with one artificial per equality row. Pricing is Dantzig's
//! largest reduced cost until the solve either stalls on a run of degenerate
//! pivots or exceeds a pivot budget, after which Bland's smallest-index rule
//! takes over for the remainder of the solve. Basic values and duals are
//! recomputed from an LU factorization of the final basis.

use nalgebra::{DMatrix, DVector};

use super::{KernelError, Polyhedron, TOL_FEAS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Optimal vertex; empty unless `status == Optimal`.
    pub point: Vec<f64>,
    /// `cᵀ point`; `±inf` when unbounded, NaN when infeasible.
    pub objective: f64,
    /// Equality multipliers `y` with `c - Eᵀy` equal to the reduced costs.
    pub duals: Vec<f64>,
}

impl LpSolution {
    fn infeasible() -> Self {
        Self {
            status: LpStatus::Infeasible,
            point: Vec::new(),
            objective: f64::NAN,
            duals: Vec::new(),
        }
    }

    fn unbounded(sense: Sense) -> Self {
        Self {
            status: LpStatus::Unbounded,
            point: Vec::new(),
            objective: match sense {
                Sense::Minimize => f64::NEG_INFINITY,
                Sense::Maximize => f64::INFINITY,
            },
            duals: Vec::new(),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

const PIVOT_TOL: f64 = 1e-9;
const DEGENERATE_STEP: f64 = 1e-12;
const DEGENERATE_RUN_LIMIT: usize = 50;

/// Optimize `objective · z` over `poly`.
pub fn lp_solve(
    objective: &[f64],
    poly: &Polyhedron,
    sense: Sense,
) -> Result<LpSolution, KernelError> {
    let n = poly.num_vars();
    if objective.len() != n {
        return Err(KernelError::Dimension(format!(
            "objective has length {}, polyhedron has {} variables",
            objective.len(),
            n
        )));
    }
    if objective.iter().any(|c| !c.is_finite()) {
        return Err(KernelError::Dimension("non-finite objective".into()));
    }

    if poly.is_fully_fixed() {
        let z = poly.lower().to_vec();
        if !poly.contains(&z, TOL_FEAS) {
            return Ok(LpSolution::infeasible());
        }
        let value = dot(objective, &z);
        return Ok(LpSolution {
            status: LpStatus::Optimal,
            point: z,
            objective: value,
            duals: vec![0.0; poly.num_equalities()],
        });
    }

    // Row equilibration; all-zero rows are either redundant or contradictory.
    let e = poly.eq_matrix();
    let rhs = poly.eq_rhs();
    let mut kept_rows = Vec::new();
    let mut row_scale = Vec::new();
    for i in 0..e.nrows() {
        let s = e.row(i).iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if s == 0.0 {
            if rhs[i].abs() > TOL_FEAS * (1.0 + rhs.amax()) {
                return Ok(LpSolution::infeasible());
            }
            continue;
        }
        kept_rows.push(i);
        row_scale.push(s);
    }
    let r = kept_rows.len();
    let mut em = DMatrix::zeros(r, n);
    let mut ev = DVector::zeros(r);
    for (k, &i) in kept_rows.iter().enumerate() {
        for j in 0..n {
            em[(k, j)] = e[(i, j)] / row_scale[k];
        }
        ev[k] = rhs[i] / row_scale[k];
    }

    let internal_cost: Vec<f64> = match sense {
        Sense::Minimize => objective.to_vec(),
        Sense::Maximize => objective.iter().map(|c| -c).collect(),
    };

    let mut tab = Tableau::new(&em, &ev, poly.lower(), poly.upper());
    let feas_scale = 1.0 + ev.amax() + poly.data_scale(&tab.x[..n]);

    // Phase 1.
    let mut phase1_cost = vec![0.0; tab.cols];
    for c in phase1_cost.iter_mut().skip(n) {
        *c = 1.0;
    }
    tab.crash(n);
    if tab.x[n..].iter().any(|&a| a > 0.0) {
        tab.set_cost(&phase1_cost);
        match tab.run()? {
            Outcome::Optimal => {}
            Outcome::Unbounded => {
                return Err(KernelError::Numerical(
                    "phase one reported an unbounded ray".into(),
                ))
            }
        }
        let infeas: f64 = tab.x[n..].iter().sum();
        if infeas > TOL_FEAS * feas_scale {
            return Ok(LpSolution::infeasible());
        }
    }
    tab.expel_artificials(n);

    // Phase 2.
    let mut cost = internal_cost.clone();
    cost.resize(tab.cols, 0.0);
    tab.set_cost(&cost);
    if tab.run()? == Outcome::Unbounded {
        return Ok(LpSolution::unbounded(sense));
    }

    let (point, mut duals) = tab.polish(&em, &ev, &internal_cost, n)?;
    for (k, y) in duals.iter_mut().enumerate() {
        *y /= row_scale[k];
        if sense == Sense::Maximize {
            *y = -*y;
        }
    }
    let mut full_duals = vec![0.0; e.nrows()];
    for (k, &i) in kept_rows.iter().enumerate() {
        full_duals[i] = duals[k];
    }
    let value = dot(objective, &point);
    Ok(LpSolution {
        status: LpStatus::Optimal,
        point,
        objective: value,
        duals: full_duals,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Optimal,
    Unbounded,
}

struct Tableau {
    rows: usize,
    cols: usize,
    /// Row-major `B⁻¹ [E | S]`, where `S` holds the artificial columns.
    tab: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    x: Vec<f64>,
    lo: Vec<f64>,
    hi: Vec<f64>,
    /// Sign of each artificial column.
    art_sign: Vec<f64>,
    cost: Vec<f64>,
    reduced: Vec<f64>,
    bland: bool,
    degenerate_run: usize,
    pivots: usize,
}

impl Tableau {
    fn new(em: &DMatrix<f64>, ev: &DVector<f64>, lower: &[f64], upper: &[f64]) -> Self {
        let rows = em.nrows();
        let n = em.ncols();
        let cols = n + rows;
        let mut x = vec![0.0; cols];
        let mut lo = vec![0.0; cols];
        let mut hi = vec![f64::INFINITY; cols];
        for j in 0..n {
            lo[j] = lower[j];
            hi[j] = upper[j];
            x[j] = if lower[j].is_finite() {
                lower[j]
            } else if upper[j].is_finite() {
                upper[j]
            } else {
                0.0
            };
        }
        let mut tab = vec![0.0; rows * cols];
        let mut art_sign = vec![1.0; rows];
        for i in 0..rows {
            let resid = ev[i] - (0..n).map(|j| em[(i, j)] * x[j]).sum::<f64>();
            let s = if resid >= 0.0 { 1.0 } else { -1.0 };
            art_sign[i] = s;
            for j in 0..n {
                tab[i * cols + j] = s * em[(i, j)];
            }
            tab[i * cols + n + i] = 1.0;
            x[n + i] = resid.abs();
        }
        let basis: Vec<usize> = (n..cols).collect();
        let mut is_basic = vec![false; cols];
        for &b in &basis {
            is_basic[b] = true;
        }
        Self {
            rows,
            cols,
            tab,
            basis,
            is_basic,
            x,
            lo,
            hi,
            art_sign,
            cost: vec![0.0; cols],
            reduced: vec![0.0; cols],
            bland: false,
            degenerate_run: 0,
            pivots: 0,
        }
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.tab[i * self.cols + j]
    }

    fn set_cost(&mut self, cost: &[f64]) {
        self.cost = cost.to_vec();
        self.reduced = self.cost.clone();
        for i in 0..self.rows {
            let cb = self.cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.tab[i * self.cols..(i + 1) * self.cols];
                for (d, t) in self.reduced.iter_mut().zip(row) {
                    *d -= cb * t;
                }
            }
        }
        for &b in &self.basis {
            self.reduced[b] = 0.0;
        }
        self.bland = false;
        self.degenerate_run = 0;
    }

    fn pricing_tol(&self) -> f64 {
        1e-9 * (1.0 + self.cost.iter().fold(0.0f64, |m, c| m.max(c.abs())))
    }

    /// Entering variable and direction (+1 increase, -1 decrease).
    fn choose_entering(&self) -> Option<(usize, f64)> {
        let tol = self.pricing_tol();
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.cols {
            if self.is_basic[j] || self.lo[j] == self.hi[j] {
                continue;
            }
            let d = self.reduced[j];
            let at_lower = self.x[j] <= self.lo[j];
            let at_upper = self.x[j] >= self.hi[j];
            let dir = if d < -tol && !at_upper {
                1.0
            } else if d > tol && !at_lower {
                -1.0
            } else {
                continue;
            };
            if self.bland {
                return Some((j, dir));
            }
            if best.map_or(true, |(_, _, m)| d.abs() > m) {
                best = Some((j, dir, d.abs()));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn run(&mut self) -> Result<Outcome, KernelError> {
        let cap = 200 * (self.rows + self.cols) + 1000;
        let bland_after = 20 * (self.rows + self.cols) + 200;
        let mut iterations = 0;
        loop {
            let Some((j, dir)) = self.choose_entering() else {
                return Ok(Outcome::Optimal);
            };
            iterations += 1;
            if iterations > cap {
                let residual = self.reduced[j].abs();
                return Err(KernelError::NonConvergence {
                    iterations,
                    residual,
                });
            }
            if iterations > bland_after {
                self.bland = true;
            }

            // Ratio test.
            let mut theta = self.hi[j] - self.lo[j];
            let mut leave: Option<(usize, f64, f64)> = None; // (row, new value, |alpha|)
            for i in 0..self.rows {
                let alpha = dir * self.at(i, j);
                if alpha.abs() <= PIVOT_TOL {
                    continue;
                }
                let b = self.basis[i];
                let (limit, target) = if alpha > 0.0 {
                    if !self.lo[b].is_finite() {
                        continue;
                    }
                    ((self.x[b] - self.lo[b]) / alpha, self.lo[b])
                } else {
                    if !self.hi[b].is_finite() {
                        continue;
                    }
                    ((self.hi[b] - self.x[b]) / -alpha, self.hi[b])
                };
                let limit = limit.max(0.0);
                let better = match leave {
                    None => limit < theta,
                    Some((li, _, la)) => {
                        if limit < theta - 1e-12 {
                            true
                        } else if limit <= theta + 1e-12 {
                            if self.bland {
                                b < self.basis[li]
                            } else {
                                alpha.abs() > la
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    theta = theta.min(limit);
                    leave = Some((i, target, alpha.abs()));
                }
            }
            if !theta.is_finite() {
                return Ok(Outcome::Unbounded);
            }

            if theta <= DEGENERATE_STEP {
                self.degenerate_run += 1;
                if self.degenerate_run > DEGENERATE_RUN_LIMIT {
                    self.bland = true;
                }
            } else {
                self.degenerate_run = 0;
                if iterations <= bland_after {
                    self.bland = false;
                }
            }

            let step = dir * theta;
            if step != 0.0 {
                for i in 0..self.rows {
                    let t = self.at(i, j);
                    if t != 0.0 {
                        let b = self.basis[i];
                        self.x[b] -= step * t;
                    }
                }
                self.x[j] += step;
            }
            match leave {
                None => {
                    // Bound flip.
                    self.x[j] = if dir > 0.0 { self.hi[j] } else { self.lo[j] };
                }
                Some((i, target, _)) => {
                    let b = self.basis[i];
                    self.x[b] = target;
                    // An artificial that leaves never needs to come back.
                    if b >= self.cols - self.rows {
                        self.hi[b] = 0.0;
                    }
                    self.pivot(i, j);
                }
            }
        }
    }

    fn pivot(&mut self, i: usize, j: usize) {
        let cols = self.cols;
        let piv = self.at(i, j);
        {
            let row = &mut self.tab[i * cols..(i + 1) * cols];
            for t in row.iter_mut() {
                *t /= piv;
            }
        }
        let pivot_row: Vec<f64> = self.tab[i * cols..(i + 1) * cols].to_vec();
        for k in 0..self.rows {
            if k == i {
                continue;
            }
            let f = self.tab[k * cols + j];
            if f != 0.0 {
                let row = &mut self.tab[k * cols..(k + 1) * cols];
                for (t, p) in row.iter_mut().zip(&pivot_row) {
                    *t -= f * p;
                }
                row[j] = 0.0;
            }
        }
        let f = self.reduced[j];
        if f != 0.0 {
            for (d, p) in self.reduced.iter_mut().zip(&pivot_row) {
                *d -= f * p;
            }
        }
        self.reduced[j] = 0.0;
        let old = self.basis[i];
        self.is_basic[old] = false;
        self.is_basic[j] = true;
        self.basis[i] = j;
        self.pivots += 1;
    }

    /// Replace artificials that start at zero by structural columns, free
    /// ones first, with degenerate pivots. Phase one then only has to remove
    /// the genuinely infeasible rows.
    fn crash(&mut self, n: usize) {
        for i in 0..self.rows {
            let b = self.basis[i];
            if b < n || self.x[b] != 0.0 {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for j in 0..n {
                if self.is_basic[j] || self.lo[j] == self.hi[j] {
                    continue;
                }
                let a = self.at(i, j).abs();
                if a <= 1e-6 {
                    continue;
                }
                let free = !self.lo[j].is_finite() && !self.hi[j].is_finite();
                let score = if free { 1e3 * a } else { a };
                if best.map_or(true, |(_, m)| score > m) {
                    best = Some((j, score));
                }
            }
            if let Some((j, _)) = best {
                self.hi[b] = 0.0;
                self.pivot(i, j);
            }
        }
    }

    /// Pivot basic artificials out where possible and pin every artificial at zero.
    fn expel_artificials(&mut self, n: usize) {
        for i in 0..self.rows {
            if self.basis[i] < n {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for j in 0..n {
                if self.is_basic[j] {
                    continue;
                }
                let a = self.at(i, j).abs();
                if a > 1e-7 && best.map_or(true, |(_, m)| a > m) {
                    best = Some((j, a));
                }
            }
            match best {
                Some((j, _)) => {
                    let b = self.basis[i];
                    self.x[b] = 0.0;
                    self.pivot(i, j);
                }
                None => {
                    // Redundant row: its structural entries are numerically zero.
                    for j in 0..n {
                        self.tab[i * self.cols + j] = 0.0;
                    }
                }
            }
        }
        for j in n..self.cols {
            self.lo[j] = 0.0;
            self.hi[j] = 0.0;
            if !self.is_basic[j] {
                self.x[j] = 0.0;
            }
        }
    }

    /// Recompute basic values and row duals from the basis matrix.
    fn polish(
        &self,
        em: &DMatrix<f64>,
        ev: &DVector<f64>,
        cost: &[f64],
        n: usize,
    ) -> Result<(Vec<f64>, Vec<f64>), KernelError> {
        let r = self.rows;
        let mut x = self.x.clone();
        if r == 0 {
            return Ok((x[..n].to_vec(), Vec::new()));
        }
        let column = |j: usize| -> DVector<f64> {
            if j < n {
                em.column(j).into_owned()
            } else {
                let mut c = DVector::zeros(r);
                c[j - n] = self.art_sign[j - n];
                c
            }
        };
        let mut bmat = DMatrix::zeros(r, r);
        for (k, &b) in self.basis.iter().enumerate() {
            bmat.set_column(k, &column(b));
        }
        let mut rhs = ev.clone();
        for j in 0..n {
            if !self.is_basic[j] && x[j] != 0.0 {
                rhs -= em.column(j) * x[j];
            }
        }
        let lu = bmat.clone().lu();
        let cb = DVector::from_iterator(
            r,
            self.basis
                .iter()
                .map(|&b| if b < n { cost[b] } else { 0.0 }),
        );
        match (lu.solve(&rhs), bmat.transpose().lu().solve(&cb)) {
            (Some(xb), Some(y)) if xb.iter().chain(y.iter()).all(|v| v.is_finite()) => {
                for (k, &b) in self.basis.iter().enumerate() {
                    x[b] = xb[k];
                    if b < n {
                        // Snap only round-off outside the bounds.
                        let (lo, hi) = (self.lo[b], self.hi[b]);
                        let v = xb[k];
                        x[b] = if v < lo && lo - v <= 1e-12 * (1.0 + lo.abs()) {
                            lo
                        } else if v > hi && v - hi <= 1e-12 * (1.0 + hi.abs()) {
                            hi
                        } else {
                            v
                        };
                    }
                }
                Ok((x[..n].to_vec(), y.iter().copied().collect()))
            }
            _ => {
                // Singular basis only happens with redundant rows kept as artificials;
                // fall back to the tableau values.
                let y = DVector::<f64>::zeros(r);
                Ok((x[..n].to_vec(), y.iter().copied().collect()))
            }
        }
    }
}
