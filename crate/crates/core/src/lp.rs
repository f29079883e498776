//! Dense bounded-variable simplex for
//!
//! ```text
//! maximize  cᵀx   subject to  Gx ≤ h,  0 ≤ x ≤ u
//! ```
//!
//! with finite upper bounds `u`. Pivoting follows Bland's rule, so the
//! solver terminates on the highly degenerate clearing LPs. Rows with a
//! negative right-hand side get an artificial variable and a phase-one
//! pass; the clearing LPs never need it since `x = 0` is feasible there.
//!
//! After the final pivot, the basic values and row duals are recomputed
//! from an LU factorisation of the basis, so accumulated tableau round-off
//! does not reach the returned point.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

pub const PIVOT_TOL: f64 = 1e-10;
pub const FEASIBILITY_TOL: f64 = 1e-8;
const OPTIMALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    constraints: DMatrix<f64>,
    rhs: Vec<f64>,
    upper_bounds: Vec<f64>,
}

impl LinearProgram {
    pub fn new(
        objective: Vec<f64>,
        constraints: DMatrix<f64>,
        rhs: Vec<f64>,
        upper_bounds: Vec<f64>,
    ) -> Result<Self> {
        let m = objective.len();
        if constraints.ncols() != m && constraints.nrows() > 0 {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: constraints.ncols(),
            });
        }
        if rhs.len() != constraints.nrows() {
            return Err(Error::DimensionMismatch {
                expected: constraints.nrows(),
                found: rhs.len(),
            });
        }
        if upper_bounds.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: upper_bounds.len(),
            });
        }
        if let Some(u) = upper_bounds.iter().find(|u| !u.is_finite() || **u < 0.0) {
            return Err(Error::Config(format!(
                "upper bounds must be finite and nonnegative, got {u}"
            )));
        }
        let constraints = if constraints.nrows() == 0 {
            DMatrix::zeros(0, m)
        } else {
            constraints
        };
        Ok(Self {
            objective,
            constraints,
            rhs,
            upper_bounds,
        })
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rhs.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn constraints(&self) -> &DMatrix<f64> {
        &self.constraints
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    pub fn upper_bounds(&self) -> &[f64] {
        &self.upper_bounds
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    /// Largest violation of the rows and the bounds at `x`.
    pub fn infeasibility(&self, x: &[f64]) -> f64 {
        let xv = DVector::from_column_slice(x);
        let lhs = &self.constraints * &xv;
        let rows = (0..self.num_rows())
            .map(|i| lhs[i] - self.rhs[i])
            .fold(0.0, f64::max);
        let bounds = x
            .iter()
            .zip(&self.upper_bounds)
            .map(|(&x, &u)| (-x).max(x - u))
            .fold(0.0, f64::max);
        rows.max(bounds)
    }

    pub fn solve(&self) -> LpSolution {
        solve(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective_value: f64,
    pub status: LpStatus,
    /// Row multipliers `y ≥ 0` of `Gx ≤ h` at the optimum.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn into_optimal(self) -> Result<Self> {
        match self.status {
            LpStatus::Optimal => Ok(self),
            s => Err(Error::Lp(s)),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LpOptions {
    pub max_iterations: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            max_iterations: 1_000_000,
        }
    }
}

pub fn solve(lp: &LinearProgram) -> LpSolution {
    solve_with(lp, LpOptions::default())
}

pub fn solve_with(lp: &LinearProgram, opts: LpOptions) -> LpSolution {
    Tableau::build(lp).run(lp, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Bound {
    Lower,
    Upper,
}

enum Step {
    Optimal,
    Unbounded,
    Moved,
}

/// Working state. Columns are the structural variables, then one slack per
/// row, then the artificials. Rows with negative right-hand side are
/// stored negated.
struct Tableau {
    k: usize,
    cols: usize,
    m: usize,
    t: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<Bound>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    reduced: Vec<f64>,
    negated: Vec<bool>,
    first_artificial: usize,
    iterations: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let k = lp.num_rows();
        let m = lp.num_vars();
        let negated: Vec<bool> = lp.rhs.iter().map(|&h| h < 0.0).collect();
        let n_art = negated.iter().filter(|&&b| b).count();
        let cols = m + k + n_art;
        let mut t = vec![0.0; k * cols];
        let mut beta = vec![0.0; k];
        let mut basis = vec![0; k];
        let mut art = m + k;
        for i in 0..k {
            let sign = if negated[i] { -1.0 } else { 1.0 };
            let row = &mut t[i * cols..(i + 1) * cols];
            for j in 0..m {
                row[j] = sign * lp.constraints[(i, j)];
            }
            row[m + i] = sign;
            beta[i] = sign * lp.rhs[i];
            if negated[i] {
                row[art] = 1.0;
                basis[i] = art;
                art += 1;
            } else {
                basis[i] = m + i;
            }
        }
        let mut upper = lp.upper_bounds.clone();
        upper.extend(std::iter::repeat_n(f64::INFINITY, k + n_art));
        Self {
            k,
            cols,
            m,
            t,
            beta,
            basis,
            state: vec![Bound::Lower; cols],
            upper,
            cost: vec![0.0; cols],
            reduced: vec![0.0; cols],
            negated,
            first_artificial: m + k,
            iterations: 0,
        }
    }

    fn run(mut self, lp: &LinearProgram, opts: LpOptions) -> LpSolution {
        if self.first_artificial < self.cols {
            let mut cost = vec![0.0; self.cols];
            for c in &mut cost[self.first_artificial..] {
                *c = -1.0;
            }
            self.set_cost(cost);
            match self.optimize(opts) {
                Some(LpStatus::IterationLimit) => return self.failure(LpStatus::IterationLimit),
                Some(s) if s != LpStatus::Optimal => return self.failure(LpStatus::Infeasible),
                _ => {}
            }
            let infeasible: f64 = (0..self.k)
                .filter(|&r| self.basis[r] >= self.first_artificial)
                .map(|r| self.beta[r])
                .sum();
            if infeasible > FEASIBILITY_TOL {
                return self.failure(LpStatus::Infeasible);
            }
            // Pin the artificials at zero for phase two.
            for j in self.first_artificial..self.cols {
                self.upper[j] = 0.0;
                self.state[j] = Bound::Lower;
            }
        }
        let mut cost = vec![0.0; self.cols];
        cost[..self.m].copy_from_slice(&lp.objective);
        self.set_cost(cost);
        match self.optimize(opts) {
            Some(status) => self.failure(status),
            None => self.extract(lp),
        }
    }

    fn failure(&self, status: LpStatus) -> LpSolution {
        LpSolution {
            x: vec![0.0; self.m],
            objective_value: f64::NAN,
            status,
            duals: vec![0.0; self.k],
            iterations: self.iterations,
        }
    }

    fn set_cost(&mut self, cost: Vec<f64>) {
        let cols = self.cols;
        self.reduced.clone_from(&cost);
        for r in 0..self.k {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                let row = &self.t[r * cols..(r + 1) * cols];
                for (d, &a) in self.reduced.iter_mut().zip(row) {
                    *d -= cb * a;
                }
            }
        }
        self.cost = cost;
    }

    /// Runs simplex steps; `None` means optimal.
    fn optimize(&mut self, opts: LpOptions) -> Option<LpStatus> {
        loop {
            if self.iterations >= opts.max_iterations {
                return Some(LpStatus::IterationLimit);
            }
            match self.step() {
                Step::Optimal => return None,
                Step::Unbounded => return Some(LpStatus::Unbounded),
                Step::Moved => self.iterations += 1,
            }
        }
    }

    fn is_basic(&self, j: usize) -> bool {
        self.basis.contains(&j)
    }

    fn step(&mut self) -> Step {
        let cols = self.cols;
        // Bland: lowest-index improving column.
        let entering = (0..cols).find(|&j| {
            let d = self.reduced[j];
            match self.state[j] {
                Bound::Lower => d > OPTIMALITY_TOL && self.upper[j] > 0.0,
                Bound::Upper => d < -OPTIMALITY_TOL,
            }
        });
        let Some(entering) = entering else {
            return Step::Optimal;
        };
        debug_assert!(!self.is_basic(entering), "basic column {entering} has a reduced cost");
        let dir = match self.state[entering] {
            Bound::Lower => 1.0,
            Bound::Upper => -1.0,
        };

        let mut step = self.upper[entering];
        let mut leaving: Option<(usize, Bound)> = None;
        for r in 0..self.k {
            let alpha = dir * self.t[r * cols + entering];
            let var = self.basis[r];
            let (limit, hits) = if alpha > PIVOT_TOL {
                (self.beta[r].max(0.0) / alpha, Bound::Lower)
            } else if alpha < -PIVOT_TOL && self.upper[var].is_finite() {
                ((self.upper[var] - self.beta[r]).max(0.0) / -alpha, Bound::Upper)
            } else {
                continue;
            };
            let better = match leaving {
                _ if limit < step => true,
                Some((lr, _)) if limit == step => var < self.basis[lr],
                _ => false,
            };
            if better {
                step = limit;
                leaving = Some((r, hits));
            }
        }
        if step.is_infinite() {
            return Step::Unbounded;
        }

        for r in 0..self.k {
            self.beta[r] -= dir * step * self.t[r * cols + entering];
        }
        match leaving {
            None => {
                self.state[entering] = match self.state[entering] {
                    Bound::Lower => Bound::Upper,
                    Bound::Upper => Bound::Lower,
                };
            }
            Some((r, hits)) => {
                let old = self.basis[r];
                self.state[old] = hits;
                let value = match self.state[entering] {
                    Bound::Lower => step,
                    Bound::Upper => self.upper[entering] - step,
                };
                self.pivot(r, entering);
                self.beta[r] = value;
                self.state[entering] = Bound::Lower;
            }
        }
        Step::Moved
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let cols = self.cols;
        let p = self.t[r * cols + j];
        {
            let row = &mut self.t[r * cols..(r + 1) * cols];
            for v in row.iter_mut() {
                *v /= p;
            }
            row[j] = 1.0;
        }
        let (before, rest) = self.t.split_at_mut(r * cols);
        let (prow, after) = rest.split_at_mut(cols);
        for other in before.chunks_exact_mut(cols).chain(after.chunks_exact_mut(cols)) {
            let f = other[j];
            if f != 0.0 {
                for (o, &pv) in other.iter_mut().zip(prow.iter()) {
                    *o -= f * pv;
                }
                other[j] = 0.0;
            }
        }
        let f = self.reduced[j];
        if f != 0.0 {
            for (d, &pv) in self.reduced.iter_mut().zip(prow.iter()) {
                *d -= f * pv;
            }
            self.reduced[j] = 0.0;
        }
        self.basis[r] = j;
    }

    /// Column `j` of the (row-signed) constraint matrix.
    fn column(&self, lp: &LinearProgram, j: usize, out: &mut [f64]) {
        for i in 0..self.k {
            let sign = if self.negated[i] { -1.0 } else { 1.0 };
            out[i] = if j < self.m {
                sign * lp.constraints[(i, j)]
            } else if j < self.first_artificial {
                if j - self.m == i { sign } else { 0.0 }
            } else {
                let art_row = self.artificial_row(j);
                if art_row == i { 1.0 } else { 0.0 }
            };
        }
    }

    fn artificial_row(&self, j: usize) -> usize {
        let idx = j - self.first_artificial;
        self.negated
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .nth(idx)
            .map(|(i, _)| i)
            .expect("artificial column without a row")
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.state[j] {
            Bound::Lower => 0.0,
            Bound::Upper => self.upper[j],
        }
    }

    fn extract(&self, lp: &LinearProgram) -> LpSolution {
        let k = self.k;
        let mut values = vec![0.0; self.cols];
        for j in 0..self.cols {
            values[j] = self.nonbasic_value(j);
        }
        let mut duals = vec![0.0; k];
        if k > 0 {
            let mut basis_matrix = DMatrix::zeros(k, k);
            let mut col = vec![0.0; k];
            for (r, &var) in self.basis.iter().enumerate() {
                self.column(lp, var, &mut col);
                for i in 0..k {
                    basis_matrix[(i, r)] = col[i];
                }
            }
            let mut rhs = DVector::from_fn(k, |i, _| {
                if self.negated[i] { -lp.rhs[i] } else { lp.rhs[i] }
            });
            for j in 0..self.cols {
                if values[j] != 0.0 && !self.is_basic(j) {
                    self.column(lp, j, &mut col);
                    for i in 0..k {
                        rhs[i] -= col[i] * values[j];
                    }
                }
            }
            let lu = basis_matrix.clone().lu();
            let cb = DVector::from_fn(k, |r, _| self.cost[self.basis[r]]);
            match (lu.solve(&rhs), basis_matrix.transpose().lu().solve(&cb)) {
                (Some(xb), Some(y)) => {
                    for (r, &var) in self.basis.iter().enumerate() {
                        values[var] = xb[r];
                    }
                    for i in 0..k {
                        duals[i] = if self.negated[i] { -y[i] } else { y[i] };
                    }
                }
                _ => {
                    for (r, &var) in self.basis.iter().enumerate() {
                        values[var] = self.beta[r];
                    }
                }
            }
        }
        let x: Vec<f64> = values[..self.m]
            .iter()
            .zip(&lp.upper_bounds)
            .map(|(&v, &u)| v.clamp(0.0, u))
            .collect();
        LpSolution {
            objective_value: lp.objective_value(&x),
            x,
            status: LpStatus::Optimal,
            duals,
            iterations: self.iterations,
        }
    }
}
