//! Sparse equality-form linear programs `min cᵀx, Ax = b, x >= 0`, solved by
//! the Clarabel interior-point method.
//!
//! Duals follow the textbook convention `max bᵀy, Aᵀy <= c`.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, NonnegativeConeT, SolverStatus, ZeroConeT,
};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    /// Solved to reduced accuracy.
    NearOptimal,
    Infeasible,
    Unbounded,
    Failed,
}

impl LpStatus {
    pub fn is_solved(&self) -> bool {
        matches!(self, LpStatus::Optimal | LpStatus::NearOptimal)
    }
}

/// Column-compressed constraint matrix with cost and right-hand side.
#[derive(Clone, Debug, Default)]
pub struct LinearProgram {
    pub n_rows: usize,
    pub n_cols: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub values: Vec<f64>,
    pub cost: Vec<f64>,
    pub rhs: Vec<f64>,
    /// Known a-priori bound `x_j <= column_bound` on every feasible point,
    /// used to certify infeasibility from a stalled dual iterate.
    pub column_bound: Option<f64>,
}

/// Incremental column-wise builder.
#[derive(Clone, Debug)]
pub struct LpBuilder {
    lp: LinearProgram,
}

impl LpBuilder {
    pub fn new(rhs: Vec<f64>) -> Self {
        Self {
            lp: LinearProgram {
                n_rows: rhs.len(),
                n_cols: 0,
                col_ptr: vec![0],
                row_idx: Vec::new(),
                values: Vec::new(),
                cost: Vec::new(),
                rhs,
                column_bound: None,
            },
        }
    }

    /// Appends a column; duplicate row entries are summed and zeros dropped.
    pub fn push_column(&mut self, cost: f64, entries: &[(usize, f64)]) -> usize {
        let mut e: Vec<(usize, f64)> = entries.to_vec();
        e.sort_by_key(|x| x.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(e.len());
        for (r, v) in e {
            debug_assert!(r < self.lp.n_rows);
            match merged.last_mut() {
                Some(last) if last.0 == r => last.1 += v,
                _ => merged.push((r, v)),
            }
        }
        for (r, v) in merged {
            if v != 0.0 {
                self.lp.row_idx.push(r);
                self.lp.values.push(v);
            }
        }
        self.lp.col_ptr.push(self.lp.row_idx.len());
        self.lp.cost.push(cost);
        self.lp.n_cols += 1;
        self.lp.n_cols - 1
    }

    pub fn with_column_bound(mut self, bound: f64) -> Self {
        self.lp.column_bound = Some(bound);
        self
    }

    pub fn finish(self) -> LinearProgram {
        self.lp
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    /// `‖Ax - b‖∞` together with the most negative entry of `x`.
    pub primal_defect: f64,
    /// `max (Aᵀy - c)⁺`.
    pub dual_defect: f64,
    pub iterations: u32,
}

impl LpSolution {
    pub fn duality_gap(&self) -> f64 {
        (self.primal_objective - self.dual_objective).abs()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LpOptions {
    pub tol: f64,
    pub max_iter: u32,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 400,
        }
    }
}

impl LinearProgram {
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `Ax`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_rows];
        for j in 0..self.n_cols {
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                out[self.row_idx[k]] += self.values[k] * x[j];
            }
        }
        out
    }

    /// `Aᵀy`.
    pub fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        (0..self.n_cols)
            .map(|j| {
                (self.col_ptr[j]..self.col_ptr[j + 1])
                    .map(|k| self.values[k] * y[self.row_idx[k]])
                    .sum()
            })
            .collect()
    }

    pub fn primal_defect(&self, x: &[f64]) -> f64 {
        let ax = self.apply(x);
        let eq = ax
            .iter()
            .zip(&self.rhs)
            .fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
        let neg = x.iter().fold(0.0, |m: f64, v| m.max(-v));
        eq.max(neg)
    }

    pub fn dual_defect(&self, y: &[f64]) -> f64 {
        self.apply_transpose(y)
            .iter()
            .zip(&self.cost)
            .fold(0.0, |m: f64, (a, c)| m.max(a - c))
    }

    /// True when `y` certifies primal infeasibility. With `Aᵀy <= c + δ` and
    /// `0 <= x_j <= B` on the feasible set, any feasible `x` would satisfy
    /// `bᵀy <= (Σ|c_j| + nδ) B`. Interior-point runs on infeasible programs
    /// without interior sometimes stall with a diverging dual iterate
    /// instead of reporting infeasibility.
    fn is_infeasibility_certificate(&self, y: &[f64]) -> bool {
        let Some(bound) = self.column_bound else {
            return false;
        };
        if y.iter().any(|v| !v.is_finite()) {
            return false;
        }
        let slack = self.dual_defect(y);
        let gain: f64 = self.rhs.iter().zip(y).map(|(b, r)| b * r).sum();
        let cap = (self.cost.iter().map(|c| c.abs()).sum::<f64>() + self.n_cols as f64 * slack) * bound;
        gain.is_finite() && gain > 2.0 * cap + 1.0
    }

    /// Solves the program with Clarabel (`Ax + s = b` with `s` in the zero
    /// cone, `-x + s = 0` with `s` in the nonnegative cone).
    pub fn solve(&self, opts: &LpOptions) -> Result<LpSolution> {
        let m = self.n_rows;
        let n = self.n_cols;
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::with_capacity(self.nnz() + n);
        let mut values = Vec::with_capacity(self.nnz() + n);
        col_ptr.push(0);
        for j in 0..n {
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                row_idx.push(self.row_idx[k]);
                values.push(self.values[k]);
            }
            row_idx.push(m + j);
            values.push(-1.0);
            col_ptr.push(row_idx.len());
        }
        let a = CscMatrix::new(m + n, n, col_ptr, row_idx, values);
        let p = CscMatrix::zeros((n, n));
        let mut b = self.rhs.clone();
        b.extend(std::iter::repeat(0.0).take(n));
        let cones = [ZeroConeT(m), NonnegativeConeT(n)];
        let settings = DefaultSettings {
            verbose: false,
            max_iter: opts.max_iter,
            tol_gap_abs: opts.tol,
            tol_gap_rel: opts.tol,
            tol_feas: opts.tol,
            tol_ktratio: 1e-8,
            max_threads: 1,
            ..DefaultSettings::default()
        };
        let mut solver = DefaultSolver::new(&p, &self.cost, &a, &b, &cones, settings)
            .map_err(|e| Error::Solver(format!("{e:?}")))?;
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved => LpStatus::Optimal,
            SolverStatus::AlmostSolved => LpStatus::NearOptimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                LpStatus::Infeasible
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => LpStatus::Unbounded,
            _ => LpStatus::Failed,
        };
        let x = sol.x.clone();
        let y: Vec<f64> = sol.z[..m].iter().map(|z| -z).collect();
        let status = if status == LpStatus::Failed && self.is_infeasibility_certificate(&y) {
            LpStatus::Infeasible
        } else {
            status
        };
        let primal_objective = self.cost.iter().zip(&x).map(|(c, v)| c * v).sum();
        let dual_objective = self.rhs.iter().zip(&y).map(|(b, v)| b * v).sum();
        Ok(LpSolution {
            status,
            primal_defect: self.primal_defect(&x),
            dual_defect: self.dual_defect(&y),
            x,
            y,
            primal_objective,
            dual_objective,
            iterations: sol.iterations,
        })
    }

    /// Writes `(row, col, value)` triplets, one per line, with a header.
    pub fn write_triplets(&self, w: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "row,col,value")?;
        for j in 0..self.n_cols {
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                writeln!(w, "{},{},{:e}", self.row_idx[k], j, self.values[k])?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_transport_problem() {
        // two sources, two sinks, cost matrix [[1,3],[2,1]]
        let mut b = LpBuilder::new(vec![0.6, 0.4, 0.5, 0.5]);
        let costs = [[1.0, 3.0], [2.0, 1.0]];
        for i in 0..2 {
            for j in 0..2 {
                b.push_column(costs[i][j], &[(i, 1.0), (2 + j, 1.0)]);
            }
        }
        let lp = b.finish();
        let s = lp.solve(&LpOptions::default()).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        // oracle: enumerate the one-parameter family x11 = t
        let mut best = f64::INFINITY;
        for k in 0..=6000 {
            let t = 0.1 + 0.5 * k as f64 / 6000.0;
            let x = [t, 0.6 - t, 0.5 - t, t - 0.1];
            if x.iter().all(|v| *v >= -1e-12) {
                best = best.min(t + 3.0 * (0.6 - t) + 2.0 * (0.5 - t) + (t - 0.1));
            }
        }
        assert!((s.primal_objective - best).abs() < 1e-6);
        assert!(s.duality_gap() < 1e-8);
        assert!(s.primal_defect < 1e-8 && s.dual_defect < 1e-8);
    }

    #[test]
    fn infeasible_detected() {
        let mut b = LpBuilder::new(vec![1.0, 2.0]);
        b.push_column(1.0, &[(0, 1.0), (1, 1.0)]);
        let s = b.finish().solve(&LpOptions::default()).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
    }

    #[test]
    fn duplicate_entries_merge() {
        let mut b = LpBuilder::new(vec![1.0]);
        b.push_column(2.0, &[(0, 0.5), (0, 0.5)]);
        let lp = b.finish();
        assert_eq!(lp.nnz(), 1);
        assert_eq!(lp.values[0], 1.0);
    }
}
