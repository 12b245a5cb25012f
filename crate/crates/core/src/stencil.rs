//! Discrete operators shared by the PDE schemes, the occupation-measure
//! constraints and the adjoint equation.
//!
//! `SecondOrderOperator` discretizes `tr(A(x) D²φ) + extra·Δφ` with a
//! monotone stencil (nonnegative off-diagonal weights, zero row sums).
//! Drift terms are first-order upwind, so that
//! `φ ↦ φ + dt (Sφ - q·D^up φ)` is a Markov transition under CFL.

use crate::error::{Error, Result};
use crate::grid::{TorusGrid, Vector};
use crate::model::ModelSpec;

#[derive(Clone, Debug)]
pub struct SecondOrderOperator {
    grid: TorusGrid,
    rows: Vec<Vec<(usize, f64)>>,
    diag: Vec<f64>,
}

fn push_merge(row: &mut Vec<(usize, f64)>, j: usize, c: f64) {
    if c == 0.0 {
        return;
    }
    if let Some(e) = row.iter_mut().find(|e| e.0 == j) {
        e.1 += c;
    } else {
        row.push((j, c));
    }
}

impl SecondOrderOperator {
    /// Stencil for the model diffusion plus `extra` times the Laplacian.
    pub fn new(model: &ModelSpec, grid: &TorusGrid, extra: f64) -> Result<Self> {
        if extra < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "added viscosity must be nonnegative, got {extra}"
            )));
        }
        let h2 = grid.spacing().powi(2);
        let dim = grid.dim();
        let mut rows = Vec::with_capacity(grid.len());
        let mut diag = Vec::with_capacity(grid.len());
        for i in 0..grid.len() {
            let x = grid.point(i);
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(9);
            if dim == 1 {
                let a = model.diffusion.scalar(&x, 1) + extra;
                if a < -1e-14 {
                    return Err(Error::InvalidArgument(format!(
                        "negative diffusion {a} at node {i}"
                    )));
                }
                let a = a.max(0.0);
                push_merge(&mut row, i, -2.0 * a / h2);
                push_merge(&mut row, grid.shift(i, 0, 1), a / h2);
                push_merge(&mut row, grid.shift(i, 0, -1), a / h2);
            } else {
                let a = model.diffusion.matrix(&x, 2);
                let a11 = a[0][0] + extra;
                let a22 = a[1][1] + extra;
                let a12 = a[0][1];
                let off = a12.abs();
                if a11 < off - 1e-14 || a22 < off - 1e-14 {
                    return Err(Error::NotDiagonallyDominant {
                        node: i,
                        coords: grid.coords(i),
                        detail: format!("a11 = {a11}, a22 = {a22}, |a12| = {off}"),
                    });
                }
                let w1 = (a11 - off).max(0.0) / h2;
                let w2 = (a22 - off).max(0.0) / h2;
                let wd = off / h2;
                push_merge(&mut row, i, -2.0 * (w1 + w2 + wd));
                push_merge(&mut row, grid.shift(i, 0, 1), w1);
                push_merge(&mut row, grid.shift(i, 0, -1), w1);
                push_merge(&mut row, grid.shift(i, 1, 1), w2);
                push_merge(&mut row, grid.shift(i, 1, -1), w2);
                if a12 >= 0.0 {
                    push_merge(&mut row, grid.offset(i, [1, 1]), wd);
                    push_merge(&mut row, grid.offset(i, [-1, -1]), wd);
                } else {
                    push_merge(&mut row, grid.offset(i, [1, -1]), wd);
                    push_merge(&mut row, grid.offset(i, [-1, 1]), wd);
                }
            }
            let d = row.iter().filter(|e| e.0 == i).map(|e| e.1).sum();
            diag.push(d);
            rows.push(row);
        }
        Ok(Self { grid: *grid, rows, diag })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn diag(&self, i: usize) -> f64 {
        self.diag[i]
    }

    pub fn max_abs_diag(&self) -> f64 {
        self.diag.iter().fold(0.0, |m, d| m.max(d.abs()))
    }

    pub fn apply_at(&self, phi: &[f64], i: usize) -> f64 {
        self.rows[i].iter().map(|&(j, c)| c * phi[j]).sum()
    }

    pub fn apply(&self, phi: &[f64]) -> Vec<f64> {
        (0..self.rows.len()).map(|i| self.apply_at(phi, i)).collect()
    }
}

/// How the transport term `q·Dφ` is discretized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DriftStencil {
    /// One-sided differences taken against the direction of `q`; keeps the
    /// transition rows nonnegative.
    Upwind,
    /// Centered differences; consistent but not monotone.
    Centered,
}

/// Coefficients of `q·D φ` at node `i`, appended to `out`.
pub fn drift_row(
    grid: &TorusGrid,
    i: usize,
    q: &Vector,
    kind: DriftStencil,
    out: &mut Vec<(usize, f64)>,
) {
    let h = grid.spacing();
    for d in 0..grid.dim() {
        let qd = q[d];
        if qd == 0.0 {
            continue;
        }
        match kind {
            DriftStencil::Upwind => {
                if qd > 0.0 {
                    push_merge(out, i, qd / h);
                    push_merge(out, grid.shift(i, d, -1), -qd / h);
                } else {
                    push_merge(out, grid.shift(i, d, 1), qd / h);
                    push_merge(out, i, -qd / h);
                }
            }
            DriftStencil::Centered => {
                push_merge(out, grid.shift(i, d, 1), qd / (2.0 * h));
                push_merge(out, grid.shift(i, d, -1), -qd / (2.0 * h));
            }
        }
    }
}

/// Upwind `q·D φ` at node `i`.
pub fn upwind_drift_at(grid: &TorusGrid, phi: &[f64], i: usize, q: &Vector) -> f64 {
    let h = grid.spacing();
    let mut s = 0.0;
    for d in 0..grid.dim() {
        let qd = q[d];
        if qd > 0.0 {
            s += qd * (phi[i] - phi[grid.shift(i, d, -1)]) / h;
        } else if qd < 0.0 {
            s += qd * (phi[grid.shift(i, d, 1)] - phi[i]) / h;
        }
    }
    s
}

/// Row `i` of the transition `M = I + dt (S - q·D)`, written into `out`.
pub fn transition_row(
    op: &SecondOrderOperator,
    i: usize,
    q: &Vector,
    dt: f64,
    kind: DriftStencil,
    out: &mut Vec<(usize, f64)>,
) {
    out.clear();
    out.push((i, 1.0));
    for &(j, c) in op.row(i) {
        push_merge(out, j, dt * c);
    }
    let mut drift = Vec::with_capacity(4);
    drift_row(op.grid(), i, q, kind, &mut drift);
    for (j, c) in drift {
        push_merge(out, j, -dt * c);
    }
    out.retain(|e| e.1 != 0.0);
}

/// `(M φ)_i` for the upwind transition.
pub fn transition_apply(op: &SecondOrderOperator, phi: &[f64], i: usize, q: &Vector, dt: f64) -> f64 {
    phi[i] + dt * (op.apply_at(phi, i) - upwind_drift_at(op.grid(), phi, i, q))
}

/// Largest stable step for transitions with `|q|_inf <= q_max`.
pub fn transition_dt_limit(op: &SecondOrderOperator, q_max: f64) -> f64 {
    let g = op.grid();
    let rate = op.max_abs_diag() + q_max * g.dim() as f64 / g.spacing();
    if rate == 0.0 {
        f64::INFINITY
    } else {
        1.0 / rate
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Diffusion;

    #[test]
    fn rows_sum_to_zero_and_are_monotone() {
        let grid = TorusGrid::new(2, 6).unwrap();
        let model = ModelSpec::power(2, 2.0).unwrap().with_diffusion(Diffusion::MatrixConstant {
            a11: 1.0,
            a12: -0.4,
            a22: 0.6,
        });
        let op = SecondOrderOperator::new(&model, &grid, 0.1).unwrap();
        for i in 0..grid.len() {
            let s: f64 = op.row(i).iter().map(|e| e.1).sum();
            assert!(s.abs() < 1e-9);
            assert!(op.row(i).iter().all(|&(j, c)| j == i || c >= 0.0));
        }
    }

    #[test]
    fn matrix_stencil_is_exact_on_quadratics() {
        let grid = TorusGrid::new(2, 16).unwrap();
        let (a11, a12, a22) = (1.0, 0.3, 0.5);
        let model = ModelSpec::power(2, 2.0)
            .unwrap()
            .with_diffusion(Diffusion::MatrixConstant { a11, a12, a22 });
        let op = SecondOrderOperator::new(&model, &grid, 0.0).unwrap();
        let h = grid.spacing();
        // local quadratic around an interior node, evaluated through offsets
        let c = grid.node([8, 8]);
        let f = |dx: f64, dy: f64| 0.7 * dx * dx + 1.1 * dx * dy - 0.4 * dy * dy;
        let mut phi = vec![0.0; grid.len()];
        for j in 0..grid.len() {
            let d = grid.min_image(c, j);
            phi[j] = f(d[0] as f64 * h, d[1] as f64 * h);
        }
        let exact = a11 * 1.4 + 2.0 * a12 * 1.1 + a22 * (-0.8);
        assert!((op.apply_at(&phi, c) - exact).abs() < 1e-9);
    }

    #[test]
    fn rejects_non_dominant_matrix() {
        let grid = TorusGrid::new(2, 6).unwrap();
        let model = ModelSpec::power(2, 2.0).unwrap().with_diffusion(Diffusion::MatrixConstant {
            a11: 0.2,
            a12: 0.5,
            a22: 1.0,
        });
        match SecondOrderOperator::new(&model, &grid, 0.0) {
            Err(Error::NotDiagonallyDominant { node, .. }) => assert_eq!(node, 0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn transition_rows_are_stochastic() {
        let grid = TorusGrid::new(1, 8).unwrap();
        let model = ModelSpec::power(1, 2.0)
            .unwrap()
            .with_diffusion(Diffusion::Sin2 { a0: 0.05, phase: 0.0 });
        let op = SecondOrderOperator::new(&model, &grid, 0.0).unwrap();
        let dt = transition_dt_limit(&op, 2.0);
        let mut row = Vec::new();
        for i in 0..grid.len() {
            for q in [-2.0, -0.5, 0.0, 1.0, 2.0] {
                transition_row(&op, i, &[q, 0.0], dt, DriftStencil::Upwind, &mut row);
                let s: f64 = row.iter().map(|e| e.1).sum();
                assert!((s - 1.0).abs() < 1e-12);
                assert!(row.iter().all(|e| e.1 >= -1e-14));
            }
        }
    }
}
