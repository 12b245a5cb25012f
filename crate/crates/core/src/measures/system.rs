//! Assembly of the discrete holonomy constraints.
//!
//! Space-time atoms `(i, q, k)` carry the per-slice mass `w = γ/dt`. Against
//! the nodal test function at `(j, l)` an atom contributes `+w` when
//! `(j, l) = (i, k+1)` and `-w M_q(i, j)` when `l = k`, where
//! `M_q = I + dt (S - q·D^up)`. Rows are therefore the coefficients of
//! `Σ γ (φ_t - Sφ + q·Dφ) - Σ ν₁ φ(t₁) + Σ ν₀ φ(t₀)`.

use crate::error::{Error, Result};
use crate::grid::{DiscreteMeasure, GridFunction, Vector};
use crate::lp::{LinearProgram, LpBuilder};
use crate::stencil::{drift_row, transition_row, DriftStencil};

use super::Discretization;

/// Left endpoint of the spacetime problem.
#[derive(Clone, Debug)]
pub enum Source {
    Fixed(DiscreteMeasure),
    /// `ν₀` becomes a variable with cost `∫u₀ dν₀`.
    Free(GridFunction),
}

#[derive(Clone, Debug, PartialEq)]
pub enum SystemMode {
    Stationary,
    Spacetime { steps: usize, dt: f64 },
}

/// Column of the constraint matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Column {
    Atom { node: usize, q_index: usize, step: usize },
    Source { node: usize },
}

/// Constraint matrix over the full nodal test basis, with one redundant row
/// removed before handing it to the solver.
#[derive(Clone, Debug)]
pub struct HolonomyConstraintSystem {
    pub mode: SystemMode,
    pub lp: LinearProgram,
    pub columns: Vec<Column>,
    /// Number of rows of the full system (every nodal test function plus
    /// the mass row, if any).
    pub full_rows: usize,
    /// Index (in the full system) of the row left out of `lp`.
    pub dropped_row: usize,
    pub has_mass_row: bool,
}

impl HolonomyConstraintSystem {
    /// Full-system row for LP row `r`.
    pub fn full_row(&self, r: usize) -> usize {
        if r >= self.dropped_row {
            r + 1
        } else {
            r
        }
    }

    /// Dual vector over the full system (the dropped row gets 0).
    pub fn full_dual(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.full_rows];
        for (r, v) in y.iter().enumerate() {
            out[self.full_row(r)] = *v;
        }
        out
    }

    /// Exports the matrix as triplets plus a JSON sidecar.
    pub fn metadata(&self, disc: &Discretization) -> serde_json::Value {
        let (mode, steps, dt) = match &self.mode {
            SystemMode::Stationary => ("stationary", 0, 0.0),
            SystemMode::Spacetime { steps, dt } => ("spacetime", *steps, *dt),
        };
        serde_json::json!({
            "mode": mode,
            "dim": disc.grid.dim(),
            "n_per_dim": disc.grid.n_per_dim(),
            "n_nodes": disc.grid.len(),
            "q_max": disc.lattice.q_max(),
            "n_q_per_dim": disc.lattice.n_q_per_dim(),
            "eta": disc.eta,
            "steps": steps,
            "dt": dt,
            "rows": self.lp.n_rows,
            "full_rows": self.full_rows,
            "dropped_row": self.dropped_row,
            "has_mass_row": self.has_mass_row,
            "cols": self.lp.n_cols,
            "nnz": self.lp.nnz(),
            "row_order": "stationary: node; spacetime: level * n_nodes + node; mass row last",
            "col_order": "atoms (step, node, velocity) in lexicographic order, then sources by node",
        })
    }
}

fn drop_row(entries: &mut Vec<(usize, f64)>, dropped: usize) {
    entries.retain(|e| e.0 != dropped);
    for e in entries.iter_mut() {
        if e.0 > dropped {
            e.0 -= 1;
        }
    }
}

/// Generator column `(-S + q·D^up)ᵀ e_i` restricted to the nodal basis.
pub(crate) fn stationary_column(disc: &Discretization, node: usize, q: &Vector) -> Vec<(usize, f64)> {
    let mut col: Vec<(usize, f64)> = disc.operator().row(node).iter().map(|&(j, c)| (j, -c)).collect();
    drift_row(&disc.grid, node, q, DriftStencil::Upwind, &mut col);
    col
}

pub fn build_stationary(disc: &Discretization) -> HolonomyConstraintSystem {
    let n = disc.grid.len();
    let full_rows = n + 1;
    let dropped = 0;
    let mut rhs = vec![0.0; full_rows];
    rhs[n] = 1.0;
    rhs.remove(dropped);
    // each level (and the stationary measure) carries unit mass
    let mut b = LpBuilder::new(rhs);
    let mut columns = Vec::with_capacity(n * disc.lattice.len());
    for i in 0..n {
        for (k, q) in disc.lattice.velocities().iter().enumerate() {
            let mut col = stationary_column(disc, i, q);
            col.push((n, 1.0));
            drop_row(&mut col, dropped);
            b.push_column(disc.lagrangian(i, k), &col);
            columns.push(Column::Atom {
                node: i,
                q_index: k,
                step: 0,
            });
        }
    }
    HolonomyConstraintSystem {
        mode: SystemMode::Stationary,
        lp: b.with_column_bound(1.0).finish(),
        columns,
        full_rows,
        dropped_row: dropped,
        has_mass_row: true,
    }
}

pub fn build_spacetime(
    disc: &Discretization,
    steps: usize,
    nu1: &DiscreteMeasure,
    source: &Source,
) -> Result<HolonomyConstraintSystem> {
    let n = disc.grid.len();
    disc.grid.check_same(nu1.grid())?;
    let dt = disc.dt();
    let free = matches!(source, Source::Free(_));
    let full_rows = (steps + 1) * n + usize::from(free);
    let dropped = 0;
    let mut rhs = vec![0.0; full_rows];
    for j in 0..n {
        rhs[steps * n + j] += nu1.weights()[j];
    }
    match source {
        Source::Fixed(nu0) => {
            disc.grid.check_same(nu0.grid())?;
            for j in 0..n {
                rhs[j] -= nu0.weights()[j];
            }
        }
        Source::Free(u0) => {
            disc.grid.check_same(u0.grid())?;
            rhs[full_rows - 1] = 1.0;
        }
    }
    rhs.remove(dropped);
    // each level (and the stationary measure) carries unit mass
    let mut b = LpBuilder::new(rhs);
    let mut columns = Vec::with_capacity(steps * n * disc.lattice.len() + n);
    let mut row = Vec::with_capacity(9);
    for k in 0..steps {
        for i in 0..n {
            for (qi, q) in disc.lattice.velocities().iter().enumerate() {
                transition_row(disc.operator(), i, q, dt, DriftStencil::Upwind, &mut row);
                let mut col: Vec<(usize, f64)> = row.iter().map(|&(j, c)| (k * n + j, -c)).collect();
                col.push(((k + 1) * n + i, 1.0));
                drop_row(&mut col, dropped);
                b.push_column(dt * disc.lagrangian(i, qi), &col);
                columns.push(Column::Atom {
                    node: i,
                    q_index: qi,
                    step: k,
                });
            }
        }
    }
    if let Source::Free(u0) = source {
        for j in 0..n {
            let mut col = vec![(j, 1.0), (full_rows - 1, 1.0)];
            drop_row(&mut col, dropped);
            b.push_column(u0.values()[j], &col);
            columns.push(Column::Source { node: j });
        }
    }
    if steps == 0 {
        return Err(Error::InvalidArgument("horizon must be positive".into()));
    }
    Ok(HolonomyConstraintSystem {
        mode: SystemMode::Spacetime { steps, dt },
        lp: b.with_column_bound(1.0).finish(),
        columns,
        full_rows,
        dropped_row: dropped,
        has_mass_row: free,
    })
}
