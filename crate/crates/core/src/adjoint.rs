//! Adjoint Fokker–Planck equation of the viscous problem and the occupation
//! measures it induces.
//!
//! Each forward step is linearized as `M_k = I + dt_k ((a+ε)Δ_h - q^k·D^up)`
//! with `q^k = D_pH(x, p^k)`, and the density is pulled back by the exact
//! transpose, `σ^k = M_kᵀ σ^{k+1}`. Tested against the same `M_k`, the
//! resulting measure satisfies the discrete holonomy identity to rounding.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{DiscreteMeasure, GridFunction, TorusGrid, Vector, MAX_DIM};
use crate::measures::{holonomy_defect, Atom, MeasureMode, OccupationMeasure};
use crate::model::ModelSpec;
use crate::pde::{one_sided, Trajectory};
use crate::stencil::{transition_row, DriftStencil, SecondOrderOperator};

/// Backward densities `σ^k`, `k = 0..=K`, on the levels of a forward solve.
#[derive(Clone, Debug)]
pub struct AdjointRun {
    pub times: Vec<f64>,
    /// Probability weights per level; `sigma[K]` is `ν₁`.
    pub sigma: Vec<GridFunction>,
    pub nu0: DiscreteMeasure,
    pub nu1: DiscreteMeasure,
    pub eps: f64,
    /// Index in the forward trajectory of the first level.
    pub first_level: usize,
    /// Velocity field `q^k` per step and node.
    pub drift: Vec<Vec<Vector>>,
}

/// Occupation measure with weight `σ^{k+1}_i dt_k` at `(x_i, q^k_i)`.
#[derive(Clone, Debug)]
pub struct AdjointOccupation {
    pub measure: OccupationMeasure,
    pub drift: Vec<Vec<Vector>>,
}

/// Gradient fed to `D_pH`: per axis the one-sided difference on the side
/// the characteristic comes from, judged by `D_pH` at the centered gradient.
pub fn upwind_gradient(model: &ModelSpec, grid: &TorusGrid, u: &[f64], i: usize) -> Vector {
    let (dm, dp) = one_sided(grid, u, i);
    let x = grid.point(i);
    let mut pbar = [0.0; MAX_DIM];
    for d in 0..grid.dim() {
        pbar[d] = 0.5 * (dm[d] + dp[d]);
    }
    let g = model.dp_hamiltonian(&x, &pbar);
    let mut p = [0.0; MAX_DIM];
    for d in 0..grid.dim() {
        p[d] = if g[d] >= 0.0 { dm[d] } else { dp[d] };
    }
    p
}

/// `q = D_pH(x_i, p)` with the upwind gradient of `u`.
pub fn drift_field(model: &ModelSpec, grid: &TorusGrid, u: &[f64]) -> Vec<Vector> {
    (0..grid.len())
        .into_par_iter()
        .with_min_len(512)
        .map(|i| model.dp_hamiltonian(&grid.point(i), &upwind_gradient(model, grid, u, i)))
        .collect()
}

fn level_range(traj: &Trajectory, t0: f64, t1: f64) -> Result<(usize, usize)> {
    if traj.steps + 1 != traj.times.len() {
        return Err(Error::InvalidArgument(
            "the adjoint solve needs every forward step retained".into(),
        ));
    }
    if !(t0 < t1) {
        return Err(Error::InvalidArgument(format!("need t0 < t1, got {t0} and {t1}")));
    }
    let find = |t: f64| {
        let k = traj.index_of(t);
        if (traj.times[k] - t).abs() <= 1e-9 * (1.0 + t.abs()) {
            Ok(k)
        } else {
            Err(Error::InvalidArgument(format!(
                "t = {t} is not a level of the forward solve (nearest {})",
                traj.times[k]
            )))
        }
    };
    Ok((find(t0)?, find(t1)?))
}

/// Solves the adjoint equation backward from `σ(t₁) = ν₁`.
pub fn solve_adjoint_fp(
    model: &ModelSpec,
    traj: &Trajectory,
    nu1: &DiscreteMeasure,
    t0: f64,
    t1: f64,
) -> Result<AdjointRun> {
    let eps = traj.eps_viscosity;
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(
            "the adjoint construction needs eps_viscosity > 0".into(),
        ));
    }
    let grid = *traj.grid();
    grid.check_same(nu1.grid())?;
    let (k0, k1) = level_range(traj, t0, t1)?;
    let op = SecondOrderOperator::new(model, &grid, eps)?;
    let n = grid.len();
    let mut sigma = vec![GridFunction::from_vec_unchecked(grid, nu1.weights().to_vec())];
    let mut drift = Vec::with_capacity(k1 - k0);
    let mut cur = nu1.weights().to_vec();
    let mut row = Vec::with_capacity(9);
    for k in (k0..k1).rev() {
        let dt = traj.times[k + 1] - traj.times[k];
        let q = drift_field(model, &grid, traj.fields[k].values());
        let mut prev = vec![0.0; n];
        for i in 0..n {
            transition_row(&op, i, &q[i], dt, DriftStencil::Upwind, &mut row);
            for &(j, c) in &row {
                if c < -1e-13 {
                    return Err(Error::Cfl(format!(
                        "adjoint step at t = {} has negative transition weight {c} at node {i}",
                        traj.times[k]
                    )));
                }
                prev[j] += cur[i] * c;
            }
        }
        let mass: f64 = prev.iter().sum();
        if (mass - 1.0).abs() > 1e-10 {
            return Err(Error::Audit(format!("adjoint mass drifted to {mass}")));
        }
        cur = prev;
        sigma.push(GridFunction::from_vec_unchecked(grid, cur.clone()));
        drift.push(q);
    }
    sigma.reverse();
    drift.reverse();
    let nu0 = DiscreteMeasure::new(grid, cur.iter().map(|v| v.max(0.0)).collect())?;
    Ok(AdjointRun {
        times: traj.times[k0..=k1].to_vec(),
        sigma,
        nu0,
        nu1: nu1.clone(),
        eps,
        first_level: k0,
        drift,
    })
}

/// Occupation measure of an adjoint run; total mass `t₁ - t₀`.
pub fn build_gamma(run: &AdjointRun) -> AdjointOccupation {
    let grid = *run.nu1.grid();
    let mut atoms = Vec::with_capacity(run.drift.len() * grid.len());
    for (k, q) in run.drift.iter().enumerate() {
        let dt = run.times[k + 1] - run.times[k];
        let s = run.sigma[k + 1].values();
        for i in 0..grid.len() {
            if s[i] > 0.0 {
                atoms.push(Atom {
                    node: i,
                    velocity: q[i],
                    step: k,
                    weight: s[i] * dt,
                });
            }
        }
    }
    AdjointOccupation {
        measure: OccupationMeasure {
            grid,
            mode: MeasureMode::Spacetime {
                times: run.times.clone(),
            },
            atoms,
            initial: Some(run.nu0.clone()),
            terminal: Some(run.nu1.clone()),
        },
        drift: run.drift.clone(),
    }
}

/// Largest defect of the viscous holonomy identity over the full nodal
/// space-time basis. `Upwind` test operators are the exact adjoint of the
/// transport step; `Centered` ones are the naive discretization.
pub fn verify_holonomy(
    model: &ModelSpec,
    occ: &AdjointOccupation,
    nu0: &DiscreteMeasure,
    nu1: &DiscreteMeasure,
    eps: f64,
    kind: DriftStencil,
) -> Result<f64> {
    let op = SecondOrderOperator::new(model, &occ.measure.grid, eps)?;
    holonomy_defect(&op, &occ.measure, Some(nu0), Some(nu1), kind)
}

/// `|∫L dγ - (∫u(t₁) dν₁ - ∫u(t₀) dν₀)|`.
pub fn verify_value_identity(
    model: &ModelSpec,
    occ: &AdjointOccupation,
    run: &AdjointRun,
    traj: &Trajectory,
) -> f64 {
    let k0 = run.first_level;
    let k1 = k0 + run.drift.len();
    let action = occ.measure.action(model);
    let pairing = run.nu1.integrate(&traj.fields[k1]) - run.nu0.integrate(&traj.fields[k0]);
    (action - pairing).abs()
}
