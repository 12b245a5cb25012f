//! Exact solution of the free-source space-time program
//! `min Σ γL + Σ u₀ν₀` by dynamic programming.
//!
//! Its dual is `max Σ ν₁ φ(K)` over fields with `φ(0) <= u₀` and
//! `φ(k+1) <= min_q [dt L + M_q φ(k)]`, whose maximizer is the control scheme
//! started from `u₀`. The primal optimum is obtained by pushing `ν₁`
//! backwards through the minimizing velocities, so both objectives coincide
//! up to rounding and the pair is a certified optimum.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{DiscreteMeasure, GridFunction};
use crate::lp::{LpOptions, LpSolution};
use crate::stencil::{transition_apply, transition_row, DriftStencil};

use super::system::{build_spacetime, Column, Source};
use super::{uniform_times, Atom, Discretization, MeasureMode, OccupationMeasure};

fn control_step(disc: &Discretization, v: &[f64], argmin: Option<&mut [u32]>) -> Vec<f64> {
    let dt = disc.dt();
    let op = disc.operator();
    let qs = disc.lattice.velocities();
    let best: Vec<(f64, u32)> = (0..disc.grid.len())
        .into_par_iter()
        .with_min_len(256)
        .map(|i| {
            let mut b = (f64::INFINITY, 0u32);
            for (k, q) in qs.iter().enumerate() {
                let c = dt * disc.lagrangian(i, k) + transition_apply(op, v, i, q, dt);
                if c < b.0 {
                    b = (c, k as u32);
                }
            }
            b
        })
        .collect();
    if let Some(a) = argmin {
        for (slot, b) in a.iter_mut().zip(&best) {
            *slot = b.1;
        }
    }
    best.into_iter().map(|b| b.0).collect()
}

/// `Σ ν₁ V^k` for `k = 0..=steps` with `V^0 = u₀` and `V^{k+1}` the control
/// step of `V^k`.
#[derive(Clone, Debug)]
pub struct ValueIteration {
    pub dt: f64,
    pub pairing: Vec<f64>,
    pub last: GridFunction,
}

pub fn value_iteration(
    disc: &Discretization,
    u0: &GridFunction,
    nu1: &DiscreteMeasure,
    steps: usize,
) -> Result<ValueIteration> {
    disc.grid.check_same(u0.grid())?;
    disc.grid.check_same(nu1.grid())?;
    let mut v = u0.values().to_vec();
    let mut pairing = Vec::with_capacity(steps + 1);
    pairing.push(nu1.integrate_slice(&v));
    for _ in 0..steps {
        v = control_step(disc, &v, None);
        pairing.push(nu1.integrate_slice(&v));
    }
    Ok(ValueIteration {
        dt: disc.dt(),
        pairing,
        last: GridFunction::from_vec_unchecked(disc.grid, v),
    })
}

#[derive(Clone, Debug)]
pub struct FreeSourceSolution {
    pub t: f64,
    /// Primal objective `Σ γL + Σ u₀ν₀`.
    pub value: f64,
    /// Dual objective `Σ ν₁ φ(K)`.
    pub dual_value: f64,
    pub nu0: DiscreteMeasure,
    pub gamma: OccupationMeasure,
    /// Dual field per level, when requested.
    pub dual: Vec<GridFunction>,
}

impl FreeSourceSolution {
    pub fn duality_gap(&self) -> f64 {
        (self.value - self.dual_value).abs()
    }
}

pub fn solve_free_source(
    disc: &Discretization,
    u0: &GridFunction,
    nu1: &DiscreteMeasure,
    t: f64,
    keep_dual: bool,
) -> Result<FreeSourceSolution> {
    disc.grid.check_same(u0.grid())?;
    disc.grid.check_same(nu1.grid())?;
    let steps = disc.steps_for(t)?;
    let n = disc.grid.len();
    let dt = disc.dt();
    let mut argmin = vec![0u32; steps * n];
    let mut v = u0.values().to_vec();
    let mut dual = Vec::new();
    if keep_dual {
        dual.push(u0.clone());
    }
    for k in 0..steps {
        v = control_step(disc, &v, Some(&mut argmin[k * n..(k + 1) * n]));
        if keep_dual {
            dual.push(GridFunction::from_vec_unchecked(disc.grid, v.clone()));
        }
    }
    let dual_value = nu1.integrate_slice(&v);
    // push ν₁ back through the minimizing transitions
    let mut sigma = nu1.weights().to_vec();
    let mut atoms = Vec::new();
    let mut action = 0.0;
    let mut row = Vec::with_capacity(9);
    let qs = disc.lattice.velocities();
    for k in (0..steps).rev() {
        let mut prev = vec![0.0; n];
        for i in 0..n {
            let s = sigma[i];
            if s <= 0.0 {
                continue;
            }
            let qi = argmin[k * n + i] as usize;
            atoms.push(Atom {
                node: i,
                velocity: qs[qi],
                step: k,
                weight: s * dt,
            });
            action += s * dt * disc.lagrangian(i, qi);
            transition_row(disc.operator(), i, &qs[qi], dt, DriftStencil::Upwind, &mut row);
            for &(j, c) in &row {
                prev[j] += s * c;
            }
        }
        sigma = prev;
    }
    let mass: f64 = sigma.iter().sum();
    if (mass - 1.0).abs() > 1e-9 || sigma.iter().any(|s| *s < -1e-12) {
        return Err(Error::Audit(format!(
            "backward push lost positivity or mass (mass {mass}); the time step violates the transition limit"
        )));
    }
    let nu0 = DiscreteMeasure::new(disc.grid, sigma)?;
    let value = action + nu0.integrate(u0);
    atoms.reverse();
    Ok(FreeSourceSolution {
        t,
        value,
        dual_value,
        gamma: OccupationMeasure {
            grid: disc.grid,
            mode: MeasureMode::Spacetime {
                times: uniform_times(steps, dt),
            },
            atoms,
            initial: Some(nu0.clone()),
            terminal: Some(nu1.clone()),
        },
        nu0,
        dual,
    })
}

/// The same program handed to the general LP solver; used as an
/// independent oracle for the dynamic-programming path.
pub fn solve_free_source_lp(
    disc: &Discretization,
    u0: &GridFunction,
    nu1: &DiscreteMeasure,
    t: f64,
    opts: &LpOptions,
) -> Result<(LpSolution, DiscreteMeasure)> {
    let steps = disc.steps_for(t)?;
    let sys = build_spacetime(disc, steps, nu1, &Source::Free(u0.clone()))?;
    let sol = sys.lp.solve(opts)?;
    if !sol.status.is_solved() {
        return Err(Error::Solver(format!(
            "free-source LP at t = {t}: status {:?}",
            sol.status
        )));
    }
    let mut w = vec![0.0; disc.grid.len()];
    for (c, x) in sys.columns.iter().zip(&sol.x) {
        if let Column::Source { node } = c {
            w[*node] = x.max(0.0);
        }
    }
    let total: f64 = w.iter().sum();
    let nu0 = DiscreteMeasure::new(disc.grid, w.into_iter().map(|x| x / total).collect())?;
    Ok((sol, nu0))
}
