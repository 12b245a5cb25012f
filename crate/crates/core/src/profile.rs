//! Representation of `∫u(t) dν` and of `∫u∞ dν` by free-source
//! occupation-measure programs, compared with the PDE solvers.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{DiscreteMeasure, GridFunction};
use crate::measures::{solve_free_source, value_iteration, Discretization};
use crate::pde::{large_time_profile, solve_cauchy, SolveConfig};

fn check_viscosity(disc: &Discretization, cfg: &SolveConfig) -> Result<()> {
    if (disc.eta - cfg.eps_viscosity).abs() > 1e-14 {
        return Err(Error::Config(format!(
            "the PDE viscosity {} differs from the discretization eta {}",
            cfg.eps_viscosity, disc.eta
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct RepresentationReport {
    pub t: f64,
    /// `∫u(t) dν` from the PDE solve.
    pub lhs: f64,
    /// `min ∫L dγ + ∫u₀ dν₀` over `γ` ending at `ν`, `ν₀` free.
    pub rhs: f64,
    pub gap: f64,
    pub lp_duality_gap: f64,
    #[serde(skip)]
    pub nu0: DiscreteMeasure,
}

/// Compares `∫u(t) dν` with the free-source program at horizon `t`.
pub fn verify_representation(
    disc: &Discretization,
    u0: &GridFunction,
    nu: &DiscreteMeasure,
    t: f64,
    cfg: &SolveConfig,
) -> Result<RepresentationReport> {
    check_viscosity(disc, cfg)?;
    let mut run = cfg.clone();
    run.t_final = t;
    run.snapshot_times.clear();
    run.retain_all_steps = false;
    let traj = solve_cauchy(&disc.model, u0, &run)?;
    let lhs = nu.integrate(traj.last());
    let sol = solve_free_source(disc, u0, nu, t, false)?;
    Ok(RepresentationReport {
        t,
        lhs,
        rhs: sol.value,
        gap: (lhs - sol.value).abs(),
        lp_duality_gap: sol.duality_gap(),
        nu0: sol.nu0,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct HorizonValue {
    pub t: f64,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProfileRhs {
    /// `min_t min_{ν₀} [h_t(ν₀,ν) + ∫u₀ dν₀]` over the horizons.
    pub value: f64,
    pub t_star: f64,
    #[serde(skip)]
    pub nu0_star: DiscreteMeasure,
    pub table: Vec<HorizonValue>,
}

/// Minimizes the free-source value over the horizons; ties go to the
/// smaller horizon.
pub fn rhs_profile(
    disc: &Discretization,
    u0: &GridFunction,
    nu: &DiscreteMeasure,
    horizons: &[f64],
) -> Result<ProfileRhs> {
    if horizons.is_empty() {
        return Err(Error::InvalidArgument("empty horizon list".into()));
    }
    let steps: Vec<usize> = horizons.iter().map(|&t| disc.steps_for(t)).collect::<Result<_>>()?;
    let max_steps = *steps.iter().max().expect("nonempty");
    let vi = value_iteration(disc, u0, nu, max_steps)?;
    let table: Vec<HorizonValue> = horizons
        .iter()
        .zip(&steps)
        .map(|(&t, &k)| HorizonValue {
            t,
            value: vi.pairing[k],
        })
        .collect();
    let mut best = &table[0];
    for row in &table[1..] {
        if row.value < best.value || (row.value == best.value && row.t < best.t) {
            best = row;
        }
    }
    let sol = solve_free_source(disc, u0, nu, best.t, false)?;
    Ok(ProfileRhs {
        value: best.value,
        t_star: best.t,
        nu0_star: sol.nu0,
        table,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ProfileReport {
    /// `∫u∞ dν`.
    pub lhs: f64,
    pub rhs: f64,
    pub gap: f64,
    /// Ergodic constant measured by the PDE.
    pub c: f64,
    pub t_reached: f64,
    /// `h + Δq + dt + 1/t_max`.
    pub budget: f64,
    pub profile: ProfileRhs,
}

/// Compares `∫u∞ dν` from the large-time solve with [`rhs_profile`].
pub fn verify_profile(
    disc: &Discretization,
    u0: &GridFunction,
    nu: &DiscreteMeasure,
    horizons: &[f64],
    cfg: &SolveConfig,
    tol: f64,
) -> Result<ProfileReport> {
    check_viscosity(disc, cfg)?;
    let est = large_time_profile(&disc.model, u0, cfg, tol)?;
    let lhs = nu.integrate(&est.u_inf);
    let profile = rhs_profile(disc, u0, nu, horizons)?;
    let t_max = horizons.iter().copied().fold(0.0, f64::max);
    Ok(ProfileReport {
        lhs,
        rhs: profile.value,
        gap: (lhs - profile.value).abs(),
        c: est.c,
        t_reached: est.t_reached,
        budget: disc.grid.spacing() + disc.lattice.spacing() + disc.dt() + 1.0 / t_max,
        profile,
    })
}
