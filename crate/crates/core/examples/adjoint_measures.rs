//! Occupation measures built from the adjoint of the viscous scheme and
//! the identities they satisfy.

use std::f64::consts::PI;

use torus_hjb::adjoint::{build_gamma, solve_adjoint_fp, verify_holonomy, verify_value_identity};
use torus_hjb::pde::{solve_cauchy, SolveConfig};
use torus_hjb::stencil::DriftStencil;
use torus_hjb::{DiscreteMeasure, GridFunction, ModelSpec, Result, TorusGrid};

fn main() -> Result<()> {
    let model = ModelSpec::eikonal_1d();
    for n in [32, 64] {
        let grid = TorusGrid::new(1, n)?;
        let eps = grid.spacing();
        let u0 = GridFunction::from_fn(grid, |x| 0.3 * (2.0 * PI * x[0]).sin());
        let traj = solve_cauchy(&model, &u0, &SolveConfig::new(1.0).with_eps(eps).retaining_steps())?;
        let nu1 = DiscreteMeasure::point_mass(grid, n / 3);
        let run = solve_adjoint_fp(&model, &traj, &nu1, 0.0, 1.0)?;
        let occ = build_gamma(&run);
        let upwind = verify_holonomy(&model, &occ, &run.nu0, &nu1, eps, DriftStencil::Upwind)?;
        let centered = verify_holonomy(&model, &occ, &run.nu0, &nu1, eps, DriftStencil::Centered)?;
        let value = verify_value_identity(&model, &occ, &run, &traj);
        println!("N={n}: holonomy defect {upwind:.1e} (centered test operators {centered:.1e}), value gap {value:.5}");
    }
    Ok(())
}
