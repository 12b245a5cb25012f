//! `∫u(t) dν` and `∫u∞ dν` against the free-source occupation programs.

use std::f64::consts::PI;

use torus_hjb::lp::LpOptions;
use torus_hjb::measures::{normalize_model, project_measure, solve_mather_lp, Discretization};
use torus_hjb::pde::SolveConfig;
use torus_hjb::profile::{verify_profile, verify_representation};
use torus_hjb::{DiscreteMeasure, GridFunction, ModelSpec, Result, TorusGrid, VelocityLattice};

fn main() -> Result<()> {
    let opts = LpOptions::default();
    for n in [32, 64] {
        let grid = TorusGrid::new(1, n)?;
        let lattice = VelocityLattice::new(1, 2.0, n / 4 + 1)?;
        let disc = Discretization::new(&ModelSpec::eikonal_1d(), grid, lattice, grid.spacing())?;
        let u0 = GridFunction::from_fn(grid, |x| 0.3 * (2.0 * PI * x[0]).sin());
        let nu = DiscreteMeasure::uniform(grid);
        let cfg = SolveConfig::new(1.0).with_eps(disc.eta);
        let rep = verify_representation(&disc, &u0, &nu, 1.0, &cfg)?;
        println!("N={n} t=1: PDE {:+.5} LP {:+.5} gap {:.2e}", rep.lhs, rep.rhs, rep.gap);

        let (normalized, c) = normalize_model(&disc, &opts)?;
        let mather = project_measure(&solve_mather_lp(&normalized, &opts)?.measure)?;
        let cfg = SolveConfig::new(64.0).with_eps(disc.eta);
        let prof = verify_profile(&normalized, &u0, &mather, &[1.0, 2.0, 4.0, 8.0], &cfg, 1e-7)?;
        println!("  profile (c = {c:+.5}): PDE {:+.5} LP {:+.5} gap {:.2e}", prof.lhs, prof.rhs, prof.gap);
    }
    Ok(())
}
