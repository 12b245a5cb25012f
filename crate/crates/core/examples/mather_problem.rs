//! Discrete Mather problem: ergodic constant, minimizing measure and corrector.

use torus_hjb::lp::LpOptions;
use torus_hjb::measures::{project_measure, solve_mather_lp, Discretization};
use torus_hjb::pde::{default_tol, large_time_profile, SolveConfig};
use torus_hjb::{GridFunction, ModelSpec, Result, TorusGrid, VelocityLattice};

fn main() -> Result<()> {
    let model = ModelSpec::eikonal_1d();
    let opts = LpOptions::default();
    for n in [32, 64] {
        let grid = TorusGrid::new(1, n)?;
        let disc = Discretization::new(&model, grid, VelocityLattice::new(1, 2.0, n / 4 + 1)?, 0.0)?;
        let sol = solve_mather_lp(&disc, &opts)?;
        let nu = project_measure(&sol.measure)?;
        let peak = nu.weights().iter().cloned().enumerate().fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
        let u0 = GridFunction::constant(grid, 0.0);
        let pde = large_time_profile(&model, &u0, &SolveConfig::new(64.0), default_tol(&u0))?;
        println!(
            "N={n}: LP value {:+.5}, PDE c {:+.5}, Mather mass peaks at x={:.3} ({:.3})",
            sol.value,
            pde.c,
            grid.point(peak.0)[0],
            peak.1
        );
    }
    Ok(())
}
