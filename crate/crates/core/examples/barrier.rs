//! Mañé potential, Peierls barrier, the Aubry test and the superquadratic
//! supersolution.

use torus_hjb::lp::LpOptions;
use torus_hjb::measures::{aubry_test, mane_potential, normalize_model, peierls_barrier, project_measure, solve_mather_lp, Discretization};
use torus_hjb::pde::check_superquadratic_barrier;
use torus_hjb::{DiscreteMeasure, ModelSpec, Result, TorusGrid, VelocityLattice};

fn main() -> Result<()> {
    let grid = TorusGrid::new(1, 16)?;
    let opts = LpOptions::default();
    let raw = Discretization::new(&ModelSpec::eikonal_1d(), grid, VelocityLattice::new(1, 2.0, 9)?, 0.0625)?;
    // the added viscosity moves the critical value; h is only finite once it is 0
    let (disc, c) = normalize_model(&raw, &opts)?;
    println!("critical value of the viscous program {c:+.5}");
    let schedule = [1.0, 2.0, 4.0];

    let uniform = DiscreteMeasure::uniform(grid);
    let mather = project_measure(&solve_mather_lp(&disc, &opts)?.measure)?;
    let point = DiscreteMeasure::point_mass(grid, 8);

    for (name, nu1) in [("mather", &mather), ("point", &point)] {
        let d = mane_potential(&disc, &uniform, nu1, &schedule, &opts)?;
        let h = peierls_barrier(&disc, &uniform, nu1, &schedule, 2, &opts)?;
        println!("uniform -> {name}: d = {:+.5} (t* = {}), h = {:+.5}", d.d, d.t_star, h.h);
        for r in &h.table {
            println!("  h_{} = {:+.6}", r.t, r.value);
        }
    }
    let (inside, est) = aubry_test(&disc, &mather, &schedule, 2, 1e-6, &opts)?;
    println!("Mather projection in the Aubry set: {inside} (h = {:.2e})", est.h);

    for m in [2.5, 3.0, 4.0] {
        let b = check_superquadratic_barrier(m, 10.0, 1, 10_000)?;
        println!("m = {m}: lambda = {}, margin {:.3e}", b.lambda, b.min_margin);
    }
    Ok(())
}
