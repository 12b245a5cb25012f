//! Explicit solve of the degenerate equation and its large-time profile.

use std::f64::consts::PI;

use torus_hjb::model::Diffusion;
use torus_hjb::pde::{default_tol, large_time_profile, solve_cauchy, SolveConfig};
use torus_hjb::{GridFunction, ModelSpec, Result, TorusGrid};

fn main() -> Result<()> {
    let model = ModelSpec::eikonal_1d().with_diffusion(Diffusion::Sin2 { a0: 0.5, phase: 0.5 });
    let grid = TorusGrid::new(1, 128)?;
    let u0 = GridFunction::from_fn(grid, |x| (2.0 * PI * x[0]).sin());

    let traj = solve_cauchy(&model, &u0, &SolveConfig::new(1.0).with_snapshots(vec![0.25, 0.5]))?;
    for (t, u) in traj.times.iter().zip(&traj.fields) {
        println!("t={t:.3} min={:+.5} max={:+.5}", u.min(), u.max());
    }
    println!("{} steps", traj.steps);

    let est = large_time_profile(&model, &u0, &SolveConfig::new(64.0), default_tol(&u0))?;
    println!("c = {:+.5}, stabilized by t = {}", est.c, est.t_reached);
    println!("u_inf oscillation {:.5}", est.u_inf.max() - est.u_inf.min());
    Ok(())
}
