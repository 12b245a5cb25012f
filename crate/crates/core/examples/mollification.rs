//! Space-time mollification of a degenerate solution with a kink and the
//! rate at which its subsolution residual decays in α.

use std::f64::consts::PI;

use torus_hjb::approx::subsolution_residual_scan;
use torus_hjb::model::Diffusion;
use torus_hjb::pde::{solve_cauchy, SolveConfig};
use torus_hjb::{GridFunction, ModelSpec, Result, TorusGrid};

fn main() -> Result<()> {
    let model = ModelSpec::eikonal_1d().with_diffusion(Diffusion::Sin2 { a0: 2.0, phase: 0.5 });
    let grid = TorusGrid::new(1, 128)?;
    let u0 = GridFunction::from_fn(grid, |x| 2.0 / PI * (1.0 - (PI * x[0]).cos().abs()));
    let levels = 1024;
    let cfg = SolveConfig::new(1.0).with_snapshots((1..levels).map(|k| k as f64 / levels as f64).collect());
    let traj = solve_cauchy(&model, &u0, &cfg)?;
    let alphas: Vec<f64> = (3..=6).map(|k| 0.5f64.powi(k)).collect();
    let scan = subsolution_residual_scan(&model, &traj, &alphas, 5)?;
    for r in &scan.rows {
        println!("alpha={:.5} residual={:.5} min={:+.5}", r.alpha, r.residual, r.min_residual);
    }
    println!("scheme floor {:.5}, fitted exponent {:?}", scan.floor, scan.exponent);
    Ok(())
}
