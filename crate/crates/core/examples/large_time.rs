//! Superquadratic growth: a bound at `t = 1/2` independent of the data
//! scale, a common convergence time and monotone pairings along Mather
//! measures.

use std::f64::consts::PI;

use torus_hjb::duality::{monotone_value_check, uniform_convergence_test};
use torus_hjb::lp::LpOptions;
use torus_hjb::measures::{normalize_model, project_measure, solve_mather_lp, Discretization};
use torus_hjb::model::TrigPoly;
use torus_hjb::pde::{compactness_smoke, Scheme, SolveConfig};
use torus_hjb::{DiscreteMeasure, GridFunction, ModelSpec, Result, TorusGrid, VelocityLattice};

fn main() -> Result<()> {
    let model = ModelSpec::power(1, 3.0)?.with_potential(TrigPoly::cosine(1, 0.5, 1));
    let grid = TorusGrid::new(1, 32)?;
    let rep = compactness_smoke(&model, &grid, 6, &[1.0, 10.0, 100.0], &SolveConfig::new(0.5).with_scheme(Scheme::Upwind), 1)?;
    for (s, v) in rep.distinct_scales.iter().zip(&rep.per_scale_max) {
        println!("scale {s:>5}: sup |u(1/2)| = {v:.4}");
    }
    let conv = uniform_convergence_test(&model, &grid, 4, 1e-3, &SolveConfig::new(32.0).with_scheme(Scheme::Upwind), 1)?;
    for s in &conv.samples {
        println!("scale {:>8.2}: c = {:+.5}, within tolerance from t = {}", s.scale, s.c, s.t_enter);
    }
    println!("common time {}", conv.t_common);

    let disc = Discretization::new(&ModelSpec::eikonal_1d(), grid, VelocityLattice::new(1, 2.0, 9)?, grid.spacing())?;
    let (normalized, _) = normalize_model(&disc, &LpOptions::default())?;
    let mather = project_measure(&solve_mather_lp(&normalized, &LpOptions::default())?.measure)?;
    let phi = GridFunction::from_fn(grid, |x| (2.0 * PI * x[0]).sin());
    let cfg = SolveConfig::new(2.0).with_eps(disc.eta);
    for (name, nu) in [("mather", mather), ("uniform", DiscreteMeasure::uniform(grid))] {
        let r = monotone_value_check(&normalized.model, &phi, &nu, &cfg)?;
        println!("{name}: worst increase of t -> ∫u dν is {:.2e}", r.worst_increase);
    }
    Ok(())
}
