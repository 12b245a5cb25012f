//! `m <= d <= h` over a few measure pairs, with the dual of `h_t`
//! evaluated on PDE solutions and on the LP multipliers.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use torus_hjb::duality::{dual_value_ht, generate_solution_family, m_function};
use torus_hjb::lp::LpOptions;
use torus_hjb::measures::{ht_table, normalize_model, solve_ht_lp, BarrierEstimate, Discretization, ManeResult};
use torus_hjb::pde::{random_initial_data, SolveConfig};
use torus_hjb::{DiscreteMeasure, GridFunction, ModelSpec, Result, TorusGrid, VelocityLattice};

fn main() -> Result<()> {
    let grid = TorusGrid::new(1, 16)?;
    let opts = LpOptions::default();
    let raw = Discretization::new(&ModelSpec::eikonal_1d(), grid, VelocityLattice::new(1, 2.0, 9)?, 0.0625)?;
    let (disc, _) = normalize_model(&raw, &opts)?;
    let horizons = [1.0, 2.0];

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let seeds: Vec<GridFunction> = (0..3).map(|_| random_initial_data(&grid, &mut rng, 1.0)).collect();
    let mut cfg = SolveConfig::new(32.0).with_scheme(disc.control_scheme()).with_snapshots(horizons.to_vec());
    cfg.eps_viscosity = disc.eta;
    let families = generate_solution_family(&disc.model, &seeds, &cfg, 1e-6)?;

    let bump = |phase: f64| {
        let w: Vec<f64> = (0..grid.len()).map(|i| 1.0 + 0.5 * (2.0 * PI * grid.point(i)[0] + phase).cos()).collect();
        let s: f64 = w.iter().sum();
        DiscreteMeasure::new(grid, w.iter().map(|v| v / s).collect())
    };
    let pairs = [
        ("uniform", DiscreteMeasure::uniform(grid), "point", DiscreteMeasure::point_mass(grid, 4)),
        ("bump", bump(0.0)?, "uniform", DiscreteMeasure::uniform(grid)),
        ("bump", bump(0.0)?, "shifted bump", bump(PI)?),
    ];
    for (a, nu0, b, nu1) in &pairs {
        let m = m_function(&families.stationary, nu0, nu1)?;
        let table = ht_table(&disc, nu0, nu1, &horizons, &opts)?;
        let d = ManeResult::from_table(table.clone()).d;
        let h = BarrierEstimate::from_table(table, 1).h;
        let ht = solve_ht_lp(&disc, nu0, nu1, 2.0, &opts)?;
        let mut evolving = families.evolving.clone();
        evolving.push_ht_dual(&ht, disc.dt())?;
        let dual = dual_value_ht(&evolving, nu0, nu1, 2.0)?;
        println!("{a} -> {b}: m {m:+.5} <= d {d:+.5} <= h {h:+.5}; h_2 {:+.6} vs dual {dual:+.6}", ht.value);
    }
    Ok(())
}
