//! Sup/inf double convolution with its semiconcavity audit, the δ₀ and κ
//! constants, and the regularized subsolution audit on a 2D matrix model.

use std::f64::consts::PI;

use torus_hjb::approx::{appendix_b_subsolution_audit, double_convolution};
use torus_hjb::model::{Diffusion, TrigPoly};
use torus_hjb::pde::{solve_cauchy, SolveConfig};
use torus_hjb::{GridFunction, ModelSpec, Result, TorusGrid};

fn main() -> Result<()> {
    let grid = TorusGrid::new(2, 24)?;
    let w = GridFunction::from_fn(grid, |x| (PI * x[0]).sin().abs() + 0.5 * (2.0 * PI * x[1]).cos());
    for (eps, delta) in [(0.1, 0.05), (0.1, 0.02), (0.05, 0.01)] {
        let (_, audit) = double_convolution(&w, eps, delta)?;
        println!(
            "eps={eps} delta={delta}: second differences in [{:.3}, {:.3}], bounds [-1/eps, 1/delta] = [{:.1}, {:.1}]",
            audit.min_second_difference,
            audit.max_second_difference,
            -1.0 / eps,
            1.0 / delta
        );
    }

    let model = ModelSpec::power(2, 2.0)?
        .with_potential(TrigPoly::cosine(2, 0.5, 1))
        .with_diffusion(Diffusion::DiagSin2 { a1: 0.2, a2: 0.1 });
    let grid = TorusGrid::new(2, 32)?;
    let u0 = GridFunction::from_fn(grid, |x| 0.3 * (1.0 - (PI * x[0]).cos().abs()) + 0.2 * (2.0 * PI * x[1]).sin());
    let cfg = SolveConfig::new(0.5).with_snapshots((1..64).map(|k| k as f64 / 128.0).collect());
    let traj = solve_cauchy(&model, &u0, &cfg)?;
    for factor in [0.9, 2.0] {
        let rep = appendix_b_subsolution_audit(&model, &traj, 0.1, 0.02, 0.0625, factor, 3)?;
        println!(
            "delta = {factor} delta0 = {:.2e}: residual {:.4} vs kappa {:.1} (omega {:.4}) -> {}",
            rep.delta, rep.residual, rep.kappa, rep.omega, rep.passed
        );
    }
    Ok(())
}
