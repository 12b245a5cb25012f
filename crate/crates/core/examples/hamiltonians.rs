//! Closed-form Hamiltonian/Lagrangian pairs, the numeric Legendre oracle
//! and the assumption scan.

use torus_hjb::model::{check_assumptions, legendre_numeric, Diffusion, TrigPoly};
use torus_hjb::{ModelSpec, Result, TorusGrid};

fn main() -> Result<()> {
    let x = [0.3, 0.0];
    for m in [2.0, 3.0, 4.0] {
        let model = ModelSpec::power(1, m)?.with_potential(TrigPoly::cosine(1, 0.5, 1));
        for q in [0.0, 0.5, 1.0] {
            let exact = model.lagrangian(&x, &[q, 0.0]);
            let numeric = legendre_numeric(&model, &x, &[q, 0.0], 4.0, 4001)?;
            println!("m={m} q={q}: L={exact:.6} lattice={:.6} |diff|={:.1e}", numeric.value, (exact - numeric.value).abs());
        }
    }

    let grid = TorusGrid::new(1, 64)?;
    let eikonal = ModelSpec::eikonal_1d().with_diffusion(Diffusion::Sin2 { a0: 1.0, phase: 0.5 });
    let rep = check_assumptions(&eikonal, &grid, 9)?;
    println!("eikonal valid={} degenerate nodes={}", rep.valid, rep.degenerate_nodes.len());
    let mut tight = eikonal.clone();
    tight.c0 = 1.1;
    let rep = check_assumptions(&tight, &grid, 9)?;
    println!("C0=1.1 valid={} violations:", rep.valid);
    for v in &rep.violations {
        println!("  {v}");
    }
    Ok(())
}
