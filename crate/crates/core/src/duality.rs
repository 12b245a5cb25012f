//! Dual side of the occupation-measure problems: finite families of
//! stationary and evolving solutions, the function `m`, the family duals of
//! `h_t` and `d`, monotonicity along Mather measures and the uniform
//! convergence of the large-time limit.
//!
//! The supremum over all solutions is replaced by a maximum over a finite
//! family, so every family value is a lower bound. Injecting LP dual fields
//! into a family closes the gap up to solver tolerance.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{DiscreteMeasure, GridFunction, TorusGrid};
use crate::measures::HtSolution;
use crate::model::ModelSpec;
use crate::pde::{
    large_time_profile, random_initial_data, solve_cauchy, SolveConfig, Stepper, Trajectory,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FamilyKind {
    Stationary,
    Evolving,
}

/// One member: a single level for stationary solutions, a time series for
/// evolving ones.
#[derive(Clone, Debug)]
pub struct Member {
    pub provenance: String,
    pub times: Vec<f64>,
    pub levels: Vec<GridFunction>,
}

impl Member {
    pub fn stationary(w: GridFunction, provenance: impl Into<String>) -> Self {
        Self {
            provenance: provenance.into(),
            times: vec![0.0],
            levels: vec![w],
        }
    }

    pub fn from_trajectory(traj: &Trajectory, provenance: impl Into<String>) -> Self {
        Self {
            provenance: provenance.into(),
            times: traj.times.clone(),
            levels: traj.fields.clone(),
        }
    }

    /// Level stored at time `t`, if any.
    pub fn at(&self, t: f64) -> Option<&GridFunction> {
        self.times
            .iter()
            .position(|s| (s - t).abs() <= 1e-9 * (1.0 + t.abs()))
            .map(|k| &self.levels[k])
    }
}

#[derive(Clone, Debug)]
pub struct SolutionFamily {
    pub kind: FamilyKind,
    pub members: Vec<Member>,
}

impl SolutionFamily {
    pub fn new(kind: FamilyKind) -> Self {
        Self {
            kind,
            members: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Adds the dual field of an `h_t` solve as an evolving member.
    pub fn push_ht_dual(&mut self, sol: &HtSolution, dt: f64) -> Result<()> {
        if self.kind != FamilyKind::Evolving {
            return Err(Error::InvalidArgument("LP dual fields are evolving members".into()));
        }
        if sol.dual.is_empty() {
            return Err(Error::InvalidArgument("infeasible h_t solve has no dual field".into()));
        }
        self.members.push(Member {
            provenance: format!("h_t dual, t = {}", sol.t),
            times: (0..sol.dual.len()).map(|k| k as f64 * dt).collect(),
            levels: sol.dual.clone(),
        });
        Ok(())
    }

    fn require(&self, kind: FamilyKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::InvalidArgument(format!(
                "expected a {kind:?} family, got {:?}",
                self.kind
            )));
        }
        if self.members.is_empty() {
            return Err(Error::InvalidArgument("empty solution family".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct GeneratedFamilies {
    pub stationary: SolutionFamily,
    pub evolving: SolutionFamily,
    /// Seeds whose profile did not converge, with the reason.
    pub dropped: Vec<(usize, String)>,
}

/// Stationary members are the large-time profiles of the seeds, kept once
/// per class of functions equal up to a constant within `1e-3`; evolving
/// members are the trajectories of `cfg` from each seed.
pub fn generate_solution_family(
    model: &ModelSpec,
    seeds: &[GridFunction],
    cfg: &SolveConfig,
    tol: f64,
) -> Result<GeneratedFamilies> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("no seeds for the solution family".into()));
    }
    let runs: Vec<_> = seeds
        .par_iter()
        .map(|u0| (large_time_profile(model, u0, cfg, tol), solve_cauchy(model, u0, cfg)))
        .collect();
    let mut stationary = SolutionFamily::new(FamilyKind::Stationary);
    let mut evolving = SolutionFamily::new(FamilyKind::Evolving);
    let mut dropped = Vec::new();
    let mut centered: Vec<GridFunction> = Vec::new();
    for (j, (profile, traj)) in runs.into_iter().enumerate() {
        evolving.members.push(Member::from_trajectory(&traj?, format!("seed {j}")));
        match profile {
            Ok(p) => {
                let w = p.u_inf.shifted(-p.u_inf.mean());
                if centered.iter().all(|v| v.sup_distance(&w) >= 1e-3) {
                    centered.push(w);
                    stationary
                        .members
                        .push(Member::stationary(p.u_inf, format!("profile of seed {j}")));
                }
            }
            Err(e) => dropped.push((j, e.to_string())),
        }
    }
    Ok(GeneratedFamilies {
        stationary,
        evolving,
        dropped,
    })
}

/// `max_w [∫w dν₁ - ∫w dν₀]` over a stationary family.
pub fn m_function(family: &SolutionFamily, nu0: &DiscreteMeasure, nu1: &DiscreteMeasure) -> Result<f64> {
    family.require(FamilyKind::Stationary)?;
    nu0.grid().check_same(nu1.grid())?;
    family
        .members
        .iter()
        .map(|m| {
            let w = &m.levels[0];
            nu0.grid().check_same(w.grid())?;
            Ok(nu1.integrate(w) - nu0.integrate(w))
        })
        .try_fold(f64::NEG_INFINITY, |acc, v: Result<f64>| Ok(acc.max(v?)))
}

/// `max_w [∫w(t) dν₁ - ∫w(0) dν₀]` over the evolving members that reach `t`.
pub fn dual_value_ht(
    family: &SolutionFamily,
    nu0: &DiscreteMeasure,
    nu1: &DiscreteMeasure,
    t: f64,
) -> Result<f64> {
    family.require(FamilyKind::Evolving)?;
    let mut best = f64::NEG_INFINITY;
    let mut covered = false;
    for m in &family.members {
        let (Some(w0), Some(wt)) = (m.at(0.0), m.at(t)) else {
            continue;
        };
        covered = true;
        best = best.max(nu1.integrate(wt) - nu0.integrate(w0));
    }
    if !covered {
        return Err(Error::InvalidArgument(format!("no family member stores a level at t = {t}")));
    }
    Ok(best)
}

/// Family dual of the potential `d` between two Mather projections; the
/// same maximization as [`m_function`].
pub fn dual_value_d(family: &SolutionFamily, nu0: &DiscreteMeasure, nu1: &DiscreteMeasure) -> Result<f64> {
    m_function(family, nu0, nu1)
}

#[derive(Clone, Debug, Serialize)]
pub struct MonotoneReport {
    pub times: Vec<f64>,
    pub pairing: Vec<f64>,
    /// Largest increase of `∫u(t) dν₀` between consecutive stored levels.
    pub worst_increase: f64,
}

/// Tracks `t ↦ ∫u(t) dν₀` on every step of a solve from `phi`.
pub fn monotone_value_check(
    model: &ModelSpec,
    phi: &GridFunction,
    nu0: &DiscreteMeasure,
    cfg: &SolveConfig,
) -> Result<MonotoneReport> {
    phi.grid().check_same(nu0.grid())?;
    let mut stepper = Stepper::new(model, phi, cfg)?;
    let mut times = vec![0.0];
    let mut pairing = vec![nu0.integrate(phi)];
    stepper.advance_to(cfg.t_final, |t, u| {
        times.push(t);
        pairing.push(nu0.integrate_slice(u));
    })?;
    let worst_increase = pairing
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max);
    Ok(MonotoneReport {
        times,
        pairing,
        worst_increase,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SampleConvergence {
    pub scale: f64,
    pub c: f64,
    /// First checkpoint after which `‖u(t) + ct - u∞‖∞ < eps` holds for good.
    pub t_enter: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct UniformConvergenceReport {
    pub t_common: f64,
    pub samples: Vec<SampleConvergence>,
}

/// Draws `k` random initial data with minimum 0, sample `j` scaled by
/// `1000^{j/(k-1)}`, and returns the smallest checkpoint `T` with
/// `‖u(t) + ct - u∞‖∞ < eps` for every sample and every checkpoint in
/// `[T, T_final]`. `u∞` and `c` come from the last check interval.
pub fn uniform_convergence_test(
    model: &ModelSpec,
    grid: &TorusGrid,
    k: usize,
    eps: f64,
    cfg: &SolveConfig,
    seed: u64,
) -> Result<UniformConvergenceReport> {
    if k == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    if !(model.m > 2.0 || model.diffusion.is_zero()) {
        return Err(Error::InvalidArgument(
            "uniform convergence needs m > 2 or vanishing diffusion".into(),
        ));
    }
    if !(eps > 0.0) || !(cfg.check_interval > 0.0) {
        return Err(Error::InvalidArgument("eps and check_interval must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<(f64, GridFunction)> = (0..k)
        .map(|j| {
            let s = if k == 1 { 1.0 } else { 1000f64.powf(j as f64 / (k - 1) as f64) };
            (s, random_initial_data(grid, &mut rng, s))
        })
        .collect();
    let samples: Vec<SampleConvergence> = data
        .par_iter()
        .enumerate()
        .map(|(j, (scale, u0))| {
            let mut stepper = Stepper::new(model, u0, cfg)?;
            let mut checkpoints: Vec<(f64, Vec<f64>)> = vec![(0.0, u0.values().to_vec())];
            let mut target = cfg.check_interval;
            loop {
                let target_now = target.min(cfg.t_final);
                stepper.advance_to(target_now, |_, _| {})?;
                checkpoints.push((stepper.time(), stepper.values().to_vec()));
                if target_now >= cfg.t_final {
                    break;
                }
                target += cfg.check_interval;
            }
            let n = checkpoints.len();
            let (t_a, a) = &checkpoints[n - 2];
            let (t_b, b) = &checkpoints[n - 1];
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            let c = -(mean(b) - mean(a)) / (t_b - t_a);
            let u_inf: Vec<f64> = b.iter().map(|v| v + c * t_b).collect();
            let dist: Vec<f64> = checkpoints
                .iter()
                .map(|(t, u)| {
                    u.iter()
                        .zip(&u_inf)
                        .fold(0.0, |m: f64, (x, y)| m.max((x + c * t - y).abs()))
                })
                .collect();
            let last_change = dist[n - 2];
            if last_change >= eps {
                return Err(Error::Audit(format!(
                    "sample {j} (scale {scale}) still moves by {last_change:e} over the last check interval before t = {}",
                    cfg.t_final
                )));
            }
            let mut enter = n - 1;
            while enter > 0 && dist[enter - 1] < eps {
                enter -= 1;
            }
            Ok(SampleConvergence {
                scale: *scale,
                c,
                t_enter: checkpoints[enter].0,
            })
        })
        .collect::<Result<_>>()?;
    let t_common = samples.iter().map(|s| s.t_enter).fold(0.0, f64::max);
    Ok(UniformConvergenceReport { t_common, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::VelocityLattice;
    use crate::measures::{
        mane_potential, normalize_model, project_measure, solve_ht_lp, solve_mather_lp, Discretization,
    };
    use crate::model::{Diffusion, TrigPoly};
    use crate::lp::LpOptions;

    fn trivial() -> ModelSpec {
        ModelSpec::power(1, 2.0)
            .unwrap()
            .with_diffusion(Diffusion::Constant { a0: 0.1 })
    }

    fn sine(grid: TorusGrid, k: f64) -> GridFunction {
        GridFunction::from_fn(grid, |x| (2.0 * std::f64::consts::PI * k * x[0]).sin())
    }

    #[test]
    fn trivial_family_collapses() {
        let grid = TorusGrid::new(1, 16).unwrap();
        let seeds = vec![GridFunction::constant(grid, 0.0), sine(grid, 1.0), sine(grid, 2.0)];
        let fam = generate_solution_family(&trivial(), &seeds, &SolveConfig::new(40.0), 1e-7).unwrap();
        assert_eq!(fam.stationary.len(), 1);
        assert_eq!(fam.evolving.len(), 3);
        assert!(fam.dropped.is_empty());
        assert!(generate_solution_family(&trivial(), &[], &SolveConfig::new(1.0), 1e-7).is_err());
    }

    #[test]
    fn m_function_identities() {
        let grid = TorusGrid::new(1, 8).unwrap();
        let mut fam = SolutionFamily::new(FamilyKind::Stationary);
        fam.members.push(Member::stationary(sine(grid, 1.0), "a"));
        fam.members.push(Member::stationary(sine(grid, 2.0).scaled(0.3), "b"));
        let a = DiscreteMeasure::point_mass(grid, 1);
        let b = DiscreteMeasure::point_mass(grid, 5);
        assert_eq!(m_function(&fam, &a, &a).unwrap(), 0.0);
        assert!(m_function(&fam, &a, &b).unwrap() >= -m_function(&fam, &b, &a).unwrap());
        let evolving = SolutionFamily::new(FamilyKind::Evolving);
        assert!(m_function(&evolving, &a, &b).is_err());
    }

    #[test]
    fn injected_duals_reach_ht_and_family_stays_below() {
        let model = ModelSpec::eikonal_1d().with_diffusion(Diffusion::Constant { a0: 0.02 });
        let grid = TorusGrid::new(1, 8).unwrap();
        let disc = Discretization::new(&model, grid, VelocityLattice::new(1, 2.0, 5).unwrap(), 0.0).unwrap();
        let nu0 = DiscreteMeasure::uniform(grid);
        let w: Vec<f64> = (0..8).map(|i| 1.0 + 0.5 * (i as f64).cos()).collect();
        let total: f64 = w.iter().sum();
        let nu1 = DiscreteMeasure::new(grid, w.iter().map(|v| v / total).collect()).unwrap();
        let t = 0.5;
        let h = solve_ht_lp(&disc, &nu0, &nu1, t, &LpOptions::default()).unwrap();
        let cfg = SolveConfig::new(t).with_scheme(disc.control_scheme()).retaining_steps();
        let seeds = vec![GridFunction::constant(grid, 0.0), sine(grid, 1.0), sine(grid, 2.0)];
        let mut fam = generate_solution_family(&model, &seeds, &cfg, 1e-6).unwrap().evolving;
        let family_value = dual_value_ht(&fam, &nu0, &nu1, t).unwrap();
        assert!(family_value <= h.value + 1e-8, "{family_value} {}", h.value);
        fam.push_ht_dual(&h, disc.dt()).unwrap();
        let with_dual = dual_value_ht(&fam, &nu0, &nu1, t).unwrap();
        assert!((with_dual - h.value).abs() < 1e-6);
        assert!(dual_value_ht(&fam, &nu0, &nu1, 2.0).is_err());
    }

    #[test]
    fn mather_corrector_bounds_d() {
        let model = ModelSpec::eikonal_1d().with_diffusion(Diffusion::Constant { a0: 0.02 });
        let grid = TorusGrid::new(1, 8).unwrap();
        let disc = Discretization::new(&model, grid, VelocityLattice::new(1, 2.0, 5).unwrap(), 0.0).unwrap();
        let opts = LpOptions::default();
        let (nd, _) = normalize_model(&disc, &opts).unwrap();
        let mather = solve_mather_lp(&nd, &opts).unwrap();
        let nu = project_measure(&mather.measure).unwrap();
        let mut fam = SolutionFamily::new(FamilyKind::Stationary);
        fam.members.push(Member::stationary(mather.corrector.clone(), "Mather corrector"));
        let uniform = DiscreteMeasure::uniform(grid);
        let d = mane_potential(&nd, &uniform, &nu, &[0.5, 1.0], &opts).unwrap();
        assert!(dual_value_d(&fam, &uniform, &nu).unwrap() <= d.d + 1e-7);
        assert!(dual_value_d(&fam, &nu, &nu).unwrap().abs() < 1e-15);
    }

    #[test]
    fn constant_data_is_monotone() {
        let grid = TorusGrid::new(1, 16).unwrap();
        let nu = DiscreteMeasure::point_mass(grid, 0);
        let r = monotone_value_check(&trivial(), &GridFunction::constant(grid, 2.0), &nu, &SolveConfig::new(1.0))
            .unwrap();
        assert_eq!(r.worst_increase, 0.0);
    }

    #[test]
    fn uniform_convergence_trivial_and_guard() {
        let grid = TorusGrid::new(1, 16).unwrap();
        let model = ModelSpec::power(1, 3.0).unwrap();
        let cfg = SolveConfig::new(30.0).with_check_interval(0.5);
        let rep = uniform_convergence_test(&model, &grid, 4, 1e-2, &cfg, 7).unwrap();
        assert_eq!(rep.samples.len(), 4);
        assert!(rep.t_common < 30.0);
        assert!(uniform_convergence_test(&model, &grid, 0, 1e-2, &cfg, 7).is_err());
        let quad = ModelSpec::power(1, 2.0)
            .unwrap()
            .with_potential(TrigPoly::zero())
            .with_diffusion(Diffusion::Constant { a0: 0.1 });
        assert!(uniform_convergence_test(&quad, &grid, 1, 1e-2, &cfg, 7).is_err());
    }
}
