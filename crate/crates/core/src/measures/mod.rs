//! Occupation measures on grid × velocity (× time), the holonomy
//! constraints they satisfy and the linear programs built on them: the
//! Mather problem, the fixed-horizon cost `h_t`, the potential `d` and the
//! barrier `h`.

mod markov;
mod system;

pub use markov::{
    solve_free_source, solve_free_source_lp, value_iteration, FreeSourceSolution, ValueIteration,
};
pub use system::{Column, HolonomyConstraintSystem, Source, SystemMode};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{DiscreteMeasure, GridFunction, TorusGrid, Vector, VelocityLattice};
use crate::lp::{LpOptions, LpSolution, LpStatus};
use crate::model::ModelSpec;
use crate::pde::{control_time_step, Scheme};
use crate::stencil::{drift_row, transition_row, DriftStencil, SecondOrderOperator};

/// Grid, velocity lattice, added viscosity `η` and the time step shared by
/// every space-time problem.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub model: ModelSpec,
    pub grid: TorusGrid,
    pub lattice: VelocityLattice,
    pub eta: f64,
    op: SecondOrderOperator,
    dt: f64,
    lag: Vec<f64>,
}

impl Discretization {
    pub fn new(model: &ModelSpec, grid: TorusGrid, lattice: VelocityLattice, eta: f64) -> Result<Self> {
        Self::with_cfl(model, grid, lattice, eta, 0.9)
    }

    pub fn with_cfl(
        model: &ModelSpec,
        grid: TorusGrid,
        lattice: VelocityLattice,
        eta: f64,
        cfl: f64,
    ) -> Result<Self> {
        model.validate()?;
        if grid.dim() != model.dim || lattice.dim() != model.dim {
            return Err(Error::GridMismatch("model, grid and lattice dimensions differ".into()));
        }
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(Error::Cfl(format!("cfl_safety must lie in (0,1], got {cfl}")));
        }
        let op = SecondOrderOperator::new(model, &grid, eta)?;
        let dt = control_time_step(&op, &lattice, cfl);
        let lag = (0..grid.len())
            .flat_map(|i| {
                let x = grid.point(i);
                lattice
                    .velocities()
                    .iter()
                    .map(|q| model.lagrangian(&x, q))
                    .collect::<Vec<_>>()
            })
            .collect();
        Ok(Self {
            model: model.clone(),
            grid,
            lattice,
            eta,
            op,
            dt,
            lag,
        })
    }

    pub fn operator(&self) -> &SecondOrderOperator {
        &self.op
    }

    /// Time step; always of the form `1/K`.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn lagrangian(&self, node: usize, q_index: usize) -> f64 {
        self.lag[node * self.lattice.len() + q_index]
    }

    /// Number of steps of a horizon, which must be a multiple of `dt`.
    pub fn steps_for(&self, t: f64) -> Result<usize> {
        let k = (t / self.dt).round();
        if !(t > 0.0) || (k * self.dt - t).abs() > 1e-9 * t.max(1.0) || k < 1.0 {
            return Err(Error::HorizonNotAligned { t, dt: self.dt });
        }
        Ok(k as usize)
    }

    /// Matching scheme for `pde::solve_cauchy` (use with `eps_viscosity = eta`).
    pub fn control_scheme(&self) -> Scheme {
        Scheme::Control {
            lattice: self.lattice.clone(),
            dt: Some(self.dt),
        }
    }

    /// Same grids with the model replaced.
    pub fn with_model(&self, model: &ModelSpec) -> Result<Self> {
        let mut d = Self::new(model, self.grid, self.lattice.clone(), self.eta)?;
        d.dt = self.dt;
        Ok(d)
    }
}

/// Support point of an occupation measure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Atom {
    pub node: usize,
    pub velocity: Vector,
    /// Time slice (0 for stationary measures).
    pub step: usize,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MeasureMode {
    Stationary,
    /// Slice `k` covers `[times[k], times[k+1]]`.
    Spacetime { times: Vec<f64> },
}

#[derive(Clone, Debug)]
pub struct OccupationMeasure {
    pub grid: TorusGrid,
    pub mode: MeasureMode,
    pub atoms: Vec<Atom>,
    pub initial: Option<DiscreteMeasure>,
    pub terminal: Option<DiscreteMeasure>,
}

impl OccupationMeasure {
    pub fn mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).sum()
    }

    pub fn duration(&self) -> f64 {
        match &self.mode {
            MeasureMode::Stationary => 0.0,
            MeasureMode::Spacetime { times } => times[times.len() - 1] - times[0],
        }
    }

    pub fn min_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight).fold(f64::INFINITY, f64::min)
    }

    /// `∫ L dγ`.
    pub fn action(&self, model: &ModelSpec) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.weight * model.lagrangian(&self.grid.point(a.node), &a.velocity))
            .sum()
    }

    /// Slice masses (`Σ weight / dt_k` per slice), which are 1 for feasible measures.
    pub fn slice_masses(&self) -> Vec<f64> {
        match &self.mode {
            MeasureMode::Stationary => vec![self.mass()],
            MeasureMode::Spacetime { times } => {
                let mut m = vec![0.0; times.len() - 1];
                for a in &self.atoms {
                    m[a.step] += a.weight / (times[a.step + 1] - times[a.step]);
                }
                m
            }
        }
    }
}

/// Per-row residual of the holonomy identity against the nodal test basis.
///
/// Stationary: `Σ μ (-Sφ + q·Dφ)` for every nodal `φ`. Space-time: rows
/// ordered by `level · n_nodes + node`, equal to
/// `Σ γ (φ_t - Sφ + q·Dφ) - Σ ν₁ φ(t₁) + Σ ν₀ φ(t₀)`.
pub fn holonomy_residual(
    op: &SecondOrderOperator,
    occ: &OccupationMeasure,
    nu0: Option<&DiscreteMeasure>,
    nu1: Option<&DiscreteMeasure>,
    kind: DriftStencil,
) -> Result<Vec<f64>> {
    let grid = *op.grid();
    grid.check_same(&occ.grid)?;
    let n = grid.len();
    let mut row = Vec::with_capacity(9);
    match &occ.mode {
        MeasureMode::Stationary => {
            let mut res = vec![0.0; n];
            for a in &occ.atoms {
                for &(j, c) in op.row(a.node) {
                    res[j] -= a.weight * c;
                }
                row.clear();
                drift_row(&grid, a.node, &a.velocity, kind, &mut row);
                for &(j, c) in &row {
                    res[j] += a.weight * c;
                }
            }
            Ok(res)
        }
        MeasureMode::Spacetime { times } => {
            let steps = times.len() - 1;
            let mut res = vec![0.0; (steps + 1) * n];
            for a in &occ.atoms {
                if a.step >= steps {
                    return Err(Error::InvalidArgument(format!("atom step {} out of range", a.step)));
                }
                let dt = times[a.step + 1] - times[a.step];
                let w = a.weight / dt;
                res[(a.step + 1) * n + a.node] += w;
                transition_row(op, a.node, &a.velocity, dt, kind, &mut row);
                for &(j, c) in &row {
                    res[a.step * n + j] -= w * c;
                }
            }
            let nu1 = nu1.or(occ.terminal.as_ref());
            let nu0 = nu0.or(occ.initial.as_ref());
            let (Some(nu0), Some(nu1)) = (nu0, nu1) else {
                return Err(Error::InvalidArgument(
                    "space-time residual needs both marginals".into(),
                ));
            };
            grid.check_same(nu0.grid())?;
            grid.check_same(nu1.grid())?;
            for j in 0..n {
                res[steps * n + j] -= nu1.weights()[j];
                res[j] += nu0.weights()[j];
            }
            Ok(res)
        }
    }
}

/// `max |residual|` over the full nodal test basis.
pub fn holonomy_defect(
    op: &SecondOrderOperator,
    occ: &OccupationMeasure,
    nu0: Option<&DiscreteMeasure>,
    nu1: Option<&DiscreteMeasure>,
    kind: DriftStencil,
) -> Result<f64> {
    Ok(holonomy_residual(op, occ, nu0, nu1, kind)?
        .iter()
        .fold(0.0, |m: f64, r| m.max(r.abs())))
}

/// Stationary constraints (mass row included).
pub fn build_stationary_constraints(disc: &Discretization) -> HolonomyConstraintSystem {
    system::build_stationary(disc)
}

/// Space-time constraints over `[0, t]`.
pub fn build_spacetime_constraints(
    disc: &Discretization,
    t: f64,
    nu1: &DiscreteMeasure,
    source: &Source,
) -> Result<HolonomyConstraintSystem> {
    let steps = disc.steps_for(t)?;
    system::build_spacetime(disc, steps, nu1, source)
}

fn check_solved(sol: &LpSolution, what: &str) -> Result<()> {
    if sol.status.is_solved() {
        Ok(())
    } else {
        Err(Error::Solver(format!("{what}: status {:?}", sol.status)))
    }
}

#[derive(Clone, Debug)]
pub struct MatherSolution {
    /// `min ∫ L dμ`.
    pub value: f64,
    pub measure: OccupationMeasure,
    /// Dual node multipliers (a discrete corrector, 0 at node 0).
    pub corrector: GridFunction,
    pub lp: LpSolution,
}

/// Discrete Mather problem `min ∫ L dμ` over stationary holonomic
/// probability measures.
pub fn solve_mather_lp(disc: &Discretization, opts: &LpOptions) -> Result<MatherSolution> {
    let sys = build_stationary_constraints(disc);
    let lp = sys.lp.solve(opts)?;
    check_solved(&lp, "Mather problem")?;
    let n = disc.grid.len();
    let mut atoms = Vec::new();
    for (c, w) in sys.columns.iter().zip(&lp.x) {
        if let Column::Atom { node, q_index, .. } = c {
            atoms.push(Atom {
                node: *node,
                velocity: disc.lattice.velocities()[*q_index],
                step: 0,
                weight: w.max(0.0),
            });
        }
    }
    let full = sys.full_dual(&lp.y);
    let corrector = GridFunction::from_vec_unchecked(disc.grid, full[..n].to_vec());
    Ok(MatherSolution {
        value: lp.primal_objective,
        measure: OccupationMeasure {
            grid: disc.grid,
            mode: MeasureMode::Stationary,
            atoms,
            initial: None,
            terminal: None,
        },
        corrector,
        lp,
    })
}

/// Spatial marginal of a stationary occupation measure.
pub fn project_measure(mu: &OccupationMeasure) -> Result<DiscreteMeasure> {
    if mu.mode != MeasureMode::Stationary {
        return Err(Error::InvalidArgument("projection expects a stationary measure".into()));
    }
    let mut w = vec![0.0; mu.grid.len()];
    for a in &mu.atoms {
        w[a.node] += a.weight.max(0.0);
    }
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidArgument("measure has no mass".into()));
    }
    DiscreteMeasure::new(mu.grid, w.into_iter().map(|v| v / total).collect())
}

/// Copy of the model with `c_shift` moved so that the discrete Mather value
/// vanishes; returns the new discretization and the removed value.
pub fn normalize_model(disc: &Discretization, opts: &LpOptions) -> Result<(Discretization, f64)> {
    let sol = solve_mather_lp(disc, opts)?;
    let model = disc.model.clone().with_c_shift(disc.model.c_shift + sol.value);
    Ok((disc.with_model(&model)?, sol.value))
}

#[derive(Clone, Debug)]
pub struct HtSolution {
    pub t: f64,
    /// `+∞` when the constraint set is empty.
    pub value: f64,
    pub status: LpStatus,
    pub gamma: Option<OccupationMeasure>,
    /// Dual test function per time level `0..=K`.
    pub dual: Vec<GridFunction>,
    pub lp: LpSolution,
}

impl HtSolution {
    pub fn is_feasible(&self) -> bool {
        self.value.is_finite()
    }

    /// `Σ ν₁ φ(K) - Σ ν₀ φ(0)` for the dual field.
    pub fn dual_value(&self, nu0: &DiscreteMeasure, nu1: &DiscreteMeasure) -> f64 {
        nu1.integrate(&self.dual[self.dual.len() - 1]) - nu0.integrate(&self.dual[0])
    }
}

fn gamma_from_solution(
    disc: &Discretization,
    sys: &HolonomyConstraintSystem,
    x: &[f64],
    steps: usize,
) -> (Vec<Atom>, Vec<f64>) {
    let dt = disc.dt();
    let mut atoms = Vec::new();
    let mut source = vec![0.0; disc.grid.len()];
    for (c, w) in sys.columns.iter().zip(x) {
        match c {
            Column::Atom { node, q_index, step } => {
                if *w > 0.0 {
                    atoms.push(Atom {
                        node: *node,
                        velocity: disc.lattice.velocities()[*q_index],
                        step: *step,
                        weight: w * dt,
                    });
                }
            }
            Column::Source { node } => source[*node] = w.max(0.0),
        }
    }
    debug_assert!(atoms.iter().all(|a| a.step < steps));
    (atoms, source)
}

pub(crate) fn uniform_times(steps: usize, dt: f64) -> Vec<f64> {
    (0..=steps).map(|k| k as f64 * dt).collect()
}

/// `h_t(ν₀, ν₁) = min ∫ L dγ` over `γ` holonomic from `ν₀` to `ν₁` on `[0,t]`.
pub fn solve_ht_lp(
    disc: &Discretization,
    nu0: &DiscreteMeasure,
    nu1: &DiscreteMeasure,
    t: f64,
    opts: &LpOptions,
) -> Result<HtSolution> {
    let steps = disc.steps_for(t)?;
    let sys = system::build_spacetime(disc, steps, nu1, &Source::Fixed(nu0.clone()))?;
    let lp = sys.lp.solve(opts)?;
    let n = disc.grid.len();
    match lp.status {
        LpStatus::Infeasible => Ok(HtSolution {
            t,
            value: f64::INFINITY,
            status: lp.status,
            gamma: None,
            dual: Vec::new(),
            lp,
        }),
        s if s.is_solved() => {
            let (atoms, _) = gamma_from_solution(disc, &sys, &lp.x, steps);
            let full = sys.full_dual(&lp.y);
            let dual = (0..=steps)
                .map(|k| GridFunction::from_vec_unchecked(disc.grid, full[k * n..(k + 1) * n].to_vec()))
                .collect();
            Ok(HtSolution {
                t,
                value: lp.primal_objective,
                status: lp.status,
                gamma: Some(OccupationMeasure {
                    grid: disc.grid,
                    mode: MeasureMode::Spacetime {
                        times: uniform_times(steps, disc.dt()),
                    },
                    atoms,
                    initial: Some(nu0.clone()),
                    terminal: Some(nu1.clone()),
                }),
                dual,
                lp,
            })
        }
        s => Err(Error::Solver(format!("h_t LP at t = {t}: status {s:?}"))),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct HtRow {
    pub t: f64,
    pub value: f64,
    pub status: LpStatus,
    pub duality_gap: f64,
}

/// `h_t(ν₀, ν₁)` for every horizon, solved in parallel.
pub fn ht_table(
    disc: &Discretization,
    nu0: &DiscreteMeasure,
    nu1: &DiscreteMeasure,
    horizons: &[f64],
    opts: &LpOptions,
) -> Result<Vec<HtRow>> {
    horizons
        .par_iter()
        .map(|&t| {
            solve_ht_lp(disc, nu0, nu1, t, opts).map(|s| HtRow {
                t,
                value: s.value,
                status: s.status,
                duality_gap: if s.is_feasible() { s.lp.duality_gap() } else { 0.0 },
            })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct ManeResult {
    pub d: f64,
    pub t_star: f64,
    pub table: Vec<HtRow>,
}

/// `d(ν₀,ν₁) = min_t h_t(ν₀,ν₁)` over the listed horizons (ties go to the
/// smaller `t`; `+∞` when every horizon is infeasible).
pub fn mane_potential(
    disc: &Discretization,
    nu0: &DiscreteMeasure,
    nu1: &DiscreteMeasure,
    horizons: &[f64],
    opts: &LpOptions,
) -> Result<ManeResult> {
    if horizons.is_empty() {
        return Err(Error::InvalidArgument("empty horizon list".into()));
    }
    Ok(ManeResult::from_table(ht_table(disc, nu0, nu1, horizons, opts)?))
}

impl ManeResult {
    /// Minimum over the table, ties going to the shorter horizon.
    pub fn from_table(table: Vec<HtRow>) -> Self {
        let mut d = f64::INFINITY;
        let mut t_star = f64::INFINITY;
        for r in &table {
            if r.value < d || (r.value == d && r.t < t_star) {
                d = r.value;
                t_star = r.t;
            }
        }
        ManeResult { d, t_star, table }
    }
}

/// `t ∈ {1, 2, 4, …, 64}`.
pub fn default_schedule() -> Vec<f64> {
    (0..=6).map(|k| (1u32 << k) as f64).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct BarrierEstimate {
    /// Minimum of `h_t` over the tail window.
    pub h: f64,
    pub tail_window: usize,
    pub table: Vec<HtRow>,
}

/// Finite proxy for `liminf_{t→∞} h_t`: the minimum over the last
/// `tail_window` horizons of an increasing schedule.
pub fn peierls_barrier(
    disc: &Discretization,
    nu0: &DiscreteMeasure,
    nu1: &DiscreteMeasure,
    schedule: &[f64],
    tail_window: usize,
    opts: &LpOptions,
) -> Result<BarrierEstimate> {
    if schedule.is_empty() || schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("schedule must be nonempty and increasing".into()));
    }
    Ok(BarrierEstimate::from_table(ht_table(disc, nu0, nu1, schedule, opts)?, tail_window))
}

impl BarrierEstimate {
    /// Minimum over the last `tail_window` rows of an increasing schedule.
    pub fn from_table(table: Vec<HtRow>, tail_window: usize) -> Self {
        let w = tail_window.clamp(1, table.len());
        let h = table[table.len() - w..]
            .iter()
            .map(|r| r.value)
            .fold(f64::INFINITY, f64::min);
        BarrierEstimate {
            h,
            tail_window: w,
            table,
        }
    }
}

/// `|h(ν,ν)| <= tol`.
pub fn aubry_test(
    disc: &Discretization,
    nu: &DiscreteMeasure,
    schedule: &[f64],
    tail_window: usize,
    tol: f64,
    opts: &LpOptions,
) -> Result<(bool, BarrierEstimate)> {
    let est = peierls_barrier(disc, nu, nu, schedule, tail_window, opts)?;
    Ok((est.h.abs() <= tol, est))
}

/// `γ = μ ⊗ ds` on `[0, t]` with slices of length `dt`.
pub fn embed_stationary(mu: &OccupationMeasure, t: f64, dt: f64) -> Result<OccupationMeasure> {
    let nu = project_measure(mu)?;
    let k = (t / dt).round();
    if !(t > 0.0) || (k * dt - t).abs() > 1e-9 * t.max(1.0) || k < 1.0 {
        return Err(Error::HorizonNotAligned { t, dt });
    }
    let steps = k as usize;
    let mut atoms = Vec::with_capacity(steps * mu.atoms.len());
    for s in 0..steps {
        for a in mu.atoms.iter().filter(|a| a.weight > 0.0) {
            atoms.push(Atom {
                step: s,
                weight: a.weight * dt,
                ..*a
            });
        }
    }
    Ok(OccupationMeasure {
        grid: mu.grid,
        mode: MeasureMode::Spacetime {
            times: uniform_times(steps, dt),
        },
        atoms,
        initial: Some(nu.clone()),
        terminal: Some(nu),
    })
}

/// Runs `gamma1` then `gamma2` (time-shifted).
pub fn concatenate(gamma1: &OccupationMeasure, gamma2: &OccupationMeasure) -> Result<OccupationMeasure> {
    gamma1.grid.check_same(&gamma2.grid)?;
    let (MeasureMode::Spacetime { times: t1 }, MeasureMode::Spacetime { times: t2 }) =
        (&gamma1.mode, &gamma2.mode)
    else {
        return Err(Error::InvalidArgument("concatenation needs space-time measures".into()));
    };
    let (Some(end1), Some(start2)) = (&gamma1.terminal, &gamma2.initial) else {
        return Err(Error::InvalidArgument("both measures need their marginals".into()));
    };
    let gap = end1.sup_distance(start2);
    if gap > 1e-8 {
        return Err(Error::MarginalMismatch(gap));
    }
    let offset = t1[t1.len() - 1];
    let shift = t1.len() - 1;
    let mut times = t1.clone();
    times.extend(t2[1..].iter().map(|t| t - t2[0] + offset));
    let mut atoms = gamma1.atoms.clone();
    atoms.extend(gamma2.atoms.iter().map(|a| Atom {
        step: a.step + shift,
        ..*a
    }));
    Ok(OccupationMeasure {
        grid: gamma1.grid,
        mode: MeasureMode::Spacetime { times },
        atoms,
        initial: gamma1.initial.clone(),
        terminal: gamma2.terminal.clone(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvexityRow {
    pub lambda: f64,
    pub mixed: f64,
    pub chord: f64,
    /// `mixed - chord`; nonpositive up to solver tolerance.
    pub excess: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvexityReport {
    pub h_a: f64,
    pub h_b: f64,
    pub rows: Vec<ConvexityRow>,
    pub worst_excess: f64,
}

/// Checks `h_t(λν_a + (1-λ)ν_b, ν₁) <= λ h_t(ν_a,ν₁) + (1-λ) h_t(ν_b,ν₁)`.
pub fn convexity_check_ht(
    disc: &Discretization,
    nu_a: &DiscreteMeasure,
    nu_b: &DiscreteMeasure,
    nu1: &DiscreteMeasure,
    t: f64,
    lambdas: &[f64],
    opts: &LpOptions,
) -> Result<ConvexityReport> {
    let h_a = solve_ht_lp(disc, nu_a, nu1, t, opts)?.value;
    let h_b = solve_ht_lp(disc, nu_b, nu1, t, opts)?.value;
    if !(h_a.is_finite() && h_b.is_finite()) {
        return Err(Error::InvalidArgument("convexity check needs finite endpoint values".into()));
    }
    let rows: Vec<ConvexityRow> = lambdas
        .par_iter()
        .map(|&l| {
            let mix = nu_a.mix(nu_b, l)?;
            let mixed = solve_ht_lp(disc, &mix, nu1, t, opts)?.value;
            let chord = l * h_a + (1.0 - l) * h_b;
            Ok(ConvexityRow {
                lambda: l,
                mixed,
                chord,
                excess: mixed - chord,
            })
        })
        .collect::<Result<_>>()?;
    let worst_excess = rows.iter().map(|r| r.excess).fold(f64::NEG_INFINITY, f64::max);
    Ok(ConvexityReport {
        h_a,
        h_b,
        rows,
        worst_excess,
    })
}

/// Default lattice bound `1.5 max_{|p| <= P} |D_p H|`.
pub fn default_q_max(model: &ModelSpec, grid: &TorusGrid, lipschitz: f64) -> f64 {
    (1.5 * model.max_dp_hamiltonian(grid, lipschitz)).max(1e-3)
}
