//! Explicit monotone schemes for `u_t - (a+ε)Δu + H(x,Du) = 0` on the torus
//! (matrix diffusion `tr(A D²u)` in two dimensions), the large-time profile
//! and the superquadratic compactness checks.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, TorusGrid, Vector, VelocityLattice, MAX_DIM};
use crate::model::ModelSpec;
use crate::stencil::{transition_apply, transition_dt_limit, SecondOrderOperator};

/// Lax–Friedrichs dissipation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Dissipation {
    /// Per node and axis, bounded by `|∂H/∂p_d|` over the box spanned by the
    /// one-sided differences.
    Local,
    /// One global coefficient; the scheme is then monotone in the strict sense.
    Fixed(f64),
}

/// Numerical scheme for the Cauchy problem.
#[derive(Clone, Debug, PartialEq)]
pub enum Scheme {
    LaxFriedrichs(Dissipation),
    /// Rouy–Tourin upwinding of `|p|^m/m` with the drift term upwinded by the
    /// sign of `b`. Monotone like Lax–Friedrichs, but the dissipation vanishes
    /// where the one-sided slopes agree, which matters for steep data.
    Upwind,
    /// `u^{k+1}_i = min_q [dt L(x_i,q) + (M_q u^k)_i]` with the upwind
    /// transitions used by the occupation-measure constraints.
    Control {
        lattice: VelocityLattice,
        dt: Option<f64>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveConfig {
    pub t_final: f64,
    pub cfl_safety: f64,
    pub eps_viscosity: f64,
    pub scheme: Scheme,
    pub snapshot_times: Vec<f64>,
    /// Upper bound on the adaptive step; defaults to the grid spacing.
    pub max_dt: Option<f64>,
    /// Forces a constant step for the Lax–Friedrichs scheme; CFL is checked.
    pub fixed_dt: Option<f64>,
    /// Keep every time level (needed by the adjoint equation).
    pub retain_all_steps: bool,
    /// Spacing of the stabilization checks in `large_time_profile`.
    pub check_interval: f64,
}

impl SolveConfig {
    pub fn new(t_final: f64) -> Self {
        Self {
            t_final,
            cfl_safety: 0.9,
            eps_viscosity: 0.0,
            scheme: Scheme::LaxFriedrichs(Dissipation::Local),
            snapshot_times: Vec::new(),
            max_dt: None,
            fixed_dt: None,
            retain_all_steps: false,
            check_interval: 1.0,
        }
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps_viscosity = eps;
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_snapshots(mut self, times: Vec<f64>) -> Self {
        self.snapshot_times = times;
        self
    }

    pub fn retaining_steps(mut self) -> Self {
        self.retain_all_steps = true;
        self
    }

    pub fn with_check_interval(mut self, dt: f64) -> Self {
        self.check_interval = dt;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::Config(format!("T_final must be positive, got {}", self.t_final)));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(Error::Cfl(format!("cfl_safety must lie in (0,1], got {}", self.cfl_safety)));
        }
        if !(self.eps_viscosity >= 0.0) {
            return Err(Error::Config("eps_viscosity must be nonnegative".into()));
        }
        if let Scheme::LaxFriedrichs(Dissipation::Fixed(a)) = self.scheme {
            if !(a >= 0.0) {
                return Err(Error::Config("lf_dissipation must be nonnegative".into()));
            }
        }
        Ok(())
    }
}

/// Time levels of one solve.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub model: ModelSpec,
    pub times: Vec<f64>,
    pub fields: Vec<GridFunction>,
    pub eps_viscosity: f64,
    pub steps: usize,
}

impl Trajectory {
    pub fn grid(&self) -> &TorusGrid {
        self.fields[0].grid()
    }

    pub fn last(&self) -> &GridFunction {
        self.fields.last().expect("nonempty trajectory")
    }

    /// Index of the stored level closest to `t`.
    pub fn index_of(&self, t: f64) -> usize {
        let mut best = 0;
        for (k, tk) in self.times.iter().enumerate() {
            if (tk - t).abs() < (self.times[best] - t).abs() {
                best = k;
            }
        }
        best
    }

    pub fn at(&self, t: f64) -> Option<&GridFunction> {
        let k = self.index_of(t);
        ((self.times[k] - t).abs() <= 1e-9 * (1.0 + t.abs())).then(|| &self.fields[k])
    }
}

/// One-sided differences at node `i`: `(D⁻, D⁺)` per axis.
pub fn one_sided(grid: &TorusGrid, u: &[f64], i: usize) -> ([f64; MAX_DIM], [f64; MAX_DIM]) {
    let h = grid.spacing();
    let mut dm = [0.0; MAX_DIM];
    let mut dp = [0.0; MAX_DIM];
    for d in 0..grid.dim() {
        dm[d] = (u[i] - u[grid.shift(i, d, -1)]) / h;
        dp[d] = (u[grid.shift(i, d, 1)] - u[i]) / h;
    }
    (dm, dp)
}

/// Dissipation coefficients `α_d` at one node.
pub fn lf_coefficients(
    model: &ModelSpec,
    x: &Vector,
    dim: usize,
    dm: &Vector,
    dp: &Vector,
    diss: Dissipation,
) -> Vector {
    match diss {
        Dissipation::Fixed(a) => {
            let mut out = [0.0; MAX_DIM];
            out[..dim].fill(a);
            out
        }
        Dissipation::Local => {
            let mut pd = [0.0; MAX_DIM];
            for d in 0..dim {
                pd[d] = dm[d].abs().max(dp[d].abs());
            }
            let p = pd[0].hypot(pd[1]);
            let b = model.drift.eval(x);
            let mut out = [0.0; MAX_DIM];
            for d in 0..dim {
                let core = if model.m >= 2.0 {
                    if p > 0.0 {
                        p.powf(model.m - 2.0) * pd[d]
                    } else {
                        0.0
                    }
                } else {
                    p.powf(model.m - 1.0)
                };
                out[d] = core + b[d].abs();
            }
            out
        }
    }
}

/// Lax–Friedrichs numerical Hamiltonian and its transport rate `Σ α_d/h`.
pub fn lf_hamiltonian(
    model: &ModelSpec,
    grid: &TorusGrid,
    u: &[f64],
    i: usize,
    diss: Dissipation,
) -> (f64, f64) {
    let (dm, dp) = one_sided(grid, u, i);
    let x = grid.point(i);
    let dim = grid.dim();
    let mut pbar = [0.0; MAX_DIM];
    for d in 0..dim {
        pbar[d] = 0.5 * (dm[d] + dp[d]);
    }
    let alpha = lf_coefficients(model, &x, dim, &dm, &dp, diss);
    let mut hh = model.hamiltonian(&x, &pbar);
    let mut rate = 0.0;
    for d in 0..dim {
        hh -= 0.5 * alpha[d] * (dp[d] - dm[d]);
        rate += alpha[d] / grid.spacing();
    }
    (hh, rate)
}

/// Upwind numerical Hamiltonian and its transport rate.
pub fn upwind_hamiltonian(model: &ModelSpec, grid: &TorusGrid, u: &[f64], i: usize) -> (f64, f64) {
    let (dm, dp) = one_sided(grid, u, i);
    let x = grid.point(i);
    let b = model.drift.eval(&x);
    let mut big = [0.0; MAX_DIM];
    let mut transport = 0.0;
    let mut rate = 0.0;
    for d in 0..grid.dim() {
        big[d] = dm[d].max(0.0).max(-dp[d].min(0.0));
        transport += if b[d] >= 0.0 { b[d] * dm[d] } else { b[d] * dp[d] };
        rate += b[d].abs();
    }
    let norm = big[0].hypot(big[1]);
    let hh = norm.powf(model.m) / model.m + transport - model.potential_at(&x) + model.c_shift;
    let speed = if norm > 0.0 { norm.powf(model.m - 1.0) } else { 0.0 };
    (hh, (rate + speed * grid.dim() as f64) / grid.spacing())
}

enum SchemeState {
    Upwind,
    Llf(Dissipation),
    Control {
        lattice: VelocityLattice,
        dt: f64,
        lag: Vec<f64>,
    },
}

/// Resumable explicit time stepper.
pub struct Stepper<'a> {
    model: &'a ModelSpec,
    grid: TorusGrid,
    op: SecondOrderOperator,
    state: SchemeState,
    cfl: f64,
    max_dt: f64,
    fixed_dt: Option<f64>,
    u: Vec<f64>,
    t: f64,
    steps: usize,
}

/// Step of the control scheme for a lattice: `1/K` with `K` the smallest
/// multiple of 8 above `1/(cfl·limit)`, so that multiples of `1/8` are always
/// reached exactly.
pub fn control_time_step(op: &SecondOrderOperator, lattice: &VelocityLattice, cfl: f64) -> f64 {
    let limit = cfl * transition_dt_limit(op, lattice.q_max());
    if !limit.is_finite() {
        return 1.0;
    }
    1.0 / (8.0 * (1.0 / (8.0 * limit)).ceil())
}

impl<'a> Stepper<'a> {
    pub fn new(model: &'a ModelSpec, u0: &GridFunction, cfg: &SolveConfig) -> Result<Self> {
        cfg.validate()?;
        model.validate()?;
        let grid = *u0.grid();
        if grid.dim() != model.dim {
            return Err(Error::GridMismatch("initial data and model dimensions differ".into()));
        }
        let op = SecondOrderOperator::new(model, &grid, cfg.eps_viscosity)?;
        let state = match &cfg.scheme {
            Scheme::LaxFriedrichs(d) => SchemeState::Llf(*d),
            Scheme::Upwind => SchemeState::Upwind,
            Scheme::Control { lattice, dt } => {
                if lattice.dim() != grid.dim() {
                    return Err(Error::GridMismatch("velocity lattice dimension".into()));
                }
                let limit = transition_dt_limit(&op, lattice.q_max());
                let dt = match dt {
                    Some(dt) => {
                        if *dt > limit * (1.0 + 1e-12) || *dt <= 0.0 {
                            return Err(Error::Cfl(format!(
                                "control step {dt} exceeds the transition limit {limit}"
                            )));
                        }
                        *dt
                    }
                    None => control_time_step(&op, lattice, cfg.cfl_safety),
                };
                let lag = (0..grid.len())
                    .flat_map(|i| {
                        let x = grid.point(i);
                        lattice
                            .velocities()
                            .iter()
                            .map(move |q| model.lagrangian(&x, q))
                            .collect::<Vec<_>>()
                    })
                    .collect();
                SchemeState::Control {
                    lattice: lattice.clone(),
                    dt,
                    lag,
                }
            }
        };
        let max_dt = cfg.max_dt.unwrap_or(grid.spacing());
        let stepper = Self {
            model,
            grid,
            op,
            state,
            cfl: cfg.cfl_safety,
            max_dt,
            fixed_dt: cfg.fixed_dt,
            u: u0.values().to_vec(),
            t: 0.0,
            steps: 0,
        };
        if let Some(dt) = cfg.fixed_dt {
            let limit = stepper.stable_dt();
            if dt > limit {
                return Err(Error::Cfl(format!(
                    "fixed step {dt} exceeds the stability limit {limit} of the initial data"
                )));
            }
        }
        Ok(stepper)
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }

    pub fn operator(&self) -> &SecondOrderOperator {
        &self.op
    }

    /// Constant step of the control scheme, if that is the active scheme.
    pub fn control_dt(&self) -> Option<f64> {
        match &self.state {
            SchemeState::Control { dt, .. } => Some(*dt),
            _ => None,
        }
    }

    /// Largest monotone step for the current state (Lax–Friedrichs) with the
    /// safety factor applied.
    fn stable_dt(&self) -> f64 {
        match &self.state {
            SchemeState::Control { dt, .. } => *dt,
            state => {
                let rate = (0..self.grid.len())
                    .into_par_iter()
                    .with_min_len(512)
                    .map(|i| self.numerical_hamiltonian(state, i).1 + self.op.diag(i).abs())
                    .reduce(|| 0.0, f64::max);
                if rate == 0.0 {
                    f64::INFINITY
                } else {
                    self.cfl / rate
                }
            }
        }
    }

    fn numerical_hamiltonian(&self, state: &SchemeState, i: usize) -> (f64, f64) {
        match state {
            SchemeState::Llf(diss) => lf_hamiltonian(self.model, &self.grid, &self.u, i, *diss),
            SchemeState::Upwind => upwind_hamiltonian(self.model, &self.grid, &self.u, i),
            SchemeState::Control { .. } => unreachable!("the control scheme has no numerical Hamiltonian"),
        }
    }

    /// One step that does not pass `t_limit`; returns the step length.
    pub fn step(&mut self, t_limit: f64) -> Result<f64> {
        let remaining = t_limit - self.t;
        if remaining <= 0.0 {
            return Ok(0.0);
        }
        let grid = self.grid;
        let (new, dt) = match &self.state {
            SchemeState::Control { lattice, dt, lag } => {
                let dt = *dt;
                if remaining < dt * (1.0 - 1e-9) {
                    return Err(Error::HorizonNotAligned { t: t_limit, dt });
                }
                let nq = lattice.len();
                let u = &self.u;
                let op = &self.op;
                let new: Vec<f64> = (0..grid.len())
                    .into_par_iter()
                    .with_min_len(256)
                    .map(|i| {
                        lattice
                            .velocities()
                            .iter()
                            .enumerate()
                            .map(|(k, q)| dt * lag[i * nq + k] + transition_apply(op, u, i, q, dt))
                            .fold(f64::INFINITY, f64::min)
                    })
                    .collect();
                (new, dt)
            }
            state => {
                let evals: Vec<(f64, f64)> = (0..grid.len())
                    .into_par_iter()
                    .with_min_len(512)
                    .map(|i| {
                        let (hh, r) = self.numerical_hamiltonian(state, i);
                        (hh, r + self.op.diag(i).abs())
                    })
                    .collect();
                let rate = evals.iter().fold(0.0, |m: f64, e| m.max(e.1));
                let limit = if rate == 0.0 { f64::INFINITY } else { 1.0 / rate };
                let mut dt = match self.fixed_dt {
                    Some(dt) => {
                        if dt > limit * (1.0 + 1e-12) {
                            return Err(Error::Cfl(format!(
                                "fixed step {dt} exceeds the stability limit {limit} at t = {}",
                                self.t
                            )));
                        }
                        dt
                    }
                    None => (self.cfl * limit).min(self.max_dt),
                };
                if dt >= remaining * (1.0 - 1e-12) {
                    dt = remaining;
                } else if remaining - dt < 1e-3 * dt {
                    // avoid a sliver step before the target
                    dt = remaining / 2.0;
                }
                let u = &self.u;
                let op = &self.op;
                let new: Vec<f64> = (0..grid.len())
                    .into_par_iter()
                    .with_min_len(512)
                    .map(|i| u[i] + dt * (op.apply_at(u, i) - evals[i].0))
                    .collect();
                (new, dt)
            }
        };
        if let Some(i) = new.iter().position(|v| !v.is_finite()) {
            return Err(Error::Cfl(format!("non-finite value at node {i}, t = {}", self.t)));
        }
        self.u = new;
        if (t_limit - (self.t + dt)).abs() <= 1e-9 * dt {
            self.t = t_limit;
        } else {
            self.t += dt;
        }
        self.steps += 1;
        Ok(dt)
    }

    /// Steps until `t_target`, calling `on_step` after every step.
    pub fn advance_to(&mut self, t_target: f64, mut on_step: impl FnMut(f64, &[f64])) -> Result<()> {
        while self.t < t_target {
            self.step(t_target)?;
            on_step(self.t, &self.u);
        }
        Ok(())
    }
}

/// Solves the Cauchy problem, storing the requested snapshots (and every
/// level when `retain_all_steps` is set). `0` and `T_final` are always kept.
pub fn solve_cauchy(model: &ModelSpec, u0: &GridFunction, cfg: &SolveConfig) -> Result<Trajectory> {
    let mut stepper = Stepper::new(model, u0, cfg)?;
    let grid = *u0.grid();
    let mut targets: Vec<f64> = cfg
        .snapshot_times
        .iter()
        .copied()
        .filter(|&t| t > 0.0 && t < cfg.t_final)
        .collect();
    if cfg.snapshot_times.iter().any(|&t| t < 0.0 || t > cfg.t_final * (1.0 + 1e-12)) {
        return Err(Error::Config("snapshot times must lie in [0, T_final]".into()));
    }
    targets.push(cfg.t_final);
    targets.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    targets.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let mut times = vec![0.0];
    let mut fields = vec![u0.clone()];
    for &target in &targets {
        if cfg.retain_all_steps {
            stepper.advance_to(target, |t, u| {
                times.push(t);
                fields.push(GridFunction::from_vec_unchecked(grid, u.to_vec()));
            })?;
        } else {
            stepper.advance_to(target, |_, _| {})?;
            times.push(stepper.time());
            fields.push(GridFunction::from_vec_unchecked(grid, stepper.values().to_vec()));
        }
    }
    Ok(Trajectory {
        model: model.clone(),
        times,
        fields,
        eps_viscosity: cfg.eps_viscosity,
        steps: stepper.steps(),
    })
}

/// Discrete defect `u_t - (a+ε)Δu + Ĥ` at level `t_index`, with a centered
/// time difference and the local Lax–Friedrichs Hamiltonian.
pub fn residual(model: &ModelSpec, traj: &Trajectory, t_index: usize) -> Result<GridFunction> {
    if t_index == 0 || t_index + 1 >= traj.times.len() {
        return Err(Error::InvalidArgument(format!(
            "residual needs 0 < t_index < {}, got {t_index}",
            traj.times.len() - 1
        )));
    }
    let grid = *traj.grid();
    let op = SecondOrderOperator::new(model, &grid, traj.eps_viscosity)?;
    let prev = traj.fields[t_index - 1].values();
    let next = traj.fields[t_index + 1].values();
    let cur = traj.fields[t_index].values();
    let span = traj.times[t_index + 1] - traj.times[t_index - 1];
    let values = (0..grid.len())
        .map(|i| {
            let (hh, _) = lf_hamiltonian(model, &grid, cur, i, Dissipation::Local);
            (next[i] - prev[i]) / span - op.apply_at(cur, i) + hh
        })
        .collect();
    Ok(GridFunction::from_vec_unchecked(grid, values))
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRecord {
    pub time: f64,
    pub sup_change: f64,
    pub mean: f64,
}

#[derive(Clone, Debug)]
pub struct ProfileEstimate {
    pub u_inf: GridFunction,
    pub c: f64,
    pub t_reached: f64,
    pub log: Vec<ConvergenceRecord>,
}

/// `1e-4 (1 + ‖u0‖∞)`.
pub fn default_tol(u0: &GridFunction) -> f64 {
    1e-4 * (1.0 + u0.sup_norm())
}

/// Runs until `u(t) + ct` stops changing by more than `tol` over one check
/// interval; `c` is the decay rate of the spatial mean over that interval.
pub fn large_time_profile(
    model: &ModelSpec,
    u0: &GridFunction,
    cfg: &SolveConfig,
    tol: f64,
) -> Result<ProfileEstimate> {
    if !(cfg.check_interval > 0.0) {
        return Err(Error::Config("check_interval must be positive".into()));
    }
    let mut stepper = Stepper::new(model, u0, cfg)?;
    let grid = *u0.grid();
    let mut prev = u0.values().to_vec();
    let mut t_prev = 0.0;
    let mut log = vec![ConvergenceRecord {
        time: 0.0,
        sup_change: f64::NAN,
        mean: u0.mean(),
    }];
    let mut k = 1usize;
    loop {
        let target = (k as f64 * cfg.check_interval).min(cfg.t_final);
        stepper.advance_to(target, |_, _| {})?;
        let cur = stepper.values();
        let tau = stepper.time() - t_prev;
        let mean_cur = cur.iter().sum::<f64>() / cur.len() as f64;
        let mean_prev = prev.iter().sum::<f64>() / prev.len() as f64;
        let c = -(mean_cur - mean_prev) / tau;
        let gap = cur
            .iter()
            .zip(&prev)
            .fold(0.0, |m: f64, (a, b)| m.max((a - b + c * tau).abs()));
        log.push(ConvergenceRecord {
            time: stepper.time(),
            sup_change: gap,
            mean: mean_cur,
        });
        if gap < tol {
            let t = stepper.time();
            let u_inf = GridFunction::from_vec_unchecked(grid, cur.iter().map(|v| v + c * t).collect());
            return Ok(ProfileEstimate {
                u_inf,
                c,
                t_reached: t,
                log,
            });
        }
        if stepper.time() >= cfg.t_final {
            return Err(Error::NotConverged {
                t_final: cfg.t_final,
                c,
                gap,
            });
        }
        prev = cur.to_vec();
        t_prev = stepper.time();
        k += 1;
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BarrierReport {
    pub m: f64,
    pub theta: f64,
    pub lambda: f64,
    /// `min_z [(λ^{m-1}/C) z^{m/2} + θ - (1/(m-1) + θ) z]` on the grid.
    pub min_margin: f64,
    /// `λ m'/2 - C - λ (1/(m-1) + θ)`.
    pub time_margin: f64,
    pub doublings: u32,
}

/// Doubles `λ` from 1 until the supersolution inequalities of the
/// superquadratic barrier hold on a uniform `z`-grid of `[0,1]`.
pub fn check_superquadratic_barrier(m: f64, c: f64, n: usize, z_grid: usize) -> Result<BarrierReport> {
    if !(m > 2.0) {
        return Err(Error::InvalidArgument(format!("the barrier needs m > 2, got {m}")));
    }
    if !(c > 0.0) || n == 0 || z_grid == 0 {
        return Err(Error::InvalidArgument("C, n and z_grid must be positive".into()));
    }
    let mc = m / (m - 1.0);
    let theta = 0.5 * (mc / 2.0 - 1.0 / (m - 1.0));
    let slope = 1.0 / (m - 1.0) + theta;
    let mut lambda: f64 = 1.0;
    for doublings in 0..200u32 {
        let lead = lambda.powf(m - 1.0) / c;
        let min_margin = (0..=z_grid)
            .map(|k| {
                let z = k as f64 / z_grid as f64;
                lead * z.powf(m / 2.0) + theta - slope * z
            })
            .fold(f64::INFINITY, f64::min);
        let time_margin = lambda * mc / 2.0 - c - lambda * slope;
        if min_margin > 0.0 && time_margin >= 0.0 {
            return Ok(BarrierReport {
                m,
                theta,
                lambda,
                min_margin,
                time_margin,
                doublings,
            });
        }
        lambda *= 2.0;
        if !lead.is_finite() || lambda > 1e150 {
            break;
        }
    }
    Err(Error::Audit(format!(
        "no barrier parameter found below the overflow cap for m = {m}, C = {c}"
    )))
}

/// Trigonometric polynomial of degree `<= 4` with coefficients uniform in
/// `[-1,1]`, shifted to minimum 0 and multiplied by `scale`.
pub fn random_initial_data(grid: &TorusGrid, rng: &mut impl Rng, scale: f64) -> GridFunction {
    let dim = grid.dim();
    let mut terms = Vec::new();
    let kmax: i32 = 4;
    let range2 = if dim == 2 { -kmax..=kmax } else { 0..=0 };
    for k2 in range2 {
        for k1 in 0..=kmax {
            if k1 == 0 && k2 <= 0 {
                continue;
            }
            if k1.abs() + k2.abs() > kmax {
                continue;
            }
            terms.push(([k1, k2], rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)));
        }
    }
    let f = GridFunction::from_fn(*grid, |x| {
        terms
            .iter()
            .map(|(k, a, b)| {
                let th = 2.0 * std::f64::consts::PI * (k[0] as f64 * x[0] + k[1] as f64 * x[1]);
                a * th.cos() + b * th.sin()
            })
            .sum()
    });
    let lo = f.min();
    let spread = (f.max() - lo).max(1e-12);
    GridFunction::from_vec_unchecked(*grid, f.values().iter().map(|v| scale * (v - lo) / spread).collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct CompactnessReport {
    pub scales: Vec<f64>,
    /// `‖u(·,1/2)‖∞` per sample.
    pub sup_norms: Vec<f64>,
    /// Largest `‖u(·,1/2)‖∞` per distinct scale, in order of `distinct_scales`.
    pub distinct_scales: Vec<f64>,
    pub per_scale_max: Vec<f64>,
    pub bound: f64,
    /// Ratio of the largest to the smallest per-scale maximum.
    pub scale_ratio: f64,
}

/// Solves to `t = 1/2` from `k` random data with minimum 0, sample `j`
/// scaled by `scales[j % scales.len()]`.
pub fn compactness_smoke(
    model: &ModelSpec,
    grid: &TorusGrid,
    k: usize,
    scales: &[f64],
    cfg: &SolveConfig,
    seed: u64,
) -> Result<CompactnessReport> {
    if !(model.m > 2.0) {
        return Err(Error::InvalidArgument(format!(
            "compactness check needs superquadratic growth (m > 2), got m = {}",
            model.m
        )));
    }
    if k == 0 || scales.is_empty() {
        return Err(Error::InvalidArgument("need at least one sample and one scale".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data: Vec<(f64, GridFunction)> = (0..k)
        .map(|j| {
            let s = scales[j % scales.len()];
            (s, random_initial_data(grid, &mut rng, s))
        })
        .collect();
    let mut half = cfg.clone();
    half.t_final = 0.5;
    half.snapshot_times.clear();
    half.retain_all_steps = false;
    let sup_norms: Vec<f64> = data
        .par_iter()
        .map(|(_, u0)| solve_cauchy(model, u0, &half).map(|tr| tr.last().sup_norm()))
        .collect::<Result<_>>()?;
    let mut distinct: Vec<f64> = Vec::new();
    for (s, _) in &data {
        if !distinct.contains(s) {
            distinct.push(*s);
        }
    }
    let per_scale_max: Vec<f64> = distinct
        .iter()
        .map(|s| {
            data.iter()
                .zip(&sup_norms)
                .filter(|((t, _), _)| t == s)
                .map(|(_, v)| *v)
                .fold(0.0, f64::max)
        })
        .collect();
    let bound = sup_norms.iter().copied().fold(0.0, f64::max);
    let lo = per_scale_max.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(CompactnessReport {
        scales: data.iter().map(|d| d.0).collect(),
        sup_norms,
        distinct_scales: distinct,
        per_scale_max,
        bound,
        scale_ratio: bound / lo.max(1e-300),
    })
}
