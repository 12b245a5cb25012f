//! Command-line surface: one subcommand per experiment, all driven by a
//! TOML configuration, each writing its artifacts and a run manifest into
//! the output directory.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::approx::{appendix_b_subsolution_audit, subsolution_residual_scan};
use crate::config::ExperimentConfig;
use crate::duality::{dual_value_ht, generate_solution_family, m_function};
use crate::error::{Error, Result};
use crate::io::{self, num, Report, RunManifest};
use crate::measures::{
    aubry_test, build_stationary_constraints, ht_table, BarrierEstimate, ManeResult, mane_potential, peierls_barrier, project_measure, solve_ht_lp,
    solve_mather_lp, Discretization,
};
use crate::model::check_assumptions;
use crate::pde::{
    check_superquadratic_barrier, default_tol, large_time_profile, random_initial_data, solve_cauchy,
};
use crate::profile::{verify_profile, verify_representation};

#[derive(Debug, Parser)]
#[command(name = "torus-hjb", version, about = "Degenerate HJB equations on the torus and their occupation-measure programs")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for tables, reports and the manifest.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel horizon and seed work.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Overrides the command's main tolerance (LP or stabilization).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Growth and diffusion assumptions; exit status 0 iff they hold.
    Check,
    /// Cauchy problem up to `solve.t_final`, with snapshots.
    Solve,
    /// Large-time profile `u∞` and ergodic constant.
    Profile,
    /// Discrete Mather problem.
    Mather,
    /// Mañé potential `d(ν₀,ν₁)` over `measures.horizons`.
    Potential,
    /// Peierls barrier `h(ν₀,ν₁)`, the Aubry test for `ν₁` and, for `m > 2`,
    /// the superquadratic supersolution.
    Barrier,
    /// Inequality chain `m <= d <= h` and the family dual of `h_t`.
    Duality,
    /// `∫u(t) dν` against the free-source program at `t = solve.t_final`.
    #[command(name = "verify-rep")]
    VerifyRep,
    /// `∫u∞ dν` against the horizon minimum of the free-source programs.
    #[command(name = "verify-profile")]
    VerifyProfile,
    /// Mollification residual scan and, for matrix diffusion, the
    /// regularized subsolution audit.
    Appendix,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Solve => "solve",
            Command::Profile => "profile",
            Command::Mather => "mather",
            Command::Potential => "potential",
            Command::Barrier => "barrier",
            Command::Duality => "duality",
            Command::VerifyRep => "verify-rep",
            Command::VerifyProfile => "verify-profile",
            Command::Appendix => "appendix",
        }
    }
}

struct Ctx {
    cfg: ExperimentConfig,
    out: PathBuf,
    seed: u64,
    tol: Option<f64>,
    artifacts: Vec<String>,
}

impl Ctx {
    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        io::write_atomic(&self.out.join(name), contents)?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    fn report(&mut self, report: Report) -> Result<String> {
        let text = report.render();
        self.write("report.txt", &text)?;
        Ok(text)
    }

    fn disc(&self) -> Result<Discretization> {
        self.cfg.discretization(&self.cfg.lp_options(self.tol))
    }
}

/// Parses `args` (including the program name) and runs the command;
/// returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn execute(cli: &Cli) -> Result<i32> {
    let path = cli
        .common
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let bytes = std::fs::read(path)?;
    let cfg = ExperimentConfig::load(path)?;
    let seed = cli.common.seed.unwrap_or(cfg.run.seed);
    let mut ctx = Ctx {
        cfg,
        out: cli.common.out_dir.clone(),
        seed,
        tol: cli.common.tol,
        artifacts: Vec::new(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.common.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let code = pool.install(|| dispatch(&cli.command, &mut ctx))?;
    RunManifest {
        command: cli.command.name().into(),
        config_path: path.display().to_string(),
        config_sha256: io::config_hash(&bytes),
        seed,
        jobs: cli.common.jobs,
        tol: cli.common.tol,
        crate_version: env!("CARGO_PKG_VERSION").into(),
        solver: "clarabel 0.11 (interior point)".into(),
        artifacts: ctx.artifacts.clone(),
    }
    .write(&ctx.out)?;
    Ok(code)
}

fn dispatch(cmd: &Command, ctx: &mut Ctx) -> Result<i32> {
    match cmd {
        Command::Check => cmd_check(ctx),
        Command::Solve => cmd_solve(ctx),
        Command::Profile => cmd_profile(ctx),
        Command::Mather => cmd_mather(ctx),
        Command::Potential => cmd_potential(ctx),
        Command::Barrier => cmd_barrier(ctx),
        Command::Duality => cmd_duality(ctx),
        Command::VerifyRep => cmd_verify_rep(ctx),
        Command::VerifyProfile => cmd_verify_profile(ctx),
        Command::Appendix => cmd_appendix(ctx),
    }
}

fn print(text: &str) {
    print!("{text}");
}

fn cmd_check(ctx: &mut Ctx) -> Result<i32> {
    let rep = check_assumptions(&ctx.cfg.model()?, &ctx.cfg.grid()?, ctx.cfg.run.p_samples)?;
    let mut r = Report::new("assumption check")
        .field("valid", rep.valid)
        .field("lower_growth_margin", num(rep.lower_growth_margin))
        .field("upper_growth_margin", num(rep.upper_growth_margin))
        .field("dx_margin", num(rep.dx_margin))
        .field("dp_margin", num(rep.dp_margin))
        .field("min_diffusion_eigenvalue", num(rep.min_diffusion_eigenvalue))
        .field("degenerate_nodes", rep.degenerate_nodes.len());
    for v in &rep.violations {
        r = r.field("violation", v);
    }
    for w in &rep.warnings {
        r = r.field("warning", w);
    }
    print(&ctx.report(r)?);
    Ok(if rep.valid { 0 } else { 1 })
}

fn cmd_solve(ctx: &mut Ctx) -> Result<i32> {
    let u0 = ctx.cfg.initial_data(ctx.seed)?;
    let disc = ctx.cfg.velocity.as_ref().map(|_| ctx.disc()).transpose()?;
    let cfg = ctx.cfg.solve_config(ctx.cfg.solve.t_final, disc.as_ref())?;
    let traj = solve_cauchy(&ctx.cfg.model()?, &u0, &cfg)?;
    let mut index = String::from("index,time,file\n");
    for (k, (t, f)) in traj.times.iter().zip(&traj.fields).enumerate() {
        let name = format!("snapshot_{k:04}.csv");
        ctx.write(&name, &io::snapshot_csv(f))?;
        index.push_str(&format!("{k},{t},{name}\n"));
    }
    ctx.write("snapshots.csv", &index)?;
    let last = traj.last();
    let text = ctx.report(
        Report::new("cauchy solve")
            .field("t_final", traj.times[traj.times.len() - 1])
            .field("steps", traj.steps)
            .field("min", num(last.min()))
            .field("max", num(last.max()))
            .field("mean", num(last.mean())),
    )?;
    print(&text);
    Ok(0)
}

fn cmd_profile(ctx: &mut Ctx) -> Result<i32> {
    let u0 = ctx.cfg.initial_data(ctx.seed)?;
    let disc = ctx.cfg.velocity.as_ref().map(|_| ctx.disc()).transpose()?;
    let cfg = ctx.cfg.solve_config(ctx.cfg.solve.t_max, disc.as_ref())?;
    let tol = ctx.tol.or(ctx.cfg.solve.tol).unwrap_or_else(|| default_tol(&u0));
    let est = large_time_profile(&ctx.cfg.model()?, &u0, &cfg, tol)?;
    ctx.write("u_inf.csv", &io::snapshot_csv(&est.u_inf))?;
    ctx.write("convergence.csv", &io::convergence_csv(&est.log))?;
    let text = ctx.report(
        Report::new("large-time profile")
            .field("c", num(est.c))
            .field("t_reached", est.t_reached)
            .field("tol", num(tol))
            .field("u_inf_oscillation", num(est.u_inf.max() - est.u_inf.min())),
    )?;
    print(&text);
    Ok(0)
}

fn cmd_mather(ctx: &mut Ctx) -> Result<i32> {
    let opts = ctx.cfg.lp_options(ctx.tol);
    let disc = ctx.disc()?;
    let sol = solve_mather_lp(&disc, &opts)?;
    let nu = project_measure(&sol.measure)?;
    ctx.write("mather_atoms.csv", &io::occupation_csv(&sol.measure))?;
    ctx.write("mather_projection.csv", &io::measure_csv(&nu))?;
    ctx.write("corrector.csv", &io::snapshot_csv(&sol.corrector))?;
    io::write_triplets(&ctx.out, "stationary_constraints", &build_stationary_constraints(&disc))?;
    ctx.artifacts.push("stationary_constraints.triplets".into());
    ctx.artifacts.push("stationary_constraints.json".into());
    let text = ctx.report(
        Report::new("discrete Mather problem")
            .field("value", num(sol.value))
            .field("ergodic_constant", num(-sol.value))
            .field("duality_gap", num(sol.lp.duality_gap()))
            .field("primal_defect", num(sol.lp.primal_defect))
            .field("atoms", sol.measure.atoms.len())
            .field("dt", disc.dt()),
    )?;
    print(&text);
    Ok(0)
}

fn ht_rows(table: &[crate::measures::HtRow]) -> Vec<Vec<String>> {
    table
        .iter()
        .map(|r| vec![r.t.to_string(), num(r.value), format!("{:?}", r.status), num(r.duality_gap)])
        .collect()
}

fn endpoints(ctx: &Ctx, disc: &Discretization) -> Result<(crate::DiscreteMeasure, crate::DiscreteMeasure)> {
    let opts = ctx.cfg.lp_options(ctx.tol);
    Ok((
        ctx.cfg.measure(&ctx.cfg.measures.nu0, Some(disc), &opts)?,
        ctx.cfg.measure(&ctx.cfg.measures.nu1, Some(disc), &opts)?,
    ))
}

fn cmd_potential(ctx: &mut Ctx) -> Result<i32> {
    let opts = ctx.cfg.lp_options(ctx.tol);
    let disc = ctx.disc()?;
    let (nu0, nu1) = endpoints(ctx, &disc)?;
    let res = mane_potential(&disc, &nu0, &nu1, &ctx.cfg.measures.horizons, &opts)?;
    let text = ctx.report(
        Report::new("Mane potential")
            .field("d", num(res.d))
            .field("t_star", res.t_star)
            .table("h_t", &["t", "h_t", "status", "duality_gap"], ht_rows(&res.table)),
    )?;
    print(&text);
    Ok(0)
}

fn cmd_barrier(ctx: &mut Ctx) -> Result<i32> {
    let opts = ctx.cfg.lp_options(ctx.tol);
    let disc = ctx.disc()?;
    let (nu0, nu1) = endpoints(ctx, &disc)?;
    let schedule = &ctx.cfg.measures.horizons;
    let window = ctx.cfg.measures.tail_window;
    let est = peierls_barrier(&disc, &nu0, &nu1, schedule, window, &opts)?;
    let (aubry, self_est) = aubry_test(&disc, &nu1, schedule, window, 1e-6, &opts)?;
    let mut r = Report::new("Peierls barrier")
        .field("h", num(est.h))
        .field("tail_window", est.tail_window)
        .field("nu1_in_aubry_set", aubry)
        .field("h_nu1_nu1", num(self_est.h));
    let model = ctx.cfg.model()?;
    if model.m > 2.0 {
        let b = check_superquadratic_barrier(model.m, model.c0, model.dim, 10_000)?;
        r = r
            .field("superquadratic_lambda", b.lambda)
            .field("superquadratic_min_margin", num(b.min_margin))
            .field("superquadratic_time_margin", num(b.time_margin));
    }
    let text = ctx.report(r.table("h_t", &["t", "h_t", "status", "duality_gap"], ht_rows(&est.table)))?;
    print(&text);
    Ok(0)
}

fn cmd_duality(ctx: &mut Ctx) -> Result<i32> {
    let opts = ctx.cfg.lp_options(ctx.tol);
    let disc = ctx.disc()?;
    let model = disc.model.clone();
    let horizons = ctx.cfg.measures.horizons.clone();
    if horizons.is_empty() || horizons.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("measures.horizons must be nonempty and increasing".into()));
    }
    let t_max = horizons.iter().copied().fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let seeds: Vec<_> = (0..ctx.cfg.duality.seeds)
        .map(|_| random_initial_data(&disc.grid, &mut rng, ctx.cfg.duality.seed_scale))
        .collect();
    let mut cfg = ctx.cfg.solve_config(t_max.max(ctx.cfg.solve.t_max), Some(&disc))?;
    cfg.eps_viscosity = disc.eta;
    cfg.scheme = disc.control_scheme();
    cfg.snapshot_times = horizons.clone();
    let tol = ctx.cfg.solve.tol.unwrap_or(1e-6);
    let families = generate_solution_family(&model, &seeds, &cfg, tol)?;
    let mut pairs = vec![(ctx.cfg.measures.nu0.clone(), ctx.cfg.measures.nu1.clone())];
    pairs.extend(ctx.cfg.measures.pairs.iter().map(|[a, b]| (a.clone(), b.clone())));
    let mut rows = Vec::new();
    let mut worst: f64 = f64::NEG_INFINITY;
    for (a, b) in &pairs {
        let nu0 = ctx.cfg.measure(a, Some(&disc), &opts)?;
        let nu1 = ctx.cfg.measure(b, Some(&disc), &opts)?;
        let m = m_function(&families.stationary, &nu0, &nu1)?;
        let table = ht_table(&disc, &nu0, &nu1, &horizons, &opts)?;
        let h = BarrierEstimate::from_table(table.clone(), ctx.cfg.measures.tail_window);
        let d = ManeResult::from_table(table);
        let ht = solve_ht_lp(&disc, &nu0, &nu1, t_max, &opts)?;
        let mut evolving = families.evolving.clone();
        if ht.is_feasible() {
            evolving.push_ht_dual(&ht, disc.dt())?;
        }
        let dual = dual_value_ht(&evolving, &nu0, &nu1, t_max)?;
        worst = worst.max(m - d.d).max(d.d - h.h);
        rows.push(vec![
            format!("{a:?}->{b:?}"),
            num(m),
            num(d.d),
            num(h.h),
            num(ht.value),
            num(dual),
            gap(d.d, m),
            gap(h.h, d.d),
            gap(ht.value, dual),
        ]);
    }
    let text = ctx.report(
        Report::new("duality audit")
            .field("stationary_members", families.stationary.len())
            .field("evolving_members", families.evolving.len())
            .field("dropped_seeds", families.dropped.len())
            .field("t_dual", t_max)
            .field("worst_chain_violation", num(worst))
            .table(
                "pairs",
                &["pair", "m_family", "d_LP", "h_LP", "h_t", "dual_ht", "d-m", "h-d", "h_t-dual"],
                rows,
            ),
    )?;
    print(&text);
    Ok(if worst <= 1e-6 { 0 } else { 1 })
}

/// `a - b`, or `n/a` when both sides are the same infinity.
fn gap(a: f64, b: f64) -> String {
    let d = a - b;
    if d.is_nan() {
        "n/a".into()
    } else {
        num(d)
    }
}

fn pde_config_for(ctx: &Ctx, disc: &Discretization, t: f64) -> Result<crate::pde::SolveConfig> {
    let mut cfg = ctx.cfg.solve_config(t, Some(disc))?;
    cfg.eps_viscosity = disc.eta;
    Ok(cfg)
}

fn cmd_verify_rep(ctx: &mut Ctx) -> Result<i32> {
    let disc = ctx.disc()?;
    let (_, nu) = endpoints(ctx, &disc)?;
    let u0 = ctx.cfg.initial_data(ctx.seed)?;
    let t = ctx.cfg.solve.t_final;
    let rep = verify_representation(&disc, &u0, &nu, t, &pde_config_for(ctx, &disc, t)?)?;
    ctx.write("nu0_star.csv", &io::measure_csv(&rep.nu0))?;
    let text = ctx.report(
        Report::new("representation formula")
            .field("t", t)
            .field("lhs", num(rep.lhs))
            .field("rhs", num(rep.rhs))
            .field("gap", num(rep.gap))
            .field("budget", num(disc.grid.spacing() + disc.lattice.spacing() + disc.dt()))
            .field("lp_duality_gap", num(rep.lp_duality_gap)),
    )?;
    print(&text);
    Ok(0)
}

fn cmd_verify_profile(ctx: &mut Ctx) -> Result<i32> {
    let disc = ctx.disc()?;
    let (_, nu) = endpoints(ctx, &disc)?;
    let u0 = ctx.cfg.initial_data(ctx.seed)?;
    let cfg = pde_config_for(ctx, &disc, ctx.cfg.solve.t_max)?;
    let tol = ctx.tol.or(ctx.cfg.solve.tol).unwrap_or_else(|| default_tol(&u0));
    let rep = verify_profile(&disc, &u0, &nu, &ctx.cfg.measures.horizons, &cfg, tol)?;
    ctx.write("nu0_star.csv", &io::measure_csv(&rep.profile.nu0_star))?;
    let rows = rep
        .profile
        .table
        .iter()
        .map(|r| vec![r.t.to_string(), num(r.value)])
        .collect();
    let text = ctx.report(
        Report::new("large-time profile representation")
            .field("lhs", num(rep.lhs))
            .field("rhs", num(rep.rhs))
            .field("gap", num(rep.gap))
            .field("budget", num(rep.budget))
            .field("c", num(rep.c))
            .field("t_reached", rep.t_reached)
            .field("t_star", rep.profile.t_star)
            .table("horizons", &["t", "value"], rows),
    )?;
    print(&text);
    Ok(0)
}

fn cmd_appendix(ctx: &mut Ctx) -> Result<i32> {
    let model = ctx.cfg.model()?;
    let u0 = ctx.cfg.initial_data(ctx.seed)?;
    let t = ctx.cfg.solve.t_final;
    let levels = 1024;
    let mut cfg = ctx.cfg.solve_config(t, None)?;
    cfg.snapshot_times = (1..levels).map(|k| t * k as f64 / levels as f64).collect();
    let traj = solve_cauchy(&model, &u0, &cfg)?;
    let a = ctx.cfg.approx.clone();
    let scan = subsolution_residual_scan(&model, &traj, &a.alphas, a.samples)?;
    ctx.write("scan.csv", &io::scan_csv(&scan))?;
    ctx.write("scan.json", &io::to_json(&scan)?)?;
    let mut r = Report::new("mollification and regularization audits")
        .field("floor", num(scan.floor))
        .field(
            "exponent",
            scan.exponent.map(num).unwrap_or_else(|| "undefined (residuals at the floor)".into()),
        );
    let mut code = 0;
    if model.diffusion.is_matrix() {
        let rep = appendix_b_subsolution_audit(&model, &traj, a.eps, a.eta, a.alpha, a.delta_factor, 4)?;
        ctx.write("appendix_b.json", &io::to_json(&rep)?)?;
        r = r
            .field("delta0", num(rep.delta0))
            .field("delta", num(rep.delta))
            .field("omega", num(rep.omega))
            .field("kappa", num(rep.kappa))
            .field("residual", num(rep.residual))
            .field("passed", rep.passed);
        if !rep.passed && a.delta_factor <= 1.0 {
            code = 1;
        }
    }
    let rows = scan
        .rows
        .iter()
        .map(|row| vec![row.alpha.to_string(), num(row.residual), num(row.min_residual)])
        .collect();
    let text = ctx.report(r.table("scan", &["alpha", "residual", "min_residual"], rows))?;
    print(&text);
    Ok(code)
}

/// Entry point of the binary.
pub fn main_from_env() -> i32 {
    run(std::env::args_os())
}

/// Helper for tests: runs `command` on `config` into `out`.
pub fn run_command(command: &str, config: &Path, out: &Path, extra: &[&str]) -> i32 {
    let mut args: Vec<OsString> = vec![
        "torus-hjb".into(),
        command.into(),
        "--config".into(),
        config.as_os_str().to_owned(),
        "--out-dir".into(),
        out.as_os_str().to_owned(),
    ];
    args.extend(extra.iter().map(OsString::from));
    run(args)
}
