//! Experiment configuration files (TOML). Unknown keys are rejected and
//! parse errors carry line and column.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DiscreteMeasure, GridFunction, TorusGrid, Vector, VelocityLattice, MAX_DIM};
use crate::lp::LpOptions;
use crate::measures::{normalize_model, project_measure, solve_mather_lp, Discretization};
use crate::model::{Diffusion, Drift, Family, ModelSpec, TrigPoly, TrigTerm};
use crate::pde::{random_initial_data, Dissipation, Scheme, SolveConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    Zero,
    /// `amplitude Σ_d cos(2π k x_d)`.
    Cosine { amplitude: f64, k: i32 },
    Trig {
        #[serde(default)]
        constant: f64,
        terms: Vec<TermConfig>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub k: Vec<i32>,
    #[serde(default)]
    pub cos: f64,
    #[serde(default)]
    pub sin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftConfig {
    Zero,
    Constant { b: Vec<f64> },
    Trig { components: Vec<TrigConfig> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigConfig {
    #[serde(default)]
    pub constant: f64,
    #[serde(default)]
    pub terms: Vec<TermConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum DiffusionConfig {
    Zero,
    Constant { a0: f64 },
    Sin2 {
        a0: f64,
        #[serde(default)]
        phase: f64,
    },
    DiagSin2 { a1: f64, a2: f64 },
    Matrix { a11: f64, a12: f64, a22: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub family: Family,
    pub m: f64,
    #[serde(rename = "C0", default = "default_c0")]
    pub c0: f64,
    #[serde(default)]
    pub c_shift: f64,
    #[serde(default = "zero_potential")]
    pub potential: PotentialConfig,
    #[serde(default = "zero_drift")]
    pub drift: DriftConfig,
    #[serde(default = "zero_diffusion")]
    pub diffusion: DiffusionConfig,
}

fn default_c0() -> f64 {
    10.0
}
fn zero_potential() -> PotentialConfig {
    PotentialConfig::Zero
}
fn zero_drift() -> DriftConfig {
    DriftConfig::Zero
}
fn zero_diffusion() -> DiffusionConfig {
    DiffusionConfig::Zero
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VelocityConfig {
    pub q_max: f64,
    pub n_q: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeChoice {
    /// Local Lax–Friedrichs.
    Llf,
    /// Rouy–Tourin upwinding; preferable for steep data.
    Upwind,
    /// Control scheme matching the occupation-measure constraints.
    Control,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveSection {
    pub t_final: f64,
    /// Horizon cap of the large-time solves (`profile`, `verify-profile`).
    pub t_max: f64,
    pub eps: f64,
    pub scheme: SchemeChoice,
    pub cfl: f64,
    pub snapshots: Vec<f64>,
    pub check_interval: f64,
    /// Stabilization tolerance of the large-time solve; `None` uses
    /// `1e-4 (1 + ‖u₀‖∞)`.
    pub tol: Option<f64>,
}

impl Default for SolveSection {
    fn default() -> Self {
        Self {
            t_final: 1.0,
            t_max: 64.0,
            eps: 0.0,
            scheme: SchemeChoice::Llf,
            cfl: 0.9,
            snapshots: Vec::new(),
            check_interval: 1.0,
            tol: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    Zero,
    Trig {
        #[serde(default)]
        constant: f64,
        terms: Vec<TermConfig>,
    },
    /// `amplitude (1 - |cos π x_1|)`, concave kink at `x_1 = 1/2`.
    Kink { amplitude: f64 },
    Random { scale: f64 },
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig::Zero
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureConfig {
    Uniform,
    Point { x: Vec<f64> },
    /// Normalized `1 + amplitude cos(2π x_1 + phase)`.
    Bump {
        #[serde(default)]
        phase: f64,
        amplitude: f64,
    },
    /// Spatial marginal of the discrete Mather measure.
    Mather,
}

impl Default for MeasureConfig {
    fn default() -> Self {
        MeasureConfig::Uniform
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasuresSection {
    /// Added viscosity `η` of the constraint sets.
    pub eta: f64,
    pub nu0: MeasureConfig,
    pub nu1: MeasureConfig,
    pub horizons: Vec<f64>,
    pub tail_window: usize,
    /// Extra pairs for the duality audit.
    pub pairs: Vec<[MeasureConfig; 2]>,
    /// Shift `c_shift` by the Mather value before solving.
    pub normalize: bool,
    pub lp_tol: f64,
}

impl Default for MeasuresSection {
    fn default() -> Self {
        Self {
            eta: 0.0,
            nu0: MeasureConfig::Uniform,
            nu1: MeasureConfig::Uniform,
            horizons: (0..=6).map(|k| f64::from(1u32 << k)).collect(),
            tail_window: 5,
            pairs: Vec::new(),
            normalize: false,
            lp_tol: LpOptions::default().tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DualitySection {
    /// Number of random seeds for the solution family.
    pub seeds: usize,
    pub seed_scale: f64,
    pub dedup_tol: f64,
}

impl Default for DualitySection {
    fn default() -> Self {
        Self {
            seeds: 4,
            seed_scale: 1.0,
            dedup_tol: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApproxSection {
    pub alphas: Vec<f64>,
    pub samples: usize,
    pub eps: f64,
    pub eta: f64,
    pub alpha: f64,
    /// Multiple of `δ₀`; the subsolution estimate needs at most 1.
    pub delta_factor: f64,
}

impl Default for ApproxSection {
    fn default() -> Self {
        Self {
            alphas: (3..=7).map(|k| 0.5f64.powi(k)).collect(),
            samples: 9,
            eps: 0.1,
            eta: 0.02,
            alpha: 0.0625,
            delta_factor: 0.9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub p_samples: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 0,
            p_samples: 9,
        }
    }
}

/// One experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub grid: GridConfig,
    pub velocity: Option<VelocityConfig>,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub solve: SolveSection,
    #[serde(default)]
    pub measures: MeasuresSection,
    #[serde(default)]
    pub duality: DualitySection,
    #[serde(default)]
    pub approx: ApproxSection,
    #[serde(default)]
    pub run: RunSection,
}

fn term(t: &TermConfig, dim: usize) -> Result<TrigTerm> {
    if t.k.len() != dim {
        return Err(Error::Config(format!("wave vector {:?} must have {dim} entries", t.k)));
    }
    let mut k = [0; MAX_DIM];
    k[..dim].copy_from_slice(&t.k);
    Ok(TrigTerm {
        k,
        cos: t.cos,
        sin: t.sin,
    })
}

fn trig(constant: f64, terms: &[TermConfig], dim: usize) -> Result<TrigPoly> {
    Ok(TrigPoly {
        constant,
        terms: terms.iter().map(|t| term(t, dim)).collect::<Result<_>>()?,
    })
}

fn vector(v: &[f64], dim: usize, what: &str) -> Result<Vector> {
    if v.len() != dim {
        return Err(Error::Config(format!("{what} must have {dim} entries, got {}", v.len())));
    }
    let mut out = [0.0; MAX_DIM];
    out[..dim].copy_from_slice(v);
    Ok(out)
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.model()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn model(&self) -> Result<ModelSpec> {
        let dim = self.grid.dim;
        let mc = &self.model;
        let potential = match &mc.potential {
            PotentialConfig::Zero => TrigPoly::zero(),
            PotentialConfig::Cosine { amplitude, k } => TrigPoly::cosine(dim, *amplitude, *k),
            PotentialConfig::Trig { constant, terms } => trig(*constant, terms, dim)?,
        };
        let drift = match &mc.drift {
            DriftConfig::Zero => Drift::Zero,
            DriftConfig::Constant { b } => Drift::Constant(vector(b, dim, "drift.b")?),
            DriftConfig::Trig { components } => {
                if components.len() != dim {
                    return Err(Error::Config(format!("drift needs {dim} components")));
                }
                let mut c = [TrigPoly::zero(), TrigPoly::zero()];
                for (d, comp) in components.iter().enumerate() {
                    c[d] = trig(comp.constant, &comp.terms, dim)?;
                }
                Drift::Trig(c)
            }
        };
        let diffusion = match mc.diffusion {
            DiffusionConfig::Zero => Diffusion::Zero,
            DiffusionConfig::Constant { a0 } => Diffusion::Constant { a0 },
            DiffusionConfig::Sin2 { a0, phase } => Diffusion::Sin2 { a0, phase },
            DiffusionConfig::DiagSin2 { a1, a2 } => Diffusion::DiagSin2 { a1, a2 },
            DiffusionConfig::Matrix { a11, a12, a22 } => Diffusion::MatrixConstant { a11, a12, a22 },
        };
        let spec = ModelSpec {
            dim,
            family: mc.family,
            m: mc.m,
            c0: mc.c0,
            c_shift: mc.c_shift,
            potential,
            drift,
            diffusion,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn grid(&self) -> Result<TorusGrid> {
        TorusGrid::new(self.grid.dim, self.grid.n)
    }

    pub fn lattice(&self) -> Result<VelocityLattice> {
        let v = self
            .velocity
            .as_ref()
            .ok_or_else(|| Error::Config("missing [velocity] section".into()))?;
        VelocityLattice::new(self.grid.dim, v.q_max, v.n_q)
    }

    pub fn lp_options(&self, tol_override: Option<f64>) -> LpOptions {
        LpOptions {
            tol: tol_override.unwrap_or(self.measures.lp_tol),
            ..LpOptions::default()
        }
    }

    /// Discretization of the measure problems; normalized when requested.
    pub fn discretization(&self, opts: &LpOptions) -> Result<Discretization> {
        let disc = Discretization::with_cfl(
            &self.model()?,
            self.grid()?,
            self.lattice()?,
            self.measures.eta,
            self.solve.cfl,
        )?;
        if self.measures.normalize {
            Ok(normalize_model(&disc, opts)?.0)
        } else {
            Ok(disc)
        }
    }

    pub fn initial_data(&self, seed: u64) -> Result<GridFunction> {
        let grid = self.grid()?;
        Ok(match &self.initial {
            InitialConfig::Zero => GridFunction::constant(grid, 0.0),
            InitialConfig::Trig { constant, terms } => {
                let p = trig(*constant, terms, grid.dim())?;
                GridFunction::from_fn(grid, |x| p.eval(x))
            }
            InitialConfig::Kink { amplitude } => GridFunction::from_fn(grid, |x| {
                amplitude * (1.0 - (std::f64::consts::PI * x[0]).cos().abs())
            }),
            InitialConfig::Random { scale } => {
                random_initial_data(&grid, &mut ChaCha8Rng::seed_from_u64(seed), *scale)
            }
        })
    }

    pub fn measure(&self, which: &MeasureConfig, disc: Option<&Discretization>, opts: &LpOptions) -> Result<DiscreteMeasure> {
        let grid = self.grid()?;
        match which {
            MeasureConfig::Uniform => Ok(DiscreteMeasure::uniform(grid)),
            MeasureConfig::Point { x } => Ok(DiscreteMeasure::point_mass_at(grid, &vector(x, grid.dim(), "point x")?)),
            MeasureConfig::Bump { phase, amplitude } => {
                if amplitude.abs() >= 1.0 {
                    return Err(Error::Config("bump amplitude must lie in (-1, 1)".into()));
                }
                let w: Vec<f64> = (0..grid.len())
                    .map(|i| 1.0 + amplitude * (2.0 * std::f64::consts::PI * grid.point(i)[0] + phase).cos())
                    .collect();
                let total: f64 = w.iter().sum();
                DiscreteMeasure::new(grid, w.into_iter().map(|v| v / total).collect())
            }
            MeasureConfig::Mather => {
                let disc = disc.ok_or_else(|| Error::Config("a Mather measure needs a [velocity] section".into()))?;
                project_measure(&solve_mather_lp(disc, opts)?.measure)
            }
        }
    }

    pub fn solve_config(&self, t_final: f64, disc: Option<&Discretization>) -> Result<SolveConfig> {
        let s = &self.solve;
        let mut cfg = SolveConfig::new(t_final).with_eps(s.eps).with_check_interval(s.check_interval);
        cfg.cfl_safety = s.cfl;
        cfg.snapshot_times = s.snapshots.iter().copied().filter(|&t| t <= t_final).collect();
        cfg.scheme = match s.scheme {
            SchemeChoice::Llf => Scheme::LaxFriedrichs(Dissipation::Local),
            SchemeChoice::Upwind => Scheme::Upwind,
            SchemeChoice::Control => match disc {
                Some(d) => d.control_scheme(),
                None => Scheme::Control {
                    lattice: self.lattice()?,
                    dt: None,
                },
            },
        };
        Ok(cfg)
    }
}
