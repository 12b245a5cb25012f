//! Hamiltonian/Lagrangian pairs, diffusion fields and the growth checks.
//!
//! The supported family is `H(x,p) = |p|^m/m + b(x)·p - V(x) + c_shift` with
//! trigonometric `V` and `b`. Its Legendre transform is closed form:
//! `L(x,q) = |q - b(x)|^{m'}/m' + V(x) - c_shift`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{TorusGrid, Vector, MAX_DIM};

/// One term `cos·cos(2π k·x) + sin·sin(2π k·x)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigTerm {
    pub k: [i32; MAX_DIM],
    pub cos: f64,
    pub sin: f64,
}

/// Real trigonometric polynomial on the unit torus.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrigPoly {
    pub constant: f64,
    pub terms: Vec<TrigTerm>,
}

impl TrigPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self {
            constant: c,
            terms: Vec::new(),
        }
    }

    /// `amplitude · Σ_d cos(2π k x_d)` over the first `dim` axes.
    pub fn cosine(dim: usize, amplitude: f64, k: i32) -> Self {
        let terms = (0..dim)
            .map(|d| {
                let mut kk = [0; MAX_DIM];
                kk[d] = k;
                TrigTerm {
                    k: kk,
                    cos: amplitude,
                    sin: 0.0,
                }
            })
            .collect();
        Self {
            constant: 0.0,
            terms,
        }
    }

    fn phase(k: &[i32; MAX_DIM], x: &Vector) -> f64 {
        2.0 * PI * (k[0] as f64 * x[0] + k[1] as f64 * x[1])
    }

    pub fn eval(&self, x: &Vector) -> f64 {
        self.terms.iter().fold(self.constant, |acc, t| {
            let th = Self::phase(&t.k, x);
            acc + t.cos * th.cos() + t.sin * th.sin()
        })
    }

    pub fn grad(&self, x: &Vector) -> Vector {
        let mut g = [0.0; MAX_DIM];
        for t in &self.terms {
            let th = Self::phase(&t.k, x);
            let s = -t.cos * th.sin() + t.sin * th.cos();
            for (d, gd) in g.iter_mut().enumerate() {
                *gd += 2.0 * PI * t.k[d] as f64 * s;
            }
        }
        g
    }

    /// Upper bound of `|f|` from the coefficients.
    pub fn abs_bound(&self) -> f64 {
        self.constant.abs()
            + self
                .terms
                .iter()
                .map(|t| t.cos.hypot(t.sin))
                .sum::<f64>()
    }
}

/// Linear drift `b(x)` of the Hamiltonian.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Drift {
    Zero,
    Constant(Vector),
    Trig([TrigPoly; MAX_DIM]),
}

impl Drift {
    pub fn eval(&self, x: &Vector) -> Vector {
        match self {
            Drift::Zero => [0.0; MAX_DIM],
            Drift::Constant(b) => *b,
            Drift::Trig(polys) => [polys[0].eval(x), polys[1].eval(x)],
        }
    }

    /// Jacobian `∂b_i/∂x_j`.
    pub fn jacobian(&self, x: &Vector) -> [[f64; MAX_DIM]; MAX_DIM] {
        match self {
            Drift::Trig(polys) => [polys[0].grad(x), polys[1].grad(x)],
            _ => [[0.0; MAX_DIM]; MAX_DIM],
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Drift::Zero)
    }
}

/// Diffusion coefficient `a(x)` (scalar) or matrix field `A(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Diffusion {
    Zero,
    Constant { a0: f64 },
    /// `a0 · Π_d sin²(π (x_d - phase))`.
    Sin2 { a0: f64, phase: f64 },
    /// `A = diag(a1 sin²(π x_1), a2 sin²(π x_2))`, two dimensions only.
    DiagSin2 { a1: f64, a2: f64 },
    /// Constant symmetric matrix, two dimensions only.
    MatrixConstant { a11: f64, a12: f64, a22: f64 },
}

impl Diffusion {
    /// True when every coefficient vanishes identically.
    pub fn is_zero(&self) -> bool {
        match *self {
            Diffusion::Zero => true,
            Diffusion::Constant { a0 } | Diffusion::Sin2 { a0, .. } => a0 == 0.0,
            Diffusion::DiagSin2 { a1, a2 } => a1 == 0.0 && a2 == 0.0,
            Diffusion::MatrixConstant { a11, a12, a22 } => a11 == 0.0 && a12 == 0.0 && a22 == 0.0,
        }
    }

    pub fn is_matrix(&self) -> bool {
        matches!(self, Diffusion::DiagSin2 { .. } | Diffusion::MatrixConstant { .. })
    }

    /// Scalar coefficient; for matrix fields the mean of the diagonal.
    pub fn scalar(&self, x: &Vector, dim: usize) -> f64 {
        match self {
            Diffusion::Zero => 0.0,
            Diffusion::Constant { a0 } => *a0,
            Diffusion::Sin2 { a0, phase } => {
                let mut v = *a0;
                for xd in x.iter().take(dim) {
                    v *= (PI * (xd - phase)).sin().powi(2);
                }
                v
            }
            _ => {
                let a = self.matrix(x, dim);
                (a[0][0] + a[1][1]) / 2.0
            }
        }
    }

    /// Full diffusion matrix; scalar fields give `a(x) I`.
    pub fn matrix(&self, x: &Vector, dim: usize) -> [[f64; MAX_DIM]; MAX_DIM] {
        match self {
            Diffusion::DiagSin2 { a1, a2 } => [
                [a1 * (PI * x[0]).sin().powi(2), 0.0],
                [0.0, a2 * (PI * x[1]).sin().powi(2)],
            ],
            Diffusion::MatrixConstant { a11, a12, a22 } => [[*a11, *a12], [*a12, *a22]],
            _ => {
                let a = self.scalar(x, dim);
                let second = if dim > 1 { a } else { 0.0 };
                [[a, 0.0], [0.0, second]]
            }
        }
    }

    /// Gradient of the scalar coefficient.
    pub fn scalar_grad(&self, x: &Vector, dim: usize) -> Vector {
        let mut g = [0.0; MAX_DIM];
        if let Diffusion::Sin2 { a0, phase } = self {
            for (d, gd) in g.iter_mut().enumerate().take(dim) {
                let mut v = *a0 * PI * (2.0 * PI * (x[d] - phase)).sin();
                for (e, xe) in x.iter().enumerate().take(dim) {
                    if e != d {
                        v *= (PI * (xe - phase)).sin().powi(2);
                    }
                }
                *gd = v;
            }
        }
        g
    }

    /// Largest eigenvalue of `A(x)` over the grid.
    pub fn max_eigenvalue(&self, grid: &TorusGrid) -> f64 {
        (0..grid.len())
            .map(|i| eigenvalues(&self.matrix(&grid.point(i), grid.dim()), grid.dim()).1)
            .fold(0.0, f64::max)
    }
}

/// Eigenvalues `(min, max)` of a symmetric matrix in `dim` dimensions.
pub fn eigenvalues(a: &[[f64; MAX_DIM]; MAX_DIM], dim: usize) -> (f64, f64) {
    if dim == 1 {
        return (a[0][0], a[0][0]);
    }
    let tr = a[0][0] + a[1][1];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let disc = ((tr * tr / 4.0) - det).max(0.0).sqrt();
    (tr / 2.0 - disc, tr / 2.0 + disc)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Power,
    Quadratic,
}

/// Hamiltonian, diffusion and growth constants of one model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub dim: usize,
    pub family: Family,
    pub m: f64,
    pub c0: f64,
    pub c_shift: f64,
    pub potential: TrigPoly,
    pub drift: Drift,
    pub diffusion: Diffusion,
}

fn vnorm(p: &Vector) -> f64 {
    p[0].hypot(p[1])
}

fn dot(a: &Vector, b: &Vector) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

impl ModelSpec {
    /// `H = |p|^m/m` with no potential, drift or diffusion.
    pub fn power(dim: usize, m: f64) -> Result<Self> {
        let spec = Self {
            dim,
            family: if m == 2.0 {
                Family::Quadratic
            } else {
                Family::Power
            },
            m,
            c0: 10.0,
            c_shift: 0.0,
            potential: TrigPoly::zero(),
            drift: Drift::Zero,
            diffusion: Diffusion::Zero,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `H = |p|^2/2 + cos(2π x)` in one dimension, shifted so the ergodic
    /// constant vanishes.
    pub fn eikonal_1d() -> Self {
        Self::power(1, 2.0)
            .expect("valid")
            .with_potential(TrigPoly::cosine(1, -1.0, 1))
            .with_c_shift(-1.0)
    }

    pub fn with_potential(mut self, v: TrigPoly) -> Self {
        self.potential = v;
        self
    }

    pub fn with_drift(mut self, b: Drift) -> Self {
        self.drift = b;
        self
    }

    pub fn with_diffusion(mut self, a: Diffusion) -> Self {
        self.diffusion = a;
        self
    }

    pub fn with_c_shift(mut self, c: f64) -> Self {
        self.c_shift = c;
        self
    }

    pub fn with_c0(mut self, c0: f64) -> Self {
        self.c0 = c0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_DIM).contains(&self.dim) {
            return Err(Error::Config(format!("dimension {} unsupported", self.dim)));
        }
        if !(self.m > 1.0 && self.m.is_finite()) {
            return Err(Error::Config(format!("m must exceed 1, got {}", self.m)));
        }
        if self.family == Family::Quadratic && self.m != 2.0 {
            return Err(Error::Config("family \"quadratic\" requires m = 2".into()));
        }
        if !(self.c0 > 0.0) {
            return Err(Error::Config(format!("C0 must be positive, got {}", self.c0)));
        }
        if self.diffusion.is_matrix() && self.dim != 2 {
            return Err(Error::Config(
                "matrix diffusion requires a two-dimensional grid".into(),
            ));
        }
        Ok(())
    }

    /// Conjugate exponent `m' = m/(m-1)`.
    pub fn m_conj(&self) -> f64 {
        self.m / (self.m - 1.0)
    }

    pub fn potential_at(&self, x: &Vector) -> f64 {
        self.potential.eval(x)
    }

    pub fn hamiltonian(&self, x: &Vector, p: &Vector) -> f64 {
        let b = self.drift.eval(x);
        vnorm(p).powf(self.m) / self.m + dot(&b, p) - self.potential.eval(x) + self.c_shift
    }

    /// `D_p H(x,p) = |p|^{m-2} p + b(x)`.
    pub fn dp_hamiltonian(&self, x: &Vector, p: &Vector) -> Vector {
        let b = self.drift.eval(x);
        let r = vnorm(p);
        let s = if r > 0.0 { r.powf(self.m - 2.0) } else { 0.0 };
        [s * p[0] + b[0], s * p[1] + b[1]]
    }

    /// `D_x H(x,p) = (Db)^T p - DV(x)`.
    pub fn dx_hamiltonian(&self, x: &Vector, p: &Vector) -> Vector {
        let jb = self.drift.jacobian(x);
        let gv = self.potential.grad(x);
        let mut g = [0.0; MAX_DIM];
        for (j, gj) in g.iter_mut().enumerate() {
            *gj = jb[0][j] * p[0] + jb[1][j] * p[1] - gv[j];
        }
        g
    }

    pub fn lagrangian(&self, x: &Vector, q: &Vector) -> f64 {
        let b = self.drift.eval(x);
        let r = vnorm(&[q[0] - b[0], q[1] - b[1]]);
        let mc = self.m_conj();
        r.powf(mc) / mc + self.potential.eval(x) - self.c_shift
    }

    /// `D_q L(x,q) = |q-b|^{m'-2} (q-b)`, the inverse of `D_p H`.
    pub fn dq_lagrangian(&self, x: &Vector, q: &Vector) -> Vector {
        let b = self.drift.eval(x);
        let w = [q[0] - b[0], q[1] - b[1]];
        let r = vnorm(&w);
        let s = if r > 0.0 {
            r.powf(self.m_conj() - 2.0)
        } else {
            0.0
        };
        [s * w[0], s * w[1]]
    }

    /// Largest `|D_p H|` over `|p| <= p_bound` on the grid.
    pub fn max_dp_hamiltonian(&self, grid: &TorusGrid, p_bound: f64) -> f64 {
        let bmax = (0..grid.len())
            .map(|i| vnorm(&self.drift.eval(&grid.point(i))))
            .fold(0.0, f64::max);
        p_bound.powf(self.m - 1.0) + bmax
    }

    pub fn max_diffusion(&self, grid: &TorusGrid) -> f64 {
        self.diffusion.max_eigenvalue(grid)
    }
}

/// Result of a brute-force Legendre transform.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NumericLegendre {
    pub value: f64,
    pub maximizer: Vector,
    /// The maximizer sits on the boundary of the search box.
    pub on_boundary: bool,
}

/// `max_p (p·q - H(x,p))` over a uniform `p`-lattice of `n_p` points per axis in `[-p_max, p_max]^dim`.
pub fn legendre_numeric(
    model: &ModelSpec,
    x: &Vector,
    q: &Vector,
    p_max: f64,
    n_p: usize,
) -> Result<NumericLegendre> {
    if n_p < 3 || !(p_max > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "legendre lattice needs n_p >= 3 and p_max > 0 (got {n_p}, {p_max})"
        )));
    }
    let dp = 2.0 * p_max / (n_p - 1) as f64;
    let second = if model.dim == 2 { n_p } else { 1 };
    let mut best = NumericLegendre {
        value: f64::NEG_INFINITY,
        maximizer: [0.0; MAX_DIM],
        on_boundary: false,
    };
    let mut best_idx = [0usize; 2];
    for j in 0..second {
        for i in 0..n_p {
            let p = [
                -p_max + i as f64 * dp,
                if model.dim == 2 {
                    -p_max + j as f64 * dp
                } else {
                    0.0
                },
            ];
            let v = dot(&p, q) - model.hamiltonian(x, &p);
            if v > best.value {
                best.value = v;
                best.maximizer = p;
                best_idx = [i, j];
            }
        }
    }
    let edge = |k: usize| k == 0 || k == n_p - 1;
    best.on_boundary = edge(best_idx[0]) || (model.dim == 2 && edge(best_idx[1]));
    Ok(best)
}

/// Worst sampled margins of the growth inequalities and diffusion positivity.
#[derive(Clone, Debug, Serialize)]
pub struct AssumptionReport {
    pub valid: bool,
    /// `min (H - |p|^m/C0 + C0)`.
    pub lower_growth_margin: f64,
    /// `min (C0(1+|p|^m) - H)`.
    pub upper_growth_margin: f64,
    /// `min (C0(1+|p|^m) - |D_x H|)`.
    pub dx_margin: f64,
    /// `min (C0(1+|p|^{m-1}) - |D_p H|)`.
    pub dp_margin: f64,
    /// Smallest eigenvalue of the diffusion over the grid.
    pub min_diffusion_eigenvalue: f64,
    pub degenerate_nodes: Vec<usize>,
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

/// Samples every grid node against `p_samples` momenta per axis with `|p|_inf <= 10`.
pub fn check_assumptions(
    model: &ModelSpec,
    grid: &TorusGrid,
    p_samples: usize,
) -> Result<AssumptionReport> {
    model.validate()?;
    if grid.dim() != model.dim {
        return Err(Error::GridMismatch(format!(
            "model dimension {} vs grid dimension {}",
            model.dim,
            grid.dim()
        )));
    }
    let p_samples = p_samples.max(3);
    let c0 = model.c0;
    let m = model.m;
    let mut report = AssumptionReport {
        valid: true,
        lower_growth_margin: f64::INFINITY,
        upper_growth_margin: f64::INFINITY,
        dx_margin: f64::INFINITY,
        dp_margin: f64::INFINITY,
        min_diffusion_eigenvalue: f64::INFINITY,
        degenerate_nodes: Vec::new(),
        violations: Vec::new(),
        warnings: Vec::new(),
    };
    let mut worst_loc: [Option<(usize, Vector)>; 4] = [None; 4];
    let dp = 20.0 / (p_samples - 1) as f64;
    let second = if model.dim == 2 { p_samples } else { 1 };
    for node in 0..grid.len() {
        let x = grid.point(node);
        for j in 0..second {
            for i in 0..p_samples {
                let p = [
                    -10.0 + i as f64 * dp,
                    if model.dim == 2 {
                        -10.0 + j as f64 * dp
                    } else {
                        0.0
                    },
                ];
                let r = vnorm(&p);
                let h = model.hamiltonian(&x, &p);
                let margins = [
                    h - r.powf(m) / c0 + c0,
                    c0 * (1.0 + r.powf(m)) - h,
                    c0 * (1.0 + r.powf(m)) - vnorm(&model.dx_hamiltonian(&x, &p)),
                    c0 * (1.0 + r.powf(m - 1.0)) - vnorm(&model.dp_hamiltonian(&x, &p)),
                ];
                let slots = [
                    &mut report.lower_growth_margin,
                    &mut report.upper_growth_margin,
                    &mut report.dx_margin,
                    &mut report.dp_margin,
                ];
                for (k, (slot, v)) in slots.into_iter().zip(margins).enumerate() {
                    if v < *slot {
                        *slot = v;
                        worst_loc[k] = Some((node, p));
                    }
                }
            }
        }
        let (lo, _) = eigenvalues(&model.diffusion.matrix(&x, model.dim), model.dim);
        report.min_diffusion_eigenvalue = report.min_diffusion_eigenvalue.min(lo);
        if lo < -1e-14 {
            report
                .violations
                .push(format!("diffusion has negative eigenvalue {lo:e} at node {node}"));
        } else if lo.abs() <= 1e-14 {
            report.degenerate_nodes.push(node);
        }
    }
    let names = ["lower growth", "upper growth", "|D_x H| bound", "|D_p H| bound"];
    let margins = [
        report.lower_growth_margin,
        report.upper_growth_margin,
        report.dx_margin,
        report.dp_margin,
    ];
    for k in 0..4 {
        if margins[k] < 0.0 {
            let (node, p) = worst_loc[k].expect("sampled");
            report.violations.push(format!(
                "{} fails by {:.3e} at node {} (x = {:?}), p = {:?}",
                names[k],
                -margins[k],
                node,
                grid.point(node),
                p
            ));
        }
    }
    if model.m > 2.0 {
        report
            .warnings
            .push("D²_pp H vanishes at p = 0 for m > 2 (convexity and coercivity still hold)".into());
    }
    if model.m < 2.0 {
        report
            .warnings
            .push("D²_pp H is unbounded at p = 0 for m < 2".into());
    }
    if !report.degenerate_nodes.is_empty() {
        report.warnings.push(format!(
            "diffusion degenerates at {} node(s), first at node {}",
            report.degenerate_nodes.len(),
            report.degenerate_nodes[0]
        ));
    }
    report.valid = report.violations.is_empty();
    Ok(report)
}
