//! Regularizations of Lipschitz solutions: space-time mollification with its
//! `Cα^{1/2}` subsolution defect, sup/inf convolutions with the semiconvexity
//! and semiconcavity bounds of the double convolution, and the explicit
//! constants `δ₀` and `κ` of the matrix-diffusion approximation.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, TorusGrid, Vector, MAX_DIM};
use crate::model::ModelSpec;
use crate::pde::Trajectory;
use crate::stencil::SecondOrderOperator;

fn bump(r: f64) -> f64 {
    if r.abs() < 1.0 {
        (-1.0 / (1.0 - r * r)).exp()
    } else {
        0.0
    }
}

fn bump_derivative(r: f64) -> f64 {
    if r.abs() < 1.0 {
        let d = 1.0 - r * r;
        -2.0 * r / (d * d) * bump(r)
    } else {
        0.0
    }
}

/// Radially symmetric bump of radius `alpha` in space and an even bump of
/// radius `alpha` in time.
#[derive(Clone, Debug, PartialEq)]
pub struct MollifierSpec {
    pub alpha: f64,
}

/// Discrete space kernel: offsets and weights summing to one.
#[derive(Clone, Debug)]
pub struct SpaceKernel {
    pub offsets: Vec<[isize; MAX_DIM]>,
    pub weights: Vec<f64>,
}

impl MollifierSpec {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
        }
        Ok(Self { alpha })
    }

    /// Kernel on the grid nodes strictly inside the ball of radius `alpha`.
    pub fn space_kernel(&self, grid: &TorusGrid) -> Result<SpaceKernel> {
        let h = grid.spacing();
        if self.alpha < 2.0 * h * (1.0 - 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "alpha = {} is below two grid spacings ({})",
                self.alpha,
                2.0 * h
            )));
        }
        let m = (self.alpha / h).ceil() as isize;
        let m2 = if grid.dim() == 2 { m } else { 0 };
        if 2 * m + 1 > grid.n_per_dim() as isize {
            return Err(Error::InvalidArgument("mollifier wider than the torus".into()));
        }
        let mut offsets = Vec::new();
        let mut weights = Vec::new();
        for k2 in -m2..=m2 {
            for k1 in -m..=m {
                let r2 = ((k1 * k1 + k2 * k2) as f64) * h * h / (self.alpha * self.alpha);
                let w = bump(r2.sqrt());
                if w > 0.0 {
                    offsets.push([k1, k2]);
                    weights.push(w);
                }
            }
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        Ok(SpaceKernel { offsets, weights })
    }

    /// Midpoint nodes `s_j` in `(-alpha, alpha)` with weights for `ρ^α` and
    /// for its derivative.
    fn time_rule(&self, m: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let ds = 2.0 * self.alpha / m as f64;
        let s: Vec<f64> = (0..m).map(|j| -self.alpha + (j as f64 + 0.5) * ds).collect();
        let raw: Vec<f64> = s.iter().map(|v| bump(v / self.alpha)).collect();
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|v| v / total).collect();
        // ρ^α'(s) ds with the same normalization
        let dw: Vec<f64> = s
            .iter()
            .map(|v| bump_derivative(v / self.alpha) / (self.alpha * total))
            .collect();
        (s, w, dw)
    }
}

/// Periodic spatial convolution with the discrete kernel.
pub fn mollify_space(w: &GridFunction, spec: &MollifierSpec) -> Result<GridFunction> {
    let grid = *w.grid();
    let kernel = spec.space_kernel(&grid)?;
    Ok(GridFunction::from_vec_unchecked(grid, convolve(&grid, w.values(), &kernel)))
}

fn convolve(grid: &TorusGrid, v: &[f64], kernel: &SpaceKernel) -> Vec<f64> {
    (0..grid.len())
        .into_par_iter()
        .with_min_len(256)
        .map(|i| {
            kernel
                .offsets
                .iter()
                .zip(&kernel.weights)
                .map(|(o, k)| k * v[grid.offset(i, [-o[0], -o[1]])])
                .sum()
        })
        .collect()
}

/// Piecewise-linear value of a trajectory at time `t`.
fn interpolate(traj: &Trajectory, t: f64, out: &mut [f64]) {
    let times = &traj.times;
    let k = match times.binary_search_by(|s| s.partial_cmp(&t).expect("finite")) {
        Ok(k) => {
            out.copy_from_slice(traj.fields[k].values());
            return;
        }
        Err(k) => k.clamp(1, times.len() - 1),
    };
    let (t0, t1) = (times[k - 1], times[k]);
    let l = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
    let a = traj.fields[k - 1].values();
    let b = traj.fields[k].values();
    for (o, (x, y)) in out.iter_mut().zip(a.iter().zip(b)) {
        *o = (1.0 - l) * x + l * y;
    }
}

/// Mollified levels `w^α(t)` and `∂_t w^α(t)`.
#[derive(Clone, Debug)]
pub struct MollifiedTrajectory {
    pub alpha: f64,
    pub times: Vec<f64>,
    pub values: Vec<GridFunction>,
    pub time_derivative: Vec<GridFunction>,
}

/// `w^α(x,t) = ∫∫ ρ^α(s) θ^α(y) w(x-y, t-s) dy ds` at the requested times,
/// which must lie in `[α, T - α]`. The time integral runs over the full
/// support of the even kernel; `w̃(x,t) = w^α(x,t+α)` is the same data on
/// shifted times.
pub fn mollify_spacetime(
    traj: &Trajectory,
    spec: &MollifierSpec,
    times: &[f64],
) -> Result<MollifiedTrajectory> {
    let grid = *traj.grid();
    let kernel = spec.space_kernel(&grid)?;
    let t_end = *traj.times.last().expect("nonempty");
    let a = spec.alpha;
    if times.iter().any(|&t| t < a * (1.0 - 1e-12) || t > t_end - a * (1.0 - 1e-12)) {
        return Err(Error::InvalidArgument(format!(
            "mollified times must lie in [{a}, {}]",
            t_end - a
        )));
    }
    let mean_dt = t_end / (traj.times.len() - 1).max(1) as f64;
    let m = ((32.0 * a / mean_dt).ceil() as usize).clamp(64, 8192);
    let (s, w, dw) = spec.time_rule(m);
    let n = grid.len();
    let mut values = Vec::with_capacity(times.len());
    let mut derivs = Vec::with_capacity(times.len());
    let mut buf = vec![0.0; n];
    for &t in times {
        let mut acc = vec![0.0; n];
        let mut dacc = vec![0.0; n];
        let mut centre = vec![0.0; n];
        interpolate(traj, t, &mut centre);
        for j in 0..m {
            interpolate(traj, t - s[j], &mut buf);
            for i in 0..n {
                acc[i] += w[j] * buf[i];
                // ∂_t ∫ρ(s) w(t-s) ds = ∫ρ'(s) w(t-s) ds, centred for accuracy
                dacc[i] += dw[j] * (buf[i] - centre[i]);
            }
        }
        values.push(GridFunction::from_vec_unchecked(grid, convolve(&grid, &acc, &kernel)));
        derivs.push(GridFunction::from_vec_unchecked(grid, convolve(&grid, &dacc, &kernel)));
    }
    Ok(MollifiedTrajectory {
        alpha: a,
        times: times.to_vec(),
        values,
        time_derivative: derivs,
    })
}

/// `w̃(x,t) = w^α(x,t+α)` for `t` in `[0, T - 2α]`.
pub fn mollify_shifted(traj: &Trajectory, spec: &MollifierSpec, times: &[f64]) -> Result<MollifiedTrajectory> {
    let shifted: Vec<f64> = times.iter().map(|t| t + spec.alpha).collect();
    let mut out = mollify_spacetime(traj, spec, &shifted)?;
    out.times = times.to_vec();
    Ok(out)
}

/// Centered gradient at node `i`.
pub fn centered_gradient(grid: &TorusGrid, v: &[f64], i: usize) -> Vector {
    let h = grid.spacing();
    let mut p = [0.0; MAX_DIM];
    for d in 0..grid.dim() {
        p[d] = (v[grid.shift(i, d, 1)] - v[grid.shift(i, d, -1)]) / (2.0 * h);
    }
    p
}

/// `w_t - Sw + H(x, Dw)` at every node, with `S` the second-order operator
/// of the model plus `extra` times the Laplacian.
pub fn pointwise_residual(
    model: &ModelSpec,
    op: &SecondOrderOperator,
    w: &[f64],
    w_t: &[f64],
) -> Vec<f64> {
    let grid = *op.grid();
    (0..grid.len())
        .into_par_iter()
        .with_min_len(256)
        .map(|i| w_t[i] - op.apply_at(w, i) + model.hamiltonian(&grid.point(i), &centered_gradient(&grid, w, i)))
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanRow {
    pub alpha: f64,
    /// Largest residual over nodes and sampled times.
    pub residual: f64,
    /// Smallest residual, for the sign check.
    pub min_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanReport {
    pub rows: Vec<ScanRow>,
    /// Residual level attributed to the discretization; see
    /// [`scheme_floor`].
    pub floor: f64,
    /// Least-squares slope of `log r` against `log α` over the rows with
    /// `r > 10·floor`; `None` when fewer than two rows qualify.
    pub exponent: Option<f64>,
}

/// Discretization floor of the residual scan: first-order consistency
/// `h (1 + L)^2` of the underlying scheme, with `L` the axis Lipschitz
/// constant of the last level.
pub fn scheme_floor(traj: &Trajectory) -> f64 {
    let l = traj.last().axis_lipschitz();
    traj.grid().spacing() * (1.0 + l) * (1.0 + l)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn fit_exponent(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / lx.len() as f64;
    let my = ly.iter().sum::<f64>() / ly.len() as f64;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Residual `w^α_t - aΔw^α + H(x, Dw^α)` of the mollified solution over
/// `samples` equally spaced times in `[α, T - α]`, for each `α`.
pub fn subsolution_residual_scan(
    model: &ModelSpec,
    traj: &Trajectory,
    alphas: &[f64],
    samples: usize,
) -> Result<ScanReport> {
    if alphas.is_empty() || samples == 0 {
        return Err(Error::InvalidArgument("need at least one alpha and one sample time".into()));
    }
    let grid = *traj.grid();
    let op = SecondOrderOperator::new(model, &grid, 0.0)?;
    let t_end = *traj.times.last().expect("nonempty");
    let rows: Vec<ScanRow> = alphas
        .iter()
        .map(|&alpha| {
            let spec = MollifierSpec::new(alpha)?;
            if t_end <= 2.0 * alpha {
                return Err(Error::InvalidArgument(format!(
                    "horizon {t_end} too short for alpha = {alpha}"
                )));
            }
            let times: Vec<f64> = (0..samples)
                .map(|j| {
                    if samples == 1 {
                        0.5 * t_end
                    } else {
                        alpha + (t_end - 2.0 * alpha) * j as f64 / (samples - 1) as f64
                    }
                })
                .collect();
            let mt = mollify_spacetime(traj, &spec, &times)?;
            let mut hi = f64::NEG_INFINITY;
            let mut lo = f64::INFINITY;
            for (v, vt) in mt.values.iter().zip(&mt.time_derivative) {
                for r in pointwise_residual(model, &op, v.values(), vt.values()) {
                    hi = hi.max(r);
                    lo = lo.min(r);
                }
            }
            Ok(ScanRow {
                alpha,
                residual: hi,
                min_residual: lo,
            })
        })
        .collect::<Result<_>>()?;
    let floor = scheme_floor(traj);
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.residual > 10.0 * floor)
        .map(|r| (r.alpha, r.residual))
        .unzip();
    Ok(ScanReport {
        exponent: fit_exponent(&xs, &ys),
        rows,
        floor,
    })
}

fn lipschitz_radius(w: &GridFunction, eps: f64) -> f64 {
    let grid = w.grid();
    let l = w.axis_lipschitz() * (grid.dim() as f64).sqrt();
    2.0 * l * eps + 2.0 * grid.spacing()
}

fn ball(grid: &TorusGrid, radius: f64) -> Vec<([isize; MAX_DIM], f64)> {
    let h = grid.spacing();
    let half = (grid.n_per_dim() / 2) as isize;
    let m = ((radius / h).ceil() as isize).min(half);
    let m2 = if grid.dim() == 2 { m } else { 0 };
    let mut out = Vec::new();
    for k2 in -m2..=m2 {
        for k1 in -m..=m {
            let d2 = ((k1 * k1 + k2 * k2) as f64) * h * h;
            if d2 <= radius * radius * (1.0 + 1e-12) {
                out.push(([k1, k2], d2));
            }
        }
    }
    out
}

/// `w^ε(x) = max_y [w(y) - |x-y|²/(2ε)]` over the nodes within
/// `2Lε + 2h` of `x`, which contains every maximizer.
pub fn sup_convolution(w: &GridFunction, eps: f64) -> Result<GridFunction> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let grid = *w.grid();
    let nb = ball(&grid, lipschitz_radius(w, eps));
    let v = w.values();
    let out = (0..grid.len())
        .into_par_iter()
        .with_min_len(64)
        .map(|i| {
            nb.iter()
                .map(|(o, d2)| v[grid.offset(i, *o)] - d2 / (2.0 * eps))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    Ok(GridFunction::from_vec_unchecked(grid, out))
}

/// `w_δ(x) = min_y [w(y) + |x-y|²/(2δ)]`.
pub fn inf_convolution(w: &GridFunction, delta: f64) -> Result<GridFunction> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    Ok(sup_convolution(&w.scaled(-1.0), delta)?.scaled(-1.0))
}

#[derive(Clone, Debug, Serialize)]
pub struct HessianAudit {
    pub eps: f64,
    pub delta: f64,
    /// Smallest second difference over nodes, axes and diagonals.
    pub min_second_difference: f64,
    pub max_second_difference: f64,
    /// Slack allowed beyond `-1/ε` and `1/δ`.
    pub slack: f64,
    pub worst_node: usize,
    pub passed: bool,
}

/// Second differences `(v(x+he) - 2v(x) + v(x-he)) / |he|²` along the axes
/// and, in two dimensions, both diagonals; returns `(min, argmin, max, argmax)`.
pub fn second_difference_range(v: &GridFunction) -> (f64, usize, f64, usize) {
    let grid = *v.grid();
    let h = grid.spacing();
    let mut dirs: Vec<[isize; MAX_DIM]> = vec![[1, 0]];
    if grid.dim() == 2 {
        dirs.extend([[0, 1], [1, 1], [1, -1]]);
    }
    let x = v.values();
    let mut lo = (f64::INFINITY, 0);
    let mut hi = (f64::NEG_INFINITY, 0);
    for i in 0..grid.len() {
        for d in &dirs {
            let len2 = ((d[0] * d[0] + d[1] * d[1]) as f64) * h * h;
            let s = (x[grid.offset(i, *d)] - 2.0 * x[i] + x[grid.offset(i, [-d[0], -d[1]])]) / len2;
            if s < lo.0 {
                lo = (s, i);
            }
            if s > hi.0 {
                hi = (s, i);
            }
        }
    }
    (lo.0, lo.1, hi.0, hi.1)
}

/// `min_y a|y|²/2 + max_{j∈S} (l_j·y + c_j)` by enumerating supports of at
/// most `dim + 1` active pieces and checking the KKT conditions.
fn restricted_min(a: f64, l: &[Vector], c: &[f64], dim: usize) -> Option<(f64, Vector)> {
    let k = l.len();
    let mut best: Option<(f64, Vector)> = None;
    let mut support = Vec::with_capacity(dim + 1);
    let try_support = |t: &[usize]| {
        // unknowns: y (dim), t, μ (|T|)
        let m = dim + 1 + t.len();
        let mut mat = DMatrix::<f64>::zeros(m, m);
        let mut rhs = DVector::<f64>::zeros(m);
        for d in 0..dim {
            mat[(d, d)] = a;
            for (j, &z) in t.iter().enumerate() {
                mat[(d, dim + 1 + j)] = l[z][d];
            }
        }
        for (j, &z) in t.iter().enumerate() {
            let r = dim + j;
            for d in 0..dim {
                mat[(r, d)] = l[z][d];
            }
            mat[(r, dim)] = -1.0;
            rhs[r] = -c[z];
        }
        let last = dim + t.len();
        for j in 0..t.len() {
            mat[(last, dim + 1 + j)] = 1.0;
        }
        rhs[last] = 1.0;
        let x = mat.lu().solve(&rhs)?;
        if (0..t.len()).any(|j| x[dim + 1 + j] < -1e-10) {
            return None;
        }
        let mut y = [0.0; MAX_DIM];
        y[..dim].copy_from_slice(&x.as_slice()[..dim]);
        let top = (0..k)
            .map(|z| (0..dim).map(|d| l[z][d] * y[d]).sum::<f64>() + c[z])
            .fold(f64::NEG_INFINITY, f64::max);
        let scale = 1.0 + x[dim].abs();
        (top <= x[dim] + 1e-11 * scale).then(|| (0.5 * a * (y[0] * y[0] + y[1] * y[1]) + top, y))
    };
    let visit = |t: &[usize], best: &mut Option<(f64, Vector)>| {
        if let Some(cand) = try_support(t) {
            if best.as_ref().map_or(true, |b| cand.0 < b.0) {
                *best = Some(cand);
            }
        }
    };
    for i in 0..k {
        support.clear();
        support.push(i);
        visit(&support, &mut best);
        for j in i + 1..k {
            support.truncate(1);
            support.push(j);
            visit(&support, &mut best);
            if dim == 2 {
                for q in j + 1..k {
                    support.truncate(2);
                    support.push(q);
                    visit(&support, &mut best);
                }
            }
        }
    }
    best
}

/// Continuum inf-convolution `min_{y∈T^n} [U(y) + |x-y|²/(2δ)]` of the
/// sup-convolution `U(y) = max_z [w(z) - |y-z|²/(2λ)]`, `δ < λ`, at every
/// node `x`. All pieces share the quadratic part, so the objective is a
/// strongly convex quadratic plus a max of affine functions; a cutting-plane
/// loop adds the most violated node until the restricted minimum is exact.
fn exact_double_convolution(w: &GridFunction, lambda: f64, delta: f64) -> Result<GridFunction> {
    let grid = *w.grid();
    let dim = grid.dim();
    let l_w = w.axis_lipschitz() * (dim as f64).sqrt();
    let radius = 2.0 * l_w * lambda + 2.0 * l_w * delta + 4.0 * grid.spacing();
    let nb = ball(&grid, radius);
    let a = 1.0 / delta - 1.0 / lambda;
    let h = grid.spacing();
    let v = w.values();
    let out: Vec<Option<f64>> = (0..grid.len())
        .into_par_iter()
        .with_min_len(16)
        .map(|i| {
            // coordinates relative to x; piece z: w(z) - |y-z|²/2λ + |y|²/2δ
            let piece = |o: &[isize; MAX_DIM]| -> (Vector, f64) {
                let z = [o[0] as f64 * h, o[1] as f64 * h];
                let lz = [z[0] / lambda, z[1] / lambda];
                (lz, v[grid.offset(i, *o)] - (z[0] * z[0] + z[1] * z[1]) / (2.0 * lambda))
            };
            let argmax = |y: &Vector| -> (usize, f64) {
                let mut best = (0, f64::NEG_INFINITY);
                for (j, (o, _)) in nb.iter().enumerate() {
                    let (lz, cz) = piece(o);
                    let val = lz[0] * y[0] + lz[1] * y[1] + cz;
                    if val > best.1 {
                        best = (j, val);
                    }
                }
                best
            };
            let mut active = vec![argmax(&[0.0; MAX_DIM]).0];
            for _ in 0..nb.len() {
                let (l, c): (Vec<Vector>, Vec<f64>) = active.iter().map(|&j| piece(&nb[j].0)).unzip();
                let (val, y) = restricted_min(a, &l, &c, dim)?;
                let (j, top) = argmax(&y);
                let restricted_top = val - 0.5 * a * (y[0] * y[0] + y[1] * y[1]);
                if top <= restricted_top + 1e-12 * (1.0 + top.abs()) || active.contains(&j) {
                    return Some(val);
                }
                active.push(j);
            }
            None
        })
        .collect();
    let values = out
        .into_iter()
        .collect::<Option<Vec<f64>>>()
        .ok_or_else(|| Error::Solver("double convolution: cutting-plane loop did not close".into()))?;
    Ok(GridFunction::from_vec_unchecked(grid, values))
}

/// `(w^{ε+δ})_δ` with the audit `-1/ε <= D²v <= 1/δ` on second differences.
/// The sup-convolution is taken over the nodes and the inf-convolution over
/// the continuum, so both bounds hold up to rounding. Fails with the worst
/// node when a bound is violated.
pub fn double_convolution(w: &GridFunction, eps: f64, delta: f64) -> Result<(GridFunction, HessianAudit)> {
    if !(eps > 0.0) || !(delta > 0.0) {
        return Err(Error::InvalidArgument("double convolution needs eps, delta > 0".into()));
    }
    let v = exact_double_convolution(w, eps + delta, delta)?;
    let (lo, lo_i, hi, hi_i) = second_difference_range(&v);
    let h = w.grid().spacing();
    let slack = 1e-9 * (1.0 + v.sup_norm()) / (h * h);
    let low_ok = lo >= -1.0 / eps - slack;
    let high_ok = hi <= 1.0 / delta + slack;
    let audit = HessianAudit {
        eps,
        delta,
        min_second_difference: lo,
        max_second_difference: hi,
        slack,
        worst_node: if low_ok { hi_i } else { lo_i },
        passed: low_ok && high_ok,
    };
    if !audit.passed {
        return Err(Error::Audit(format!(
            "second differences of the double convolution leave [-1/eps, 1/delta] at node {}: min {lo}, max {hi} (eps {eps}, delta {delta})",
            audit.worst_node
        )));
    }
    Ok((v, audit))
}

/// `δ₀ = εη / ((n-1)(Λ+η) + (L+C̄)ε)`.
pub fn delta0(eps: f64, eta: f64, l: f64, lambda: f64, c_bar: f64, n: usize) -> Result<f64> {
    if !(eps > 0.0) || !(eta > 0.0) {
        return Err(Error::InvalidArgument("delta0 needs eps > 0 and eta > 0".into()));
    }
    if !(lambda >= 0.0) || n == 0 {
        return Err(Error::InvalidArgument("delta0 needs Lambda >= 0 and n >= 1".into()));
    }
    Ok(eps * eta / ((n as f64 - 1.0) * (lambda + eta) + (l + c_bar) * eps))
}

/// `κ = ω(ε) + nη/ε + C max(1/ε, 1/δ) α`.
pub fn kappa(alpha: f64, eta: f64, delta: f64, eps: f64, c: f64, n: usize, omega_eps: f64) -> f64 {
    omega_eps + n as f64 * eta / eps + c * (1.0 / eps).max(1.0 / delta) * alpha
}

#[derive(Clone, Debug, Serialize)]
pub struct AppendixBReport {
    pub eps: f64,
    pub eta: f64,
    pub alpha: f64,
    pub delta: f64,
    pub delta0: f64,
    /// `L = ‖w_t‖∞ + ‖Dw‖∞` measured on the trajectory.
    pub lipschitz: f64,
    pub lambda: f64,
    pub c_bar: f64,
    /// Measured `ω(ε)`: residual of `w^ε` alone at `α = η = 0`.
    pub omega: f64,
    /// `n Lip(A) + Lip_x H min(ε, δ)`.
    pub c: f64,
    pub kappa: f64,
    pub residual: f64,
    /// Discretization allowance `h (1 + L)²` added to `κ` in the verdict.
    pub floor: f64,
    pub hessian: Vec<HessianAudit>,
    pub passed: bool,
}

/// `ω(ε)`: largest residual `w^ε_t - tr(A D²w^ε) + H(x, Dw^ε)` of the
/// sup-convolution alone (no mollification, no added viscosity), with
/// centered differences in time over interior levels.
fn epsilon_residual(model: &ModelSpec, eps_traj: &Trajectory) -> Result<f64> {
    let op = SecondOrderOperator::new(model, eps_traj.grid(), 0.0)?;
    let mut worst: f64 = 0.0;
    for k in 1..eps_traj.fields.len().saturating_sub(1) {
        let dt = eps_traj.times[k + 1] - eps_traj.times[k - 1];
        let prev = eps_traj.fields[k - 1].values();
        let next = eps_traj.fields[k + 1].values();
        let w_t: Vec<f64> = prev.iter().zip(next).map(|(a, b)| (b - a) / dt).collect();
        for r in pointwise_residual(model, &op, eps_traj.fields[k].values(), &w_t) {
            worst = worst.max(r);
        }
    }
    Ok(worst)
}

/// Time Lipschitz constant `max |w(t_{k+1}) - w(t_k)| / dt` and the space
/// constant `√n max_axis |Δw|/h` over the levels.
fn trajectory_lipschitz(traj: &Trajectory) -> (f64, f64) {
    let mut lt: f64 = 0.0;
    let mut lx: f64 = 0.0;
    for k in 0..traj.fields.len() {
        lx = lx.max(traj.fields[k].axis_lipschitz());
        if k + 1 < traj.fields.len() {
            let dt = traj.times[k + 1] - traj.times[k];
            lt = lt.max(traj.fields[k + 1].sup_distance(&traj.fields[k]) / dt);
        }
    }
    (lt, lx * (traj.grid().dim() as f64).sqrt())
}

fn diffusion_lipschitz(model: &ModelSpec, grid: &TorusGrid) -> f64 {
    // finite differences of the matrix entries on the grid
    let h = grid.spacing();
    let dim = grid.dim();
    let mut best: f64 = 0.0;
    for i in 0..grid.len() {
        let a = model.diffusion.matrix(&grid.point(i), dim);
        for d in 0..dim {
            let b = model.diffusion.matrix(&grid.point(grid.shift(i, d, 1)), dim);
            for r in 0..dim {
                for c in 0..dim {
                    best = best.max((b[r][c] - a[r][c]).abs() / h);
                }
            }
        }
    }
    best
}

fn hamiltonian_bounds(model: &ModelSpec, grid: &TorusGrid, p_max: f64) -> (f64, f64) {
    // C̄ = max_{|p| <= p_max} H and Lip_x H on the same ball, sampled
    let dim = grid.dim();
    let k = 16;
    let mut c_bar = f64::NEG_INFINITY;
    let mut lip: f64 = 0.0;
    let radii: Vec<f64> = (0..=k).map(|j| p_max * j as f64 / k as f64).collect();
    let angles = if dim == 2 { 16 } else { 2 };
    for i in 0..grid.len() {
        let x = grid.point(i);
        for &r in &radii {
            for a in 0..angles {
                let p = if dim == 2 {
                    let th = 2.0 * std::f64::consts::PI * a as f64 / angles as f64;
                    [r * th.cos(), r * th.sin()]
                } else {
                    [if a == 0 { r } else { -r }, 0.0]
                };
                c_bar = c_bar.max(model.hamiltonian(&x, &p));
                let g = model.dx_hamiltonian(&x, &p);
                lip = lip.max(g[0].hypot(g[1]));
            }
        }
    }
    (c_bar, lip)
}

/// Regularizes `w` into `w^{α,ε,δ}` (double convolution per level, then
/// space-time mollification) and evaluates the residual of the equation
/// with added viscosity `η`, `W_t - ηΔW - tr(A D²W) + H(x, DW)`, against `κ`.
/// `δ = delta_factor · δ₀`; the estimate needs `delta_factor <= 1` and
/// `0.9` is the customary choice.
pub fn appendix_b_subsolution_audit(
    model: &ModelSpec,
    traj: &Trajectory,
    eps: f64,
    eta: f64,
    alpha: f64,
    delta_factor: f64,
    samples: usize,
) -> Result<AppendixBReport> {
    if !(delta_factor > 0.0) {
        return Err(Error::InvalidArgument("delta_factor must be positive".into()));
    }
    let grid = *traj.grid();
    let n = grid.dim();
    let (lt, lx) = trajectory_lipschitz(traj);
    let l = lt + lx;
    let lambda = model.diffusion.max_eigenvalue(&grid);
    let (c_bar, lip_x_h) = hamiltonian_bounds(model, &grid, 2.0 * l);
    let d0 = delta0(eps, eta, l, lambda, c_bar, n)?;
    let delta = delta_factor * d0;
    let mut hessian = Vec::with_capacity(traj.fields.len());
    let mut regular = Vec::with_capacity(traj.fields.len());
    let mut sup_only = Vec::with_capacity(traj.fields.len());
    for f in &traj.fields {
        let (v, audit) = double_convolution(f, eps, delta)?;
        regular.push(v);
        hessian.push(audit);
        sup_only.push(sup_convolution(f, eps)?);
    }
    let smooth = Trajectory {
        fields: regular,
        ..traj.clone()
    };
    let eps_traj = Trajectory {
        fields: sup_only,
        ..traj.clone()
    };
    let t_end = *traj.times.last().expect("nonempty");
    if t_end <= 2.0 * alpha {
        return Err(Error::InvalidArgument(format!("horizon {t_end} too short for alpha = {alpha}")));
    }
    let times: Vec<f64> = (0..samples.max(1))
        .map(|j| alpha + (t_end - 2.0 * alpha) * (j as f64 + 0.5) / samples.max(1) as f64)
        .collect();
    let spec = MollifierSpec::new(alpha)?;
    let op_eta = SecondOrderOperator::new(model, &grid, eta)?;
    let mt = mollify_spacetime(&smooth, &spec, &times)?;
    let residual = mt
        .values
        .iter()
        .zip(&mt.time_derivative)
        .flat_map(|(v, vt)| pointwise_residual(model, &op_eta, v.values(), vt.values()))
        .fold(f64::NEG_INFINITY, f64::max);
    let omega = epsilon_residual(model, &eps_traj)?;
    let c = n as f64 * diffusion_lipschitz(model, &grid) + lip_x_h * eps.min(delta);
    let k = kappa(alpha, eta, delta, eps, c, n, omega);
    let floor = grid.spacing() * (1.0 + l) * (1.0 + l);
    Ok(AppendixBReport {
        eps,
        eta,
        alpha,
        delta,
        delta0: d0,
        lipschitz: l,
        lambda,
        c_bar,
        omega,
        c,
        kappa: k,
        residual,
        floor,
        passed: residual <= k + floor,
        hessian,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Diffusion;
    use crate::pde::{solve_cauchy, SolveConfig};
    use std::f64::consts::PI;

    #[test]
    fn delta0_closed_form() {
        assert!((delta0(1.0, 1.0, 1.0, 0.0, 1.0, 1).unwrap() - 0.5).abs() < 1e-15);
        let d = delta0(0.05, 0.01, 2.0, 1.0, 3.0, 2).unwrap();
        let expected = 0.05 * 0.01 / (1.01 + 5.0 * 0.05);
        assert!((d - expected).abs() < 1e-15);
        assert!(delta0(0.0, 1.0, 1.0, 0.0, 1.0, 1).is_err());
    }

    #[test]
    fn kappa_terms() {
        assert_eq!(kappa(0.0, 0.0, 0.1, 0.2, 5.0, 2, 0.3), 0.3);
        let k1 = kappa(0.01, 0.0, 0.1, 0.2, 5.0, 2, 0.0);
        let k2 = kappa(0.02, 0.0, 0.1, 0.2, 5.0, 2, 0.0);
        assert!((k2 - 2.0 * k1).abs() < 1e-15);
        assert!((kappa(0.0, 0.01, 0.1, 0.2, 5.0, 2, 0.0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn kernel_is_symmetric_and_normalized() {
        let grid = TorusGrid::new(2, 32).unwrap();
        let k = MollifierSpec::new(0.1).unwrap().space_kernel(&grid).unwrap();
        assert!((k.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
        for (o, w) in k.offsets.iter().zip(&k.weights) {
            let j = k.offsets.iter().position(|p| *p == [-o[0], -o[1]]).unwrap();
            assert_eq!(*w, k.weights[j]);
        }
        assert!(MollifierSpec::new(0.05).unwrap().space_kernel(&grid).is_err());
    }

    #[test]
    fn mollification_multiplies_modes() {
        let grid = TorusGrid::new(1, 64).unwrap();
        let spec = MollifierSpec::new(0.1).unwrap();
        let c = GridFunction::constant(grid, 2.5);
        assert!(mollify_space(&c, &spec).unwrap().sup_distance(&c) < 1e-13);
        let s = GridFunction::from_fn(grid, |x| (2.0 * PI * x[0]).sin());
        let k = spec.space_kernel(&grid).unwrap();
        let h = grid.spacing();
        let mult: f64 = k
            .offsets
            .iter()
            .zip(&k.weights)
            .map(|(o, w)| w * (2.0 * PI * o[0] as f64 * h).cos())
            .sum();
        assert!(mollify_space(&s, &spec).unwrap().sup_distance(&s.scaled(mult)) < 1e-13);
    }

    #[test]
    fn time_derivative_of_linear_growth() {
        let model = ModelSpec::power(1, 2.0).unwrap();
        let grid = TorusGrid::new(1, 32).unwrap();
        // u = 1 - t solves u_t + |p|²/2 - V + c = 0 with V = 0, c_shift = 1
        let model = model.with_c_shift(1.0);
        let u0 = GridFunction::constant(grid, 1.0);
        let traj = solve_cauchy(&model, &u0, &SolveConfig::new(1.0).retaining_steps()).unwrap();
        let mt = mollify_spacetime(&traj, &MollifierSpec::new(0.125).unwrap(), &[0.25, 0.5]).unwrap();
        for (t, (v, vt)) in mt.times.iter().zip(mt.values.iter().zip(&mt.time_derivative)) {
            assert!((v.values()[3] - (1.0 - t)).abs() < 1e-10);
            assert!((vt.values()[3] + 1.0).abs() < 1e-6, "{}", vt.values()[3]);
        }
        assert!(mollify_spacetime(&traj, &MollifierSpec::new(0.125).unwrap(), &[0.1]).is_err());
    }

    #[test]
    fn convolution_order_and_bounds() {
        let grid = TorusGrid::new(1, 128).unwrap();
        let w = GridFunction::from_fn(grid, |x| {
            let d = (x[0] - 0.5).abs();
            0.3 * (2.0 * PI * x[0]).sin() - d.min(1.0 - d)
        });
        let up = sup_convolution(&w, 0.05).unwrap();
        let down = inf_convolution(&w, 0.05).unwrap();
        for i in 0..grid.len() {
            assert!(down.values()[i] <= w.values()[i] + 1e-15);
            assert!(w.values()[i] <= up.values()[i] + 1e-15);
        }
        let (lo, _, _, _) = second_difference_range(&up);
        assert!(lo >= -1.0 / 0.05 - 1e-9);
        let (_, _, hi, _) = second_difference_range(&down);
        assert!(hi <= 1.0 / 0.05 + 1e-9);
    }

    #[test]
    fn double_convolution_audit_2d() {
        let grid = TorusGrid::new(2, 48).unwrap();
        let w = GridFunction::from_fn(grid, |x| {
            (2.0 * PI * x[0]).sin().abs() * 0.2 - (2.0 * PI * x[1]).cos().abs() * 0.1 + (2.0 * PI * (x[0] + x[1])).sin() * 0.1
        });
        for (eps, delta) in [(0.1, 0.05), (0.05, 0.02), (0.2, 0.01)] {
            let (_, audit) = double_convolution(&w, eps, delta).unwrap();
            assert!(audit.passed, "{audit:?}");
        }
    }

    #[test]
    fn exponent_fit() {
        let x = [0.1, 0.05, 0.025];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.sqrt()).collect();
        assert!((fit_exponent(&x, &y).unwrap() - 0.5).abs() < 1e-12);
        assert!(fit_exponent(&x[..1], &y[..1]).is_none());
    }

    #[test]
    fn smooth_solution_has_small_residual() {
        let model = ModelSpec::eikonal_1d().with_diffusion(Diffusion::Constant { a0: 0.05 });
        let grid = TorusGrid::new(1, 128).unwrap();
        let u0 = GridFunction::from_fn(grid, |x| 0.1 * (2.0 * PI * x[0]).sin());
        let traj = solve_cauchy(&model, &u0, &SolveConfig::new(0.5).retaining_steps()).unwrap();
        let scan = subsolution_residual_scan(&model, &traj, &[0.1, 0.05], 3).unwrap();
        for row in &scan.rows {
            assert!(row.residual < 0.05, "{row:?}");
        }
    }

    #[test]
    fn double_convolution_order_and_smooth_limit() {
        let grid = TorusGrid::new(1, 200).unwrap();
        let w = GridFunction::from_fn(grid, |x| 0.05 * (2.0 * PI * x[0]).sin());
        let (eps, delta) = (0.02, 0.01);
        let (v, _) = double_convolution(&w, eps, delta).unwrap();
        let up = sup_convolution(&w, eps).unwrap();
        for i in 0..grid.len() {
            assert!(v.values()[i] >= up.values()[i] - 1e-12);
        }
        let l = w.axis_lipschitz();
        assert!(v.sup_distance(&w) <= 2.0 * (eps + delta) * l * l + 1e-12);
        let kink = GridFunction::from_fn(grid, |x| (x[0] - 0.5).abs());
        let (_, audit) = double_convolution(&kink, eps, delta).unwrap();
        assert!(audit.max_second_difference > 0.5 / delta, "{audit:?}");
        let c = GridFunction::constant(grid, 1.5);
        let (vc, ac) = double_convolution(&c, eps, delta).unwrap();
        assert!(vc.sup_distance(&c) < 1e-12 && ac.max_second_difference.abs() < 1e-6);
    }

    #[test]
    fn sup_convolution_lipschitz_bound() {
        let grid = TorusGrid::new(2, 32).unwrap();
        let w = GridFunction::from_fn(grid, |x| (2.0 * PI * x[0]).sin().abs() * 0.3 + 0.2 * (2.0 * PI * x[1]).cos());
        let l = w.axis_lipschitz();
        let up = sup_convolution(&w, 0.1).unwrap();
        assert!(up.axis_lipschitz() <= 2.0 * l + 1e-12);
    }

    #[test]
    fn smooth_data_moves_by_alpha_squared() {
        let grid = TorusGrid::new(1, 256).unwrap();
        let w = GridFunction::from_fn(grid, |x| (2.0 * PI * x[0]).sin());
        let d1 = mollify_space(&w, &MollifierSpec::new(2.0 / 256.0).unwrap()).unwrap().sup_distance(&w);
        let d2 = mollify_space(&w, &MollifierSpec::new(4.0 / 256.0).unwrap()).unwrap().sup_distance(&w);
        let ratio = d2 / d1;
        assert!((3.0..5.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn shifted_mollification_relabels_times() {
        let model = ModelSpec::power(1, 2.0).unwrap().with_c_shift(1.0);
        let grid = TorusGrid::new(1, 32).unwrap();
        let traj = solve_cauchy(&model, &GridFunction::constant(grid, 0.0), &SolveConfig::new(1.0).retaining_steps()).unwrap();
        let spec = MollifierSpec::new(0.125).unwrap();
        let a = mollify_shifted(&traj, &spec, &[0.0, 0.5]).unwrap();
        let b = mollify_spacetime(&traj, &spec, &[0.125, 0.625]).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.times, vec![0.0, 0.5]);
    }

    #[test]
    fn constant_solution_audit_is_at_floor() {
        let model = ModelSpec::power(2, 2.0).unwrap().with_diffusion(Diffusion::DiagSin2 { a1: 0.2, a2: 0.1 });
        let grid = TorusGrid::new(2, 16).unwrap();
        let traj = solve_cauchy(
            &model,
            &GridFunction::constant(grid, 0.0),
            &SolveConfig::new(0.5).with_snapshots((1..16).map(|k| k as f64 / 32.0).collect()),
        )
        .unwrap();
        let rep = appendix_b_subsolution_audit(&model, &traj, 0.1, 0.02, 0.125, 0.9, 2).unwrap();
        assert!(rep.residual <= rep.floor && rep.passed, "{rep:?}");
        assert!(rep.omega < 1e-12);
    }
}
