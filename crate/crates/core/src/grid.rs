//! Uniform periodic grids on the unit torus, fields on them, the truncated
//! velocity lattice and probability vectors over grid nodes.
//!
//! Positions are always stored as node indices; coordinates are produced on
//! demand so that wraparound is exact integer arithmetic.

use crate::error::{Error, Result};

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 2;

/// Point or vector in `R^dim`; unused trailing components are zero.
pub type Vector = [f64; MAX_DIM];

/// Uniform grid with `n` nodes per axis on the torus `R^dim / Z^dim`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
}

impl TorusGrid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::Config(format!("grid.dim must be 1 or 2, got {dim}")));
        }
        if n < 4 {
            return Err(Error::Config(format!("grid.n must be at least 4, got {n}")));
        }
        Ok(Self { dim, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_per_dim(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume `h^dim` of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn coords(&self, node: usize) -> [usize; MAX_DIM] {
        match self.dim {
            1 => [node, 0],
            _ => [node % self.n, node / self.n],
        }
    }

    pub fn node(&self, coords: [usize; MAX_DIM]) -> usize {
        match self.dim {
            1 => coords[0] % self.n,
            _ => (coords[0] % self.n) + self.n * (coords[1] % self.n),
        }
    }

    /// Node reached from `node` by moving `offset` cells along `axis`.
    pub fn shift(&self, node: usize, axis: usize, offset: isize) -> usize {
        let mut c = self.coords(node);
        let n = self.n as isize;
        c[axis] = ((c[axis] as isize + offset).rem_euclid(n)) as usize;
        self.node(c)
    }

    /// Node reached by a multi-axis offset.
    pub fn offset(&self, node: usize, offsets: [isize; MAX_DIM]) -> usize {
        let mut c = self.coords(node);
        let n = self.n as isize;
        for axis in 0..self.dim {
            c[axis] = ((c[axis] as isize + offsets[axis]).rem_euclid(n)) as usize;
        }
        self.node(c)
    }

    pub fn point(&self, node: usize) -> Vector {
        let c = self.coords(node);
        let h = self.spacing();
        let mut x = [0.0; MAX_DIM];
        for axis in 0..self.dim {
            x[axis] = c[axis] as f64 * h;
        }
        x
    }

    /// Node nearest to a point given in torus coordinates.
    pub fn nearest_node(&self, x: &Vector) -> usize {
        let mut c = [0usize; MAX_DIM];
        for axis in 0..self.dim {
            let k = (x[axis].rem_euclid(1.0) * self.n as f64).round() as usize;
            c[axis] = k % self.n;
        }
        self.node(c)
    }

    /// Smallest signed integer offset (per axis) taking `from` to `to`.
    pub fn min_image(&self, from: usize, to: usize) -> [isize; MAX_DIM] {
        let a = self.coords(from);
        let b = self.coords(to);
        let n = self.n as isize;
        let mut d = [0isize; MAX_DIM];
        for axis in 0..self.dim {
            let mut k = (b[axis] as isize - a[axis] as isize).rem_euclid(n);
            if k > n / 2 {
                k -= n;
            }
            d[axis] = k;
        }
        d
    }

    /// Periodic Euclidean distance between two nodes.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        let d = self.min_image(a, b);
        let h = self.spacing();
        d.iter()
            .map(|&k| (k as f64 * h).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub(crate) fn check_same(&self, other: &TorusGrid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }
}

/// Real-valued field sampled at every node of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite value at node {i}")));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_vec_unchecked(grid: TorusGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn constant(grid: TorusGrid, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_fn(grid: TorusGrid, f: impl Fn(&Vector) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.point(i))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn shifted(&self, k: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v + k).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v * s).collect(),
        }
    }

    /// `max |self - other|` over nodes.
    pub fn sup_distance(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Largest one-sided difference quotient along the grid axes.
    pub fn axis_lipschitz(&self) -> f64 {
        let h = self.grid.spacing();
        let mut l: f64 = 0.0;
        for i in 0..self.grid.len() {
            for axis in 0..self.grid.dim() {
                let j = self.grid.shift(i, axis, 1);
                l = l.max((self.values[j] - self.values[i]).abs() / h);
            }
        }
        l
    }
}

impl std::ops::Index<usize> for GridFunction {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

/// Finite set of control velocities `{q : |q|_inf <= q_max}` on a uniform lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityLattice {
    dim: usize,
    q_max: f64,
    n_q: usize,
    velocities: Vec<Vector>,
    /// Moment exponent bookkeeping; always satisfied under truncation.
    pub zeta: f64,
}

impl VelocityLattice {
    pub fn new(dim: usize, q_max: f64, n_q: usize) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::Config(format!("velocity lattice dimension {dim}")));
        }
        if !(q_max > 0.0 && q_max.is_finite()) {
            return Err(Error::Config(format!("velocity.q_max must be > 0, got {q_max}")));
        }
        if n_q < 3 || n_q % 2 == 0 {
            return Err(Error::Config(format!(
                "velocity.n_q must be odd and >= 3, got {n_q}"
            )));
        }
        let half = (n_q / 2) as isize;
        let dq = q_max / half as f64;
        let axis: Vec<f64> = (-half..=half).map(|k| k as f64 * dq).collect();
        let mut velocities = Vec::with_capacity(n_q.pow(dim as u32));
        match dim {
            1 => {
                for &a in &axis {
                    velocities.push([a, 0.0]);
                }
            }
            _ => {
                for &b in &axis {
                    for &a in &axis {
                        velocities.push([a, b]);
                    }
                }
            }
        }
        Ok(Self {
            dim,
            q_max,
            n_q,
            velocities,
            zeta: 1.0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn q_max(&self) -> f64 {
        self.q_max
    }

    pub fn n_q_per_dim(&self) -> usize {
        self.n_q
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.q_max / (self.n_q - 1) as f64
    }

    pub fn velocities(&self) -> &[Vector] {
        &self.velocities
    }

    pub fn len(&self) -> usize {
        self.velocities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.velocities.is_empty()
    }

    pub fn zero_index(&self) -> usize {
        self.velocities.len() / 2
    }
}

/// Probability vector over the nodes of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteMeasure {
    grid: TorusGrid,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Accepts nonnegative weights summing to one within `1e-8`; the weights
    /// are renormalized exactly.
    pub fn new(grid: TorusGrid, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "measure has {} weights for {} nodes",
                weights.len(),
                grid.len()
            )));
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= -1e-12)) {
            return Err(Error::InvalidArgument(format!(
                "measure weight at node {i} is negative or non-finite: {}",
                weights[i]
            )));
        }
        let mass: f64 = weights.iter().sum();
        if (mass - 1.0).abs() > 1e-8 {
            return Err(Error::InvalidArgument(format!(
                "measure mass is {mass}, expected 1"
            )));
        }
        let weights = weights.into_iter().map(|w| w.max(0.0) / mass).collect();
        Ok(Self { grid, weights })
    }

    pub fn uniform(grid: TorusGrid) -> Self {
        let n = grid.len();
        Self {
            grid,
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(grid: TorusGrid, node: usize) -> Self {
        let mut weights = vec![0.0; grid.len()];
        weights[node] = 1.0;
        Self { grid, weights }
    }

    pub fn point_mass_at(grid: TorusGrid, x: &Vector) -> Self {
        Self::point_mass(grid, grid.nearest_node(x))
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate(&self, f: &GridFunction) -> f64 {
        self.weights
            .iter()
            .zip(f.values())
            .map(|(w, v)| w * v)
            .sum()
    }

    pub fn integrate_slice(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    /// `lambda * self + (1 - lambda) * other`.
    pub fn mix(&self, other: &DiscreteMeasure, lambda: f64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let weights = self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
            .collect();
        DiscreteMeasure::new(self.grid, weights)
    }

    pub fn sup_distance(&self, other: &DiscreteMeasure) -> f64 {
        self.weights
            .iter()
            .zip(&other.weights)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn support(&self, threshold: f64) -> Vec<usize> {
        (0..self.weights.len())
            .filter(|&i| self.weights[i] > threshold)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_indexing_wraps() {
        let g = TorusGrid::new(2, 5).unwrap();
        let i = g.node([4, 0]);
        assert_eq!(g.coords(g.shift(i, 0, 1)), [0, 0]);
        assert_eq!(g.coords(g.shift(i, 1, -1)), [4, 4]);
        assert_eq!(g.offset(i, [7, -6]), g.node([1, 4]));
        assert!((g.spacing() * g.n_per_dim() as f64 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TorusGrid::new(3, 8).is_err());
        assert!(TorusGrid::new(1, 3).is_err());
    }

    #[test]
    fn lattice_contains_zero_and_is_symmetric() {
        let v = VelocityLattice::new(2, 1.5, 5).unwrap();
        assert_eq!(v.len(), 25);
        assert_eq!(v.velocities()[v.zero_index()], [0.0, 0.0]);
        for q in v.velocities() {
            assert!(v
                .velocities()
                .iter()
                .any(|r| (r[0] + q[0]).abs() < 1e-14 && (r[1] + q[1]).abs() < 1e-14));
        }
        assert!(VelocityLattice::new(1, 1.0, 4).is_err());
    }

    #[test]
    fn min_image_distance() {
        let g = TorusGrid::new(1, 8).unwrap();
        assert!((g.distance(0, 7) - 0.125).abs() < 1e-15);
        assert!((g.distance(0, 4) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn measure_validation() {
        let g = TorusGrid::new(1, 4).unwrap();
        assert!(DiscreteMeasure::new(g, vec![0.5, 0.5, 0.0, 0.0]).is_ok());
        assert!(DiscreteMeasure::new(g, vec![0.5, 0.6, 0.0, 0.0]).is_err());
        assert!(DiscreteMeasure::new(g, vec![1.5, -0.5, 0.0, 0.0]).is_err());
    }
}
