//! Periodic-box discretization of R^3.
//!
//! The box is the cube `[-L/2, L/2)^3` sampled at `N` nodes per axis,
//! node `i` sitting at `-L/2 + i*h` with `h = L/N`. Storage is x-fastest:
//! `index(i, j, k) = i + N*(j + N*k)`.
//!
//! Differential operators, the Leray projector and the Sobolev norms are
//! spectral (see [`spectral`]); Lebesgue norms use the rectangle rule on the
//! nodes.

mod io;
mod norms;
mod ops;
pub mod spectral;

pub use io::{read_snapshot, write_snapshot, Snapshot};
pub use norms::{lebesgue_norm, sobolev_norm, sobolev_norm_scalar, Ball, Exponent};
pub(crate) use ops::{forward3, inverse3};
pub use ops::{
    curl, deformation_tensor, divergence, gradient, interpolate, interpolate_vector, laplacian,
    laplacian_scalar, leray_project, SymTensorField,
};

use crate::error::{Error, Result};
use crate::Vec3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    length: f64,
    n: usize,
}

impl Grid {
    pub fn new(length: f64, n: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!("box length must be positive, got {length}")));
        }
        if n < 8 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!("resolution must be even and >= 8, got {n}")));
        }
        Ok(Self { length, n })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(3)
    }

    /// Number of nodes, `N^3`.
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n * (j + self.n * k)
    }

    /// Index with periodic wrap of signed node coordinates.
    #[inline]
    pub fn index_wrapped(&self, i: i64, j: i64, k: i64) -> usize {
        let n = self.n as i64;
        self.index(i.rem_euclid(n) as usize, j.rem_euclid(n) as usize, k.rem_euclid(n) as usize)
    }

    #[inline]
    pub fn unravel(&self, idx: usize) -> (usize, usize, usize) {
        let i = idx % self.n;
        let j = (idx / self.n) % self.n;
        let k = idx / (self.n * self.n);
        (i, j, k)
    }

    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -0.5 * self.length + i as f64 * self.spacing()
    }

    #[inline]
    pub fn node(&self, idx: usize) -> Vec3 {
        let (i, j, k) = self.unravel(idx);
        Vec3::new(self.coord(i), self.coord(j), self.coord(k))
    }

    /// Wrap a point into `[-L/2, L/2)^3`.
    pub fn wrap(&self, x: Vec3) -> Vec3 {
        x.map(|c| wrap_coord(c, self.length))
    }

    /// Minimal-image displacement `a - b`.
    #[inline]
    pub fn delta(&self, a: Vec3, b: Vec3) -> Vec3 {
        let l = self.length;
        (a - b).map(|d| d - l * (d / l).round())
    }

    #[inline]
    pub fn periodic_distance(&self, a: Vec3, b: Vec3) -> f64 {
        self.delta(a, b).norm()
    }

    /// Node coordinates of the nearest node to `x` (signed, unwrapped).
    pub fn nearest_node(&self, x: Vec3) -> [i64; 3] {
        let h = self.spacing();
        let half = 0.5 * self.length;
        [
            ((x.x + half) / h).round() as i64,
            ((x.y + half) / h).round() as i64,
            ((x.z + half) / h).round() as i64,
        ]
    }

    /// Visit every node within periodic distance `radius` of `center`,
    /// passing the node index and the minimal-image offset `node - center`.
    /// Requires `radius < L/2` so that no node is visited twice.
    pub fn for_each_in_ball(&self, center: Vec3, radius: f64, mut f: impl FnMut(usize, Vec3)) {
        let h = self.spacing();
        let c = self.nearest_node(center);
        let reach = (radius / h).ceil() as i64 + 1;
        let reach = reach.min(self.n as i64 / 2);
        let half = 0.5 * self.length;
        for dk in -reach..=reach {
            for dj in -reach..=reach {
                for di in -reach..=reach {
                    let (i, j, k) = (c[0] + di, c[1] + dj, c[2] + dk);
                    let x = Vec3::new(-half + i as f64 * h, -half + j as f64 * h, -half + k as f64 * h);
                    let d = x - center;
                    if d.norm() <= radius {
                        f(self.index_wrapped(i, j, k), d);
                    }
                }
            }
        }
    }
}

fn wrap_coord(c: f64, l: f64) -> f64 {
    let w = (c + 0.5 * l).rem_euclid(l) - 0.5 * l;
    if w >= 0.5 * l {
        w - l
    } else {
        w
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(Vec3) -> f64) -> Self {
        let values = (0..grid.len()).map(|idx| f(grid.node(idx))).collect();
        Self { grid, values }
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        Self { grid, values: vec![c; grid.len()] }
    }

    pub fn grid(&self) -> Grid {
        self.grid
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

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Rectangle-rule integral over the box.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: Grid,
    comps: [Vec<f64>; 3],
}

impl VectorField {
    pub fn zeros(grid: Grid) -> Self {
        let z = vec![0.0; grid.len()];
        Self { grid, comps: [z.clone(), z.clone(), z] }
    }

    pub fn from_components(grid: Grid, comps: [Vec<f64>; 3]) -> Result<Self> {
        if comps.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::InvalidGrid("component length does not match grid".into()));
        }
        Ok(Self { grid, comps })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(Vec3) -> Vec3) -> Self {
        let mut out = Self::zeros(grid);
        for idx in 0..grid.len() {
            let v = f(grid.node(idx));
            out.set(idx, v);
        }
        out
    }

    pub fn uniform(grid: Grid, v: Vec3) -> Self {
        Self {
            grid,
            comps: [vec![v.x; grid.len()], vec![v.y; grid.len()], vec![v.z; grid.len()]],
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn component(&self, c: usize) -> &[f64] {
        &self.comps[c]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.comps[c]
    }

    pub fn components(&self) -> &[Vec<f64>; 3] {
        &self.comps
    }

    pub fn into_components(self) -> [Vec<f64>; 3] {
        self.comps
    }

    #[inline]
    pub fn get(&self, idx: usize) -> Vec3 {
        Vec3::new(self.comps[0][idx], self.comps[1][idx], self.comps[2][idx])
    }

    #[inline]
    pub fn set(&mut self, idx: usize, v: Vec3) {
        self.comps[0][idx] = v.x;
        self.comps[1][idx] = v.y;
        self.comps[2][idx] = v.z;
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(|c| c.iter().all(|v| v.is_finite()))
    }

    /// Componentwise rectangle-rule integral.
    pub fn integral(&self) -> Vec3 {
        let dv = self.grid.cell_volume();
        Vec3::new(
            self.comps[0].iter().sum::<f64>() * dv,
            self.comps[1].iter().sum::<f64>() * dv,
            self.comps[2].iter().sum::<f64>() * dv,
        )
    }

    /// `∫ u·v dx` by the rectangle rule.
    pub fn dot(&self, other: &VectorField) -> f64 {
        let mut s = 0.0;
        for c in 0..3 {
            s += self.comps[c].iter().zip(&other.comps[c]).map(|(a, b)| a * b).sum::<f64>();
        }
        s * self.grid.cell_volume()
    }

    /// Maximum pointwise Euclidean norm.
    pub fn max_norm(&self) -> f64 {
        (0..self.grid.len()).fold(0.0, |m, idx| m.max(self.get(idx).norm()))
    }

    pub fn scaled(&self, a: f64) -> VectorField {
        let mut out = self.clone();
        out.scale(a);
        out
    }

    pub fn scale(&mut self, a: f64) {
        for c in self.comps.iter_mut() {
            c.iter_mut().for_each(|v| *v *= a);
        }
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &VectorField) {
        for c in 0..3 {
            for (x, y) in self.comps[c].iter_mut().zip(&other.comps[c]) {
                *x += a * y;
            }
        }
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn add(&self, other: &VectorField) -> VectorField {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    /// Pointwise product with a scalar field.
    pub fn mul_scalar_field(&self, s: &ScalarField) -> VectorField {
        let mut out = self.clone();
        for c in out.comps.iter_mut() {
            for (x, w) in c.iter_mut().zip(s.values()) {
                *x *= w;
            }
        }
        out
    }

    /// Translate by an integer number of cells (periodic).
    pub fn shifted(&self, shift: [i64; 3]) -> VectorField {
        let g = self.grid;
        let n = g.n();
        let mut out = VectorField::zeros(g);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let src = g.index_wrapped(i as i64 - shift[0], j as i64 - shift[1], k as i64 - shift[2]);
                    let dst = g.index(i, j, k);
                    for c in 0..3 {
                        out.comps[c][dst] = self.comps[c][src];
                    }
                }
            }
        }
        out
    }
}

/// Anything with nodal components on a grid.
pub trait NodalField {
    fn grid(&self) -> Grid;
    fn component_slices(&self) -> Vec<&[f64]>;
}

impl NodalField for ScalarField {
    fn grid(&self) -> Grid {
        self.grid
    }
    fn component_slices(&self) -> Vec<&[f64]> {
        vec![&self.values]
    }
}

impl NodalField for VectorField {
    fn grid(&self) -> Grid {
        self.grid
    }
    fn component_slices(&self) -> Vec<&[f64]> {
        self.comps.iter().map(|c| c.as_slice()).collect()
    }
}
