//! Node-centred grids and the scalar, vector, director, complex and tensor
//! fields that live on them.
//!
//! Samples are stored row-major, `data[i * nodes_y + j]`. A slab is a grid
//! with a single node in y (`ny = 0`); every y-derivative on it is zero and
//! the y quadrature weight is 1.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{Domain, NeumannMode};

pub const MIN_CELLS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub domain: Domain,
    pub nx: usize,
    /// Zero for the slab.
    pub ny: usize,
    pub hx: f64,
    /// One for the slab (unit transverse weight).
    pub hy: f64,
}

impl Grid {
    /// `ny` is ignored for the slab.
    pub fn new(domain: Domain, nx: usize, ny: usize) -> Result<Self> {
        if nx < MIN_CELLS {
            return Err(Error::Config(format!("grid needs at least {MIN_CELLS} cells in x, got {nx}")));
        }
        match domain {
            Domain::Rectangle { lx, ly } => {
                if ny < MIN_CELLS {
                    return Err(Error::Config(format!("grid needs at least {MIN_CELLS} cells in y, got {ny}")));
                }
                Ok(Self { domain, nx, ny, hx: lx / nx as f64, hy: ly / ny as f64 })
            }
            Domain::Slab { lx } => Ok(Self { domain, nx, ny: 0, hx: lx / nx as f64, hy: 1.0 }),
        }
    }

    pub fn is_slab(&self) -> bool {
        self.ny == 0
    }

    pub fn nodes_x(&self) -> usize {
        self.nx + 1
    }

    pub fn nodes_y(&self) -> usize {
        self.ny + 1
    }

    pub fn len(&self) -> usize {
        self.nodes_x() * self.nodes_y()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * (self.ny + 1) + j
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.nx {
            self.domain.lx()
        } else {
            i as f64 * self.hx
        }
    }

    pub fn y(&self, j: usize) -> f64 {
        match self.domain.ly() {
            Some(ly) if j == self.ny => ly,
            Some(_) => j as f64 * self.hy,
            None => 0.0,
        }
    }

    fn wx(&self, i: usize) -> f64 {
        if i == 0 || i == self.nx {
            0.5 * self.hx
        } else {
            self.hx
        }
    }

    fn wy(&self, j: usize) -> f64 {
        if self.ny == 0 {
            1.0
        } else if j == 0 || j == self.ny {
            0.5 * self.hy
        } else {
            self.hy
        }
    }

    /// Composite trapezoid weight of node `(i, j)`.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.wx(i) * self.wy(j)
    }

    pub fn weights(&self) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.len());
        for i in 0..self.nodes_x() {
            for j in 0..self.nodes_y() {
                w.push(self.weight(i, j));
            }
        }
        w
    }

    pub fn on_x_boundary(&self, i: usize) -> bool {
        i == 0 || i == self.nx
    }

    pub fn on_y_boundary(&self, j: usize) -> bool {
        self.ny > 0 && (j == 0 || j == self.ny)
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        self.on_x_boundary(i) || self.on_y_boundary(j)
    }

    /// Iterates `(i, j, flat index)` in storage order.
    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let nyn = self.nodes_y();
        (0..self.len()).map(move |k| (k / nyn, k % nyn, k))
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(Error::Mismatch(format!(
                "grids differ: {}x{} vs {}x{}",
                self.nx, self.ny, other.nx, other.ny
            )));
        }
        Ok(())
    }

    /// Samples a closed-form function at every node.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        let data = self.nodes().map(|(i, j, _)| f(self.x(i), self.y(j))).collect();
        ScalarField { grid: *self, data }
    }

    pub fn sample_mode(&self, mode: &NeumannMode) -> ScalarField {
        self.sample(|x, y| mode.value(x, y))
    }
}

fn weighted_sum(grid: &Grid, f: impl Fn(usize) -> f64) -> f64 {
    grid.nodes().map(|(i, j, k)| grid.weight(i, j) * f(k)).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, data: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self { grid, data: vec![value; grid.len()] }
    }

    pub fn from_vec(grid: Grid, data: Vec<f64>) -> Result<Self> {
        if data.len() != grid.len() {
            return Err(Error::Mismatch(format!("expected {} samples, got {}", grid.len(), data.len())));
        }
        Ok(Self { grid, data })
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[self.grid.idx(i, j)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self { grid: self.grid, data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| s * v)
    }

    pub fn axpy(&mut self, a: f64, x: &Self) {
        for (y, &v) in self.data.iter_mut().zip(&x.data) {
            *y += a * v;
        }
    }

    pub fn integral(&self) -> f64 {
        weighted_sum(&self.grid, |k| self.data[k])
    }

    pub fn mean(&self) -> f64 {
        self.integral() / self.grid.domain.measure()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        weighted_sum(&self.grid, |k| self.data[k] * other.data[k])
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub grid: Grid,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, x: vec![0.0; grid.len()], y: vec![0.0; grid.len()] }
    }

    pub fn from_components(x: ScalarField, y: ScalarField) -> Result<Self> {
        x.grid.check_same(&y.grid)?;
        Ok(Self { grid: x.grid, x: x.data, y: y.data })
    }

    pub fn sample(grid: &Grid, f: impl Fn(f64, f64) -> [f64; 2]) -> Self {
        let mut v = Self::zeros(*grid);
        for (i, j, k) in grid.nodes() {
            let [a, b] = f(grid.x(i), grid.y(j));
            v.x[k] = a;
            v.y[k] = b;
        }
        v
    }

    pub fn component(&self, c: usize) -> ScalarField {
        let data = if c == 0 { self.x.clone() } else { self.y.clone() };
        ScalarField { grid: self.grid, data }
    }

    pub fn map2(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            x: self.x.iter().zip(&other.x).map(|(&a, &b)| f(a, b)).collect(),
            y: self.y.iter().zip(&other.y).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.map2(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.map2(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { grid: self.grid, x: self.x.iter().map(|v| s * v).collect(), y: self.y.iter().map(|v| s * v).collect() }
    }

    pub fn axpy(&mut self, a: f64, v: &Self) {
        for (y, &s) in self.x.iter_mut().zip(&v.x) {
            *y += a * s;
        }
        for (y, &s) in self.y.iter_mut().zip(&v.y) {
            *y += a * s;
        }
    }

    pub fn dot(&self, other: &Self) -> f64 {
        weighted_sum(&self.grid, |k| self.x[k] * other.x[k] + self.y[k] * other.y[k])
    }

    pub fn norm_sq_pointwise(&self) -> ScalarField {
        let data = self.x.iter().zip(&self.y).map(|(a, b)| a * a + b * b).collect();
        ScalarField { grid: self.grid, data }
    }

    pub fn max_abs(&self) -> f64 {
        self.x.iter().chain(&self.y).fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Zeroes every boundary node.
    pub fn zero_boundary(&mut self) {
        let g = self.grid;
        for (i, j, k) in g.nodes() {
            if g.is_boundary(i, j) {
                self.x[k] = 0.0;
                self.y[k] = 0.0;
            }
        }
    }

    pub fn boundary_max_abs(&self) -> f64 {
        let g = self.grid;
        g.nodes().filter(|&(i, j, _)| g.is_boundary(i, j)).fold(0.0f64, |m, (_, _, k)| m.max(self.x[k].abs()).max(self.y[k].abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.y).all(|v| v.is_finite())
    }
}

/// Three-component director sampled over a 2D or 1D domain.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectorField {
    pub grid: Grid,
    pub c: [Vec<f64>; 3],
}

impl DirectorField {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, c: [vec![0.0; grid.len()], vec![0.0; grid.len()], vec![0.0; grid.len()]] }
    }

    pub fn constant(grid: Grid, d: [f64; 3]) -> Self {
        Self { grid, c: [vec![d[0]; grid.len()], vec![d[1]; grid.len()], vec![d[2]; grid.len()]] }
    }

    pub fn sample(grid: &Grid, f: impl Fn(f64, f64) -> [f64; 3]) -> Self {
        let mut d = Self::zeros(*grid);
        for (i, j, k) in grid.nodes() {
            let v = f(grid.x(i), grid.y(j));
            for (c, val) in d.c.iter_mut().zip(v) {
                c[k] = val;
            }
        }
        d
    }

    pub fn at(&self, k: usize) -> [f64; 3] {
        [self.c[0][k], self.c[1][k], self.c[2][k]]
    }

    pub fn component(&self, c: usize) -> ScalarField {
        ScalarField { grid: self.grid, data: self.c[c].clone() }
    }

    pub fn norm_sq_pointwise(&self) -> ScalarField {
        let data = (0..self.grid.len()).map(|k| self.c.iter().map(|c| c[k] * c[k]).sum()).collect();
        ScalarField { grid: self.grid, data }
    }

    /// `max |d|` over nodes.
    pub fn max_norm(&self) -> f64 {
        self.norm_sq_pointwise().data.iter().fold(0.0f64, |m, v| m.max(*v)).sqrt()
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (a, b) in out.c.iter_mut().zip(&other.c) {
            for (x, y) in a.iter_mut().zip(b) {
                *x -= y;
            }
        }
        out
    }

    pub fn dot(&self, other: &Self) -> f64 {
        weighted_sum(&self.grid, |k| (0..3).map(|c| self.c[c][k] * other.c[c][k]).sum())
    }

    pub fn max_boundary_deviation(&self, other: &Self) -> f64 {
        let g = self.grid;
        g.nodes()
            .filter(|&(i, j, _)| g.is_boundary(i, j))
            .flat_map(|(_, _, k)| (0..3).map(move |c| (c, k)))
            .fold(0.0f64, |m, (c, k)| m.max((self.c[c][k] - other.c[c][k]).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().flatten().all(|v| v.is_finite())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    pub grid: Grid,
    pub data: Vec<Complex64>,
}

impl ComplexField {
    pub fn from_real(f: &ScalarField) -> Self {
        Self { grid: f.grid, data: f.data.iter().map(|&v| Complex64::new(v, 0.0)).collect() }
    }

    /// `int f conj(g)`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.grid.nodes().map(|(i, j, k)| self.grid.weight(i, j) * self.data[k] * other.data[k].conj()).sum()
    }
}

/// Symmetric 2x2 tensor field.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorField {
    pub grid: Grid,
    pub xx: Vec<f64>,
    pub xy: Vec<f64>,
    pub yy: Vec<f64>,
}

impl TensorField {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, xx: vec![0.0; grid.len()], xy: vec![0.0; grid.len()], yy: vec![0.0; grid.len()] }
    }

    pub fn max_abs(&self) -> f64 {
        self.xx.iter().chain(&self.xy).chain(&self.yy).fold(0.0f64, |m, v| m.max(v.abs()))
    }
}
