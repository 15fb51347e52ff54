//! Uniform grids with a wide stencil, grid functions and discrete jets.

use serde::{Deserialize, Serialize};

use crate::catalog::BoxDomain;
use crate::error::{Error, Result};
use crate::jets::{Jet2, SymMat, MAX_DIM};

/// A uniform grid on a box. Nodes within `layer` steps of a face form the
/// boundary layer, which is as thick as the widest stencil offset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    lo: Vec<f64>,
    hi: Vec<f64>,
    h: f64,
    dims: Vec<usize>,
    dirs: Vec<Vec<i64>>,
    layer: usize,
    #[serde(skip)]
    frames: Vec<Vec<usize>>,
}

/// Axes, diagonals and knight moves in 2-D; axes, face and body diagonals
/// in 3-D.
pub fn default_stencil(dim: usize) -> Vec<Vec<i64>> {
    match dim {
        1 => vec![vec![1]],
        2 => vec![
            vec![1, 0],
            vec![0, 1],
            vec![1, 1],
            vec![1, -1],
            vec![2, 1],
            vec![1, -2],
            vec![1, 2],
            vec![2, -1],
        ],
        _ => {
            let mut dirs = Vec::new();
            for i in 0..dim {
                let mut v = vec![0; dim];
                v[i] = 1;
                dirs.push(v);
            }
            if dim == 3 {
                for (i, j) in [(0, 1), (0, 2), (1, 2)] {
                    for s in [1, -1] {
                        let mut v = vec![0; 3];
                        v[i] = 1;
                        v[j] = s;
                        dirs.push(v);
                    }
                }
                for (a, b) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
                    dirs.push(vec![1, a, b]);
                }
            }
            dirs
        }
    }
}

fn dot(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// All sets of `dim` mutually orthogonal stencil directions.
fn orthogonal_frames(dirs: &[Vec<i64>], dim: usize) -> Vec<Vec<usize>> {
    fn extend(dirs: &[Vec<i64>], dim: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == dim {
            out.push(cur.clone());
            return;
        }
        for k in start..dirs.len() {
            if cur.iter().all(|&c| dot(&dirs[c], &dirs[k]) == 0) {
                cur.push(k);
                extend(dirs, dim, k + 1, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    extend(dirs, dim, 0, &mut Vec::new(), &mut out);
    out
}

impl Grid {
    /// Grid of spacing `h` on `domain` with the default stencil.
    pub fn new(domain: &BoxDomain, h: f64) -> Result<Self> {
        Self::with_stencil(domain, h, default_stencil(domain.dim()))
    }

    /// `[lo, hi]^dim` with `nodes` nodes per axis.
    pub fn cube(dim: usize, lo: f64, hi: f64, nodes: usize) -> Result<Self> {
        if nodes < 2 {
            return Err(Error::BadParameters("a grid needs at least two nodes per axis".into()));
        }
        Self::new(&BoxDomain::new(vec![lo; dim], vec![hi; dim])?, (hi - lo) / (nodes - 1) as f64)
    }

    pub fn with_stencil(domain: &BoxDomain, h: f64, dirs: Vec<Vec<i64>>) -> Result<Self> {
        let dim = domain.dim();
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::DimensionOutOfRange(dim));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::BadParameters(format!("grid spacing must be positive, got {h}")));
        }
        if dirs.is_empty() || dirs.iter().any(|d| d.len() != dim || d.iter().all(|&c| c == 0)) {
            return Err(Error::BadParameters("stencil directions must be nonzero and match the dimension".into()));
        }
        let layer = dirs.iter().flat_map(|d| d.iter().map(|c| c.unsigned_abs() as usize)).max().unwrap_or(1);
        let mut dims = Vec::with_capacity(dim);
        for (a, b) in domain.lo.iter().zip(&domain.hi) {
            let cells = (b - a) / h;
            let rounded = cells.round();
            if (cells - rounded).abs() > 1e-6 * rounded.max(1.0) {
                return Err(Error::BadParameters(format!("spacing {h} does not divide the side {}", b - a)));
            }
            let count = rounded as usize + 1;
            if count < 2 * layer + 1 {
                return Err(Error::BadParameters(format!("{count} nodes per axis cannot host a stencil of width {layer}")));
            }
            dims.push(count);
        }
        let frames = orthogonal_frames(&dirs, dim);
        Ok(Self { lo: domain.lo.clone(), hi: domain.hi.clone(), h, dims, dirs, layer, frames })
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn domain(&self) -> BoxDomain {
        BoxDomain { lo: self.lo.clone(), hi: self.hi.clone() }
    }

    pub fn dirs(&self) -> &[Vec<i64>] {
        &self.dirs
    }

    pub fn layer(&self) -> usize {
        self.layer
    }

    /// Orthonormal frames made of stencil directions (indices into `dirs`).
    pub fn frames(&self) -> &[Vec<usize>] {
        &self.frames
    }

    /// Row-major node index (last axis fastest).
    pub fn index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.dims).fold(0, |acc, (i, d)| acc * d + i)
    }

    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        let mut rest = node;
        for k in (0..self.dim()).rev() {
            idx[k] = rest % self.dims[k];
            rest /= self.dims[k];
        }
        idx
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        self.multi_index(node).iter().zip(&self.lo).map(|(&i, lo)| lo + i as f64 * self.h).collect()
    }

    /// True when every stencil offset from `node` stays on the grid.
    pub fn is_interior(&self, node: usize) -> bool {
        self.multi_index(node).iter().zip(&self.dims).all(|(&i, &d)| i >= self.layer && i + self.layer < d)
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.is_interior(k)).collect()
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| !self.is_interior(k)).collect()
    }

    /// The node `node + s·off`, if it exists.
    pub fn offset(&self, node: usize, off: &[i64], s: i64) -> Option<usize> {
        let idx = self.multi_index(node);
        let mut out = Vec::with_capacity(idx.len());
        for ((&i, &o), &d) in idx.iter().zip(off).zip(&self.dims) {
            let j = i as i64 + s * o;
            if j < 0 || j >= d as i64 {
                return None;
            }
            out.push(j as usize);
        }
        Some(self.index(&out))
    }

    /// Stencil neighbours `node ± dir` of an interior node, as
    /// `(plus, minus)` per direction.
    pub fn neighbours(&self, node: usize) -> Result<Vec<(usize, usize)>> {
        self.dirs
            .iter()
            .map(|d| match (self.offset(node, d, 1), self.offset(node, d, -1)) {
                (Some(a), Some(b)) => Ok((a, b)),
                _ => Err(Error::StencilOutOfBounds(node)),
            })
            .collect()
    }

    /// `Σ_θ |θ|⁻²`, the stencil weight in the explicit stability bound.
    pub fn stencil_weight(&self) -> f64 {
        self.dirs.iter().map(|d| 1.0 / dot(d, d) as f64).sum()
    }

    pub fn dir_norm_sq(&self, k: usize) -> f64 {
        dot(&self.dirs[k], &self.dirs[k]) as f64
    }

    /// Rebuilds the cached frames after deserialization.
    pub fn refresh(&mut self) {
        self.frames = orthogonal_frames(&self.dirs, self.dim());
    }
}

/// Values on every node of a grid. Boundary-layer values are the Dirichlet
/// data and are left untouched by the solver.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), found: values.len() });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::BadParameters(format!("non-finite value at node {k}")));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|k| f(&grid.coords(k))).collect();
        Self { grid: grid.clone(), values }
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self { grid: grid.clone(), values: vec![c; grid.len()] }
    }

    /// Boundary layer from `g`, interior filled with `init`.
    pub fn with_boundary(grid: &Grid, g: impl Fn(&[f64]) -> f64, init: f64) -> Self {
        let values =
            (0..grid.len()).map(|k| if grid.is_interior(k) { init } else { g(&grid.coords(k)) }).collect();
        Self { grid: grid.clone(), values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, node: usize) -> f64 {
        self.values[node]
    }

    pub(crate) fn values_mut(&mut self) -> &mut Vec<f64> {
        &mut self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::BadParameters("grid functions live on different grids".into()));
        }
        Ok(Self { grid: self.grid.clone(), values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect() })
    }

    /// `(node, value)` pairs on the boundary layer.
    pub fn boundary_data(&self) -> Vec<(usize, f64)> {
        self.grid.boundary_nodes().into_iter().map(|k| (k, self.values[k])).collect()
    }

    pub fn max_interior(&self) -> f64 {
        self.grid.interior_nodes().into_iter().map(|k| self.values[k]).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_boundary(&self) -> f64 {
        self.grid.boundary_nodes().into_iter().map(|k| self.values[k]).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `Δ_θ u = (u(x + hθ) − 2u(x) + u(x − hθ)) / (h|θ|)²`.
pub fn directional_second_difference(u: &GridFunction, node: usize, dir: &[i64]) -> Result<f64> {
    let g = &u.grid;
    if dir.len() != g.dim() {
        return Err(Error::DimensionMismatch { expected: g.dim(), found: dir.len() });
    }
    match (g.offset(node, dir, 1), g.offset(node, dir, -1)) {
        (Some(a), Some(b)) => {
            let len_sq = dot(dir, dir) as f64;
            Ok((u.values[a] - 2.0 * u.values[node] + u.values[b]) / (g.h * g.h * len_sq))
        }
        _ => Err(Error::StencilOutOfBounds(node)),
    }
}

/// Second differences along every stencil direction.
pub fn discrete_spectrum(u: &GridFunction, node: usize) -> Result<Vec<f64>> {
    u.grid.dirs.iter().map(|d| directional_second_difference(u, node, d)).collect()
}

/// Value, centred gradient and centred Hessian at an interior node.
pub fn discrete_jet(u: &GridFunction, node: usize) -> Result<Jet2> {
    let g = &u.grid;
    if node >= g.len() || !g.is_interior(node) {
        return Err(Error::BoundaryNode(node));
    }
    let n = g.dim();
    let h = g.h;
    let at = |off: &[i64]| -> f64 { u.values[g.offset(node, off, 1).expect("interior node")] };
    let unit = |i: usize, s: i64| {
        let mut v = vec![0i64; n];
        v[i] = s;
        v
    };
    let u0 = u.values[node];
    let p: Vec<f64> = (0..n).map(|i| (at(&unit(i, 1)) - at(&unit(i, -1))) / (2.0 * h)).collect();
    let a = SymMat::from_fn(n, |i, j| {
        if i == j {
            (at(&unit(i, 1)) - 2.0 * u0 + at(&unit(i, -1))) / (h * h)
        } else {
            let mut pp = vec![0i64; n];
            pp[i] = 1;
            pp[j] = 1;
            let mut pm = pp.clone();
            pm[j] = -1;
            let mp: Vec<i64> = pm.iter().map(|c| -c).collect();
            let mm: Vec<i64> = pp.iter().map(|c| -c).collect();
            (at(&pp) - at(&pm) - at(&mp) + at(&mm)) / (4.0 * h * h)
        }
    });
    Jet2::new(u0, p, a)
}
