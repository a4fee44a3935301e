//! Cell-centered rectangular grids, scalar fields and discrete norms.
//!
//! A [`GridSpec`] covers a 1D interval or a 2D rectangle with uniform cells;
//! unknowns live at cell centers, 2D storage is row-major (`i + nx * j`).
//! Homogeneous Neumann boundaries are realized by mirrored ghost cells
//! (`f[-1] = f[0]`), which the operators in [`crate::operators`] rely on.

use crate::error::{Result, SimError};

/// Uniform cell-centered grid over an interval (1D) or rectangle (2D).
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    dim: usize,
    n: [usize; 2],
    length: [f64; 2],
}

impl GridSpec {
    pub fn line(n: usize, length: f64) -> Result<Self> {
        Self::validated(1, [n, 1], [length, 1.0])
    }

    pub fn rect(n: [usize; 2], length: [f64; 2]) -> Result<Self> {
        Self::validated(2, n, length)
    }

    fn validated(dim: usize, n: [usize; 2], length: [f64; 2]) -> Result<Self> {
        for axis in 0..dim {
            if n[axis] < 3 {
                return Err(SimError::Config(format!(
                    "grid needs n >= 3 per axis, got {}",
                    n[axis]
                )));
            }
            if !(length[axis] > 0.0 && length[axis].is_finite()) {
                return Err(SimError::Config(format!(
                    "grid length must be positive and finite, got {}",
                    length[axis]
                )));
            }
        }
        Ok(GridSpec { dim, n, length })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cells along `axis` (1 for the unused axis of a 1D grid).
    pub fn n(&self, axis: usize) -> usize {
        self.n[axis]
    }

    pub fn length(&self, axis: usize) -> f64 {
        self.length[axis]
    }

    /// Cell spacing along `axis`, exactly `length / n`.
    pub fn h(&self, axis: usize) -> f64 {
        self.length[axis] / self.n[axis] as f64
    }

    /// Smallest spacing over the active axes.
    pub fn h_min(&self) -> f64 {
        (0..self.dim).map(|a| self.h(a)).fold(f64::INFINITY, f64::min)
    }

    pub fn cell_count(&self) -> usize {
        self.n[0] * self.n[1]
    }

    /// Measure of one cell (h in 1D, hx*hy in 2D).
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.h(a)).product()
    }

    /// Measure of the whole domain.
    pub fn domain_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.length[a]).product()
    }

    /// Coordinate of the center of cell `i` along `axis`.
    pub fn center(&self, axis: usize, i: usize) -> f64 {
        (i as f64 + 0.5) * self.h(axis)
    }

    /// Flat index of cell (i, j); `j` must be 0 on 1D grids.
    pub fn index(&self, i: usize, j: usize) -> usize {
        i + self.n[0] * j
    }
}

/// One scalar unknown sampled at cell centers.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: GridSpec,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cell_count() {
            return Err(SimError::Domain(format!(
                "field has {} values for a {}-cell grid",
                values.len(),
                grid.cell_count()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SimError::Domain("field contains non-finite values".into()));
        }
        Ok(Field { grid, values })
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        let n = grid.cell_count();
        Field {
            grid,
            values: vec![value; n],
        }
    }

    /// Sample `f(x)` (1D) or `f(x, y)` (2D, second coordinate passed as `y`)
    /// at cell centers.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.cell_count());
        for j in 0..grid.n(1) {
            let y = if grid.dim() == 2 { grid.center(1, j) } else { 0.0 };
            for i in 0..grid.n(0) {
                values.push(f(grid.center(0, i), y));
            }
        }
        Field { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        self.grid == other.grid
    }

    /// self + scale * other, pointwise.
    pub fn axpy(&self, scale: f64, other: &Field) -> Field {
        debug_assert!(self.same_grid(other));
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + scale * b)
            .collect();
        Field {
            grid: self.grid.clone(),
            values,
        }
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.axpy(-1.0, other)
    }

    pub fn scale(&self, scale: f64) -> Field {
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * scale).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        debug_assert!(self.same_grid(other));
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Field {
            grid: self.grid.clone(),
            values,
        }
    }
}

/// Pairwise summation; deterministic and accurate independent of length.
pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 32 {
        let mut acc = 0.0;
        for v in values {
            acc += v;
        }
        acc
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

/// Discrete integral over the domain (midpoint rule, exact for cell averages).
pub fn integrate(f: &Field) -> f64 {
    pairwise_sum(f.values()) * f.grid().cell_volume()
}

/// Which Lp norm to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lp {
    One,
    Two,
    Inf,
}

/// Discrete Lp norm: `(sum |f_i|^p * vol)^(1/p)`, or `max |f_i|` for p = inf.
pub fn norm_lp(f: &Field, p: Lp) -> f64 {
    match p {
        Lp::One => {
            let abs: Vec<f64> = f.values().iter().map(|v| v.abs()).collect();
            pairwise_sum(&abs) * f.grid().cell_volume()
        }
        Lp::Two => {
            let sq: Vec<f64> = f.values().iter().map(|v| v * v).collect();
            (pairwise_sum(&sq) * f.grid().cell_volume()).sqrt()
        }
        Lp::Inf => f.values().iter().fold(0.0, |m, v| m.max(v.abs())),
    }
}

/// Discrete `int |grad f|^2`: face differences with Neumann mirroring,
/// so boundary faces contribute zero.
pub fn grad_sq_norm(f: &Field) -> f64 {
    let g = f.grid();
    let (nx, ny) = (g.n(0), g.n(1));
    let vol = g.cell_volume();
    let mut terms = Vec::with_capacity(2 * nx * ny);
    let hx = g.h(0);
    for j in 0..ny {
        for i in 0..nx.saturating_sub(1) {
            let d = (f.values()[g.index(i + 1, j)] - f.values()[g.index(i, j)]) / hx;
            terms.push(d * d * vol);
        }
    }
    if g.dim() == 2 {
        let hy = g.h(1);
        for j in 0..ny - 1 {
            for i in 0..nx {
                let d = (f.values()[g.index(i, j + 1)] - f.values()[g.index(i, j)]) / hy;
                terms.push(d * d * vol);
            }
        }
    }
    pairwise_sum(&terms)
}

/// Discrete H1 norm: `sqrt(||f||_2^2 + ||grad f||_2^2)`.
pub fn norm_h1(f: &Field) -> f64 {
    let l2 = norm_lp(f, Lp::Two);
    (l2 * l2 + grad_sq_norm(f)).sqrt()
}

/// Which unknowns a state carries.
#[derive(Debug, Clone, PartialEq)]
pub enum StateFields {
    /// (u, v, w) of the relaxation system; `u` holds z for predator-prey.
    Triple { u: Field, v: Field, w: Field },
    /// (u, v) of the limit system.
    Dual { u: Field, v: Field },
}

/// Snapshot of all unknowns at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub time: f64,
    pub fields: StateFields,
}

impl State {
    pub fn triple(time: f64, u: Field, v: Field, w: Field) -> Result<Self> {
        if !u.same_grid(&v) || !u.same_grid(&w) {
            return Err(SimError::Domain("state fields on different grids".into()));
        }
        Ok(State {
            time,
            fields: StateFields::Triple { u, v, w },
        })
    }

    pub fn dual(time: f64, u: Field, v: Field) -> Result<Self> {
        if !u.same_grid(&v) {
            return Err(SimError::Domain("state fields on different grids".into()));
        }
        Ok(State {
            time,
            fields: StateFields::Dual { u, v },
        })
    }

    /// The taxing species: u (competition) or z (predator-prey).
    pub fn primary(&self) -> &Field {
        match &self.fields {
            StateFields::Triple { u, .. } | StateFields::Dual { u, .. } => u,
        }
    }

    pub fn v(&self) -> &Field {
        match &self.fields {
            StateFields::Triple { v, .. } | StateFields::Dual { v, .. } => v,
        }
    }

    pub fn w(&self) -> Option<&Field> {
        match &self.fields {
            StateFields::Triple { w, .. } => Some(w),
            StateFields::Dual { .. } => None,
        }
    }

    /// The field the taxis gradient is taken from: w if present, else v.
    pub fn w_or_v(&self) -> &Field {
        self.w().unwrap_or_else(|| self.v())
    }

    pub fn grid(&self) -> &GridSpec {
        self.primary().grid()
    }

    pub fn is_triple(&self) -> bool {
        self.w().is_some()
    }
}
