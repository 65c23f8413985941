//! Phase-space discretization.
//!
//! Two lattices live on a [`PhaseGrid`]:
//!
//! * the **configuration lattice** `x_a = -L + a·h`, `a = 0..n`, `h = 2L/n`
//!   per axis, with the dual lattice `ξ_j = (j - n/2)·k`, `k = π/L`. Operators
//!   act on grid-L² over this lattice with weight `w_x = h^d`; `h·k·n = 2π`.
//! * the **symbol lattice** (half-step refinement) `x_s = -L + s·h/2`,
//!   `s = 0..2n`, and `ξ_j = (j - n)·k/2`, `j = 0..2n`. Every midpoint
//!   `(x_a + x_b)/2` is the symbol-lattice point `s = a + b`, so symbols are
//!   sampled there and never interpolated. The momentum band is the same as
//!   on the configuration lattice, `[-π/h, π/h)`, at half the spacing, so the
//!   discrete Weyl kernel has period `4L` in `x - y` and no wraparound
//!   occurs for `|x - y| < 2L`.
//!
//! Total measure of both lattices is `(2L)^d (n k)^d = (2L·2π/h)^d`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 2;

/// Fixed-capacity point; only the first `dim` components are meaningful.
pub type Point = [f64; MAX_DIM];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct PhaseGrid {
    dim: usize,
    n: usize,
    extent: f64,
}

/// Serialized form of a grid: `{"d": 2, "n": 16, "L": 6.0}`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub d: usize,
    pub n: usize,
    #[serde(rename = "L")]
    pub extent: f64,
}

impl TryFrom<GridSpec> for PhaseGrid {
    type Error = Error;
    fn try_from(s: GridSpec) -> Result<Self> {
        make_grid(s.d, s.n, s.extent)
    }
}

impl From<PhaseGrid> for GridSpec {
    fn from(g: PhaseGrid) -> Self {
        GridSpec {
            d: g.dim,
            n: g.n,
            extent: g.extent,
        }
    }
}

pub fn make_grid(d: usize, n_per_axis: usize, x_extent: f64) -> Result<PhaseGrid> {
    if !(1..=MAX_DIM).contains(&d) {
        return Err(Error::InvalidGrid(format!("d must be 1 or 2, got {d}")));
    }
    if n_per_axis % 2 != 0 {
        return Err(Error::InvalidGrid("n must be even".into()));
    }
    if n_per_axis < 8 {
        return Err(Error::InvalidGrid(format!("n must be >= 8, got {n_per_axis}")));
    }
    if !(x_extent.is_finite() && x_extent > 0.0) {
        return Err(Error::InvalidGrid(format!(
            "extent must be positive, got {x_extent}"
        )));
    }
    Ok(PhaseGrid {
        dim: d,
        n: n_per_axis,
        extent: x_extent,
    })
}

impl PhaseGrid {
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn extent(&self) -> f64 {
        self.extent
    }
    /// Configuration step `h = 2L/n`.
    pub fn h(&self) -> f64 {
        2.0 * self.extent / self.n as f64
    }
    /// Dual step `k = π/L`.
    pub fn k(&self) -> f64 {
        PI / self.extent
    }
    pub fn w_x(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }
    pub fn w_xi(&self) -> f64 {
        self.k().powi(self.dim as i32)
    }
    /// Number of configuration points, i.e. the operator matrix size.
    pub fn config_len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }
    pub fn position(&self, a: usize) -> f64 {
        -self.extent + a as f64 * self.h()
    }
    pub fn dual(&self, j: usize) -> f64 {
        (j as f64 - (self.n / 2) as f64) * self.k()
    }
    /// Configuration point for a flat (row-major) lattice index.
    pub fn config_point(&self, flat: usize) -> Point {
        let idx = unflatten(flat, self.n, self.dim);
        let mut p = [0.0; MAX_DIM];
        for ax in 0..self.dim {
            p[ax] = self.position(idx[ax]);
        }
        p
    }

    // ---- symbol lattice ----

    /// Points per axis on the symbol lattice (`2n`).
    pub fn field_n(&self) -> usize {
        2 * self.n
    }
    /// Points on the symbol lattice in either x or ξ (`(2n)^d`).
    pub fn field_block(&self) -> usize {
        self.field_n().pow(self.dim as u32)
    }
    pub fn field_x(&self, s: usize) -> f64 {
        -self.extent + s as f64 * 0.5 * self.h()
    }
    pub fn field_xi(&self, j: usize) -> f64 {
        (j as f64 - self.n as f64) * 0.5 * self.k()
    }
    pub fn field_w_x(&self) -> f64 {
        (0.5 * self.h()).powi(self.dim as i32)
    }
    pub fn field_w_xi(&self) -> f64 {
        (0.5 * self.k()).powi(self.dim as i32)
    }
    pub fn field_x_point(&self, flat: usize) -> Point {
        let idx = unflatten(flat, self.field_n(), self.dim);
        let mut p = [0.0; MAX_DIM];
        for ax in 0..self.dim {
            p[ax] = self.field_x(idx[ax]);
        }
        p
    }
    pub fn field_xi_point(&self, flat: usize) -> Point {
        let idx = unflatten(flat, self.field_n(), self.dim);
        let mut p = [0.0; MAX_DIM];
        for ax in 0..self.dim {
            p[ax] = self.field_xi(idx[ax]);
        }
        p
    }
    /// Shape of a symbol-lattice array: d x-axes then d ξ-axes.
    pub fn field_shape(&self) -> Vec<usize> {
        vec![self.field_n(); 2 * self.dim]
    }

    /// Lattice steps of `x` per axis, or an error when some component is
    /// not an integer multiple of `h`.
    pub fn lattice_steps(&self, x: &[f64]) -> Result<[i64; MAX_DIM]> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let h = self.h();
        let mut out = [0i64; MAX_DIM];
        for (ax, &c) in x.iter().enumerate() {
            let r = (c / h).round();
            if (c - r * h).abs() > 1e-9 * h.max(1.0) {
                return Err(Error::NotOnLattice(x.to_vec()));
            }
            out[ax] = r as i64;
        }
        Ok(out)
    }
}

/// Row-major multi-index of `flat` in a cube with `base` points per axis.
#[inline]
pub fn unflatten(flat: usize, base: usize, dim: usize) -> [usize; MAX_DIM] {
    let mut idx = [0usize; MAX_DIM];
    let mut rem = flat;
    for ax in (0..dim).rev() {
        idx[ax] = rem % base;
        rem /= base;
    }
    idx
}

#[inline]
pub fn flatten(idx: &[usize], base: usize, dim: usize) -> usize {
    let mut f = 0;
    for &i in idx.iter().take(dim) {
        f = f * base + i;
    }
    f
}

/// A point `X = (x, ξ)` of phase space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    dim: usize,
    pub x: Point,
    pub xi: Point,
}

impl PhasePoint {
    pub fn new(x: &[f64], xi: &[f64]) -> Result<Self> {
        if x.len() != xi.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: xi.len(),
            });
        }
        if x.is_empty() || x.len() > MAX_DIM {
            return Err(Error::InvalidParameter(format!(
                "phase point dimension {} not in 1..=2",
                x.len()
            )));
        }
        if x.iter().chain(xi).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("phase point"));
        }
        let mut p = PhasePoint {
            dim: x.len(),
            x: [0.0; MAX_DIM],
            xi: [0.0; MAX_DIM],
        };
        p.x[..x.len()].copy_from_slice(x);
        p.xi[..xi.len()].copy_from_slice(xi);
        Ok(p)
    }

    pub fn origin(dim: usize) -> Self {
        PhasePoint {
            dim,
            x: [0.0; MAX_DIM],
            xi: [0.0; MAX_DIM],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn neg(&self) -> Self {
        let mut p = *self;
        for ax in 0..MAX_DIM {
            p.x[ax] = -p.x[ax];
            p.xi[ax] = -p.xi[ax];
        }
        p
    }
}

/// `σ(X, Y) = <ξ, y> - <η, x>` for `X = (x, ξ)`, `Y = (y, η)`.
pub fn symplectic_form(a: &PhasePoint, b: &PhasePoint) -> Result<f64> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            got: b.dim,
        });
    }
    Ok((0..a.dim).map(|j| a.xi[j] * b.x[j] - b.xi[j] * a.x[j]).sum())
}

/// `<v> = sqrt(1 + |v|^2)`.
#[inline]
pub fn japanese(v: &[f64]) -> f64 {
    (1.0 + v.iter().map(|c| c * c).sum::<f64>()).sqrt()
}
