//! The mixed `(x, v)` representation of symbols.
//!
//! For a symbol `F(x, ξ)` on the symbol lattice,
//! `M_F(x, v) = ∫ e^{-i<ξ, v>} F(x, ξ) dξ`, sampled at `v = m·h` with
//! `m ∈ [-n, n)` per axis (stored at FFT bin `m mod 2n`). The Weyl kernel is
//! `K(x, y) = (2π)^{-d} M_F((x+y)/2, y - x)`, and the ξ-convolution becomes a
//! pointwise product: `M_{f ⋆ g} = M_f · M_g`, with unit `M ≡ 1`.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::exec;
use crate::fft::{self, Direction};
use crate::grid::{unflatten, PhaseGrid, Point, MAX_DIM};
use crate::symbol::SymbolField;

#[derive(Debug, Clone, PartialEq)]
pub struct MixedField {
    grid: PhaseGrid,
    data: Vec<Complex64>,
}

/// `(-1)^{Σ m}` for the flat bin index of a `v`-block.
#[inline]
fn parity_sign(v_flat: usize, nf: usize, dim: usize) -> f64 {
    let idx = unflatten(v_flat, nf, dim);
    if idx[..dim].iter().sum::<usize>() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl MixedField {
    /// The unit for the pointwise product (`1 ⊗ δ₀` as a symbol).
    pub fn unit(grid: &PhaseGrid) -> Self {
        let b = grid.field_block();
        MixedField {
            grid: *grid,
            data: vec![Complex64::new(1.0, 0.0); b * b],
        }
    }

    pub fn from_data(grid: &PhaseGrid, data: Vec<Complex64>) -> Result<Self> {
        let b = grid.field_block();
        if data.len() != b * b {
            return Err(Error::InvalidParameter(format!(
                "mixed field has {} samples, grid needs {}",
                data.len(),
                b * b
            )));
        }
        Ok(MixedField { grid: *grid, data })
    }

    /// `M(x_s, v) = f(x_s, v)` evaluated pointwise.
    pub fn from_fn(grid: &PhaseGrid, f: impl Fn(&Point, &Point) -> Complex64 + Sync + Send) -> Self {
        let b = grid.field_block();
        let mut data = vec![Complex64::new(0.0, 0.0); b * b];
        exec::for_each_chunk(&mut data, b, |xs, row| {
            let x = grid.field_x_point(xs);
            for (vf, val) in row.iter_mut().enumerate() {
                *val = f(&x, &mixed_v(grid, vf));
            }
        });
        MixedField { grid: *grid, data }
    }

    pub fn from_field(field: &SymbolField) -> Self {
        let g = *field.grid();
        let d = g.dim();
        let nf = g.field_n();
        let b = g.field_block();
        let mut data = field.data().to_vec();
        let axes: Vec<usize> = (d..2 * d).collect();
        fft::transform_axes(&mut data, &g.field_shape(), &axes, Direction::Forward);
        let c = g.field_w_xi();
        let signs: Vec<f64> = (0..b).map(|v| c * parity_sign(v, nf, d)).collect();
        exec::for_each_chunk(&mut data, b, |_, row| {
            for (v, s) in row.iter_mut().zip(&signs) {
                *v *= s;
            }
        });
        MixedField { grid: g, data }
    }

    pub fn to_field(&self) -> SymbolField {
        let g = self.grid;
        let d = g.dim();
        let nf = g.field_n();
        let b = g.field_block();
        let c = (g.h() / (2.0 * PI)).powi(d as i32);
        let signs: Vec<f64> = (0..b).map(|v| c * parity_sign(v, nf, d)).collect();
        let mut data = self.data.clone();
        exec::for_each_chunk(&mut data, b, |_, row| {
            for (v, s) in row.iter_mut().zip(&signs) {
                *v *= s;
            }
        });
        let axes: Vec<usize> = (d..2 * d).collect();
        fft::transform_axes(&mut data, &g.field_shape(), &axes, Direction::Inverse);
        SymbolField::from_data(&g, data).expect("shape preserved")
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }
    pub fn data(&self) -> &[Complex64] {
        &self.data
    }
    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn get(&self, x_flat: usize, v_flat: usize) -> Complex64 {
        self.data[x_flat * self.grid.field_block() + v_flat]
    }

    /// Pointwise product, i.e. the mixed product of the underlying symbols.
    pub fn product(&self, other: &MixedField) -> Result<MixedField> {
        if self.grid != other.grid {
            return Err(Error::InvalidParameter("mixed fields on different grids".into()));
        }
        let data = exec::map_range(self.data.len(), |i| self.data[i] * other.data[i]);
        Ok(MixedField { grid: self.grid, data })
    }

    /// Multiplies every sample by `f(x_s, v)`.
    pub fn modulate(&mut self, f: impl Fn(&Point, &Point) -> Complex64 + Sync + Send) {
        let g = self.grid;
        let b = g.field_block();
        exec::for_each_chunk(&mut self.data, b, |xs, row| {
            let x = g.field_x_point(xs);
            for (vf, val) in row.iter_mut().enumerate() {
                *val *= f(&x, &mixed_v(&g, vf));
            }
        });
    }

    pub fn max_abs_diff(&self, other: &MixedField) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }
}

/// The `v` coordinate of a flat bin index: `signed_bin(m)·h` per axis.
pub fn mixed_v(grid: &PhaseGrid, v_flat: usize) -> Point {
    let nf = grid.field_n();
    let idx = unflatten(v_flat, nf, grid.dim());
    let mut v = [0.0; MAX_DIM];
    for ax in 0..grid.dim() {
        v[ax] = fft::signed_bin(idx[ax], nf) as f64 * grid.h();
    }
    v
}

/// `f ⋆ g` for symbol fields, through the mixed representation.
pub fn mixed_product(f: &SymbolField, g: &SymbolField) -> Result<SymbolField> {
    Ok(MixedField::from_field(f)
        .product(&MixedField::from_field(g))?
        .to_field())
}
