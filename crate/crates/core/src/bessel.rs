//! Bessel potentials `ψ_s`, the product kernel `Ψ_{s,t} = ψ_s ⊗ ψ̇_t`, the
//! elliptic multiplier `𝔏_{s,t}` on phase space and phase-space convolution.
//!
//! Everything here is spectral and periodic on the lattice it lives on: a
//! kernel on an axis lattice of `N` points and step `Δ` (origin at index
//! `N/2`) is the inverse DFT of `<ω>^{-s}` over the dual frequencies
//! `ω = 2πm/(NΔ)`, scaled so that its discrete integral is exactly 1.

use num_complex::Complex64;
use std::f64::consts::PI;
use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::exec;
use crate::fft::{self, Direction};
use crate::grid::{japanese, unflatten, MAX_DIM};
use crate::symbol::SymbolField;

/// A `d`-dimensional cube lattice `x_i = (i - N/2)·Δ`, `i = 0..N` per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisLattice {
    pub dim: usize,
    pub n: usize,
    pub step: f64,
}

impl AxisLattice {
    pub fn new(dim: usize, n: usize, step: f64) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidParameter(format!("dimension {dim}")));
        }
        if n < 4 || n % 2 != 0 {
            return Err(Error::InvalidParameter(format!("need an even point count >= 4, got {n}")));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidParameter(format!("step {step}")));
        }
        Ok(AxisLattice { dim, n, step })
    }

    /// Lattice covering `[-extent, extent)` with `n` points per axis.
    pub fn with_extent(dim: usize, n: usize, extent: f64) -> Result<Self> {
        Self::new(dim, n, 2.0 * extent / n as f64)
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        (i as f64 - (self.n / 2) as f64) * self.step
    }

    pub fn point(&self, flat: usize) -> [f64; MAX_DIM] {
        let idx = unflatten(flat, self.n, self.dim);
        let mut p = [0.0; MAX_DIM];
        for ax in 0..self.dim {
            p[ax] = self.coordinate(idx[ax]);
        }
        p
    }

    /// Dual frequency of FFT bin `m`.
    pub fn frequency(&self, m: usize) -> f64 {
        2.0 * PI * fft::signed_bin(m, self.n) as f64 / (self.n as f64 * self.step)
    }

    pub fn cell(&self) -> f64 {
        self.step.powi(self.dim as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaseSpace {
    Configuration,
    Momentum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BesselKernel {
    pub order: f64,
    pub space: BaseSpace,
    pub lattice: AxisLattice,
    /// Row-major samples, origin at index `N/2` on every axis.
    pub samples: Vec<f64>,
    /// `Σ |ψ| Δ^d`.
    pub l1: f64,
    /// Largest discarded imaginary part.
    pub imag_residual: f64,
}

/// `<ω>^{exponent}` on the FFT bins of `shape` axes taken from `lattices`.
fn multiplier(lattices: &[AxisLattice], exponents: &[f64], axis_group: &[usize], total: usize) -> Vec<f64> {
    let shape: Vec<usize> = axis_group.iter().map(|&g| lattices[g].n).collect();
    let rank = shape.len();
    // frequency tables per axis
    let freqs: Vec<Vec<f64>> = axis_group
        .iter()
        .map(|&g| (0..lattices[g].n).map(|m| lattices[g].frequency(m)).collect())
        .collect();
    let groups = lattices.len();
    exec::map_range(total, |flat| {
        let mut rem = flat;
        let mut sq = [0.0f64; 2];
        for ax in (0..rank).rev() {
            let m = rem % shape[ax];
            rem /= shape[ax];
            let w = freqs[ax][m];
            sq[axis_group[ax]] += w * w;
        }
        (0..groups)
            .map(|gi| {
                if exponents[gi] == 0.0 {
                    1.0
                } else {
                    (1.0 + sq[gi]).powf(0.5 * exponents[gi])
                }
            })
            .product()
    })
}

/// `ψ_s`: the lattice fundamental solution of `(1 - Δ)^{s/2}`.
pub fn bessel_kernel(order: f64, lattice: &AxisLattice, space: BaseSpace) -> Result<BesselKernel> {
    if !(order > 0.0 && order.is_finite()) {
        return Err(Error::InvalidParameter(format!("Bessel order must be positive, got {order}")));
    }
    let d = lattice.dim;
    let total = lattice.len();
    let mult = multiplier(&[*lattice], &[-order], &vec![0; d], total);
    let mut data: Vec<Complex64> = mult.into_iter().map(|v| Complex64::new(v, 0.0)).collect();
    let shape = vec![lattice.n; d];
    fft::transform_all(&mut data, &shape, Direction::Inverse);
    let scale = 1.0 / (lattice.n as f64 * lattice.step).powi(d as i32);
    let centered = fft::roll(&data, &shape, &vec![lattice.n / 2; d]);
    let imag_residual = centered.iter().fold(0.0f64, |m, v| m.max((v.im * scale).abs()));
    let samples: Vec<f64> = centered.iter().map(|v| v.re * scale).collect();
    let l1 = samples.iter().map(|v| v.abs()).sum::<f64>() * lattice.cell();
    Ok(BesselKernel {
        order,
        space,
        lattice: *lattice,
        samples,
        l1,
        imag_residual,
    })
}

impl BesselKernel {
    /// `Σ ψ Δ^d`.
    pub fn mass(&self) -> f64 {
        self.samples.iter().sum::<f64>() * self.lattice.cell()
    }

    /// Samples along the first axis through the origin, `i = N/2..N`.
    pub fn profile(&self) -> Vec<(f64, f64)> {
        let l = self.lattice;
        let n = l.n;
        let stride = n.pow(l.dim as u32 - 1);
        // origin has index N/2 on every axis
        let origin: usize = (0..l.dim).map(|ax| (n / 2) * n.pow((l.dim - 1 - ax) as u32)).sum();
        (n / 2..n)
            .map(|i| {
                let idx = origin + (i - n / 2) * stride;
                (l.coordinate(i).abs(), self.samples[idx])
            })
            .collect()
    }

    /// Columns `|x|, psi`, RFC-4180 line endings.
    pub fn write_profile_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        out.write_all(b"abs_x,psi\r\n")?;
        for (r, v) in self.profile() {
            out.write_all(format!("{r:e},{v:e}\r\n").as_bytes())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SlopeFit {
    Fitted {
        slope: f64,
        expected: f64,
        window: (f64, f64),
        points: usize,
    },
    /// `s - d ≥ 0`: the kernel is bounded at the origin.
    Skipped { reason: String },
}

/// Least-squares slope of `log ψ_s` against `log |x|` along the first axis
/// over `[8Δ, 80Δ]`.
pub fn near_origin_slope(psi: &BesselKernel) -> Result<SlopeFit> {
    let d = psi.lattice.dim as f64;
    let expected = psi.order - d;
    if expected >= 0.0 {
        return Ok(SlopeFit::Skipped {
            reason: format!("s - d = {expected} >= 0, no blow-up at the origin"),
        });
    }
    let step = psi.lattice.step;
    let (lo, hi) = (8.0 * step, 80.0 * step);
    let half_box = 0.5 * psi.lattice.n as f64 * step;
    if hi > 0.25 * half_box {
        return Err(Error::InsufficientResolution(format!(
            "fit window up to {hi} needs a box half-width of at least {}, have {half_box}",
            4.0 * hi
        )));
    }
    let pts: Vec<(f64, f64)> = psi
        .profile()
        .into_iter()
        .filter(|&(r, v)| r >= lo - 1e-12 && r <= hi + 1e-12 && v > 0.0)
        .map(|(r, v)| (r.ln(), v.ln()))
        .collect();
    if pts.len() < 10 {
        return Err(Error::InsufficientResolution(format!("only {} positive samples in window", pts.len())));
    }
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
    let (mx, my) = (sx / m, sy / m);
    let (num, den) = pts
        .iter()
        .fold((0.0, 0.0), |(n, dd), p| (n + (p.0 - mx) * (p.1 - my), dd + (p.0 - mx).powi(2)));
    Ok(SlopeFit::Fitted {
        slope: num / den,
        expected,
        window: (lo, hi),
        points: pts.len(),
    })
}

fn field_axes(f: &SymbolField) -> (AxisLattice, AxisLattice) {
    let g = f.grid();
    let nf = g.field_n();
    (
        AxisLattice {
            dim: g.dim(),
            n: nf,
            step: 0.5 * g.h(),
        },
        AxisLattice {
            dim: g.dim(),
            n: nf,
            step: 0.5 * g.k(),
        },
    )
}

/// `Ψ_{s,t}(x, ξ) = ψ_s(x) ψ̇_t(ξ)` on the symbol lattice of `grid`.
pub fn product_kernel(s: f64, t: f64, grid: &crate::grid::PhaseGrid) -> Result<SymbolField> {
    let zero = SymbolField::zeros(grid);
    let (lx, lxi) = field_axes(&zero);
    let px = bessel_kernel(s, &lx, BaseSpace::Configuration)?;
    let pxi = bessel_kernel(t, &lxi, BaseSpace::Momentum)?;
    let b = grid.field_block();
    let data = exec::map_range(b * b, |i| Complex64::new(px.samples[i / b] * pxi.samples[i % b], 0.0));
    SymbolField::from_data(grid, data)
}

/// `𝔏_{s,t} = (1 - Δ_x)^{s/2} (1 - Δ_ξ)^{t/2}` as a Fourier multiplier on
/// the symbol lattice. Negative orders give the inverse.
pub fn elliptic_multiplier(f: &SymbolField, s: f64, t: f64) -> SymbolField {
    if s == 0.0 && t == 0.0 {
        return f.clone();
    }
    let g = *f.grid();
    let d = g.dim();
    let (lx, lxi) = field_axes(f);
    let shape = g.field_shape();
    let group: Vec<usize> = (0..2 * d).map(|ax| if ax < d { 0 } else { 1 }).collect();
    let total = f.data().len();
    let mult = multiplier(&[lx, lxi], &[s, t], &group, total);
    let mut data = f.data().to_vec();
    fft::transform_all(&mut data, &shape, Direction::Forward);
    let norm = 1.0 / total as f64;
    for (v, m) in data.iter_mut().zip(&mult) {
        *v *= m * norm;
    }
    fft::transform_all(&mut data, &shape, Direction::Inverse);
    SymbolField::from_data(&g, data).expect("shape preserved")
}

/// Discrete phase-space convolution
/// `(f * g)(X) = Σ_Y f(Y) g(X - Y) (h/2)^d (k/2)^d`, periodic on the symbol
/// lattice; the lattice delta of mass 1 at the origin is its unit.
pub fn phase_convolution(f: &SymbolField, g: &SymbolField) -> Result<SymbolField> {
    if f.grid() != g.grid() {
        return Err(Error::InvalidParameter("fields on different grids".into()));
    }
    let grid = *f.grid();
    let shape = grid.field_shape();
    let nf = grid.field_n();
    let mut a = f.data().to_vec();
    let mut b = fft::roll(g.data(), &shape, &vec![nf / 2; shape.len()]);
    fft::transform_all(&mut a, &shape, Direction::Forward);
    fft::transform_all(&mut b, &shape, Direction::Forward);
    let total = a.len();
    let w = grid.field_w_x() * grid.field_w_xi() / total as f64;
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y * w;
    }
    fft::transform_all(&mut a, &shape, Direction::Inverse);
    SymbolField::from_data(&grid, a)
}

/// The lattice delta of mass 1 at the phase-space origin.
pub fn phase_delta(grid: &crate::grid::PhaseGrid) -> SymbolField {
    let mut f = SymbolField::zeros(grid);
    let d = grid.dim();
    let nf = grid.field_n();
    let b = grid.field_block();
    let centre: usize = (0..d).map(|ax| grid.n() * nf.pow((d - 1 - ax) as u32)).sum();
    f.data_mut()[centre * b + centre] = Complex64::new(1.0 / (grid.field_w_x() * grid.field_w_xi()), 0.0);
    f
}

/// `max |f - (𝔏_{s,t} f) * Ψ_{s,t}|`.
pub fn reconstruct_check(f: &SymbolField, s: f64, t: f64) -> Result<f64> {
    let lf = elliptic_multiplier(f, s, t);
    let psi = if s == 0.0 && t == 0.0 {
        phase_delta(f.grid())
    } else {
        kernel_or_delta(s, t, f.grid())?
    };
    let back = phase_convolution(&lf, &psi)?;
    Ok(back.max_abs_diff(f))
}

/// `ψ_s ⊗ ψ̇_t`, with a lattice delta standing in for an order-0 factor.
fn kernel_or_delta(s: f64, t: f64, grid: &crate::grid::PhaseGrid) -> Result<SymbolField> {
    let zero = SymbolField::zeros(grid);
    let (lx, lxi) = field_axes(&zero);
    let axis = |order: f64, l: &AxisLattice, space| -> Result<Vec<f64>> {
        if order == 0.0 {
            let mut v = vec![0.0; l.len()];
            let centre: usize = (0..l.dim).map(|ax| (l.n / 2) * l.n.pow((l.dim - 1 - ax) as u32)).sum();
            v[centre] = 1.0 / l.cell();
            Ok(v)
        } else {
            Ok(bessel_kernel(order, l, space)?.samples)
        }
    };
    let px = axis(s, &lx, BaseSpace::Configuration)?;
    let pxi = axis(t, &lxi, BaseSpace::Momentum)?;
    let b = grid.field_block();
    SymbolField::from_data(
        grid,
        exec::map_range(b * b, |i| Complex64::new(px[i / b] * pxi[i % b], 0.0)),
    )
}

/// `<v>` re-exported for multiplier checks.
pub fn bracket(v: &[f64]) -> f64 {
    japanese(v)
}
