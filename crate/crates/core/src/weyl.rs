//! Weyl kernels, magnetic twisting, `Op^A` as dense matrices, the magnetic
//! Weyl system and the inverse kernel map.
//!
//! Operators act on grid-L² over the configuration lattice with weight
//! `h^d`. A kernel `K(x_a, x_b)` becomes the matrix `M = K·h^d`, so that
//! `(Mu)_a = Σ_b K(x_a, x_b) u_b h^d`. Since the weight is uniform, singular
//! values of `M` are those of the operator on grid-L².

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;
use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::exec;
use crate::geometry::{line_phase_at, VectorPotential, DEFAULT_QUAD_ORDER};
use crate::grid::{flatten, unflatten, PhaseGrid, PhasePoint, Point, MAX_DIM};
use crate::mixed::MixedField;
use crate::quadrature;
use crate::symbol::{Symbol, SymbolField};

/// Integral kernel on configuration lattice × configuration lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    grid: PhaseGrid,
    values: DMatrix<Complex64>,
}

/// Matrix of an operator on grid-L²: kernel times `h^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    grid: PhaseGrid,
    matrix: DMatrix<Complex64>,
}

fn check_finite(m: &DMatrix<Complex64>, what: &'static str) -> Result<()> {
    if m.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::NonFinite(what));
    }
    Ok(())
}

fn check_square(grid: &PhaseGrid, m: &DMatrix<Complex64>) -> Result<()> {
    let n = grid.config_len();
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::InvalidParameter(format!(
            "matrix is {}x{}, grid needs {n}x{n}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Builds an `N × N` matrix from `f(row, col)`, parallel over columns.
fn assemble(n: usize, f: impl Fn(usize, usize) -> Complex64 + Sync + Send) -> DMatrix<Complex64> {
    let cols = exec::map_range(n, |b| (0..n).map(|a| f(a, b)).collect::<Vec<_>>());
    DMatrix::from_vec(n, n, cols.concat())
}

/// Row-major CSV, one matrix row per line, entries as `re,im` pairs.
fn write_matrix_csv<W: Write>(m: &DMatrix<Complex64>, mut out: W) -> io::Result<()> {
    for a in 0..m.nrows() {
        let mut line = String::new();
        for b in 0..m.ncols() {
            if b > 0 {
                line.push(',');
            }
            let v = m[(a, b)];
            line.push_str(&format!("{:e},{:e}", v.re, v.im));
        }
        line.push_str("\r\n");
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// Binary container: magic `MWM1`, rows and cols as little-endian `u64`,
/// then row-major `f64` pairs `(re, im)`.
fn write_matrix_binary<W: Write>(m: &DMatrix<Complex64>, mut out: W) -> io::Result<()> {
    out.write_all(b"MWM1")?;
    out.write_all(&(m.nrows() as u64).to_le_bytes())?;
    out.write_all(&(m.ncols() as u64).to_le_bytes())?;
    for a in 0..m.nrows() {
        for b in 0..m.ncols() {
            let v = m[(a, b)];
            out.write_all(&v.re.to_le_bytes())?;
            out.write_all(&v.im.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Reads the binary container written by `write_binary`.
pub fn read_matrix_binary<R: io::Read>(mut r: R) -> io::Result<DMatrix<Complex64>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != b"MWM1" {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "bad magic"));
    }
    let mut u = [0u8; 8];
    r.read_exact(&mut u)?;
    let rows = u64::from_le_bytes(u) as usize;
    r.read_exact(&mut u)?;
    let cols = u64::from_le_bytes(u) as usize;
    let mut m = DMatrix::zeros(rows, cols);
    for a in 0..rows {
        for b in 0..cols {
            r.read_exact(&mut u)?;
            let re = f64::from_le_bytes(u);
            r.read_exact(&mut u)?;
            m[(a, b)] = Complex64::new(re, f64::from_le_bytes(u));
        }
    }
    Ok(m)
}

impl Kernel {
    pub fn from_matrix(grid: &PhaseGrid, values: DMatrix<Complex64>) -> Result<Self> {
        check_square(grid, &values)?;
        check_finite(&values, "kernel")?;
        Ok(Kernel { grid: *grid, values })
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }
    pub fn values(&self) -> &DMatrix<Complex64> {
        &self.values
    }
    pub fn get(&self, a: usize, b: usize) -> Complex64 {
        self.values[(a, b)]
    }

    pub fn to_operator(&self) -> OperatorMatrix {
        OperatorMatrix {
            grid: self.grid,
            matrix: &self.values * Complex64::new(self.grid.w_x(), 0.0),
        }
    }

    pub fn max_abs_diff(&self, other: &Kernel) -> f64 {
        (&self.values - &other.values).iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        write_matrix_csv(&self.values, out)
    }
    pub fn write_binary<W: Write>(&self, out: W) -> io::Result<()> {
        write_matrix_binary(&self.values, out)
    }
}

impl OperatorMatrix {
    pub fn from_matrix(grid: &PhaseGrid, matrix: DMatrix<Complex64>) -> Result<Self> {
        check_square(grid, &matrix)?;
        check_finite(&matrix, "operator matrix")?;
        Ok(OperatorMatrix { grid: *grid, matrix })
    }

    pub fn identity(grid: &PhaseGrid) -> Self {
        let n = grid.config_len();
        OperatorMatrix {
            grid: *grid,
            matrix: DMatrix::identity(n, n),
        }
    }

    pub fn zeros(grid: &PhaseGrid) -> Self {
        let n = grid.config_len();
        OperatorMatrix {
            grid: *grid,
            matrix: DMatrix::zeros(n, n),
        }
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }
    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }
    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    /// `M / h^d`.
    pub fn kernel(&self) -> Kernel {
        Kernel {
            grid: self.grid,
            values: &self.matrix / Complex64::new(self.grid.w_x(), 0.0),
        }
    }

    pub fn adjoint(&self) -> Self {
        OperatorMatrix {
            grid: self.grid,
            matrix: self.matrix.adjoint(),
        }
    }

    /// Operator product `self ∘ other`.
    pub fn compose(&self, other: &OperatorMatrix) -> Self {
        OperatorMatrix {
            grid: self.grid,
            matrix: &self.matrix * &other.matrix,
        }
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        OperatorMatrix {
            grid: self.grid,
            matrix: &self.matrix * c,
        }
    }

    pub fn add_scaled(&mut self, c: Complex64, other: &OperatorMatrix) {
        self.matrix += &other.matrix * c;
    }

    pub fn apply(&self, u: &[Complex64]) -> Vec<Complex64> {
        let v = nalgebra::DVector::from_column_slice(u);
        (&self.matrix * v).as_slice().to_vec()
    }

    pub fn max_abs(&self) -> f64 {
        self.matrix.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn max_abs_diff(&self, other: &OperatorMatrix) -> f64 {
        (&self.matrix - &other.matrix).iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        write_matrix_csv(&self.matrix, out)
    }
    pub fn write_binary<W: Write>(&self, out: W) -> io::Result<()> {
        write_matrix_binary(&self.matrix, out)
    }
}

/// `(2π)^{-d}`: the single constant between the mixed representation and
/// kernels. Fixed by `Op(1) = identity`.
fn kernel_constant(d: usize) -> f64 {
    (2.0 * PI).powi(-(d as i32))
}

/// Symbol-lattice index of the midpoint and `v`-bin of `x_b - x_a`.
#[inline]
pub(crate) fn midpoint_and_offset(grid: &PhaseGrid, a: usize, b: usize) -> (usize, usize) {
    let d = grid.dim();
    let n = grid.n();
    let nf = grid.field_n();
    let (ia, ib) = (unflatten(a, n, d), unflatten(b, n, d));
    let mut s = [0usize; MAX_DIM];
    let mut v = [0usize; MAX_DIM];
    for ax in 0..d {
        s[ax] = ia[ax] + ib[ax];
        v[ax] = (ib[ax] + nf - ia[ax]) % nf;
    }
    (flatten(&s, nf, d), flatten(&v, nf, d))
}

/// `K(x_a, x_b) = (2π)^{-d} M((x_a+x_b)/2, x_b - x_a)`.
pub fn kernel_from_mixed(m: &MixedField) -> Kernel {
    let g = *m.grid();
    let c = kernel_constant(g.dim());
    let values = assemble(g.config_len(), |a, b| {
        let (s, v) = midpoint_and_offset(&g, a, b);
        m.get(s, v) * c
    });
    Kernel { grid: g, values }
}

/// `𝔚F` from samples on the symbol lattice.
pub fn weyl_kernel(field: &SymbolField) -> Kernel {
    kernel_from_mixed(&MixedField::from_field(field))
}

pub fn weyl_kernel_symbol(symbol: &dyn Symbol, grid: &PhaseGrid) -> Result<Kernel> {
    Ok(weyl_kernel(&SymbolField::sample(symbol, grid)?))
}

fn check_potential(a: &VectorPotential, grid: &PhaseGrid) -> Result<()> {
    if a.dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: a.dim(),
        });
    }
    Ok(())
}

/// `Λ^A(x_a, x_b)` for all lattice pairs.
pub fn line_phase_matrix(a: &VectorPotential, grid: &PhaseGrid) -> Result<DMatrix<Complex64>> {
    check_potential(a, grid)?;
    let n = grid.config_len();
    if a.is_zero() {
        return Ok(DMatrix::from_element(n, n, Complex64::new(1.0, 0.0)));
    }
    let rule = quadrature::rule(DEFAULT_QUAD_ORDER);
    let pts: Vec<Point> = (0..n).map(|i| grid.config_point(i)).collect();
    Ok(assemble(n, |i, j| line_phase_at(a, &pts[i], &pts[j], rule).value()))
}

/// `K^A = Λ^A ⊙ K`.
pub fn twist_kernel(k: &Kernel, a: &VectorPotential) -> Result<Kernel> {
    let lam = line_phase_matrix(a, &k.grid)?;
    Ok(Kernel {
        grid: k.grid,
        values: k.values.component_mul(&lam),
    })
}

/// `conj(Λ^A) ⊙ K`, the inverse of [`twist_kernel`].
pub fn untwist_kernel(k: &Kernel, a: &VectorPotential) -> Result<Kernel> {
    let lam = line_phase_matrix(a, &k.grid)?;
    Ok(Kernel {
        grid: k.grid,
        values: k.values.component_mul(&lam.map(|v| v.conj())),
    })
}

/// `Op^A` of a symbol given in the mixed representation.
pub fn op_matrix_mixed(m: &MixedField, a: &VectorPotential) -> Result<OperatorMatrix> {
    Ok(twist_kernel(&kernel_from_mixed(m), a)?.to_operator())
}

pub fn op_matrix_field(field: &SymbolField, a: &VectorPotential) -> Result<OperatorMatrix> {
    Ok(twist_kernel(&weyl_kernel(field), a)?.to_operator())
}

/// `Op^A(F) = Int(Λ^A 𝔚F)` as a matrix on grid-L².
pub fn op_matrix(symbol: &dyn Symbol, a: &VectorPotential, grid: &PhaseGrid) -> Result<OperatorMatrix> {
    check_potential(a, grid)?;
    op_matrix_field(&SymbolField::sample(symbol, grid)?, a)
}

/// `W^A(X)`: `u(z) ↦ Λ^A(z, z+x) e^{(i/2)<ξ,x>} e^{-i<ξ,z>} u(z+x)`, with
/// samples shifted in from outside the box set to zero.
pub fn weyl_system_matrix(
    point: &PhasePoint,
    a: &VectorPotential,
    grid: &PhaseGrid,
) -> Result<OperatorMatrix> {
    check_potential(a, grid)?;
    let d = grid.dim();
    if point.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: point.dim(),
        });
    }
    let steps = grid.lattice_steps(&point.x[..d])?;
    let n = grid.n();
    let len = grid.config_len();
    let rule = quadrature::rule(DEFAULT_QUAD_ORDER);
    let (x, xi) = (point.x, point.xi);
    let half: f64 = (0..d).map(|j| xi[j] * x[j]).sum::<f64>() * 0.5;
    let mut m = DMatrix::zeros(len, len);
    for row in 0..len {
        let idx = unflatten(row, n, d);
        let mut target = [0usize; MAX_DIM];
        let mut inside = true;
        for ax in 0..d {
            let t = idx[ax] as i64 + steps[ax];
            if t < 0 || t >= n as i64 {
                inside = false;
                break;
            }
            target[ax] = t as usize;
        }
        if !inside {
            continue;
        }
        let col = flatten(&target, n, d);
        let z = grid.config_point(row);
        let zx = [z[0] + x[0], z[1] + x[1]];
        let lam = line_phase_at(a, &z, &zx, rule).value();
        let xz: f64 = (0..d).map(|j| xi[j] * z[j]).sum();
        m[(row, col)] = lam * Complex64::from_polar(1.0, half - xz);
    }
    Ok(OperatorMatrix { grid: *grid, matrix: m })
}

/// Inverse of the kernel map.
///
/// At a midpoint `s` only offsets `m = a - b` with the parity of `s` occur,
/// so `ξ ↦ F(s, ξ)` is determined up to the alias `ξ ± π/h`. The preimage
/// returned here lives in the inner band `|ξ_i| < π/(2h)` per axis and
/// vanishes outside it; `weyl_kernel(inverse_weyl(K)) = K` exactly, and
/// `inverse_weyl(weyl_kernel(F)) ≈ F` whenever `F` is negligible outside the
/// inner band.
pub fn inverse_weyl(k: &Kernel) -> SymbolField {
    let g = k.grid;
    let d = g.dim();
    let n = g.n();
    let nf = g.field_n();
    let b = g.field_block();
    let c = (2.0 * PI).powi(d as i32);
    let mut data = vec![Complex64::new(0.0, 0.0); b * b];
    // each (a, b) pair fills exactly one (s, v) slot
    exec::for_each_chunk(&mut data, b, |s_flat, row| {
        let s = unflatten(s_flat, nf, d);
        for (v_flat, val) in row.iter_mut().enumerate() {
            let v = unflatten(v_flat, nf, d);
            let mut ia = [0usize; MAX_DIM];
            let mut ib = [0usize; MAX_DIM];
            let mut ok = true;
            for ax in 0..d {
                let m = crate::fft::signed_bin(v[ax], nf);
                // x_b - x_a = m h, a + b = s
                let twice_b = s[ax] as i64 + m;
                if twice_b.rem_euclid(2) != 0 {
                    ok = false;
                    break;
                }
                let bb = twice_b / 2;
                let aa = s[ax] as i64 - bb;
                if bb < 0 || aa < 0 || bb >= n as i64 || aa >= n as i64 {
                    ok = false;
                    break;
                }
                ia[ax] = aa as usize;
                ib[ax] = bb as usize;
            }
            if ok {
                *val = k.values[(flatten(&ia, n, d), flatten(&ib, n, d))] * c;
            }
        }
    });
    let mixed = MixedField::from_data(&g, data).expect("shape");
    let mut field = mixed.to_field();
    let scale = (1u32 << d) as f64;
    let (lo, hi) = (n / 2, 3 * n / 2);
    exec::for_each_chunk(field.data_mut(), b, |_, row| {
        for (j, val) in row.iter_mut().enumerate() {
            let idx = unflatten(j, nf, d);
            if idx[..d].iter().all(|&i| i >= lo && i < hi) {
                *val *= scale;
            } else {
                *val = Complex64::new(0.0, 0.0);
            }
        }
    });
    field
}
