//! The magnetic Moyal product (kernel route and direct quadrature), the
//! factor `Θ^B_z`, magnetic translations and the magnetic Kato convolution
//! formula.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::exec;
use crate::geometry::{omega_at, parallelogram_flux_at, FieldProfile, MagneticField, VectorPotential, DEFAULT_QUAD_ORDER};
use crate::grid::{flatten, unflatten, PhaseGrid, PhasePoint, Point, MAX_DIM};
use crate::quadrature;
use crate::symbol::{Symbol, SymbolField};
use crate::weyl::{self, inverse_weyl, line_phase_matrix, midpoint_and_offset, untwist_kernel, OperatorMatrix};

pub use crate::mixed::{mixed_product, mixed_v, MixedField};

pub const DEFAULT_NODE_BUDGET: u64 = 1_000_000_000;

fn check_dims(grid: &PhaseGrid, dims: &[usize]) -> Result<()> {
    for &d in dims {
        if d != grid.dim() {
            return Err(Error::DimensionMismatch {
                expected: grid.dim(),
                got: d,
            });
        }
    }
    Ok(())
}

/// `f ♯^B g` as the symbol whose quantization is `Op^A(f) Op^A(g)`.
pub fn moyal_kernel_route(
    f: &dyn Symbol,
    g: &dyn Symbol,
    a: &VectorPotential,
    grid: &PhaseGrid,
) -> Result<SymbolField> {
    check_dims(grid, &[f.dim(), g.dim(), a.dim()])?;
    let of = weyl::op_matrix(f, a, grid)?;
    let og = weyl::op_matrix(g, a, grid)?;
    moyal_of_operators(&of, &og, a)
}

/// Kernel route on already sampled fields.
pub fn moyal_kernel_route_fields(f: &SymbolField, g: &SymbolField, a: &VectorPotential) -> Result<SymbolField> {
    let of = weyl::op_matrix_field(f, a)?;
    let og = weyl::op_matrix_field(g, a)?;
    moyal_of_operators(&of, &og, a)
}

fn moyal_of_operators(of: &OperatorMatrix, og: &OperatorMatrix, a: &VectorPotential) -> Result<SymbolField> {
    let prod = of.compose(og);
    Ok(inverse_weyl(&untwist_kernel(&prod.kernel(), a)?))
}

/// Discretization of the direct oscillatory integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectQuadrature {
    /// The `y, z` step is `h / (2·refine)`, so `x - y` stays on a lattice.
    pub refine: usize,
    /// Half-width of the `y, z` box.
    pub radius: f64,
    /// Step and half-width of the inner momentum integrals.
    pub mu_step: f64,
    pub mu_radius: f64,
}

impl Default for DirectQuadrature {
    fn default() -> Self {
        DirectQuadrature {
            refine: 2,
            radius: 4.5,
            mu_step: 0.125,
            mu_radius: 6.0,
        }
    }
}

impl DirectQuadrature {
    fn validate(&self) -> Result<()> {
        if self.refine == 0 || !(self.radius > 0.0 && self.mu_step > 0.0 && self.mu_radius > 0.0) {
            return Err(Error::InvalidParameter(format!("bad quadrature {self:?}")));
        }
        Ok(())
    }
}

/// Node count of [`moyal_direct`] for the given grid and quadrature.
pub fn moyal_direct_nodes(grid: &PhaseGrid, q: &DirectQuadrature) -> u64 {
    let step = 0.5 * grid.h() / q.refine as f64;
    let ny = 2 * (q.radius / step).ceil() as u64 + 1;
    let per = ny.pow(grid.dim() as u32);
    grid.field_block() as u64 * per * per
}

/// `T(p, z) = Σ_μ Δμ^d e^{2i·sign·<z, μ>} F(p, μ)` on the `p × z` lattices,
/// laid out `[p_flat * nz^d + z_flat]`.
fn momentum_transform(
    sym: &dyn Symbol,
    d: usize,
    p_axis: &[f64],
    z_axis: &[f64],
    mu_axis: &[f64],
    mu_step: f64,
    sign: f64,
) -> Vec<Complex64> {
    let (np, nz, nm) = (p_axis.len(), z_axis.len(), mu_axis.len());
    let table: Vec<Complex64> = z_axis
        .iter()
        .flat_map(|z| mu_axis.iter().map(move |mu| Complex64::from_polar(mu_step, 2.0 * sign * z * mu)))
        .collect();
    let zb = nz.pow(d as u32);
    let pb = np.pow(d as u32);
    if let Some(ps) = sym.as_product() {
        // separable: per-axis one-dimensional transforms
        let xf: Vec<Vec<f64>> = (0..d)
            .map(|j| p_axis.iter().map(|&p| ps.x_factors[j].value(p)).collect())
            .collect();
        let tf: Vec<Vec<Complex64>> = (0..d)
            .map(|j| {
                let vals: Vec<f64> = mu_axis.iter().map(|&m| ps.xi_factors[j].value(m)).collect();
                (0..nz)
                    .map(|iz| (0..nm).map(|im| table[iz * nm + im] * vals[im]).sum())
                    .collect()
            })
            .collect();
        let amp = ps.amplitude;
        let rows = exec::map_range(pb, |pf| {
            let pi = unflatten(pf, np, d);
            let xv: f64 = (0..d).map(|j| xf[j][pi[j]]).product();
            (0..zb)
                .map(|zf| {
                    let zi = unflatten(zf, nz, d);
                    let mut v = amp * xv;
                    for j in 0..d {
                        v *= tf[j][zi[j]];
                    }
                    v
                })
                .collect::<Vec<_>>()
        });
        return rows.concat();
    }
    let rows = exec::map_range(pb, |pf| {
        let pi = unflatten(pf, np, d);
        let mut p = [0.0; MAX_DIM];
        for j in 0..d {
            p[j] = p_axis[pi[j]];
        }
        if d == 1 {
            let vals: Vec<Complex64> = mu_axis.iter().map(|&m| sym.eval(&p, &[m, 0.0])).collect();
            (0..nz)
                .map(|iz| (0..nm).map(|im| table[iz * nm + im] * vals[im]).sum())
                .collect::<Vec<_>>()
        } else {
            // sum over μ_2 first, then μ_1
            let mut partial = vec![Complex64::new(0.0, 0.0); nm * nz];
            for m1 in 0..nm {
                let vals: Vec<Complex64> = mu_axis.iter().map(|&m2| sym.eval(&p, &[mu_axis[m1], m2])).collect();
                for iz in 0..nz {
                    partial[m1 * nz + iz] = (0..nm).map(|im| table[iz * nm + im] * vals[im]).sum();
                }
            }
            let mut out = vec![Complex64::new(0.0, 0.0); nz * nz];
            for z1 in 0..nz {
                for z2 in 0..nz {
                    out[z1 * nz + z2] = (0..nm).map(|m1| table[z1 * nm + m1] * partial[m1 * nz + z2]).sum();
                }
            }
            out
        }
    });
    rows.concat()
}

/// `f ♯^B g` by direct quadrature of
/// `π^{-2d} ∫∫ e^{-2iσ(Y,Z)} ω^B(x,y,z) f(X-Y) g(X-Z) dY dZ`.
///
/// The momentum integrals are done first:
/// `(f ♯^B g)(x, ξ) = π^{-2d} ∫∫ ω^B(x,y,z) e^{2i<ξ, y-z>} f̌(x-y, z) ǧ(x-z, y) dy dz`
/// with `f̌(p, z) = ∫ e^{2i<z,μ>} f(p, μ) dμ` and
/// `ǧ(q, y) = ∫ e^{-2i<y,μ>} g(q, μ) dμ`. Returns samples on the full symbol
/// lattice. Fails with `BudgetExceeded` when the `(x, y, z)` node count
/// exceeds `budget`.
pub fn moyal_direct(
    f: &dyn Symbol,
    g: &dyn Symbol,
    b: &MagneticField,
    grid: &PhaseGrid,
    q: &DirectQuadrature,
    budget: u64,
) -> Result<SymbolField> {
    check_dims(grid, &[f.dim(), g.dim(), b.dim()])?;
    q.validate()?;
    let required = moyal_direct_nodes(grid, q);
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }
    let d = grid.dim();
    let nf = grid.field_n();
    let step = 0.5 * grid.h() / q.refine as f64;
    let r = (q.radius / step).ceil() as usize;
    let ny = 2 * r + 1;
    let y_axis: Vec<f64> = (0..ny).map(|i| (i as f64 - r as f64) * step).collect();
    let np = (nf - 1) * q.refine + 2 * r + 1;
    let l = grid.extent();
    let p_axis: Vec<f64> = (0..np).map(|i| -l + (i as f64 - r as f64) * step).collect();
    let nmu = 2 * (q.mu_radius / q.mu_step).ceil() as usize + 1;
    let mu_axis: Vec<f64> = (0..nmu)
        .map(|i| (i as f64 - ((nmu - 1) / 2) as f64) * q.mu_step)
        .collect();

    let fc = momentum_transform(f, d, &p_axis, &y_axis, &mu_axis, q.mu_step, 1.0);
    let gc = momentum_transform(g, d, &p_axis, &y_axis, &mu_axis, q.mu_step, -1.0);
    let yb = ny.pow(d as u32);

    // ω for constant fields factorizes: e^{-2ib(y1 z2 - y2 z1)}
    let constant_b = if b.is_zero() {
        Some(0.0)
    } else if let FieldProfile::Constant(_) = b.profile() {
        Some(b.b12(&[0.0, 0.0]))
    } else {
        None
    };
    let om_table: Vec<Complex64> = match constant_b {
        Some(bc) => (0..ny * ny)
            .map(|i| Complex64::from_polar(1.0, -2.0 * bc * y_axis[i / ny] * y_axis[i % ny]))
            .collect(),
        None => Vec::new(),
    };
    let rule = quadrature::rule(DEFAULT_QUAD_ORDER);

    let nw = 4 * r + 1;
    let wb = nw.pow(d as u32);
    let xi_table: Vec<Complex64> = (0..nf)
        .flat_map(|j| {
            let xi = grid.field_xi(j);
            (0..nw).map(move |w| Complex64::from_polar(1.0, 2.0 * xi * (w as f64 - 2.0 * r as f64) * step))
        })
        .collect();
    let pref = PI.powi(-2 * d as i32) * step.powi(2 * d as i32);
    let fb = grid.field_block();

    let rows = exec::map_range(fb, |s_flat| {
        let s = unflatten(s_flat, nf, d);
        let x = grid.field_x_point(s_flat);
        let mut acc = vec![Complex64::new(0.0, 0.0); wb];
        for yf in 0..yb {
            let yi = unflatten(yf, ny, d);
            let mut qy = [0usize; MAX_DIM];
            let mut y = [0.0; MAX_DIM];
            for j in 0..d {
                qy[j] = s[j] * q.refine + 2 * r - yi[j];
                y[j] = y_axis[yi[j]];
            }
            let fq = flatten(&qy, np, d) * yb;
            for zf in 0..yb {
                let zi = unflatten(zf, ny, d);
                let mut qz = [0usize; MAX_DIM];
                let mut wi = [0usize; MAX_DIM];
                for j in 0..d {
                    qz[j] = s[j] * q.refine + 2 * r - zi[j];
                    wi[j] = yi[j] + 2 * r - zi[j];
                }
                let omega = if d < 2 {
                    Complex64::new(1.0, 0.0)
                } else if constant_b.is_some() {
                    om_table[yi[0] * ny + zi[1]] * om_table[yi[1] * ny + zi[0]].conj()
                } else {
                    let z = [y_axis[zi[0]], y_axis[zi[1]]];
                    omega_at(b, &x, &y, &z, rule).value()
                };
                let term = omega * fc[fq + zf] * gc[flatten(&qz, np, d) * yb + yf];
                acc[flatten(&wi, nw, d)] += term;
            }
        }
        // Σ_w acc(w) e^{2i<ξ, w>}, separable over axes
        let mut out = vec![Complex64::new(0.0, 0.0); fb];
        if d == 1 {
            for j in 0..nf {
                out[j] = pref * (0..nw).map(|w| xi_table[j * nw + w] * acc[w]).sum::<Complex64>();
            }
        } else {
            let mut partial = vec![Complex64::new(0.0, 0.0); nw * nf];
            for w1 in 0..nw {
                for j2 in 0..nf {
                    partial[w1 * nf + j2] = (0..nw).map(|w2| xi_table[j2 * nw + w2] * acc[w1 * nw + w2]).sum();
                }
            }
            for j1 in 0..nf {
                for j2 in 0..nf {
                    out[j1 * nf + j2] =
                        pref * (0..nw).map(|w1| xi_table[j1 * nw + w1] * partial[w1 * nf + j2]).sum::<Complex64>();
                }
            }
        }
        out
    });
    SymbolField::from_data(grid, rows.concat())
}

/// `Θ^B_z` in the mixed representation: `e^{-i S^B_z(x, v)}`.
pub fn theta_factor(b: &MagneticField, z: &Point, grid: &PhaseGrid) -> MixedField {
    if b.is_zero() || z.iter().all(|&c| c == 0.0) {
        return MixedField::unit(grid);
    }
    let rule = quadrature::rule(DEFAULT_QUAD_ORDER);
    let bb = *b;
    let zz = *z;
    MixedField::from_fn(grid, move |x, v| {
        Complex64::from_polar(1.0, -parallelogram_flux_at(&bb, &zz, x, v, rule))
    })
}

/// `τ_Z g = g(· + Z)` sampled on the symbol lattice.
pub fn translate_symbol(g: &dyn Symbol, z: &PhasePoint, grid: &PhaseGrid) -> Result<SymbolField> {
    check_dims(grid, &[g.dim(), z.dim()])?;
    let (zx, zxi) = (z.x, z.xi);
    Ok(SymbolField::from_fn(grid, |x, xi| {
        g.eval(&[x[0] + zx[0], x[1] + zx[1]], &[xi[0] + zxi[0], xi[1] + zxi[1]])
    }))
}

/// `𝔗^B_Z g = Θ^B_z ⋆ τ_Z g`, in the mixed representation.
pub fn magnetic_translate_mixed(
    g: &dyn Symbol,
    z: &PhasePoint,
    b: &MagneticField,
    grid: &PhaseGrid,
) -> Result<MixedField> {
    check_dims(grid, &[b.dim()])?;
    grid.lattice_steps(&z.x[..grid.dim()])?;
    let tau = MixedField::from_field(&translate_symbol(g, z, grid)?);
    if b.is_zero() {
        return Ok(tau);
    }
    theta_factor(b, &z.x, grid).product(&tau)
}

pub fn magnetic_translate(
    g: &dyn Symbol,
    z: &PhasePoint,
    b: &MagneticField,
    grid: &PhaseGrid,
) -> Result<SymbolField> {
    Ok(magnetic_translate_mixed(g, z, b, grid)?.to_field())
}

/// A truncated phase-space lattice with quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseLattice {
    pub points: Vec<PhasePoint>,
    pub weights: Vec<f64>,
}

impl PhaseLattice {
    /// The single point `0` with weight 1.
    pub fn origin(dim: usize) -> Self {
        PhaseLattice {
            points: vec![PhasePoint::origin(dim)],
            weights: vec![1.0],
        }
    }

    /// `z = i·h`, `|i| ≤ x_half`, and `ζ = j·xi_step`, `|j| ≤ xi_half`, per
    /// axis, each node weighted by `(h·xi_step)^d`.
    pub fn box_lattice(grid: &PhaseGrid, x_half: usize, xi_step: f64, xi_half: usize) -> Result<Self> {
        if !(xi_step > 0.0 && xi_step.is_finite()) {
            return Err(Error::InvalidParameter(format!("xi step {xi_step}")));
        }
        let d = grid.dim();
        let h = grid.h();
        let nx = 2 * x_half + 1;
        let nxi = 2 * xi_half + 1;
        let w = (h * xi_step).powi(d as i32);
        let count = (nx * nxi).pow(d as u32);
        let mut points = Vec::with_capacity(count);
        for xf in 0..nx.pow(d as u32) {
            let xi_idx = unflatten(xf, nx, d);
            let mut x = [0.0; MAX_DIM];
            for j in 0..d {
                x[j] = (xi_idx[j] as f64 - x_half as f64) * h;
            }
            for kf in 0..nxi.pow(d as u32) {
                let ki = unflatten(kf, nxi, d);
                let mut xi = [0.0; MAX_DIM];
                for j in 0..d {
                    xi[j] = (ki[j] as f64 - xi_half as f64) * xi_step;
                }
                points.push(PhasePoint::new(&x[..d], &xi[..d])?);
            }
        }
        Ok(PhaseLattice {
            weights: vec![w; points.len()],
            points,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Per-node data for conjugations by `W^A(Z)` on the grid.
pub(crate) struct Conjugator {
    /// `back[c] = c - z` when inside the box.
    pub(crate) back: Vec<Option<usize>>,
    /// `W^A(Z)_{c, c+z}`.
    pub(crate) entry: Vec<Complex64>,
}

pub(crate) fn conjugator(grid: &PhaseGrid, z: &PhasePoint, a: &VectorPotential) -> Result<Conjugator> {
    let d = grid.dim();
    let n = grid.n();
    let steps = grid.lattice_steps(&z.x[..d])?;
    let len = grid.config_len();
    let rule = quadrature::rule(DEFAULT_QUAD_ORDER);
    let offset = |c: usize, sign: i64| {
        let idx = unflatten(c, n, d);
        let mut t = [0usize; MAX_DIM];
        for ax in 0..d {
            let v = idx[ax] as i64 + sign * steps[ax];
            if v < 0 || v >= n as i64 {
                return None;
            }
            t[ax] = v as usize;
        }
        Some(flatten(&t, n, d))
    };
    let shift: Vec<Option<usize>> = (0..len).map(|c| offset(c, 1)).collect();
    let back: Vec<Option<usize>> = (0..len).map(|c| offset(c, -1)).collect();
    let half: f64 = 0.5 * (0..d).map(|j| z.xi[j] * z.x[j]).sum::<f64>();
    let entry = (0..len)
        .map(|c| {
            if shift[c].is_none() {
                return Complex64::new(0.0, 0.0);
            }
            let xc = grid.config_point(c);
            let xz = [xc[0] + z.x[0], xc[1] + z.x[1]];
            let dot: f64 = (0..d).map(|j| z.xi[j] * xc[j]).sum();
            crate::geometry::line_phase_at(a, &xc, &xz, rule).value() * Complex64::from_polar(1.0, half - dot)
        })
        .collect();
    Ok(Conjugator { back, entry })
}

/// `Σ_Z w_Z f(Z) W^A(Z)* Op^A(Θ^{-τ_z B}_{-z} ⋆ g) W^A(Z)` over a phase
/// lattice. The guard counts `|lattice| · N²` entry updates.
pub fn kato_convolution_expand(
    f: &dyn Symbol,
    g: &dyn Symbol,
    a: &VectorPotential,
    lattice: &PhaseLattice,
    grid: &PhaseGrid,
    budget: u64,
) -> Result<OperatorMatrix> {
    check_dims(grid, &[f.dim(), g.dim(), a.dim()])?;
    let len = grid.config_len();
    let required = lattice.len() as u64 * (len as u64).pow(2);
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }
    let d = grid.dim();
    let b = a.field();
    let mg = MixedField::from_field(&SymbolField::sample(g, grid)?);
    let lam = line_phase_matrix(a, grid)?;
    let c = (2.0 * PI).powi(-(d as i32)) * grid.w_x();
    let rule = quadrature::rule(DEFAULT_QUAD_ORDER);
    let nodes: Vec<(Complex64, Conjugator, MagneticField, Point)> = lattice
        .points
        .iter()
        .zip(&lattice.weights)
        .map(|(z, w)| {
            let fz = f.eval(&z.x, &z.xi) * *w;
            let neg = [-z.x[0], -z.x[1]];
            Ok((fz, conjugator(grid, z, a)?, b.translated(&z.x), neg))
        })
        .collect::<Result<_>>()?;
    let pts: Vec<Point> = (0..len).map(|i| grid.config_point(i)).collect();
    let cols = exec::map_range(len, |col| {
        let mut out = vec![Complex64::new(0.0, 0.0); len];
        for (fz, conj, bz, negz) in &nodes {
            if fz.norm() == 0.0 {
                continue;
            }
            let Some(bp) = conj.back[col] else { continue };
            let wb = conj.entry[bp];
            for (row, o) in out.iter_mut().enumerate() {
                let Some(ap) = conj.back[row] else { continue };
                let wa = conj.entry[ap].conj();
                let (s, v) = midpoint_and_offset(grid, ap, bp);
                let xs = grid.field_x_point(s);
                let vv = [pts[bp][0] - pts[ap][0], pts[bp][1] - pts[ap][1]];
                let phase = Complex64::from_polar(1.0, parallelogram_flux_at(bz, negz, &xs, &vv, rule));
                *o += fz * wa * lam[(ap, bp)] * c * phase * mg.get(s, v) * wb;
            }
        }
        out
    });
    OperatorMatrix::from_matrix(grid, nalgebra::DMatrix::from_vec(len, len, cols.concat()))
}

/// `W^A(Z)* T W^A(Z)` computed by index shifts.
pub fn conjugate_by_weyl_system(t: &OperatorMatrix, z: &PhasePoint, a: &VectorPotential) -> Result<OperatorMatrix> {
    let grid = *t.grid();
    let conj = conjugator(&grid, z, a)?;
    let len = grid.config_len();
    let m = t.matrix();
    let out = nalgebra::DMatrix::from_fn(len, len, |row, col| match (conj.back[row], conj.back[col]) {
        (Some(ap), Some(bp)) => conj.entry[ap].conj() * m[(ap, bp)] * conj.entry[bp],
        _ => Complex64::new(0.0, 0.0),
    });
    OperatorMatrix::from_matrix(&grid, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{poincare_gauge, MagneticField};
    use crate::grid::make_grid;
    use crate::symbol::{Factor1D, FnSymbol, ProductSymbol};
    use crate::weyl::{op_matrix, op_matrix_field, op_matrix_mixed, weyl_kernel, weyl_system_matrix};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_field(grid: &PhaseGrid, seed: u64) -> SymbolField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = grid.field_block();
        let data = (0..b * b)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        SymbolField::from_data(grid, data).unwrap()
    }

    #[test]
    fn kernel_route_identity_and_commutative_subalgebra() {
        let g = make_grid(2, 8, 3.0).unwrap();
        let a = VectorPotential::symmetric(1.0);
        let one = ProductSymbol::constant(2, c(1.0));
        let gs = ProductSymbol::gaussian_at(2, &[0.2, 0.0], &[0.0, 0.4], 0.8, 0.6);
        let prod = moyal_kernel_route(&one, &gs, &a, &g).unwrap();
        let og = op_matrix(&gs, &a, &g).unwrap();
        assert!(op_matrix_field(&prod, &a).unwrap().max_abs_diff(&og) < 1e-12);

        let g1 = make_grid(1, 16, 4.0).unwrap();
        let f = ProductSymbol::position_only(vec![Factor1D::Cosine { freq: 0.5, phase: 0.1 }]).unwrap();
        let h = ProductSymbol::position_only(vec![Factor1D::Gaussian { center: 0.3, rate: 0.2 }]).unwrap();
        let z = VectorPotential::zero(1);
        let fh = moyal_kernel_route(&f, &h, &z, &g1).unwrap();
        let pointwise = FnSymbol::new(1, "fh", move |x, _| f.eval(x, &[0.0; 2]) * h.eval(x, &[0.0; 2]));
        let expect = op_matrix(&pointwise, &z, &g1).unwrap();
        assert!(op_matrix_field(&fh, &z).unwrap().max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn kernel_route_is_associative() {
        let g = make_grid(2, 8, 3.0).unwrap();
        let a = VectorPotential::symmetric(1.0);
        let (f, h, k) = (random_field(&g, 1), random_field(&g, 2), random_field(&g, 3));
        let left = moyal_kernel_route_fields(&moyal_kernel_route_fields(&f, &h, &a).unwrap(), &k, &a).unwrap();
        let right = moyal_kernel_route_fields(&f, &moyal_kernel_route_fields(&h, &k, &a).unwrap(), &a).unwrap();
        let (ol, or) = (op_matrix_field(&left, &a).unwrap(), op_matrix_field(&right, &a).unwrap());
        assert!(ol.max_abs_diff(&or) < 1e-9 * ol.max_abs());
    }

    #[test]
    fn direct_matches_kernel_route_without_field() {
        let g = make_grid(1, 16, 6.0).unwrap();
        let f = ProductSymbol::gaussian(1, 1.0, 1.0);
        let h = ProductSymbol::gaussian_at(1, &[0.5, 0.0], &[-0.3, 0.0], 1.0, 1.0);
        let z = VectorPotential::zero(1);
        let direct = moyal_direct(&f, &h, &MagneticField::zero(1), &g, &DirectQuadrature::default(), DEFAULT_NODE_BUDGET).unwrap();
        let route = moyal_kernel_route(&f, &h, &z, &g).unwrap();
        let (kd, kr) = (weyl_kernel(&direct), weyl_kernel(&route));
        let scale = kr.values().iter().fold(0.0f64, |m, v| m.max(v.norm()));
        assert!(kd.max_abs_diff(&kr) / scale < 1e-5, "{}", kd.max_abs_diff(&kr) / scale);
    }

    #[test]
    fn direct_generic_path_matches_product_path() {
        let g = make_grid(1, 8, 3.0).unwrap();
        let f = ProductSymbol::gaussian(1, 1.0, 0.7);
        let fg = f.clone();
        let generic = FnSymbol::new(1, "gauss", move |x, xi| fg.eval(x, xi));
        let h = ProductSymbol::gaussian_at(1, &[0.2, 0.0], &[0.1, 0.0], 0.9, 1.1);
        let q = DirectQuadrature::default();
        let b = MagneticField::zero(1);
        let p1 = moyal_direct(&f, &h, &b, &g, &q, DEFAULT_NODE_BUDGET).unwrap();
        let p2 = moyal_direct(&generic, &h, &b, &g, &q, DEFAULT_NODE_BUDGET).unwrap();
        assert!(p1.max_abs_diff(&p2) < 1e-12);
    }

    #[test]
    fn direct_conjugate_symmetry_with_field() {
        let g = make_grid(2, 8, 4.0).unwrap();
        let b = MagneticField::constant(1.0);
        let f = ProductSymbol::gaussian_at(2, &[0.3, 0.0], &[0.0, 0.2], 1.0, 1.0).with_amplitude(Complex64::new(0.6, 0.8));
        let h = ProductSymbol::gaussian_at(2, &[0.0, -0.2], &[0.1, 0.0], 1.0, 1.0);
        let q = DirectQuadrature { refine: 1, radius: 4.0, mu_step: 0.125, mu_radius: 6.0 };
        let fh = moyal_direct(&f, &h, &b, &g, &q, DEFAULT_NODE_BUDGET).unwrap();
        let hf = moyal_direct(&h.conj(), &f.conj(), &b, &g, &q, DEFAULT_NODE_BUDGET).unwrap();
        assert!(fh.conj().max_abs_diff(&hf) < 1e-6);
    }

    #[test]
    fn direct_respects_budget() {
        let g = make_grid(2, 8, 4.0).unwrap();
        let f = ProductSymbol::gaussian(2, 1.0, 1.0);
        let err = moyal_direct(&f, &f, &MagneticField::constant(1.0), &g, &DirectQuadrature::default(), 1000);
        assert!(matches!(err, Err(Error::BudgetExceeded { budget: 1000, .. })));
    }

    #[test]
    fn theta_examples() {
        let g = make_grid(2, 8, 3.0).unwrap();
        let unit = MixedField::unit(&g);
        assert_eq!(theta_factor(&MagneticField::zero(2), &[1.0, 0.5], &g), unit);
        assert_eq!(theta_factor(&MagneticField::constant(1.0), &[0.0, 0.0], &g), unit);
        let b = MagneticField::oscillatory(1.0, 0.5);
        let z = [0.75, -0.375];
        let prod = theta_factor(&b, &z, &g).product(&theta_factor(&b.negated(), &z, &g)).unwrap();
        assert!(prod.max_abs_diff(&unit) < 1e-12);
        let f = random_field(&g, 11);
        let back = mixed_product(&prod.to_field(), &f).unwrap();
        assert!(back.max_abs_diff(&f) < 1e-12);
    }

    #[test]
    fn translation_reductions_and_witness() {
        let g = make_grid(2, 16, 6.0).unwrap();
        let gs = ProductSymbol::gaussian(2, 0.5, 0.5);
        let zpt = PhasePoint::new(&[0.75, 0.0], &[0.0, 0.0]).unwrap();
        let plain = translate_symbol(&gs, &zpt, &g).unwrap();
        let t0 = magnetic_translate(&gs, &zpt, &MagneticField::zero(2), &g).unwrap();
        assert!(t0.max_abs_diff(&plain) < 1e-12);
        let b = MagneticField::constant(1.0);
        let id = magnetic_translate(&gs, &PhasePoint::origin(2), &b, &g).unwrap();
        assert!(id.max_abs_diff(&SymbolField::sample(&gs, &g).unwrap()) < 1e-12);
        let tb = magnetic_translate(&gs, &zpt, &b, &g).unwrap();
        assert!(tb.max_abs_diff(&plain) > 1e-2);
        let off = PhasePoint::new(&[0.3, 0.0], &[0.0, 0.0]).unwrap();
        assert!(matches!(magnetic_translate(&gs, &off, &b, &g), Err(Error::NotOnLattice(_))));
    }

    fn conjugation_residual(a: &VectorPotential, z: &PhasePoint) -> f64 {
        let g = make_grid(2, 16, 6.0).unwrap();
        let gs = ProductSymbol::gaussian_at(2, &[0.2, -0.1], &[0.3, 0.0], 1.0, 1.0);
        let og = op_matrix(&gs, a, &g).unwrap();
        let w = weyl_system_matrix(z, a, &g).unwrap();
        let lhs = w.adjoint().compose(&og).compose(&w);
        let shortcut = conjugate_by_weyl_system(&og, z, a).unwrap();
        assert!(lhs.max_abs_diff(&shortcut) < 1e-13);
        let rhs = op_matrix_mixed(&magnetic_translate_mixed(&gs, &z.neg(), &a.field(), &g).unwrap(), a).unwrap();
        lhs.max_abs_diff(&rhs)
    }

    #[test]
    fn conjugation_identity() {
        let z = PhasePoint::new(&[0.75, 0.0], &[0.0, 0.0]).unwrap();
        assert!(conjugation_residual(&VectorPotential::symmetric(1.0), &z) < 1e-6);
        let z = PhasePoint::new(&[0.75, -1.5], &[0.5, -0.25]).unwrap();
        assert!(conjugation_residual(&VectorPotential::landau(1.0), &z) < 1e-6);
        let osc = poincare_gauge(&MagneticField::oscillatory(1.0, 0.5), 16).unwrap();
        assert!(conjugation_residual(&osc, &z) < 1e-6);
    }

    #[test]
    fn kato_expand_with_delta_is_op() {
        let g = make_grid(2, 8, 3.0).unwrap();
        let a = VectorPotential::symmetric(1.0);
        let gs = ProductSymbol::gaussian(2, 0.5, 0.5);
        let f = ProductSymbol::constant(2, c(1.0));
        let out = kato_convolution_expand(&f, &gs, &a, &PhaseLattice::origin(2), &g, DEFAULT_NODE_BUDGET).unwrap();
        assert!(out.max_abs_diff(&op_matrix(&gs, &a, &g).unwrap()) < 1e-12);
    }

    #[test]
    fn kato_expand_terms_are_translates() {
        // each lattice term equals Op^A(g(· - Z)) exactly
        let g = make_grid(2, 16, 4.0).unwrap();
        let a = VectorPotential::symmetric(1.0);
        let gs = ProductSymbol::gaussian(2, 2.0, 0.5);
        let z = PhasePoint::new(&[1.0, -1.0], &[0.5, 0.25]).unwrap();
        let lattice = PhaseLattice { points: vec![z], weights: vec![1.0] };
        let f = ProductSymbol::constant(2, c(1.0));
        let out = kato_convolution_expand(&f, &gs, &a, &lattice, &g, DEFAULT_NODE_BUDGET).unwrap();
        let shifted = translate_symbol(&gs, &z.neg(), &g).unwrap();
        let expect = op_matrix_field(&shifted, &a).unwrap();
        // entries whose pre-images left the box are truncated
        assert!(out.max_abs_diff(&expect) < 1e-6 * expect.max_abs(), "{} {}", out.max_abs_diff(&expect), expect.max_abs());
    }
}
