//! Singular values, Schatten norms, Kato's operator average and the
//! Schatten-class bound reports.
//!
//! Operator matrices act on `ℓ²` of the configuration lattice with weight
//! `h^d`; since the weight is a multiple of the identity, the singular values
//! of the stored matrix are those of the operator. Phase-space integrals in
//! the bounds are taken against `đX = dX/(2π)^d`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

use crate::bessel::elliptic_multiplier;
use crate::error::{Error, Result};
use crate::exec;
use crate::geometry::{gauge_shift, GaugeFunction, VectorPotential};
use crate::grid::PhaseGrid;
use crate::moyal::{conjugator, PhaseLattice};
use crate::symbol::{lp_norm, lp_norm_derivative, multi_indices_up_to, Symbol, SymbolField};
use crate::weyl::{op_matrix, op_matrix_field, OperatorMatrix};

/// Largest matrix side accepted by the dense SVD.
pub const SIZE_CEILING: usize = 1296;

/// Tail-sum threshold for the trace-class surrogate.
pub const TRACE_TAIL_THRESHOLD: f64 = 1e-6;

/// Singular-value threshold for the compactness witness.
pub const COMPACT_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DerivativeBudget {
    pub s_d: usize,
    pub t_d: usize,
}

impl DerivativeBudget {
    pub fn for_dim(d: usize) -> Self {
        DerivativeBudget {
            s_d: 2 * (d / 2) + 2,
            t_d: d + d / 2 + 1,
        }
    }
}

fn check_ceiling(m: &DMatrix<Complex64>) -> Result<()> {
    let size = m.nrows().max(m.ncols());
    if size > SIZE_CEILING {
        return Err(Error::SizeCeiling {
            size,
            ceiling: SIZE_CEILING,
        });
    }
    Ok(())
}

/// Descending singular values.
pub fn singular_values(m: &OperatorMatrix) -> Result<Vec<f64>> {
    matrix_singular_values(m.matrix())
}

pub fn matrix_singular_values(m: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    check_ceiling(m)?;
    if m.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::NonFinite("singular_values"));
    }
    let mut sv: Vec<f64> = m.clone().singular_values().iter().map(|v| v.max(0.0)).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

/// `(Σ μ^p)^{1/p}` from descending singular values; `p = ∞` gives `μ₀`.
pub fn schatten_from_values(sv: &[f64], p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidExponent(p));
    }
    if sv.is_empty() {
        return Ok(0.0);
    }
    if p.is_infinite() {
        return Ok(sv[0]);
    }
    // scale by μ₀ to keep large p finite
    let top = sv[0];
    if top == 0.0 {
        return Ok(0.0);
    }
    let s: f64 = sv.iter().map(|v| (v / top).powf(p)).sum();
    Ok(top * s.powf(1.0 / p))
}

pub fn schatten_norm(m: &OperatorMatrix, p: f64) -> Result<f64> {
    if p == 2.0 {
        return Ok(m.matrix().norm());
    }
    schatten_from_values(&singular_values(m)?, p)
}

/// `p` rendered for reports: a number, or `"inf"`.
pub fn p_label(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        format!("{p}")
    }
}

fn normalized_lp(value_lebesgue: f64, p: f64, d: usize) -> f64 {
    if p.is_infinite() {
        value_lebesgue
    } else {
        value_lebesgue * (2.0 * PI).powf(-(d as f64) / p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HsIdentity {
    /// `(2π)^{d/2} ‖Op^A(F)‖_{𝔅₂}`.
    pub lhs: f64,
    /// `‖F‖_{L²(Ξ)}` with Lebesgue measure.
    pub rhs: f64,
    pub rel_err: f64,
}

pub fn hs_identity_check(f: &dyn Symbol, a: &VectorPotential, grid: &PhaseGrid) -> Result<HsIdentity> {
    let d = grid.dim();
    let op = op_matrix(f, a, grid)?;
    let lhs = (2.0 * PI).powf(0.5 * d as f64) * op.matrix().norm();
    let rhs = lp_norm(&SymbolField::sample(f, grid)?, 2.0)?;
    let rel_err = if rhs == 0.0 {
        if lhs == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (lhs - rhs).abs() / rhs
    };
    Ok(HsIdentity { lhs, rhs, rel_err })
}

/// `φ{T} = Σ_Z φ(Z) W^A(Z)* T W^A(Z) đZ` over `lattice`. The guard counts
/// `|lattice| · N²` entry updates.
pub fn kato_average(
    phi: &dyn Symbol,
    t: &OperatorMatrix,
    a: &VectorPotential,
    lattice: &PhaseLattice,
    budget: u64,
) -> Result<OperatorMatrix> {
    let grid = *t.grid();
    let len = grid.config_len();
    let required = lattice.len() as u64 * (len as u64).pow(2);
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }
    let norm = (2.0 * PI).powi(-(grid.dim() as i32));
    let mut nodes = Vec::with_capacity(lattice.len());
    for (z, w) in lattice.points.iter().zip(&lattice.weights) {
        let c = phi.eval(&z.x, &z.xi) * (*w * norm);
        if c.norm() != 0.0 {
            nodes.push((c, conjugator(&grid, z, a)?));
        }
    }
    let m = t.matrix();
    let cols = exec::map_range(len, |col| {
        let mut out = vec![Complex64::new(0.0, 0.0); len];
        for (c, conj) in &nodes {
            let Some(bp) = conj.back[col] else { continue };
            let right = *c * conj.entry[bp];
            for (row, o) in out.iter_mut().enumerate() {
                if let Some(ap) = conj.back[row] {
                    *o += conj.entry[ap].conj() * m[(ap, bp)] * right;
                }
            }
        }
        out
    });
    OperatorMatrix::from_matrix(&grid, DMatrix::from_vec(len, len, cols.concat()))
}

/// `‖φ‖_{L^p(đX)}` on a lattice.
pub fn lattice_lp_norm(phi: &dyn Symbol, lattice: &PhaseLattice, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidExponent(p));
    }
    let d = phi.dim();
    let vals = lattice.points.iter().map(|z| phi.eval(&z.x, &z.xi).norm());
    if p.is_infinite() {
        return Ok(vals.fold(0.0, f64::max));
    }
    let norm = (2.0 * PI).powi(-(d as i32));
    let s: f64 = vals.zip(&lattice.weights).map(|(v, w)| v.powf(p) * w * norm).sum();
    Ok(s.powf(1.0 / p))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    pub p: String,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// `‖φ{T}‖_{𝔅_p}` against `‖φ‖_{L^p(đX)} ‖T‖_{𝔅₁}` for each `p`.
pub fn kato_bound_rows(
    phi: &dyn Symbol,
    t: &OperatorMatrix,
    avg: &OperatorMatrix,
    lattice: &PhaseLattice,
    ps: &[f64],
) -> Result<Vec<BoundRow>> {
    let t1 = schatten_from_values(&singular_values(t)?, 1.0)?;
    let sv = singular_values(avg)?;
    ps.iter()
        .map(|&p| {
            let lhs = schatten_from_values(&sv, p)?;
            let rhs = lattice_lp_norm(phi, lattice, p)? * t1;
            Ok(BoundRow {
                p: p_label(p),
                lhs,
                rhs,
                ratio: ratio(lhs, rhs),
            })
        })
        .collect()
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if rhs == 0.0 {
        if lhs == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        lhs / rhs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSpec {
    pub dim: usize,
    pub n: usize,
    pub extent: f64,
}

impl From<&PhaseGrid> for GridSpec {
    fn from(g: &PhaseGrid) -> Self {
        GridSpec {
            dim: g.dim(),
            n: g.n(),
            extent: g.extent(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremRow {
    pub p: String,
    /// `‖Op^A(F)‖_{𝔅_p}`.
    pub lhs: f64,
    /// `Σ_{|α|≤s(d), |β|≤t(d)} ‖∂_x^α ∂_ξ^β F‖_{L^p(đX)}`.
    pub rhs: f64,
    pub ratio: f64,
    /// `‖𝔏_{s(d),t(d)} F‖_{L^p(đX)}`.
    pub rhs_elliptic: f64,
    pub ratio_elliptic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemberReport {
    pub label: String,
    pub parameter: f64,
    pub singular_values: Vec<f64>,
    pub rows: Vec<TheoremRow>,
    /// `‖F‖_{L²(đX)}`, equal to `‖Op^A(F)‖_{𝔅₂}`.
    pub l2_norm: f64,
    pub hs_rel_err: f64,
    /// First index with `μ_n < 10^{-3} μ₀`.
    pub compact_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyConstant {
    pub p: String,
    pub max_ratio: f64,
    pub min_ratio: f64,
    pub max_ratio_elliptic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchattenReport {
    pub experiment: String,
    pub family: String,
    pub gauge: String,
    pub grid: GridSpec,
    pub budget: DerivativeBudget,
    pub members: Vec<MemberReport>,
    pub constants: Vec<FamilyConstant>,
    pub runtime_s: f64,
}

impl SchattenReport {
    /// One line per `(member, p)`.
    pub fn rows_csv(&self) -> String {
        let mut s = String::from("member,parameter,p,lhs,rhs,ratio,rhs_elliptic,ratio_elliptic\r\n");
        for m in &self.members {
            for r in &m.rows {
                s.push_str(&format!(
                    "{},{:e},{},{:e},{:e},{:e},{:e},{:e}\r\n",
                    m.label, m.parameter, r.p, r.lhs, r.rhs, r.ratio, r.rhs_elliptic, r.ratio_elliptic
                ));
            }
        }
        s
    }

    /// Columns `member, index, sigma`.
    pub fn singular_values_csv(&self) -> String {
        let mut s = String::from("member,index,sigma\r\n");
        for m in &self.members {
            for (i, v) in m.singular_values.iter().enumerate() {
                s.push_str(&format!("{},{},{:e}\r\n", m.label, i, v));
            }
        }
        s
    }
}

pub struct FamilyMember {
    pub label: String,
    pub parameter: f64,
    pub symbol: Box<dyn Symbol>,
}

pub fn compact_index(sv: &[f64]) -> Option<usize> {
    let top = *sv.first()?;
    sv.iter().position(|&v| v < COMPACT_THRESHOLD * top)
}

/// Bound ratios for every member and `p`, plus the per-`p` family constants.
pub fn theorem_bound_report(
    experiment: &str,
    family_name: &str,
    family: &[FamilyMember],
    a: &VectorPotential,
    ps: &[f64],
    grid: &PhaseGrid,
) -> Result<SchattenReport> {
    let d = grid.dim();
    let budget = DerivativeBudget::for_dim(d);
    let alphas = multi_indices_up_to(d, budget.s_d);
    let betas = multi_indices_up_to(d, budget.t_d);
    let mut members = Vec::with_capacity(family.len());
    for m in family {
        let sym = m.symbol.as_ref();
        sym.check_order(alphas.last().expect("nonempty"), betas.last().expect("nonempty"))?;
        let op = op_matrix(sym, a, grid)?;
        let sv = singular_values(&op)?;
        let field = SymbolField::sample(sym, grid)?;
        let elliptic = elliptic_multiplier(&field, budget.s_d as f64, budget.t_d as f64);
        let l2 = normalized_lp(lp_norm(&field, 2.0)?, 2.0, d);
        let hs = schatten_from_values(&sv, 2.0)?;
        let mut rows = Vec::with_capacity(ps.len());
        for &p in ps {
            let lhs = schatten_from_values(&sv, p)?;
            let mut sum = 0.0;
            for al in &alphas {
                for be in &betas {
                    sum += lp_norm_derivative(sym, al, be, grid, p)?;
                }
            }
            let rhs = normalized_lp(sum, p, d);
            let rhs_elliptic = normalized_lp(lp_norm(&elliptic, p)?, p, d);
            rows.push(TheoremRow {
                p: p_label(p),
                lhs,
                rhs,
                ratio: ratio(lhs, rhs),
                rhs_elliptic,
                ratio_elliptic: ratio(lhs, rhs_elliptic),
            });
        }
        members.push(MemberReport {
            label: m.label.clone(),
            parameter: m.parameter,
            compact_index: compact_index(&sv),
            singular_values: sv,
            rows,
            l2_norm: l2,
            hs_rel_err: if l2 == 0.0 { (hs - l2).abs() } else { (hs - l2).abs() / l2 },
        });
    }
    let constants = ps
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let (mut hi, mut lo, mut hi_e) = (0.0f64, f64::INFINITY, 0.0f64);
            for m in &members {
                hi = hi.max(m.rows[i].ratio);
                lo = lo.min(m.rows[i].ratio);
                hi_e = hi_e.max(m.rows[i].ratio_elliptic);
            }
            FamilyConstant {
                p: p_label(p),
                max_ratio: hi,
                min_ratio: if members.is_empty() { 0.0 } else { lo },
                max_ratio_elliptic: hi_e,
            }
        })
        .collect();
    Ok(SchattenReport {
        experiment: experiment.into(),
        family: family_name.into(),
        gauge: a.tag().into(),
        grid: GridSpec::from(grid),
        budget,
        members,
        constants,
        runtime_s: 0.0,
    })
}

/// Largest deviation of the sorted singular values of `Op^A(F)` and
/// `Op^{A+dφ}(F)`, relative to `μ₀`.
pub fn gauge_invariance_check(
    f: &dyn Symbol,
    a: &VectorPotential,
    phi: &GaugeFunction,
    grid: &PhaseGrid,
) -> Result<f64> {
    let shifted = gauge_shift(a, phi)?;
    singular_value_deviation(f, a, &shifted, grid)
}

/// The same comparison between two arbitrary potentials.
pub fn singular_value_deviation(
    f: &dyn Symbol,
    a: &VectorPotential,
    b: &VectorPotential,
    grid: &PhaseGrid,
) -> Result<f64> {
    let s1 = singular_values(&op_matrix(f, a, grid)?)?;
    let s2 = singular_values(&op_matrix(f, b, grid)?)?;
    Ok(values_deviation(&s1, &s2))
}

pub fn values_deviation(s1: &[f64], s2: &[f64]) -> f64 {
    let top = s1.first().copied().unwrap_or(0.0).max(s2.first().copied().unwrap_or(0.0));
    if top == 0.0 {
        return 0.0;
    }
    s1.iter().zip(s2).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / top
}

/// Fraction of `Σ μ_n` carried by the indices beyond `N/2`.
pub fn trace_tail(sv: &[f64]) -> f64 {
    let total: f64 = sv.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    sv[sv.len() / 2..].iter().sum::<f64>() / total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvolutionBound {
    /// `‖Op^A(f * F)‖_{𝔅_p}`, convolution against `đX`.
    pub lhs: f64,
    /// `‖f‖_{L^p(đX)} ‖Op^A(F)‖_{𝔅₁}`.
    pub rhs: f64,
    pub ratio: f64,
    pub trace_tail: f64,
}

pub fn convolution_bound_check(
    f: &dyn Symbol,
    big_f: &dyn Symbol,
    a: &VectorPotential,
    p: f64,
    grid: &PhaseGrid,
) -> Result<ConvolutionBound> {
    let d = grid.dim();
    let ff = SymbolField::sample(f, grid)?;
    let fb = SymbolField::sample(big_f, grid)?;
    let op_f = op_matrix_field(&fb, a)?;
    let sv_f = singular_values(&op_f)?;
    let tail = trace_tail(&sv_f);
    if tail >= TRACE_TAIL_THRESHOLD {
        return Err(Error::NotTraceClass {
            tail,
            threshold: TRACE_TAIL_THRESHOLD,
        });
    }
    let conv = crate::bessel::phase_convolution(&ff, &fb)?.scaled(Complex64::new((2.0 * PI).powi(-(d as i32)), 0.0));
    let lhs = schatten_norm(&op_matrix_field(&conv, a)?, p)?;
    let rhs = normalized_lp(lp_norm(&ff, p)?, p, d) * schatten_from_values(&sv_f, 1.0)?;
    Ok(ConvolutionBound {
        lhs,
        rhs,
        ratio: ratio(lhs, rhs),
        trace_tail: tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, PhasePoint};
    use crate::symbol::{FnSymbol, ProductSymbol};

    #[test]
    fn budget_values() {
        assert_eq!(DerivativeBudget::for_dim(1), DerivativeBudget { s_d: 2, t_d: 2 });
        assert_eq!(DerivativeBudget::for_dim(2), DerivativeBudget { s_d: 4, t_d: 4 });
        assert_eq!(DerivativeBudget::for_dim(3), DerivativeBudget { s_d: 4, t_d: 5 });
    }

    #[test]
    fn norm_examples() {
        let g = make_grid(1, 16, 4.0).unwrap();
        let id = OperatorMatrix::identity(&g);
        let sv = singular_values(&id).unwrap();
        assert!(sv.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!((schatten_norm(&id, 1.0).unwrap() - 16.0).abs() < 1e-10);
        assert!((schatten_norm(&id, 2.0).unwrap() - 4.0).abs() < 1e-12);
        assert!((schatten_norm(&id, f64::INFINITY).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(schatten_norm(&id, 0.5), Err(Error::InvalidExponent(_))));

        // rank one, μ₀ = 3
        let u = DMatrix::from_fn(16, 1, |i, _| Complex64::new((i as f64 * 0.3).cos(), (i as f64).sin()));
        let u = u.unscale(u.norm());
        let r1 = OperatorMatrix::from_matrix(&g, &u * u.adjoint() * Complex64::new(3.0, 0.0)).unwrap();
        for p in [1.0, 1.5, 2.0, 7.0, f64::INFINITY] {
            assert!((schatten_from_values(&singular_values(&r1).unwrap(), p).unwrap() - 3.0).abs() < 1e-10);
        }
        let sv = singular_values(&r1).unwrap();
        assert!(sv[1..].iter().all(|v| *v < 1e-12));
    }

    #[test]
    fn multiplication_operator_values() {
        let g = make_grid(1, 32, 4.0).unwrap();
        let m = DMatrix::from_fn(32, 32, |i, j| {
            if i == j {
                let x = g.position(i);
                Complex64::new((-x * x).exp(), 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let sv = singular_values(&OperatorMatrix::from_matrix(&g, m).unwrap()).unwrap();
        let mut expect: Vec<f64> = (0..32).map(|i| (-g.position(i).powi(2)).exp()).collect();
        expect.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in sv.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn frobenius_cross_check_and_monotonicity() {
        let g = make_grid(2, 8, 3.0).unwrap();
        let op = op_matrix(&ProductSymbol::gaussian(2, 0.7, 0.4), &VectorPotential::symmetric(1.0), &g).unwrap();
        let sv = singular_values(&op).unwrap();
        let frob: f64 = op.matrix().iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!((schatten_from_values(&sv, 2.0).unwrap() - frob).abs() < 1e-12 * frob);
        let ps = [1.0, 1.5, 2.0, 3.0, 10.0, f64::INFINITY];
        let norms: Vec<f64> = ps.iter().map(|&p| schatten_from_values(&sv, p).unwrap()).collect();
        assert!(norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        assert_eq!(norms[5], sv[0]);
    }

    #[test]
    fn size_ceiling_rejected() {
        let m = DMatrix::<Complex64>::zeros(1297, 1);
        assert!(matches!(matrix_singular_values(&m), Err(Error::SizeCeiling { .. })));
    }

    #[test]
    fn hs_identity_examples() {
        let g = make_grid(1, 64, 8.0).unwrap();
        let zero = ProductSymbol::constant(1, Complex64::new(0.0, 0.0));
        let r = hs_identity_check(&zero, &VectorPotential::zero(1), &g).unwrap();
        assert_eq!((r.lhs, r.rhs, r.rel_err), (0.0, 0.0, 0.0));
        let r = hs_identity_check(&ProductSymbol::gaussian(1, 0.5, 0.5), &VectorPotential::zero(1), &g).unwrap();
        assert!((r.rhs - PI.sqrt()).abs() < 1e-8);
        assert!(r.rel_err < 1e-6, "{r:?}");
    }

    #[test]
    fn gauge_examples() {
        let g = make_grid(2, 8, 3.0).unwrap();
        let f = ProductSymbol::gaussian(2, 0.5, 0.5);
        let a = VectorPotential::symmetric(1.0);
        assert!(gauge_invariance_check(&f, &a, &GaugeFunction::zero(2), &g).unwrap() < 1e-14);
        let dev = singular_value_deviation(&f, &a, &VectorPotential::landau(1.0), &g).unwrap();
        assert!(dev < 1e-10, "{dev}");
        let phi = GaugeFunction::quadratic(2, 0.2, [0.4, -0.1], [[0.3, -0.2], [-0.2, 0.7]]);
        assert!(gauge_invariance_check(&f, &a, &phi, &g).unwrap() < 1e-9);
    }

    #[test]
    fn kato_examples() {
        let g = make_grid(2, 8, 3.0).unwrap();
        let a = VectorPotential::symmetric(1.0);
        let t = op_matrix(&ProductSymbol::gaussian(2, 1.0, 1.0), &a, &g).unwrap();
        let c = (2.0 * PI).powi(2);
        let delta = FnSymbol::new(2, "delta", move |_, _| Complex64::new(c, 0.0));
        let avg = kato_average(&delta, &t, &a, &PhaseLattice::origin(2), u64::MAX).unwrap();
        assert!(avg.max_abs_diff(&t) < 1e-14);
        let lat = PhaseLattice::box_lattice(&g, 2, g.k(), 2).unwrap();
        let phi = ProductSymbol::gaussian(2, 0.5, 0.5);
        let zero = kato_average(&phi, &OperatorMatrix::zeros(&g), &a, &lat, u64::MAX).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
        assert!(matches!(kato_average(&phi, &t, &a, &lat, 10), Err(Error::BudgetExceeded { .. })));
        // the average is the sum of explicit conjugations
        let mut expect = OperatorMatrix::zeros(&g);
        for (z, w) in lat.points.iter().zip(&lat.weights) {
            let conj = crate::moyal::conjugate_by_weyl_system(&t, z, &a).unwrap();
            expect.add_scaled(phi.eval(&z.x, &z.xi) * (*w / c), &conj);
        }
        let avg = kato_average(&phi, &t, &a, &lat, u64::MAX).unwrap();
        assert!(avg.max_abs_diff(&expect) < 1e-13);
    }

    #[test]
    fn kato_ratios_bounded_for_rank_one() {
        let g = make_grid(2, 8, 4.0).unwrap();
        let a = VectorPotential::symmetric(1.0);
        let len = g.config_len();
        let u = DMatrix::from_fn(len, 1, |i, _| {
            let x = g.config_point(i);
            Complex64::new((-(x[0] * x[0] + x[1] * x[1])).exp(), 0.0)
        });
        let u = u.unscale(u.norm());
        let t = OperatorMatrix::from_matrix(&g, &u * u.adjoint()).unwrap();
        let lat = PhaseLattice::box_lattice(&g, 3, g.k(), 3).unwrap();
        let phi = ProductSymbol::gaussian(2, 0.5, 0.5);
        let avg = kato_average(&phi, &t, &a, &lat, u64::MAX).unwrap();
        for row in kato_bound_rows(&phi, &t, &avg, &lat, &[1.0, 2.0, f64::INFINITY]).unwrap() {
            assert!(row.ratio <= 1.05 && row.ratio > 0.0, "{row:?}");
        }
    }

    #[test]
    fn theorem_report_zero_and_gaussian() {
        let g = make_grid(1, 16, 5.0).unwrap();
        let a = VectorPotential::zero(1);
        let fam = vec![
            FamilyMember {
                label: "zero".into(),
                parameter: 0.0,
                symbol: Box::new(ProductSymbol::constant(1, Complex64::new(0.0, 0.0))),
            },
            FamilyMember {
                label: "g1".into(),
                parameter: 1.0,
                symbol: Box::new(ProductSymbol::gaussian(1, 1.0, 1.0)),
            },
        ];
        let rep = theorem_bound_report("t", "dilation", &fam, &a, &[1.0, 2.0, f64::INFINITY], &g).unwrap();
        assert!(rep.members[0].rows.iter().all(|r| r.lhs == 0.0 && r.ratio == 0.0));
        let m = &rep.members[1];
        assert!(m.rows.iter().all(|r| r.ratio.is_finite() && r.ratio > 0.0));
        assert!(m.hs_rel_err < 1e-6);
        assert!(m.rows[1].ratio <= 1.0);
        assert!(m.compact_index.is_some());
        assert!(rep.rows_csv().lines().count() == 7);
        let _ = PhasePoint::origin(1);
    }

    #[test]
    fn convolution_examples() {
        let g = make_grid(2, 16, 4.0).unwrap();
        let a = VectorPotential::symmetric(1.0);
        let big = ProductSymbol::gaussian(2, 1.0, 1.0);
        let zero = ProductSymbol::constant(2, Complex64::new(0.0, 0.0));
        let r = convolution_bound_check(&zero, &big, &a, 2.0, &g).unwrap();
        assert_eq!(r.lhs, 0.0);
        let f = ProductSymbol::gaussian(2, 0.5, 0.5);
        let r = convolution_bound_check(&f, &big, &a, 2.0, &g).unwrap();
        assert!(r.ratio <= 1.05, "{r:?}");
        let wide = ProductSymbol::gaussian(2, 0.01, 0.01);
        assert!(matches!(
            convolution_bound_check(&f, &wide, &a, 2.0, &g),
            Err(Error::NotTraceClass { .. })
        ));
    }
}
