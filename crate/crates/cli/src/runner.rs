//! Per-kind experiment drivers.
//!
//! A driver computes its quantities through `magweyl_core`, gates them
//! against the configured tolerances and hands back tables and a JSON
//! report. Invalid setups (size ceiling, budget, bad geometry) abort the
//! run; numerical breakdowns inside a check only fail that check.

use crate::config::*;
use crate::output::{num, Check, Table};
use magweyl_core::bessel::{
    bessel_kernel, near_origin_slope, reconstruct_check, AxisLattice, BaseSpace, BesselKernel, SlopeFit,
};
use magweyl_core::geometry::{gauge_shift, line_phase, triangle_flux, VectorPotential};
use magweyl_core::moyal::{
    conjugate_by_weyl_system, kato_convolution_expand, magnetic_translate_mixed, moyal_direct, moyal_direct_nodes,
    moyal_kernel_route,
};
use magweyl_core::quadrature::MAX_ORDER;
use magweyl_core::schatten::{
    convolution_bound_check, kato_average, kato_bound_rows, matrix_singular_values, p_label, singular_values,
    theorem_bound_report, values_deviation, FamilyMember, SIZE_CEILING,
};
use magweyl_core::weyl::{inverse_weyl, op_matrix, op_matrix_field, op_matrix_mixed, untwist_kernel, OperatorMatrix};
use magweyl_core::{bessel, Error, PhaseGrid, ProductSymbol, Symbol, SymbolField};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Node budget for quadratures and lattice sums.
    pub budget: u64,
}

/// Everything a driver produces; the caller persists it.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    /// Pre-rendered files, `(name, bytes)`.
    pub files: Vec<(String, Vec<u8>)>,
    pub report: Value,
}

enum Fail {
    /// Aborts the run.
    Hard(String),
    /// Fails the enclosing check.
    Soft(String),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        match e {
            Error::NonFinite(_) | Error::NotTraceClass { .. } | Error::InsufficientResolution(_) => {
                Fail::Soft(e.to_string())
            }
            _ => Fail::Hard(e.to_string()),
        }
    }
}

impl From<String> for Fail {
    fn from(e: String) -> Self {
        Fail::Hard(e)
    }
}

type Step<T> = std::result::Result<T, Fail>;

/// Turns a step into `Some(value)` or a recorded failure.
fn soft<T>(r: Step<T>, checks: &mut Vec<Check>, name: &str, tol: f64) -> Result<Option<T>, String> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Fail::Soft(m)) => {
            checks.push(Check::failed(name, tol, m));
            Ok(None)
        }
        Err(Fail::Hard(m)) => Err(m),
    }
}

fn hard<T>(r: magweyl_core::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn rel(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

fn op_norm_diff(a: &OperatorMatrix, b: &OperatorMatrix) -> Step<f64> {
    let diff: DMatrix<Complex64> = a.matrix() - b.matrix();
    let top = singular_values(b)?.first().copied().unwrap_or(0.0);
    let d = matrix_singular_values(&diff)?.first().copied().unwrap_or(0.0);
    Ok(rel(d, top))
}

fn entry_diff(a: &OperatorMatrix, b: &OperatorMatrix) -> f64 {
    rel(a.max_abs_diff(b), b.max_abs())
}

/// Rejects grids whose dense `N × N` matrices exceed the SVD ceiling.
pub fn check_size(grid: &GridConfig) -> Result<(), String> {
    let size = grid.n.checked_pow(grid.dim as u32).unwrap_or(usize::MAX);
    if size > SIZE_CEILING {
        return Err(Error::SizeCeiling {
            size,
            ceiling: SIZE_CEILING,
        }
        .to_string());
    }
    Ok(())
}

pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Outcome, String> {
    if !matches!(cfg.kind, Kind::FluxCheck | Kind::Bessel) {
        check_size(&cfg.grid)?;
    }
    match &cfg.params {
        Params::FluxCheck(p) => flux(cfg, p),
        Params::Quantize(p) => quantize(cfg, p),
        Params::HsIdentity(p) => hs_identity(cfg, p),
        Params::MoyalCheck(p) => moyal(cfg, p, opts),
        Params::TranslateCheck(p) => translate(cfg, p),
        Params::KatoCheck(p) => kato(cfg, p, opts),
        Params::Bessel(p) => bessel_run(cfg, p),
        Params::TheoremBounds(p) => theorem(cfg, p),
        Params::GaugeCheck(p) => gauge(cfg, p),
        Params::KatoConv(p) => kato_conv(cfg, p, opts),
    }
}

fn grid_of(cfg: &ExperimentConfig) -> Result<PhaseGrid, String> {
    cfg.grid.build()
}

fn potential(cfg: &ExperimentConfig, g: GaugeConfig) -> Result<VectorPotential, String> {
    g.build(&cfg.field, cfg.grid.dim)
}

fn flux(cfg: &ExperimentConfig, p: &FluxParams) -> Result<Outcome, String> {
    if cfg.grid.dim != 2 {
        return Err("flux-check needs dim = 2".into());
    }
    if p.quad_order == 0 || p.quad_order > MAX_ORDER {
        return Err(format!("quad_order must lie in 1..={MAX_ORDER}"));
    }
    let mut out = Outcome::default();
    let mut table = Table::new("flux.csv", &["case", "field", "gauge", "triples", "max_deviation"]);
    let mut cases = Vec::new();
    for (ci, case) in p.cases.iter().enumerate() {
        let b = case.field.build(2)?;
        let a = case.gauge.build(&case.field, 2)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(ci as u64));
        let r = p.radius;
        let mut worst = 0.0f64;
        for _ in 0..p.triples {
            let mut pt = || [rng.random_range(-r..=r), rng.random_range(-r..=r)];
            let (x, y, z) = (pt(), pt(), pt());
            let omega = hard(triangle_flux(&b, &x, &y, &z, p.quad_order))?;
            let lam = hard(line_phase(&a, &x, &y, p.quad_order))?
                * hard(line_phase(&a, &y, &z, p.quad_order))?
                * hard(line_phase(&a, &z, &x, p.quad_order))?;
            worst = worst.max((omega.value() - lam.value()).norm());
        }
        let field = serde_json::to_value(case.field).unwrap_or(Value::Null);
        out.checks
            .push(Check::at_most(format!("stokes[{ci}:{}]", case.gauge.name()), worst, p.tolerance));
        table.push(vec![
            ci.to_string(),
            field.to_string(),
            case.gauge.name().into(),
            p.triples.to_string(),
            num(worst),
        ]);
        cases.push(json!({"field": field, "gauge": case.gauge.name(), "max_deviation": worst}));
    }
    out.tables.push(table);
    out.report = json!({"triples": p.triples, "radius": p.radius, "cases": cases});
    Ok(out)
}

fn quantize(cfg: &ExperimentConfig, p: &QuantizeParams) -> Result<Outcome, String> {
    let grid = grid_of(cfg)?;
    let a = potential(cfg, p.gauge)?;
    let sym = p.symbol.build(grid.dim())?;
    let op = hard(op_matrix(&sym, &a, &grid))?;
    let mut out = Outcome::default();

    // resampling the inverse transform must reproduce the operator
    let back = hard(untwist_kernel(&op.kernel(), &a).map(|k| inverse_weyl(&k)))?;
    let roundtrip = entry_diff(&hard(op_matrix_field(&back, &a))?, &op);
    let adjoint = entry_diff(&hard(op_matrix(&sym.conj(), &a, &grid))?, &op.adjoint());
    out.checks.push(Check::at_most("roundtrip", roundtrip, p.tolerance));
    out.checks.push(Check::at_most("adjoint", adjoint, p.tolerance));

    for fmt in &p.export {
        let mut buf = Vec::new();
        match fmt {
            ExportFormat::Csv => {
                hard(op.kernel().write_csv(&mut buf).map_err(|e| Error::InvalidParameter(e.to_string())))?;
                out.files.push(("kernel.csv".into(), buf));
            }
            ExportFormat::Binary => {
                hard(op.write_binary(&mut buf).map_err(|e| Error::InvalidParameter(e.to_string())))?;
                out.files.push(("operator.bin".into(), buf));
            }
        }
    }
    out.report = json!({
        "gauge": p.gauge.name(),
        "size": grid.config_len(),
        "max_abs": op.max_abs(),
        "roundtrip_residual": roundtrip,
        "adjoint_residual": adjoint,
    });
    Ok(out)
}

fn hs_identity(cfg: &ExperimentConfig, p: &HsParams) -> Result<Outcome, String> {
    let grid = grid_of(cfg)?;
    let sym = p.symbol.build(grid.dim())?;
    let mut out = Outcome::default();
    let mut table = Table::new("hs_identity.csv", &["gauge", "lhs", "rhs", "rel_err"]);
    let mut lhs = Vec::new();
    let mut rows = Vec::new();
    for &g in &p.gauges {
        let a = potential(cfg, g)?;
        let hs = hard(magweyl_core::schatten::hs_identity_check(&sym, &a, &grid))?;
        out.checks
            .push(Check::at_most(format!("hs[{}]", g.name()), hs.rel_err, p.tolerance));
        table.push(vec![g.name().into(), num(hs.lhs), num(hs.rhs), num(hs.rel_err)]);
        rows.push(json!({"gauge": g.name(), "lhs": hs.lhs, "rhs": hs.rhs, "rel_err": hs.rel_err}));
        lhs.push(hs.lhs);
    }
    let hi = lhs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = lhs.iter().copied().fold(f64::INFINITY, f64::min);
    if lhs.len() > 1 {
        out.checks
            .push(Check::at_most("gauge_spread", rel(hi - lo, hi), p.gauge_tolerance));
    }
    out.tables.push(table);
    out.report = json!({"rows": rows});
    Ok(out)
}

fn moyal(cfg: &ExperimentConfig, p: &MoyalParams, opts: &RunOptions) -> Result<Outcome, String> {
    let grid = grid_of(cfg)?;
    let a = potential(cfg, p.gauge)?;
    let (f, g) = (p.f.build(grid.dim())?, p.g.build(grid.dim())?);
    let q = p.quadrature.build();
    let nodes = moyal_direct_nodes(&grid, &q);
    let mut out = Outcome::default();

    let product = hard(op_matrix(&f, &a, &grid))?.compose(&hard(op_matrix(&g, &a, &grid))?);
    let kernel_route = hard(moyal_kernel_route(&f, &g, &a, &grid).and_then(|s| op_matrix_field(&s, &a)))?;
    let kernel_res = entry_diff(&kernel_route, &product);
    out.checks
        .push(Check::at_most("kernel_route", kernel_res, p.kernel_tolerance));

    let direct: Step<f64> = (|| {
        let s = moyal_direct(&f, &g, &a.field(), &grid, &q, opts.budget)?;
        op_norm_diff(&op_matrix_field(&s, &a)?, &product)
    })();
    let direct_res = soft(direct, &mut out.checks, "direct_quadrature", p.tolerance)?;
    if let Some(r) = direct_res {
        out.checks.push(Check::at_most("direct_quadrature", r, p.tolerance));
    }

    let mut table = Table::new("moyal.csv", &["route", "metric", "residual"]);
    table.push(vec!["kernel".into(), "max_entry".into(), num(kernel_res)]);
    table.push(vec![
        "direct".into(),
        "operator_norm".into(),
        direct_res.map(num).unwrap_or_else(|| "nan".into()),
    ]);
    out.tables.push(table);
    out.report = json!({
        "gauge": p.gauge.name(),
        "quadrature_nodes": nodes,
        "kernel_route_residual": kernel_res,
        "direct_residual": direct_res,
    });
    Ok(out)
}

fn translate(cfg: &ExperimentConfig, p: &TranslateParams) -> Result<Outcome, String> {
    let grid = grid_of(cfg)?;
    let d = grid.dim();
    let sym = p.symbol.build(d)?;
    let mut out = Outcome::default();
    let mut table = Table::new("translate.csv", &["gauge", "z_x", "z_xi", "residual"]);
    let mut rows = Vec::new();
    for &gc in &p.gauges {
        let a = potential(cfg, gc)?;
        let op = hard(op_matrix(&sym, &a, &grid))?;
        for (i, t) in p.translations.iter().enumerate() {
            let z = t.build(d)?;
            let lhs = hard(conjugate_by_weyl_system(&op, &z, &a))?;
            let rhs = hard(magnetic_translate_mixed(&sym, &z.neg(), &a.field(), &grid).and_then(|m| op_matrix_mixed(&m, &a)))?;
            let res = entry_diff(&lhs, &rhs);
            out.checks
                .push(Check::at_most(format!("conjugation[{}:{i}]", gc.name()), res, p.tolerance));
            let join = |v: &[f64]| v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ");
            table.push(vec![gc.name().into(), join(&t.x), join(&t.xi), num(res)]);
            rows.push(json!({"gauge": gc.name(), "x": t.x, "xi": t.xi, "residual": res}));
        }
    }
    out.tables.push(table);
    out.report = json!({"rows": rows});
    Ok(out)
}

fn sv_table(rows: &[(String, Vec<f64>)]) -> Table {
    let mut t = Table::new("singular_values.csv", &["member", "index", "sigma"]);
    for (label, sv) in rows {
        for (i, v) in sv.iter().enumerate() {
            t.push(vec![label.clone(), i.to_string(), num(*v)]);
        }
    }
    t
}

fn rank_one(grid: &PhaseGrid, rate: f64, center: &[f64]) -> Result<OperatorMatrix, String> {
    let d = grid.dim();
    if !(rate > 0.0) {
        return Err("rank-one rate must be positive".into());
    }
    if !center.is_empty() && center.len() != d {
        return Err(format!("center needs {d} components"));
    }
    let c = |j: usize| center.get(j).copied().unwrap_or(0.0);
    let len = grid.config_len();
    let u = DMatrix::from_fn(len, 1, |i, _| {
        let x = grid.config_point(i);
        let r2: f64 = (0..d).map(|j| (x[j] - c(j)).powi(2)).sum();
        Complex64::new((-rate * r2).exp(), 0.0)
    });
    let norm = u.norm();
    if norm == 0.0 {
        return Err("rank-one state vanishes on the grid".into());
    }
    let u = u.unscale(norm);
    hard(OperatorMatrix::from_matrix(grid, &u * u.adjoint()))
}

fn kato(cfg: &ExperimentConfig, p: &KatoParams, opts: &RunOptions) -> Result<Outcome, String> {
    let grid = grid_of(cfg)?;
    let d = grid.dim();
    let a = potential(cfg, p.gauge)?;
    let phi = p.phi.build(d)?;
    let t = match &p.operator {
        OperatorConfig::RankOneGaussian { rate, center } => rank_one(&grid, *rate, center)?,
        OperatorConfig::Quantized { symbol } => hard(op_matrix(&symbol.build(d)?, &a, &grid))?,
    };
    let lattice = p.lattice.build(&grid)?;
    let ps: Vec<f64> = p.p_list.iter().map(PValue::value).collect();
    let avg = hard(kato_average(&phi, &t, &a, &lattice, opts.budget))?;
    let mut out = Outcome::default();
    let ceiling = 1.0 + p.slack;
    let rows = soft(
        kato_bound_rows(&phi, &t, &avg, &lattice, &ps).map_err(Fail::from),
        &mut out.checks,
        "kato_bounds",
        ceiling,
    )?
    .unwrap_or_default();
    let mut table = Table::new("kato_bounds.csv", &["p", "lhs", "rhs", "ratio"]);
    for r in &rows {
        out.checks
            .push(Check::at_most(format!("kato_ratio[p={}]", r.p), r.ratio, ceiling));
        table.push(vec![r.p.clone(), num(r.lhs), num(r.rhs), num(r.ratio)]);
    }
    out.tables.push(table);
    let sv_t = hard(singular_values(&t))?;
    let sv_avg = hard(singular_values(&avg))?;
    out.tables
        .push(sv_table(&[("T".into(), sv_t), ("average".into(), sv_avg)]));
    out.report = json!({
        "gauge": p.gauge.name(),
        "lattice_points": lattice.len(),
        "rows": rows,
    });
    Ok(out)
}

fn kato_conv(cfg: &ExperimentConfig, p: &KatoConvParams, opts: &RunOptions) -> Result<Outcome, String> {
    let grid = grid_of(cfg)?;
    let d = grid.dim();
    let a = potential(cfg, p.gauge)?;
    let (f, g) = (p.f.build(d)?, p.g.build(d)?);
    let lattice = p.lattice.build(&grid)?;
    let mut out = Outcome::default();

    let expanded = hard(kato_convolution_expand(&f, &g, &a, &lattice, &grid, opts.budget))?;
    let conv = hard(
        SymbolField::sample(&f, &grid)
            .and_then(|ff| Ok((ff, SymbolField::sample(&g, &grid)?)))
            .and_then(|(ff, gg)| bessel::phase_convolution(&ff, &gg)),
    )?;
    let direct = hard(op_matrix_field(&conv, &a))?;
    let res = soft(op_norm_diff(&expanded, &direct), &mut out.checks, "expansion", p.tolerance)?;
    if let Some(r) = res {
        out.checks.push(Check::at_most("expansion", r, p.tolerance));
    }

    let ceiling = 1.0 + p.bound_slack;
    let mut table = Table::new("convolution_bound.csv", &["p", "lhs", "rhs", "ratio", "trace_tail"]);
    let mut bounds = Vec::new();
    for pv in &p.bound_p {
        let pp = pv.value();
        let name = format!("convolution_bound[p={}]", p_label(pp));
        let r = convolution_bound_check(&f, &g, &a, pp, &grid).map_err(Fail::from);
        if let Some(b) = soft(r, &mut out.checks, &name, ceiling)? {
            out.checks.push(Check::at_most(name, b.ratio, ceiling));
            table.push(vec![p_label(pp), num(b.lhs), num(b.rhs), num(b.ratio), num(b.trace_tail)]);
            bounds.push(json!({"p": p_label(pp), "bound": b}));
        }
    }
    out.tables.push(table);
    out.report = json!({
        "gauge": p.gauge.name(),
        "lattice_points": lattice.len(),
        "expansion_residual": res,
        "bounds": bounds,
    });
    Ok(out)
}

/// A sum of random plane waves with integer frequencies `|m_i| ≤ band` on
/// the periodic symbol lattice.
fn bandlimited_field(grid: &PhaseGrid, seed: u64, terms: usize, band: i64) -> Result<SymbolField, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = grid.dim();
    let nf = grid.field_n();
    let waves: Vec<(Vec<f64>, Complex64)> = (0..terms)
        .map(|_| {
            let m = (0..2 * d)
                .map(|_| rng.random_range(-band..=band) as f64 * 2.0 * std::f64::consts::PI / nf as f64)
                .collect();
            let c = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            (m, c)
        })
        .collect();
    let block = grid.field_block();
    let data = (0..block * block)
        .map(|i| {
            let xs = magweyl_core::grid::unflatten(i / block, nf, d);
            let ks = magweyl_core::grid::unflatten(i % block, nf, d);
            let idx: Vec<f64> = xs[..d].iter().chain(&ks[..d]).map(|&v| v as f64).collect();
            waves
                .iter()
                .map(|(m, c)| {
                    let ph: f64 = m.iter().zip(&idx).map(|(a, b)| a * b).sum();
                    c * Complex64::from_polar(1.0, ph)
                })
                .sum()
        })
        .collect();
    hard(SymbolField::from_data(grid, data))
}

/// At most `keep` profile points, evenly strided, positive values only.
fn decimated(k: &BesselKernel, keep: usize) -> Vec<(f64, f64)> {
    let prof: Vec<(f64, f64)> = k.profile().into_iter().filter(|&(r, v)| r > 0.0 && v > 0.0).collect();
    let stride = prof.len().div_ceil(keep).max(1);
    prof.into_iter().step_by(stride).collect()
}

fn bessel_run(cfg: &ExperimentConfig, p: &BesselParams) -> Result<Outcome, String> {
    let mut out = Outcome::default();
    let mut fact_rows = Vec::new();
    let mut fact = Table::new("factorization.csv", &["index", "s", "t", "field", "residual"]);
    if !p.factorization.is_empty() {
        let grid = grid_of(cfg)?;
        for (i, fc) in p.factorization.iter().enumerate() {
            let (field, source) = match &fc.symbol {
                Some(s) => (hard(SymbolField::sample(&s.build(grid.dim())?, &grid))?, "symbol"),
                None => (bandlimited_field(&grid, cfg.seed.wrapping_add(i as u64), 16, 4)?, "bandlimited"),
            };
            let name = format!("factorization[{i}:s={},t={}]", fc.s, fc.t);
            let r = reconstruct_check(&field, fc.s, fc.t)
                .map(|e| rel(e, field.max_abs()))
                .map_err(Fail::from);
            if let Some(v) = soft(r, &mut out.checks, &name, fc.tolerance)? {
                out.checks.push(Check::at_most(name, v, fc.tolerance));
                fact.push(vec![i.to_string(), num(fc.s), num(fc.t), source.into(), num(v)]);
                fact_rows.push(json!({"s": fc.s, "t": fc.t, "field": source, "residual": v}));
            }
        }
        out.tables.push(fact);
    }

    let mut profiles = Table::new("psi_profiles.csv", &["kernel", "abs_x", "psi"]);
    let mut closed = Value::Null;
    if let Some(c) = &p.closed_form {
        let lat = hard(AxisLattice::with_extent(1, c.n, c.extent))?;
        let k = hard(bessel_kernel(2.0, &lat, BaseSpace::Configuration))?;
        // sup ψ₂ = 1/2
        let worst = k
            .profile()
            .into_iter()
            .filter(|&(r, _)| r >= c.min_radius)
            .map(|(r, v)| (v - 0.5 * (-r).exp()).abs())
            .fold(0.0f64, f64::max);
        let err = worst / 0.5;
        out.checks.push(Check::at_most("psi2_closed_form", err, c.tolerance));
        for (r, v) in decimated(&k, 400) {
            profiles.push(vec!["psi2 d=1".into(), num(r), num(v)]);
        }
        closed = json!({"n": c.n, "extent": c.extent, "min_radius": c.min_radius, "error": err, "mass": k.mass()});
    }

    let mut slopes = Table::new(
        "slopes.csv",
        &["dim", "s", "n", "extent", "slope", "expected", "status"],
    );
    let mut slope_rows = Vec::new();
    for (i, sc) in p.slopes.iter().enumerate() {
        let lat = hard(AxisLattice::with_extent(sc.dim, sc.n, sc.extent))?;
        let name = format!("slope[{i}:d={},s={}]", sc.dim, sc.s);
        let k = hard(bessel_kernel(sc.s, &lat, BaseSpace::Configuration))?;
        let fit = soft(near_origin_slope(&k).map_err(Fail::from), &mut out.checks, &name, p.slope_tolerance)?;
        let base = vec![sc.dim.to_string(), num(sc.s), sc.n.to_string(), num(sc.extent)];
        match fit {
            Some(SlopeFit::Fitted { slope, expected, .. }) => {
                out.checks
                    .push(Check::at_most(name, (slope - expected).abs(), p.slope_tolerance));
                slopes.push([base, vec![num(slope), num(expected), "fitted".into()]].concat());
                slope_rows.push(json!({"dim": sc.dim, "s": sc.s, "slope": slope, "expected": expected}));
            }
            Some(SlopeFit::Skipped { reason }) => {
                slopes.push([base, vec!["".into(), num(sc.s - sc.dim as f64), "skipped".into()]].concat());
                slope_rows.push(json!({"dim": sc.dim, "s": sc.s, "skipped": reason}));
            }
            None => slopes.push([base, vec!["".into(), num(sc.s - sc.dim as f64), "failed".into()]].concat()),
        }
        for (r, v) in decimated(&k, 400) {
            profiles.push(vec![format!("psi{} d={}", sc.s, sc.dim), num(r), num(v)]);
        }
    }
    if !p.slopes.is_empty() {
        out.tables.push(slopes);
    }
    if !profiles.rows.is_empty() {
        out.tables.push(profiles);
    }
    out.report = json!({"factorization": fact_rows, "closed_form": closed, "slopes": slope_rows});
    Ok(out)
}

fn theorem(cfg: &ExperimentConfig, p: &TheoremParams) -> Result<Outcome, String> {
    let grid = grid_of(cfg)?;
    let d = grid.dim();
    let a = potential(cfg, p.gauge)?;
    let family: Vec<FamilyMember> = p
        .lambdas
        .iter()
        .map(|&l| {
            if !(l > 0.0) {
                return Err(format!("dilation parameter must be positive, got {l}"));
            }
            Ok(FamilyMember {
                label: format!("lambda={l}"),
                parameter: l,
                symbol: Box::new(ProductSymbol::gaussian(d, l, l)) as Box<dyn Symbol>,
            })
        })
        .collect::<Result<_, _>>()?;
    let ps: Vec<f64> = p.p_list.iter().map(PValue::value).collect();
    let mut out = Outcome::default();
    let report = match theorem_bound_report(&cfg.id, "dilation", &family, &a, &ps, &grid).map_err(Fail::from) {
        Ok(r) => r,
        Err(Fail::Soft(m)) => {
            out.checks.push(Check::failed("theorem_report", p.ratio_ceiling, m));
            return Ok(out);
        }
        Err(Fail::Hard(m)) => return Err(m),
    };
    for c in &report.constants {
        out.checks
            .push(Check::at_most(format!("family_constant[p={}]", c.p), c.max_ratio, p.ratio_ceiling));
        out.checks.push(Check::holds(
            format!("ratios_positive[p={}]", c.p),
            c.min_ratio > 0.0 && c.max_ratio.is_finite(),
        ));
    }
    for m in &report.members {
        out.checks
            .push(Check::at_most(format!("hs[{}]", m.label), m.hs_rel_err, p.hs_tolerance));
    }
    out.files.push(("theorem_rows.csv".into(), report.rows_csv().into_bytes()));
    out.files
        .push(("singular_values.csv".into(), report.singular_values_csv().into_bytes()));
    out.report = serde_json::to_value(&report).map_err(|e| e.to_string())?;
    Ok(out)
}

fn random_gauge_function(rng: &mut ChaCha8Rng, dim: usize) -> Result<magweyl_core::geometry::GaugeFunction, String> {
    let mut draw = || rng.random_range(-1.0..=1.0);
    let c0 = draw();
    let lin: Vec<f64> = (0..dim).map(|_| draw()).collect();
    let q: Vec<Vec<f64>> = (0..dim).map(|_| (0..dim).map(|_| draw()).collect()).collect();
    gauge_function(c0, &lin, &q, dim)
}

fn gauge(cfg: &ExperimentConfig, p: &GaugeParams) -> Result<Outcome, String> {
    let grid = grid_of(cfg)?;
    let d = grid.dim();
    let sym = p.symbol.build(d)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = Outcome::default();
    let mut table = Table::new("gauge.csv", &["comparison", "deviation"]);
    let mut svs = Vec::new();
    let mut rows = Vec::new();
    for (i, c) in p.comparisons.iter().enumerate() {
        let (label, a, b) = match c {
            GaugeComparison::Potentials { a, b } => (
                format!("{}-vs-{}", a.name(), b.name()),
                potential(cfg, *a)?,
                potential(cfg, *b)?,
            ),
            GaugeComparison::GaugeFunction {
                base,
                c0,
                linear,
                quadratic,
            } => {
                let a = potential(cfg, *base)?;
                let phi = gauge_function(*c0, linear, quadratic, d)?;
                let b = hard(gauge_shift(&a, &phi))?;
                (format!("{}+dphi", base.name()), a, b)
            }
            GaugeComparison::RandomQuadratic { base } => {
                let a = potential(cfg, *base)?;
                let phi = random_gauge_function(&mut rng, d)?;
                let b = hard(gauge_shift(&a, &phi))?;
                (format!("{}+random", base.name()), a, b)
            }
        };
        let name = format!("singular_values[{i}:{label}]");
        let r: Step<(Vec<f64>, Vec<f64>)> = (|| {
            Ok((
                singular_values(&op_matrix(&sym, &a, &grid)?)?,
                singular_values(&op_matrix(&sym, &b, &grid)?)?,
            ))
        })();
        if let Some((s1, s2)) = soft(r, &mut out.checks, &name, p.tolerance)? {
            let dev = values_deviation(&s1, &s2);
            out.checks.push(Check::at_most(name, dev, p.tolerance));
            table.push(vec![label.clone(), num(dev)]);
            rows.push(json!({"comparison": label, "deviation": dev, "top": s1.first()}));
            svs.push((label, s1));
        }
    }
    out.tables.push(table);
    out.tables.push(sv_table(&svs));
    out.report = json!({"rows": rows});
    Ok(out)
}
