//! Experiment configuration.
//!
//! A config file is a JSON object with a few common keys and a `params`
//! object whose shape depends on `kind`. Unknown keys are rejected at every
//! level, and errors carry the JSON path of the offending value.

use magweyl_core::geometry::{poincare_gauge, GaugeFunction, MagneticField, VectorPotential, DEFAULT_QUAD_ORDER};
use magweyl_core::grid::{Point, MAX_DIM};
use magweyl_core::moyal::{DirectQuadrature, PhaseLattice};
use magweyl_core::{make_grid, PhaseGrid, PhasePoint, ProductSymbol};
use num_complex::Complex64;
use schemars::JsonSchema;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    FluxCheck,
    Quantize,
    HsIdentity,
    MoyalCheck,
    TranslateCheck,
    KatoCheck,
    Bessel,
    TheoremBounds,
    GaugeCheck,
    KatoConv,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::FluxCheck => "flux-check",
            Kind::Quantize => "quantize",
            Kind::HsIdentity => "hs-identity",
            Kind::MoyalCheck => "moyal-check",
            Kind::TranslateCheck => "translate-check",
            Kind::KatoCheck => "kato-check",
            Kind::Bessel => "bessel",
            Kind::TheoremBounds => "theorem-bounds",
            Kind::GaugeCheck => "gauge-check",
            Kind::KatoConv => "kato-conv",
        }
    }

    /// Kinds that take dense SVDs of `N × N` operator matrices.
    pub fn uses_svd(self) -> bool {
        matches!(
            self,
            Kind::TheoremBounds | Kind::GaugeCheck | Kind::KatoCheck | Kind::KatoConv | Kind::MoyalCheck
        )
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    /// Points per configuration axis.
    pub n: usize,
    /// Half-width `L` of the configuration box `[-L, L)^d`.
    pub extent: f64,
}

impl GridConfig {
    pub fn build(&self) -> Result<PhaseGrid, String> {
        make_grid(self.dim, self.n, self.extent).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldConfig {
    #[default]
    Zero,
    Constant {
        b: f64,
    },
    /// `b0 + b1 cos x1 cos x2`.
    Oscillatory {
        b0: f64,
        b1: f64,
    },
}

impl FieldConfig {
    pub fn build(&self, dim: usize) -> Result<MagneticField, String> {
        match *self {
            FieldConfig::Zero => Ok(MagneticField::zero(dim)),
            _ if dim != 2 => Err(format!("a nonzero magnetic field needs dim = 2, got {dim}")),
            FieldConfig::Constant { b } => Ok(MagneticField::constant(b)),
            FieldConfig::Oscillatory { b0, b1 } => Ok(MagneticField::oscillatory(b0, b1)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum GaugeConfig {
    Zero,
    Symmetric,
    Landau,
    /// Transversal gauge built from the field by line integration.
    Poincare,
}

impl GaugeConfig {
    pub fn build(&self, field: &FieldConfig, dim: usize) -> Result<VectorPotential, String> {
        let b = field.build(dim)?;
        match (self, field) {
            (GaugeConfig::Zero, FieldConfig::Zero) => Ok(VectorPotential::zero(dim)),
            (GaugeConfig::Zero, _) => Err("gauge \"zero\" needs a zero field".into()),
            (GaugeConfig::Symmetric, FieldConfig::Constant { b }) => Ok(VectorPotential::symmetric(*b)),
            (GaugeConfig::Landau, FieldConfig::Constant { b }) => Ok(VectorPotential::landau(*b)),
            (GaugeConfig::Symmetric | GaugeConfig::Landau, FieldConfig::Zero) => Ok(VectorPotential::zero(dim)),
            (GaugeConfig::Symmetric | GaugeConfig::Landau, _) => {
                Err(format!("gauge \"{}\" needs a constant field", self.name()))
            }
            (GaugeConfig::Poincare, _) => poincare_gauge(&b, DEFAULT_QUAD_ORDER).map_err(|e| e.to_string()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GaugeConfig::Zero => "zero",
            GaugeConfig::Symmetric => "symmetric",
            GaugeConfig::Landau => "landau",
            GaugeConfig::Poincare => "poincare",
        }
    }
}

fn zero_vec() -> Vec<f64> {
    Vec::new()
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SymbolConfig {
    /// `a · exp(-rate_x |x - x0|² - rate_xi |ξ - ξ0|²)`.
    Gaussian {
        rate_x: f64,
        rate_xi: f64,
        #[serde(default = "zero_vec")]
        center_x: Vec<f64>,
        #[serde(default = "zero_vec")]
        center_xi: Vec<f64>,
        #[serde(default = "one")]
        amplitude: f64,
    },
    Constant {
        value: f64,
    },
}

fn point_of(v: &[f64], dim: usize, what: &str) -> Result<Point, String> {
    if v.is_empty() {
        return Ok([0.0; MAX_DIM]);
    }
    if v.len() != dim {
        return Err(format!("{what} has {} components, grid dimension is {dim}", v.len()));
    }
    let mut p = [0.0; MAX_DIM];
    p[..dim].copy_from_slice(v);
    Ok(p)
}

impl SymbolConfig {
    pub fn build(&self, dim: usize) -> Result<ProductSymbol, String> {
        match self {
            SymbolConfig::Gaussian {
                rate_x,
                rate_xi,
                center_x,
                center_xi,
                amplitude,
            } => {
                if !(*rate_x > 0.0 && *rate_xi > 0.0) {
                    return Err("Gaussian rates must be positive".into());
                }
                let x0 = point_of(center_x, dim, "center_x")?;
                let xi0 = point_of(center_xi, dim, "center_xi")?;
                Ok(ProductSymbol::gaussian_at(dim, &x0, &xi0, *rate_x, *rate_xi)
                    .with_amplitude(Complex64::new(*amplitude, 0.0)))
            }
            SymbolConfig::Constant { value } => Ok(ProductSymbol::constant(dim, Complex64::new(*value, 0.0))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct PhasePointConfig {
    pub x: Vec<f64>,
    pub xi: Vec<f64>,
}

impl PhasePointConfig {
    pub fn build(&self, dim: usize) -> Result<PhasePoint, String> {
        if self.x.len() != dim || self.xi.len() != dim {
            return Err(format!("phase point needs {dim} + {dim} components"));
        }
        PhasePoint::new(&self.x, &self.xi).map_err(|e| e.to_string())
    }
}

/// `p ∈ [1, ∞]`: a number or the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(untagged)]
pub enum PValue {
    Finite(f64),
    Infinite(Infinity),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
pub enum Infinity {
    #[serde(rename = "inf")]
    Inf,
}

impl PValue {
    pub fn value(&self) -> f64 {
        match self {
            PValue::Finite(p) => *p,
            PValue::Infinite(_) => f64::INFINITY,
        }
    }
}

fn default_ps() -> Vec<PValue> {
    vec![PValue::Finite(1.0), PValue::Finite(2.0), PValue::Infinite(Infinity::Inf)]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    /// Points `z = i·h`, `|i| ≤ x_half`.
    pub x_half: usize,
    /// Points `ζ = j·xi_step·k`, `|j| ≤ xi_half`.
    pub xi_half: usize,
    /// Momentum step in units of the dual lattice step `k = π/L`.
    #[serde(default = "one")]
    pub xi_step: f64,
}

impl LatticeConfig {
    pub fn build(&self, grid: &PhaseGrid) -> Result<PhaseLattice, String> {
        PhaseLattice::box_lattice(grid, self.x_half, self.xi_step * grid.k(), self.xi_half).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    pub refine: usize,
    pub radius: f64,
    pub mu_step: f64,
    pub mu_radius: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        let q = DirectQuadrature::default();
        QuadratureConfig {
            refine: q.refine,
            radius: q.radius,
            mu_step: q.mu_step,
            mu_radius: q.mu_radius,
        }
    }
}

impl QuadratureConfig {
    pub fn build(&self) -> DirectQuadrature {
        DirectQuadrature {
            refine: self.refine,
            radius: self.radius,
            mu_step: self.mu_step,
            mu_radius: self.mu_radius,
        }
    }
}

// ---- per-kind parameters

fn default_triples() -> usize {
    1000
}
fn default_radius() -> f64 {
    2.0
}
fn default_quad_order() -> usize {
    DEFAULT_QUAD_ORDER
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct FluxCase {
    pub field: FieldConfig,
    pub gauge: GaugeConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct FluxParams {
    pub cases: Vec<FluxCase>,
    #[serde(default = "default_triples")]
    pub triples: usize,
    /// Points are drawn uniformly from `[-radius, radius]²`.
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_quad_order")]
    pub quad_order: usize,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Csv,
    Binary,
}

fn default_export() -> Vec<ExportFormat> {
    vec![ExportFormat::Csv]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct QuantizeParams {
    pub symbol: SymbolConfig,
    pub gauge: GaugeConfig,
    #[serde(default = "default_export")]
    pub export: Vec<ExportFormat>,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct HsParams {
    pub symbol: SymbolConfig,
    pub gauges: Vec<GaugeConfig>,
    pub tolerance: f64,
    /// Largest spread of the left-hand side across gauges, relative.
    pub gauge_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct MoyalParams {
    pub f: SymbolConfig,
    pub g: SymbolConfig,
    pub gauge: GaugeConfig,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    /// Relative operator-norm residual of the direct quadrature.
    pub tolerance: f64,
    /// Relative max-entry residual of the kernel route.
    pub kernel_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct TranslateParams {
    pub symbol: SymbolConfig,
    pub translations: Vec<PhasePointConfig>,
    pub gauges: Vec<GaugeConfig>,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorConfig {
    /// Orthogonal projection onto a normalized Gaussian state.
    RankOneGaussian {
        rate: f64,
        #[serde(default = "zero_vec")]
        center: Vec<f64>,
    },
    /// `Op^A(symbol)`.
    Quantized { symbol: SymbolConfig },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct KatoParams {
    pub phi: SymbolConfig,
    pub operator: OperatorConfig,
    pub gauge: GaugeConfig,
    pub lattice: LatticeConfig,
    #[serde(default = "default_ps")]
    pub p_list: Vec<PValue>,
    /// Ratios may exceed 1 by at most this much.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct KatoConvParams {
    pub f: SymbolConfig,
    pub g: SymbolConfig,
    pub gauge: GaugeConfig,
    pub lattice: LatticeConfig,
    /// Relative operator-norm residual.
    pub tolerance: f64,
    /// Exponents for `‖Op(f * g)‖_p ≤ ‖f‖_p ‖Op g‖_1`.
    #[serde(default = "default_bound_ps")]
    pub bound_p: Vec<PValue>,
    #[serde(default = "default_slack")]
    pub bound_slack: f64,
}

fn default_bound_ps() -> Vec<PValue> {
    vec![PValue::Finite(2.0)]
}

fn default_slack() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct FactorizationConfig {
    /// Omit for a random band-limited field drawn with the config seed.
    #[serde(default)]
    pub symbol: Option<SymbolConfig>,
    pub s: f64,
    pub t: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ClosedFormConfig {
    pub n: usize,
    pub extent: f64,
    /// Comparison starts at this `|x|`.
    pub min_radius: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SlopeConfig {
    pub dim: usize,
    pub s: f64,
    pub n: usize,
    pub extent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct BesselParams {
    #[serde(default)]
    pub factorization: Vec<FactorizationConfig>,
    #[serde(default)]
    pub closed_form: Option<ClosedFormConfig>,
    #[serde(default)]
    pub slopes: Vec<SlopeConfig>,
    #[serde(default)]
    pub slope_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct TheoremParams {
    /// Members `exp(-λ(|x|² + |ξ|²))`.
    pub lambdas: Vec<f64>,
    pub gauge: GaugeConfig,
    #[serde(default = "default_ps")]
    pub p_list: Vec<PValue>,
    /// `| ‖Op‖_{B2} - ‖F‖_{L²} | / ‖F‖_{L²}` must stay below this.
    pub hs_tolerance: f64,
    /// Family constant: every ratio must stay below this.
    pub ratio_ceiling: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum GaugeComparison {
    /// Two potentials of the same field.
    Potentials { a: GaugeConfig, b: GaugeConfig },
    /// `A` against `A + dφ`, `φ = c0 + <linear, x> + <x, Q x>`.
    GaugeFunction {
        base: GaugeConfig,
        c0: f64,
        linear: Vec<f64>,
        quadratic: Vec<Vec<f64>>,
    },
    /// A quadratic `φ` with coefficients drawn from `[-1, 1]` with the seed.
    RandomQuadratic { base: GaugeConfig },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct GaugeParams {
    pub symbol: SymbolConfig,
    pub comparisons: Vec<GaugeComparison>,
    pub tolerance: f64,
}

pub fn gauge_function(c0: f64, linear: &[f64], quadratic: &[Vec<f64>], dim: usize) -> Result<GaugeFunction, String> {
    let lin = point_of(linear, dim, "linear")?;
    if quadratic.len() != dim || quadratic.iter().any(|r| r.len() != dim) {
        return Err(format!("quadratic must be {dim}x{dim}"));
    }
    let mut q = [[0.0; MAX_DIM]; MAX_DIM];
    for i in 0..dim {
        q[i][..dim].copy_from_slice(&quadratic[i]);
    }
    Ok(GaugeFunction::quadratic(dim, c0, lin, q))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    FluxCheck(FluxParams),
    Quantize(QuantizeParams),
    HsIdentity(HsParams),
    MoyalCheck(MoyalParams),
    TranslateCheck(TranslateParams),
    KatoCheck(KatoParams),
    Bessel(BesselParams),
    TheoremBounds(TheoremParams),
    GaugeCheck(GaugeParams),
    KatoConv(KatoConvParams),
}

/// Top-level keys, with `params` left raw until `kind` is known.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: Kind,
    id: String,
    #[serde(default)]
    seed: u64,
    grid: GridConfig,
    #[serde(default)]
    field: FieldConfig,
    #[serde(default)]
    output_dir: Option<String>,
    params: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub id: String,
    pub seed: u64,
    pub grid: GridConfig,
    pub field: FieldConfig,
    pub output_dir: Option<String>,
    pub params: Params,
}

/// Schema-only mirror of [`ExperimentConfig`].
#[derive(JsonSchema)]
#[serde(deny_unknown_fields)]
#[allow(dead_code)]
struct ConfigSchema {
    kind: Kind,
    /// Experiment identifier, used for the default output directory.
    id: String,
    /// Seed for every randomized part of the experiment.
    #[serde(default)]
    seed: u64,
    grid: GridConfig,
    #[serde(default)]
    field: FieldConfig,
    #[serde(default)]
    output_dir: Option<String>,
    params: ParamsSchema,
}

#[derive(JsonSchema)]
#[serde(untagged)]
#[allow(dead_code)]
enum ParamsSchema {
    FluxCheck(FluxParams),
    Quantize(QuantizeParams),
    HsIdentity(HsParams),
    MoyalCheck(MoyalParams),
    TranslateCheck(TranslateParams),
    KatoCheck(KatoParams),
    Bessel(BesselParams),
    TheoremBounds(TheoremParams),
    GaugeCheck(GaugeParams),
    KatoConv(KatoConvParams),
}

/// The published JSON schema, pretty-printed.
pub fn schema_json() -> String {
    let schema = schemars::schema_for!(ConfigSchema);
    let mut s = serde_json::to_string_pretty(&schema).expect("schema serializes");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// JSON path of the offending value (`.` for the document root).
    pub path: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error at {}: {}", self.path, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn typed<T: DeserializeOwned>(value: serde_json::Value, prefix: &str) -> Result<T, ConfigError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let path = match (prefix, inner.as_str()) {
            ("", p) => p.to_string(),
            (pre, ".") => pre.to_string(),
            (pre, p) => format!("{pre}.{p}"),
        };
        ConfigError {
            path,
            message: e.into_inner().to_string(),
        }
    })
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ConfigError {
        path: ".".into(),
        message: e.to_string(),
    })?;
    let raw: RawConfig = typed(value, "")?;
    let p = raw.params;
    let params = match raw.kind {
        Kind::FluxCheck => Params::FluxCheck(typed(p, "params")?),
        Kind::Quantize => Params::Quantize(typed(p, "params")?),
        Kind::HsIdentity => Params::HsIdentity(typed(p, "params")?),
        Kind::MoyalCheck => Params::MoyalCheck(typed(p, "params")?),
        Kind::TranslateCheck => Params::TranslateCheck(typed(p, "params")?),
        Kind::KatoCheck => Params::KatoCheck(typed(p, "params")?),
        Kind::Bessel => Params::Bessel(typed(p, "params")?),
        Kind::TheoremBounds => Params::TheoremBounds(typed(p, "params")?),
        Kind::GaugeCheck => Params::GaugeCheck(typed(p, "params")?),
        Kind::KatoConv => Params::KatoConv(typed(p, "params")?),
    };
    Ok(ExperimentConfig {
        kind: raw.kind,
        id: raw.id,
        seed: raw.seed,
        grid: raw.grid,
        field: raw.field,
        output_dir: raw.output_dir,
        params,
    })
}
