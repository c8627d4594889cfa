//! Scenario files, the per-operation pipelines and their reports.

use std::path::Path;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::burgers::{burgers_circuit, burgers_surface, classify_at};
use crate::congruence::{principal_congruences, trace_frenet, NormalPair};
use crate::density::{dislocation_tensor, is_holonomic, ScalarDensitySpec};
use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::flow::{
    advance_flow, distortion_rates, flow_consistency, rate_of_stretchings, DistortionHistory, Velocity,
};
use crate::frame::{build_frame_bundle, mat_from, metric_cross, CoframeSpec, FrameBundle};
use crate::geometry::{Chart, Field, FieldKind, ParametricPatch, Point, TestLattice, DEFAULT_NODES};
use crate::glide::{
    build_umbilical_space, dislocation_speed_power_law, dissipation_check, height_from_expression, killing_residual,
    linear_height, orowan_rate, shear_relation_residual, slip_system, stress_profile_residual, LeafMetric,
    OrowanVariant, StressInput,
};
use crate::kinematics::{evolve_kinematics, Boundary, Closure, KinematicSlice, ScalarFn};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operation {
    Analyze,
    Burgers,
    Congruence,
    Evolve,
    Flow,
    Orowan,
}

impl Operation {
    pub fn name(self) -> &'static str {
        match self {
            Operation::Analyze => "analyze",
            Operation::Burgers => "burgers",
            Operation::Congruence => "congruence",
            Operation::Evolve => "evolve",
            Operation::Flow => "flow",
            Operation::Orowan => "orowan",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Json,
    Csv,
    #[default]
    Both,
}

impl OutputFormat {
    fn json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }
    fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub operation: Option<Operation>,
    pub seed: Option<u64>,
    pub frame: FrameConfig,
    #[serde(default)]
    pub chart: ChartConfig,
    #[serde(default)]
    pub units: Units,
    #[serde(default)]
    pub tolerances: Tolerances,
    pub analyze: Option<AnalyzeConfig>,
    pub burgers: Option<BurgersConfig>,
    pub congruence: Option<CongruenceConfig>,
    pub evolve: Option<EvolveConfig>,
    pub flow: Option<FlowConfig>,
    pub orowan: Option<OrowanConfig>,
    pub output: Option<OutputConfig>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct FrameConfig {
    #[serde(flatten)]
    pub spec: CoframeSpec,
    #[serde(default = "one")]
    pub epsilon: f64,
    /// Sample the coframe on the chart grid and differentiate the samples.
    #[serde(default)]
    pub gridded: bool,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartConfig {
    pub lower: Point,
    pub upper: Point,
    pub cells: [usize; 3],
}

impl Default for ChartConfig {
    fn default() -> Self {
        Self {
            lower: [-1.0; 3],
            upper: [1.0; 3],
            cells: [8; 3],
        }
    }
}

/// Declared unit convention; only cm, s and kg·cm⁻² are accepted.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Units {
    #[serde(default = "cm")]
    pub length: String,
    #[serde(default = "sec")]
    pub time: String,
    #[serde(default = "kg_cm2")]
    pub stress: String,
}

fn cm() -> String {
    "cm".into()
}
fn sec() -> String {
    "s".into()
}
fn kg_cm2() -> String {
    "kg/cm^2".into()
}

impl Default for Units {
    fn default() -> Self {
        Self {
            length: cm(),
            time: sec(),
            stress: kg_cm2(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub reconstruction: f64,
    pub decomposition: f64,
    pub compatibility: f64,
    pub holonomic: f64,
    pub stokes: f64,
    pub stokes_gridded: f64,
    pub classify: f64,
    pub gram: f64,
    pub hasimoto: f64,
    pub climb: f64,
    pub principal: f64,
    pub evolve_residual: f64,
    pub convergence_ratio: f64,
    pub determinant: f64,
    pub trace: f64,
    pub metric_rate: f64,
    pub consistency: f64,
    pub christoffel: f64,
    pub killing: f64,
    pub inextensible: f64,
    pub shear_relation: f64,
    pub stress_profile: f64,
    pub chain: f64,
    pub dissipation: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            reconstruction: 1e-8,
            decomposition: 1e-10,
            compatibility: 1e-8,
            holonomic: 1e-10,
            stokes: 1e-6,
            stokes_gridded: 1e-3,
            classify: 1e-6,
            gram: 1e-8,
            hasimoto: 1e-6,
            climb: 1e-6,
            principal: 1e-8,
            evolve_residual: 1e-3,
            convergence_ratio: 8.0,
            determinant: 1e-6,
            trace: 1e-8,
            metric_rate: 1e-6,
            consistency: 1e-8,
            christoffel: 1e-8,
            killing: 1e-8,
            inextensible: 1e-8,
            shear_relation: 1e-6,
            stress_profile: 1e-6,
            chain: 1e-12,
            dissipation: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeConfig {
    /// Point reported in detail; the chart centre by default.
    pub point: Option<Point>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BurgersConfig {
    pub origin: Point,
    #[serde(default = "plane12")]
    pub axes: [usize; 2],
    pub width: f64,
    pub height: f64,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    /// Line direction in frame components for local classification.
    pub line: Option<[f64; 3]>,
    #[serde(default = "one")]
    pub rho: f64,
}

fn plane12() -> [usize; 2] {
    [0, 1]
}
fn default_nodes() -> usize {
    DEFAULT_NODES
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalsConfig {
    pub m: [String; 3],
    pub n: [String; 3],
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CongruenceConfig {
    /// Coordinate components of the line direction; normalized in g.
    pub line: [String; 3],
    pub start: Point,
    pub length: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    pub normals: Option<NormalsConfig>,
    /// Coordinate components of the Burgers vector field for the climb check.
    pub burgers: Option<[String; 3]>,
    /// Principal congruences of γ at the start point.
    #[serde(default)]
    pub principal: bool,
    #[serde(default)]
    pub phi_hint: f64,
}

fn default_step() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosureKind {
    Omega,
    Zeta,
    Theta,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosureConfig {
    pub kind: ClosureKind,
    /// Expression in `X1` (arc length s) and `t`.
    pub expr: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    pub nodes: usize,
    pub length: f64,
    #[serde(default = "periodic")]
    pub boundary: String,
    /// Initial profiles as expressions in `X1` (arc length s).
    pub kappa: String,
    pub theta: String,
    #[serde(default = "zero_expr")]
    pub zeta: String,
    #[serde(default = "zero_expr")]
    pub omega: String,
    pub closure: Option<ClosureConfig>,
    pub steps: usize,
    pub dt: f64,
    #[serde(default)]
    pub convergence: bool,
}

fn periodic() -> String {
    "periodic".into()
}
fn zero_expr() -> String {
    "0".into()
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlasticRateSource {
    /// `D_p = 0`.
    Zero,
    /// `D_p = D_g` of the flow.
    Stretching,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub velocity: [String; 3],
    pub seeds: Vec<Point>,
    pub duration: f64,
    pub dt: f64,
    /// Nine expressions for `P^A_a`, row-major; sets the metric history.
    pub distortion: Option<Vec<String>>,
    pub plastic_rate: Option<PlasticRateSource>,
    pub times: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum LeafConfig {
    Named(String),
    Components { a11: String, a12: String, a22: String },
}

impl Default for LeafConfig {
    fn default() -> Self {
        LeafConfig::Named("flat".into())
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrowanConfig {
    pub h0: Option<f64>,
    /// `h` as an expression in `X3`.
    pub h: Option<String>,
    #[serde(default)]
    pub leaf: LeafConfig,
    #[serde(default)]
    pub point: Point,
    /// Angle of the Burgers direction in the leaf, from `∂₁`.
    #[serde(default)]
    pub beta: f64,
    /// Angle between shear and Burgers directions for the directional rate.
    #[serde(default)]
    pub psi: f64,
    /// Resolved shear stress on the leaf `X³ = 0` (kg·cm⁻²).
    pub t_ref: f64,
    pub stress: StressInput,
    /// Coordinate velocity; by default the Burgers-aligned flow driven by the
    /// power law.
    pub velocity: Option<[String; 3]>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<String>,
}

impl ScenarioConfig {
    pub fn from_toml(source: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(source).map_err(|e| {
            let location = match e.span() {
                Some(span) => {
                    let before = &source[..span.start.min(source.len())];
                    let line = before.matches('\n').count() + 1;
                    let col = span.start - before.rfind('\n').map(|i| i + 1).unwrap_or(0) + 1;
                    format!("line {line}, column {col}")
                }
                None => "document".into(),
            };
            Error::ConfigParse {
                location,
                message: e.message().trim().to_string(),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path)?;
        Ok((Self::from_toml(&text)?, text))
    }

    fn validate(&self) -> Result<()> {
        let bad = |field: &str, message: String| Error::ConfigParse {
            location: field.into(),
            message,
        };
        if self.units.length != "cm" {
            return Err(bad("units.length", format!("expected `cm`, got `{}`", self.units.length)));
        }
        if self.units.time != "s" {
            return Err(bad("units.time", format!("expected `s`, got `{}`", self.units.time)));
        }
        if !matches!(self.units.stress.as_str(), "kg/cm^2" | "kg*cm^-2") {
            return Err(bad("units.stress", format!("expected `kg/cm^2`, got `{}`", self.units.stress)));
        }
        if self.frame.epsilon != 1.0 && self.frame.epsilon != -1.0 {
            return Err(bad("frame.epsilon", format!("must be +1 or -1, got {}", self.frame.epsilon)));
        }
        if let CoframeSpec::Expressions { components } = &self.frame.spec {
            if components.len() != 9 {
                return Err(bad("frame.components", format!("need 9 expressions, got {}", components.len())));
            }
        }
        if let Some(f) = &self.flow {
            if f.distortion.as_ref().is_some_and(|d| d.len() != 9) {
                return Err(bad("flow.distortion", "need 9 expressions".into()));
            }
        }
        if let Some(o) = &self.orowan {
            if o.h0.is_none() && o.h.is_none() {
                return Err(bad("orowan", "give either `h0` or `h`".into()));
            }
            if let LeafConfig::Named(n) = &o.leaf {
                if !matches!(n.as_str(), "flat" | "sphere" | "half_plane") {
                    return Err(bad("orowan.leaf", format!("unknown leaf `{n}` (flat, sphere, half_plane)")));
                }
            }
        }
        Ok(())
    }

    fn require<T>(block: &Option<T>, op: Operation) -> Result<&T> {
        block.as_ref().ok_or_else(|| Error::ConfigParse {
            location: format!("[{}]", op.name()),
            message: format!("section required for the {} operation", op.name()),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub operation: Option<Operation>,
    pub seed: Option<u64>,
    pub tol_scale: f64,
    pub format: OutputFormat,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            operation: None,
            seed: None,
            tol_scale: 1.0,
            format: OutputFormat::Both,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantCheck {
    pub name: String,
    /// The relation the residual measures.
    pub relation: String,
    pub residual: f64,
    pub tolerance: f64,
    /// `true` when the check is a lower bound.
    pub at_least: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub config_sha256: String,
    pub seed: u64,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub scenario: String,
    pub operation: Operation,
    pub results: Value,
    pub checks: Vec<InvariantCheck>,
    pub passed: bool,
    pub artifacts: Vec<String>,
    pub provenance: Provenance,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn check(&self, name: &str) -> Option<&InvariantCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// A table dumped as CSV with a units-bearing header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(file: &str, header: &[&str]) -> Self {
        Self {
            file: file.into(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(dir.join(&self.file)).map_err(|e| Error::Io(e.to_string()))?;
        w.write_record(&self.header).map_err(|e| Error::Io(e.to_string()))?;
        for r in &self.rows {
            w.write_record(r.iter().map(|v| format!("{v:.12e}"))).map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

struct Ctx {
    tol: Tolerances,
    scale: f64,
    seed: u64,
    checks: Vec<InvariantCheck>,
    tables: Vec<Table>,
}

impl Ctx {
    fn check(&mut self, name: &str, relation: &str, residual: f64, tolerance: f64) {
        let tolerance = tolerance * self.scale;
        self.checks.push(InvariantCheck {
            name: name.into(),
            relation: relation.into(),
            residual,
            tolerance,
            at_least: false,
            passed: residual <= tolerance,
        });
    }

    fn check_at_least(&mut self, name: &str, relation: &str, value: f64, bound: f64) {
        self.checks.push(InvariantCheck {
            name: name.into(),
            relation: relation.into(),
            residual: value,
            tolerance: bound,
            at_least: true,
            passed: value >= bound,
        });
    }
}

/// Exit status for a failed run: 2 for configuration and usage problems,
/// 1 for violated invariants.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ConfigParse { .. }
        | Error::Expression { .. }
        | Error::InvalidParameter(_)
        | Error::InvalidChart(_)
        | Error::InvalidField(_)
        | Error::InvalidPolyline(_)
        | Error::Io(_) => 2,
        _ => 1,
    }
}

/// Runs the scenario and, with `out_dir`, writes `report.json` and the CSV
/// dumps selected by `opts.format`.
pub fn run_scenario(cfg: &ScenarioConfig, source: &str, opts: &RunOptions, out_dir: Option<&Path>) -> Result<Report> {
    let op = opts.operation.or(cfg.operation).ok_or_else(|| Error::ConfigParse {
        location: "operation".into(),
        message: "no operation given in the file or on the command line".into(),
    })?;
    if !(opts.tol_scale > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance scale must be positive, got {}", opts.tol_scale)));
    }
    let seed = opts.seed.or(cfg.seed).unwrap_or(0);
    let mut ctx = Ctx {
        tol: cfg.tolerances.clone(),
        scale: opts.tol_scale,
        seed,
        checks: Vec::new(),
        tables: Vec::new(),
    };
    let c = &cfg.chart;
    let chart = Chart::new(c.lower, c.upper, c.cells)?;
    let results = match op {
        Operation::Analyze => analyze(cfg, chart, &mut ctx)?,
        Operation::Burgers => burgers(cfg, chart, &mut ctx)?,
        Operation::Congruence => congruence(cfg, chart, &mut ctx)?,
        Operation::Evolve => evolve(cfg, &mut ctx)?,
        Operation::Flow => flow(cfg, chart, &mut ctx)?,
        Operation::Orowan => orowan(cfg, chart, &mut ctx)?,
    };
    let mut artifacts = Vec::new();
    if opts.format.json() {
        artifacts.push("report.json".to_string());
    }
    if opts.format.csv() {
        artifacts.extend(ctx.tables.iter().map(|t| t.file.clone()));
    }
    let passed = ctx.checks.iter().all(|c| c.passed);
    let report = Report {
        scenario: cfg.name.clone(),
        operation: op,
        results,
        checks: ctx.checks,
        passed,
        artifacts,
        provenance: Provenance {
            config_sha256: format!("{:x}", Sha256::digest(source.as_bytes())),
            seed,
            version: VERSION.into(),
        },
    };
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
        if opts.format.json() {
            std::fs::write(dir.join("report.json"), report.to_json() + "\n")?;
        }
        if opts.format.csv() {
            for t in &ctx.tables {
                t.write(dir)?;
            }
        }
    }
    Ok(report)
}

fn bundle(cfg: &ScenarioConfig, chart: Chart) -> Result<FrameBundle> {
    let cof = cfg.frame.spec.coframe_field(chart)?;
    let cof = if cfg.frame.gridded { cof.sample()? } else { cof };
    build_frame_bundle(cof, cfg.frame.epsilon)
}

fn centre(chart: &Chart) -> Point {
    let (lo, hi) = (chart.lower(), chart.upper());
    [0, 1, 2].map(|i| 0.5 * (lo[i] + hi[i]))
}

fn rows(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    [0, 1, 2].map(|i| [0, 1, 2].map(|j| m[(i, j)]))
}

fn expressions(src: &[String]) -> Result<Vec<Expression>> {
    src.iter().map(|s| Expression::parse(s)).collect()
}

/// Vector field from three coordinate-component expressions at time `t`.
fn vector_field(chart: Chart, src: &[String; 3], t: f64) -> Result<Field> {
    let e = expressions(src)?;
    Ok(Field::analytic(chart, FieldKind::Vector, move |p| e.iter().map(|x| x.eval(p, t)).collect()))
}

fn analyze(cfg: &ScenarioConfig, chart: Chart, ctx: &mut Ctx) -> Result<Value> {
    let b = bundle(cfg, chart)?;
    let density = dislocation_tensor(&b.frame)?;
    let (holonomic, max_torsion) = is_holonomic(&b.frame, ctx.tol.holonomic)?;
    let mut table = Table::new(
        "density.csv",
        &[
            "X1 [cm]", "X2 [cm]", "X3 [cm]", "alpha11 [cm^-1]", "alpha12 [cm^-1]", "alpha13 [cm^-1]",
            "alpha21 [cm^-1]", "alpha22 [cm^-1]", "alpha23 [cm^-1]", "alpha31 [cm^-1]", "alpha32 [cm^-1]",
            "alpha33 [cm^-1]", "t1 [cm^-1]", "t2 [cm^-1]", "t3 [cm^-1]",
        ],
    );
    let (mut recon, mut decomp, mut compat) = (0.0f64, 0.0f64, 0.0f64);
    let shape = chart.grid_shape();
    for i in 0..=shape[0] {
        for j in 0..=shape[1] {
            for k in 0..=shape[2] {
                let p = chart.node([i, j, k]);
                let dp = density.at(&p)?;
                recon = recon.max(dp.reconstruction_residual);
                decomp = decomp.max(dp.decomposition_residual);
                compat = compat.max(b.metric.compatibility_residual(&p)?);
                let mut row = p.to_vec();
                row.extend(rows(&dp.alpha).iter().flatten());
                row.extend(dp.t.iter());
                table.rows.push(row);
            }
        }
    }
    let p = cfg.analyze.as_ref().and_then(|a| a.point).unwrap_or_else(|| centre(&chart));
    let dp = density.at(&p)?;
    ctx.check(
        "reconstruction",
        "eps C_ab^c = t_[a delta_b]^c - e_abd gamma^dc",
        recon,
        ctx.tol.reconstruction,
    );
    ctx.check("decomposition", "alpha = gamma + sigma(t)", decomp, ctx.tol.decomposition);
    ctx.check("metric_compatibility", "nabla g = 0", compat, ctx.tol.compatibility);
    ctx.tables.push(table);
    Ok(json!({
        "frame": cfg.frame.spec.name(),
        "epsilon": cfg.frame.epsilon,
        "gridded": cfg.frame.gridded,
        "is_holonomic": holonomic,
        "max_torsion": max_torsion,
        "point": p,
        "alpha": rows(&dp.alpha),
        "gamma": rows(&dp.gamma),
        "t": [dp.t[0], dp.t[1], dp.t[2]],
        "sigma": rows(&dp.sigma()),
        "max_reconstruction_residual": recon,
        "max_decomposition_residual": decomp,
    }))
}

fn burgers(cfg: &ScenarioConfig, chart: Chart, ctx: &mut Ctx) -> Result<Value> {
    let bc = ScenarioConfig::require(&cfg.burgers, Operation::Burgers)?;
    let b = bundle(cfg, chart)?;
    let density = dislocation_tensor(&b.frame)?;
    let patch = ParametricPatch::rectangle(bc.origin, (bc.axes[0], bc.axes[1]), bc.width, bc.height);
    let circuit = burgers_circuit(&b.frame, &patch.boundary(1)?, bc.nodes)?;
    let rho = ScalarDensitySpec::constant(chart, bc.rho)?;
    let surface = burgers_surface(&density, &patch, Some(&rho), bc.nodes)?;
    let (vc, vs) = (circuit.vector(), surface.vector());
    let scale = vc.norm().max(vs.norm());
    let stokes = if scale > 0.0 { (vc - vs).norm() / scale } else { 0.0 };
    let tol = if cfg.frame.gridded { ctx.tol.stokes_gridded } else { ctx.tol.stokes };
    ctx.check("stokes", "circuit and surface Burgers vectors agree (relative)", stokes, tol);

    let mut table = Table::new(
        "burgers_nodes.csv",
        &[
            "X1 [cm]", "X2 [cm]", "X3 [cm]", "weight", "alpha13 [cm^-1]", "alpha23 [cm^-1]", "alpha33 [cm^-1]",
        ],
    );
    for node in patch.quadrature_nodes(bc.nodes)? {
        let a = density.at(&node.point)?.alpha;
        let mut row = node.point.to_vec();
        row.extend([node.weight, a[(0, 2)], a[(1, 2)], a[(2, 2)]]);
        table.rows.push(row);
    }
    ctx.tables.push(table);

    let classification = match bc.line {
        Some(l) => {
            let (u, v) = (patch.eval(0.5, 0.5).0, Vector3::from(l));
            let cl = classify_at(&density.at(&u)?, &v, bc.rho, ctx.tol.classify)?;
            if let Some(tr) = &cl.triple {
                ctx.check("volterra_frame", "(l, m, n) is orthonormal", tr.gram_residual(), ctx.tol.gram);
                ctx.check("burgers_split", "rho b = gamma(l) + mu m", tr.split_residual, ctx.tol.classify);
            }
            serde_json::to_value(&cl).map_err(|e| Error::Io(e.to_string()))?
        }
        None => Value::Null,
    };
    Ok(json!({
        "frame": cfg.frame.spec.name(),
        "b_circuit": circuit.components,
        "b_surface": surface.components,
        "line_count": surface.line_count,
        "stokes_residual": stokes,
        "classification": classification,
    }))
}

fn congruence(cfg: &ScenarioConfig, chart: Chart, ctx: &mut Ctx) -> Result<Value> {
    let cc = ScenarioConfig::require(&cfg.congruence, Operation::Congruence)?;
    let b = bundle(cfg, chart)?;
    let raw = vector_field(chart, &cc.line, 0.0)?;
    let g = b.metric.clone();
    let l = Field::analytic(chart, FieldKind::Vector, move |p| {
        let v = Vector3::from_column_slice(&raw.value_unchecked(p));
        let n = g.norm(p, &v).unwrap_or(f64::NAN);
        (v / n).iter().copied().collect()
    });
    let normals = match &cc.normals {
        Some(n) => Some(NormalPair {
            m: vector_field(chart, &n.m, 0.0)?,
            n: vector_field(chart, &n.n, 0.0)?,
        }),
        None => None,
    };
    let burgers = cc.burgers.as_ref().map(|s| vector_field(chart, s, 0.0)).transpose()?;
    let samples = trace_frenet(
        &b.metric,
        &l,
        cc.start,
        cc.length,
        cc.step,
        normals.as_ref(),
        burgers.as_ref(),
        ctx.tol.classify,
    )?;
    let mut table = Table::new(
        "frenet.csv",
        &[
            "s [cm]", "X1 [cm]", "X2 [cm]", "X3 [cm]", "kappa [cm^-1]", "tau [cm^-1]", "theta [rad]",
            "psi_re [cm^-1]", "psi_im [cm^-1]",
        ],
    );
    let (mut gram, mut hasimoto, mut climb) = (0.0f64, 0.0f64, 0.0f64);
    let (mut kmin, mut kmax, mut tmax) = (f64::INFINITY, 0.0f64, 0.0f64);
    for smp in &samples {
        let st = &smp.state;
        gram = gram.max(st.gram_residual);
        hasimoto = hasimoto.max(st.hasimoto_residual.unwrap_or(0.0));
        if let Some(c) = &smp.climb {
            climb = climb.max((c.value - c.closed_form).abs());
        }
        kmin = kmin.min(st.kappa);
        kmax = kmax.max(st.kappa);
        tmax = tmax.max(st.tau.abs());
        let psi = st.psi.unwrap_or([f64::NAN; 2]);
        table.rows.push(vec![
            smp.s,
            st.point[0],
            st.point[1],
            st.point[2],
            st.kappa,
            st.tau,
            st.theta.unwrap_or(f64::NAN),
            psi[0],
            psi[1],
        ]);
    }
    ctx.tables.push(table);
    ctx.check("frenet_orthonormality", "(e1, e2, e3) is g-orthonormal", gram, ctx.tol.gram);
    if normals.is_some() {
        ctx.check("hasimoto", "nabla_l N + psi l = 0", hasimoto, ctx.tol.hasimoto);
    }
    if burgers.is_some() && normals.is_some() {
        ctx.check("climb", "climb component matches its closed form", climb, ctx.tol.climb);
    }
    let principal = if cc.principal {
        let dp = dislocation_tensor(&b.frame)?.at(&cc.start)?;
        let pd = principal_congruences(&dp.gamma, &dp.t, cc.phi_hint)?;
        ctx.check("principal_trace", "t = 2(-gamma gamma3 + H E3)", pd.t_residual, ctx.tol.principal);
        serde_json::to_value(&pd).map_err(|e| Error::Io(e.to_string()))?
    } else {
        Value::Null
    };
    Ok(json!({
        "samples": samples.len(),
        "kappa_min": kmin,
        "kappa_max": kmax,
        "tau_max_abs": tmax,
        "first": samples.first().map(|s| &s.state),
        "max_gram_residual": gram,
        "max_hasimoto_residual": hasimoto,
        "max_climb_mismatch": climb,
        "principal": principal,
    }))
}

fn evolve(cfg: &ScenarioConfig, ctx: &mut Ctx) -> Result<Value> {
    let ec = ScenarioConfig::require(&cfg.evolve, Operation::Evolve)?;
    let boundary = match ec.boundary.as_str() {
        "periodic" => Boundary::Periodic,
        "clamped" => Boundary::Clamped,
        other => {
            return Err(Error::ConfigParse {
                location: "evolve.boundary".into(),
                message: format!("expected `periodic` or `clamped`, got `{other}`"),
            })
        }
    };
    let init = |nodes: usize| -> Result<KinematicSlice> {
        let ds = match boundary {
            Boundary::Periodic => ec.length / nodes as f64,
            Boundary::Clamped => ec.length / (nodes.max(2) - 1) as f64,
        };
        let e = expressions(&[ec.kappa.clone(), ec.theta.clone(), ec.zeta.clone(), ec.omega.clone()])?;
        let at = |k: usize| (0..nodes).map(|j| e[k].eval(&[j as f64 * ds, 0.0, 0.0], 0.0)).collect();
        Ok(KinematicSlice {
            s0: 0.0,
            ds,
            kappa: at(0),
            theta: at(1),
            zeta: at(2),
            omega: at(3),
            omega_im: None,
            boundary,
        })
    };
    let closure = match &ec.closure {
        Some(c) => {
            let e = Expression::parse(&c.expr)?;
            let f: ScalarFn = Arc::new(move |s, t| e.eval(&[s, 0.0, 0.0], t));
            Some(match c.kind {
                ClosureKind::Omega => Closure::Omega(f),
                ClosureKind::Zeta => Closure::Zeta(f),
                ClosureKind::Theta => Closure::Theta(f),
            })
        }
        None => None,
    };
    let ev = evolve_kinematics(&init(ec.nodes)?, closure.as_ref(), ec.steps, ec.dt)?;
    ctx.check(
        "consistency_residual",
        "kinematic consistency system (three equations)",
        ev.residual.max(),
        ctx.tol.evolve_residual,
    );
    let ratio = if ec.convergence {
        let fine_nodes = match boundary {
            Boundary::Periodic => 2 * ec.nodes,
            Boundary::Clamped => 2 * ec.nodes - 1,
        };
        let fine = evolve_kinematics(&init(fine_nodes)?, closure.as_ref(), 2 * ec.steps, 0.5 * ec.dt)?;
        let r = ev.residual.max() / fine.residual.max();
        ctx.check_at_least(
            "convergence_ratio",
            "residual shrinks under halving of ds and dt",
            r,
            ctx.tol.convergence_ratio,
        );
        Some(r)
    } else {
        None
    };
    let pr = &ev.profile;
    let mut table = Table::new(
        "evolution.csv",
        &["t [s]", "s [cm]", "kappa [cm^-1]", "theta [rad]", "zeta [cm^-1]", "omega [cm^-1]"],
    );
    for (n, &t) in pr.t.iter().enumerate() {
        for (j, &s) in pr.s.iter().enumerate() {
            table.rows.push(vec![t, s, pr.kappa[n][j], pr.theta[n][j], pr.zeta[n][j], pr.omega[n][j]]);
        }
    }
    ctx.tables.push(table);
    let last = pr.t.len() - 1;
    let fold = |v: &Vec<f64>, f: fn(f64, f64) -> f64, init: f64| v.iter().copied().fold(init, f);
    Ok(json!({
        "closure": ev.closure,
        "nodes": ec.nodes,
        "steps": ec.steps,
        "residual": ev.residual,
        "max_kappa_rate": ev.max_kappa_rate,
        "final_kappa_min": fold(&pr.kappa[last], f64::min, f64::INFINITY),
        "final_kappa_max": fold(&pr.kappa[last], f64::max, f64::NEG_INFINITY),
        "convergence_ratio": ratio,
    }))
}

fn flow(cfg: &ScenarioConfig, chart: Chart, ctx: &mut Ctx) -> Result<Value> {
    let fc = ScenarioConfig::require(&cfg.flow, Operation::Flow)?;
    let ve = expressions(&fc.velocity)?;
    let velocity = Velocity::new(chart, move |p, t| [ve[0].eval(p, t), ve[1].eval(p, t), ve[2].eval(p, t)]);
    let history = match &fc.distortion {
        Some(src) => {
            let e = expressions(src)?;
            Some(DistortionHistory::new(chart, move |p, t| {
                mat_from(&e.iter().map(|x| x.eval(p, t)).collect::<Vec<_>>())
            }))
        }
        None => None,
    };
    let metric0 = match &history {
        Some(h) => h.metric_at(0.0)?,
        None => bundle(cfg, chart)?.metric,
    };
    let state = advance_flow(&velocity, &metric0, &fc.seeds, fc.duration, fc.dt)?;
    ctx.check(
        "determinant_identity",
        "det G = J^2 det g (relative)",
        state.max_det_residual(),
        ctx.tol.determinant,
    );

    let points = TestLattice::with_counts(&chart, 3, 4, ctx.seed).points().to_vec();
    let times = fc.times.clone().unwrap_or_else(|| vec![0.0, 0.5 * fc.duration, fc.duration]);
    let mut trace = 0.0f64;
    for &t in &times {
        let g = match &history {
            Some(h) => h.metric_at(t)?,
            None => metric0.clone(),
        };
        let vf = velocity.at_time(t);
        for p in &points {
            let r = rate_of_stretchings(&g, &vf, p)?;
            trace = trace.max((r.trace - r.divergence).abs());
        }
    }
    ctx.check("trace_identity", "tr D_g = div_g v", trace, ctx.tol.trace);

    let source = fc.plastic_rate.clone().unwrap_or(PlasticRateSource::Zero);
    let consistency = match &history {
        Some(h) => {
            let mut rate = 0.0f64;
            for &t in &times {
                for p in &points {
                    rate = rate.max(distortion_rates(h, p, t)?.metric_residual);
                }
            }
            ctx.check("metric_rate", "g_dot = -2 D_p", rate, ctx.tol.metric_rate);
            let hm = h.clone();
            let metric = move |t: f64| hm.metric_at(t);
            let hd = h.clone();
            let dp = move |p: &Point, t: f64| Ok(distortion_rates(&hd, p, t)?.d_p);
            flow_consistency(&dp, &metric, &velocity, &points, &times, ctx.tol.consistency)?
        }
        None => {
            let g = metric0.clone();
            let metric = move |_t: f64| Ok(g.clone());
            let (g2, v2) = (metric0.clone(), velocity.clone());
            let dp = move |p: &Point, t: f64| match source {
                PlasticRateSource::Zero => Ok(Matrix3::zeros()),
                PlasticRateSource::Stretching => Ok(rate_of_stretchings(&g2, &v2.at_time(t), p)?.d),
            };
            flow_consistency(&dp, &metric, &velocity, &points, &times, ctx.tol.consistency)?
        }
    };

    let mut table = Table::new(
        "trajectories.csv",
        &["seed", "t [s]", "X1 [cm]", "X2 [cm]", "X3 [cm]", "J", "Ep_max"],
    );
    let mut summary = Vec::new();
    for (k, tr) in state.trajectories.iter().enumerate() {
        for (n, &t) in state.times.iter().enumerate() {
            let x = tr.points[n];
            table.rows.push(vec![k as f64, t, x[0], x[1], x[2], tr.jacobian[n], tr.strain_norm[n]]);
        }
        summary.push(json!({
            "seed": tr.seed,
            "final_point": tr.points.last(),
            "final_jacobian": tr.jacobian.last(),
            "max_plastic_strain": tr.strain_norm.iter().copied().fold(0.0, f64::max),
            "plastic_strain": rows(&tr.plastic_strain),
            "det_residual": tr.det_residual,
        }));
    }
    ctx.tables.push(table);
    Ok(json!({
        "steps": state.times.len() - 1,
        "trajectories": summary,
        "consistent": consistency.consistent,
        "conservative": consistency.conservative,
        "residuals": consistency,
        "max_trace_residual": trace,
    }))
}

fn orowan(cfg: &ScenarioConfig, chart: Chart, ctx: &mut Ctx) -> Result<Value> {
    let oc = ScenarioConfig::require(&cfg.orowan, Operation::Orowan)?;
    let leaf = match &oc.leaf {
        LeafConfig::Named(n) => match n.as_str() {
            "sphere" => LeafMetric::round_sphere(),
            "half_plane" => LeafMetric::half_plane(),
            _ => LeafMetric::flat(),
        },
        LeafConfig::Components { a11, a12, a22 } => LeafMetric::from_expressions(a11, a12, a22, 0.0)?,
    };
    let space = match (&oc.h, oc.h0) {
        (Some(src), _) => build_umbilical_space(height_from_expression(src, 0.0)?, leaf.clone(), chart)?,
        (None, Some(h0)) => build_umbilical_space(linear_height(h0), leaf.clone(), chart)?,
        (None, None) => unreachable!("validated"),
    };
    let p = oc.point;
    chart.check(&p)?;
    let stress = oc.stress;
    stress.validate()?;
    if !(oc.t_ref >= 0.0) {
        return Err(Error::NegativeStress(oc.t_ref));
    }
    let h = space.mean_curvature(p[2]);
    let sp = Arc::new(space.clone());

    // Resolved stress profile T(X³) = T_ref exp((h(X³) − h(0))/n).
    let s1 = sp.clone();
    let t_ref = oc.t_ref;
    let profile = move |x3: f64| t_ref * ((s1.h(x3) - s1.h(0.0)) / stress.n_exp).exp();
    let t_p = profile(p[2]);
    let power = dislocation_speed_power_law(t_p, &stress, Some(h))?;
    let v_g = power.v_g;
    let aligned = orowan_rate(h, v_g, OrowanVariant::Aligned)?;
    let directional = orowan_rate(h, v_g, OrowanVariant::Directional { psi: oc.psi })?;

    let (cb, sb) = (oc.beta.cos(), oc.beta.sin());
    let s2 = sp.clone();
    let unit_m = move |q: &Point| -> Vec<f64> {
        let a = s2.leaf().at(q[0], q[1]);
        let norm = (s2.psi(q[2]) * (a[(0, 0)] * cb * cb + 2.0 * a[(0, 1)] * cb * sb + a[(1, 1)] * sb * sb)).sqrt();
        vec![cb / norm, sb / norm, 0.0]
    };
    let m_field = {
        let f = unit_m.clone();
        Field::analytic(chart, FieldKind::Vector, move |q| f(q))
    };
    let v = match &oc.velocity {
        Some(src) => vector_field(chart, src, 0.0)?,
        None => {
            let f = unit_m.clone();
            let prof = profile.clone();
            Field::analytic(chart, FieldKind::Vector, move |q| {
                let vg = stress.v0 * (prof(q[2]) / stress.t0).powf(stress.n_exp);
                f(q).iter().map(|c| vg * c).collect()
            })
        }
    };
    let g = space.metric();
    let gm = g.at(&p)?;
    let m = Vector3::from_column_slice(&unit_m(&p));
    let n = Vector3::z();
    let l = metric_cross(g, &p, &m, &n)?;
    let d = rate_of_stretchings(g, &v, &p)?.d;
    let slip = slip_system(&d, &gm, &l, &m, &n, ctx.tol.inextensible)?;
    let (m_low, n_low) = (gm * m, gm * n);
    let t_tensor = t_p * (m_low * n_low.transpose() + n_low * m_low.transpose());
    let diss = dissipation_check(&t_tensor, &d, &gm, Some((&m, &n)))?;

    let lattice = TestLattice::new(&chart, ctx.seed).points().to_vec();
    let killing = killing_residual(space.leaf(), &v, &lattice)?;
    let shear = shear_relation_residual(&space, &v, &slip, &p)?;
    let stress_res = stress_profile_residual(g, &m_field, &profile, stress.n_exp, &p)?;
    let chain = power.chain_residual.unwrap_or(0.0);

    ctx.check("christoffel", "umbilical Christoffel closed forms", space.christoffel_residual, ctx.tol.christoffel);
    ctx.check("killing", "nabla_a v_b + nabla_b v_a = 0 on the leaves", killing, ctx.tol.killing);
    ctx.check(
        "inextensibility",
        "u D_g u = 0 in the glide plane (relative)",
        slip.inextensibility / d.abs().max().max(f64::MIN_POSITIVE),
        ctx.tol.inextensible,
    );
    ctx.check("shear_relation", "1/2 d3 v_a + H v_a = gamma_dot S_g s_a", shear, ctx.tol.shear_relation);
    ctx.check("stress_profile", "m_a d3 m^a = (n/T) d3 T", stress_res, ctx.tol.stress_profile);
    ctx.check("orowan_chain", "gamma_dot_0 (T/T0)^n = rho b_g v_g", chain, ctx.tol.chain);
    ctx.check(
        "dissipation_identity",
        "tr(T D_g) = 2 T_mn gamma_dot",
        diss.identity_residual.unwrap_or(f64::NAN),
        ctx.tol.dissipation,
    );
    ctx.check(
        "dissipation_sign",
        "tr(T D_g) >= 0",
        if diss.nonnegative { 0.0 } else { -diss.value },
        0.0,
    );

    let mut table = Table::new(
        "orowan_profile.csv",
        &["X3 [cm]", "H [cm^-1]", "Psi", "T [kg/cm^2]", "v_g [cm/s]", "gamma_dot [s^-1]"],
    );
    let (lo, hi) = (chart.lower()[2], chart.upper()[2]);
    let cells = chart.grid_shape()[2];
    for k in 0..=cells {
        let x3 = lo + (hi - lo) * k as f64 / cells as f64;
        let hk = space.mean_curvature(x3);
        let tk = profile(x3);
        let vg = stress.v0 * (tk / stress.t0).powf(stress.n_exp);
        table.rows.push(vec![x3, hk, space.psi(x3), tk, vg, hk * vg]);
    }
    ctx.tables.push(table);

    Ok(json!({
        "H": h,
        "rho_bg": h,
        "v_g": v_g,
        "resolved_stress": t_p,
        "gamma_dot_aligned": aligned,
        "gamma_dot_directional": directional,
        "gamma_dot_power": power.gamma_dot,
        "gamma_dot_flow": slip.gamma_dot,
        "slip": slip,
        "dissipation": diss,
        "leaf_class": space.class,
        "curvature_range": [space.curvature_range.0, space.curvature_range.1],
        "residuals": {
            "killing": killing,
            "inextensibility": slip.inextensibility,
            "shear_relation": shear,
            "stress_profile": stress_res,
            "christoffel": space.christoffel_residual,
            "chain": chain,
        },
    }))
}
