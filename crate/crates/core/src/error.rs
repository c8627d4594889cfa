use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure mode of the library.
///
/// Messages name the geometric relation that was violated so that CLI users
/// can tell which part of the theory a scenario broke.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point {point:?} lies outside the chart box")]
    PointOutsideChart { point: [f64; 3] },

    #[error("finite-difference stencil at {point:?} leaves the grid along axis {axis}")]
    StencilOutOfRange { point: [f64; 3], axis: usize },

    #[error("invalid chart: {0}")]
    InvalidChart(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("analytic partial along axis {axis} disagrees with finite differences at {point:?} (relative error {relative_error:.3e})")]
    PartialMismatch {
        axis: usize,
        point: [f64; 3],
        relative_error: f64,
    },

    #[error("invalid polyline: {0}")]
    InvalidPolyline(String),

    #[error("degenerate patch: |d_u x d_v| = {norm:.3e} at (u, v) = ({u}, {v})")]
    DegeneratePatch { u: f64, v: f64, norm: f64 },

    #[error("vector field vanishes (|v| = {norm:.3e}) at {point:?}; integral curve undefined")]
    VanishingField { point: [f64; 3], norm: f64 },

    #[error("singular coframe: |det e^a_A| = {det:.3e} at {point:?} (frame/coframe duality fails)")]
    SingularCoframe { point: [f64; 3], det: f64 },

    #[error("coframe is negatively oriented at {point:?} (det = {det:.3e}); mirror frames are rejected")]
    MirrorFrame { point: [f64; 3], det: f64 },

    #[error("metric is singular or not positive-definite at {point:?}")]
    SingularMetric { point: [f64; 3] },

    #[error("decomposition identity eps*C_ab^c = t_[a delta_b]^c - e_abd gamma^dc violated: residual {residual:.3e}")]
    ReconstructionFailure { residual: f64 },

    #[error("scalar dislocation density must be positive (rho = {value:.3e} at {point:?})")]
    NonPositiveDensity { point: [f64; 3], value: f64 },

    #[error("Burgers circuit must be a closed polyline")]
    OpenPath,

    #[error("local Burgers vector rho*b = l.alpha vanishes (b_g = {b_g:.3e}); no dislocation line to classify")]
    ZeroBurgers { b_g: f64 },

    #[error("Burgers direction m = mu/|mu| undefined (mu = {mu:.3e}): t is zero or parallel to l")]
    UndefinedBurgersDirection { mu: f64 },

    #[error("line tangent is not g-unit (|l|_g - 1 = {deviation:.3e})")]
    NotUnitTangent { deviation: f64 },

    #[error("curvature kappa = {kappa:.3e} below the Frenet threshold; principal normal undefined (kappa > 0 required)")]
    VanishingCurvature { kappa: f64 },

    #[error("climb component requires a Volterra line with b.n = 0 (|b.n| = {b_dot_n:.3e})")]
    NotVolterra { b_dot_n: f64 },

    #[error("gamma tensor eigenvalues {eigenvalues:?} do not fit the principal pattern (-gamma, gamma, 0)")]
    PatternMismatch { eigenvalues: [f64; 3] },

    #[error("curvature collapsed (kappa = {kappa:.3e} at s-node {node}); kinematic consistency system left its domain")]
    CurvatureCollapse { node: usize, kappa: f64 },

    #[error("kinematic closure incomplete: {0}")]
    ClosureMissing(String),

    #[error("static congruence needs kappa0 > 0 (got {0})")]
    NonPositiveCurvature(f64),

    #[error("plastic distortion P is singular at t = {t} (det = {det:.3e})")]
    SingularP { t: f64, det: f64 },

    #[error("trajectory left the chart at t = {t} from seed {seed:?}")]
    ExitedDomain { seed: [f64; 3], t: f64 },

    #[error("flow Jacobian J = det(chi^A_a) = {jacobian:.3e} collapsed for seed {seed:?}")]
    JacobianCollapse { seed: [f64; 3], jacobian: f64 },

    #[error("Lie derivative supports tensors of rank <= 3 (got rank {0})")]
    UnsupportedRank(usize),

    #[error("leaf metric a_(alpha beta) is not positive-definite at {point:?}")]
    NonPositiveLeafMetric { point: [f64; 3] },

    #[error("flow violates the inextensible glide-plane constraint u.D_g.u = 0 (max {value:.3e}, tolerance {tolerance:.3e})")]
    NotInextensible { value: f64, tolerance: f64 },

    #[error("shear rate n.D_g.m vanishes; direction of shear undefined")]
    VanishingShearRate,

    #[error("dislocation speed must be positive (got {0})")]
    NonPositiveSpeed(f64),

    #[error("directional coefficient needs |psi| < pi/2 (got {0})")]
    InvalidShearAngle(f64),

    #[error("resolved shear stress must be non-negative (got {0})")]
    NegativeStress(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("configuration error at {location}: {message}")]
    ConfigParse { location: String, message: String },

    #[error("expression error in `{expression}`: {message}")]
    Expression { expression: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
