//! Anholonomy object, torsion, the dislocation density tensor α and its
//! split into the symmetric tensor γ and the axial covector t.
//!
//! Everything here is in frame indices, where the metric is δ_ab and the
//! permutation densities e^{abc}, e_{abc} are the numeric symbol.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::frame::{permutation, MetricField, MovingFrame};
use crate::geometry::{box_integral, exterior_derivative, Chart, Field, FieldKind, Point, TestLattice, DEFAULT_NODES};

/// Rank-3 array indexed `[a][b][c]`.
pub type Rank3 = [[[f64; 3]; 3]; 3];

/// Tolerance on the reconstruction identity
/// `εC_ab^c = t_[a δ_b]^c − e_abd γ^dc`.
pub const RECONSTRUCTION_TOL: f64 = 1e-8;

/// Permutation density used when contracting torsion into α.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PermutationSymbol {
    sign: f64,
}

impl Default for PermutationSymbol {
    fn default() -> Self {
        Self { sign: 1.0 }
    }
}

impl PermutationSymbol {
    /// A deliberately wrong symbol with ε_123 = −1, for mutation checks.
    pub fn flipped() -> Self {
        Self { sign: -1.0 }
    }

    pub fn get(&self, a: usize, b: usize, c: usize) -> f64 {
        self.sign * permutation(a, b, c)
    }
}

/// `C_ab^c` from `[E_a, E_b] = C_ab^c E_c`.
#[derive(Debug, Clone)]
pub struct AnholonomyObject {
    frame: MovingFrame,
}

pub fn anholonomy(frame: &MovingFrame) -> AnholonomyObject {
    AnholonomyObject { frame: frame.clone() }
}

impl AnholonomyObject {
    pub fn frame(&self) -> &MovingFrame {
        &self.frame
    }

    /// `C_ab^c = e^c_A (E_a^B ∂_B E_b^A − E_b^B ∂_B E_a^A)` at `p`.
    pub fn at(&self, p: &Point) -> Result<Rank3> {
        let f = self.frame.frame_at(p)?;
        let cof = self.frame.coframe_at(p)?;
        let df = self.frame.frame_partials(p)?;
        let mut c = [[[0.0; 3]; 3]; 3];
        for a in 0..3 {
            for b in (a + 1)..3 {
                let mut bracket = [0.0; 3];
                for (cap_a, slot) in bracket.iter_mut().enumerate() {
                    for cap_b in 0..3 {
                        *slot += f[(a, cap_b)] * df[cap_b][(b, cap_a)] - f[(b, cap_b)] * df[cap_b][(a, cap_a)];
                    }
                }
                for k in 0..3 {
                    let v: f64 = (0..3).map(|cap_a| cof[(k, cap_a)] * bracket[cap_a]).sum();
                    c[a][b][k] = v;
                    c[b][a][k] = -v;
                }
            }
        }
        Ok(c)
    }

    /// As a 27-component field, `[a][b][c]` row-major.
    pub fn field(&self) -> Field {
        let this = self.clone();
        Field::analytic(*self.frame.chart(), FieldKind::Components(27), move |p| {
            flatten(&this.at(p).unwrap_or([[[f64::NAN; 3]; 3]; 3]))
        })
    }
}

fn flatten(r: &Rank3) -> Vec<f64> {
    r.iter().flat_map(|m| m.iter().flat_map(|row| row.iter().copied())).collect()
}

/// Torsion `S_ab^c = −½ C_ab^c` of the frame's teleparallel connection.
#[derive(Debug, Clone)]
pub struct TorsionTensor {
    anholonomy: AnholonomyObject,
}

pub fn torsion_tensor(frame: &MovingFrame) -> TorsionTensor {
    TorsionTensor {
        anholonomy: anholonomy(frame),
    }
}

impl TorsionTensor {
    pub fn at(&self, p: &Point) -> Result<Rank3> {
        let mut s = self.anholonomy.at(p)?;
        for plane in s.iter_mut() {
            for row in plane.iter_mut() {
                for v in row.iter_mut() {
                    *v *= -0.5;
                }
            }
        }
        Ok(s)
    }

    pub fn anholonomy(&self) -> &AnholonomyObject {
        &self.anholonomy
    }

    /// The coordinate 2-forms `dE^a`, with `(dE^a)_AB = ∂_A e^a_B − ∂_B e^a_A`.
    pub fn coframe_differentials(&self) -> [Field; 3] {
        let f = self.anholonomy.frame();
        [0, 1, 2].map(|a| exterior_derivative(&f.coframe_covector_field(a)))
    }
}

/// α, γ, t at one point. `alpha[(b, a)] = α^{ba}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityPoint {
    pub alpha: Matrix3<f64>,
    pub gamma: Matrix3<f64>,
    pub t: Vector3<f64>,
    /// max |γ^{ab} + ½ t_c e^{cab} − α^{ab}|.
    pub decomposition_residual: f64,
    /// max |εC_ab^c − t_[a δ_b]^c + e_abd γ^{dc}|.
    pub reconstruction_residual: f64,
}

impl DensityPoint {
    /// `σ^{ab} = ½ t_c e^{cab}`.
    pub fn sigma(&self) -> Matrix3<f64> {
        sigma_of(&self.t)
    }
}

pub fn sigma_of(t: &Vector3<f64>) -> Matrix3<f64> {
    let mut s = Matrix3::zeros();
    for a in 0..3 {
        for b in 0..3 {
            s[(a, b)] = 0.5 * (0..3).map(|c| t[c] * permutation(c, a, b)).sum::<f64>();
        }
    }
    s
}

/// Split of a frame-index α into its symmetric part and axial covector.
pub fn decompose(alpha: &Matrix3<f64>) -> (Matrix3<f64>, Vector3<f64>) {
    let gamma = 0.5 * (alpha + alpha.transpose());
    let mut t = Vector3::zeros();
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                t[a] += permutation(a, b, c) * alpha[(b, c)];
            }
        }
    }
    (gamma, t)
}

/// The dislocation density tensor of a frame, evaluated pointwise.
#[derive(Debug, Clone)]
pub struct DislocationDensity {
    torsion: TorsionTensor,
    perm: PermutationSymbol,
}

impl DislocationDensity {
    pub fn frame(&self) -> &MovingFrame {
        self.torsion.anholonomy.frame()
    }

    pub fn epsilon(&self) -> f64 {
        self.frame().epsilon()
    }

    pub fn torsion(&self) -> &TorsionTensor {
        &self.torsion
    }

    pub fn chart(&self) -> &Chart {
        self.frame().chart()
    }

    /// α^{ba} = ε S_cd^a e^{cdb}, split and checked against the
    /// reconstruction identity.
    pub fn at(&self, p: &Point) -> Result<DensityPoint> {
        let eps = self.epsilon();
        let c = self.torsion.anholonomy.at(p)?;
        let mut alpha = Matrix3::zeros();
        for b in 0..3 {
            for a in 0..3 {
                let mut s = 0.0;
                for i in 0..3 {
                    for j in 0..3 {
                        s += -0.5 * c[i][j][a] * self.perm.get(i, j, b);
                    }
                }
                alpha[(b, a)] = eps * s;
            }
        }
        let (gamma, t) = decompose(&alpha);
        let decomposition_residual = (gamma + sigma_of(&t) - alpha).abs().max();

        let mut worst = 0.0f64;
        for a in 0..3 {
            for b in 0..3 {
                for k in 0..3 {
                    let da = if a == k { 1.0 } else { 0.0 };
                    let db = if b == k { 1.0 } else { 0.0 };
                    let skew = 0.5 * (t[a] * db - t[b] * da);
                    let eg: f64 = (0..3).map(|d| permutation(a, b, d) * gamma[(d, k)]).sum();
                    worst = worst.max((eps * c[a][b][k] - skew + eg).abs());
                }
            }
        }
        let point = DensityPoint {
            alpha,
            gamma,
            t,
            decomposition_residual,
            reconstruction_residual: worst,
        };
        if !(worst <= RECONSTRUCTION_TOL) {
            return Err(Error::ReconstructionFailure { residual: worst });
        }
        Ok(point)
    }

    /// `t_a = ε C_ab^b` straight from the anholonomy, for cross-checking.
    pub fn trace_t(&self, p: &Point) -> Result<Vector3<f64>> {
        let c = self.torsion.anholonomy.at(p)?;
        let eps = self.epsilon();
        Ok(Vector3::from_fn(|a, _| eps * (0..3).map(|b| c[a][b][b]).sum::<f64>()))
    }
}

/// Builds α for `frame` and runs the reconstruction check on the test lattice.
pub fn dislocation_tensor(frame: &MovingFrame) -> Result<DislocationDensity> {
    dislocation_tensor_with(frame, PermutationSymbol::default())
}

pub fn dislocation_tensor_with(frame: &MovingFrame, perm: PermutationSymbol) -> Result<DislocationDensity> {
    let d = DislocationDensity {
        torsion: torsion_tensor(frame),
        perm,
    };
    for p in TestLattice::new(frame.chart(), 0xA1FA).points() {
        d.at(p)?;
    }
    Ok(d)
}

/// Whether `max |S_ab^c|` over the test lattice stays below `tol`, with that maximum.
pub fn is_holonomic(frame: &MovingFrame, tol: f64) -> Result<(bool, f64)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be positive, got {tol}")));
    }
    let s = torsion_tensor(frame);
    let mut worst = 0.0f64;
    for p in TestLattice::new(frame.chart(), 0x5701).points() {
        for plane in s.at(p)? {
            for row in plane {
                for v in row {
                    worst = worst.max(v.abs());
                }
            }
        }
    }
    Ok((worst < tol, worst))
}

/// Scalar dislocation density ρ (cm⁻²), required positive.
#[derive(Debug, Clone)]
pub struct ScalarDensitySpec {
    rho: Field,
}

impl ScalarDensitySpec {
    pub fn new(rho: Field) -> Result<Self> {
        if rho.components() != 1 {
            return Err(Error::InvalidField("density must be a scalar field".into()));
        }
        let spec = Self { rho };
        for p in TestLattice::new(spec.rho.chart(), 0xD0).points() {
            spec.at(p)?;
        }
        Ok(spec)
    }

    pub fn constant(chart: Chart, value: f64) -> Result<Self> {
        Self::new(Field::constant(chart, FieldKind::Scalar, vec![value]))
    }

    pub fn field(&self) -> &Field {
        &self.rho
    }

    pub fn at(&self, p: &Point) -> Result<f64> {
        let v = self.rho.value(p)?[0];
        if !(v > 0.0) {
            return Err(Error::NonPositiveDensity { point: *p, value: v });
        }
        Ok(v)
    }
}

/// Total line length `∫_B ρ √g dX` over the box `[lower, upper]`.
pub fn total_line_length(rho: &ScalarDensitySpec, g: &MetricField, lower: Point, upper: Point) -> Result<f64> {
    let chart = g.chart();
    chart.check(&lower)?;
    chart.check(&upper)?;
    box_integral(lower, upper, DEFAULT_NODES, |p| Ok(rho.at(p)? * g.sqrt_det(p)?))
}
