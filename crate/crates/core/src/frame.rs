//! Bravais moving frames, dual coframes, the intrinsic metric
//! `g_AB = δ_ab e^a_A e^b_B`, its Levi-Civita connection and the volume form.
//!
//! The coframe `e^a_A` is the canonical input; the frame `e_a^A` is obtained by
//! pointwise inversion. Matrices follow one layout throughout the crate:
//! `coframe[(a, A)] = e^a_A` and `frame[(a, A)] = e_a^A`, so the rows of the
//! frame matrix are the coordinate components of the vectors `E_a`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::geometry::{Chart, Field, FieldKind, Point, TestLattice};

/// Below this |det e^a_A| the coframe counts as singular.
pub const MIN_COFRAME_DET: f64 = 1e-10;

/// `ε_abc` with ε_123 = +1.
pub fn permutation(a: usize, b: usize, c: usize) -> f64 {
    match (a, b, c) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}

pub(crate) fn mat_from(v: &[f64]) -> Matrix3<f64> {
    Matrix3::from_row_slice(&v[..9])
}

pub(crate) fn mat_to_vec(m: &Matrix3<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(9);
    for r in 0..3 {
        for c in 0..3 {
            out.push(m[(r, c)]);
        }
    }
    out
}

/// Named coframe families plus user expressions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoframeSpec {
    /// `E^a = dX^a`.
    Holonomic,
    /// `E^3 = dX^3 + b0 X^1 dX^2`, others holonomic.
    Screw { b0: f64 },
    /// `E^1 = dX^1 + beta X^1 dX^2`, others holonomic.
    Edge { beta: f64 },
    /// `E^α = exp(-h0 X^3) dX^α`, `E^3 = dX^3`.
    Umbilical { h0: f64 },
    /// Nine expression strings for `e^a_A`, row-major in (a, A).
    Expressions { components: Vec<String> },
}

impl CoframeSpec {
    pub fn name(&self) -> String {
        match self {
            CoframeSpec::Holonomic => "holonomic".into(),
            CoframeSpec::Screw { b0 } => format!("screw(b0={b0})"),
            CoframeSpec::Edge { beta } => format!("edge(beta={beta})"),
            CoframeSpec::Umbilical { h0 } => format!("umbilical(h0={h0})"),
            CoframeSpec::Expressions { .. } => "expressions".into(),
        }
    }

    /// The coframe `e^a_A` as a field over `chart`.
    pub fn coframe_field(&self, chart: Chart) -> Result<Field> {
        let kind = FieldKind::Tensor(vec![crate::geometry::Variance::Up, crate::geometry::Variance::Down]);
        let field = match self.clone() {
            CoframeSpec::Holonomic => Field::constant(chart, kind, mat_to_vec(&Matrix3::identity())),
            CoframeSpec::Screw { b0 } => Field::analytic_with_partials(
                chart,
                kind,
                move |p| vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, b0 * p[0], 1.0],
                move |_, axis| {
                    let mut d = vec![0.0; 9];
                    if axis == 0 {
                        d[7] = b0;
                    }
                    d
                },
            )?,
            CoframeSpec::Edge { beta } => Field::analytic_with_partials(
                chart,
                kind,
                move |p| vec![1.0, beta * p[0], 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
                move |_, axis| {
                    let mut d = vec![0.0; 9];
                    if axis == 0 {
                        d[1] = beta;
                    }
                    d
                },
            )?,
            CoframeSpec::Umbilical { h0 } => Field::analytic_with_partials(
                chart,
                kind,
                move |p| {
                    let s = (-h0 * p[2]).exp();
                    vec![s, 0.0, 0.0, 0.0, s, 0.0, 0.0, 0.0, 1.0]
                },
                move |p, axis| {
                    let mut d = vec![0.0; 9];
                    if axis == 2 {
                        let s = -h0 * (-h0 * p[2]).exp();
                        d[0] = s;
                        d[4] = s;
                    }
                    d
                },
            )?,
            CoframeSpec::Expressions { components } => {
                if components.len() != 9 {
                    return Err(Error::ConfigParse {
                        location: "frame.components".into(),
                        message: format!("expected 9 coframe expressions, got {}", components.len()),
                    });
                }
                let exprs = components
                    .iter()
                    .map(|s| Expression::parse(s))
                    .collect::<Result<Vec<_>>>()?;
                Field::analytic(chart, kind, move |p| exprs.iter().map(|e| e.eval(p, 0.0)).collect())
            }
        };
        Ok(field)
    }
}

/// Frame, coframe and orientation sign ε of the Burgers vector.
#[derive(Debug, Clone)]
pub struct MovingFrame {
    coframe: Field,
    frame: Field,
    epsilon: f64,
}

impl MovingFrame {
    pub fn coframe_field(&self) -> &Field {
        &self.coframe
    }

    pub fn frame_field(&self) -> &Field {
        &self.frame
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        if epsilon != 1.0 && epsilon != -1.0 {
            return Err(Error::InvalidParameter(format!("epsilon must be +1 or -1, got {epsilon}")));
        }
        self.epsilon = epsilon;
        Ok(self)
    }

    pub fn chart(&self) -> &Chart {
        self.coframe.chart()
    }

    /// `e^a_A` at `p`.
    pub fn coframe_at(&self, p: &Point) -> Result<Matrix3<f64>> {
        Ok(mat_from(&self.coframe.value(p)?))
    }

    /// `e_a^A` at `p` (row a = coordinate components of E_a).
    pub fn frame_at(&self, p: &Point) -> Result<Matrix3<f64>> {
        Ok(mat_from(&self.frame.value(p)?))
    }

    /// `∂_B e_a^A` for B = 0, 1, 2.
    pub fn frame_partials(&self, p: &Point) -> Result<[Matrix3<f64>; 3]> {
        Ok([
            mat_from(&self.frame.partial(p, 0)?),
            mat_from(&self.frame.partial(p, 1)?),
            mat_from(&self.frame.partial(p, 2)?),
        ])
    }

    /// Frame components `x^a = e^a_A x^A` of a coordinate vector.
    pub fn to_frame(&self, p: &Point, coord: &Vector3<f64>) -> Result<Vector3<f64>> {
        Ok(self.coframe_at(p)? * coord)
    }

    /// Coordinate components `x^A = x^a e_a^A` of a frame vector.
    pub fn to_coordinates(&self, p: &Point, frame_vec: &Vector3<f64>) -> Result<Vector3<f64>> {
        Ok(self.frame_at(p)?.transpose() * frame_vec)
    }

    /// Coordinate components of `E_a` as a vector field.
    pub fn frame_vector_field(&self, a: usize) -> Field {
        let f = self.frame.clone();
        Field::analytic_with_partials_unchecked(
            *self.chart(),
            FieldKind::Vector,
            move |p| f.value_unchecked(p)[3 * a..3 * a + 3].to_vec(),
            {
                let f = self.frame.clone();
                move |p, axis| f.partial_unchecked(p, axis)[3 * a..3 * a + 3].to_vec()
            },
        )
    }

    /// Coordinate components of a vector field given in frame components.
    pub fn to_coordinate_field(&self, frame_components: &Field) -> Field {
        let f = self.frame.clone();
        let v = frame_components.clone();
        let f2 = self.frame.clone();
        let v2 = frame_components.clone();
        Field::analytic_with_partials_unchecked(
            *self.chart(),
            FieldKind::Vector,
            move |p| {
                let x = v.value_unchecked(p);
                let m = mat_from(&f.value_unchecked(p));
                (m.transpose() * Vector3::new(x[0], x[1], x[2])).iter().copied().collect()
            },
            move |p, axis| {
                let x = v2.value_unchecked(p);
                let dx = v2.partial_unchecked(p, axis);
                let m = mat_from(&f2.value_unchecked(p));
                let dm = mat_from(&f2.partial_unchecked(p, axis));
                (dm.transpose() * Vector3::new(x[0], x[1], x[2]) + m.transpose() * Vector3::new(dx[0], dx[1], dx[2]))
                    .iter()
                    .copied()
                    .collect()
            },
        )
    }

    /// The covector field `E^a` (row a of the coframe).
    pub fn coframe_covector_field(&self, a: usize) -> Field {
        let c = self.coframe.clone();
        let c2 = self.coframe.clone();
        Field::analytic_with_partials_unchecked(
            *self.chart(),
            FieldKind::Covector,
            move |p| c.value_unchecked(p)[3 * a..3 * a + 3].to_vec(),
            move |p, axis| c2.partial_unchecked(p, axis)[3 * a..3 * a + 3].to_vec(),
        )
    }
}

/// Christoffel symbols `Γ^A_BC`, indexed `[A][B][C]`.
pub type Christoffel = [[[f64; 3]; 3]; 3];

/// The intrinsic metric as a field of `g_AB` with its Levi-Civita connection.
#[derive(Debug, Clone)]
pub struct MetricField {
    g: Field,
}

impl MetricField {
    /// Wraps a field of covariant components; symmetry and positivity are
    /// checked at every evaluation that needs them.
    pub fn from_field(g: Field) -> Result<Self> {
        if g.components() != 9 {
            return Err(Error::InvalidField("metric needs 9 components".into()));
        }
        Ok(Self { g })
    }

    /// Euclidean metric on `chart`.
    pub fn flat(chart: Chart) -> Self {
        Self {
            g: Field::constant(chart, FieldKind::covariant2(), mat_to_vec(&Matrix3::identity())),
        }
    }

    pub fn field(&self) -> &Field {
        &self.g
    }

    pub fn chart(&self) -> &Chart {
        self.g.chart()
    }

    pub fn at(&self, p: &Point) -> Result<Matrix3<f64>> {
        let g = mat_from(&self.g.value(p)?);
        if g.cholesky().is_none() {
            return Err(Error::SingularMetric { point: *p });
        }
        Ok(g)
    }

    pub fn inverse_at(&self, p: &Point) -> Result<Matrix3<f64>> {
        self.at(p)?.try_inverse().ok_or(Error::SingularMetric { point: *p })
    }

    /// `∂_C g_AB` for C = 0, 1, 2.
    pub fn partials(&self, p: &Point) -> Result<[Matrix3<f64>; 3]> {
        Ok([
            mat_from(&self.g.partial(p, 0)?),
            mat_from(&self.g.partial(p, 1)?),
            mat_from(&self.g.partial(p, 2)?),
        ])
    }

    pub fn sqrt_det(&self, p: &Point) -> Result<f64> {
        Ok(self.at(p)?.determinant().sqrt())
    }

    /// `Γ^A_BC = ½ g^AD (∂_B g_DC + ∂_C g_DB − ∂_D g_BC)`.
    pub fn christoffel(&self, p: &Point) -> Result<Christoffel> {
        let ginv = self.inverse_at(p)?;
        let dg = self.partials(p)?;
        let mut gamma = [[[0.0; 3]; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                for c in b..3 {
                    let mut s = 0.0;
                    for d in 0..3 {
                        s += ginv[(a, d)] * (dg[b][(d, c)] + dg[c][(d, b)] - dg[d][(b, c)]);
                    }
                    gamma[a][b][c] = 0.5 * s;
                    gamma[a][c][b] = 0.5 * s;
                }
            }
        }
        Ok(gamma)
    }

    pub fn inner(&self, p: &Point, u: &Vector3<f64>, v: &Vector3<f64>) -> Result<f64> {
        Ok((u.transpose() * self.at(p)? * v)[0])
    }

    pub fn norm(&self, p: &Point, u: &Vector3<f64>) -> Result<f64> {
        Ok(self.inner(p, u, u)?.max(0.0).sqrt())
    }

    /// `∇_C g_AB`; zero for a Levi-Civita connection.
    pub fn compatibility_residual(&self, p: &Point) -> Result<f64> {
        let g = self.at(p)?;
        let dg = self.partials(p)?;
        let gam = self.christoffel(p)?;
        let mut worst = 0.0f64;
        for c in 0..3 {
            for a in 0..3 {
                for b in 0..3 {
                    let mut r = dg[c][(a, b)];
                    for d in 0..3 {
                        r -= gam[d][c][a] * g[(d, b)] + gam[d][c][b] * g[(a, d)];
                    }
                    worst = worst.max(r.abs());
                }
            }
        }
        Ok(worst)
    }
}

/// Frame, metric and volume density produced from one coframe.
#[derive(Debug, Clone)]
pub struct FrameBundle {
    pub frame: MovingFrame,
    pub metric: MetricField,
    /// Scalar field `e = det(e^a_A) = √g`, the density of `ω_g = E¹∧E²∧E³`.
    pub volume: Field,
}

/// Inverts the coframe pointwise, builds `g_AB = δ_ab e^a_A e^b_B` and the
/// volume density. Singular or negatively oriented coframes are rejected on
/// the test lattice of the chart.
pub fn build_frame_bundle(coframe: Field, epsilon: f64) -> Result<FrameBundle> {
    let chart = *coframe.chart();
    if coframe.components() != 9 {
        return Err(Error::InvalidField("coframe needs 9 components".into()));
    }
    for p in TestLattice::new(&chart, 0xC0F).points().iter().chain(corners(&chart).iter()) {
        let m = mat_from(&coframe.value(p)?);
        let det = m.determinant();
        if !(det.abs() >= MIN_COFRAME_DET) {
            return Err(Error::SingularCoframe { point: *p, det });
        }
        if det < 0.0 {
            return Err(Error::MirrorFrame { point: *p, det });
        }
    }

    let cf = coframe.clone();
    let cf_d = coframe.clone();
    let frame = Field::analytic_with_partials_unchecked(
        chart,
        FieldKind::Tensor(vec![crate::geometry::Variance::Down, crate::geometry::Variance::Up]),
        move |p| {
            let inv = invert_or_nan(&mat_from(&cf.value_unchecked(p)));
            mat_to_vec(&inv.transpose())
        },
        move |p, axis| {
            let inv = invert_or_nan(&mat_from(&cf_d.value_unchecked(p)));
            let dm = mat_from(&cf_d.partial_unchecked(p, axis));
            mat_to_vec(&(-(inv * dm * inv)).transpose())
        },
    );

    let cg = coframe.clone();
    let cg_d = coframe.clone();
    let metric = Field::analytic_with_partials_unchecked(
        chart,
        FieldKind::covariant2(),
        move |p| {
            let m = mat_from(&cg.value_unchecked(p));
            mat_to_vec(&(m.transpose() * m))
        },
        move |p, axis| {
            let m = mat_from(&cg_d.value_unchecked(p));
            let dm = mat_from(&cg_d.partial_unchecked(p, axis));
            mat_to_vec(&(dm.transpose() * m + m.transpose() * dm))
        },
    );

    let cv = coframe.clone();
    let cv_d = coframe.clone();
    let volume = Field::analytic_with_partials_unchecked(
        chart,
        FieldKind::Scalar,
        move |p| vec![mat_from(&cv.value_unchecked(p)).determinant()],
        move |p, axis| {
            // Jacobi's formula: ∂ det M = det M · tr(M⁻¹ ∂M)
            let m = mat_from(&cv_d.value_unchecked(p));
            let dm = mat_from(&cv_d.partial_unchecked(p, axis));
            vec![m.determinant() * (invert_or_nan(&m) * dm).trace()]
        },
    );

    let frame = MovingFrame {
        coframe,
        frame,
        epsilon: 1.0,
    }
    .with_epsilon(epsilon)?;
    Ok(FrameBundle {
        frame,
        metric: MetricField { g: metric },
        volume,
    })
}

/// Convenience: bundle for a named coframe on `chart` with ε = +1.
pub fn bundle_for(spec: &CoframeSpec, chart: Chart) -> Result<FrameBundle> {
    build_frame_bundle(spec.coframe_field(chart)?, 1.0)
}

fn invert_or_nan(m: &Matrix3<f64>) -> Matrix3<f64> {
    m.try_inverse().unwrap_or_else(|| Matrix3::from_element(f64::NAN))
}

fn corners(chart: &Chart) -> Vec<Point> {
    let (lo, hi) = (chart.lower(), chart.upper());
    let mut out = Vec::with_capacity(8);
    for i in 0..8 {
        out.push([
            if i & 1 == 0 { lo[0] } else { hi[0] },
            if i & 2 == 0 { lo[1] } else { hi[1] },
            if i & 4 == 0 { lo[2] } else { hi[2] },
        ]);
    }
    out
}

/// `(∇_u v)^A = u^B ∂_B v^A + Γ^A_BC u^B v^C` at `p` for coordinate vector fields.
pub fn levi_civita_covariant(g: &MetricField, v: &Field, u: &Field, p: &Point) -> Result<Vector3<f64>> {
    let uv = u.value(p)?;
    let uvec = Vector3::new(uv[0], uv[1], uv[2]);
    covariant_along(g, v, &uvec, p)
}

/// `∇_u v` for a fixed direction `u` at `p`.
pub fn covariant_along(g: &MetricField, v: &Field, u: &Vector3<f64>, p: &Point) -> Result<Vector3<f64>> {
    let gam = g.christoffel(p)?;
    let vv = v.value(p)?;
    let mut out = Vector3::zeros();
    for b in 0..3 {
        if u[b] == 0.0 {
            continue;
        }
        let dv = v.partial(p, b)?;
        for a in 0..3 {
            out[a] += u[b] * dv[a];
        }
    }
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                out[a] += gam[a][b][c] * u[b] * vv[c];
            }
        }
    }
    Ok(out)
}

/// Right-handed g-cross product: `(u × v)^A = g^AD √g ε_DBC u^B v^C`.
pub fn metric_cross(g: &MetricField, p: &Point, u: &Vector3<f64>, v: &Vector3<f64>) -> Result<Vector3<f64>> {
    let gm = g.at(p)?;
    let ginv = gm.try_inverse().ok_or(Error::SingularMetric { point: *p })?;
    let sq = gm.determinant().sqrt();
    let lower = Vector3::new(
        sq * (u[1] * v[2] - u[2] * v[1]),
        sq * (u[2] * v[0] - u[0] * v[2]),
        sq * (u[0] * v[1] - u[1] * v[0]),
    );
    Ok(ginv * lower)
}
