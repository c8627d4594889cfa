//! Frenet frames of line congruences in the material metric, the angle ϑ to
//! the Volterra normal, the complex curvature ψ = κe^{iϑ}, climb components
//! and the principal congruences of the γ tensor.
//!
//! Vectors in this module carry coordinate components unless stated otherwise;
//! lengths and angles are taken in g.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame::{metric_cross, MetricField};
use crate::geometry::{trace, Field, Point};

/// Below this curvature the Frenet frame is undefined.
pub const KAPPA_MIN: f64 = 1e-8;
/// Step of the directional differences along l.
pub const DIRECTIONAL_STEP: f64 = 1e-3;
/// Relative tolerance on the (−γ, γ, 0) eigenvalue pattern.
pub const PATTERN_TOL: f64 = 1e-6;

fn vec3(v: &[f64]) -> Vector3<f64> {
    Vector3::new(v[0], v[1], v[2])
}

fn shift(p: &Point, u: &Vector3<f64>, h: f64) -> Point {
    [p[0] + h * u[0], p[1] + h * u[1], p[2] + h * u[2]]
}

/// Fourth-order directional difference of `f` along `u` at `p`.
fn directional<F, T>(f: F, p: &Point, u: &Vector3<f64>) -> Result<T>
where
    F: Fn(&Point) -> Result<T>,
    T: std::ops::Sub<Output = T> + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Copy,
{
    let h = DIRECTIONAL_STEP;
    let fp1 = f(&shift(p, u, h))?;
    let fm1 = f(&shift(p, u, -h))?;
    let fp2 = f(&shift(p, u, 2.0 * h))?;
    let fm2 = f(&shift(p, u, -2.0 * h))?;
    Ok(((fp1 - fm1) * 8.0 - (fp2 - fm2)) * (1.0 / (12.0 * h)))
}

/// `∇_u v` where `v` is given pointwise by a closure and `u` is fixed at `p`.
fn covariant_of<F>(g: &MetricField, v: F, u: &Vector3<f64>, p: &Point) -> Result<Vector3<f64>>
where
    F: Fn(&Point) -> Result<Vector3<f64>>,
{
    let gam = g.christoffel(p)?;
    let v0 = v(p)?;
    let mut out = directional(&v, p, u)?;
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                out[a] += gam[a][b][c] * u[b] * v0[c];
            }
        }
    }
    Ok(out)
}

/// The Volterra normals (m, n) as coordinate vector fields.
#[derive(Debug, Clone)]
pub struct NormalPair {
    pub m: Field,
    pub n: Field,
}

impl NormalPair {
    fn at(&self, p: &Point) -> Result<(Vector3<f64>, Vector3<f64>)> {
        Ok((vec3(&self.m.value(p)?), vec3(&self.n.value(p)?)))
    }
}

/// Frenet data of a congruence at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrenetState {
    pub point: Point,
    pub e1: [f64; 3],
    pub e2: [f64; 3],
    pub e3: [f64; 3],
    pub kappa: f64,
    /// Non-negative torsion; `e3` is flipped when needed.
    pub tau: f64,
    /// Torsion measured against the right-handed binormal `e1 × e2`.
    pub tau_oriented: f64,
    pub e3_flipped: bool,
    /// Angle between the principal normal and m (needs a Volterra pair).
    pub theta: Option<f64>,
    /// `∂_l ϑ`.
    pub theta_rate: Option<f64>,
    pub psi: Option<[f64; 2]>,
    /// max |g(e_i, e_j) − δ_ij|.
    pub gram_residual: f64,
    /// `‖∇_l N + ψ l‖` with N = m + i n.
    pub hasimoto_residual: Option<f64>,
}

impl FrenetState {
    pub fn psi_complex(&self) -> Option<Complex64> {
        self.psi.map(|[re, im]| Complex64::new(re, im))
    }

    /// `τ − ∂_l ϑ` against the right-handed binormal.
    pub fn twist_mismatch(&self) -> Option<f64> {
        self.theta_rate.map(|r| self.tau_oriented - r)
    }
}

fn unit_l(g: &MetricField, l: &Field, q: &Point) -> Result<Vector3<f64>> {
    let v = vec3(&l.value(q)?);
    let n = g.norm(q, &v)?;
    let deviation = (n - 1.0).abs();
    if deviation > 1e-8 {
        return Err(Error::NotUnitTangent { deviation });
    }
    Ok(v)
}

fn curvature_vector(g: &MetricField, l: &Field, q: &Point) -> Result<Vector3<f64>> {
    let lv = unit_l(g, l, q)?;
    crate::frame::covariant_along(g, l, &lv, q)
}

fn principal_normal(g: &MetricField, l: &Field, q: &Point) -> Result<Vector3<f64>> {
    let k = curvature_vector(g, l, q)?;
    let kappa = g.norm(q, &k)?;
    if !(kappa >= KAPPA_MIN) {
        return Err(Error::VanishingCurvature { kappa });
    }
    Ok(k / kappa)
}

fn theta_of(g: &MetricField, q: &Point, e2: &Vector3<f64>, normals: &NormalPair) -> Result<f64> {
    let (m, n) = normals.at(q)?;
    Ok(g.inner(q, e2, &n)?.atan2(g.inner(q, e2, &m)?))
}

fn wrap(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    a - two_pi * (a / two_pi).round()
}

/// Frenet frame of the congruence `l` (g-unit coordinate field) at `p`.
pub fn frenet_along(g: &MetricField, l: &Field, p: &Point, normals: Option<&NormalPair>) -> Result<FrenetState> {
    let e1 = unit_l(g, l, p)?;
    let acc = curvature_vector(g, l, p)?;
    let kappa = g.norm(p, &acc)?;
    if !(kappa >= KAPPA_MIN) {
        return Err(Error::VanishingCurvature { kappa });
    }
    let e2 = acc / kappa;
    let e3_rh = metric_cross(g, p, &e1, &e2)?;

    let de2 = covariant_of(g, |q| principal_normal(g, l, q), &e1, p)?;
    let tau_oriented = g.inner(p, &de2, &e3_rh)?;
    let flipped = tau_oriented < 0.0;
    let e3 = if flipped { -e3_rh } else { e3_rh };

    let gm = g.at(p)?;
    let basis = Matrix3::from_columns(&[e1, e2, e3]);
    let gram_residual = (basis.transpose() * gm * basis - Matrix3::identity()).abs().max();

    let mut state = FrenetState {
        point: *p,
        e1: e1.into(),
        e2: e2.into(),
        e3: e3.into(),
        kappa,
        tau: tau_oriented.abs(),
        tau_oriented,
        e3_flipped: flipped,
        theta: None,
        theta_rate: None,
        psi: None,
        gram_residual,
        hasimoto_residual: None,
    };

    if let Some(np) = normals {
        let theta = theta_of(g, p, &e2, np)?;
        let rate = directional(
            |q| Ok(wrap(theta_of(g, q, &principal_normal(g, l, q)?, np)? - theta)),
            p,
            &e1,
        )?;
        let psi = Complex64::from_polar(kappa, theta);
        let dm = covariant_of(g, |q| Ok(vec3(&np.m.value(q)?)), &e1, p)?;
        let dn = covariant_of(g, |q| Ok(vec3(&np.n.value(q)?)), &e1, p)?;
        let re = dm + psi.re * e1;
        let im = dn + psi.im * e1;
        let hasimoto = (g.inner(p, &re, &re)? + g.inner(p, &im, &im)?).max(0.0).sqrt();
        state.theta = Some(theta);
        state.theta_rate = Some(rate);
        state.psi = Some([psi.re, psi.im]);
        state.hasimoto_residual = Some(hasimoto);
    }
    Ok(state)
}

/// Climb component `n·∇_l b` and its closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Climb {
    pub value: f64,
    /// `b_(m)(τ − ∂_l ϑ) + b_(l) κ sin ϑ`.
    pub closed_form: f64,
    pub b_l: f64,
    pub b_m: f64,
}

/// Climb of the Burgers field `b` (coordinate components) along a Volterra
/// line whose Frenet state was built with `normals`.
pub fn climb_component(
    b: &Field,
    frenet: &FrenetState,
    g: &MetricField,
    normals: &NormalPair,
    tol: f64,
) -> Result<Climb> {
    let p = frenet.point;
    let (m, n) = normals.at(&p)?;
    let bv = vec3(&b.value(&p)?);
    let b_dot_n = g.inner(&p, &bv, &n)?;
    let scale = g.norm(&p, &bv)?.max(1.0);
    if b_dot_n.abs() > tol * scale {
        return Err(Error::NotVolterra { b_dot_n });
    }
    let l = Vector3::from(frenet.e1);
    let db = crate::frame::covariant_along(g, b, &l, &p)?;
    let value = g.inner(&p, &n, &db)?;
    let b_l = g.inner(&p, &bv, &l)?;
    let b_m = g.inner(&p, &bv, &m)?;
    let (theta, rate) = match (frenet.theta, frenet.theta_rate) {
        (Some(t), Some(r)) => (t, r),
        _ => {
            return Err(Error::InvalidParameter(
                "climb closed form needs a Frenet state built with Volterra normals".into(),
            ))
        }
    };
    Ok(Climb {
        value,
        closed_form: b_m * (frenet.tau_oriented - rate) + b_l * frenet.kappa * theta.sin(),
        b_l,
        b_m,
    })
}

/// One sample of a traced congruence line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrenetSample {
    pub s: f64,
    pub state: FrenetState,
    pub climb: Option<Climb>,
}

/// Traces the integral line of `l` from `start` and evaluates the Frenet
/// state at every sample. Sampling stops early where the stencils would
/// leave the chart.
pub fn trace_frenet(
    g: &MetricField,
    l: &Field,
    start: Point,
    length: f64,
    step: f64,
    normals: Option<&NormalPair>,
    burgers: Option<&Field>,
    tol: f64,
) -> Result<Vec<FrenetSample>> {
    let curve = trace(g.chart(), start, length, step, |q| {
        let v = l.value(q)?;
        Ok([v[0], v[1], v[2]])
    })?;
    let mut out = Vec::with_capacity(curve.samples.len());
    for (p, s) in curve.samples.iter().zip(&curve.params) {
        let state = match frenet_along(g, l, p, normals) {
            Ok(st) => st,
            Err(Error::PointOutsideChart { .. } | Error::StencilOutOfRange { .. }) if !out.is_empty() => break,
            Err(e) => return Err(e),
        };
        let climb = match (normals, burgers) {
            (Some(np), Some(b)) => Some(climb_component(b, &state, g, np, tol)?),
            _ => None,
        };
        out.push(FrenetSample { s: *s, state, climb });
    }
    Ok(out)
}

/// Principal directions of γ in the umbilical pattern γ(−γ₁⊗γ₁ + γ₂⊗γ₂).
/// Frame components throughout.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrincipalDecomposition {
    pub eigenvalues: [f64; 3],
    pub gamma: f64,
    pub phi: f64,
    pub gamma1: [f64; 3],
    pub gamma2: [f64; 3],
    pub gamma3: [f64; 3],
    pub k: [f64; 3],
    /// `H = ½ t·E₃`.
    pub h: f64,
    /// `2(−γγ₃ + H E₃)`.
    pub t_reconstructed: [f64; 3],
    pub t_residual: f64,
    pub gamma_residual: f64,
    /// `|(γ₁ − γ₂)/√2 − E₃|`: how far the pattern's axis sits from E₃.
    pub axis_residual: f64,
    /// `√(H² + γ²)`.
    pub mu_closed_form: f64,
    /// `ρb = α·γ₃` computed from (γ, t).
    pub rho_b: [f64; 3],
    pub rho_b_g: f64,
    /// `ρb / |ρb|`, the computed m for l = γ₃.
    pub m: Option<[f64; 3]>,
    /// γ = 0: the eigenvectors are arbitrary and `phi` was taken from the hint.
    pub degenerate: bool,
}

/// γ built from its principal data, for round-trip checks.
pub fn principal_gamma(gamma: f64, phi: f64) -> Matrix3<f64> {
    let (g1, g2, _, _) = principal_frame(phi);
    gamma * (-g1 * g1.transpose() + g2 * g2.transpose())
}

/// (γ₁, γ₂, γ₃, k) for the angle φ.
pub fn principal_frame(phi: f64) -> (Vector3<f64>, Vector3<f64>, Vector3<f64>, Vector3<f64>) {
    let e3 = Vector3::z();
    let g3 = Vector3::new(phi.cos(), phi.sin(), 0.0);
    let k = Vector3::new(phi.sin(), -phi.cos(), 0.0);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (s * (k + e3), s * (k - e3), g3, k)
}

/// Eigen-analysis of the frame-component γ with axial vector `t`.
/// `phi_hint` selects γ₃ when γ vanishes.
pub fn principal_congruences(gamma: &Matrix3<f64>, t: &Vector3<f64>, phi_hint: f64) -> Result<PrincipalDecomposition> {
    let sym = 0.5 * (gamma + gamma.transpose());
    let eig = SymmetricEigen::new(sym);
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let lam = idx.map(|i| eig.eigenvalues[i]);
    let scale = lam.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let degenerate = scale < 1e-12;
    if !degenerate && ((lam[0] + lam[2]).abs() > PATTERN_TOL * scale || lam[1].abs() > PATTERN_TOL * scale) {
        return Err(Error::PatternMismatch { eigenvalues: lam });
    }
    let gam = if degenerate { 0.0 } else { 0.5 * (lam[2] - lam[0]) };

    let (g1, g2, g3, k, phi) = if degenerate {
        let (a, b, c, d) = principal_frame(phi_hint);
        (a, b, c, d, phi_hint)
    } else {
        let mut g1: Vector3<f64> = eig.eigenvectors.column(idx[0]).into();
        let mut g2: Vector3<f64> = eig.eigenvectors.column(idx[2]).into();
        if g1.z < 0.0 {
            g1 = -g1;
        }
        if g2.z > 0.0 {
            g2 = -g2;
        }
        let g3 = g1.cross(&g2);
        let k = g3.cross(&Vector3::z());
        let phi = g3.y.atan2(g3.x);
        (g1, g2, g3, k, phi)
    };
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let axis_residual = if degenerate { 0.0 } else { (s * (g1 - g2) - Vector3::z()).norm() };
    let h = 0.5 * t.z;
    let t_rec = 2.0 * (-gam * g3 + h * Vector3::z());
    let gamma_rec = gam * (-g1 * g1.transpose() + g2 * g2.transpose());
    let alpha = sym + crate::density::sigma_of(t);
    let rho_b = alpha.transpose() * g3;
    let rho_b_g = rho_b.norm();
    Ok(PrincipalDecomposition {
        eigenvalues: lam,
        gamma: gam,
        phi,
        gamma1: g1.into(),
        gamma2: g2.into(),
        gamma3: g3.into(),
        k: k.into(),
        h,
        t_reconstructed: t_rec.into(),
        t_residual: (t_rec - t).norm(),
        gamma_residual: (gamma_rec - sym).abs().max(),
        axis_residual,
        mu_closed_form: (h * h + gam * gam).sqrt(),
        rho_b: rho_b.into(),
        rho_b_g,
        m: (rho_b_g > 1e-12).then(|| (rho_b / rho_b_g).into()),
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{bundle_for, CoframeSpec};
    use crate::geometry::{Chart, FieldKind};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_6};

    fn flat() -> MetricField {
        MetricField::flat(Chart::cube(-2.0, 2.0, 8).unwrap())
    }

    fn circle_l(c: Chart) -> Field {
        Field::analytic(c, FieldKind::Vector, |p| {
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            vec![-p[1] / r, p[0] / r, 0.0]
        })
    }

    #[test]
    fn circle_frenet() {
        let g = flat();
        let st = frenet_along(&g, &circle_l(*g.chart()), &[1.0, 0.0, 0.0], None).unwrap();
        assert!((st.kappa - 1.0).abs() < 1e-8);
        assert!((Vector3::from(st.e2) - Vector3::new(-1.0, 0.0, 0.0)).norm() < 1e-8);
        assert!(st.tau.abs() < 1e-8);
        assert!(st.gram_residual < 1e-8);
    }

    #[test]
    fn straight_line_has_no_frenet_frame() {
        let g = flat();
        let l = Field::constant(*g.chart(), FieldKind::Vector, vec![1.0, 0.0, 0.0]);
        assert!(matches!(
            frenet_along(&g, &l, &[0.0; 3], None),
            Err(Error::VanishingCurvature { .. })
        ));
    }

    #[test]
    fn circle_with_volterra_normals() {
        let g = flat();
        let c = *g.chart();
        let m = Field::constant(c, FieldKind::Vector, vec![0.0, 0.0, -1.0]);
        let n = Field::analytic(c, FieldKind::Vector, |p| {
            let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
            vec![-p[0] / r, -p[1] / r, 0.0]
        });
        let np = NormalPair { m, n };
        let st = frenet_along(&g, &circle_l(c), &[1.0, 0.0, 0.0], Some(&np)).unwrap();
        assert!((st.theta.unwrap() - FRAC_PI_2).abs() < 1e-8);
        let psi = st.psi_complex().unwrap();
        assert!(psi.re.abs() < 1e-8 && (psi.im - 1.0).abs() < 1e-8);
        assert!(st.hasimoto_residual.unwrap() < 1e-6);

        let b0 = 0.3;
        let b = {
            let l = circle_l(c);
            Field::analytic(c, FieldKind::Vector, move |p| l.value_unchecked(p).iter().map(|v| b0 * v).collect())
        };
        let climb = climb_component(&b, &st, &g, &np, 1e-8).unwrap();
        assert!((climb.value - b0).abs() < 1e-6);
        assert!((climb.closed_form - b0).abs() < 1e-6);
    }

    #[test]
    fn umbilical_edge_congruence() {
        let h0 = 0.5;
        let c = Chart::cube(-1.0, 1.0, 8).unwrap();
        let b = bundle_for(&CoframeSpec::Umbilical { h0 }, c).unwrap();
        let l = b.frame.frame_vector_field(0);
        let np = NormalPair {
            m: b.frame.frame_vector_field(1),
            n: b.frame.frame_vector_field(2),
        };
        let st = frenet_along(&b.metric, &l, &[0.1, 0.2, 0.3], Some(&np)).unwrap();
        assert!((st.kappa - h0).abs() < 1e-8);
        assert!((st.theta.unwrap() - FRAC_PI_2).abs() < 1e-8);
        assert!(st.tau.abs() < 1e-6);
        assert!(st.twist_mismatch().unwrap().abs() < 1e-6);
        assert!(st.hasimoto_residual.unwrap() < 1e-6);
    }

    #[test]
    fn principal_round_trip() {
        let gamma = principal_gamma(0.3, FRAC_PI_6);
        let (g1, g2, _, _) = principal_frame(FRAC_PI_6);
        let t = Vector3::new(0.0, 0.0, 0.4);
        let d = principal_congruences(&gamma, &t, 0.0).unwrap();
        assert!((d.gamma - 0.3).abs() < 1e-12);
        assert!((d.phi - FRAC_PI_6).abs() < 1e-10);
        assert!((Vector3::from(d.gamma1) - g1).norm() < 1e-10);
        assert!((Vector3::from(d.gamma2) - g2).norm() < 1e-10);
        assert!(d.gamma_residual < 1e-12);
        assert!(d.axis_residual < 1e-10);
    }

    #[test]
    fn pattern_mismatch() {
        let g = Matrix3::from_diagonal(&Vector3::new(1.0, 2.0, 3.0));
        assert!(matches!(
            principal_congruences(&g, &Vector3::zeros(), 0.0),
            Err(Error::PatternMismatch { .. })
        ));
    }

    #[test]
    fn umbilical_degenerate_branch() {
        let h0 = 0.5;
        let t = Vector3::new(0.0, 0.0, 2.0 * h0);
        for phi in [0.0, 0.7, 2.5] {
            let d = principal_congruences(&Matrix3::zeros(), &t, phi).unwrap();
            assert!(d.degenerate);
            assert!((d.h - h0).abs() < 1e-14);
            assert!((d.rho_b_g - h0).abs() < 1e-12);
            assert!(d.t_residual < 1e-12);
        }
    }
}
