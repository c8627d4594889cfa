//! Burgers vectors by circuit and by surface integration, local Burgers
//! vectors of line congruences, line-type classification and Volterra triples.

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use crate::density::{DensityPoint, DislocationDensity, ScalarDensitySpec};
use crate::error::{Error, Result};
use crate::frame::MovingFrame;
use crate::geometry::{line_integral_with, Field, ParametricPatch, Point, Polyline};

/// Default classification tolerance on |cos φ| and |sin φ|.
pub const CLASSIFY_TOL: f64 = 1e-6;
/// Below this norm ρb (or μ) is treated as zero.
pub const MIN_BURGERS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BurgersMethod {
    Circuit,
    Surface,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BurgersResult {
    /// Frame components b^a (cm).
    pub components: [f64; 3],
    pub epsilon: f64,
    pub method: BurgersMethod,
    /// `∫_Σ ρ dΣ_g`, present when a scalar density was supplied to the
    /// surface method.
    pub line_count: Option<f64>,
}

impl BurgersResult {
    pub fn vector(&self) -> Vector3<f64> {
        Vector3::from(self.components)
    }
}

/// `b^a = ε ∮ E^a` along a closed polyline.
pub fn burgers_circuit(frame: &MovingFrame, circuit: &Polyline, nodes_per_segment: usize) -> Result<BurgersResult> {
    if !circuit.is_closed() {
        return Err(Error::OpenPath);
    }
    let eps = frame.epsilon();
    let mut b = [0.0; 3];
    for (a, slot) in b.iter_mut().enumerate() {
        let v = line_integral_with(
            |p| Ok(frame.coframe_at(p)?.row(a).iter().copied().collect()),
            circuit,
            nodes_per_segment,
        )?;
        *slot = eps * v;
    }
    Ok(BurgersResult {
        components: b,
        epsilon: eps,
        method: BurgersMethod::Circuit,
        line_count: None,
    })
}

/// `b^a = ∫_Σ α^{ba} l_b dΣ` with `l` the g-unit normal and `dΣ` the metric
/// area element of the patch.
pub fn burgers_surface(
    density: &DislocationDensity,
    patch: &ParametricPatch,
    rho: Option<&ScalarDensitySpec>,
    nodes: usize,
) -> Result<BurgersResult> {
    let frame = density.frame();
    let mut b = Vector3::zeros();
    let mut count = 0.0;
    for node in patch.quadrature_nodes(nodes)? {
        let cof = frame.coframe_at(&node.point)?;
        let u = cof * Vector3::from(node.du);
        let v = cof * Vector3::from(node.dv);
        let area_normal = u.cross(&v);
        let area = area_normal.norm();
        if area < MIN_BURGERS {
            return Err(Error::DegeneratePatch {
                u: node.u,
                v: node.v,
                norm: area,
            });
        }
        let l = area_normal / area;
        let alpha = density.at(&node.point)?.alpha;
        b += node.weight * area * (alpha.transpose() * l);
        if let Some(r) = rho {
            count += node.weight * area * r.at(&node.point)?;
        }
    }
    let o = patch.orientation();
    Ok(BurgersResult {
        components: (o * b).into(),
        epsilon: frame.epsilon(),
        method: BurgersMethod::Surface,
        line_count: rho.map(|_| o * count),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LineType {
    Edge,
    Screw,
    Mixed,
}

/// Local Burgers vector of a congruence at a point, in frame components.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalBurgers {
    /// ρb = l·α.
    pub rho_b: [f64; 3],
    pub b: [f64; 3],
    pub b_g: f64,
    pub line_type: LineType,
    pub cos_phi_bl: f64,
    pub sin_phi_bl: f64,
    pub phi_bl: f64,
}

/// Orthonormal triple (l, m, n) with the split ρb = γ(l) + μm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolterraTriple {
    pub l: [f64; 3],
    pub m: [f64; 3],
    pub n: [f64; 3],
    pub mu: f64,
    /// `l·γ·l`, the component of γ(l) along l.
    pub gamma_scalar: f64,
    /// The vector γ^{ab} l_b.
    pub gamma_l: [f64; 3],
    /// Angle between l and t; `None` when t vanishes.
    pub phi_lt: Option<f64>,
    pub b_dot_n: f64,
    /// `|b·n| < tol·b_g`: the line is locally of Volterra type.
    pub volterra: bool,
    /// `|γ(l) + μm − ρb|`.
    pub split_residual: f64,
}

impl VolterraTriple {
    pub fn l(&self) -> Vector3<f64> {
        Vector3::from(self.l)
    }
    pub fn m(&self) -> Vector3<f64> {
        Vector3::from(self.m)
    }
    pub fn n(&self) -> Vector3<f64> {
        Vector3::from(self.n)
    }

    /// Largest deviation of the Gram matrix of (l, m, n) from the identity.
    pub fn gram_residual(&self) -> f64 {
        let m = Matrix3::from_columns(&[self.l(), self.m(), self.n()]);
        (m.transpose() * m - Matrix3::identity()).abs().max()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub burgers: LocalBurgers,
    /// Built for edge and mixed lines.
    pub triple: Option<VolterraTriple>,
}

/// Classifies the lines of direction `l` (frame components, g-unit) at `p`.
pub fn local_burgers_classify(
    density: &DislocationDensity,
    l: &Field,
    rho: &ScalarDensitySpec,
    p: &Point,
    tol: f64,
) -> Result<Classification> {
    let lv = l.value(p)?;
    let l = Vector3::new(lv[0], lv[1], lv[2]);
    classify_at(&density.at(p)?, &l, rho.at(p)?, tol)
}

/// Pointwise core of [`local_burgers_classify`].
pub fn classify_at(dp: &DensityPoint, l: &Vector3<f64>, rho: f64, tol: f64) -> Result<Classification> {
    let deviation = (l.norm() - 1.0).abs();
    if deviation > 1e-8 {
        return Err(Error::NotUnitTangent { deviation });
    }
    if !(rho > 0.0) {
        return Err(Error::NonPositiveDensity {
            point: [f64::NAN; 3],
            value: rho,
        });
    }
    let rho_b = dp.alpha.transpose() * l;
    let b = rho_b / rho;
    let b_g = b.norm();
    if b_g < MIN_BURGERS {
        return Err(Error::ZeroBurgers { b_g });
    }
    let cos_bl = b.dot(l) / b_g;
    let sin_bl = b.cross(l).norm() / b_g;
    let line_type = if cos_bl.abs() < tol {
        LineType::Edge
    } else if sin_bl.abs() < tol {
        LineType::Screw
    } else {
        LineType::Mixed
    };
    let burgers = LocalBurgers {
        rho_b: rho_b.into(),
        b: b.into(),
        b_g,
        line_type,
        cos_phi_bl: cos_bl,
        sin_phi_bl: sin_bl,
        phi_bl: sin_bl.atan2(cos_bl),
    };
    if line_type == LineType::Screw {
        return Ok(Classification { burgers, triple: None });
    }

    let mu_vec = 0.5 * dp.t.cross(l);
    let mu = mu_vec.norm();
    if mu < MIN_BURGERS {
        return Err(Error::UndefinedBurgersDirection { mu });
    }
    let m = mu_vec / mu;
    let n = l.cross(&m);
    let gamma_l = dp.gamma * l;
    let t_g = dp.t.norm();
    let phi_lt = (t_g > MIN_BURGERS).then(|| dp.t.cross(l).norm().atan2(dp.t.dot(l)));
    let b_dot_n = b.dot(&n);
    let triple = VolterraTriple {
        l: (*l).into(),
        m: m.into(),
        n: n.into(),
        mu,
        gamma_scalar: l.dot(&gamma_l),
        gamma_l: gamma_l.into(),
        phi_lt,
        b_dot_n,
        volterra: b_dot_n.abs() < tol * b_g,
        split_residual: (gamma_l + mu * m - rho_b).norm(),
    };
    Ok(Classification {
        burgers,
        triple: Some(triple),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::dislocation_tensor;
    use crate::frame::{bundle_for, CoframeSpec};
    use crate::geometry::{Chart, FieldKind};

    fn chart() -> Chart {
        Chart::cube(-0.5, 1.5, 8).unwrap()
    }

    fn unit_square() -> Polyline {
        Polyline::rectangle([0.0; 3], (0, 1), 1.0, 1.0).unwrap()
    }

    #[test]
    fn screw_circuit() {
        let b = bundle_for(&CoframeSpec::Screw { b0: 0.1 }, chart()).unwrap();
        let r = burgers_circuit(&b.frame, &unit_square(), 4).unwrap();
        assert!((r.vector() - Vector3::new(0.0, 0.0, 0.1)).norm() < 1e-14);
        let back = burgers_circuit(&b.frame, &unit_square().reversed(), 4).unwrap();
        assert!((back.vector() + r.vector()).norm() < 1e-14);
    }

    #[test]
    fn open_path_rejected() {
        let b = bundle_for(&CoframeSpec::Holonomic, chart()).unwrap();
        let open = Polyline::open(vec![[0.0; 3], [1.0, 0.0, 0.0]]).unwrap();
        assert_eq!(burgers_circuit(&b.frame, &open, 4), Err(Error::OpenPath));
    }

    #[test]
    fn screw_surface_matches_circuit() {
        let b = bundle_for(&CoframeSpec::Screw { b0: 0.1 }, chart()).unwrap();
        let d = dislocation_tensor(&b.frame).unwrap();
        let patch = ParametricPatch::rectangle([0.0; 3], (0, 1), 1.0, 1.0);
        let rho = ScalarDensitySpec::constant(chart(), 1.0).unwrap();
        let s = burgers_surface(&d, &patch, Some(&rho), 6).unwrap();
        assert!((s.vector() - Vector3::new(0.0, 0.0, 0.1)).norm() < 1e-12);
        assert!(s.line_count.unwrap() > 1.0);
    }

    #[test]
    fn umbilical_surface_normal_to_e3_vanishes() {
        let b = bundle_for(&CoframeSpec::Umbilical { h0: 0.5 }, chart()).unwrap();
        let d = dislocation_tensor(&b.frame).unwrap();
        let patch = ParametricPatch::rectangle([0.0, 0.0, 0.3], (0, 1), 1.0, 1.0);
        let s = burgers_surface(&d, &patch, None, 6).unwrap();
        assert!(s.vector().norm() < 1e-12);
    }

    fn classify(spec: CoframeSpec, l: [f64; 3]) -> Result<Classification> {
        let b = bundle_for(&spec, chart()).unwrap();
        let d = dislocation_tensor(&b.frame).unwrap();
        let lf = Field::constant(chart(), FieldKind::Vector, l.to_vec());
        let rho = ScalarDensitySpec::constant(chart(), 1.0).unwrap();
        local_burgers_classify(&d, &lf, &rho, &[0.2, 0.3, 0.4], CLASSIFY_TOL)
    }

    #[test]
    fn screw_lines() {
        let c = classify(CoframeSpec::Screw { b0: 0.1 }, [0.0, 0.0, 1.0]).unwrap();
        assert_eq!(c.burgers.line_type, LineType::Screw);
        assert!((c.burgers.b[2] - 0.1).abs() < 1e-12);
        assert!(c.burgers.phi_bl.abs() < 1e-12);
    }

    #[test]
    fn umbilical_edge_lines_are_volterra() {
        let h0 = 0.5;
        let c = classify(CoframeSpec::Umbilical { h0 }, [1.0, 0.0, 0.0]).unwrap();
        assert_eq!(c.burgers.line_type, LineType::Edge);
        assert!((c.burgers.b[1].abs() - h0).abs() < 1e-12);
        let tr = c.triple.unwrap();
        assert!(tr.volterra);
        assert!((tr.n() - Vector3::z()).norm() < 1e-12);
        assert!(tr.gram_residual() < 1e-12);
        assert!(tr.split_residual < 1e-12);
    }

    #[test]
    fn edge_frame_split_needs_full_gamma_vector() {
        let c = classify(CoframeSpec::Edge { beta: 0.2 }, [0.0, 0.0, 1.0]).unwrap();
        let tr = c.triple.unwrap();
        assert_eq!(c.burgers.line_type, LineType::Edge);
        assert!(tr.split_residual < 1e-12);
        assert!(tr.gamma_scalar.abs() < 1e-12);
        assert!((tr.gamma_l[0] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn holonomic_has_no_burgers_vector() {
        assert!(matches!(
            classify(CoframeSpec::Holonomic, [1.0, 0.0, 0.0]),
            Err(Error::ZeroBurgers { .. })
        ));
    }
}
