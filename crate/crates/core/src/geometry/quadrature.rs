use std::f64::consts::PI;

use super::chart::Point;
use super::field::Field;
use crate::error::{Error, Result};

pub const DEFAULT_NODES: usize = 8;

/// Gauss–Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on P_n from the Chebyshev-like initial guess.
    pub fn new(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidParameter("quadrature needs at least one node".into()));
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(Self { nodes, weights })
    }

    /// Pairs (x, w) mapped onto [a, b].
    pub fn on_interval(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (mid + half * x, half * w))
    }
}

/// (P_n(x), P_n'(x)) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Ordered vertex list; a closed polyline carries an implicit last→first edge.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    vertices: Vec<Point>,
    closed: bool,
}

impl Polyline {
    pub fn new(vertices: Vec<Point>, closed: bool) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::InvalidPolyline("need at least two vertices".into()));
        }
        if closed && vertices.len() < 3 {
            return Err(Error::InvalidPolyline("a closed circuit needs at least three vertices".into()));
        }
        if vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::InvalidPolyline("non-finite vertex".into()));
        }
        let line = Self { vertices, closed };
        if line.segments().any(|(a, b)| a == b) {
            return Err(Error::InvalidPolyline("zero-length segment".into()));
        }
        Ok(line)
    }

    pub fn open(vertices: Vec<Point>) -> Result<Self> {
        Self::new(vertices, false)
    }

    pub fn closed(vertices: Vec<Point>) -> Result<Self> {
        Self::new(vertices, true)
    }

    /// Axis-aligned rectangle in the plane spanned by `axes`, traversed
    /// counter-clockwise with respect to (axes.0, axes.1).
    pub fn rectangle(origin: Point, axes: (usize, usize), width: f64, height: f64) -> Result<Self> {
        let mut p1 = origin;
        p1[axes.0] += width;
        let mut p2 = p1;
        p2[axes.1] += height;
        let mut p3 = origin;
        p3[axes.1] += height;
        Self::closed(vec![origin, p1, p2, p3])
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn reversed(&self) -> Self {
        let mut v = self.vertices.clone();
        v.reverse();
        Self {
            vertices: v,
            closed: self.closed,
        }
    }

    pub fn segments(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        let count = if self.closed { n } else { n - 1 };
        (0..count).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Euclidean coordinate length.
    pub fn coordinate_length(&self) -> f64 {
        self.segments()
            .map(|(a, b)| ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2) + (b[2] - a[2]).powi(2)).sqrt())
            .sum()
    }
}

/// `∫_path ⟨ω, dX⟩` by Gauss–Legendre quadrature on every straight segment.
pub fn line_integral(omega: &Field, path: &Polyline, nodes_per_segment: usize) -> Result<f64> {
    line_integral_with(|p| omega.value(p), path, nodes_per_segment)
}

/// Line integral of a covector given by a closure.
pub fn line_integral_with<F>(omega: F, path: &Polyline, nodes_per_segment: usize) -> Result<f64>
where
    F: Fn(&Point) -> Result<Vec<f64>>,
{
    if nodes_per_segment < 2 {
        return Err(Error::InvalidParameter("nodes_per_segment must be >= 2".into()));
    }
    let rule = GaussLegendre::new(nodes_per_segment)?;
    let mut total = 0.0;
    for (a, b) in path.segments() {
        let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        for (s, w) in rule.on_interval(0.0, 1.0) {
            let x = [a[0] + s * d[0], a[1] + s * d[1], a[2] + s * d[2]];
            let om = omega(&x)?;
            total += w * (om[0] * d[0] + om[1] * d[1] + om[2] * d[2]);
        }
    }
    Ok(total)
}

type PatchMap = dyn Fn(f64, f64) -> (Point, [f64; 3], [f64; 3]) + Send + Sync;

/// Map (u, v) ∈ [0,1]² → chart coordinates with its two partials.
#[derive(Clone)]
pub struct ParametricPatch {
    map: std::sync::Arc<PatchMap>,
    orientation: f64,
}

impl std::fmt::Debug for ParametricPatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ParametricPatch")
            .field("corner", &(self.map)(0.0, 0.0).0)
            .field("orientation", &self.orientation)
            .finish()
    }
}

impl ParametricPatch {
    pub fn new<F>(map: F, orientation: f64) -> Result<Self>
    where
        F: Fn(f64, f64) -> (Point, [f64; 3], [f64; 3]) + Send + Sync + 'static,
    {
        if orientation != 1.0 && orientation != -1.0 {
            return Err(Error::InvalidParameter("patch orientation must be +1 or -1".into()));
        }
        Ok(Self {
            map: std::sync::Arc::new(map),
            orientation,
        })
    }

    /// Flat parallelogram `origin + u·edge_u + v·edge_v`.
    pub fn parallelogram(origin: Point, edge_u: [f64; 3], edge_v: [f64; 3]) -> Self {
        Self {
            map: std::sync::Arc::new(move |u, v| {
                let x = [0, 1, 2].map(|i| origin[i] + u * edge_u[i] + v * edge_v[i]);
                (x, edge_u, edge_v)
            }),
            orientation: 1.0,
        }
    }

    /// Axis-aligned rectangle; matches [`Polyline::rectangle`] as its boundary.
    pub fn rectangle(origin: Point, axes: (usize, usize), width: f64, height: f64) -> Self {
        let mut eu = [0.0; 3];
        eu[axes.0] = width;
        let mut ev = [0.0; 3];
        ev[axes.1] = height;
        Self::parallelogram(origin, eu, ev)
    }

    pub fn orientation(&self) -> f64 {
        self.orientation
    }

    pub fn flipped(&self) -> Self {
        Self {
            map: self.map.clone(),
            orientation: -self.orientation,
        }
    }

    pub fn eval(&self, u: f64, v: f64) -> (Point, [f64; 3], [f64; 3]) {
        (self.map)(u, v)
    }

    /// Boundary traversed with the induced orientation, `per_edge` straight
    /// segments per side (exact for parallelograms with `per_edge = 1`).
    pub fn boundary(&self, per_edge: usize) -> Result<Polyline> {
        let n = per_edge.max(1);
        let mut verts = Vec::with_capacity(4 * n);
        for i in 0..n {
            verts.push(self.eval(i as f64 / n as f64, 0.0).0);
        }
        for i in 0..n {
            verts.push(self.eval(1.0, i as f64 / n as f64).0);
        }
        for i in 0..n {
            verts.push(self.eval(1.0 - i as f64 / n as f64, 1.0).0);
        }
        for i in 0..n {
            verts.push(self.eval(0.0, 1.0 - i as f64 / n as f64).0);
        }
        let line = Polyline::closed(verts)?;
        Ok(if self.orientation < 0.0 { line.reversed() } else { line })
    }

    /// Tensor-product Gauss–Legendre nodes: (u, v, weight, point, ∂_u, ∂_v).
    pub fn quadrature_nodes(&self, nodes: usize) -> Result<Vec<PatchNode>> {
        if nodes < 2 {
            return Err(Error::InvalidParameter("patch quadrature needs >= 2 nodes per axis".into()));
        }
        let rule = GaussLegendre::new(nodes)?;
        let mut out = Vec::with_capacity(nodes * nodes);
        for (u, wu) in rule.on_interval(0.0, 1.0) {
            for (v, wv) in rule.on_interval(0.0, 1.0) {
                let (x, du, dv) = self.eval(u, v);
                let c = cross(&du, &dv);
                let norm = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2]).sqrt();
                if norm < 1e-12 {
                    return Err(Error::DegeneratePatch { u, v, norm });
                }
                out.push(PatchNode {
                    u,
                    v,
                    weight: wu * wv,
                    point: x,
                    du,
                    dv,
                });
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PatchNode {
    pub u: f64,
    pub v: f64,
    pub weight: f64,
    pub point: Point,
    pub du: [f64; 3],
    pub dv: [f64; 3],
}

pub(crate) fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// `∫_Σ τ` for a 2-form with components τ_AB (row-major, antisymmetric),
/// i.e. the integral of τ_AB ∂_uX^A ∂_vX^B du dv, signed by orientation.
pub fn surface_integral(tau: &Field, patch: &ParametricPatch, nodes: usize) -> Result<f64> {
    let mut total = 0.0;
    for n in patch.quadrature_nodes(nodes)? {
        let t = tau.value(&n.point)?;
        let mut s = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                s += t[3 * a + b] * n.du[a] * n.dv[b];
            }
        }
        total += n.weight * s;
    }
    Ok(patch.orientation() * total)
}

/// Tensor-product Gauss–Legendre integral of a scalar over an axis-aligned box.
pub fn box_integral<F>(lower: Point, upper: Point, nodes: usize, f: F) -> Result<f64>
where
    F: Fn(&Point) -> Result<f64>,
{
    let rule = GaussLegendre::new(nodes)?;
    let mut total = 0.0;
    for (x, wx) in rule.on_interval(lower[0], upper[0]) {
        for (y, wy) in rule.on_interval(lower[1], upper[1]) {
            for (z, wz) in rule.on_interval(lower[2], upper[2]) {
                total += wx * wy * wz * f(&[x, y, z])?;
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Chart, FieldKind};

    fn chart() -> Chart {
        Chart::cube(-2.0, 2.0, 8).unwrap()
    }

    #[test]
    fn weights_sum_to_two_and_integrate_polynomials() {
        for n in 2..=12 {
            let r = GaussLegendre::new(n).unwrap();
            let s: f64 = r.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n = {n}");
            // x^(2n-2) integrates to 2/(2n-1)
            let deg = 2 * n - 2;
            let q: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert!((q - 2.0 / (deg as f64 + 1.0)).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn exact_form_around_square_vanishes() {
        let dx1 = Field::constant(chart(), FieldKind::Covector, vec![1.0, 0.0, 0.0]);
        let sq = Polyline::rectangle([0.0; 3], (0, 1), 1.0, 1.0).unwrap();
        assert!(line_integral(&dx1, &sq, 8).unwrap().abs() < 1e-15);
    }

    #[test]
    fn x1_dx2_gives_enclosed_area() {
        let w = Field::analytic(chart(), FieldKind::Covector, |p| vec![0.0, p[0], 0.0]);
        let sq = Polyline::rectangle([0.0; 3], (0, 1), 1.0, 1.0).unwrap();
        assert!((line_integral(&w, &sq, 8).unwrap() - 1.0).abs() < 1e-14);
        assert!((line_integral(&w, &sq.reversed(), 8).unwrap() + 1.0).abs() < 1e-14);
    }

    #[test]
    fn open_segment_length() {
        let dx1 = Field::constant(chart(), FieldKind::Covector, vec![1.0, 0.0, 0.0]);
        let seg = Polyline::open(vec![[0.0; 3], [2.0, 0.0, 0.0]]).unwrap();
        assert!((line_integral(&dx1, &seg, 2).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn too_few_nodes_rejected() {
        let dx1 = Field::constant(chart(), FieldKind::Covector, vec![1.0, 0.0, 0.0]);
        let seg = Polyline::open(vec![[0.0; 3], [1.0, 0.0, 0.0]]).unwrap();
        assert!(line_integral(&dx1, &seg, 1).is_err());
    }

    #[test]
    fn polyline_validation() {
        assert!(Polyline::open(vec![[0.0; 3]]).is_err());
        assert!(Polyline::closed(vec![[0.0; 3], [1.0, 0.0, 0.0]]).is_err());
        assert!(Polyline::open(vec![[0.0; 3], [0.0; 3]]).is_err());
    }

    #[test]
    fn constant_two_form_times_area() {
        let b0 = 0.1;
        let tau = Field::constant(
            chart(),
            FieldKind::covariant2(),
            vec![0.0, b0, 0.0, -b0, 0.0, 0.0, 0.0, 0.0, 0.0],
        );
        let patch = ParametricPatch::rectangle([0.0; 3], (0, 1), 1.0, 1.0);
        assert!((surface_integral(&tau, &patch, 8).unwrap() - b0).abs() < 1e-15);
        assert!((surface_integral(&tau, &patch.flipped(), 8).unwrap() + b0).abs() < 1e-15);
        let zero = Field::constant(chart(), FieldKind::covariant2(), vec![0.0; 9]);
        assert_eq!(surface_integral(&zero, &patch, 8).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_patch_detected() {
        let p = ParametricPatch::parallelogram([0.0; 3], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]);
        assert!(matches!(p.quadrature_nodes(4), Err(Error::DegeneratePatch { .. })));
    }

    #[test]
    fn box_volume() {
        let v = box_integral([0.0; 3], [1.0, 2.0, 3.0], 4, |_| Ok(1.0)).unwrap();
        assert!((v - 6.0).abs() < 1e-13);
    }
}
