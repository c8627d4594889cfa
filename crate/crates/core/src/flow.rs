//! Plastic distortion rates, material flows with their pulled-back metrics,
//! the intrinsic rate of stretchings, Lie derivatives and the consistency
//! checks of a flow against an evolving metric.

use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::frame::{build_frame_bundle, mat_to_vec, MetricField};
use crate::geometry::{Chart, Field, FieldKind, Point, Variance};
use crate::kinematics::fd_weights;

/// Time step of the finite differences in t.
pub const TIME_FD_STEP: f64 = 1e-3;
/// Offset of the satellite seeds used for the deformation gradient.
pub const SATELLITE_STEP: f64 = 1e-3;
/// Below this Jacobian a trajectory bundle has collapsed.
pub const MIN_JACOBIAN: f64 = 1e-8;

type MatrixFn = Arc<dyn Fn(&Point, f64) -> Matrix3<f64> + Send + Sync>;

/// Fourth-order derivative in t of `f`, one-sided where the stencil would
/// leave `[t_min, t_max]`.
fn time_derivative<T, F>(f: F, t: f64, range: Option<(f64, f64)>) -> Result<T>
where
    F: Fn(f64) -> Result<T>,
    T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let h = TIME_FD_STEP;
    let mut offsets = [-2.0, -1.0, 0.0, 1.0, 2.0];
    if let Some((lo, hi)) = range {
        if t - 2.0 * h < lo {
            offsets = [0.0, 1.0, 2.0, 3.0, 4.0];
        } else if t + 2.0 * h > hi {
            offsets = [-4.0, -3.0, -2.0, -1.0, 0.0];
        }
    }
    let w = fd_weights(0.0, &offsets, 1);
    let mut acc: Option<T> = None;
    for (o, wi) in offsets.iter().zip(w) {
        if wi == 0.0 {
            continue;
        }
        let term = f(t + o * h)? * (wi / h);
        acc = Some(match acc {
            Some(a) => a + term,
            None => term,
        });
    }
    Ok(acc.expect("stencil has non-zero weights"))
}

/// Time-dependent plastic distortion `P(X, t)` with `E_a = P ∂_a`.
#[derive(Clone)]
pub struct DistortionHistory {
    chart: Chart,
    p: MatrixFn,
    p_dot: Option<MatrixFn>,
    range: Option<(f64, f64)>,
}

impl std::fmt::Debug for DistortionHistory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DistortionHistory")
            .field("chart", &self.chart)
            .field("analytic_rate", &self.p_dot.is_some())
            .field("range", &self.range)
            .finish()
    }
}

impl DistortionHistory {
    pub fn new<F>(chart: Chart, p: F) -> Self
    where
        F: Fn(&Point, f64) -> Matrix3<f64> + Send + Sync + 'static,
    {
        Self {
            chart,
            p: Arc::new(p),
            p_dot: None,
            range: None,
        }
    }

    pub fn with_rate<F>(mut self, p_dot: F) -> Self
    where
        F: Fn(&Point, f64) -> Matrix3<f64> + Send + Sync + 'static,
    {
        self.p_dot = Some(Arc::new(p_dot));
        self
    }

    /// Restricts time differences to `[t0, t1]`.
    pub fn with_range(mut self, t0: f64, t1: f64) -> Self {
        self.range = Some((t0, t1));
        self
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn p(&self, x: &Point, t: f64) -> Result<Matrix3<f64>> {
        self.chart.check(x)?;
        let p = (self.p)(x, t);
        let det = p.determinant();
        if !(det > 1e-12) {
            return Err(Error::SingularP { t, det });
        }
        Ok(p)
    }

    /// `g = P⁻ᵀ P⁻¹`.
    pub fn metric_matrix(&self, x: &Point, t: f64) -> Result<Matrix3<f64>> {
        let inv = self.p(x, t)?.try_inverse().ok_or(Error::SingularP { t, det: 0.0 })?;
        Ok(inv.transpose() * inv)
    }

    /// The metric at time `t`, built through the coframe `P⁻¹`.
    pub fn metric_at(&self, t: f64) -> Result<MetricField> {
        let p = self.p.clone();
        let coframe = Field::analytic(
            self.chart,
            FieldKind::Tensor(vec![Variance::Up, Variance::Down]),
            move |x| {
                let inv = p(x, t).try_inverse().unwrap_or_else(|| Matrix3::from_element(f64::NAN));
                mat_to_vec(&inv)
            },
        );
        Ok(build_frame_bundle(coframe, 1.0)?.metric)
    }

    fn p_dot(&self, x: &Point, t: f64) -> Result<Matrix3<f64>> {
        match &self.p_dot {
            Some(f) => Ok(f(x, t)),
            None => time_derivative(|s| self.p(x, s), t, self.range),
        }
    }
}

/// `S_p = Ṗ P⁻¹`, its lowered form and symmetric part at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistortionRates {
    pub s_p: Matrix3<f64>,
    pub l_p: Matrix3<f64>,
    pub d_p: Matrix3<f64>,
    pub g: Matrix3<f64>,
    /// ġ by differences in t of the frame-built metric.
    pub g_dot: Matrix3<f64>,
    /// max |ġ + 2D_p|.
    pub metric_residual: f64,
}

pub fn distortion_rates(history: &DistortionHistory, x: &Point, t: f64) -> Result<DistortionRates> {
    let p = history.p(x, t)?;
    let inv = p.try_inverse().ok_or(Error::SingularP { t, det: 0.0 })?;
    let s_p = history.p_dot(x, t)? * inv;
    let g = inv.transpose() * inv;
    let l_p = g * s_p;
    let d_p = 0.5 * (l_p + l_p.transpose());
    let g_dot = time_derivative(|s| history.metric_matrix(x, s), t, history.range)?;
    Ok(DistortionRates {
        s_p,
        l_p,
        d_p,
        g,
        g_dot,
        metric_residual: (g_dot + 2.0 * d_p).abs().max(),
    })
}

/// A velocity field `v(X, t)` in coordinate components.
#[derive(Clone)]
pub struct Velocity {
    chart: Chart,
    f: Arc<dyn Fn(&Point, f64) -> [f64; 3] + Send + Sync>,
}

impl std::fmt::Debug for Velocity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Velocity").field("chart", &self.chart).finish()
    }
}

impl Velocity {
    pub fn new<F>(chart: Chart, f: F) -> Self
    where
        F: Fn(&Point, f64) -> [f64; 3] + Send + Sync + 'static,
    {
        Self { chart, f: Arc::new(f) }
    }

    pub fn stationary(field: Field) -> Self {
        let chart = *field.chart();
        Self::new(chart, move |p, _| {
            let v = field.value_unchecked(p);
            [v[0], v[1], v[2]]
        })
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn at(&self, p: &Point, t: f64) -> [f64; 3] {
        (self.f)(p, t)
    }

    /// The frozen field at time `t`.
    pub fn at_time(&self, t: f64) -> Field {
        let f = self.f.clone();
        Field::analytic(self.chart, FieldKind::Vector, move |p| f(p, t).to_vec())
    }
}

/// Trajectory record of one seed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub seed: Point,
    pub points: Vec<Point>,
    pub jacobian: Vec<f64>,
    /// max |E_p| at each stored time.
    pub strain_norm: Vec<f64>,
    /// Final deformation gradient `χ^A_a`.
    pub gradient: Matrix3<f64>,
    /// Final `G_ab = χ^A_a χ^B_b g_AB ∘ χ`.
    pub pulled_back: Matrix3<f64>,
    /// Final `E_p = ½(G − g₀)`.
    pub plastic_strain: Matrix3<f64>,
    /// max over time of |det G − J² det g| / det G.
    pub det_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowState {
    pub times: Vec<f64>,
    pub trajectories: Vec<Trajectory>,
}

impl FlowState {
    pub fn max_strain(&self) -> f64 {
        self.trajectories
            .iter()
            .flat_map(|t| t.strain_norm.iter())
            .fold(0.0f64, |m, v| m.max(*v))
    }

    pub fn max_det_residual(&self) -> f64 {
        self.trajectories.iter().fold(0.0f64, |m, t| m.max(t.det_residual))
    }
}

fn rk4_step(v: &Velocity, x: &Point, t: f64, dt: f64) -> Point {
    let add = |a: &Point, k: &[f64; 3], h: f64| [a[0] + h * k[0], a[1] + h * k[1], a[2] + h * k[2]];
    let k1 = v.at(x, t);
    let k2 = v.at(&add(x, &k1, 0.5 * dt), t + 0.5 * dt);
    let k3 = v.at(&add(x, &k2, 0.5 * dt), t + 0.5 * dt);
    let k4 = v.at(&add(x, &k3, dt), t + dt);
    [0, 1, 2].map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// Integrates every seed with RK4 for time `duration` in steps `dt`. Each
/// seed carries satellites at ±h and ±2h per axis for a fourth-order
/// deformation gradient; `g` is the (static) material metric.
pub fn advance_flow(v: &Velocity, g: &MetricField, seeds: &[Point], duration: f64, dt: f64) -> Result<FlowState> {
    if !(dt > 0.0) || !(duration >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "flow needs dt > 0 and a non-negative duration (dt {dt}, T {duration})"
        )));
    }
    let chart = *g.chart();
    let steps = (duration / dt).round().max(0.0) as usize;
    let h = SATELLITE_STEP;
    let offsets = [-2.0, -1.0, 1.0, 2.0];
    let mut times = vec![0.0];
    for n in 1..=steps {
        times.push(n as f64 * duration / steps as f64);
    }
    let dt = if steps > 0 { duration / steps as f64 } else { dt };

    let mut out = Vec::with_capacity(seeds.len());
    for seed in seeds {
        chart.check(seed)?;
        // bundle[0] is the seed; then axis-major satellites at offsets.
        let mut bundle = vec![*seed];
        for axis in 0..3 {
            for o in offsets {
                let mut q = *seed;
                q[axis] += o * h;
                chart.check(&q).map_err(|_| Error::ExitedDomain { seed: *seed, t: 0.0 })?;
                bundle.push(q);
            }
        }
        let g0 = g.at(seed)?;
        let measure = |bundle: &[Point]| -> Result<(Matrix3<f64>, Matrix3<f64>, f64, f64)> {
            let mut f = Matrix3::zeros();
            for axis in 0..3 {
                let b = &bundle[1 + 4 * axis..5 + 4 * axis];
                for a in 0..3 {
                    f[(a, axis)] = (b[0][a] - 8.0 * b[1][a] + 8.0 * b[2][a] - b[3][a]) / (12.0 * h);
                }
            }
            let gx = g.at(&bundle[0])?;
            let big_g = f.transpose() * gx * f;
            let j = f.determinant();
            let dg = big_g.determinant();
            let det_res = (dg - j * j * gx.determinant()).abs() / dg.abs().max(f64::MIN_POSITIVE);
            Ok((f, big_g, j, det_res))
        };
        let (mut f, mut big_g, j0, mut det_res) = measure(&bundle)?;
        let mut traj = Trajectory {
            seed: *seed,
            points: vec![*seed],
            jacobian: vec![j0],
            strain_norm: vec![(0.5 * (big_g - g0)).abs().max()],
            gradient: f,
            pulled_back: big_g,
            plastic_strain: 0.5 * (big_g - g0),
            det_residual: det_res,
        };
        for (n, &t) in times.iter().enumerate().skip(1) {
            let t_prev = times[n - 1];
            for q in bundle.iter_mut() {
                *q = rk4_step(v, q, t_prev, dt);
                if !chart.contains(q) {
                    return Err(Error::ExitedDomain { seed: *seed, t });
                }
            }
            let (fm, gm, j, dr) = measure(&bundle)?;
            if !(j >= MIN_JACOBIAN) {
                return Err(Error::JacobianCollapse {
                    seed: *seed,
                    jacobian: j,
                });
            }
            f = fm;
            big_g = gm;
            det_res = det_res.max(dr);
            traj.points.push(bundle[0]);
            traj.jacobian.push(j);
            traj.strain_norm.push((0.5 * (big_g - g0)).abs().max());
        }
        traj.gradient = f;
        traj.pulled_back = big_g;
        traj.plastic_strain = 0.5 * (big_g - g0);
        traj.det_residual = det_res;
        out.push(traj);
    }
    Ok(FlowState {
        times,
        trajectories: out,
    })
}

/// `g_t = F⁻ᵀ g₀ F⁻¹` at the image point.
pub fn push_forward_metric(gradient: &Matrix3<f64>, g0: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    let inv = gradient
        .try_inverse()
        .ok_or(Error::JacobianCollapse {
            seed: [f64::NAN; 3],
            jacobian: gradient.determinant(),
        })?;
    Ok(inv.transpose() * g0 * inv)
}

/// `G = Fᵀ g F`.
pub fn pull_back_metric(gradient: &Matrix3<f64>, g: &Matrix3<f64>) -> Matrix3<f64> {
    gradient.transpose() * g * gradient
}

/// Symmetrized covariant velocity gradient and divergence at a point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StretchingRate {
    /// `∇_A v_B` (row A, column B).
    pub gradient: Matrix3<f64>,
    /// `D_AB = ½(∇_A v_B + ∇_B v_A)`.
    pub d: Matrix3<f64>,
    /// `g^AB D_AB`.
    pub trace: f64,
    /// `∇_A v^A`.
    pub divergence: f64,
}

pub fn rate_of_stretchings(g: &MetricField, v: &Field, p: &Point) -> Result<StretchingRate> {
    let gm = g.at(p)?;
    let ginv = g.inverse_at(p)?;
    let dg = g.partials(p)?;
    let gam = g.christoffel(p)?;
    let vv = Vector3::from_column_slice(&v.value(p)?[..3]);
    let dv: Vec<Vector3<f64>> = (0..3)
        .map(|a| v.partial(p, a).map(|d| Vector3::from_column_slice(&d[..3])))
        .collect::<Result<_>>()?;
    let lower = gm * vv;
    let mut grad = Matrix3::zeros();
    for a in 0..3 {
        // ∂_A v_B = ∂_A g_BC v^C + g_BC ∂_A v^C
        let d_lower = dg[a] * vv + gm * dv[a];
        for b in 0..3 {
            let mut s = d_lower[b];
            for c in 0..3 {
                s -= gam[c][a][b] * lower[c];
            }
            grad[(a, b)] = s;
        }
    }
    let d = 0.5 * (grad + grad.transpose());
    let trace = (ginv * d).trace();
    let mut divergence = 0.0;
    for a in 0..3 {
        divergence += dv[a][a];
        for b in 0..3 {
            divergence += gam[a][a][b] * vv[b];
        }
    }
    Ok(StretchingRate {
        gradient: grad,
        d,
        trace,
        divergence,
    })
}

/// `(L_u T)` at `p` for a tensor of rank ≤ 3 with declared variance;
/// components in the field's own layout.
pub fn lie_derivative(t: &Field, u: &Field, p: &Point) -> Result<Vec<f64>> {
    let slots = match t.kind() {
        FieldKind::Components(n) if *n == 1 => vec![],
        FieldKind::Components(_) => {
            return Err(Error::InvalidField("Lie derivative needs declared index variance".into()))
        }
        k => k.slots(),
    };
    let rank = slots.len();
    if rank > 3 {
        return Err(Error::UnsupportedRank(rank));
    }
    let uv = u.value(p)?;
    let du: Vec<Vec<f64>> = (0..3).map(|a| u.partial(p, a)).collect::<Result<_>>()?;
    let tv = t.value(p)?;
    let dt: Vec<Vec<f64>> = (0..3).map(|a| t.partial(p, a)).collect::<Result<_>>()?;
    let n = 3usize.pow(rank as u32);
    let mut out = vec![0.0; n];
    for (flat, slot) in out.iter_mut().enumerate() {
        let idx: Vec<usize> = (0..rank).map(|k| (flat / 3usize.pow((rank - 1 - k) as u32)) % 3).collect();
        let mut s: f64 = (0..3).map(|c| uv[c] * dt[c][flat]).sum();
        for (k, var) in slots.iter().enumerate() {
            for c in 0..3 {
                let mut j = idx.clone();
                j[k] = c;
                let jf = j.iter().fold(0, |acc, v| acc * 3 + v);
                match var {
                    // −T^{..C..} ∂_C u^A
                    Variance::Up => s -= tv[jf] * du[c][idx[k]],
                    // +T_{..C..} ∂_B u^C
                    Variance::Down => s += tv[jf] * du[idx[k]][c],
                }
            }
        }
        *slot = s;
    }
    Ok(out)
}

/// `L_u ω_g = (div_g u) ω_g`: the factor div_g u.
pub fn lie_derivative_volume(g: &MetricField, u: &Field, p: &Point) -> Result<f64> {
    Ok(rate_of_stretchings(g, u, p)?.divergence)
}

/// Residuals of a flow against an evolving metric and plastic rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowConsistency {
    /// max |½ġ + D_p|.
    pub metric_rate: f64,
    /// max |D_p − D_g|.
    pub rates_match: f64,
    /// max |ġ + 2D_g|.
    pub metric_follows_flow: f64,
    /// max |∂_t ln √g + div_g v|.
    pub volume_balance: f64,
    /// max |div_g v|.
    pub divergence: f64,
    /// max |tr D_g − div_g v|.
    pub trace_identity: f64,
    pub consistent: bool,
    pub conservative: bool,
}

/// Time-dependent metric source.
pub type MetricHistory<'a> = &'a dyn Fn(f64) -> Result<MetricField>;
/// Plastic rate of stretchings `D_p(X, t)` (covariant).
pub type PlasticRate<'a> = &'a dyn Fn(&Point, f64) -> Result<Matrix3<f64>>;

/// Evaluates the flow-consistency relations at `points × times`.
pub fn flow_consistency(
    d_p: PlasticRate,
    metric: MetricHistory,
    v: &Velocity,
    points: &[Point],
    times: &[f64],
    tol: f64,
) -> Result<FlowConsistency> {
    let mut r = FlowConsistency {
        metric_rate: 0.0,
        rates_match: 0.0,
        metric_follows_flow: 0.0,
        volume_balance: 0.0,
        divergence: 0.0,
        trace_identity: 0.0,
        consistent: false,
        conservative: false,
    };
    for &t in times {
        let g = metric(t)?;
        let vf = v.at_time(t);
        let metrics: Vec<MetricField> = [-2.0, -1.0, 1.0, 2.0]
            .iter()
            .map(|o| metric(t + o * TIME_FD_STEP))
            .collect::<Result<_>>()?;
        for p in points {
            let at = |k: usize| metrics[k].at(p);
            let h = TIME_FD_STEP;
            let g_dot = (8.0 * (at(2)? - at(1)?) - (at(3)? - at(0)?)) / (12.0 * h);
            let ln_sqrt = |k: usize| -> Result<f64> { Ok(0.5 * at(k)?.determinant().ln()) };
            let dln = (8.0 * (ln_sqrt(2)? - ln_sqrt(1)?) - (ln_sqrt(3)? - ln_sqrt(0)?)) / (12.0 * h);
            let sr = rate_of_stretchings(&g, &vf, p)?;
            let dp = d_p(p, t)?;
            r.metric_rate = r.metric_rate.max((0.5 * g_dot + dp).abs().max());
            r.rates_match = r.rates_match.max((dp - sr.d).abs().max());
            r.metric_follows_flow = r.metric_follows_flow.max((g_dot + 2.0 * sr.d).abs().max());
            r.volume_balance = r.volume_balance.max((dln + sr.divergence).abs());
            r.divergence = r.divergence.max(sr.divergence.abs());
            r.trace_identity = r.trace_identity.max((sr.trace - sr.divergence).abs());
        }
    }
    r.consistent = r.metric_rate < tol && r.rates_match < tol;
    r.conservative = r.consistent && r.divergence < tol;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{bundle_for, CoframeSpec};
    use std::f64::consts::TAU;

    fn chart() -> Chart {
        Chart::cube(-2.0, 2.0, 8).unwrap()
    }

    fn rotation(c: Chart) -> Field {
        Field::analytic(c, FieldKind::Vector, |p| vec![-p[1], p[0], 0.0])
    }

    #[test]
    fn exponential_distortion_rates() {
        let a = 0.3;
        let h = DistortionHistory::new(chart(), move |_, t| Matrix3::identity() * (a * t).exp());
        let r = distortion_rates(&h, &[0.1, 0.2, 0.3], 0.5).unwrap();
        assert!((r.s_p - Matrix3::identity() * a).abs().max() < 1e-9);
        assert!((r.d_p - r.g * a).abs().max() < 1e-9);
        assert!(r.metric_residual < 1e-9);
        let exact = h.clone().with_rate(move |_, t| Matrix3::identity() * a * (a * t).exp());
        let r = distortion_rates(&exact, &[0.1, 0.2, 0.3], 0.5).unwrap();
        assert!((r.s_p - Matrix3::identity() * a).abs().max() < 1e-15);
    }

    #[test]
    fn simple_shear_rate_at_origin() {
        let b0 = 0.2;
        let h = DistortionHistory::new(chart(), move |_, t| {
            let mut m = Matrix3::identity();
            m[(0, 1)] = t * b0;
            m
        });
        let r = distortion_rates(&h, &[0.0; 3], 0.0).unwrap();
        let mut expected = Matrix3::zeros();
        expected[(0, 1)] = b0;
        assert!((r.s_p - expected).abs().max() < 1e-10);
        assert!((r.d_p - 0.5 * (expected + expected.transpose())).abs().max() < 1e-10);
    }

    #[test]
    fn singular_p() {
        let h = DistortionHistory::new(chart(), |_, _| Matrix3::zeros());
        assert!(matches!(distortion_rates(&h, &[0.0; 3], 0.0), Err(Error::SingularP { .. })));
    }

    #[test]
    fn translation_is_rigid() {
        let c = chart();
        let v = Velocity::new(c, |_, _| [0.1, -0.2, 0.05]);
        let st = advance_flow(&v, &MetricField::flat(c), &[[0.0; 3]], 1.0, 0.1).unwrap();
        let tr = &st.trajectories[0];
        let end = tr.points.last().unwrap();
        assert!((end[0] - 0.1).abs() < 1e-12 && (end[1] + 0.2).abs() < 1e-12);
        assert!(st.max_strain() < 1e-9);
    }

    #[test]
    fn rotation_returns_seeds() {
        let c = chart();
        let v = Velocity::stationary(rotation(c));
        let seeds = [[1.0, 0.0, 0.0], [0.3, -0.7, 0.5]];
        let st = advance_flow(&v, &MetricField::flat(c), &seeds, TAU, 0.01).unwrap();
        for (tr, s) in st.trajectories.iter().zip(seeds) {
            let e = tr.points.last().unwrap();
            assert!((0..3).all(|i| (e[i] - s[i]).abs() < 1e-6));
            assert!(tr.jacobian.iter().all(|j| (j - 1.0).abs() < 1e-6));
        }
        assert!(st.max_strain() < 1e-6);
        assert!(st.max_det_residual() < 1e-6);
    }

    #[test]
    fn exponential_stretch() {
        let c = chart();
        let a = 0.4;
        let v = Velocity::new(c, move |p, _| [a * p[0], 0.0, 0.0]);
        let st = advance_flow(&v, &MetricField::flat(c), &[[1.0, 0.0, 0.0]], 0.5, 0.01).unwrap();
        let g = st.trajectories[0].pulled_back;
        assert!((g[(0, 0)] - (2.0 * a * 0.5f64).exp()).abs() < 1e-6);
        let back = pull_back_metric(
            &st.trajectories[0].gradient,
            &push_forward_metric(&st.trajectories[0].gradient, &Matrix3::identity()).unwrap(),
        );
        assert!((back - Matrix3::identity()).abs().max() < 1e-12);
    }

    #[test]
    fn leaving_the_chart() {
        let c = Chart::cube(-1.0, 1.0, 8).unwrap();
        let v = Velocity::new(c, |_, _| [1.0, 0.0, 0.0]);
        assert!(matches!(
            advance_flow(&v, &MetricField::flat(c), &[[0.5, 0.0, 0.0]], 1.0, 0.1),
            Err(Error::ExitedDomain { .. })
        ));
    }

    #[test]
    fn stretching_rates() {
        let c = chart();
        let flat = MetricField::flat(c);
        let r = rate_of_stretchings(&flat, &rotation(c), &[0.3, 0.2, 0.1]).unwrap();
        assert!(r.d.abs().max() < 1e-10);
        let a = 0.7;
        let v = Field::analytic(c, FieldKind::Vector, move |p| vec![a * p[0], 0.0, 0.0]);
        let r = rate_of_stretchings(&flat, &v, &[0.3, 0.2, 0.1]).unwrap();
        assert!((r.d[(0, 0)] - a).abs() < 1e-10 && (r.divergence - a).abs() < 1e-10);
    }

    #[test]
    fn umbilical_stretching_block() {
        let h0 = 0.5;
        let c = Chart::cube(-1.0, 1.0, 8).unwrap();
        let b = bundle_for(&CoframeSpec::Umbilical { h0 }, c).unwrap();
        let v0 = 0.3;
        let v = Field::constant(c, FieldKind::Vector, vec![v0, 0.0, 0.0]);
        let p = [0.1, 0.2, 0.4];
        let r = rate_of_stretchings(&b.metric, &v, &p).unwrap();
        let psi = (-2.0 * h0 * p[2]).exp();
        // ∇_1 v_3 = H v_1 and ∇_3 v_1 = −H v_1, so the symmetric part vanishes.
        assert!((r.gradient[(0, 2)] - h0 * psi * v0).abs() < 1e-8);
        assert!((r.gradient[(2, 0)] + h0 * psi * v0).abs() < 1e-8);
        assert!(r.d[(0, 2)].abs() < 1e-8);
        assert!((r.trace - r.divergence).abs() < 1e-8);
    }

    #[test]
    fn lie_derivatives() {
        let c = chart();
        let f = Field::analytic(c, FieldKind::Scalar, |p| vec![p[0]]);
        let u = Field::constant(c, FieldKind::Vector, vec![1.0, 0.0, 0.0]);
        assert!((lie_derivative(&f, &u, &[0.3, 0.0, 0.0]).unwrap()[0] - 1.0).abs() < 1e-10);

        let g = Field::constant(c, FieldKind::covariant2(), mat_to_vec(&Matrix3::identity()));
        let lg = lie_derivative(&g, &rotation(c), &[0.4, 0.1, 0.2]).unwrap();
        assert!(lg.iter().all(|v| v.abs() < 1e-10));

        let a = 0.6;
        let stretch = Field::analytic(c, FieldKind::Vector, move |p| vec![a * p[0], 0.0, 0.0]);
        let lg = lie_derivative(&g, &stretch, &[0.4, 0.1, 0.2]).unwrap();
        let d = rate_of_stretchings(&MetricField::flat(c), &stretch, &[0.4, 0.1, 0.2]).unwrap().d;
        for i in 0..9 {
            assert!((lg[i] - 2.0 * d[(i / 3, i % 3)]).abs() < 1e-10);
        }
        assert!((lg[0] - 2.0 * a).abs() < 1e-10);

        let r4 = Field::constant(
            c,
            FieldKind::Tensor(vec![Variance::Down; 4]),
            vec![0.0; 81],
        );
        assert_eq!(lie_derivative(&r4, &u, &[0.0; 3]), Err(Error::UnsupportedRank(4)));
    }

    #[test]
    fn lie_bracket_of_vectors() {
        let c = chart();
        let x = Field::analytic(c, FieldKind::Vector, |p| vec![p[1], 0.0, 0.0]);
        let u = Field::constant(c, FieldKind::Vector, vec![0.0, 1.0, 0.0]);
        // [u, x] = u(x) − x(u) = ∂_2 x = ∂_1
        let r = lie_derivative(&x, &u, &[0.1, 0.2, 0.3]).unwrap();
        assert!((r[0] - 1.0).abs() < 1e-10 && r[1].abs() < 1e-12);
    }

    #[test]
    fn static_flow_is_conservative() {
        let c = chart();
        let flat = MetricField::flat(c);
        let v = Velocity::new(c, |_, _| [0.0; 3]);
        let m = |_t: f64| Ok(flat.clone());
        let dp = |_: &Point, _t: f64| Ok(Matrix3::zeros());
        let r = flow_consistency(&dp, &m, &v, &[[0.1, 0.2, 0.3]], &[0.0, 1.0], 1e-8).unwrap();
        assert!(r.consistent && r.conservative);
        assert_eq!(r.divergence, 0.0);
    }

    #[test]
    fn umbilical_rotation_is_conservative() {
        let c = Chart::cube(-1.0, 1.0, 8).unwrap();
        let b = bundle_for(&CoframeSpec::Umbilical { h0: 0.5 }, c).unwrap();
        let v = Velocity::stationary(rotation(c));
        let metric = b.metric.clone();
        let m = move |_t: f64| Ok(metric.clone());
        let g = b.metric.clone();
        let vf = rotation(c);
        let dp = move |p: &Point, _t: f64| Ok(rate_of_stretchings(&g, &vf, p)?.d);
        let pts = [[0.2, 0.1, 0.3], [-0.4, 0.5, -0.2]];
        let r = flow_consistency(&dp, &m, &v, &pts, &[0.0], 1e-8).unwrap();
        assert!(r.divergence < 1e-10);
        assert!(r.metric_follows_flow < 1e-8);
        assert!(r.conservative);
    }
}
