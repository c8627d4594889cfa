//! Umbilical material spaces foliated by glide surfaces, slip systems,
//! Killing residuals, Orowan-type rate relations and the power-law
//! dislocation speed.

use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use serde::Serialize;

use crate::burgers::VolterraTriple;
use crate::error::{Error, Result};
use crate::expr::Expression;
use crate::frame::{mat_to_vec, MetricField};
use crate::geometry::{Chart, Field, FieldKind, Point, TestLattice};

/// Curvature band treated as zero when classifying leaves.
pub const CURVATURE_TOL: f64 = 1e-8;
/// Step of the differences taken on `h` and on the leaf metric.
pub const LEAF_FD_STEP: f64 = 1e-3;
/// Tolerance of the Christoffel closed-form comparison.
pub const CHRISTOFFEL_TOL: f64 = 1e-8;

type LeafFn = Arc<dyn Fn(f64, f64) -> Matrix2<f64> + Send + Sync>;
type HeightFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// 2D leaf metric `a_αβ(X¹, X²)`; `Γ[a]` is `[κ][α][β]`.
#[derive(Clone)]
pub struct LeafMetric {
    a: LeafFn,
    flat: bool,
}

impl std::fmt::Debug for LeafMetric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LeafMetric").field("flat", &self.flat).finish()
    }
}

fn d1<F: Fn(f64) -> T, T>(f: F, x: f64, h: f64) -> T
where
    T: std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    (f(x - 2.0 * h) - f(x + 2.0 * h) + (f(x + h) - f(x - h)) * 8.0) * (1.0 / (12.0 * h))
}

impl LeafMetric {
    pub fn new<F>(a: F) -> Self
    where
        F: Fn(f64, f64) -> Matrix2<f64> + Send + Sync + 'static,
    {
        Self { a: Arc::new(a), flat: false }
    }

    pub fn flat() -> Self {
        Self {
            a: Arc::new(|_, _| Matrix2::identity()),
            flat: true,
        }
    }

    /// `dθ² + sin²θ dφ²` with `X¹ = θ`, `X² = φ`.
    pub fn round_sphere() -> Self {
        Self::new(|x1, _| Matrix2::new(1.0, 0.0, 0.0, x1.sin().powi(2)))
    }

    /// `(dX¹² + dX²²)/(X²)²`, curvature −1 on `X² > 0`.
    pub fn half_plane() -> Self {
        Self::new(|_, x2| Matrix2::identity() / (x2 * x2))
    }

    /// From expressions for `a₁₁`, `a₁₂`, `a₂₂` in X1, X2 at time `t`.
    pub fn from_expressions(a11: &str, a12: &str, a22: &str, t: f64) -> Result<Self> {
        let e = [a11, a12, a22].map(Expression::parse);
        let [e11, e12, e22] = [e[0].clone()?, e[1].clone()?, e[2].clone()?];
        Ok(Self::new(move |x1, x2| {
            let p = [x1, x2, 0.0];
            let off = e12.eval(&p, t);
            Matrix2::new(e11.eval(&p, t), off, off, e22.eval(&p, t))
        }))
    }

    pub fn at(&self, x1: f64, x2: f64) -> Matrix2<f64> {
        (self.a)(x1, x2)
    }

    /// `[∂₁a, ∂₂a]`.
    pub fn partials(&self, x1: f64, x2: f64) -> [Matrix2<f64>; 2] {
        if self.flat {
            return [Matrix2::zeros(); 2];
        }
        let h = LEAF_FD_STEP;
        [d1(|s| self.at(s, x2), x1, h), d1(|s| self.at(x1, s), x2, h)]
    }

    /// `Γ^κ_αβ[a]`.
    pub fn christoffel(&self, x1: f64, x2: f64) -> [[[f64; 2]; 2]; 2] {
        let inv = self.at(x1, x2).try_inverse().unwrap_or_else(|| Matrix2::from_element(f64::NAN));
        let da = self.partials(x1, x2);
        let mut g = [[[0.0; 2]; 2]; 2];
        for k in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    g[k][a][b] = 0.5
                        * (0..2)
                            .map(|d| inv[(k, d)] * (da[a][(d, b)] + da[b][(d, a)] - da[d][(a, b)]))
                            .sum::<f64>();
                }
            }
        }
        g
    }

    /// Gaussian curvature `K = R₁₂₁₂ / det a`.
    pub fn gaussian_curvature(&self, x1: f64, x2: f64) -> f64 {
        if self.flat {
            return 0.0;
        }
        let h = LEAF_FD_STEP;
        let gam = self.christoffel(x1, x2);
        let d_1 = |k: usize, a: usize, b: usize| d1(|s| self.christoffel(s, x2)[k][a][b], x1, h);
        let d_2 = |k: usize, a: usize, b: usize| d1(|s| self.christoffel(x1, s)[k][a][b], x2, h);
        let a = self.at(x1, x2);
        let mut r = 0.0;
        for k in 0..2 {
            // R^κ_212 = ∂₁Γ^κ_22 − ∂₂Γ^κ_12 + Γ^κ_1λΓ^λ_22 − Γ^κ_2λΓ^λ_12
            let mut rk = d_1(k, 1, 1) - d_2(k, 0, 1);
            for l in 0..2 {
                rk += gam[k][0][l] * gam[l][1][1] - gam[k][1][l] * gam[l][0][1];
            }
            r += a[(0, k)] * rk;
        }
        r / a.determinant()
    }
}

/// Sign class of the leaves' Gaussian curvature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafClass {
    Parabolic,
    Hyperbolic,
    Elliptic,
    /// K changes sign over the sampled leaves.
    Mixed,
}

/// The space `g = Ψ(X³) a + dX³ ⊗ dX³` with `Ψ = a_scale² e^{−2h}`,
/// normalized so that `Ψ(0) = 1`.
#[derive(Clone)]
pub struct UmbilicalSpace {
    chart: Chart,
    h: HeightFn,
    leaf: LeafMetric,
    a_scale: f64,
    metric: MetricField,
    /// Max deviation of the generic Christoffels from the closed forms.
    pub christoffel_residual: f64,
    pub curvature_range: (f64, f64),
    pub class: LeafClass,
}

impl std::fmt::Debug for UmbilicalSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("UmbilicalSpace")
            .field("chart", &self.chart)
            .field("a_scale", &self.a_scale)
            .field("christoffel_residual", &self.christoffel_residual)
            .field("curvature_range", &self.curvature_range)
            .field("class", &self.class)
            .finish()
    }
}

/// `h(X³) = h₀X³` as a height function.
pub fn linear_height(h0: f64) -> impl Fn(f64) -> f64 + Send + Sync + Clone + 'static {
    move |x3| h0 * x3
}

/// `h` from an expression in X3 at time `t`.
pub fn height_from_expression(source: &str, t: f64) -> Result<impl Fn(f64) -> f64 + Send + Sync + Clone + 'static> {
    let e = Expression::parse(source)?;
    Ok(move |x3: f64| e.eval(&[0.0, 0.0, x3], t))
}

pub fn build_umbilical_space<H>(h: H, leaf: LeafMetric, chart: Chart) -> Result<UmbilicalSpace>
where
    H: Fn(f64) -> f64 + Send + Sync + 'static,
{
    build_umbilical_space_with(h, leaf, chart, CURVATURE_TOL)
}

pub fn build_umbilical_space_with<H>(h: H, leaf: LeafMetric, chart: Chart, curvature_tol: f64) -> Result<UmbilicalSpace>
where
    H: Fn(f64) -> f64 + Send + Sync + 'static,
{
    let h: HeightFn = Arc::new(h);
    let a_scale = h(0.0).exp();
    let lattice = TestLattice::new(&chart, 0x5EAF);
    let corners = [chart.lower(), chart.upper()];
    for p in lattice.points().iter().chain(corners.iter()) {
        if leaf.at(p[0], p[1]).cholesky().is_none() {
            return Err(Error::NonPositiveLeafMetric { point: *p });
        }
    }
    let (hh, lf) = (h.clone(), leaf.clone());
    let field = Field::analytic(chart, FieldKind::covariant2(), move |p| {
        let psi = a_scale * a_scale * (-2.0 * hh(p[2])).exp();
        let a = lf.at(p[0], p[1]);
        let mut g = Matrix3::zeros();
        for i in 0..2 {
            for j in 0..2 {
                g[(i, j)] = psi * a[(i, j)];
            }
        }
        g[(2, 2)] = 1.0;
        mat_to_vec(&g)
    });
    let mut space = UmbilicalSpace {
        chart,
        h,
        leaf,
        a_scale,
        metric: MetricField::from_field(field)?,
        christoffel_residual: 0.0,
        curvature_range: (f64::INFINITY, f64::NEG_INFINITY),
        class: LeafClass::Parabolic,
    };
    for p in lattice.points() {
        space.christoffel_residual = space.christoffel_residual.max(space.christoffel_mismatch(p)?);
        let k = space.gaussian_curvature(p);
        space.curvature_range.0 = space.curvature_range.0.min(k);
        space.curvature_range.1 = space.curvature_range.1.max(k);
    }
    let (lo, hi) = space.curvature_range;
    space.class = if lo.abs() < curvature_tol && hi.abs() < curvature_tol {
        LeafClass::Parabolic
    } else if hi < -curvature_tol {
        LeafClass::Hyperbolic
    } else if lo > curvature_tol {
        LeafClass::Elliptic
    } else {
        LeafClass::Mixed
    };
    Ok(space)
}

impl UmbilicalSpace {
    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn metric(&self) -> &MetricField {
        &self.metric
    }

    pub fn leaf(&self) -> &LeafMetric {
        &self.leaf
    }

    pub fn a_scale(&self) -> f64 {
        self.a_scale
    }

    pub fn h(&self, x3: f64) -> f64 {
        (self.h)(x3)
    }

    pub fn psi(&self, x3: f64) -> f64 {
        self.a_scale * self.a_scale * (-2.0 * self.h(x3)).exp()
    }

    /// `H = ∂₃h`.
    pub fn mean_curvature(&self, x3: f64) -> f64 {
        d1(|s| self.h(s), x3, LEAF_FD_STEP)
    }

    /// Gaussian curvature of the leaf `X³ = c` through `p`, metric `Ψ(c)a`.
    pub fn gaussian_curvature(&self, p: &Point) -> f64 {
        self.leaf.gaussian_curvature(p[0], p[1]) / self.psi(p[2])
    }

    /// Closed-form Christoffels `Γ^A_BC` of the umbilical metric.
    pub fn christoffel_closed_form(&self, p: &Point) -> [[[f64; 3]; 3]; 3] {
        let h = self.mean_curvature(p[2]);
        let psi = self.psi(p[2]);
        let a = self.leaf.at(p[0], p[1]);
        let ga = self.leaf.christoffel(p[0], p[1]);
        let mut out = [[[0.0; 3]; 3]; 3];
        for k in 0..2 {
            for al in 0..2 {
                for be in 0..2 {
                    out[k][al][be] = ga[k][al][be];
                }
                out[k][al][2] = if k == al { -h } else { 0.0 };
                out[k][2][al] = out[k][al][2];
                out[2][k][al] = h * psi * a[(k, al)];
            }
        }
        out
    }

    /// Max |Γ_generic − Γ_closed| at `p`.
    pub fn christoffel_mismatch(&self, p: &Point) -> Result<f64> {
        let generic = self.metric.christoffel(p)?;
        let closed = self.christoffel_closed_form(p);
        let mut m = 0.0f64;
        for a in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    m = m.max((generic[a][b][c] - closed[a][b][c]).abs());
                }
            }
        }
        Ok(m)
    }
}

/// `κ_n = Γ³_αβ u^α u^β / g_αβ u^α u^β` for a leaf-tangent `u` at `p`.
pub fn normal_curvature(g: &MetricField, p: &Point, u: [f64; 2]) -> Result<f64> {
    let gam = g.christoffel(p)?;
    let gm = g.at(p)?;
    let (mut num, mut den) = (0.0, 0.0);
    for a in 0..2 {
        for b in 0..2 {
            num += gam[2][a][b] * u[a] * u[b];
            den += gm[(a, b)] * u[a] * u[b];
        }
    }
    if !(den > 0.0) {
        return Err(Error::InvalidParameter("normal curvature needs a non-zero tangent".into()));
    }
    Ok(num / den)
}

/// Max over `points` of `|∇^a_α v̄_β + ∇^a_β v̄_α|` with `v̄_α = a_αβ v^β`.
/// Only the leaf components of `v` enter.
pub fn killing_residual(leaf: &LeafMetric, v: &Field, points: &[Point]) -> Result<f64> {
    let mut worst = 0.0f64;
    for p in points {
        let vv = v.value(p)?;
        let vv = Vector2::new(vv[0], vv[1]);
        let dv: Vec<Vector2<f64>> = (0..2)
            .map(|k| v.partial(p, k).map(|d| Vector2::new(d[0], d[1])))
            .collect::<Result<_>>()?;
        let a = leaf.at(p[0], p[1]);
        let da = leaf.partials(p[0], p[1]);
        let gam = leaf.christoffel(p[0], p[1]);
        let low = a * vv;
        let mut grad = Matrix2::zeros();
        for c in 0..2 {
            let d_low = da[c] * vv + a * dv[c];
            for al in 0..2 {
                grad[(c, al)] = d_low[al] - (0..2).map(|k| gam[k][c][al] * low[k]).sum::<f64>();
            }
        }
        worst = worst.max((grad + grad.transpose()).abs().max());
    }
    Ok(worst)
}

/// Direction of shear and shear rate extracted from `D_g` in a Volterra
/// frame `(l, m, n)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlipSystem {
    pub s: [f64; 3],
    pub n: [f64; 3],
    /// `γ̇ = n·D_g·m`.
    pub gamma_dot: f64,
    /// `D_nl / D_nm`.
    pub delta_g: f64,
    /// `√(1 + δ_g²)`.
    pub s_g: f64,
    /// `ψ` with `cos ψ = s·m = 1/S_g`.
    pub psi: f64,
    pub cos_psi: f64,
    /// `S_g γ̇`.
    pub d: f64,
    /// Max in-plane `|u·D_g·u|` over `u ∈ {l, m, (l+m)/√2}`.
    pub inextensibility: f64,
    /// `n·D_g·n`.
    pub d_nn: f64,
    /// Max `|D(s⊗n + n⊗s)♭ − D_g|`.
    pub reconstruction_residual: f64,
}

impl SlipSystem {
    pub fn s(&self) -> Vector3<f64> {
        Vector3::from(self.s)
    }
}

/// `d` covariant, `g` the metric and `(l, m, n)` a g-orthonormal triple, all
/// in the same basis.
pub fn slip_system(
    d: &Matrix3<f64>,
    g: &Matrix3<f64>,
    l: &Vector3<f64>,
    m: &Vector3<f64>,
    n: &Vector3<f64>,
    tol: f64,
) -> Result<SlipSystem> {
    let basis = [l, m, n];
    let mut gram = 0.0f64;
    for (i, u) in basis.iter().enumerate() {
        for (j, w) in basis.iter().enumerate() {
            let want = if i == j { 1.0 } else { 0.0 };
            gram = gram.max(((u.transpose() * g * *w)[0] - want).abs());
        }
    }
    if gram > 1e-8 {
        return Err(Error::InvalidParameter(format!(
            "slip frame (l, m, n) is not g-orthonormal (residual {gram:.3e})"
        )));
    }
    let quad = |u: &Vector3<f64>, w: &Vector3<f64>| (u.transpose() * d * w)[0];
    let lm = (l + m) / 2f64.sqrt();
    let inext = [quad(l, l), quad(m, m), quad(&lm, &lm)]
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()));
    let scale = d.abs().max();
    if inext > tol * scale {
        return Err(Error::NotInextensible {
            value: inext,
            tolerance: tol * scale,
        });
    }
    let gamma_dot = quad(n, m);
    if gamma_dot.abs() <= tol * scale || gamma_dot == 0.0 {
        return Err(Error::VanishingShearRate);
    }
    let delta_g = quad(n, l) / gamma_dot;
    let s_g = (1.0 + delta_g * delta_g).sqrt();
    let s = (delta_g * l + m) / s_g;
    let dd = s_g * gamma_dot;
    let s_low = g * s;
    let n_low = g * n;
    let recon = dd * (s_low * n_low.transpose() + n_low * s_low.transpose());
    Ok(SlipSystem {
        s: s.into(),
        n: (*n).into(),
        gamma_dot,
        delta_g,
        s_g,
        psi: delta_g.atan(),
        cos_psi: 1.0 / s_g,
        d: dd,
        inextensibility: inext,
        d_nn: quad(n, n),
        reconstruction_residual: (recon - d).abs().max(),
    })
}

/// [`slip_system`] for `D_g` given in orthonormal frame components.
pub fn slip_system_in_frame(d: &Matrix3<f64>, triple: &VolterraTriple, tol: f64) -> Result<SlipSystem> {
    slip_system(d, &Matrix3::identity(), &triple.l(), &triple.m(), &triple.n(), tol)
}

/// Which Orowan-type relation to apply.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "variant")]
pub enum OrowanVariant {
    /// `γ̇ = cos ψ ρb_g v_g`.
    Directional { psi: f64 },
    /// `γ̇ = ρb_g v_g`, shear along the Burgers direction.
    Aligned,
}

/// Shear rate from the line density strength `ρb_g` (equal to `H` on
/// umbilical spaces) and the glide speed.
pub fn orowan_rate(rho_bg: f64, v_g: f64, variant: OrowanVariant) -> Result<f64> {
    if !(v_g > 0.0) {
        return Err(Error::NonPositiveSpeed(v_g));
    }
    match variant {
        OrowanVariant::Aligned => Ok(rho_bg * v_g),
        OrowanVariant::Directional { psi } => {
            if !(psi.abs() < FRAC_PI_2) {
                return Err(Error::InvalidShearAngle(psi));
            }
            Ok(psi.cos() * rho_bg * v_g)
        }
    }
}

/// Power-law parameters: `v_g = v₀ (T/T₀)ⁿ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct StressInput {
    /// kg·cm⁻².
    pub t0: f64,
    pub n_exp: f64,
    /// cm·s⁻¹.
    pub v0: f64,
}

impl StressInput {
    pub fn validate(&self) -> Result<()> {
        if !(self.t0 > 0.0) || !(self.v0 > 0.0) || !(self.n_exp >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "power law needs T0 > 0, v0 > 0, n >= 1 (got {}, {}, {})",
                self.t0, self.v0, self.n_exp
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLaw {
    pub v_g: f64,
    /// `γ̇₀ = H v₀` when `H` is supplied.
    pub gamma_dot_0: Option<f64>,
    /// `γ̇₀ (T/T₀)ⁿ`.
    pub gamma_dot: Option<f64>,
    /// `|γ̇₀ (T/T₀)ⁿ − orowan_rate(H, v_g, aligned)|`.
    pub chain_residual: Option<f64>,
}

pub fn dislocation_speed_power_law(t_resolved: f64, stress: &StressInput, h: Option<f64>) -> Result<PowerLaw> {
    if !(t_resolved >= 0.0) {
        return Err(Error::NegativeStress(t_resolved));
    }
    stress.validate()?;
    let ratio = (t_resolved / stress.t0).powf(stress.n_exp);
    let v_g = stress.v0 * ratio;
    let gamma_dot_0 = h.map(|h| h * stress.v0);
    let gamma_dot = gamma_dot_0.map(|g0| g0 * ratio);
    let chain_residual = match (h, gamma_dot) {
        (Some(h), Some(gd)) if v_g > 0.0 => Some((gd - orowan_rate(h, v_g, OrowanVariant::Aligned)?).abs()),
        _ => None,
    };
    Ok(PowerLaw {
        v_g,
        gamma_dot_0,
        gamma_dot,
        chain_residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Dissipation {
    /// `g^AC g^BD T_AB D_CD`.
    pub value: f64,
    pub nonnegative: bool,
    /// `T_mn = m·T·n` when a slip pair is given.
    pub t_mn: Option<f64>,
    /// `n·D·m` when a slip pair is given.
    pub gamma_dot: Option<f64>,
    /// `|tr(TD_g) − 2 T_mn γ̇|` when a slip pair is given.
    pub identity_residual: Option<f64>,
}

/// `t` and `d` covariant; `slip = (m, n)` enables the shear-form identity.
pub fn dissipation_check(
    t: &Matrix3<f64>,
    d: &Matrix3<f64>,
    g: &Matrix3<f64>,
    slip: Option<(&Vector3<f64>, &Vector3<f64>)>,
) -> Result<Dissipation> {
    let ginv = g
        .try_inverse()
        .ok_or_else(|| Error::InvalidParameter("dissipation needs an invertible metric".into()))?;
    let value = (ginv * t * ginv * d.transpose()).trace();
    let (t_mn, gamma_dot, identity_residual) = match slip {
        Some((m, n)) => {
            let tmn = (m.transpose() * t * n)[0];
            let gd = (n.transpose() * d * m)[0];
            (Some(tmn), Some(gd), Some((value - 2.0 * tmn * gd).abs()))
        }
        None => (None, None, None),
    };
    Ok(Dissipation {
        value,
        nonnegative: value >= 0.0,
        t_mn,
        gamma_dot,
        identity_residual,
    })
}

fn lowered_and_rate(g: &MetricField, v: &Field, p: &Point) -> Result<(Vector3<f64>, Vector3<f64>)> {
    let gm = g.at(p)?;
    let dg = g.partials(p)?;
    let vv = Vector3::from_column_slice(&v.value(p)?[..3]);
    let dv = Vector3::from_column_slice(&v.partial(p, 2)?[..3]);
    Ok((gm * vv, dg[2] * vv + gm * dv))
}

/// Max over `α` of `|½∂₃v_α + H v_α − γ̇ S_g s_α|` at `p` for a leaf-tangent
/// velocity `v` and shear direction `s` (coordinate components).
pub fn shear_relation_residual(
    space: &UmbilicalSpace,
    v: &Field,
    slip: &SlipSystem,
    p: &Point,
) -> Result<f64> {
    let (low, d3) = lowered_and_rate(space.metric(), v, p)?;
    let h = space.mean_curvature(p[2]);
    let s_low = space.metric().at(p)? * slip.s();
    Ok((0..2)
        .map(|a| (0.5 * d3[a] + h * low[a] - slip.gamma_dot * slip.s_g * s_low[a]).abs())
        .fold(0.0, f64::max))
}

/// `|m_α ∂₃m^α − (n/T) ∂₃T|` at `p` for the Burgers direction field `m`
/// and a resolved-stress profile `T(X³)`.
pub fn stress_profile_residual<T>(g: &MetricField, m: &Field, stress: T, n_exp: f64, p: &Point) -> Result<f64>
where
    T: Fn(f64) -> f64,
{
    let gm = g.at(p)?;
    let mv = m.value(p)?;
    let dm = m.partial(p, 2)?;
    let mut lhs = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            lhs += gm[(a, b)] * mv[b] * dm[a];
        }
    }
    let t = stress(p[2]);
    if !(t > 0.0) {
        return Err(Error::NegativeStress(t));
    }
    let dt = d1(&stress, p[2], LEAF_FD_STEP);
    Ok((lhs - n_exp / t * dt).abs())
}

/// `|½ s^α ∂₃v_α|`, the term that separates `γ̇ = cos ψ (H v_g + ½ s^α∂₃v_α)`
/// from `γ̇ = H v_g cos ψ`.
pub fn speed_gradient_term(space: &UmbilicalSpace, v: &Field, s: &Vector3<f64>, p: &Point) -> Result<f64> {
    let (_, d3) = lowered_and_rate(space.metric(), v, p)?;
    Ok(0.5 * (s[0] * d3[0] + s[1] * d3[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::rate_of_stretchings;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_3, FRAC_PI_4};

    fn chart() -> Chart {
        Chart::cube(-1.0, 1.0, 8).unwrap()
    }

    fn space(h0: f64) -> UmbilicalSpace {
        build_umbilical_space(linear_height(h0), LeafMetric::flat(), chart()).unwrap()
    }

    #[test]
    fn linear_height_is_parabolic() {
        let s = space(0.5);
        assert_eq!(s.class, LeafClass::Parabolic);
        assert!(s.christoffel_residual < 1e-8);
        assert!((s.mean_curvature(0.3) - 0.5).abs() < 1e-10);
        assert_eq!(s.psi(0.0), 1.0);
        assert!((normal_curvature(s.metric(), &[0.1, 0.2, 0.3], [0.6, -0.8]).unwrap() - 0.5).abs() < 1e-8);
    }

    #[test]
    fn flat_space() {
        let s = space(0.0);
        let g = s.metric().christoffel(&[0.2, 0.1, -0.3]).unwrap();
        assert!(g.iter().flatten().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn sphere_leaves_are_elliptic() {
        let c = Chart::new([0.5, -1.0, -1.0], [2.5, 1.0, 1.0], [8, 8, 8]).unwrap();
        let s = build_umbilical_space(linear_height(0.5), LeafMetric::round_sphere(), c).unwrap();
        assert_eq!(s.class, LeafClass::Elliptic);
        assert!((LeafMetric::round_sphere().gaussian_curvature(1.0, 0.0) - 1.0).abs() < 1e-6);
        assert!(s.christoffel_residual < 1e-8);
    }

    #[test]
    fn half_plane_leaves_are_hyperbolic() {
        let c = Chart::new([-1.0, 0.5, -1.0], [1.0, 2.0, 1.0], [8, 8, 8]).unwrap();
        let s = build_umbilical_space(linear_height(0.2), LeafMetric::half_plane(), c).unwrap();
        assert_eq!(s.class, LeafClass::Hyperbolic);
        assert!((LeafMetric::half_plane().gaussian_curvature(0.0, 1.0) + 1.0).abs() < 1e-6);
    }

    #[test]
    fn degenerate_leaf_rejected() {
        let r = build_umbilical_space(linear_height(0.5), LeafMetric::round_sphere(), chart());
        assert!(matches!(r, Err(Error::NonPositiveLeafMetric { .. })));
    }

    #[test]
    fn leaf_from_expressions() {
        let a = LeafMetric::from_expressions("1", "0", "sin(X1)^2", 0.0).unwrap();
        assert!((a.gaussian_curvature(1.2, 0.3) - 1.0).abs() < 1e-6);
    }

    fn mn() -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
        (Vector3::x(), Vector3::y(), Vector3::z())
    }

    #[test]
    fn slip_from_shear_form() {
        let (l, m, n) = mn();
        let d = 0.7 * (m * n.transpose() + n * m.transpose());
        let s = slip_system(&d, &Matrix3::identity(), &l, &m, &n, 1e-10).unwrap();
        assert_abs_diff_eq!(s.gamma_dot, 0.7, epsilon = 1e-15);
        assert_eq!(s.delta_g, 0.0);
        assert_eq!(s.s_g, 1.0);
        assert_eq!(s.s(), m);
        assert_eq!(s.cos_psi, 1.0);
        assert!(s.reconstruction_residual < 1e-15);
    }

    #[test]
    fn slip_with_unit_delta() {
        let (l, m, n) = mn();
        let sv = (l + m) / 2f64.sqrt();
        let d = 0.4 * (sv * n.transpose() + n * sv.transpose());
        let s = slip_system(&d, &Matrix3::identity(), &l, &m, &n, 1e-10).unwrap();
        assert_abs_diff_eq!(s.s_g, 2f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(s.cos_psi, 1.0 / 2f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(s.psi, FRAC_PI_4, epsilon = 1e-14);
        assert_abs_diff_eq!(s.d, 0.4, epsilon = 1e-14);
        assert!(s.reconstruction_residual < 1e-8);
    }

    #[test]
    fn extensible_plane_rejected() {
        let (l, m, n) = mn();
        let d = Matrix3::from_diagonal(&Vector3::new(1.0, 0.0, 0.0));
        assert!(matches!(
            slip_system(&d, &Matrix3::identity(), &l, &m, &n, 1e-8),
            Err(Error::NotInextensible { .. })
        ));
        let zero = Matrix3::zeros();
        assert_eq!(
            slip_system(&zero, &Matrix3::identity(), &l, &m, &n, 1e-8),
            Err(Error::VanishingShearRate)
        );
    }

    #[test]
    fn killing_fields_of_the_plane() {
        let c = chart();
        let pts = TestLattice::new(&c, 3).points().to_vec();
        let flat = LeafMetric::flat();
        let rot = Field::analytic(c, FieldKind::Vector, |p| vec![-p[1], p[0], 0.0]);
        let tr = Field::constant(c, FieldKind::Vector, vec![0.3, -0.2, 0.0]);
        let stretch = Field::analytic(c, FieldKind::Vector, |p| vec![p[0], 0.0, 0.0]);
        assert!(killing_residual(&flat, &rot, &pts).unwrap() < 1e-10);
        assert!(killing_residual(&flat, &tr, &pts).unwrap() < 1e-10);
        assert!((killing_residual(&flat, &stretch, &pts).unwrap() - 2.0).abs() < 1e-8);
    }

    #[test]
    fn killing_matches_in_plane_stretching() {
        let s = space(0.5);
        let c = chart();
        let p = [0.2, -0.1, 0.4];
        for v in [
            Field::analytic(c, FieldKind::Vector, |p| vec![-p[1], p[0], 0.0]),
            Field::analytic(c, FieldKind::Vector, |p| vec![p[0], 0.0, 0.0]),
        ] {
            let k = killing_residual(s.leaf(), &v, &[p]).unwrap();
            let d = rate_of_stretchings(s.metric(), &v, &p).unwrap().d;
            let block = d.fixed_view::<2, 2>(0, 0).abs().max() * 2.0 / s.psi(p[2]);
            assert!((k - block).abs() < 1e-8);
        }
    }

    #[test]
    fn orowan_relations() {
        assert_eq!(orowan_rate(0.5, 2.0, OrowanVariant::Aligned).unwrap(), 1.0);
        let d = orowan_rate(0.5, 2.0, OrowanVariant::Directional { psi: FRAC_PI_3 }).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
        let near = orowan_rate(0.5, 2.0, OrowanVariant::Directional { psi: FRAC_PI_2 - 1e-9 }).unwrap();
        assert!(near < 1e-8);
        assert_eq!(orowan_rate(0.5, 0.0, OrowanVariant::Aligned), Err(Error::NonPositiveSpeed(0.0)));
        assert!(matches!(
            orowan_rate(0.5, 1.0, OrowanVariant::Directional { psi: 2.0 }),
            Err(Error::InvalidShearAngle(_))
        ));
    }

    #[test]
    fn power_law() {
        let st = StressInput { t0: 1.0, n_exp: 2.0, v0: 1.0 };
        assert_eq!(dislocation_speed_power_law(1.0, &st, None).unwrap().v_g, 1.0);
        assert_eq!(dislocation_speed_power_law(2.0, &st, None).unwrap().v_g, 4.0);
        let st = StressInput { t0: 1.0, n_exp: 3.0, v0: 3.0 };
        let r = dislocation_speed_power_law(1.0, &st, Some(0.5)).unwrap();
        assert_eq!(r.gamma_dot_0, Some(1.5));
        assert_eq!(r.gamma_dot, Some(1.5));
        assert!(r.chain_residual.unwrap() < 1e-12);
        assert_eq!(dislocation_speed_power_law(-1.0, &st, None), Err(Error::NegativeStress(-1.0)));
    }

    #[test]
    fn dissipation() {
        let (_, m, n) = mn();
        let form = m * n.transpose() + n * m.transpose();
        let g = Matrix3::identity();
        let r = dissipation_check(&(2.0 * form), &(0.7 * form), &g, Some((&m, &n))).unwrap();
        assert!((r.value - 2.8).abs() < 1e-12 && r.nonnegative);
        assert!(r.identity_residual.unwrap() < 1e-10);
        let r = dissipation_check(&form, &Matrix3::zeros(), &g, None).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.nonnegative);
        let r = dissipation_check(&(-form), &(0.7 * form), &g, None).unwrap();
        assert!((r.value + 1.4).abs() < 1e-12 && !r.nonnegative);
    }

    #[test]
    fn shear_relation_for_aligned_flow() {
        let h0 = 0.5;
        let (v0, beta): (f64, f64) = (0.8, 0.6);
        let s = space(h0);
        let c = chart();
        let v = Field::analytic(c, FieldKind::Vector, move |p| {
            let e = (2.0 * h0 * p[2]).exp();
            vec![v0 * e * beta.cos(), v0 * e * beta.sin(), 0.0]
        });
        let m_field = Field::analytic(c, FieldKind::Vector, move |p| {
            let e = (h0 * p[2]).exp();
            vec![e * beta.cos(), e * beta.sin(), 0.0]
        });
        for p in [[0.1, 0.2, 0.3], [-0.4, 0.3, -0.5]] {
            let g = s.metric().at(&p).unwrap();
            let d = rate_of_stretchings(s.metric(), &v, &p).unwrap().d;
            let m = Vector3::from_column_slice(&m_field.value(&p).unwrap());
            let n = Vector3::z();
            let e = (h0 * p[2]).exp();
            let l = Vector3::new(e * beta.sin(), -e * beta.cos(), 0.0);
            let slip = slip_system(&d, &g, &l, &m, &n, 1e-8).unwrap();
            let v_g = v0 * (h0 * p[2]).exp();
            assert!((slip.gamma_dot - h0 * v_g).abs() < 1e-8);
            assert!(shear_relation_residual(&s, &v, &slip, &p).unwrap() < 1e-6);
            let n_exp = 2.0;
            let stress = move |x3: f64| (h0 * x3 / n_exp).exp();
            assert!(stress_profile_residual(s.metric(), &m_field, stress, n_exp, &p).unwrap() < 1e-8);
        }
    }
}
