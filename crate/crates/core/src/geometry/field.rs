use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::chart::{Chart, Point};
use crate::error::{Error, Result};

/// Index position of a tensor slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variance {
    Up,
    Down,
}

/// Rank signature of a field. Components are stored row-major over the slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FieldKind {
    Scalar,
    Vector,
    Covector,
    Tensor(Vec<Variance>),
    /// Component bundle without tensorial meaning (e.g. a 2x2 leaf metric).
    Components(usize),
}

impl FieldKind {
    pub fn rank(&self) -> usize {
        match self {
            FieldKind::Scalar => 0,
            FieldKind::Vector | FieldKind::Covector => 1,
            FieldKind::Tensor(slots) => slots.len(),
            FieldKind::Components(_) => 0,
        }
    }

    pub fn slots(&self) -> Vec<Variance> {
        match self {
            FieldKind::Scalar | FieldKind::Components(_) => vec![],
            FieldKind::Vector => vec![Variance::Up],
            FieldKind::Covector => vec![Variance::Down],
            FieldKind::Tensor(s) => s.clone(),
        }
    }

    pub fn components(&self) -> usize {
        match self {
            FieldKind::Components(n) => *n,
            other => 3usize.pow(other.rank() as u32),
        }
    }

    pub fn covariant2() -> Self {
        FieldKind::Tensor(vec![Variance::Down, Variance::Down])
    }

    pub fn mixed2() -> Self {
        FieldKind::Tensor(vec![Variance::Up, Variance::Down])
    }
}

/// Evaluation rule behind a [`Field`]. Callers guarantee `p` lies in the chart.
pub trait FieldSource: Send + Sync {
    fn value(&self, p: &Point) -> Vec<f64>;
    fn partial(&self, p: &Point, axis: usize) -> Vec<f64>;
    fn is_gridded(&self) -> bool {
        false
    }
}

type ValueFn = dyn Fn(&Point) -> Vec<f64> + Send + Sync;
type PartialFn = dyn Fn(&Point, usize) -> Vec<f64> + Send + Sync;

/// Default step for finite-difference partials of closed-form fields (cm).
pub const ANALYTIC_FD_STEP: f64 = 1e-3;

struct Analytic {
    value: Arc<ValueFn>,
    partial: Option<Arc<PartialFn>>,
    fd_step: f64,
}

impl FieldSource for Analytic {
    fn value(&self, p: &Point) -> Vec<f64> {
        (self.value)(p)
    }

    fn partial(&self, p: &Point, axis: usize) -> Vec<f64> {
        match &self.partial {
            Some(df) => df(p, axis),
            None => central_difference(&*self.value, p, axis, self.fd_step),
        }
    }
}

/// Fourth-order central difference of `f` along `axis` with step `h`.
pub fn central_difference<F>(f: &F, p: &Point, axis: usize, h: f64) -> Vec<f64>
where
    F: Fn(&Point) -> Vec<f64> + ?Sized,
{
    let shifted = |k: f64| {
        let mut q = *p;
        q[axis] += k * h;
        f(&q)
    };
    let (m2, m1, p1, p2) = (shifted(-2.0), shifted(-1.0), shifted(1.0), shifted(2.0));
    m2.iter()
        .zip(&m1)
        .zip(&p1)
        .zip(&p2)
        .map(|(((a, b), c), d)| (a - 8.0 * b + 8.0 * c - d) / (12.0 * h))
        .collect()
}

/// Samples on the chart nodes, evaluated by local tensor-product Lagrange
/// interpolation of degree five (degree four on 4-cell axes). Partials are
/// exact derivatives of the same local interpolant, so the stencil shifts to
/// one-sided form near the faces.
struct Gridded {
    chart: Chart,
    n_comp: usize,
    data: Vec<f64>,
}

const STENCIL: usize = 6;

impl Gridded {
    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        let s = self.chart.grid_shape();
        ((i * (s[1] + 1) + j) * (s[2] + 1) + k) * self.n_comp
    }

    /// Stencil start and (value, derivative) weights along one axis.
    fn weights(&self, x: f64, axis: usize) -> (usize, Vec<f64>, Vec<f64>) {
        let cells = self.chart.grid_shape()[axis];
        let nodes = cells + 1;
        let h = self.chart.spacing()[axis];
        let s = (x - self.chart.lower()[axis]) / h;
        let w = STENCIL.min(nodes);
        let cell = (s.floor().max(0.0) as usize).min(cells - 1);
        let start = cell
            .saturating_sub(w / 2 - 1)
            .min(nodes - w);
        let xs: Vec<f64> = (0..w).map(|j| (start + j) as f64).collect();
        let mut val = vec![0.0; w];
        let mut der = vec![0.0; w];
        for j in 0..w {
            let mut prod = 1.0;
            for k in 0..w {
                if k != j {
                    prod *= (s - xs[k]) / (xs[j] - xs[k]);
                }
            }
            val[j] = prod;
            let mut dsum = 0.0;
            for m in 0..w {
                if m == j {
                    continue;
                }
                let mut term = 1.0 / (xs[j] - xs[m]);
                for k in 0..w {
                    if k != j && k != m {
                        term *= (s - xs[k]) / (xs[j] - xs[k]);
                    }
                }
                dsum += term;
            }
            der[j] = dsum / h;
        }
        (start, val, der)
    }

    fn combine(&self, p: &Point, deriv_axis: Option<usize>) -> Vec<f64> {
        let wts: Vec<(usize, Vec<f64>)> = (0..3)
            .map(|a| {
                let (start, val, der) = self.weights(p[a], a);
                (start, if deriv_axis == Some(a) { der } else { val })
            })
            .collect();
        let mut out = vec![0.0; self.n_comp];
        for (di, wi) in wts[0].1.iter().enumerate() {
            for (dj, wj) in wts[1].1.iter().enumerate() {
                let wij = wi * wj;
                for (dk, wk) in wts[2].1.iter().enumerate() {
                    let w = wij * wk;
                    let base = self.index(wts[0].0 + di, wts[1].0 + dj, wts[2].0 + dk);
                    for (c, o) in out.iter_mut().enumerate() {
                        *o += w * self.data[base + c];
                    }
                }
            }
        }
        out
    }
}

impl FieldSource for Gridded {
    fn value(&self, p: &Point) -> Vec<f64> {
        self.combine(p, None)
    }

    fn partial(&self, p: &Point, axis: usize) -> Vec<f64> {
        self.combine(p, Some(axis))
    }

    fn is_gridded(&self) -> bool {
        true
    }
}

/// A tensor field over a chart, backed by closed-form functions or by grid
/// samples. All higher modules go through [`Field::value`] and
/// [`Field::partial`] and never see the representation.
#[derive(Clone)]
pub struct Field {
    chart: Chart,
    kind: FieldKind,
    source: Arc<dyn FieldSource>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("chart", &self.chart)
            .field("kind", &self.kind)
            .field("gridded", &self.source.is_gridded())
            .finish()
    }
}

impl Field {
    /// Closed-form field; partials by fourth-order central differences.
    pub fn analytic<F>(chart: Chart, kind: FieldKind, value: F) -> Self
    where
        F: Fn(&Point) -> Vec<f64> + Send + Sync + 'static,
    {
        Self::from_source(
            chart,
            kind,
            Analytic {
                value: Arc::new(value),
                partial: None,
                fd_step: ANALYTIC_FD_STEP,
            },
        )
    }

    /// Closed-form field with closed-form partials. The partials are checked
    /// against central differences (relative 1e-5) at 8 seeded random points.
    pub fn analytic_with_partials<F, D>(chart: Chart, kind: FieldKind, value: F, partial: D) -> Result<Self>
    where
        F: Fn(&Point) -> Vec<f64> + Send + Sync + 'static,
        D: Fn(&Point, usize) -> Vec<f64> + Send + Sync + 'static,
    {
        let field = Self::analytic_with_partials_unchecked(chart, kind, value, partial);
        field.validate_partials(8, 0x5eed)?;
        Ok(field)
    }

    /// As [`Field::analytic_with_partials`] without the construction check;
    /// for derived fields whose partials follow from already-validated parents.
    pub fn analytic_with_partials_unchecked<F, D>(chart: Chart, kind: FieldKind, value: F, partial: D) -> Self
    where
        F: Fn(&Point) -> Vec<f64> + Send + Sync + 'static,
        D: Fn(&Point, usize) -> Vec<f64> + Send + Sync + 'static,
    {
        Self::from_source(
            chart,
            kind,
            Analytic {
                value: Arc::new(value),
                partial: Some(Arc::new(partial)),
                fd_step: ANALYTIC_FD_STEP,
            },
        )
    }

    pub fn from_source<S: FieldSource + 'static>(chart: Chart, kind: FieldKind, source: S) -> Self {
        Self {
            chart,
            kind,
            source: Arc::new(source),
        }
    }

    /// Grid samples in node order (axis 0 slowest, components fastest).
    pub fn gridded(chart: Chart, kind: FieldKind, data: Vec<f64>) -> Result<Self> {
        let n_comp = kind.components();
        if data.len() != chart.node_count() * n_comp {
            return Err(Error::InvalidField(format!(
                "expected {} samples, got {}",
                chart.node_count() * n_comp,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidField("non-finite grid sample".into()));
        }
        Ok(Self::from_source(chart, kind, Gridded { chart, n_comp, data }))
    }

    pub fn constant(chart: Chart, kind: FieldKind, components: Vec<f64>) -> Self {
        let n = components.len();
        Self::analytic_with_partials_unchecked(chart, kind, move |_| components.clone(), move |_, _| vec![0.0; n])
    }

    /// Samples this field on its chart's nodes.
    pub fn sample(&self) -> Result<Self> {
        self.sample_on(self.chart)
    }

    /// Samples this field on the nodes of `grid` (same box, possibly finer).
    pub fn sample_on(&self, grid: Chart) -> Result<Self> {
        let s = grid.grid_shape();
        let n_comp = self.kind.components();
        let mut data = Vec::with_capacity(grid.node_count() * n_comp);
        for i in 0..=s[0] {
            for j in 0..=s[1] {
                for k in 0..=s[2] {
                    data.extend(self.value(&grid.node([i, j, k]))?);
                }
            }
        }
        Self::gridded(grid, self.kind.clone(), data)
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    pub fn components(&self) -> usize {
        self.kind.components()
    }

    pub fn is_gridded(&self) -> bool {
        self.source.is_gridded()
    }

    pub fn value(&self, p: &Point) -> Result<Vec<f64>> {
        self.chart.check(p)?;
        Ok(self.source.value(p))
    }

    pub fn partial(&self, p: &Point, axis: usize) -> Result<Vec<f64>> {
        self.chart.check(p)?;
        Ok(self.source.partial(p, axis))
    }

    /// Evaluation without the chart check; for derived fields whose callers
    /// already validated the point.
    pub fn value_unchecked(&self, p: &Point) -> Vec<f64> {
        self.source.value(p)
    }

    pub fn partial_unchecked(&self, p: &Point, axis: usize) -> Vec<f64> {
        self.source.partial(p, axis)
    }

    fn validate_partials(&self, points: usize, seed: u64) -> Result<()> {
        let lo = self.chart.lower();
        let e = self.chart.extent();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..points {
            let p = [0, 1, 2].map(|a| lo[a] + e[a] * rng.gen_range(0.1..0.9));
            let vals = self.source.value(&p);
            for axis in 0..3 {
                let exact = self.source.partial(&p, axis);
                let fd = central_difference(&|q: &Point| self.source.value(q), &p, axis, ANALYTIC_FD_STEP);
                let scale = exact
                    .iter()
                    .chain(vals.iter())
                    .fold(1.0f64, |m, v| m.max(v.abs()));
                let err = exact
                    .iter()
                    .zip(&fd)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                if err / scale > 1e-5 {
                    return Err(Error::PartialMismatch {
                        axis,
                        point: p,
                        relative_error: err / scale,
                    });
                }
            }
        }
        Ok(())
    }
}

/// `∂_A f` at `p`. Gridded fields need `p` at least two cells from every face
/// along the differentiated axis.
pub fn partial_derivative(f: &Field, axis: usize, p: &Point) -> Result<Vec<f64>> {
    if axis > 2 {
        return Err(Error::InvalidParameter(format!("coordinate index {axis} out of range")));
    }
    f.chart().check(p)?;
    if f.is_gridded() && f.chart().margin_cells(p)[axis] < 2.0 - 1e-9 {
        return Err(Error::StencilOutOfRange { point: *p, axis });
    }
    f.partial(p, axis)
}

/// Exterior derivative of a covector field: `(dω)_AB = ∂_A ω_B − ∂_B ω_A`.
pub fn exterior_derivative(omega: &Field) -> Field {
    let w = omega.clone();
    Field::analytic(*omega.chart(), FieldKind::covariant2(), move |p| {
        let d: Vec<Vec<f64>> = (0..3).map(|a| w.partial_unchecked(p, a)).collect();
        let mut out = vec![0.0; 9];
        for a in 0..3 {
            for b in 0..3 {
                out[3 * a + b] = d[a][b] - d[b][a];
            }
        }
        out
    })
}
