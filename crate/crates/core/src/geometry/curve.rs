use super::chart::{Chart, Point};
use super::field::Field;
use super::quadrature::Polyline;
use crate::error::{Error, Result};

/// Below this Euclidean norm a tracing field counts as vanishing.
pub const MIN_FIELD_NORM: f64 = 1e-10;

/// Output of [`integral_curve`]: the traced samples and whether tracing
/// stopped because the curve left the chart.
#[derive(Debug, Clone)]
pub struct TracedCurve {
    pub samples: Vec<Point>,
    pub params: Vec<f64>,
    pub exited: bool,
}

impl TracedCurve {
    pub fn endpoint(&self) -> Point {
        *self.samples.last().expect("traced curve always has its start point")
    }

    pub fn to_polyline(&self) -> Result<Polyline> {
        Polyline::open(self.samples.clone())
    }
}

/// Integral curve `dx/ds = v(x)` of a vector field by classical RK4.
pub fn integral_curve(v: &Field, start: Point, param_length: f64, step: f64) -> Result<TracedCurve> {
    let chart = *v.chart();
    trace(&chart, start, param_length, step, |p| {
        let c = v.value_unchecked(p);
        Ok([c[0], c[1], c[2]])
    })
}

/// RK4 tracing of an arbitrary direction function inside `chart`.
///
/// The last step is shortened so the curve ends exactly at `param_length`.
/// Leaving the chart is soft: the samples so far are returned with
/// `exited = true`.
pub fn trace<F>(chart: &Chart, start: Point, param_length: f64, step: f64, mut dir: F) -> Result<TracedCurve>
where
    F: FnMut(&Point) -> Result<[f64; 3]>,
{
    if !(step > 0.0) || !param_length.is_finite() || param_length < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "integral curve needs step > 0 and a non-negative length (step {step}, length {param_length})"
        )));
    }
    chart.check(&start)?;
    let mut eval = |p: &Point| -> Result<Option<[f64; 3]>> {
        if !chart.contains(p) {
            return Ok(None);
        }
        let d = dir(p)?;
        let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
        if !(n >= MIN_FIELD_NORM) {
            return Err(Error::VanishingField { point: *p, norm: n });
        }
        Ok(Some(d))
    };
    let n_steps = (param_length / step).ceil() as usize;
    let mut samples = vec![start];
    let mut params = vec![0.0];
    let mut x = start;
    let mut s = 0.0;
    for _ in 0..n_steps {
        let h = step.min(param_length - s);
        if h <= 0.0 {
            break;
        }
        let add = |a: &Point, k: &[f64; 3], f: f64| [a[0] + f * k[0], a[1] + f * k[1], a[2] + f * k[2]];
        let Some(k1) = eval(&x)? else { break };
        let Some(k2) = eval(&add(&x, &k1, 0.5 * h))? else {
            return Ok(TracedCurve { samples, params, exited: true });
        };
        let Some(k3) = eval(&add(&x, &k2, 0.5 * h))? else {
            return Ok(TracedCurve { samples, params, exited: true });
        };
        let Some(k4) = eval(&add(&x, &k3, h))? else {
            return Ok(TracedCurve { samples, params, exited: true });
        };
        let next = [0, 1, 2].map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
        if !chart.contains(&next) {
            return Ok(TracedCurve { samples, params, exited: true });
        }
        x = next;
        s += h;
        samples.push(x);
        params.push(s);
    }
    Ok(TracedCurve {
        samples,
        params,
        exited: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FieldKind;
    use std::f64::consts::PI;

    fn rotation(chart: Chart) -> Field {
        Field::analytic(chart, FieldKind::Vector, |p| vec![-p[1], p[0], 0.0])
    }

    fn circle_error(step: f64) -> f64 {
        let v = rotation(Chart::cube(-2.0, 2.0, 8).unwrap());
        let c = integral_curve(&v, [1.0, 0.0, 0.0], 2.0 * PI, step).unwrap();
        let e = c.endpoint();
        ((e[0] - 1.0).powi(2) + e[1].powi(2) + e[2].powi(2)).sqrt()
    }

    #[test]
    fn constant_field_endpoint() {
        let v = Field::constant(Chart::cube(-2.0, 2.0, 8).unwrap(), FieldKind::Vector, vec![1.0, 0.0, 0.0]);
        let c = integral_curve(&v, [0.0; 3], 1.0, 0.1).unwrap();
        let e = c.endpoint();
        assert!((e[0] - 1.0).abs() < 1e-14 && e[1] == 0.0 && e[2] == 0.0);
        assert!(!c.exited);
    }

    #[test]
    fn circle_closes() {
        assert!(circle_error(1e-3) < 1e-6);
    }

    #[test]
    fn fourth_order_convergence() {
        let e1 = circle_error(0.2);
        let e2 = circle_error(0.1);
        assert!(e1 / e2 >= 8.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn zero_field_is_an_error() {
        let v = Field::constant(Chart::cube(-2.0, 2.0, 8).unwrap(), FieldKind::Vector, vec![0.0; 3]);
        assert!(matches!(
            integral_curve(&v, [0.0; 3], 1.0, 0.1),
            Err(Error::VanishingField { .. })
        ));
    }

    #[test]
    fn leaving_the_chart_is_soft() {
        let v = Field::constant(Chart::cube(-1.0, 1.0, 8).unwrap(), FieldKind::Vector, vec![1.0, 0.0, 0.0]);
        let c = integral_curve(&v, [0.0; 3], 5.0, 0.1).unwrap();
        assert!(c.exited);
        assert!(c.endpoint()[0] <= 1.0 + 1e-12);
        assert!(c.endpoint()[0] > 0.85);
    }
}
