//! Numerical substrate: charts, fields, differentiation, quadrature and
//! integral curves over a 3D coordinate box.

mod chart;
mod curve;
mod field;
mod quadrature;

pub use chart::{Chart, Point, TestLattice};
pub use curve::{integral_curve, trace, TracedCurve, MIN_FIELD_NORM};
pub use field::{
    central_difference, exterior_derivative, partial_derivative, Field, FieldKind, FieldSource, Variance,
    ANALYTIC_FD_STEP,
};
pub use quadrature::{
    box_integral, line_integral, line_integral_with, surface_integral, GaussLegendre, ParametricPatch, PatchNode,
    Polyline, DEFAULT_NODES,
};
