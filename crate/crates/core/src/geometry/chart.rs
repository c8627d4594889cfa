use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in chart coordinates X = (X^1, X^2, X^3), in cm.
pub type Point = [f64; 3];

/// Axis-aligned coordinate box with a sampling grid.
///
/// `grid_shape` counts cells per axis; a gridded field stores
/// `grid_shape[i] + 1` nodes along axis `i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    lower: Point,
    upper: Point,
    grid_shape: [usize; 3],
}

impl Chart {
    pub const MIN_CELLS: usize = 4;

    pub fn new(lower: Point, upper: Point, grid_shape: [usize; 3]) -> Result<Self> {
        for i in 0..3 {
            if !(lower[i].is_finite() && upper[i].is_finite()) {
                return Err(Error::InvalidChart(format!("non-finite bound on axis {i}")));
            }
            if upper[i] <= lower[i] {
                return Err(Error::InvalidChart(format!(
                    "upper[{i}] = {} must exceed lower[{i}] = {}",
                    upper[i], lower[i]
                )));
            }
            if grid_shape[i] < Self::MIN_CELLS {
                return Err(Error::InvalidChart(format!(
                    "grid_shape[{i}] = {} is below the {} cells needed by the stencils",
                    grid_shape[i],
                    Self::MIN_CELLS
                )));
            }
        }
        Ok(Self {
            lower,
            upper,
            grid_shape,
        })
    }

    /// Cube `[lo, hi]^3` with `cells` cells per axis.
    pub fn cube(lo: f64, hi: f64, cells: usize) -> Result<Self> {
        Self::new([lo; 3], [hi; 3], [cells; 3])
    }

    pub fn lower(&self) -> Point {
        self.lower
    }

    pub fn upper(&self) -> Point {
        self.upper
    }

    pub fn grid_shape(&self) -> [usize; 3] {
        self.grid_shape
    }

    pub fn extent(&self) -> [f64; 3] {
        [
            self.upper[0] - self.lower[0],
            self.upper[1] - self.lower[1],
            self.upper[2] - self.lower[2],
        ]
    }

    pub fn spacing(&self) -> [f64; 3] {
        let e = self.extent();
        [
            e[0] / self.grid_shape[0] as f64,
            e[1] / self.grid_shape[1] as f64,
            e[2] / self.grid_shape[2] as f64,
        ]
    }

    pub fn node_count(&self) -> usize {
        self.grid_shape.iter().map(|n| n + 1).product()
    }

    pub fn node(&self, idx: [usize; 3]) -> Point {
        let h = self.spacing();
        [
            self.lower[0] + idx[0] as f64 * h[0],
            self.lower[1] + idx[1] as f64 * h[1],
            self.lower[2] + idx[2] as f64 * h[2],
        ]
    }

    /// Closed-box membership with a roundoff allowance of 1e-12 of the extent.
    pub fn contains(&self, p: &Point) -> bool {
        let e = self.extent();
        (0..3).all(|i| {
            let slack = 1e-12 * e[i].max(1.0);
            p[i].is_finite() && p[i] >= self.lower[i] - slack && p[i] <= self.upper[i] + slack
        })
    }

    pub fn check(&self, p: &Point) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::PointOutsideChart { point: *p })
        }
    }

    /// Distance from `p` to the nearest face, measured in grid cells, per axis.
    pub fn margin_cells(&self, p: &Point) -> [f64; 3] {
        let h = self.spacing();
        [0, 1, 2].map(|i| ((p[i] - self.lower[i]).min(self.upper[i] - p[i])) / h[i])
    }

    pub fn with_grid(&self, grid_shape: [usize; 3]) -> Result<Self> {
        Self::new(self.lower, self.upper, grid_shape)
    }
}

/// Deterministic set of points used for invariant checks: a uniform
/// interior lattice plus seeded random points.
#[derive(Debug, Clone)]
pub struct TestLattice {
    points: Vec<Point>,
}

impl TestLattice {
    pub const DEFAULT_PER_AXIS: usize = 5;
    pub const DEFAULT_RANDOM: usize = 16;

    pub fn new(chart: &Chart, seed: u64) -> Self {
        Self::with_counts(chart, Self::DEFAULT_PER_AXIS, Self::DEFAULT_RANDOM, seed)
    }

    /// `per_axis^3` points at `(i + 1) / (per_axis + 1)` of each extent, then
    /// `random` uniform points drawn from the box shrunk by 10% per side.
    pub fn with_counts(chart: &Chart, per_axis: usize, random: usize, seed: u64) -> Self {
        let lo = chart.lower();
        let e = chart.extent();
        let mut points = Vec::with_capacity(per_axis.pow(3) + random);
        for i in 0..per_axis {
            for j in 0..per_axis {
                for k in 0..per_axis {
                    let f = |n: usize| (n + 1) as f64 / (per_axis + 1) as f64;
                    points.push([lo[0] + f(i) * e[0], lo[1] + f(j) * e[1], lo[2] + f(k) * e[2]]);
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..random {
            let p = [0, 1, 2].map(|a| lo[a] + e[a] * rng.gen_range(0.1..0.9));
            points.push(p);
        }
        Self { points }
    }

    pub fn random_only(chart: &Chart, random: usize, seed: u64) -> Self {
        Self::with_counts(chart, 0, random, seed)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
