//! Time evolution of congruence kinematics: curvature κ, angle ϑ, and the
//! rates ζ and ω along arclength s.
//!
//! Real branch:
//!
//! ```text
//! ∂_s ζ = ω κ sin ϑ
//! ∂_t κ = −cos ϑ ∂_s ω
//! κ (ζ − ∂_t ϑ) + sin ϑ ∂_s ω = 0
//! ```
//!
//! Complex branch (ψ = κe^{iϑ}, ω complex):
//! `∂_t ψ + ∂_s ω − iζψ = 0`, `∂_s ζ = Im(ω̄ ψ)`.
//!
//! Three equations for four unknowns: one variable is prescribed by a
//! [`Closure`].

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

/// Below this curvature the system leaves its domain.
pub const KAPPA_COLLAPSE: f64 = 1e-8;
const MIN_SIN_THETA: f64 = 1e-10;
const PRESCRIBED_DT: f64 = 1e-3;

/// A prescribed function of (s, t).
pub type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    Clamped,
}

/// Which variable is given.
#[derive(Clone)]
pub enum Closure {
    /// ω(s, t) given; κ and ϑ are stepped and ζ follows from ∂_s ζ = ωκ sin ϑ,
    /// anchored at its initial value at the first node.
    Omega(ScalarFn),
    /// Complex ω = re + i·im given; same anchoring as [`Closure::Omega`].
    OmegaComplex(ScalarFn, ScalarFn),
    /// ζ(s, t) given; ω = ∂_s ζ / (κ sin ϑ).
    Zeta(ScalarFn),
    /// ϑ(s, t) given; (ω, ζ) solve the s-system from their initial values at
    /// the first node and κ is stepped.
    Theta(ScalarFn),
}

impl std::fmt::Debug for Closure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Closure::Omega(_) => "Closure::Omega",
            Closure::OmegaComplex(..) => "Closure::OmegaComplex",
            Closure::Zeta(_) => "Closure::Zeta",
            Closure::Theta(_) => "Closure::Theta",
        })
    }
}

impl Closure {
    pub fn constant_omega(w: f64) -> Self {
        Closure::Omega(Arc::new(move |_, _| w))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Closure::Omega(_) => "omega",
            Closure::OmegaComplex(..) => "omega_complex",
            Closure::Zeta(_) => "zeta",
            Closure::Theta(_) => "theta",
        }
    }
}

/// Data at one time on a uniform s-grid. With periodic boundaries the grid
/// holds one period without the repeated endpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KinematicSlice {
    pub s0: f64,
    pub ds: f64,
    pub kappa: Vec<f64>,
    pub theta: Vec<f64>,
    pub zeta: Vec<f64>,
    pub omega: Vec<f64>,
    pub omega_im: Option<Vec<f64>>,
    pub boundary: Boundary,
}

impl KinematicSlice {
    pub fn len(&self) -> usize {
        self.kappa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kappa.is_empty()
    }

    pub fn s(&self, j: usize) -> f64 {
        self.s0 + j as f64 * self.ds
    }

    fn validate(&self) -> Result<()> {
        let n = self.len();
        if n < 6 {
            return Err(Error::InvalidParameter(format!("kinematic grid needs >= 6 nodes, got {n}")));
        }
        if !(self.ds > 0.0) {
            return Err(Error::InvalidParameter(format!("ds must be positive, got {}", self.ds)));
        }
        let lens = [self.theta.len(), self.zeta.len(), self.omega.len()];
        if lens.iter().any(|&l| l != n) || self.omega_im.as_ref().is_some_and(|w| w.len() != n) {
            return Err(Error::InvalidParameter("kinematic arrays differ in length".into()));
        }
        check_kappa(&self.kappa)
    }
}

fn check_kappa(kappa: &[f64]) -> Result<()> {
    for (node, &k) in kappa.iter().enumerate() {
        if !(k >= KAPPA_COLLAPSE) {
            return Err(Error::CurvatureCollapse { node, kappa: k });
        }
    }
    Ok(())
}

/// κ, ϑ, ζ, ω on a uniform (s, t) lattice; arrays are indexed `[time][node]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KinematicProfile {
    pub s: Vec<f64>,
    pub t: Vec<f64>,
    pub kappa: Vec<Vec<f64>>,
    pub theta: Vec<Vec<f64>>,
    pub zeta: Vec<Vec<f64>>,
    pub omega: Vec<Vec<f64>>,
    pub omega_im: Option<Vec<Vec<f64>>>,
    pub boundary: Boundary,
}

impl KinematicProfile {
    pub fn ds(&self) -> f64 {
        self.s[1] - self.s[0]
    }

    pub fn slice(&self, n: usize) -> KinematicSlice {
        KinematicSlice {
            s0: self.s[0],
            ds: self.ds(),
            kappa: self.kappa[n].clone(),
            theta: self.theta[n].clone(),
            zeta: self.zeta[n].clone(),
            omega: self.omega[n].clone(),
            omega_im: self.omega_im.as_ref().map(|w| w[n].clone()),
            boundary: self.boundary,
        }
    }

    /// The static congruence with ϑ ≡ −π/2 and κ ≡ κ₀, repeated at `times`.
    pub fn static_congruence(
        kappa0: f64,
        omega0: f64,
        zeta0: f64,
        nodes: usize,
        ds: f64,
        times: &[f64],
    ) -> Result<Self> {
        let s: Vec<f64> = (0..nodes).map(|j| j as f64 * ds).collect();
        let mut omega = Vec::with_capacity(nodes);
        let mut zeta = Vec::with_capacity(nodes);
        for &sj in &s {
            let (w, z) = static_congruence_solution(kappa0, omega0, zeta0, sj)?;
            omega.push(w);
            zeta.push(z);
        }
        let m = times.len();
        Ok(Self {
            s,
            t: times.to_vec(),
            kappa: vec![vec![kappa0; nodes]; m],
            theta: vec![vec![-std::f64::consts::FRAC_PI_2; nodes]; m],
            zeta: vec![zeta; m],
            omega: vec![omega; m],
            omega_im: None,
            boundary: Boundary::Clamped,
        })
    }
}

/// Fornberg weights for the `order`-th derivative at `z` from nodes `x`.
pub fn fd_weights(z: f64, x: &[f64], order: usize) -> Vec<f64> {
    let n = x.len();
    let mut c = vec![vec![0.0; order + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] *= c4 / c3;
        }
        c1 = c2;
    }
    c.iter().map(|row| row[order]).collect()
}

/// Fourth-order first derivative on a uniform grid.
fn d_uniform(f: &[f64], h: f64, boundary: Boundary) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    match boundary {
        Boundary::Periodic => {
            for j in 0..n {
                let at = |k: isize| f[(j as isize + k).rem_euclid(n as isize) as usize];
                out[j] = (8.0 * (at(1) - at(-1)) - (at(2) - at(-2))) / (12.0 * h);
            }
        }
        Boundary::Clamped => {
            let width = 5.min(n);
            for (j, slot) in out.iter_mut().enumerate() {
                let start = j.saturating_sub(width / 2).min(n - width);
                let xs: Vec<f64> = (start..start + width).map(|k| k as f64).collect();
                let w = fd_weights(j as f64, &xs, 1);
                *slot = w.iter().zip(&f[start..start + width]).map(|(a, b)| a * b).sum::<f64>() / h;
            }
        }
    }
    out
}

/// Fourth-order cumulative integral `F_j = ∫_{x0}^{x_j} f` of uniform samples,
/// integrating the local cubic interpolant over each cell.
fn cumulative(f: &[f64], h: f64, boundary: Boundary) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    let at = |k: isize| -> f64 {
        match boundary {
            Boundary::Periodic => f[k.rem_euclid(n as isize) as usize],
            Boundary::Clamped => f[k.clamp(0, n as isize - 1) as usize],
        }
    };
    for j in 0..n - 1 {
        let cell = if boundary == Boundary::Clamped && (j == 0 || j + 2 >= n) {
            let start = if j == 0 { 0 } else { n - 4 };
            let xs: Vec<f64> = (start..start + 4).map(|k| k as f64).collect();
            cell_integral(&xs, &f[start..start + 4], j as f64, j as f64 + 1.0) * h
        } else {
            let j = j as isize;
            h * (-at(j - 1) + 13.0 * at(j) + 13.0 * at(j + 1) - at(j + 2)) / 24.0
        };
        out[j + 1] = out[j] + cell;
    }
    out
}

/// ∫_a^b of the Lagrange interpolant through (xs, ys) by 3-point Gauss.
fn cell_integral(xs: &[f64], ys: &[f64], a: f64, b: f64) -> f64 {
    let lag = |x: f64| -> f64 {
        (0..xs.len())
            .map(|i| {
                let mut w = ys[i];
                for k in 0..xs.len() {
                    if k != i {
                        w *= (x - xs[k]) / (xs[i] - xs[k]);
                    }
                }
                w
            })
            .sum()
    };
    let r = (0.6f64).sqrt();
    let (m, hw) = (0.5 * (a + b), 0.5 * (b - a));
    hw * (5.0 * lag(m - r * hw) + 8.0 * lag(m) + 5.0 * lag(m + r * hw)) / 9.0
}

/// Cubic midpoint value between nodes j and j+1.
fn midpoint(f: &[f64], j: usize, boundary: Boundary) -> f64 {
    let n = f.len() as isize;
    let j = j as isize;
    match boundary {
        Boundary::Periodic => {
            let at = |k: isize| f[k.rem_euclid(n) as usize];
            (-at(j - 1) + 9.0 * at(j) + 9.0 * at(j + 1) - at(j + 2)) / 16.0
        }
        Boundary::Clamped => {
            let start = (j - 1).clamp(0, n - 4) as usize;
            let xs: Vec<f64> = (start..start + 4).map(|k| k as f64).collect();
            let w = fd_weights(j as f64 + 0.5, &xs, 0);
            w.iter().zip(&f[start..start + 4]).map(|(a, b)| a * b).sum()
        }
    }
}

fn prescribed_rate(f: &ScalarFn, s: f64, t: f64) -> f64 {
    let h = PRESCRIBED_DT;
    (8.0 * (f(s, t + h) - f(s, t - h)) - (f(s, t + 2.0 * h) - f(s, t - 2.0 * h))) / (12.0 * h)
}

/// Diagnostics fields (ζ, ω, ω_im) implied by the closure at time `t`.
struct Derived {
    theta: Vec<f64>,
    zeta: Vec<f64>,
    omega: Vec<f64>,
    omega_im: Option<Vec<f64>>,
    /// ∂_t κ and ∂_t ϑ.
    dkappa: Vec<f64>,
    dtheta: Vec<f64>,
}

struct System<'a> {
    closure: &'a Closure,
    grid: Vec<f64>,
    ds: f64,
    boundary: Boundary,
    zeta_anchor: f64,
    omega_anchor: f64,
}

impl System<'_> {
    fn derive(&self, t: f64, kappa: &[f64], theta_state: &[f64]) -> Result<Derived> {
        check_kappa(kappa)?;
        let n = kappa.len();
        let (ds, bc) = (self.ds, self.boundary);
        match self.closure {
            Closure::Omega(w) | Closure::OmegaComplex(w, _) => {
                let omega: Vec<f64> = self.grid.iter().map(|&s| w(s, t)).collect();
                let omega_im = match self.closure {
                    Closure::OmegaComplex(_, wi) => Some(self.grid.iter().map(|&s| wi(s, t)).collect::<Vec<_>>()),
                    _ => None,
                };
                let zero = vec![0.0; n];
                let wi = omega_im.as_deref().unwrap_or(&zero);
                // ∂_s ζ = Im(ω̄ ψ)
                let src: Vec<f64> = (0..n)
                    .map(|j| {
                        let psi = Complex64::from_polar(kappa[j], theta_state[j]);
                        (Complex64::new(omega[j], wi[j]).conj() * psi).im
                    })
                    .collect();
                let zeta: Vec<f64> = cumulative(&src, ds, bc).iter().map(|v| v + self.zeta_anchor).collect();
                let dwr = d_uniform(&omega, ds, bc);
                let dwi = d_uniform(wi, ds, bc);
                let mut dk = vec![0.0; n];
                let mut dth = vec![0.0; n];
                for j in 0..n {
                    let rot = Complex64::new(dwr[j], dwi[j]) * Complex64::from_polar(1.0, -theta_state[j]);
                    dk[j] = -rot.re;
                    dth[j] = zeta[j] - rot.im / kappa[j];
                }
                Ok(Derived {
                    theta: theta_state.to_vec(),
                    zeta,
                    omega,
                    omega_im,
                    dkappa: dk,
                    dtheta: dth,
                })
            }
            Closure::Zeta(z) => {
                let zeta: Vec<f64> = self.grid.iter().map(|&s| z(s, t)).collect();
                let dz = d_uniform(&zeta, ds, bc);
                let mut omega = vec![0.0; n];
                for j in 0..n {
                    let sn = theta_state[j].sin();
                    if sn.abs() < MIN_SIN_THETA {
                        return Err(Error::ClosureMissing(format!(
                            "zeta closure needs sin(theta) != 0 (node {j})"
                        )));
                    }
                    omega[j] = dz[j] / (kappa[j] * sn);
                }
                let dw = d_uniform(&omega, ds, bc);
                let dk = (0..n).map(|j| -theta_state[j].cos() * dw[j]).collect();
                let dth = (0..n).map(|j| zeta[j] + theta_state[j].sin() * dw[j] / kappa[j]).collect();
                Ok(Derived {
                    theta: theta_state.to_vec(),
                    zeta,
                    omega,
                    omega_im: None,
                    dkappa: dk,
                    dtheta: dth,
                })
            }
            Closure::Theta(th) => {
                let theta: Vec<f64> = self.grid.iter().map(|&s| th(s, t)).collect();
                // s-system: ω' = κ(∂_tϑ − ζ)/sin ϑ, ζ' = ωκ sin ϑ.
                let rhs = |s: f64, k: f64, w: f64, z: f64| -> Result<(f64, f64)> {
                    let th_v = th(s, t);
                    let sn = th_v.sin();
                    if sn.abs() < MIN_SIN_THETA {
                        return Err(Error::ClosureMissing("theta closure needs sin(theta) != 0".into()));
                    }
                    Ok((k * (prescribed_rate(th, s, t) - z) / sn, w * k * sn))
                };
                let mut omega = vec![self.omega_anchor; n];
                let mut zeta = vec![self.zeta_anchor; n];
                for j in 0..n - 1 {
                    let (s, h) = (self.grid[j], ds);
                    let km = midpoint(kappa, j, bc);
                    let (w, z) = (omega[j], zeta[j]);
                    let k1 = rhs(s, kappa[j], w, z)?;
                    let k2 = rhs(s + 0.5 * h, km, w + 0.5 * h * k1.0, z + 0.5 * h * k1.1)?;
                    let k3 = rhs(s + 0.5 * h, km, w + 0.5 * h * k2.0, z + 0.5 * h * k2.1)?;
                    let k4 = rhs(s + h, kappa[j + 1], w + h * k3.0, z + h * k3.1)?;
                    omega[j + 1] = w + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
                    zeta[j + 1] = z + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
                }
                let mut dk = vec![0.0; n];
                let mut dth = vec![0.0; n];
                for j in 0..n {
                    let (dw, _) = rhs(self.grid[j], kappa[j], omega[j], zeta[j])?;
                    dk[j] = -theta[j].cos() * dw;
                    dth[j] = prescribed_rate(th, self.grid[j], t);
                }
                Ok(Derived {
                    theta,
                    zeta,
                    omega,
                    omega_im: None,
                    dkappa: dk,
                    dtheta: dth,
                })
            }
        }
    }
}

/// Max-norm consistency residuals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residuals {
    /// `∂_s ζ − Im(ω̄ψ)`.
    pub r1: f64,
    /// `∂_t κ + Re(∂_s ω e^{−iϑ})`.
    pub r2: f64,
    /// `κ(ζ − ∂_t ϑ) − Im(∂_s ω e^{−iϑ})`.
    pub r3: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.r1.max(self.r2).max(self.r3)
    }

    fn merge(self, o: Residuals) -> Residuals {
        Residuals {
            r1: self.r1.max(o.r1),
            r2: self.r2.max(o.r2),
            r3: self.r3.max(o.r3),
        }
    }
}

/// Result of [`evolve_kinematics`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evolution {
    pub profile: KinematicProfile,
    pub closure: String,
    /// Max residual over all stored times.
    pub residual: Residuals,
    /// max |∂_t κ| over all steps (zero when ϑ ≡ ±π/2 is prescribed).
    pub max_kappa_rate: f64,
}

/// Method of lines: fourth-order s-differences and classical RK4 in time.
pub fn evolve_kinematics(
    initial: &KinematicSlice,
    closure: Option<&Closure>,
    steps: usize,
    dt: f64,
) -> Result<Evolution> {
    let closure = closure.ok_or_else(|| {
        Error::ClosureMissing("prescribe one of omega, zeta or theta; three equations cannot fix four unknowns".into())
    })?;
    initial.validate()?;
    if !(dt > 0.0) || steps == 0 {
        return Err(Error::InvalidParameter(format!("need dt > 0 and steps > 0 (dt {dt}, steps {steps})")));
    }
    if matches!(closure, Closure::OmegaComplex(..)) != initial.omega_im.is_some() && initial.omega_im.is_some() {
        return Err(Error::ClosureMissing("complex omega data needs the omega_complex closure".into()));
    }
    let n = initial.len();
    let grid: Vec<f64> = (0..n).map(|j| initial.s(j)).collect();
    let sys = System {
        closure,
        grid: grid.clone(),
        ds: initial.ds,
        boundary: initial.boundary,
        zeta_anchor: initial.zeta[0],
        omega_anchor: initial.omega[0],
    };

    let mut kappa = initial.kappa.clone();
    let mut theta = initial.theta.clone();
    let mut t = 0.0;
    let mut times = vec![0.0];
    let d0 = sys.derive(t, &kappa, &theta)?;
    let mut max_rate = d0.dkappa.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut store = Store::new(&kappa, &d0);

    let axpy = |x: &[f64], k: &[f64], h: f64| -> Vec<f64> { x.iter().zip(k).map(|(a, b)| a + h * b).collect() };
    for _ in 0..steps {
        let a = sys.derive(t, &kappa, &theta)?;
        let b = sys.derive(t + 0.5 * dt, &axpy(&kappa, &a.dkappa, 0.5 * dt), &axpy(&theta, &a.dtheta, 0.5 * dt))?;
        let c = sys.derive(t + 0.5 * dt, &axpy(&kappa, &b.dkappa, 0.5 * dt), &axpy(&theta, &b.dtheta, 0.5 * dt))?;
        let d = sys.derive(t + dt, &axpy(&kappa, &c.dkappa, dt), &axpy(&theta, &c.dtheta, dt))?;
        for j in 0..n {
            kappa[j] += dt / 6.0 * (a.dkappa[j] + 2.0 * b.dkappa[j] + 2.0 * c.dkappa[j] + d.dkappa[j]);
            theta[j] += dt / 6.0 * (a.dtheta[j] + 2.0 * b.dtheta[j] + 2.0 * c.dtheta[j] + d.dtheta[j]);
        }
        t += dt;
        times.push(t);
        let now = sys.derive(t, &kappa, &theta)?;
        max_rate = now.dkappa.iter().fold(max_rate, |m, v| m.max(v.abs()));
        store.push(&kappa, &now);
    }

    let profile = KinematicProfile {
        s: grid,
        t: times,
        kappa: store.kappa,
        theta: store.theta,
        zeta: store.zeta,
        omega: store.omega,
        omega_im: store.omega_im,
        boundary: initial.boundary,
    };
    let mut residual = Residuals {
        r1: 0.0,
        r2: 0.0,
        r3: 0.0,
    };
    for k in 0..profile.t.len() {
        residual = residual.merge(consistency_residual(&profile, k));
    }
    Ok(Evolution {
        profile,
        closure: closure.name().into(),
        residual,
        max_kappa_rate: max_rate,
    })
}

struct Store {
    kappa: Vec<Vec<f64>>,
    theta: Vec<Vec<f64>>,
    zeta: Vec<Vec<f64>>,
    omega: Vec<Vec<f64>>,
    omega_im: Option<Vec<Vec<f64>>>,
}

impl Store {
    fn new(kappa: &[f64], d: &Derived) -> Self {
        let mut s = Self {
            kappa: vec![],
            theta: vec![],
            zeta: vec![],
            omega: vec![],
            omega_im: d.omega_im.as_ref().map(|_| vec![]),
        };
        s.push(kappa, d);
        s
    }

    fn push(&mut self, kappa: &[f64], d: &Derived) {
        self.kappa.push(kappa.to_vec());
        self.theta.push(d.theta.clone());
        self.zeta.push(d.zeta.clone());
        self.omega.push(d.omega.clone());
        if let (Some(store), Some(w)) = (self.omega_im.as_mut(), d.omega_im.as_ref()) {
            store.push(w.clone());
        }
    }
}

/// Time derivative on the stored lattice at index `n`, up to fourth order.
fn time_derivative(series: &[Vec<f64>], t: &[f64], n: usize, j: usize) -> f64 {
    let m = t.len();
    if m < 2 {
        return 0.0;
    }
    let width = 5.min(m);
    let start = n.saturating_sub(width / 2).min(m - width);
    let w = fd_weights(t[n], &t[start..start + width], 1);
    (0..width).map(|i| w[i] * series[start + i][j]).sum()
}

/// Pointwise residuals at time index `n`, one vector per equation.
pub fn residual_nodes(profile: &KinematicProfile, n: usize) -> [Vec<f64>; 3] {
    let ds = profile.ds();
    let bc = profile.boundary;
    let kappa = &profile.kappa[n];
    let theta = &profile.theta[n];
    let zeta = &profile.zeta[n];
    let omega = &profile.omega[n];
    let nodes = kappa.len();
    let zero = vec![0.0; nodes];
    let omega_im = profile.omega_im.as_ref().map(|w| &w[n]).unwrap_or(&zero);
    let dz = d_uniform(zeta, ds, bc);
    let dwr = d_uniform(omega, ds, bc);
    let dwi = d_uniform(omega_im, ds, bc);
    let mut out = [vec![0.0; nodes], vec![0.0; nodes], vec![0.0; nodes]];
    for j in 0..nodes {
        let psi = Complex64::from_polar(kappa[j], theta[j]);
        let src = (Complex64::new(omega[j], omega_im[j]).conj() * psi).im;
        let rot = Complex64::new(dwr[j], dwi[j]) * Complex64::from_polar(1.0, -theta[j]);
        let dk = time_derivative(&profile.kappa, &profile.t, n, j);
        let dth = time_derivative(&profile.theta, &profile.t, n, j);
        out[0][j] = dz[j] - src;
        out[1][j] = dk + rot.re;
        out[2][j] = kappa[j] * (zeta[j] - dth) - rot.im;
    }
    out
}

/// Max-norm residuals of the consistency system at time index `n`.
pub fn consistency_residual(profile: &KinematicProfile, n: usize) -> Residuals {
    let r = residual_nodes(profile, n);
    let mx = |v: &Vec<f64>| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    Residuals {
        r1: mx(&r[0]),
        r2: mx(&r[1]),
        r3: mx(&r[2]),
    }
}

/// Static congruence of torsion-free edge lines: `(ω + iζ)(s) = (ω₀ + iζ₀) e^{−iκ₀ s}`.
pub fn static_congruence_solution(kappa0: f64, omega0: f64, zeta0: f64, s: f64) -> Result<(f64, f64)> {
    if !(kappa0 > 0.0) {
        return Err(Error::NonPositiveCurvature(kappa0));
    }
    let (sn, cs) = (kappa0 * s).sin_cos();
    Ok((omega0 * cs + zeta0 * sn, -omega0 * sn + zeta0 * cs))
}

/// RK4 solution of `ω' = κ₀ζ, ζ' = −κ₀ω` sampled every `ds` up to `s_end`.
pub fn integrate_static(kappa0: f64, omega0: f64, zeta0: f64, s_end: f64, ds: f64) -> Result<Vec<[f64; 3]>> {
    if !(kappa0 > 0.0) {
        return Err(Error::NonPositiveCurvature(kappa0));
    }
    if !(ds > 0.0) {
        return Err(Error::InvalidParameter(format!("ds must be positive, got {ds}")));
    }
    let f = |w: f64, z: f64| (kappa0 * z, -kappa0 * w);
    let steps = (s_end / ds).ceil() as usize;
    let mut out = vec![[0.0, omega0, zeta0]];
    let (mut s, mut w, mut z) = (0.0, omega0, zeta0);
    for _ in 0..steps {
        let h = ds.min(s_end - s);
        let k1 = f(w, z);
        let k2 = f(w + 0.5 * h * k1.0, z + 0.5 * h * k1.1);
        let k3 = f(w + 0.5 * h * k2.0, z + 0.5 * h * k2.1);
        let k4 = f(w + h * k3.0, z + h * k3.1);
        w += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        z += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        s += h;
        out.push([s, w, z]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI, TAU};

    fn periodic_slice(n: usize) -> KinematicSlice {
        let ds = TAU / n as f64;
        let s: Vec<f64> = (0..n).map(|j| j as f64 * ds).collect();
        KinematicSlice {
            s0: 0.0,
            ds,
            kappa: s.iter().map(|x| 1.0 + 0.2 * x.cos()).collect(),
            theta: s.iter().map(|x| 1.0 + 0.1 * x.sin()).collect(),
            zeta: vec![0.0; n],
            omega: vec![0.0; n],
            omega_im: None,
            boundary: Boundary::Periodic,
        }
    }

    #[test]
    fn fornberg_matches_classic_stencil() {
        let w = fd_weights(0.0, &[-2.0, -1.0, 0.0, 1.0, 2.0], 1);
        let expected = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn cumulative_integral_is_fourth_order() {
        let err = |n: usize, bc: Boundary| {
            let h = TAU / n as f64;
            let f: Vec<f64> = (0..n).map(|j| (j as f64 * h).cos()).collect();
            cumulative(&f, h, bc)
                .iter()
                .enumerate()
                .fold(0.0f64, |m, (j, v)| m.max((v - (j as f64 * h).sin()).abs()))
        };
        for bc in [Boundary::Periodic, Boundary::Clamped] {
            let (e1, e2) = (err(32, bc), err(64, bc));
            assert!(e2 < 1e-5 && e1 / e2 > 14.0, "{bc:?}: {e1} {e2}");
        }
    }

    #[test]
    fn static_solution_values() {
        let (w, z) = static_congruence_solution(1.0, 1.0, 0.0, FRAC_PI_2).unwrap();
        assert!(w.abs() < 1e-15 && (z + 1.0).abs() < 1e-15);
        assert_eq!(static_congruence_solution(2.0, 0.3, 0.4, 0.0).unwrap(), (0.3, 0.4));
        assert!(matches!(
            static_congruence_solution(0.0, 1.0, 0.0, 1.0),
            Err(Error::NonPositiveCurvature(_))
        ));
    }

    #[test]
    fn numerical_static_matches_closed_form() {
        let pts = integrate_static(1.0, 1.0, 0.5, 10.0, 1e-3).unwrap();
        for [s, w, z] in pts {
            let (we, ze) = static_congruence_solution(1.0, 1.0, 0.5, s).unwrap();
            assert!((w - we).abs() < 1e-10 && (z - ze).abs() < 1e-10);
            assert!((w * w + z * z - 1.25).abs() < 1e-8);
        }
    }

    #[test]
    fn stationary_without_rates() {
        let init = periodic_slice(32);
        let ev = evolve_kinematics(&init, Some(&Closure::constant_omega(0.0)), 10, 0.01).unwrap();
        let last = ev.profile.t.len() - 1;
        assert_eq!(ev.profile.kappa[last], init.kappa);
        assert_eq!(ev.profile.theta[last], init.theta);
        assert!(ev.residual.max() < 1e-12);
    }

    #[test]
    fn missing_closure() {
        assert!(matches!(
            evolve_kinematics(&periodic_slice(16), None, 1, 0.1),
            Err(Error::ClosureMissing(_))
        ));
    }

    #[test]
    fn static_profile_residuals_and_detector() {
        let mut p = KinematicProfile::static_congruence(1.0, 1.0, 0.0, 2001, 1e-3, &[0.0, 0.1, 0.2, 0.3, 0.4]).unwrap();
        let r = consistency_residual(&p, 2);
        assert!(r.max() < 1e-6, "{r:?}");
        p.zeta[2][1000] += 1.0;
        let bad = residual_nodes(&p, 2);
        assert!(bad[0][1001].abs() > 1.0);
    }

    #[test]
    fn theta_closure_keeps_static_congruence() {
        let (k0, w0, z0) = (1.0, 1.0, 0.0);
        let n = 401;
        let ds = PI / (n - 1) as f64;
        let mut init = KinematicSlice {
            s0: 0.0,
            ds,
            kappa: vec![k0; n],
            theta: vec![-FRAC_PI_2; n],
            zeta: vec![0.0; n],
            omega: vec![0.0; n],
            omega_im: None,
            boundary: Boundary::Clamped,
        };
        for j in 0..n {
            let (w, z) = static_congruence_solution(k0, w0, z0, init.s(j)).unwrap();
            init.omega[j] = w;
            init.zeta[j] = z;
        }
        let closure = Closure::Theta(Arc::new(|_, _| -FRAC_PI_2));
        let ev = evolve_kinematics(&init, Some(&closure), 20, 0.05).unwrap();
        assert!(ev.max_kappa_rate < 1e-10);
        let last = ev.profile.t.len() - 1;
        for j in 0..n {
            assert!((ev.profile.kappa[last][j] - k0).abs() < 1e-6);
            let (w, z) = static_congruence_solution(k0, w0, z0, init.s(j)).unwrap();
            assert!((ev.profile.omega[last][j] - w).abs() < 1e-8);
            assert!((ev.profile.zeta[last][j] - z).abs() < 1e-8);
        }
    }

    #[test]
    fn zeta_closure_converges_at_fourth_order() {
        let closure = Closure::Zeta(Arc::new(|s, t| 0.1 * (s + t).sin()));
        let coarse = evolve_kinematics(&periodic_slice(32), Some(&closure), 20, 0.05).unwrap();
        let fine = evolve_kinematics(&periodic_slice(64), Some(&closure), 40, 0.025).unwrap();
        let ratio = coarse.residual.max() / fine.residual.max();
        assert!(ratio >= 8.0, "ratio {ratio}, {:?} vs {:?}", coarse.residual, fine.residual);
    }

    #[test]
    fn complex_branch_reduces_to_real() {
        let init = periodic_slice(32);
        let w: ScalarFn = Arc::new(|s, _| 0.05 * s.cos());
        let real = evolve_kinematics(&init, Some(&Closure::Omega(w.clone())), 5, 0.01).unwrap();
        let cplx = evolve_kinematics(&init, Some(&Closure::OmegaComplex(w, Arc::new(|_, _| 0.0))), 5, 0.01).unwrap();
        for (a, b) in real.profile.kappa.iter().flatten().zip(cplx.profile.kappa.iter().flatten()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn collapse_detected() {
        let mut init = periodic_slice(16);
        init.kappa[3] = 0.0;
        assert!(matches!(
            evolve_kinematics(&init, Some(&Closure::constant_omega(0.0)), 1, 0.1),
            Err(Error::CurvatureCollapse { node: 3, .. })
        ));
    }
}
