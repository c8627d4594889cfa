//! Browser bindings: each entry point returns a JSON string, or a JSON object
//! with an `error` field.

use std::f64::consts::TAU;

use disloc::burgers::{burgers_circuit, burgers_surface};
use disloc::congruence::frenet_along;
use disloc::density::dislocation_tensor;
use disloc::frame::{bundle_for, CoframeSpec, MetricField};
use disloc::geometry::{Chart, Field, FieldKind, ParametricPatch, DEFAULT_NODES};
use disloc::glide::{dislocation_speed_power_law, orowan_rate, OrowanVariant, StressInput};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn finish(r: disloc::Result<Value>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e.to_string() }).to_string(),
    }
}

/// Burgers vector of a screw frame around a `width × height` rectangle in the
/// X¹X² plane, by circuit and by surface integral.
#[wasm_bindgen]
pub fn screw_burgers(b0: f64, width: f64, height: f64) -> String {
    finish((|| {
        let half = 0.5 * width.abs().max(height.abs()) + 0.5;
        let chart = Chart::cube(-half, half, 4)?;
        let b = bundle_for(&CoframeSpec::Screw { b0 }, chart)?;
        let patch = ParametricPatch::rectangle([-0.5 * width, -0.5 * height, 0.0], (0, 1), width, height);
        let circuit = burgers_circuit(&b.frame, &patch.boundary(1)?, DEFAULT_NODES)?.vector();
        let surface = burgers_surface(&dislocation_tensor(&b.frame)?, &patch, None, DEFAULT_NODES)?.vector();
        Ok(json!({
            "circuit": [circuit[0], circuit[1], circuit[2]],
            "surface": [surface[0], surface[1], surface[2]],
            "expected_b3": b0 * width * height,
            "stokes_residual": (circuit - surface).norm(),
        }))
    })())
}

/// Curvature and torsion of a helical congruence of radius `r` and pitch
/// parameter `c`, sampled at `samples` angles around the axis.
#[wasm_bindgen]
pub fn helix_frenet(r: f64, c: f64, samples: usize) -> String {
    finish((|| {
        let chart = Chart::cube(-2.0 * r.abs() - 1.0, 2.0 * r.abs() + 1.0, 4)?;
        let g = MetricField::flat(chart);
        let l = Field::analytic(chart, FieldKind::Vector, move |p| {
            let rho = (p[0] * p[0] + p[1] * p[1]).sqrt();
            let n = (rho * rho + c * c).sqrt();
            vec![-p[1] / n, p[0] / n, c / n]
        });
        let mut rows = Vec::new();
        for k in 0..samples.max(1) {
            let phi = TAU * k as f64 / samples.max(1) as f64;
            let st = frenet_along(&g, &l, &[r * phi.cos(), r * phi.sin(), 0.0], None)?;
            rows.push(json!({ "phi": phi, "kappa": st.kappa, "tau": st.tau }));
        }
        let d = r * r + c * c;
        Ok(json!({ "samples": rows, "kappa_exact": r / d, "tau_exact": c / d }))
    })())
}

/// Shear rate from the power law and the Orowan relation on an umbilical
/// foliation with mean curvature `h`.
#[wasm_bindgen]
pub fn orowan(h: f64, stress: f64, t0: f64, n_exp: f64, v0: f64, psi: f64) -> String {
    finish((|| {
        let law = dislocation_speed_power_law(stress, &StressInput { t0, n_exp, v0 }, Some(h))?;
        Ok(json!({
            "v_g": law.v_g,
            "gamma_dot_aligned": orowan_rate(h, law.v_g, OrowanVariant::Aligned)?,
            "gamma_dot_directional": orowan_rate(h, law.v_g, OrowanVariant::Directional { psi })?,
            "chain_residual": law.chain_residual,
        }))
    })())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: String) -> Value {
        serde_json::from_str(&s).unwrap()
    }

    #[test]
    fn screw_matches_area() {
        let v = parse(screw_burgers(0.1, 1.0, 2.0));
        assert!((v["circuit"][2].as_f64().unwrap() - 0.2).abs() < 1e-12);
        assert!(v["stokes_residual"].as_f64().unwrap() < 1e-12);
    }

    #[test]
    fn helix_curvature() {
        let v = parse(helix_frenet(1.0, 0.5, 4));
        for s in v["samples"].as_array().unwrap() {
            assert!((s["kappa"].as_f64().unwrap() - 0.8).abs() < 1e-6);
            assert!((s["tau"].as_f64().unwrap() - 0.4).abs() < 1e-6);
        }
    }

    #[test]
    fn orowan_unit_rate_and_errors() {
        let v = parse(orowan(0.5, 1.0, 1.0, 3.0, 2.0, 0.0));
        assert_eq!(v["gamma_dot_aligned"].as_f64().unwrap(), 1.0);
        assert!(parse(orowan(0.5, -1.0, 1.0, 3.0, 2.0, 0.0))["error"].is_string());
    }
}
