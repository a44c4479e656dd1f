//! Shared fixtures for the criterion benchmarks under `benches/`.

use biocontrol_core::{ImpulseParams, ResponseModel};

/// Unit Lotka-Volterra responses.
pub fn lotka_volterra() -> ResponseModel {
    ResponseModel::lotka_volterra(1.0, 1.0, 1.0)
}

/// `d = 1`, half of each population harvested every unit of time.
pub fn schedule(t_r: f64, mu: f64) -> ImpulseParams {
    ImpulseParams::new(1.0, 0.5, 0.5, 1.0, t_r, mu).expect("valid fixture")
}

pub const HOLLING_G: &str = "0.8*x/(1 + 0.5*x)";
