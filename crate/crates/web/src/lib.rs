//! JSON-in, JSON-out bindings for the browser page in `www/`.

use heom_core::model::ModelParams;
use heom_core::observables::Observation;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Hierarchy size the page will propagate on the main thread.
pub const MAX_DEMO_STATES: u128 = 5_000;

#[derive(Debug, Serialize)]
pub struct Series {
    pub w_s_t: Vec<f64>,
    pub xi_q: Vec<f64>,
    pub xi_p: Vec<f64>,
    pub xi_qq: Vec<f64>,
    pub xi_pp: Vec<f64>,
    pub norm: Vec<f64>,
}

impl Series {
    fn from_points(points: &[Observation], omega_s: f64) -> Self {
        let col = |f: fn(&Observation) -> f64| points.iter().map(f).collect();
        Self {
            w_s_t: points.iter().map(|p| omega_s * p.t).collect(),
            xi_q: col(|p| p.xi_q),
            xi_p: col(|p| p.xi_p),
            xi_qq: col(|p| p.xi_qq),
            xi_pp: col(|p| p.xi_pp),
            norm: col(|p| p.norm),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct BathSummary {
    pub lambda: Vec<f64>,
    pub states: u128,
    pub kappa: f64,
}

fn parse(config: &str) -> Result<ModelParams, String> {
    let params: ModelParams = if config.trim().is_empty() {
        ModelParams::default()
    } else {
        serde_json::from_str(config).map_err(|e| e.to_string())?
    };
    params.validate().map_err(|e| e.to_string())?;
    Ok(params)
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

pub fn default_config_json() -> String {
    serde_json::to_string_pretty(&ModelParams::default()).expect("defaults serialise")
}

/// λ_k, hierarchy size and counter-term coefficient for a configuration.
pub fn bath_summary_json(config: &str) -> Result<String, String> {
    let params = parse(config)?;
    let coeffs = params.bath_coefficients().map_err(|e| e.to_string())?;
    let kappa = params.system_spec().map_err(|e| e.to_string())?.kappa;
    to_json(&BathSummary {
        lambda: coeffs.lambda,
        states: params.sizing().states,
        kappa,
    })
}

/// Propagates the hierarchy; refuses sizes above [`MAX_DEMO_STATES`].
pub fn simulate_json(config: &str) -> Result<String, String> {
    let params = parse(config)?;
    let sizing = params.sizing();
    if sizing.states > MAX_DEMO_STATES {
        return Err(format!(
            "{sizing}; the demo is limited to {MAX_DEMO_STATES} states"
        ));
    }
    let model = params.build().map_err(|e| e.to_string())?;
    let trajectory = model.run().map_err(|e| e.to_string())?;
    to_json(&Series::from_points(
        &trajectory.points,
        params.system.omega_s,
    ))
}

/// Exact Gaussian moments for the same parameters.
pub fn oracle_json(config: &str) -> Result<String, String> {
    let params = parse(config)?;
    let (run, _) = params.moments_oracle().map_err(|e| e.to_string())?;
    to_json(&Series::from_points(
        &run.trajectory.points,
        params.system.omega_s,
    ))
}

#[wasm_bindgen(js_name = defaultConfig)]
pub fn default_config() -> String {
    default_config_json()
}

#[wasm_bindgen(js_name = bathSummary)]
pub fn bath_summary(config: &str) -> Result<String, JsError> {
    bath_summary_json(config).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn simulate(config: &str) -> Result<String, JsError> {
    simulate_json(config).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn oracle(config: &str) -> Result<String, JsError> {
    oracle_json(config).map_err(|e| JsError::new(&e))
}
