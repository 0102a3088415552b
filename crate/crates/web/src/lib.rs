//! wasm-bindgen entry points for the static demo page in `www/`.
//!
//! Every function takes and returns JSON text so the page needs no glue
//! beyond `JSON.parse`. The plain `*_json` functions hold the logic and are
//! what the native tests exercise.

use serde::Deserialize;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use ratechannel::feasible::project_to_feasible;
use ratechannel::io::{ChannelJson, PmfJson, PointJson, SystemJson};
use ratechannel::rate::{blahut_arimoto_rd, rate_channel_fn, DistortionSpec};
use ratechannel::Error;

fn parse<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<T, String> {
    serde_json::from_str(text).map_err(|e| format!("{what}: {e}"))
}

fn fail(e: Error) -> String {
    e.to_string()
}

/// Minimum rate over the reconstruction distributions compatible with the
/// source and backward channel.
pub fn rate_channel_json(source: &str, channel: &str) -> Result<Value, String> {
    let p = parse::<PmfJson>(source, "source")?.to_pmf().map_err(fail)?;
    let w = parse::<ChannelJson>(channel, "channel")?.to_channel().map_err(fail)?;
    let r = rate_channel_fn(&p, &w).map_err(fail)?;
    Ok(json!({
        "status": r.status,
        "rate_bits": r.rate_bits,
        "optimizer": r.optimizer.map(|q| q.into_vec()),
    }))
}

#[derive(Deserialize)]
struct MatrixJson {
    d: Vec<Vec<f64>>,
}

/// `points` samples of R(D) between the smallest achievable distortion and
/// the zero-rate distortion.
pub fn rd_curve_json(source: &str, distortion: &str, points: usize) -> Result<Value, String> {
    let p = parse::<PmfJson>(source, "source")?.to_pmf().map_err(fail)?;
    let d = parse::<MatrixJson>(distortion, "distortion")?.d;
    let spec = DistortionSpec::new(d, 0.0).map_err(fail)?;
    let lo = spec.min_distortion(&p);
    let (hi, _) = spec.zero_rate_distortion(&p);
    let points = points.clamp(2, 200);
    let mut curve = Vec::with_capacity(points);
    for k in 0..points {
        let level = lo + (hi - lo) * k as f64 / (points - 1) as f64;
        let r = blahut_arimoto_rd(&p, &spec.with_level(level)).map_err(fail)?;
        curve.push(json!({ "level": level, "rate_bits": r.rate_bits }));
    }
    Ok(json!({ "min_distortion": lo, "zero_rate_distortion": hi, "curve": curve }))
}

/// Projects a simplex point onto `{A x = b, x >= 0}`.
pub fn project_json(system: &str, x0: &str) -> Result<Value, String> {
    let sys = parse::<SystemJson>(system, "system")?.to_system().map_err(fail)?;
    let x0 = parse::<PointJson>(x0, "x0")?.into_vec();
    let r = project_to_feasible(&sys, &x0).map_err(fail)?;
    Ok(json!({
        "x": r.x,
        "l1_distance": r.l1_distance,
        "delta": r.delta,
        "bound": r.bound,
        "active_set": r.active_set,
        "residual_inf": sys.residual_inf(&r.x),
    }))
}

fn to_js(v: Result<Value, String>) -> Result<String, JsError> {
    v.map(|v| v.to_string()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn rate_channel(source: &str, channel: &str) -> Result<String, JsError> {
    to_js(rate_channel_json(source, channel))
}

#[wasm_bindgen]
pub fn rd_curve(source: &str, distortion: &str, points: usize) -> Result<String, JsError> {
    to_js(rd_curve_json(source, distortion, points))
}

#[wasm_bindgen]
pub fn project(system: &str, x0: &str) -> Result<String, JsError> {
    to_js(project_json(system, x0))
}
