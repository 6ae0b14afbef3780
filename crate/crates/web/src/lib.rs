//! Browser bindings: spectrogram with detected fans, one-dimensional
//! propagation with predicted against detected sets, and the singular space
//! of a symbol. Every export takes and returns JSON strings.

use nalgebra::DVector;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use isowf::harness::{detect_factors, evolve_factors};
use isowf::linalg::DEFAULT_TOL_RANK;
use isowf::propagator::{Method, PropagatorSpec};
use isowf::stft::{stft, Datum, DetectParams, Grid, SampledDistribution};
use isowf::symplectic::{hamilton_map, FlowKind, QuadraticJson, QuadraticSymbol};
use isowf::wavefront::{predict_propagation, PropagationParams};
use isowf::{Error, Result};

/// Longest side of the magnitude image handed to the page.
const IMAGE_SIDE: usize = 128;
const CONTAIN_TOL_DEG: f64 = 5.0;

fn parse<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    Ok(serde_json::from_str(text)?)
}

fn one_dimensional(datum: &Datum, extent: f64, points: usize) -> Result<SampledDistribution> {
    if datum.n() != 1 {
        return Err(Error::NotApplicable("the demo handles one-dimensional data".into()));
    }
    datum.sample(Grid::new(extent, points)?)
}

fn image(u: &SampledDistribution, width: f64) -> Result<Value> {
    let field = stft(u, width)?;
    let every = (u.grid().points / IMAGE_SIDE).max(1);
    let xs: Vec<f64> = field.x_positions().into_iter().step_by(every).collect();
    let freqs: Vec<f64> = field.freqs().into_iter().step_by(every).collect();
    Ok(json!({
        "x": xs,
        "xi": freqs,
        "magnitude": field.magnitude_rows(every, every),
        "isometry_residual": field.isometry_residual,
    }))
}

pub fn spectrogram_json(datum: &str, extent: f64, points: usize, width: f64, ang_grid: usize) -> Result<Value> {
    let datum: Datum = parse(datum)?;
    let u = one_dimensional(&datum, extent, points)?;
    let params = DetectParams {
        ang_grid,
        ..DetectParams::default()
    };
    let report = detect_factors(std::slice::from_ref(&u), width, &params)?;
    Ok(json!({ "image": image(&u, width)?, "detected": report }))
}

/// The automatic method first, then the others; a closed-form kernel may be
/// unresolved on the grid where a multiplier or the spectral method is not.
fn evolve_any(sym: &QuadraticSymbol, t: f64, u0: &SampledDistribution) -> Result<(Method, Vec<SampledDistribution>)> {
    let first = PropagatorSpec::auto_method(sym);
    let mut last = None;
    for method in [first, Method::FourierMultiplier, Method::HermiteSpectral] {
        let spec = PropagatorSpec::new(sym.clone(), t, method);
        match evolve_factors(std::slice::from_ref(u0), &spec) {
            Ok(v) => return Ok((method, v)),
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one method tried"))
}

pub fn propagate_json(symbol: &str, datum: &str, t: f64, extent: f64, points: usize) -> Result<Value> {
    let js: QuadraticJson = parse(symbol)?;
    let sym = QuadraticSymbol::try_from(&js)?;
    let datum: Datum = parse(datum)?;
    let u0 = one_dimensional(&datum, extent, points)?;
    let f = hamilton_map(&sym);
    let singular = f.singular_space(DEFAULT_TOL_RANK);
    let predicted = predict_propagation(
        &f,
        &singular,
        &datum.declared_wf()?,
        t,
        PropagationParams::for_dimension(1),
    )?;
    let (method, evolved) = evolve_any(&sym, t, &u0)?;
    let detected = detect_factors(&evolved, 1.0, &DetectParams::default())?;
    let outside: Vec<&Vec<f64>> = detected
        .fans
        .iter()
        .map(|fan| &fan.dir)
        .filter(|d| predicted.set.excess_angle(&DVector::from_column_slice(d)) > CONTAIN_TOL_DEG.to_radians())
        .collect();
    Ok(json!({
        "method": method,
        "norm_ratio": evolved[0].norm() / u0.norm(),
        "predicted": predicted,
        "detected": detected,
        "outside": outside,
        "image": image(&evolved[0], 1.0)?,
    }))
}

pub fn singular_space_json(symbol: &str, t: f64) -> Result<Value> {
    let js: QuadraticJson = parse(symbol)?;
    let f = hamilton_map(&QuadraticSymbol::try_from(&js)?);
    let basis = f.singular_space(DEFAULT_TOL_RANK);
    let flow = f.flow_exp(t, FlowKind::ImaginaryPart).real();
    let rows =
        |m: &isowf::linalg::RMat| -> Vec<Vec<f64>> { m.row_iter().map(|r| r.iter().copied().collect()).collect() };
    Ok(json!({
        "re_F": rows(f.re_f()),
        "im_F": rows(f.im_f()),
        "singular_space": basis.column_iter().map(|c| c.iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>(),
        "flow": rows(&flow),
    }))
}

fn to_js(result: Result<Value>) -> std::result::Result<String, JsValue> {
    result
        .map(|v| v.to_string())
        .map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen]
pub fn spectrogram(
    datum: &str,
    extent: f64,
    points: usize,
    width: f64,
    ang_grid: usize,
) -> std::result::Result<String, JsValue> {
    to_js(spectrogram_json(datum, extent, points, width, ang_grid))
}

#[wasm_bindgen]
pub fn propagate(
    symbol: &str,
    datum: &str,
    t: f64,
    extent: f64,
    points: usize,
) -> std::result::Result<String, JsValue> {
    to_js(propagate_json(symbol, datum, t, extent, points))
}

#[wasm_bindgen]
pub fn singular_space(symbol: &str, t: f64) -> std::result::Result<String, JsValue> {
    to_js(singular_space_json(symbol, t))
}
