//! Browser bindings. Every export takes plain numbers and returns a JSON
//! string; failures come back as `{"error": "..."}` rather than a thrown
//! exception so the page can show them inline.

use biascorr::estimation::{self, ObservationOperator, ObservationSchedule};
use biascorr::harness::MethodChoice;
use biascorr::iterate::{self, Estimator, IterationConfig};
use biascorr::model::{self, ModelConfiguration};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const MAX_CURVE_POINTS: usize = 2000;

fn finite_or_null(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

fn render(r: Result<Value, String>) -> String {
    r.unwrap_or_else(|e| json!({ "error": e })).to_string()
}

fn config(x0: f64, alpha: f64, what: &str) -> Result<ModelConfiguration, String> {
    ModelConfiguration::new(x0, alpha).map_err(|e| format!("{what}: {e}"))
}

/// Solution and first-order sensitivities on `points` samples of `[0, t_max]`.
pub fn curves_value(x0: f64, alpha: f64, t_max: f64, points: usize) -> Result<Value, String> {
    let cfg = config(x0, alpha, "model")?;
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err("t_max must be positive".into());
    }
    let points = points.clamp(2, MAX_CURVE_POINTS);
    let (mut t, mut x, mut dx, mut da) = (vec![], vec![], vec![], vec![]);
    for i in 0..points {
        let ti = t_max * i as f64 / (points - 1) as f64;
        let (a, b) = model::first_order_sensitivities(&cfg, ti);
        t.push(ti);
        x.push(model::solve(&cfg, ti));
        dx.push(a);
        da.push(b);
    }
    Ok(json!({ "t": t, "x": x, "d_x0": dx, "d_alpha": da }))
}

#[allow(clippy::too_many_arguments)]
fn setup(
    x0: f64,
    alpha: f64,
    truth_x0: f64,
    truth_alpha: f64,
    t0: f64,
    k: u32,
    n: usize,
    delta: f64,
) -> Result<(ModelConfiguration, estimation::ObservationSet), String> {
    let model = config(x0, alpha, "model")?;
    let truth = config(truth_x0, truth_alpha, "truth")?;
    let sched = ObservationSchedule::new(t0, k, delta, n).map_err(|e| e.to_string())?;
    let obs =
        estimation::generate_observations(&truth, &sched.times()).map_err(|e| e.to_string())?;
    Ok((model, obs))
}

/// One estimate for a single schedule cell.
#[allow(clippy::too_many_arguments)]
pub fn estimate_value(
    x0: f64,
    alpha: f64,
    truth_x0: f64,
    truth_alpha: f64,
    t0: f64,
    k: u32,
    n: usize,
    delta: f64,
    method: &str,
    lambda: f64,
) -> Result<Value, String> {
    let (model, obs) = setup(x0, alpha, truth_x0, truth_alpha, t0, k, n, delta)?;
    let h = ObservationOperator::identity();
    let method = MethodChoice::parse(method, lambda).map_err(|e| e.to_string())?;
    let report = match method {
        MethodChoice::FirstOrder => estimation::first_order_estimate(&model, &obs, &h),
        MethodChoice::SecondOrder => estimation::second_order_estimate(&model, &obs, &h),
        MethodChoice::Tikhonov { lambda } => {
            estimation::tikhonov_estimate(&model, &obs, &h, lambda)
        }
        MethodChoice::PseudoInverse => estimation::pseudo_inverse_estimate(&model, &obs, &h),
    }
    .map_err(|e| e.to_string())?;
    Ok(json!({
        "d_x0": finite_or_null(report.beta.d_x0),
        "d_alpha": finite_or_null(report.beta.d_alpha),
        "kappa": finite_or_null(report.kappa),
        "status": report.status.to_string(),
        "times": obs.times(),
        "observations": obs.values(),
    }))
}

/// Full trace of an iterated run.
#[allow(clippy::too_many_arguments)]
pub fn iterate_value(
    x0: f64,
    alpha: f64,
    truth_x0: f64,
    truth_alpha: f64,
    t0: f64,
    k: u32,
    n: usize,
    delta: f64,
    second_order: bool,
    max_iter: usize,
) -> Result<Value, String> {
    let (model, obs) = setup(x0, alpha, truth_x0, truth_alpha, t0, k, n, delta)?;
    let est = if second_order {
        Estimator::SecondOrder
    } else {
        Estimator::FirstOrder
    };
    let cfg = IterationConfig::new(1e-6, max_iter, est).map_err(|e| e.to_string())?;
    let trace = iterate::run_iteration(&model, &obs, &ObservationOperator::identity(), &cfg)
        .map_err(|e| e.to_string())?;
    let steps: Vec<Value> = trace
        .steps
        .iter()
        .map(|s| {
            json!({
                "x0": s.model.x0(),
                "alpha": s.model.alpha(),
                "d_x0": finite_or_null(s.beta.d_x0),
                "d_alpha": finite_or_null(s.beta.d_alpha),
                "kappa": finite_or_null(s.kappa),
            })
        })
        .collect();
    Ok(json!({
        "status": trace.status.to_string(),
        "iterations": trace.iterations,
        "final_x0": trace.final_model.x0(),
        "final_alpha": trace.final_model.alpha(),
        "cumulative": [finite_or_null(trace.cumulative.d_x0), finite_or_null(trace.cumulative.d_alpha)],
        "steps": steps,
    }))
}

#[wasm_bindgen]
pub fn curves(x0: f64, alpha: f64, t_max: f64, points: usize) -> String {
    render(curves_value(x0, alpha, t_max, points))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn estimate(
    x0: f64,
    alpha: f64,
    truth_x0: f64,
    truth_alpha: f64,
    t0: f64,
    k: u32,
    n: usize,
    delta: f64,
    method: &str,
    lambda: f64,
) -> String {
    render(estimate_value(
        x0,
        alpha,
        truth_x0,
        truth_alpha,
        t0,
        k,
        n,
        delta,
        method,
        lambda,
    ))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn iterate(
    x0: f64,
    alpha: f64,
    truth_x0: f64,
    truth_alpha: f64,
    t0: f64,
    k: u32,
    n: usize,
    delta: f64,
    second_order: bool,
    max_iter: usize,
) -> String {
    render(iterate_value(
        x0,
        alpha,
        truth_x0,
        truth_alpha,
        t0,
        k,
        n,
        delta,
        second_order,
        max_iter,
    ))
}
