//! Browser bindings. Every export returns a JSON document; failures come back
//! as `{"error": "..."}` so the page never has to catch exceptions.

use qconc::bounds::{CountingModel, DiscreteModel};
use qconc::classical::{
    flux_bernstein, flux_hoeffding, flux_tail_dp, stationary_distribution, FluxFunction,
    MarkovChain,
};
use qconc::fixtures;
use qconc::operator::Tolerances;
use qconc::trajectory::exact_tail_dp;
use serde_json::{json, Value};
use wasm_bindgen::prelude::wasm_bindgen;

/// Longest horizon for which the page also shows the exact tail.
const EXACT_MAX_N: u64 = 400;

fn to_json(r: Result<Value, String>) -> String {
    r.unwrap_or_else(|e| json!({ "error": e })).to_string()
}

fn err(e: qconc::Error) -> String {
    e.to_string()
}

fn check_inputs(gamma: f64, horizon: f64) -> Result<(), String> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err("γ must be positive".into());
    }
    if !(horizon.is_finite() && horizon >= 1.0) {
        return Err("the horizon must be at least 1".into());
    }
    Ok(())
}

fn bound_json(r: &qconc::bounds::BoundResult) -> Value {
    json!({
        "bound": r.probability_bound,
        "valid": r.valid,
        "reason": r.reason,
    })
}

pub fn ring(p_up: f64, n: u64, gamma: f64) -> Result<Value, String> {
    check_inputs(gamma, n as f64)?;
    if !(0.0 < p_up && p_up < 1.0) {
        return Err("the up probability must lie in (0, 1)".into());
    }
    let model =
        DiscreteModel::new(fixtures::ring_with(p_up), Tolerances::default()).map_err(err)?;
    let f = fixtures::ring_observation();
    let stats = model.stats(&f).map_err(err)?;
    let b = model.bernstein(&f, &model.sigma, gamma, n).map_err(err)?;
    let h = model.hoeffding(&f, gamma, n).map_err(err)?;
    let exact = if n <= EXACT_MAX_N {
        Some(exact_tail_dp(&model.channel, &model.sigma, &f, n, stats.mean + gamma).map_err(err)?)
    } else {
        None
    };
    Ok(json!({
        "mean": stats.mean,
        "b": stats.b,
        "c": stats.c,
        "epsilon": b.constants.epsilon,
        "g": h.constants.g,
        "bernstein": bound_json(&b),
        "hoeffding": bound_json(&h),
        "exact": exact,
    }))
}

pub fn driven_qubit(omega: f64, kappa: f64, t: f64, gamma: f64) -> Result<Value, String> {
    check_inputs(gamma, t)?;
    if !(omega.is_finite() && kappa.is_finite() && kappa > 0.0) {
        return Err("κ must be positive and Ω finite".into());
    }
    let cm = CountingModel::new(fixtures::driven_qubit(omega, kappa), Tolerances::default())
        .map_err(err)?;
    let k = cm.constants(0).map_err(err)?;
    let r = cm.bound(0, &cm.sigma, gamma, t).map_err(err)?;
    Ok(json!({
        "excited_population": cm.sigma[(1, 1)].re,
        "intensity": k.m,
        "b": k.b,
        "alpha": k.alpha,
        "epsilon": r.constants.epsilon,
        "counting": bound_json(&r),
    }))
}

pub fn two_state_flux(p01: f64, p10: f64, n: u64, gamma: f64) -> Result<Value, String> {
    check_inputs(gamma, n as f64)?;
    if !(0.0 < p01 && p01 < 1.0 && 0.0 < p10 && p10 < 1.0) {
        return Err("transition probabilities must lie in (0, 1)".into());
    }
    let chain = MarkovChain::from_rows(&[&[1.0 - p01, p01], &[p10, 1.0 - p10]]).map_err(err)?;
    let f = FluxFunction::from_fn(&chain, |x, y| if (x, y) == (0, 1) { 1.0 } else { 0.0 })
        .map_err(err)?;
    let sigma = stationary_distribution(&chain).map_err(err)?;
    let b = flux_bernstein(&chain, &sigma, &f, gamma, n).map_err(err)?;
    let h = flux_hoeffding(&chain, &f, gamma, n).map_err(err)?;
    let mean = sigma[0] * p01;
    let exact = if n <= EXACT_MAX_N {
        Some(flux_tail_dp(&chain, &sigma, &f, n, mean + gamma).map_err(err)?)
    } else {
        None
    };
    Ok(json!({
        "stationary": sigma,
        "mean": mean,
        "bernstein": bound_json(&b),
        "hoeffding": bound_json(&h),
        "exact": exact,
    }))
}

/// Bernstein and Hoeffding bounds for the three-site ring walk with the
/// average jump direction as observable.
#[wasm_bindgen]
pub fn ring_bounds(p_up: f64, n: u32, gamma: f64) -> String {
    to_json(ring(p_up, n as u64, gamma))
}

/// Photon counting bound for a resonantly driven, damped qubit.
#[wasm_bindgen]
pub fn counting_bound(omega: f64, kappa: f64, t: f64, gamma: f64) -> String {
    to_json(driven_qubit(omega, kappa, t, gamma))
}

/// Flux bounds for the `0 → 1` transitions of a two-state chain.
#[wasm_bindgen]
pub fn flux_bounds(p01: f64, p10: f64, n: u32, gamma: f64) -> String {
    to_json(two_state_flux(p01, p10, n as u64, gamma))
}
