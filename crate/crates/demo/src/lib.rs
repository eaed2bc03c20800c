//! wasm-bindgen entry points for the static demo page in `www/`.
//! Every function returns a JSON string; errors come back as `{"error": ...}`.

use nearstat::adaptive::{inner_break_iteration, Mode, RegularizationState};
use nearstat::data::{preprocess, synth_dataset, Preprocess};
use nearstat::deterministic::{ogm_g_bound, run_gd, run_m_ogm_g, run_nag, run_ogm_g, OutputRule};
use nearstat::linalg::DenseMatrix;
use nearstat::objective::{make_logistic, make_quadratic};
use nearstat::stochastic::{
    acc_svrg_g_with, saga_with, svrg_with, Schedule, StochOptions, StochOutput, StopRule,
    SAGA_DEFAULT_CAP,
};
use nearstat::{CountingOracle, FiniteSum, Result, Trace};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct Series {
    name: &'static str,
    /// (x, y) points; x is iteration or passes depending on the call.
    points: Vec<(f64, f64)>,
}

fn to_json<T: Serialize>(r: Result<T>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| format!("{{\"error\":\"{e}\"}}")),
        Err(e) => serde_json::json!({ "error": e.to_string() }).to_string(),
    }
}

fn grad_series(name: &'static str, t: &Trace) -> Series {
    Series {
        name,
        points: t
            .events
            .iter()
            .filter_map(|e| e.grad_norm.map(|g| (e.iteration as f64, g)))
            .collect(),
    }
}

#[derive(Serialize)]
struct DeterministicReport {
    series: Vec<Series>,
    l: f64,
    delta0: f64,
    ogm_g_bound: f64,
}

fn deterministic_report(d: usize, condition: f64, iterations: usize) -> Result<DeterministicReport> {
    if d == 0 || !(condition >= 1.0) || iterations == 0 {
        return Err(nearstat::Error::InvalidInput("need d ≥ 1, condition ≥ 1, iterations ≥ 1".into()));
    }
    // Eigenvalues spread geometrically over [1/condition, 1]; minimizer at the ones vector.
    let eig: Vec<f64> = (0..d)
        .map(|j| condition.powf(-(j as f64) / (d.max(2) - 1) as f64))
        .collect();
    let q = make_quadratic(DenseMatrix::diagonal(&eig), eig.clone())?;
    let x0 = vec![0.0; d];
    let l = q.smoothness();
    let delta0 = q.value(&x0) - q.value(&vec![1.0; d]);
    let mut series = Vec::new();
    let mut o = CountingOracle::new(&q);
    series.push(grad_series("GD", &run_gd(&mut o, &x0, iterations)?));
    let mut o = CountingOracle::new(&q);
    series.push(grad_series("NAG", &run_nag(&mut o, &x0, iterations)?));
    let mut o = CountingOracle::new(&q);
    series.push(grad_series("OGM-G", &run_ogm_g(&mut o, &x0, iterations)?));
    let mut o = CountingOracle::new(&q);
    series.push(grad_series("M-OGM-G", &run_m_ogm_g(&mut o, &x0, iterations, OutputRule::Last)?));
    Ok(DeterministicReport {
        series,
        l,
        delta0,
        ogm_g_bound: ogm_g_bound(l, delta0, iterations).sqrt(),
    })
}

/// Gradient norms of GD, NAG, OGM-G and M-OGM-G on a diagonal quadratic.
#[wasm_bindgen]
pub fn compare_deterministic(d: usize, condition: f64, iterations: usize) -> String {
    to_json(deterministic_report(d, condition, iterations))
}

fn min_tracked_by_pass(name: &'static str, t: &Trace, n: usize) -> Series {
    let mins = t.min_tracked();
    let points = t
        .events
        .iter()
        .zip(mins)
        .filter_map(|(e, m)| m.map(|m| (e.oracle_calls as f64 / n as f64, m)))
        .collect();
    Series { name, points }
}

fn stochastic_report(n: usize, d: usize, passes: u64, separability: f64, seed: u64) -> Result<Vec<Series>> {
    if passes == 0 {
        return Err(nearstat::Error::InvalidInput("passes must be positive".into()));
    }
    let ds = preprocess(&synth_dataset(seed, n, d, separability)?, Preprocess::default());
    let f = make_logistic(&ds)?;
    let x0 = vec![0.0; f.dim()];
    let opts = StochOptions {
        stop: StopRule::OracleCalls(passes * n as u64),
        seed,
        metric_every: Some(n as u64),
        record_f: false,
    };
    let mut o = CountingOracle::new(&f);
    let acc = acc_svrg_g_with(&mut o, &x0, Schedule::TwoStage, StochOutput::MinTrackedGrad, &opts, |_| {})?;
    let mut o = CountingOracle::new(&f);
    let svrg = svrg_with(&mut o, &x0, &opts)?;
    let mut o = CountingOracle::new(&f);
    let (saga, _) = saga_with(&mut o, &x0, &opts, SAGA_DEFAULT_CAP)?;
    Ok(vec![
        min_tracked_by_pass("Acc-SVRG-G", &acc, n),
        min_tracked_by_pass("SVRG", &svrg, n),
        min_tracked_by_pass("SAGA", &saga, n),
    ])
}

/// Min-tracked gradient norm per pass for Acc-SVRG-G, SVRG and SAGA on a
/// synthetic logistic problem.
#[wasm_bindgen]
pub fn compare_stochastic(n: usize, d: usize, passes: u32, separability: f64, seed: u32) -> String {
    to_json(stochastic_report(n, d, passes as u64, separability, seed as u64))
}

#[derive(Serialize)]
struct RoundParams {
    alpha: f64,
    tau_x: f64,
    tau_z: f64,
    p: f64,
    c_idc: f64,
    c_ifc: f64,
    break_idc: u64,
    break_ifc: u64,
}

fn round_params(n: usize, delta_over_l: f64) -> Result<RoundParams> {
    let st = RegularizationState::for_round(delta_over_l, 1.0, n)?;
    Ok(RoundParams {
        alpha: st.alpha,
        tau_x: st.tau_x,
        tau_z: st.tau_z,
        p: st.p,
        c_idc: st.c_idc,
        c_ifc: st.c_ifc,
        break_idc: inner_break_iteration(&st, Mode::Idc),
        break_ifc: inner_break_iteration(&st, Mode::Ifc),
    })
}

/// Inner-loop parameters of one regularized round, with L = 1.
#[wasm_bindgen]
pub fn regularization_round(n: usize, delta_over_l: f64) -> String {
    to_json(round_params(n, delta_over_l))
}
