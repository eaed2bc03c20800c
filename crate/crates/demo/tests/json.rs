use nearstat_demo::{compare_deterministic, compare_stochastic, regularization_round};
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn deterministic_series_end_below_bound() {
    let v = parse(&compare_deterministic(8, 100.0, 40));
    let series = v["series"].as_array().unwrap();
    assert_eq!(series.len(), 4);
    let bound = v["ogm_g_bound"].as_f64().unwrap();
    let ogm = series.iter().find(|s| s["name"] == "OGM-G").unwrap();
    let last = ogm["points"].as_array().unwrap().last().unwrap();
    assert_eq!(last[0].as_f64().unwrap(), 40.0);
    assert!(last[1].as_f64().unwrap() <= bound);
}

#[test]
fn stochastic_series_are_monotone() {
    let v = parse(&compare_stochastic(200, 5, 6, 1.0, 3));
    let series = v.as_array().unwrap();
    assert_eq!(series.len(), 3);
    for s in series {
        let ys: Vec<f64> = s["points"].as_array().unwrap().iter().map(|p| p[1].as_f64().unwrap()).collect();
        assert!(!ys.is_empty());
        assert!(ys.windows(2).all(|w| w[1] <= w[0]), "{}", s["name"]);
    }
}

#[test]
fn round_parameters_and_errors() {
    let v = parse(&regularization_round(1000, 1e-3));
    let alpha = v["alpha"].as_f64().unwrap();
    assert!(alpha > 0.0 && alpha <= 2.0 * 1000.0 + 2.0 * (1000.0f64 * 1000.0).sqrt());
    assert!(v["break_idc"].as_u64().unwrap() > 0);
    assert!(parse(&regularization_round(10, -1.0))["error"].is_string());
    assert!(parse(&compare_deterministic(0, 10.0, 5))["error"].is_string());
    assert!(parse(&compare_stochastic(50, 3, 0, 1.0, 1))["error"].is_string());
}
