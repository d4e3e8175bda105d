use heom_web::{bath_summary_json, default_config_json, oracle_json, simulate_json};
use serde_json::Value;

#[test]
fn default_config_round_trips() {
    let v: Value = serde_json::from_str(&default_config_json()).unwrap();
    assert_eq!(v["basis"]["k"], 10);
    assert_eq!(v["bath"]["beta"], "zero");
}

#[test]
fn bath_summary_reports_size_and_counter_term() {
    let v: Value = serde_json::from_str(&bath_summary_json("").unwrap()).unwrap();
    assert_eq!(v["states"], 3003);
    assert_eq!(v["lambda"].as_array().unwrap().len(), 10);
    assert!((v["kappa"].as_f64().unwrap() - std::f64::consts::PI / 4.0).abs() < 1e-10);
}

#[test]
fn small_simulation_tracks_oracle() {
    let cfg = r#"{"basis":{"k":6},"hierarchy":{"n_max":3},"integrator":{"steps":320},"oracle":{"modes":32}}"#;
    let heom: Value = serde_json::from_str(&simulate_json(cfg).unwrap()).unwrap();
    let exact: Value = serde_json::from_str(&oracle_json(cfg).unwrap()).unwrap();
    let (a, b) = (
        heom["xi_q"].as_array().unwrap(),
        exact["xi_q"].as_array().unwrap(),
    );
    assert_eq!(a.len(), 11);
    for (x, y) in a.iter().zip(b) {
        assert!((x.as_f64().unwrap() - y.as_f64().unwrap()).abs() < 0.05);
    }
    assert_eq!(heom["w_s_t"][10], 2.0);
}

#[test]
fn oversized_and_malformed_requests_are_refused() {
    let err = simulate_json(r#"{"basis":{"k":20}}"#).unwrap_err();
    assert!(err.contains("53130"), "{err}");
    assert!(simulate_json("{\"nope\":1}").is_err());
    assert!(bath_summary_json(r#"{"system":{"dq":-1}}"#).is_err());
}
