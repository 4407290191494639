use mgpo::framework::{run, Algorithm, RunConfig};
use mgpo::game::make_two_layer_example;
use mgpo_web::{convergence, general_sum, solve_matrix};
use serde_json::Value;

fn parse(s: Result<String, wasm_bindgen::JsValue>) -> Value {
    serde_json::from_str(&s.unwrap()).unwrap()
}

#[test]
fn convergence_matches_a_direct_run() {
    let v = parse(convergence("oftrl", "", 500));
    let (game, mu, nu) = make_two_layer_example();
    let mut config = RunConfig::new(Algorithm::Oftrl, game.horizon(), 500);
    config.init = Some((mu, nu));
    config.kl_base_point = true;
    let out = run(&game, &config).unwrap();
    assert_eq!(v["label"], "oftrl");
    assert_eq!(v["gap"].as_array().unwrap().last().unwrap().as_f64().unwrap(), out.final_gap());
    assert_eq!(v["t"].as_array().unwrap().last().unwrap().as_u64().unwrap(), 500);
}

#[test]
fn rock_paper_scissors_is_uniform_with_value_zero() {
    let v = parse(solve_matrix("0 -1 1\n1, 0, -1\n\n-1 1 0\n"));
    assert_eq!((v["rows"].as_u64(), v["cols"].as_u64()), (Some(3), Some(3)));
    for side in ["row", "col"] {
        for p in v[side].as_array().unwrap() {
            assert!((p.as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-9);
        }
    }
    assert!(v["value"].as_f64().unwrap().abs() < 1e-9);
}

#[test]
fn general_sum_trace_ends_at_the_requested_horizon() {
    let v = parse(general_sum(2, 3, 200));
    assert_eq!(v["t"].as_array().unwrap().last().unwrap().as_u64(), Some(200));
    assert!(v["gap"].as_array().unwrap().iter().all(|g| g.as_f64().unwrap() >= -1e-12));
}
