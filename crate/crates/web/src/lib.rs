use mgpo::framework::{run, Algorithm, EtaSpec, RunConfig};
use mgpo::game::{make_random_game, make_two_layer_example};
use mgpo::general_sum::{run_general_sum_oftrl, GeneralSumConfig};
use mgpo::learners::matrix_ne;
use serde::Serialize;
use wasm_bindgen::prelude::wasm_bindgen;
use wasm_bindgen::JsValue;

const MAX_ITERS: usize = 200_000;

#[derive(Serialize)]
struct Trace {
    label: String,
    t: Vec<usize>,
    gap: Vec<f64>,
}

#[derive(Serialize)]
struct MatrixReport {
    rows: usize,
    cols: usize,
    row: Vec<f64>,
    col: Vec<f64>,
    value: f64,
    gap: f64,
}

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from(e.to_string())
}

fn check_iters(iters: usize) -> Result<(), JsValue> {
    if iters == 0 || iters > MAX_ITERS {
        return Err(js_err(format!("iterations must lie in 1..={MAX_ITERS}")));
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> Result<String, JsValue> {
    serde_json::to_string(value).map_err(js_err)
}

/// Runs `alg` on the two-layer example from its prescribed start and
/// returns the Nash gap trace as JSON. An empty `eta` selects the default step size.
#[wasm_bindgen]
pub fn convergence(alg: &str, eta: &str, iters: usize) -> Result<String, JsValue> {
    check_iters(iters)?;
    let algorithm: Algorithm = alg.parse().map_err(js_err)?;
    let (game, mu, nu) = make_two_layer_example();
    let mut config = RunConfig::new(algorithm, game.horizon(), iters);
    if !eta.trim().is_empty() {
        config.eta = eta.trim().parse::<EtaSpec>().map_err(js_err)?;
    }
    config.init = Some((mu, nu));
    config.kl_base_point = true;
    let out = run(&game, &config).map_err(js_err)?;
    let label = if eta.trim().is_empty() { algorithm.to_string() } else { format!("{algorithm}[{}]", config.eta) };
    to_json(&Trace {
        label,
        t: out.trace.iter().map(|r| r.t).collect(),
        gap: out.trace.iter().map(|r| r.negap).collect(),
    })
}

/// Solves a zero-sum matrix game given as text, one row per line,
/// entries separated by whitespace or commas.
#[wasm_bindgen]
pub fn solve_matrix(text: &str) -> Result<String, JsValue> {
    let mut entries = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        let row: Vec<f64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|_| js_err(format!("not a number: {s}"))))
            .collect::<Result<_, _>>()?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => return Err(js_err(format!("row {} has {} entries, expected {c}", rows + 1, row.len()))),
            Some(_) => {}
        }
        entries.extend(row);
        rows += 1;
    }
    let cols = cols.ok_or_else(|| js_err("empty matrix"))?;
    let sol = matrix_ne(&entries, rows, cols).map_err(js_err)?;
    to_json(&MatrixReport { rows, cols, row: sol.row, col: sol.col, value: sol.value, gap: sol.gap })
}

/// Runs general-sum OFTRL on a random game with `players` two-action players
/// and returns the CCE gap trace of the certified policy as JSON.
#[wasm_bindgen]
pub fn general_sum(seed: u64, players: usize, iters: usize) -> Result<String, JsValue> {
    check_iters(iters)?;
    if !(2..=4).contains(&players) {
        return Err(js_err("players must lie in 2..=4"));
    }
    let game = make_random_game(seed, 3, 3, &vec![2; players], false).map_err(js_err)?;
    let out = run_general_sum_oftrl(&game, &GeneralSumConfig::new(iters)).map_err(js_err)?;
    to_json(&Trace {
        label: format!("oftrl, {players} players"),
        t: out.trace.iter().map(|r| r.t).collect(),
        gap: out.trace.iter().map(|r| r.cce_gap).collect(),
    })
}
