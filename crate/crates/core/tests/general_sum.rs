use mgpo::framework::{Cadence, EtaSpec};
use mgpo::game::{make_random_game, MarkovGame, MarkovPolicy};
use mgpo::general_sum::{
    cce_gap, cce_gap_markov, certified_occupancy, certified_values, run_general_sum_oftrl, sample_certified_rollout,
    CertifiedPolicy, GeneralSumConfig, GeneralSumRunner,
};
use mgpo::schedule::Schedule;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn three_player() -> MarkovGame {
    make_random_game(7, 2, 3, &[2, 2, 2], false).unwrap()
}

fn config(iters: usize) -> GeneralSumConfig {
    let mut c = GeneralSumConfig::new(iters);
    c.cadence = Cadence::FinalOnly;
    c
}

#[test]
fn rejects_zero_sum_games() {
    let game = make_random_game(1, 2, 2, &[2, 2], true).unwrap();
    assert!(run_general_sum_oftrl(&game, &config(3)).is_err());
    assert!(GeneralSumRunner::new(&game, 0.1).is_err());
}

#[test]
fn constant_sum_values_add_up() {
    let game = make_random_game(3, 3, 3, &[2, 3], true).unwrap().to_constant_sum().unwrap();
    let mut runner = GeneralSumRunner::new(&game, 0.3).unwrap();
    for _ in 0..40 {
        runner.step().unwrap();
        for h in 0..game.horizon() {
            for s in 0..game.num_states() {
                let total = runner.v_step(0, h)[s] + runner.v_step(1, h)[s];
                assert!((total - (game.horizon() - h) as f64).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn first_step_last_layer_is_reward() {
    let game = three_player();
    let mut runner = GeneralSumRunner::new(&game, 0.2).unwrap();
    runner.step().unwrap();
    let h = game.horizon() - 1;
    let joint = game.joint_actions();
    for i in 0..3 {
        for s in 0..game.num_states() {
            assert_eq!(&runner.q_step(i, h)[s * joint..(s + 1) * joint], game.reward_slice(i, h, s));
        }
    }
}

#[test]
fn identity_stability_and_value_bounds() {
    let game = three_player();
    let mut c = config(300);
    c.diagnostics = true;
    let out = run_general_sum_oftrl(&game, &c).unwrap();
    assert!(out.max_identity_residual.unwrap() <= 1e-9);
    assert!(out.max_policy_shift <= 4.0 * out.eta * game.horizon() as f64);
    let gap = cce_gap(&game, &out.policy).unwrap();
    assert!(gap >= -1e-9);
    let offline = certified_values(&game, &out.policy).unwrap();
    for (a, b) in offline.iter().zip(&out.values) {
        assert!((a - b).abs() < 1e-9);
        assert!(*b >= -1e-9 && *b <= game.horizon() as f64 + 1e-9);
    }
}

#[test]
fn online_trace_matches_offline_gap() {
    let game = three_player();
    let mut c = config(60);
    c.cadence = Cadence::Every(20);
    let out = run_general_sum_oftrl(&game, &c).unwrap();
    for rec in &out.trace {
        let offline = cce_gap(&game, &out.policy.truncated(rec.t).unwrap()).unwrap();
        assert!((rec.cce_gap - offline).abs() < 1e-12);
    }
}

#[test]
fn single_iterate_matches_markov_best_response() {
    let game = three_player();
    let out = run_general_sum_oftrl(&game, &config(1)).unwrap();
    let gap = cce_gap(&game, &out.policy).unwrap();
    let markov = cce_gap_markov(&game, out.policy.iterate(1)).unwrap();
    assert!((gap - markov).abs() < 1e-9);

    // a non-uniform product policy, injected directly
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let pols: Vec<MarkovPolicy> = (0..3)
        .map(|i| {
            let mut p = MarkovPolicy::uniform_for(&game, i);
            for h in 0..2 {
                for s in 0..3 {
                    let x: f64 = rand::Rng::random(&mut rng);
                    p.get_mut(h, s).copy_from_slice(&[x, 1.0 - x]);
                }
            }
            p
        })
        .collect();
    let cert = CertifiedPolicy::new(Schedule::alpha(2).unwrap(), vec![pols.clone()]).unwrap();
    let a = cce_gap(&game, &cert).unwrap();
    let b = cce_gap_markov(&game, &pols).unwrap();
    assert!((a - b).abs() < 1e-9);
}

#[test]
fn equilibrium_of_uncoupled_stage_game_has_zero_gap() {
    // matching pennies in constant-sum form, H = 1
    let reward = vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0];
    let game = MarkovGame::new(1, 1, vec![2, 2], false, 0, reward, vec![1.0; 4]).unwrap();
    let pols = vec![MarkovPolicy::uniform_for(&game, 0), MarkovPolicy::uniform_for(&game, 1)];
    let cert = CertifiedPolicy::new(Schedule::alpha(1).unwrap(), vec![pols]).unwrap();
    assert!(cce_gap(&game, &cert).unwrap().abs() < 1e-9);
}

#[test]
fn rollout_returns_match_certified_values() {
    let game = three_player();
    let out = run_general_sum_oftrl(&game, &config(50)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 100_000;
    let mut sum = [0.0; 3];
    let mut sq = [0.0; 3];
    for _ in 0..n {
        let ret = sample_certified_rollout(&out.policy, &game, &mut rng).returns();
        for i in 0..3 {
            sum[i] += ret[i];
            sq[i] += ret[i] * ret[i];
        }
    }
    for i in 0..3 {
        let mean = sum[i] / n as f64;
        let sd = (sq[i] / n as f64 - mean * mean).max(0.0).sqrt();
        let se = sd / (n as f64).sqrt();
        assert!((mean - out.values[i]).abs() <= 3.0 * se + 1e-12, "player {i}: {mean} vs {}", out.values[i]);
    }
}

#[test]
fn rollout_state_visits_match_occupancy() {
    let game = make_random_game(5, 3, 3, &[2, 2, 2], false).unwrap();
    let out = run_general_sum_oftrl(&game, &config(20)).unwrap();
    let occ = certified_occupancy(&out.policy, &game);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 100_000;
    let mut counts = vec![vec![0usize; 3]; 3];
    for _ in 0..n {
        let ep = sample_certified_rollout(&out.policy, &game, &mut rng);
        for (h, &s) in ep.states.iter().enumerate() {
            counts[h][s] += 1;
        }
    }
    for h in 0..3 {
        let total: f64 = occ[h].iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        for s in 0..3 {
            let p = occ[h][s];
            let freq = counts[h][s] as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((freq - p).abs() <= 3.0 * se + 1e-12, "h={h} s={s}: {freq} vs {p}");
        }
    }
}

#[test]
fn sampling_edge_cases() {
    let game = three_player();
    let mut runner = GeneralSumRunner::new(&game, 0.1).unwrap();
    let mut history = Vec::new();
    for _ in 0..5 {
        runner.step().unwrap();
        history.push(runner.current().to_vec());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let single = CertifiedPolicy::new(Schedule::alpha(2).unwrap(), history[..1].to_vec()).unwrap();
    let eager = CertifiedPolicy::new(Schedule::Eager, history.clone()).unwrap();
    for _ in 0..200 {
        assert_eq!(sample_certified_rollout(&single, &game, &mut rng).indices, vec![1, 1]);
        assert_eq!(sample_certified_rollout(&eager, &game, &mut rng).indices, vec![5, 5]);
    }
}

#[test]
fn history_roundtrips_through_json_lines() {
    let game = three_player();
    let out = run_general_sum_oftrl(&game, &config(4)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cert.jsonl");
    out.policy.save_jsonl(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 4 * game.horizon());
    let back = CertifiedPolicy::load_jsonl(&path, Schedule::alpha(2).unwrap()).unwrap();
    for t in 1..=4 {
        for (a, b) in back.iterate(t).iter().zip(out.policy.iterate(t)) {
            assert_eq!(a.as_flat(), b.as_flat());
        }
    }
    assert_eq!(cce_gap(&game, &back).unwrap(), cce_gap(&game, &out.policy).unwrap());
}

#[test]
fn trace_csv_has_header_and_rows() {
    let game = three_player();
    let mut c = config(10);
    c.eta = EtaSpec::Const(0.1);
    c.cadence = Cadence::Every(5);
    let out = run_general_sum_oftrl(&game, &c).unwrap();
    let mut buf = Vec::new();
    mgpo::general_sum::write_cce_trace_csv(&mut buf, &out.trace).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,ccegap,max_reg,elapsed_s");
    assert_eq!(lines.len(), 3);
    assert!(lines[2].starts_with("10,"));
}

proptest! {
    #[test]
    fn mixture_weights_sum_to_one(t in 1usize..40, horizon in 1usize..6) {
        let game = make_random_game(1, 1, 1, &[2, 2], false).unwrap();
        let pols = vec![MarkovPolicy::uniform_for(&game, 0), MarkovPolicy::uniform_for(&game, 1)];
        let cert = CertifiedPolicy::new(Schedule::alpha(horizon).unwrap(), vec![pols; t]).unwrap();
        let w = cert.weights(t);
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(w.iter().all(|&x| x >= 0.0));
        let direct = Schedule::alpha(horizon).unwrap().weight_vector(t).unwrap();
        for (j, x) in w.iter().enumerate() {
            prop_assert!((x - direct.weights[j]).abs() < 1e-12);
        }
    }
}
