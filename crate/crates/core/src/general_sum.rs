//! Multi-player general-sum OFTRL, the certified (history-mixing) output
//! policy, and its coarse-correlated-equilibrium gap.

use std::io::Write;
use std::path::Path;
use crate::clock::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::framework::{fmt_num, Cadence, EtaContext, EtaSpec};
use crate::game::{best_response_value, dot, joint_distribution, marginal_payoffs, max_of, policy_eval_general, MarkovGame, MarkovPolicy};
use crate::learners::{PlayerLearner, PlayerRule, Prediction};
use crate::schedule::Schedule;

fn require_general_sum(game: &MarkovGame) -> Result<()> {
    if game.is_zero_sum() {
        return Err(Error::InvalidGame("operation requires a general-sum game (see to_constant_sum)".into()));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct GeneralSumConfig {
    pub iters: usize,
    pub eta: EtaSpec,
    pub cadence: Cadence,
    /// Check `Q_i = r_i + P V_i` at every step and record the worst residual.
    pub diagnostics: bool,
}

impl GeneralSumConfig {
    pub fn new(iters: usize) -> Self {
        Self { iters, eta: EtaSpec::Cce, cadence: Cadence::default(), diagnostics: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CceTraceRecord {
    pub t: usize,
    pub cce_gap: f64,
    pub max_reg: f64,
    pub elapsed_s: f64,
}

/// Mixture over the stored iterates: at step `h` with index `t`, draw
/// `j ~ beta_t^j`, play `pi_h^j`, and continue from `h + 1` with index `j`.
#[derive(Debug, Clone)]
pub struct CertifiedPolicy {
    schedule: Schedule,
    /// `history[t - 1][i]` is player `i`'s policy at iteration `t`.
    history: Vec<Vec<MarkovPolicy>>,
    /// Prefix sums of `ln(1 - beta_k)` over finite terms, and counts of `beta_k = 1`.
    log_keep: Vec<f64>,
    full_steps: Vec<usize>,
}

impl CertifiedPolicy {
    pub fn new(schedule: Schedule, history: Vec<Vec<MarkovPolicy>>) -> Result<Self> {
        if history.is_empty() {
            return Err(Error::EmptyHistory("certified policy needs at least one iterate"));
        }
        let players = history[0].len();
        if history.iter().any(|p| p.len() != players) {
            return Err(Error::Shape("every iterate needs one policy per player".into()));
        }
        let n = history.len();
        let mut log_keep = vec![0.0; n + 1];
        let mut full_steps = vec![0; n + 1];
        for k in 1..=n {
            let b = schedule.beta(k)?;
            let (lk, fs) = if b >= 1.0 { (0.0, 1) } else { ((1.0 - b).ln(), 0) };
            log_keep[k] = log_keep[k - 1] + lk;
            full_steps[k] = full_steps[k - 1] + fs;
        }
        Ok(Self { schedule, history, log_keep, full_steps })
    }

    pub fn iterations(&self) -> usize {
        self.history.len()
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    pub fn iterate(&self, t: usize) -> &[MarkovPolicy] {
        &self.history[t - 1]
    }

    /// Keeps only the first `t` iterates (the certified policy at index `t`).
    pub fn truncated(&self, t: usize) -> Result<Self> {
        Self::new(self.schedule.clone(), self.history[..t.min(self.history.len())].to_vec())
    }

    /// `P(j <= k)` under `j ~ beta_t^j`, i.e. `prod_{m=k+1}^t (1 - beta_m)`.
    fn cdf(&self, t: usize, k: usize) -> f64 {
        if k >= t {
            return 1.0;
        }
        if self.full_steps[t] > self.full_steps[k] {
            return 0.0;
        }
        (self.log_keep[t] - self.log_keep[k]).exp()
    }

    /// Draws a mixture index for entry with index `t`.
    pub fn sample_index<R: Rng + ?Sized>(&self, t: usize, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        // smallest k with cdf(t, k) > u; cdf(t, 0) = 0 because beta_1 = 1
        let (mut lo, mut hi) = (1usize, t);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.cdf(t, mid) > u {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        lo
    }

    /// Mixture weights `beta_t^j` for `j = 1..=t`.
    pub fn weights(&self, t: usize) -> Vec<f64> {
        (1..=t).map(|j| self.cdf(t, j) - self.cdf(t, j - 1)).collect()
    }

    fn write_jsonl<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        #[derive(Serialize)]
        struct Record<'a> {
            t: usize,
            h: usize,
            pi: Vec<Vec<&'a [f64]>>,
        }
        for (k, pols) in self.history.iter().enumerate() {
            let hn = pols[0].horizon();
            for h in 0..hn {
                let pi = pols.iter().map(|p| (0..p.num_states()).map(|s| p.get(h, s)).collect()).collect();
                let line = serde_json::to_string(&Record { t: k + 1, h: h + 1, pi }).map_err(std::io::Error::other)?;
                writeln!(out, "{line}")?;
            }
        }
        Ok(())
    }

    /// Writes one JSON record per `(t, h)`: `{"t", "h", "pi": [player][s][a]}` (1-based indices).
    pub fn save_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_jsonl(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
    }

    /// Reads the JSON-lines layout written by [`CertifiedPolicy::save_jsonl`].
    pub fn load_jsonl(path: impl AsRef<Path>, schedule: Schedule) -> Result<Self> {
        #[derive(Deserialize)]
        struct Record {
            t: usize,
            h: usize,
            pi: Vec<Vec<Vec<f64>>>,
        }
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut rows: Vec<Record> = Vec::new();
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            rows.push(serde_json::from_str(line).map_err(|e| Error::json(path, e))?);
        }
        let t_max = rows.iter().map(|r| r.t).max().unwrap_or(0);
        let h_max = rows.iter().map(|r| r.h).max().unwrap_or(0);
        if t_max == 0 || h_max == 0 || rows.len() != t_max * h_max {
            return Err(Error::Shape("certified policy file must hold every (t, h) exactly once".into()));
        }
        let players = rows[0].pi.len();
        let states = rows[0].pi.first().map_or(0, Vec::len);
        let mut flat: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); players]; t_max];
        rows.sort_by_key(|r| (r.t, r.h));
        if rows.iter().enumerate().any(|(k, r)| (r.t, r.h) != (k / h_max + 1, k % h_max + 1)) {
            return Err(Error::Shape("certified policy file must hold every (t, h) exactly once".into()));
        }
        for r in rows {
            if r.pi.len() != players || r.pi.iter().any(|p| p.len() != states) {
                return Err(Error::Shape(format!("record (t={}, h={}) has the wrong shape", r.t, r.h)));
            }
            for (i, p) in r.pi.into_iter().enumerate() {
                flat[r.t - 1][i].extend(p.into_iter().flatten());
            }
        }
        let history = flat
            .into_iter()
            .map(|pols| {
                pols.into_iter()
                    .enumerate()
                    .map(|(i, d)| {
                        let actions = d.len() / (h_max * states);
                        MarkovPolicy::from_flat(i, h_max, states, actions, d)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(schedule, history)
    }
}

/// One sampled episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    /// `states[h]` is the state entered at step `h`.
    pub states: Vec<usize>,
    pub joint_actions: Vec<usize>,
    /// `rewards[h][i]`
    pub rewards: Vec<Vec<f64>>,
    /// Mixture index used at each step.
    pub indices: Vec<usize>,
}

impl Episode {
    pub fn returns(&self) -> Vec<f64> {
        let m = self.rewards.first().map_or(0, Vec::len);
        (0..m).map(|i| self.rewards.iter().map(|r| r[i]).sum()).collect()
    }
}

fn sample_from<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, &x) in p.iter().enumerate() {
        acc += x;
        if u < acc {
            return k;
        }
    }
    p.iter().rposition(|&x| x > 0.0).unwrap_or(p.len() - 1)
}

/// Plays the certified policy `pi_hat_1^T` for one episode.
pub fn sample_certified_rollout<R: Rng + ?Sized>(policy: &CertifiedPolicy, game: &MarkovGame, rng: &mut R) -> Episode {
    let m = game.players();
    let mut s = game.initial_state();
    let mut t = policy.iterations();
    let mut ep = Episode { states: Vec::new(), joint_actions: Vec::new(), rewards: Vec::new(), indices: Vec::new() };
    let mut actions = vec![0usize; m];
    for h in 0..game.horizon() {
        let j = policy.sample_index(t, rng);
        let pols = policy.iterate(j);
        for (i, a) in actions.iter_mut().enumerate() {
            *a = sample_from(pols[i].get(h, s), rng);
        }
        let ja = game.joint_index(&actions);
        ep.states.push(s);
        ep.joint_actions.push(ja);
        ep.indices.push(j);
        ep.rewards.push((0..m).map(|i| game.reward_slice(i, h, s)[ja]).collect());
        s = sample_from(game.transition_row(h, s, ja), rng);
        t = j;
    }
    ep
}

/// Probability of being in state `s` at step `h` under the certified policy.
pub fn certified_occupancy(policy: &CertifiedPolicy, game: &MarkovGame) -> Vec<Vec<f64>> {
    let (hn, sn) = (game.horizon(), game.num_states());
    let n = policy.iterations();
    // d[s][t]: probability of entering step h in state s with index t
    let mut d = vec![vec![0.0; n + 1]; sn];
    d[game.initial_state()][n] = 1.0;
    let mut out = vec![vec![0.0; sn]; hn];
    for h in 0..hn {
        for s in 0..sn {
            out[h][s] = d[s].iter().sum();
        }
        if h + 1 == hn {
            break;
        }
        let mut next = vec![vec![0.0; n + 1]; sn];
        for s in 0..sn {
            for t in 1..=n {
                if d[s][t] == 0.0 {
                    continue;
                }
                for (j0, w) in policy.weights(t).into_iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let j = j0 + 1;
                    let dists: Vec<&[f64]> = policy.iterate(j).iter().map(|p| p.get(h, s)).collect();
                    for (ja, pj) in joint_distribution(&dists).into_iter().enumerate() {
                        for (sp, pt) in game.transition_row(h, s, ja).iter().enumerate() {
                            next[sp][j] += d[s][t] * w * pj * pt;
                        }
                    }
                }
            }
        }
        d = next;
    }
    out
}

/// Values under the certified policy and the best-response bound, computed
/// incrementally over the history.
///
/// `V_{i,h}^t = sum_j beta_t^j [(r_i + P V_{i,h+1}^j) pi_h^j]` and
/// `B_{i,h}^t = max_{a_i} sum_j beta_t^j [(r_i + P B_{i,h+1}^j) pi_{-i,h}^j](a_i)`.
#[derive(Debug, Clone)]
struct CceTracker {
    game: MarkovGame,
    schedule: Schedule,
    t: usize,
    /// `[i][h][s]`
    v: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
    /// `[i][h][s][a_i]`
    y: Vec<Vec<f64>>,
}

impl CceTracker {
    fn new(game: &MarkovGame, schedule: Schedule) -> Self {
        let (m, hn, sn) = (game.players(), game.horizon(), game.num_states());
        Self {
            game: game.clone(),
            schedule,
            t: 0,
            v: vec![vec![0.0; hn * sn]; m],
            b: vec![vec![0.0; hn * sn]; m],
            y: (0..m).map(|i| vec![0.0; hn * sn * game.action_counts()[i]]).collect(),
        }
    }

    fn push(&mut self, pols: &[MarkovPolicy]) -> Result<()> {
        self.t += 1;
        let beta = self.schedule.beta(self.t)?;
        let (hn, sn, joint) = (self.game.horizon(), self.game.num_states(), self.game.joint_actions());
        for i in 0..self.game.players() {
            let n = self.game.action_counts()[i];
            for h in (0..hn).rev() {
                let next = |tab: &Vec<f64>| (h + 1 < hn).then(|| tab[(h + 1) * sn..(h + 2) * sn].to_vec());
                let qv = self.game.q_backup(i, h, next(&self.v[i]).as_deref());
                let qb = self.game.q_backup(i, h, next(&self.b[i]).as_deref());
                for s in 0..sn {
                    let dists: Vec<&[f64]> = pols.iter().map(|p| p.get(h, s)).collect();
                    let val = dot(&joint_distribution(&dists), &qv[s * joint..(s + 1) * joint]);
                    let cell = &mut self.v[i][h * sn + s];
                    *cell = (1.0 - beta) * *cell + beta * val;
                    let marg = marginal_payoffs(&qb[s * joint..(s + 1) * joint], &dists, i);
                    let ys = &mut self.y[i][(h * sn + s) * n..(h * sn + s + 1) * n];
                    for (yv, mv) in ys.iter_mut().zip(&marg) {
                        *yv = (1.0 - beta) * *yv + beta * mv;
                    }
                    self.b[i][h * sn + s] = max_of(ys);
                }
            }
        }
        Ok(())
    }

    fn gap(&self) -> f64 {
        let s1 = self.game.initial_state();
        (0..self.game.players()).map(|i| self.b[i][s1] - self.v[i][s1]).fold(f64::NEG_INFINITY, f64::max)
    }

    fn value(&self, i: usize, h: usize, s: usize) -> f64 {
        self.v[i][h * self.game.num_states() + s]
    }
}

/// CCE gap of the certified policy built from a stored history.
pub fn cce_gap(game: &MarkovGame, policy: &CertifiedPolicy) -> Result<f64> {
    require_general_sum(game)?;
    let mut tracker = CceTracker::new(game, policy.schedule().clone());
    for t in 1..=policy.iterations() {
        tracker.push(policy.iterate(t))?;
    }
    Ok(tracker.gap())
}

/// Values `V_{i,1}(s_1)` of the certified policy, from the stored history.
pub fn certified_values(game: &MarkovGame, policy: &CertifiedPolicy) -> Result<Vec<f64>> {
    require_general_sum(game)?;
    let mut tracker = CceTracker::new(game, policy.schedule().clone());
    for t in 1..=policy.iterations() {
        tracker.push(policy.iterate(t))?;
    }
    Ok((0..game.players()).map(|i| tracker.value(i, 0, game.initial_state())).collect())
}

/// CCE gap of a Markov product policy: `max_i V_i^{dagger, pi_{-i}} - V_i^pi` at `s_1`.
pub fn cce_gap_markov(game: &MarkovGame, policies: &[MarkovPolicy]) -> Result<f64> {
    require_general_sum(game)?;
    let values = policy_eval_general(game, policies)?;
    let s1 = game.initial_state();
    let mut gap = f64::NEG_INFINITY;
    for i in 0..game.players() {
        let others: Vec<&MarkovPolicy> = policies.iter().filter(|p| p.player != i).collect();
        let (br, _) = best_response_value(game, &others, i)?;
        gap = gap.max(br.v_at(0, s1) - values[i].v_at(0, s1));
    }
    Ok(gap)
}

#[derive(Debug, Clone)]
pub struct GeneralSumOutput {
    pub policy: CertifiedPolicy,
    pub trace: Vec<CceTraceRecord>,
    pub eta: f64,
    /// `V_{i,1}^T(s_1)` maintained by the run.
    pub values: Vec<f64>,
    /// Largest `||pi_i^t - pi_i^{t-1}||_1` over `(i, h, s)` and `t >= 2`.
    pub max_policy_shift: f64,
    /// Largest `|Q_i - (r_i + P V_i)|` (diagnostics only).
    pub max_identity_residual: Option<f64>,
    /// Largest per-state regret at the last step, by player.
    pub final_regrets: Vec<f64>,
}

/// Stepping implementation of the general-sum OFTRL loop.
#[derive(Debug, Clone)]
pub struct GeneralSumRunner {
    game: MarkovGame,
    schedule: Schedule,
    eta: f64,
    t: usize,
    /// `[i][h][s][joint]`
    q: Vec<Vec<f64>>,
    /// `[i][h][s]`
    v: Vec<Vec<f64>>,
    /// `[i][h * S + s]`
    learners: Vec<Vec<PlayerLearner>>,
    current: Vec<MarkovPolicy>,
    history: Vec<Vec<MarkovPolicy>>,
    max_shift: f64,
}

impl GeneralSumRunner {
    pub fn new(game: &MarkovGame, eta: f64) -> Result<Self> {
        require_general_sum(game)?;
        let (m, hn, sn, joint) = (game.players(), game.horizon(), game.num_states(), game.joint_actions());
        let schedule = Schedule::Alpha { horizon: hn };
        let mut q = vec![vec![0.0; hn * sn * joint]; m];
        for qi in q.iter_mut() {
            for h in 0..hn {
                qi[h * sn * joint..(h + 1) * sn * joint].iter_mut().for_each(|x| *x = (hn - h) as f64);
            }
        }
        let learners = (0..m)
            .map(|i| {
                let n = game.action_counts()[i];
                (0..hn * sn)
                    .map(|_| {
                        PlayerLearner::new(PlayerRule::Oftrl(Prediction::Current), eta, schedule.clone(), vec![1.0 / n as f64; n])
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            game: game.clone(),
            schedule,
            eta,
            t: 0,
            q,
            v: vec![vec![0.0; hn * sn]; m],
            learners,
            current: (0..m).map(|i| MarkovPolicy::uniform_for(game, i)).collect(),
            history: Vec::new(),
            max_shift: 0.0,
        })
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn current(&self) -> &[MarkovPolicy] {
        &self.current
    }

    pub fn q_step(&self, player: usize, h: usize) -> &[f64] {
        let len = self.game.num_states() * self.game.joint_actions();
        &self.q[player][h * len..(h + 1) * len]
    }

    pub fn v_step(&self, player: usize, h: usize) -> &[f64] {
        let sn = self.game.num_states();
        &self.v[player][h * sn..(h + 1) * sn]
    }

    pub fn max_policy_shift(&self) -> f64 {
        self.max_shift
    }

    /// Worst `|Q_{i,h} - (r_{i,h} + P_h V_{i,h+1})|`.
    pub fn identity_residual(&self) -> f64 {
        let hn = self.game.horizon();
        let mut worst: f64 = 0.0;
        for i in 0..self.game.players() {
            for h in 0..hn {
                let v_next = (h + 1 < hn).then(|| self.v_step(i, h + 1).to_vec());
                let target = self.game.q_backup(i, h, v_next.as_deref());
                for (a, b) in self.q_step(i, h).iter().zip(&target) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
        worst
    }

    /// Per-player max over `(h, s)` of the weighted regret.
    pub fn regrets(&self) -> Result<Vec<f64>> {
        self.learners
            .iter()
            .map(|ls| ls.iter().map(|l| l.regret()).collect::<Result<Vec<_>>>().map(|r| max_of(&r)))
            .collect()
    }

    pub fn learner(&self, player: usize, h: usize, s: usize) -> &PlayerLearner {
        &self.learners[player][h * self.game.num_states() + s]
    }

    pub fn step(&mut self) -> Result<()> {
        self.t += 1;
        let t = self.t;
        let alpha = self.schedule.beta(t)?;
        let (m, hn, sn, joint) = (self.game.players(), self.game.horizon(), self.game.num_states(), self.game.joint_actions());
        let len = sn * joint;
        for h in (0..hn).rev() {
            for i in 0..m {
                for s in 0..sn {
                    let learner = &mut self.learners[i][h * sn + s];
                    let p = learner.next_policy().map_err(|e| Error::Learner { t, h, s, source: Box::new(e) })?;
                    let row = self.current[i].get_mut(h, s);
                    if t >= 2 {
                        let shift: f64 = row.iter().zip(p).map(|(x, y)| (x - y).abs()).sum();
                        self.max_shift = self.max_shift.max(shift);
                    }
                    row.copy_from_slice(p);
                }
            }
            for i in 0..m {
                let v_next: Option<Vec<f64>> = (h + 1 < hn).then(|| {
                    let q_next = &self.q[i][(h + 1) * len..(h + 2) * len];
                    (0..sn)
                        .map(|s| {
                            let dists: Vec<&[f64]> = self.current.iter().map(|p| p.get(h + 1, s)).collect();
                            dot(&joint_distribution(&dists), &q_next[s * joint..(s + 1) * joint])
                        })
                        .collect()
                });
                let target = self.game.q_backup(i, h, v_next.as_deref());
                for (x, y) in self.q[i][h * len..(h + 1) * len].iter_mut().zip(&target) {
                    *x = (1.0 - alpha) * *x + alpha * y;
                }
            }
            for s in 0..sn {
                let dists: Vec<&[f64]> = self.current.iter().map(|p| p.get(h, s)).collect();
                let jd = joint_distribution(&dists);
                for i in 0..m {
                    let q = &self.q[i][h * len + s * joint..h * len + (s + 1) * joint];
                    let gain = marginal_payoffs(q, &dists, i);
                    self.learners[i][h * sn + s]
                        .observe(&gain)
                        .map_err(|e| Error::Learner { t, h, s, source: Box::new(e) })?;
                    let cell = &mut self.v[i][h * sn + s];
                    *cell = (1.0 - alpha) * *cell + alpha * dot(&jd, q);
                }
            }
        }
        self.history.push(self.current.clone());
        Ok(())
    }

    pub fn certified_policy(&self) -> Result<CertifiedPolicy> {
        CertifiedPolicy::new(self.schedule.clone(), self.history.clone())
    }
}

/// Runs general-sum OFTRL for `config.iters` steps.
pub fn run_general_sum_oftrl(game: &MarkovGame, config: &GeneralSumConfig) -> Result<GeneralSumOutput> {
    require_general_sum(game)?;
    if config.iters == 0 {
        return Err(Error::Config("at least one iteration is required".into()));
    }
    let start = Instant::now();
    let eta = config.eta.resolve(EtaContext::for_game(game, config.iters));
    let mut runner = GeneralSumRunner::new(game, eta)?;
    let mut tracker = CceTracker::new(game, runner.schedule.clone());
    let checkpoints = config.cadence.checkpoints(config.iters);
    let mut next_cp = checkpoints.iter().peekable();
    let mut trace = Vec::new();
    let mut residual: Option<f64> = config.diagnostics.then_some(0.0);
    for t in 1..=config.iters {
        runner.step()?;
        tracker.push(&runner.current)?;
        if let Some(r) = residual.as_mut() {
            *r = r.max(runner.identity_residual());
        }
        if next_cp.peek().is_some_and(|&&c| c == t) {
            next_cp.next();
            trace.push(CceTraceRecord {
                t,
                cce_gap: tracker.gap(),
                max_reg: max_of(&runner.regrets()?),
                elapsed_s: start.elapsed().as_secs_f64(),
            });
        }
    }
    let s1 = game.initial_state();
    Ok(GeneralSumOutput {
        values: (0..game.players()).map(|i| runner.v_step(i, 0)[s1]).collect(),
        final_regrets: runner.regrets()?,
        max_policy_shift: runner.max_policy_shift(),
        max_identity_residual: residual,
        policy: runner.certified_policy()?,
        trace,
        eta,
    })
}

pub fn write_cce_trace_csv<W: Write>(out: &mut W, trace: &[CceTraceRecord]) -> std::io::Result<()> {
    writeln!(out, "t,ccegap,max_reg,elapsed_s")?;
    for r in trace {
        writeln!(
            out,
            "{},{},{},{}",
            r.t,
            fmt_num(Some(r.cce_gap)),
            fmt_num(Some(r.max_reg)),
            fmt_num(Some(r.elapsed_s))
        )?;
    }
    Ok(())
}
