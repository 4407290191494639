//! Tabular finite-horizon Markov games.
//!
//! Steps are indexed `0..H` internally (step `h` here is step `h + 1` in the
//! usual 1-based notation) and `V_H = 0` is the terminal boundary. Joint
//! actions are row-major over `(a_1, ..., a_m)`, so in a two-player game the
//! joint index of `(a, b)` is `a * B + b`.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::matrix_ne;

pub const ROW_SUM_TOL: f64 = 1e-12;
pub const POLICY_SUM_TOL: f64 = 1e-9;
pub const VALUE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct MarkovGame {
    horizon: usize,
    num_states: usize,
    action_counts: Vec<usize>,
    zero_sum: bool,
    initial_state: usize,
    joint: usize,
    /// `[i][h][s][ja]`; a single reward table in zero-sum mode.
    reward: Vec<f64>,
    /// `[h][s][ja][s']`
    transition: Vec<f64>,
}

impl MarkovGame {
    pub fn new(
        horizon: usize,
        num_states: usize,
        action_counts: Vec<usize>,
        zero_sum: bool,
        initial_state: usize,
        reward: Vec<f64>,
        transition: Vec<f64>,
    ) -> Result<Self> {
        if horizon == 0 || num_states == 0 {
            return Err(Error::InvalidGame("horizon and state count must be positive".into()));
        }
        if action_counts.len() < 2 {
            return Err(Error::InvalidGame("a game needs at least two players".into()));
        }
        if zero_sum && action_counts.len() != 2 {
            return Err(Error::InvalidGame("zero-sum games have exactly two players".into()));
        }
        if action_counts.contains(&0) {
            return Err(Error::InvalidGame("every player needs at least one action".into()));
        }
        if initial_state >= num_states {
            return Err(Error::InvalidGame(format!(
                "initial state {initial_state} out of range for {num_states} states"
            )));
        }
        let joint: usize = action_counts.iter().product();
        let reward_tables = if zero_sum { 1 } else { action_counts.len() };
        let want_r = reward_tables * horizon * num_states * joint;
        if reward.len() != want_r {
            return Err(Error::Shape(format!("reward has {} entries, expected {want_r}", reward.len())));
        }
        let want_p = horizon * num_states * joint * num_states;
        if transition.len() != want_p {
            return Err(Error::Shape(format!(
                "transition has {} entries, expected {want_p}",
                transition.len()
            )));
        }
        if let Some(r) = reward.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::InvalidGame(format!("reward {r} outside [0, 1]")));
        }
        for (k, row) in transition.chunks(num_states).enumerate() {
            if row.iter().any(|p| !(*p >= 0.0)) {
                return Err(Error::InvalidGame(format!("negative or NaN probability in row {k}")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::InvalidGame(format!("transition row {k} sums to {total}")));
            }
        }
        Ok(Self { horizon, num_states, action_counts, zero_sum, initial_state, joint, reward, transition })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }
    pub fn num_states(&self) -> usize {
        self.num_states
    }
    pub fn players(&self) -> usize {
        self.action_counts.len()
    }
    pub fn action_counts(&self) -> &[usize] {
        &self.action_counts
    }
    pub fn joint_actions(&self) -> usize {
        self.joint
    }
    pub fn is_zero_sum(&self) -> bool {
        self.zero_sum
    }
    pub fn initial_state(&self) -> usize {
        self.initial_state
    }
    pub fn max_actions(&self) -> usize {
        *self.action_counts.iter().max().unwrap()
    }

    pub(crate) fn require_zero_sum(&self) -> Result<(usize, usize)> {
        if !self.zero_sum {
            return Err(Error::InvalidGame("operation requires a two-player zero-sum game".into()));
        }
        Ok((self.action_counts[0], self.action_counts[1]))
    }

    /// Reward table `r_{i,h}(s, .)` over joint actions. In zero-sum mode this
    /// is the max-player's reward regardless of `player`.
    pub fn reward_slice(&self, player: usize, h: usize, s: usize) -> &[f64] {
        let i = if self.zero_sum { 0 } else { player };
        let base = ((i * self.horizon + h) * self.num_states + s) * self.joint;
        &self.reward[base..base + self.joint]
    }

    /// `P_h(. | s, ja)`.
    pub fn transition_row(&self, h: usize, s: usize, ja: usize) -> &[f64] {
        let base = ((h * self.num_states + s) * self.joint + ja) * self.num_states;
        &self.transition[base..base + self.num_states]
    }

    pub fn joint_index(&self, actions: &[usize]) -> usize {
        actions.iter().zip(&self.action_counts).fold(0, |acc, (a, n)| acc * n + a)
    }

    pub fn decode_joint(&self, mut ja: usize, out: &mut [usize]) {
        for (slot, n) in out.iter_mut().zip(&self.action_counts).rev() {
            *slot = ja % n;
            ja /= n;
        }
    }

    /// `[r_{i,h} + P_h V](s, ja)` for every `(s, ja)`; `v_next = None` is the terminal `V = 0`.
    pub fn q_backup(&self, player: usize, h: usize, v_next: Option<&[f64]>) -> Vec<f64> {
        let mut q = Vec::with_capacity(self.num_states * self.joint);
        for s in 0..self.num_states {
            let r = self.reward_slice(player, h, s);
            for (ja, &rew) in r.iter().enumerate() {
                let cont = match v_next {
                    Some(v) => dot(self.transition_row(h, s, ja), v),
                    None => 0.0,
                };
                q.push(rew + cont);
            }
        }
        q
    }

    /// States reachable at each step from the initial state under some joint action.
    pub fn reachable_states(&self) -> Vec<Vec<bool>> {
        let mut out = vec![vec![false; self.num_states]; self.horizon];
        out[0][self.initial_state] = true;
        for h in 0..self.horizon - 1 {
            for s in 0..self.num_states {
                if !out[h][s] {
                    continue;
                }
                for ja in 0..self.joint {
                    for (sp, &p) in self.transition_row(h, s, ja).iter().enumerate() {
                        if p > 0.0 {
                            out[h + 1][sp] = true;
                        }
                    }
                }
            }
        }
        out
    }

    /// General-sum copy of a zero-sum game with `r_2 = 1 - r_1` (same equilibria).
    pub fn to_constant_sum(&self) -> Result<MarkovGame> {
        self.require_zero_sum()?;
        let mut reward = self.reward.clone();
        reward.extend(self.reward.iter().map(|r| 1.0 - r));
        MarkovGame::new(
            self.horizon,
            self.num_states,
            self.action_counts.clone(),
            false,
            self.initial_state,
            reward,
            self.transition.clone(),
        )
    }

    pub fn to_file(&self) -> GameFile {
        let tables = if self.zero_sum { 1 } else { self.players() };
        let reward = (0..tables)
            .map(|i| {
                (0..self.horizon)
                    .map(|h| (0..self.num_states).map(|s| self.reward_slice(i, h, s).to_vec()).collect())
                    .collect()
            })
            .collect();
        let transition = (0..self.horizon)
            .map(|h| {
                (0..self.num_states)
                    .map(|s| (0..self.joint).map(|ja| self.transition_row(h, s, ja).to_vec()).collect())
                    .collect()
            })
            .collect();
        GameFile {
            horizon: self.horizon,
            num_states: self.num_states,
            players: self.players(),
            zero_sum: self.zero_sum,
            action_counts: self.action_counts.clone(),
            initial_state: self.initial_state,
            reward,
            transition,
        }
    }

    pub fn from_file(file: GameFile) -> Result<Self> {
        if file.players != file.action_counts.len() {
            return Err(Error::Shape(format!(
                "players = {} but {} action counts given",
                file.players,
                file.action_counts.len()
            )));
        }
        let reward: Vec<f64> = file.reward.into_iter().flatten().flatten().flatten().collect();
        let transition: Vec<f64> = file.transition.into_iter().flatten().flatten().flatten().collect();
        Self::new(
            file.horizon,
            file.num_states,
            file.action_counts,
            file.zero_sum,
            file.initial_state,
            reward,
            transition,
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path, &self.to_file())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file: GameFile = read_json(path.as_ref())?;
        Self::from_file(file)
    }
}

/// On-disk layout of a game.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GameFile {
    pub horizon: usize,
    pub num_states: usize,
    pub players: usize,
    pub zero_sum: bool,
    pub action_counts: Vec<usize>,
    pub initial_state: usize,
    /// `[i][h][s][joint_a]`
    pub reward: Vec<Vec<Vec<Vec<f64>>>>,
    /// `[h][s][joint_a][s']`
    pub transition: Vec<Vec<Vec<Vec<f64>>>>,
}

/// A Markov policy `pi[h][s][a]` of one player.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovPolicy {
    pub player: usize,
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    dist: Vec<f64>,
}

impl MarkovPolicy {
    pub fn uniform(player: usize, horizon: usize, num_states: usize, num_actions: usize) -> Self {
        let p = 1.0 / num_actions as f64;
        Self { player, horizon, num_states, num_actions, dist: vec![p; horizon * num_states * num_actions] }
    }

    pub fn uniform_for(game: &MarkovGame, player: usize) -> Self {
        Self::uniform(player, game.horizon(), game.num_states(), game.action_counts()[player])
    }

    pub fn from_flat(
        player: usize,
        horizon: usize,
        num_states: usize,
        num_actions: usize,
        dist: Vec<f64>,
    ) -> Result<Self> {
        if dist.len() != horizon * num_states * num_actions {
            return Err(Error::Shape(format!(
                "policy has {} entries, expected {}",
                dist.len(),
                horizon * num_states * num_actions
            )));
        }
        let policy = Self { player, horizon, num_states, num_actions, dist };
        policy.validate()?;
        Ok(policy)
    }

    pub fn validate(&self) -> Result<()> {
        for (k, row) in self.dist.chunks(self.num_actions).enumerate() {
            let total: f64 = row.iter().sum();
            if row.iter().any(|p| !(*p >= -POLICY_SUM_TOL)) || (total - 1.0).abs() > POLICY_SUM_TOL {
                return Err(Error::InvalidPolicy(format!(
                    "row {k} (h={}, s={}) is not a distribution",
                    k / self.num_states,
                    k % self.num_states
                )));
            }
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }
    pub fn num_states(&self) -> usize {
        self.num_states
    }
    pub fn num_actions(&self) -> usize {
        self.num_actions
    }
    pub fn as_flat(&self) -> &[f64] {
        &self.dist
    }

    pub fn get(&self, h: usize, s: usize) -> &[f64] {
        let base = (h * self.num_states + s) * self.num_actions;
        &self.dist[base..base + self.num_actions]
    }

    pub fn get_mut(&mut self, h: usize, s: usize) -> &mut [f64] {
        let base = (h * self.num_states + s) * self.num_actions;
        &mut self.dist[base..base + self.num_actions]
    }

    /// All states' distributions at step `h`, flattened `[s][a]`.
    pub fn step_slice(&self, h: usize) -> &[f64] {
        let len = self.num_states * self.num_actions;
        &self.dist[h * len..(h + 1) * len]
    }

    pub(crate) fn check_against(&self, game: &MarkovGame, player: usize) -> Result<()> {
        if self.horizon != game.horizon()
            || self.num_states != game.num_states()
            || self.num_actions != game.action_counts()[player]
        {
            return Err(Error::Shape(format!(
                "policy shape (H={}, S={}, A={}) does not match player {player} of the game",
                self.horizon, self.num_states, self.num_actions
            )));
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &MarkovPolicy) -> f64 {
        self.dist.iter().zip(&other.dist).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    pub fn to_file(&self) -> PolicyFile {
        PolicyFile {
            player: self.player,
            dist: (0..self.horizon)
                .map(|h| (0..self.num_states).map(|s| self.get(h, s).to_vec()).collect())
                .collect(),
        }
    }

    pub fn from_file(file: PolicyFile) -> Result<Self> {
        let horizon = file.dist.len();
        let num_states = file.dist.first().map_or(0, Vec::len);
        let num_actions = file.dist.first().and_then(|d| d.first()).map_or(0, Vec::len);
        if horizon == 0 || num_states == 0 || num_actions == 0 {
            return Err(Error::Shape("empty policy".into()));
        }
        if file.dist.iter().any(|d| d.len() != num_states || d.iter().any(|r| r.len() != num_actions)) {
            return Err(Error::Shape("ragged policy tensor".into()));
        }
        let dist = file.dist.into_iter().flatten().flatten().collect();
        Self::from_flat(file.player, horizon, num_states, num_actions, dist)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path, &self.to_file())
    }

    /// Loads a single policy object or an array of them.
    pub fn load_many(path: impl AsRef<Path>) -> Result<Vec<Self>> {
        let value: serde_json::Value = read_json(path.as_ref())?;
        let files: Vec<PolicyFile> = if value.is_array() {
            serde_json::from_value(value).map_err(|e| Error::json(path.as_ref(), e))?
        } else {
            vec![serde_json::from_value(value).map_err(|e| Error::json(path.as_ref(), e))?]
        };
        files.into_iter().map(Self::from_file).collect()
    }

    pub fn save_many(policies: &[MarkovPolicy], path: impl AsRef<Path>) -> Result<()> {
        let files: Vec<PolicyFile> = policies.iter().map(MarkovPolicy::to_file).collect();
        write_json(path, &files)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyFile {
    pub player: usize,
    /// `[h][s][a]`
    pub dist: Vec<Vec<Vec<f64>>>,
}

/// `Q[h][s][joint_a]` and `V[h][s]`, in the reward units of one player.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTables {
    pub horizon: usize,
    pub num_states: usize,
    pub joint: usize,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
}

impl ValueTables {
    pub fn zeros(horizon: usize, num_states: usize, joint: usize) -> Self {
        Self { horizon, num_states, joint, q: vec![0.0; horizon * num_states * joint], v: vec![0.0; horizon * num_states] }
    }

    pub fn q_at(&self, h: usize, s: usize) -> &[f64] {
        let base = (h * self.num_states + s) * self.joint;
        &self.q[base..base + self.joint]
    }

    pub fn q_step(&self, h: usize) -> &[f64] {
        let len = self.num_states * self.joint;
        &self.q[h * len..(h + 1) * len]
    }

    pub fn v_at(&self, h: usize, s: usize) -> f64 {
        self.v[h * self.num_states + s]
    }

    pub fn v_step(&self, h: usize) -> &[f64] {
        &self.v[h * self.num_states..(h + 1) * self.num_states]
    }

    fn set_step(&mut self, h: usize, q: &[f64], v: &[f64]) {
        let len = self.num_states * self.joint;
        self.q[h * len..(h + 1) * len].copy_from_slice(q);
        self.v[h * self.num_states..(h + 1) * self.num_states].copy_from_slice(v);
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `mu^T M nu` for a row-major `A x B` matrix.
pub fn bilinear(m: &[f64], mu: &[f64], nu: &[f64]) -> f64 {
    let b = nu.len();
    mu.iter().enumerate().map(|(a, &p)| p * dot(&m[a * b..(a + 1) * b], nu)).sum()
}

/// `M nu` (the max-player's payoff vector).
pub fn row_payoffs(m: &[f64], nu: &[f64]) -> Vec<f64> {
    m.chunks(nu.len()).map(|row| dot(row, nu)).collect()
}

/// `M^T mu` (the min-player's loss vector).
pub fn col_payoffs(m: &[f64], mu: &[f64]) -> Vec<f64> {
    let b = m.len() / mu.len();
    let mut out = vec![0.0; b];
    for (row, &p) in m.chunks(b).zip(mu) {
        for (o, x) in out.iter_mut().zip(row) {
            *o += p * x;
        }
    }
    out
}

/// Product distribution over joint actions, row-major.
pub fn joint_distribution(dists: &[&[f64]]) -> Vec<f64> {
    let mut out = vec![1.0];
    for d in dists {
        let mut next = Vec::with_capacity(out.len() * d.len());
        for &p in &out {
            next.extend(d.iter().map(|q| p * q));
        }
        out = next;
    }
    out
}

/// `[Q pi_{-i}](a_i)`: expectation of `q` over all players but `player`.
pub fn marginal_payoffs(q: &[f64], dists: &[&[f64]], player: usize) -> Vec<f64> {
    let counts: Vec<usize> = dists.iter().map(|d| d.len()).collect();
    let mut out = vec![0.0; counts[player]];
    let mut actions = vec![0usize; counts.len()];
    for (ja, &value) in q.iter().enumerate() {
        let mut rest = ja;
        for (slot, n) in actions.iter_mut().zip(&counts).rev() {
            *slot = rest % n;
            rest /= n;
        }
        let weight: f64 = dists
            .iter()
            .zip(&actions)
            .enumerate()
            .filter(|(k, _)| *k != player)
            .map(|(_, (d, &a))| d[a])
            .product();
        out[actions[player]] += weight * value;
    }
    out
}

/// One Bellman backup at step `h` for a zero-sum game under per-state
/// policies `mu`, `nu` (flattened `[s][a]`, `[s][b]`).
pub fn bellman_backup(
    game: &MarkovGame,
    h: usize,
    v_next: Option<&[f64]>,
    mu: &[f64],
    nu: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (a, b) = game.require_zero_sum()?;
    let s_count = game.num_states();
    if h >= game.horizon() {
        return Err(Error::Shape(format!("step {h} outside horizon {}", game.horizon())));
    }
    if v_next.is_some_and(|v| v.len() != s_count) || mu.len() != s_count * a || nu.len() != s_count * b {
        return Err(Error::Shape("bellman_backup inputs do not match the game".into()));
    }
    let q = game.q_backup(0, h, v_next);
    let v = (0..s_count)
        .map(|s| bilinear(&q[s * a * b..(s + 1) * a * b], &mu[s * a..(s + 1) * a], &nu[s * b..(s + 1) * b]))
        .collect();
    Ok((q, v))
}

/// `Q^{mu,nu}`, `V^{mu,nu}` by backward induction.
pub fn policy_eval(game: &MarkovGame, mu: &MarkovPolicy, nu: &MarkovPolicy) -> Result<ValueTables> {
    let (a, b) = game.require_zero_sum()?;
    mu.check_against(game, 0)?;
    nu.check_against(game, 1)?;
    let mut out = ValueTables::zeros(game.horizon(), game.num_states(), a * b);
    for h in (0..game.horizon()).rev() {
        let v_next = (h + 1 < game.horizon()).then(|| out.v_step(h + 1).to_vec());
        let (q, v) = bellman_backup(game, h, v_next.as_deref(), mu.step_slice(h), nu.step_slice(h))?;
        out.set_step(h, &q, &v);
    }
    Ok(out)
}

/// Values of every player under a Markov product policy.
pub fn policy_eval_general(game: &MarkovGame, policies: &[MarkovPolicy]) -> Result<Vec<ValueTables>> {
    if policies.len() != game.players() {
        return Err(Error::Shape("one policy per player required".into()));
    }
    for (i, p) in policies.iter().enumerate() {
        p.check_against(game, i)?;
    }
    let tables = if game.is_zero_sum() { 1 } else { game.players() };
    let mut out = Vec::with_capacity(tables);
    for i in 0..tables {
        let mut vt = ValueTables::zeros(game.horizon(), game.num_states(), game.joint_actions());
        for h in (0..game.horizon()).rev() {
            let v_next = (h + 1 < game.horizon()).then(|| vt.v_step(h + 1).to_vec());
            let q = game.q_backup(i, h, v_next.as_deref());
            let v: Vec<f64> = (0..game.num_states())
                .map(|s| {
                    let dists: Vec<&[f64]> = policies.iter().map(|p| p.get(h, s)).collect();
                    dot(&joint_distribution(&dists), &q[s * game.joint_actions()..(s + 1) * game.joint_actions()])
                })
                .collect();
            vt.set_step(h, &q, &v);
        }
        out.push(vt);
    }
    Ok(out)
}

/// Best response of `responder` against the Markov policies of everyone else.
///
/// `opponents` holds one policy per other player (each tagged with its
/// `player` index). Values are in the responder's reward units, except for the
/// zero-sum min-player, whose values stay in the max-player's units and are
/// minimized (`V^{mu,dagger}`). Ties go to the lowest action index.
pub fn best_response_value(
    game: &MarkovGame,
    opponents: &[&MarkovPolicy],
    responder: usize,
) -> Result<(ValueTables, MarkovPolicy)> {
    let m = game.players();
    if responder >= m {
        return Err(Error::Shape(format!("responder {responder} out of range")));
    }
    let mut slots: Vec<Option<&MarkovPolicy>> = vec![None; m];
    for p in opponents {
        if p.player >= m || p.player == responder || slots[p.player].is_some() {
            return Err(Error::Shape(format!("unexpected opponent policy for player {}", p.player)));
        }
        p.check_against(game, p.player)?;
        slots[p.player] = Some(p);
    }
    if slots.iter().enumerate().any(|(i, s)| i != responder && s.is_none()) {
        return Err(Error::Shape("missing opponent policy".into()));
    }
    let minimize = game.is_zero_sum() && responder == 1;
    let n_resp = game.action_counts()[responder];
    let joint = game.joint_actions();
    let mut values = ValueTables::zeros(game.horizon(), game.num_states(), joint);
    let mut policy = MarkovPolicy::uniform_for(game, responder);
    let resp_unit = vec![0.0; n_resp];
    for h in (0..game.horizon()).rev() {
        let v_next = (h + 1 < game.horizon()).then(|| values.v_step(h + 1).to_vec());
        let q = game.q_backup(responder, h, v_next.as_deref());
        let mut v = Vec::with_capacity(game.num_states());
        for s in 0..game.num_states() {
            let dists: Vec<&[f64]> = (0..m)
                .map(|i| if i == responder { resp_unit.as_slice() } else { slots[i].unwrap().get(h, s) })
                .collect();
            let payoffs = marginal_payoffs(&q[s * joint..(s + 1) * joint], &dists, responder);
            let (best, val) = if minimize { argmin(&payoffs) } else { argmax(&payoffs) };
            let row = policy.get_mut(h, s);
            row.iter_mut().for_each(|x| *x = 0.0);
            row[best] = 1.0;
            v.push(val);
        }
        values.set_step(h, &q, &v);
    }
    Ok((values, policy))
}

pub(crate) fn argmax(xs: &[f64]) -> (usize, f64) {
    let mut best = (0, xs[0]);
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > best.1 {
            best = (i, x);
        }
    }
    best
}

pub(crate) fn argmin(xs: &[f64]) -> (usize, f64) {
    let mut best = (0, xs[0]);
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x < best.1 {
            best = (i, x);
        }
    }
    best
}

pub(crate) fn max_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub(crate) fn min_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Nash values `Q*`, `V*` together with the per-state equilibrium policies
/// returned by the matrix solver.
pub fn nash_solution(game: &MarkovGame) -> Result<(ValueTables, MarkovPolicy, MarkovPolicy)> {
    let (a, b) = game.require_zero_sum()?;
    let mut values = ValueTables::zeros(game.horizon(), game.num_states(), a * b);
    let mut mu = MarkovPolicy::uniform_for(game, 0);
    let mut nu = MarkovPolicy::uniform_for(game, 1);
    for h in (0..game.horizon()).rev() {
        let v_next = (h + 1 < game.horizon()).then(|| values.v_step(h + 1).to_vec());
        let q = game.q_backup(0, h, v_next.as_deref());
        let mut v = Vec::with_capacity(game.num_states());
        for s in 0..game.num_states() {
            let sol = matrix_ne(&q[s * a * b..(s + 1) * a * b], a, b)?;
            mu.get_mut(h, s).copy_from_slice(&sol.row);
            nu.get_mut(h, s).copy_from_slice(&sol.col);
            v.push(sol.value);
        }
        values.set_step(h, &q, &v);
    }
    Ok((values, mu, nu))
}

pub fn nash_values(game: &MarkovGame) -> Result<ValueTables> {
    nash_solution(game).map(|(v, _, _)| v)
}

/// `V_1^{dagger,nu}(s_1) - V_1^{mu,dagger}(s_1)`.
pub fn ne_gap(game: &MarkovGame, mu: &MarkovPolicy, nu: &MarkovPolicy) -> Result<f64> {
    game.require_zero_sum()?;
    let (up, _) = best_response_value(game, &[nu], 0)?;
    let (low, _) = best_response_value(game, &[mu], 1)?;
    let s1 = game.initial_state();
    Ok(up.v_at(0, s1) - low.v_at(0, s1))
}

/// Exploitability of the step-`h` policies against `Q*_h`, maximized over
/// the states reachable at step `h`.
pub fn layer_ne_gap(
    game: &MarkovGame,
    mu: &MarkovPolicy,
    nu: &MarkovPolicy,
    h: usize,
    qstar: &ValueTables,
) -> Result<f64> {
    let reach = game.reachable_states();
    layer_ne_gap_with(game, mu, nu, h, qstar, &reach[h])
}

pub(crate) fn layer_ne_gap_with(
    game: &MarkovGame,
    mu: &MarkovPolicy,
    nu: &MarkovPolicy,
    h: usize,
    qstar: &ValueTables,
    reachable: &[bool],
) -> Result<f64> {
    game.require_zero_sum()?;
    if h >= game.horizon() {
        return Err(Error::Shape(format!("step {h} outside horizon")));
    }
    let mut gap = f64::NEG_INFINITY;
    for s in (0..game.num_states()).filter(|&s| reachable[s]) {
        let q = qstar.q_at(h, s);
        let up = max_of(&row_payoffs(q, nu.get(h, s)));
        let low = min_of(&col_payoffs(q, mu.get(h, s)));
        gap = gap.max(up - low);
    }
    Ok(gap)
}

/// The two-step example game with a low-reward first layer, plus the
/// non-uniform initialization `(mu^0, nu^0)` used by the convergence study.
///
/// States: `0 = s0`, `1 = s11`, `2 = s12`, `3 = s21`, `4 = s22`. At step 0
/// joint action `(a_i, b_j)` moves deterministically to `s_ij`; the step-1
/// transitions are irrelevant (self loops).
pub fn make_two_layer_example() -> (MarkovGame, MarkovPolicy, MarkovPolicy) {
    let (h_count, s_count, joint) = (2, 5, 4);
    let mut reward = vec![0.0; h_count * s_count * joint];
    let mut transition = vec![0.0; h_count * s_count * joint * s_count];
    for s in 0..s_count {
        for (h, scale) in [(0, 0.1), (1, 1.0)] {
            let base = (h * s_count + s) * joint;
            reward[base] = scale; // (a1, b1)
            reward[base + 3] = scale; // (a2, b2)
        }
        for ja in 0..joint {
            transition[((s * joint) + ja) * s_count + 1 + ja] = 1.0;
            transition[((s_count + s) * joint + ja) * s_count + s] = 1.0;
        }
    }
    let game = MarkovGame::new(h_count, s_count, vec![2, 2], true, 0, reward, transition)
        .expect("two-layer example is well formed");

    let mut mu = MarkovPolicy::uniform(0, h_count, s_count, 2);
    let mut nu = MarkovPolicy::uniform(1, h_count, s_count, 2);
    mu.get_mut(0, 0).copy_from_slice(&[0.3, 0.7]);
    nu.get_mut(0, 0).copy_from_slice(&[0.7, 0.3]);
    let layer2: [(usize, [f64; 2], [f64; 2]); 4] = [
        (1, [0.248, 0.752], [0.248, 0.752]),
        (2, [0.500, 0.500], [0.168, 0.832]),
        (3, [0.500, 0.500], [0.168, 0.832]),
        (4, [0.752, 0.248], [0.248, 0.752]),
    ];
    for (s, m, n) in layer2 {
        mu.get_mut(1, s).copy_from_slice(&m);
        nu.get_mut(1, s).copy_from_slice(&n);
    }
    (game, mu, nu)
}

/// Random game: i.i.d. uniform rewards and Dirichlet(1) transition rows.
pub fn make_random_game(
    seed: u64,
    horizon: usize,
    num_states: usize,
    action_counts: &[usize],
    zero_sum: bool,
) -> Result<MarkovGame> {
    if horizon == 0 || num_states == 0 || action_counts.iter().any(|&a| a == 0) {
        return Err(Error::InvalidGame("sizes must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let joint: usize = action_counts.iter().product();
    let tables = if zero_sum { 1 } else { action_counts.len() };
    let reward: Vec<f64> = (0..tables * horizon * num_states * joint).map(|_| rng.random::<f64>()).collect();
    let mut transition = Vec::with_capacity(horizon * num_states * joint * num_states);
    for _ in 0..horizon * num_states * joint {
        let row: Vec<f64> = (0..num_states).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = row.iter().sum();
        transition.extend(row.iter().map(|x| x / total));
    }
    MarkovGame::new(horizon, num_states, action_counts.to_vec(), zero_sum, 0, reward, transition)
}

fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string(value).map_err(|e| Error::json(path, e))?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}
