//! The policy-update / value-update loop for two-player zero-sum games, its
//! V-table form, and the two-sided-value OFTRL variant.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use crate::clock::Instant;

use crate::error::{Error, Result};
use crate::game::{bilinear, max_of, min_of, ne_gap, nash_values, layer_ne_gap_with, MarkovGame, MarkovPolicy, ValueTables};
use crate::learners::{LearnerKind, LearnerSpec, MatrixLearner, Prediction, DEFAULT_HISTORY_CAP};
use crate::schedule::Schedule;

/// Slack used when checking the value-error recursion.
pub const RECURSION_TOL: f64 = 1e-9;
/// Floor applied to gaps before taking logarithms.
pub const GAP_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Ftrl,
    Oftrl,
    Gda,
    NashQ,
    NashPi,
    Inpg,
    ModOftrl,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Ftrl,
        Algorithm::Oftrl,
        Algorithm::Gda,
        Algorithm::NashQ,
        Algorithm::NashPi,
        Algorithm::Inpg,
        Algorithm::ModOftrl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Ftrl => "ftrl",
            Algorithm::Oftrl => "oftrl",
            Algorithm::Gda => "gda",
            Algorithm::NashQ => "nash-q",
            Algorithm::NashPi => "nash-pi",
            Algorithm::Inpg => "inpg",
            Algorithm::ModOftrl => "mod-oftrl",
        }
    }

    pub fn learner_kind(self) -> LearnerKind {
        match self {
            Algorithm::Ftrl => LearnerKind::Ftrl,
            Algorithm::Oftrl | Algorithm::ModOftrl => LearnerKind::Oftrl,
            Algorithm::Gda => LearnerKind::Gda,
            Algorithm::NashQ | Algorithm::NashPi => LearnerKind::MatrixNe,
            Algorithm::Inpg => LearnerKind::Hedge,
        }
    }

    /// Step size used when none is given.
    pub fn default_eta(self) -> EtaSpec {
        match self {
            Algorithm::Ftrl => EtaSpec::NashV,
            Algorithm::Gda => EtaSpec::Gda,
            Algorithm::Oftrl => EtaSpec::Oftrl56,
            Algorithm::ModOftrl => EtaSpec::ModOftrl,
            Algorithm::Inpg => EtaSpec::Power { coef: 1.0, exponent: -0.5 },
            Algorithm::NashQ | Algorithm::NashPi => EtaSpec::Const(0.0),
        }
    }

    /// Schedule forced by the algorithm, if any.
    pub fn forced_schedule(self, horizon: usize) -> Option<Schedule> {
        match self {
            Algorithm::NashPi | Algorithm::Inpg => Some(Schedule::Eager),
            Algorithm::ModOftrl => Some(Schedule::Alpha { horizon }),
            _ => None,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == key || a.name().replace('-', "") == key)
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`")))
    }
}

/// Quantities a step-size expression may depend on.
#[derive(Debug, Clone, Copy)]
pub struct EtaContext {
    pub iters: usize,
    pub horizon: usize,
    pub max_actions: usize,
    pub players: usize,
}

impl EtaContext {
    pub fn for_game(game: &MarkovGame, iters: usize) -> Self {
        Self { iters, horizon: game.horizon(), max_actions: game.max_actions(), players: game.players() }
    }
}

/// Step-size expression: `<c>`, `<c>*T^<p>`, or a preset keyword.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaSpec {
    Const(f64),
    Power { coef: f64, exponent: f64 },
    /// `4 / sqrt(H T)`
    NashV,
    /// `4 / sqrt((A v B) H T)`
    Gda,
    /// `1 / (16 H)`
    ModOftrl,
    /// `T^(-1/6)`
    Oftrl56,
    /// `(log A_max log T / (H^3 T))^(1/4) / sqrt(m - 1)`
    Cce,
}

impl EtaSpec {
    pub fn resolve(&self, ctx: EtaContext) -> f64 {
        let t = ctx.iters.max(1) as f64;
        let h = ctx.horizon as f64;
        match *self {
            EtaSpec::Const(c) => c,
            EtaSpec::Power { coef, exponent } => coef * t.powf(exponent),
            EtaSpec::NashV => 4.0 / (h * t).sqrt(),
            EtaSpec::Gda => 4.0 / (ctx.max_actions as f64 * h * t).sqrt(),
            EtaSpec::ModOftrl => 1.0 / (16.0 * h),
            EtaSpec::Oftrl56 => t.powf(-1.0 / 6.0),
            EtaSpec::Cce => {
                let num = (ctx.max_actions as f64).ln() * t.ln().max(1.0);
                (num / (h.powi(3) * t)).powf(0.25) / ((ctx.players.max(2) - 1) as f64).sqrt()
            }
        }
    }
}

impl fmt::Display for EtaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EtaSpec::Const(c) => write!(f, "{c}"),
            EtaSpec::Power { coef, exponent } => write!(f, "{coef}*T^{exponent}"),
            EtaSpec::NashV => f.write_str("nashv"),
            EtaSpec::Gda => f.write_str("gda"),
            EtaSpec::ModOftrl => f.write_str("mod-oftrl"),
            EtaSpec::Oftrl56 => f.write_str("oftrl56"),
            EtaSpec::Cce => f.write_str("cce"),
        }
    }
}

impl FromStr for EtaSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let text: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || Error::Config(format!("cannot parse step size `{s}`"));
        let spec = match text.to_ascii_lowercase().as_str() {
            "nashv" => EtaSpec::NashV,
            "gda" => EtaSpec::Gda,
            "mod-oftrl" | "modoftrl" => EtaSpec::ModOftrl,
            "oftrl56" => EtaSpec::Oftrl56,
            "cce" => EtaSpec::Cce,
            lower => {
                if let Some((coef, rest)) = lower.split_once('*') {
                    let exponent = rest.strip_prefix("t^").ok_or_else(bad)?;
                    let exponent = exponent.trim_start_matches('(').trim_end_matches(')');
                    EtaSpec::Power {
                        coef: coef.parse().map_err(|_| bad())?,
                        exponent: exponent.parse().map_err(|_| bad())?,
                    }
                } else if let Some(exponent) = lower.strip_prefix("t^") {
                    let exponent = exponent.trim_start_matches('(').trim_end_matches(')');
                    EtaSpec::Power { coef: 1.0, exponent: exponent.parse().map_err(|_| bad())? }
                } else {
                    EtaSpec::Const(lower.parse().map_err(|_| bad())?)
                }
            }
        };
        let finite = match spec {
            EtaSpec::Const(c) => c.is_finite() && c >= 0.0,
            EtaSpec::Power { coef, exponent } => coef.is_finite() && coef >= 0.0 && exponent.is_finite(),
            _ => true,
        };
        if finite {
            Ok(spec)
        } else {
            Err(bad())
        }
    }
}

/// When trace records are taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cadence {
    /// `1, ceil(1 * r), ceil(. * r), ...` plus the final step.
    Geometric(f64),
    Every(usize),
    FinalOnly,
}

impl Default for Cadence {
    fn default() -> Self {
        Cadence::Geometric(1.5)
    }
}

impl Cadence {
    pub fn checkpoints(&self, iters: usize) -> Vec<usize> {
        let mut out = Vec::new();
        match *self {
            Cadence::Geometric(ratio) => {
                let mut k = 1usize;
                while k < iters {
                    out.push(k);
                    k = (k + 1).max((k as f64 * ratio).ceil() as usize);
                }
            }
            Cadence::Every(n) => out.extend((n.max(1)..iters).step_by(n.max(1))),
            Cadence::FinalOnly => {}
        }
        if iters > 0 {
            out.push(iters);
        }
        out
    }
}

/// Configuration of one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub schedule: Schedule,
    pub eta: EtaSpec,
    pub iters: usize,
    pub cadence: Cadence,
    pub seed: u64,
    pub v_form: bool,
    pub kl_base_point: bool,
    pub diagnostics: bool,
    /// Starting point / KL base point `(mu^0, nu^0)`; uniform when absent.
    pub init: Option<(MarkovPolicy, MarkovPolicy)>,
}

impl RunConfig {
    /// Defaults: alpha schedule, the algorithm's default step size, geometric cadence.
    pub fn new(algorithm: Algorithm, horizon: usize, iters: usize) -> Self {
        let schedule = algorithm.forced_schedule(horizon).unwrap_or(Schedule::Alpha { horizon });
        Self {
            algorithm,
            schedule,
            eta: algorithm.default_eta(),
            iters,
            cadence: Cadence::default(),
            seed: 0,
            v_form: false,
            kl_base_point: false,
            diagnostics: false,
            init: None,
        }
    }

    /// Applies the schedules forced by the algorithm.
    pub fn normalized(mut self, horizon: usize) -> Self {
        if let Some(s) = self.algorithm.forced_schedule(horizon) {
            self.schedule = s;
        }
        self
    }

    pub fn eta_value(&self, game: &MarkovGame) -> f64 {
        self.eta.resolve(EtaContext::for_game(game, self.iters))
    }

    fn validate(&self, game: &MarkovGame) -> Result<()> {
        game.require_zero_sum()?;
        if self.iters == 0 {
            return Err(Error::Config("at least one iteration is required".into()));
        }
        if let Some(forced) = self.algorithm.forced_schedule(game.horizon()) {
            if forced != self.schedule {
                return Err(Error::Config(format!(
                    "{} requires the {} schedule",
                    self.algorithm,
                    forced.name()
                )));
            }
        }
        if self.schedule.beta(1)? != 1.0 {
            return Err(Error::Config("schedule must start with beta_1 = 1".into()));
        }
        if self.v_form && !matches!(self.algorithm, Algorithm::Ftrl | Algorithm::Gda) {
            return Err(Error::Config(format!("the V-table form is defined for ftrl and gda, not {}", self.algorithm)));
        }
        if self.v_form && !matches!(self.schedule, Schedule::Alpha { .. }) {
            return Err(Error::Config("the V-table form uses the alpha schedule".into()));
        }
        if self.kl_base_point && self.init.is_none() {
            return Err(Error::Config("base-point mode needs initial policies".into()));
        }
        if let Some((mu, nu)) = &self.init {
            mu.check_against(game, 0)?;
            nu.check_against(game, 1)?;
        }
        Ok(())
    }

    fn learner_spec(&self, game: &MarkovGame) -> LearnerSpec {
        let prediction =
            if self.algorithm == Algorithm::ModOftrl { Prediction::Current } else { Prediction::Previous };
        LearnerSpec {
            kind: self.algorithm.learner_kind(),
            eta: self.eta_value(game),
            schedule: self.schedule.clone(),
            prediction,
            history_cap: if self.diagnostics { DEFAULT_HISTORY_CAP } else { 0 },
        }
    }
}

/// One row of the convergence trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: usize,
    pub negap: f64,
    pub layer_gaps: Vec<f64>,
    pub max_reg: Option<f64>,
    pub max_delta: Option<f64>,
    pub elapsed_s: f64,
}

/// Outcome of the value-error recursion check.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RecursionCheck {
    pub checks: usize,
    pub violations: usize,
    /// Largest `delta - bound` seen (negative when every check passed).
    pub worst_margin: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub avg_mu: MarkovPolicy,
    pub avg_nu: MarkovPolicy,
    pub trace: Vec<TraceRecord>,
    pub eta: f64,
    pub recursion: Option<RecursionCheck>,
    /// Largest violation of `Q_low <= Q* <= Q_up` over checkpoints (two-sided OFTRL only).
    pub sandwich_violation: Option<f64>,
}

impl RunOutput {
    pub fn final_gap(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.negap)
    }
}

/// A stepping implementation of one of the loops.
pub trait Runner {
    fn game(&self) -> &MarkovGame;
    fn t(&self) -> usize;
    fn step(&mut self) -> Result<()>;
    fn averages(&self) -> (&MarkovPolicy, &MarkovPolicy);
    fn current(&self) -> (&MarkovPolicy, &MarkovPolicy);
    /// Per-step max over states of both players' weighted regrets.
    fn layer_regrets(&self) -> Result<Vec<f64>>;
    /// `||Q_h^t - Q*_h||_inf` for every `h`.
    fn deltas(&self, qstar: &ValueTables) -> Vec<f64>;
    fn learner(&self, h: usize, s: usize) -> &MatrixLearner;
    /// `max(Q_low - Q*, Q* - Q_up)` for loops that keep two-sided values.
    fn sandwich_violation(&self, _qstar: &ValueTables) -> Option<f64> {
        None
    }
}

/// State shared by all loops: per-state learners, iterates and averages.
#[derive(Debug, Clone)]
struct Core {
    game: MarkovGame,
    schedule: Schedule,
    uniform_average: bool,
    learners: Vec<MatrixLearner>,
    cur_mu: MarkovPolicy,
    cur_nu: MarkovPolicy,
    avg_mu: MarkovPolicy,
    avg_nu: MarkovPolicy,
    t: usize,
    beta: f64,
}

impl Core {
    fn new(game: &MarkovGame, config: &RunConfig) -> Result<Self> {
        config.validate(game)?;
        let spec = config.learner_spec(game);
        let (a, b) = game.require_zero_sum()?;
        let (hn, sn) = (game.horizon(), game.num_states());
        let mut learners = Vec::with_capacity(hn * sn);
        for h in 0..hn {
            for s in 0..sn {
                let (bm, bn) = match (&config.init, config.kl_base_point) {
                    (Some((mu, nu)), true) => (mu.get(h, s).to_vec(), nu.get(h, s).to_vec()),
                    _ => (vec![1.0 / a as f64; a], vec![1.0 / b as f64; b]),
                };
                learners.push(MatrixLearner::new(&spec, bm, bn, (hn - h) as f64)?);
            }
        }
        let mu = MarkovPolicy::uniform_for(game, 0);
        let nu = MarkovPolicy::uniform_for(game, 1);
        Ok(Self {
            game: game.clone(),
            schedule: config.schedule.clone(),
            uniform_average: config.algorithm == Algorithm::Inpg,
            learners,
            cur_mu: mu.clone(),
            cur_nu: nu.clone(),
            avg_mu: mu,
            avg_nu: nu,
            t: 0,
            beta: 1.0,
        })
    }

    fn begin_step(&mut self) -> Result<()> {
        self.t += 1;
        self.beta = self.schedule.beta(self.t)?;
        Ok(())
    }

    fn idx(&self, h: usize, s: usize) -> usize {
        h * self.game.num_states() + s
    }

    fn update_policies(&mut self, h: usize) -> Result<()> {
        for s in 0..self.game.num_states() {
            let i = self.idx(h, s);
            let t = self.t;
            let (mu, nu) = self.learners[i]
                .next_policies()
                .map_err(|e| Error::Learner { t, h, s, source: Box::new(e) })?;
            self.cur_mu.get_mut(h, s).copy_from_slice(mu);
            self.cur_nu.get_mut(h, s).copy_from_slice(nu);
        }
        Ok(())
    }

    fn observe(&mut self, h: usize, q_max: &[f64], q_min: &[f64]) -> Result<()> {
        let joint = self.game.joint_actions();
        for s in 0..self.game.num_states() {
            let i = self.idx(h, s);
            let t = self.t;
            self.learners[i]
                .observe_pair(&q_max[s * joint..(s + 1) * joint], &q_min[s * joint..(s + 1) * joint])
                .map_err(|e| Error::Learner { t, h, s, source: Box::new(e) })?;
        }
        Ok(())
    }

    fn finish_step(&mut self) {
        let w = if self.uniform_average { 1.0 / self.t as f64 } else { self.beta };
        mix_into(&mut self.avg_mu, &self.cur_mu, w);
        mix_into(&mut self.avg_nu, &self.cur_nu, w);
    }

    /// `mu^T Q nu` per state at step `h`.
    fn state_values(&self, h: usize, q: &[f64]) -> Vec<f64> {
        let joint = self.game.joint_actions();
        (0..self.game.num_states())
            .map(|s| bilinear(&q[s * joint..(s + 1) * joint], self.cur_mu.get(h, s), self.cur_nu.get(h, s)))
            .collect()
    }

    fn layer_regrets(&self) -> Result<Vec<f64>> {
        let sn = self.game.num_states();
        (0..self.game.horizon())
            .map(|h| {
                let mut worst = f64::NEG_INFINITY;
                for s in 0..sn {
                    let (rm, rn) = self.learners[h * sn + s].regrets()?;
                    worst = worst.max(rm).max(rn);
                }
                Ok(worst)
            })
            .collect()
    }
}

fn mix_into(avg: &mut MarkovPolicy, cur: &MarkovPolicy, w: f64) {
    let keep = 1.0 - w;
    let mut flat = avg.as_flat().to_vec();
    for (x, c) in flat.iter_mut().zip(cur.as_flat()) {
        *x = keep * *x + w * c;
    }
    *avg = MarkovPolicy::from_flat(avg.player, avg.horizon(), avg.num_states(), avg.num_actions(), flat)
        .expect("convex combination of distributions");
}

fn sup_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Q-table loop: `Q_h^t = (1 - beta_t) Q_h^{t-1} + beta_t (r_h + P_h[mu^T Q_{h+1}^t nu])`.
#[derive(Debug, Clone)]
pub struct QFormRunner {
    core: Core,
    /// `[h][s][a * B + b]`
    q: Vec<f64>,
}

impl QFormRunner {
    pub fn new(game: &MarkovGame, config: &RunConfig) -> Result<Self> {
        let core = Core::new(game, config)?;
        let (hn, sn, joint) = (game.horizon(), game.num_states(), game.joint_actions());
        let mut q = vec![0.0; hn * sn * joint];
        for h in 0..hn {
            q[h * sn * joint..(h + 1) * sn * joint].iter_mut().for_each(|x| *x = (hn - h) as f64);
        }
        Ok(Self { core, q })
    }

    pub fn q_step(&self, h: usize) -> &[f64] {
        let len = self.core.game.num_states() * self.core.game.joint_actions();
        &self.q[h * len..(h + 1) * len]
    }
}

impl Runner for QFormRunner {
    fn game(&self) -> &MarkovGame {
        &self.core.game
    }
    fn t(&self) -> usize {
        self.core.t
    }

    fn step(&mut self) -> Result<()> {
        self.core.begin_step()?;
        let beta = self.core.beta;
        let len = self.core.game.num_states() * self.core.game.joint_actions();
        let hn = self.core.game.horizon();
        for h in (0..hn).rev() {
            self.core.update_policies(h)?;
            let v_next = (h + 1 < hn).then(|| self.core.state_values(h + 1, &self.q[(h + 1) * len..(h + 2) * len]));
            let target = self.core.game.q_backup(0, h, v_next.as_deref());
            let slot = &mut self.q[h * len..(h + 1) * len];
            for (x, y) in slot.iter_mut().zip(&target) {
                *x = (1.0 - beta) * *x + beta * y;
            }
            let q_h = self.q[h * len..(h + 1) * len].to_vec();
            self.core.observe(h, &q_h, &q_h)?;
        }
        self.core.finish_step();
        Ok(())
    }

    fn averages(&self) -> (&MarkovPolicy, &MarkovPolicy) {
        (&self.core.avg_mu, &self.core.avg_nu)
    }
    fn current(&self) -> (&MarkovPolicy, &MarkovPolicy) {
        (&self.core.cur_mu, &self.core.cur_nu)
    }
    fn layer_regrets(&self) -> Result<Vec<f64>> {
        self.core.layer_regrets()
    }
    fn deltas(&self, qstar: &ValueTables) -> Vec<f64> {
        (0..self.core.game.horizon()).map(|h| sup_dist(self.q_step(h), qstar.q_step(h))).collect()
    }
    fn learner(&self, h: usize, s: usize) -> &MatrixLearner {
        &self.core.learners[self.core.idx(h, s)]
    }
}

/// V-table loop: learners see `r_h + P_h V_{h+1}^t`, and
/// `V_h^t = (1 - alpha_t) V_h^{t-1} + alpha_t mu^T (r_h + P_h V_{h+1}^t) nu`.
#[derive(Debug, Clone)]
pub struct VFormRunner {
    core: Core,
    /// `[h][s]`
    v: Vec<f64>,
    /// Last matrices fed to the learners, `[h][s][joint]`.
    fed: Vec<f64>,
}

impl VFormRunner {
    pub fn new(game: &MarkovGame, config: &RunConfig) -> Result<Self> {
        if !config.v_form {
            return Err(Error::Config("VFormRunner needs v_form = true".into()));
        }
        let core = Core::new(game, config)?;
        let (hn, sn, joint) = (game.horizon(), game.num_states(), game.joint_actions());
        let mut v = vec![0.0; hn * sn];
        for h in 0..hn {
            v[h * sn..(h + 1) * sn].iter_mut().for_each(|x| *x = (hn - h) as f64);
        }
        Ok(Self { core, v, fed: vec![0.0; hn * sn * joint] })
    }

    pub fn v_step(&self, h: usize) -> &[f64] {
        let sn = self.core.game.num_states();
        &self.v[h * sn..(h + 1) * sn]
    }

    /// `r_h + P_h V_{h+1}^t` as last fed at step `h`.
    pub fn fed_step(&self, h: usize) -> &[f64] {
        let len = self.core.game.num_states() * self.core.game.joint_actions();
        &self.fed[h * len..(h + 1) * len]
    }
}

impl Runner for VFormRunner {
    fn game(&self) -> &MarkovGame {
        &self.core.game
    }
    fn t(&self) -> usize {
        self.core.t
    }

    fn step(&mut self) -> Result<()> {
        self.core.begin_step()?;
        let beta = self.core.beta;
        let (hn, sn) = (self.core.game.horizon(), self.core.game.num_states());
        let len = sn * self.core.game.joint_actions();
        for h in (0..hn).rev() {
            self.core.update_policies(h)?;
            let v_next = (h + 1 < hn).then(|| self.v[(h + 1) * sn..(h + 2) * sn].to_vec());
            let m = self.core.game.q_backup(0, h, v_next.as_deref());
            self.core.observe(h, &m, &m)?;
            let vals = self.core.state_values(h, &m);
            for (x, y) in self.v[h * sn..(h + 1) * sn].iter_mut().zip(&vals) {
                *x = (1.0 - beta) * *x + beta * y;
            }
            self.fed[h * len..(h + 1) * len].copy_from_slice(&m);
        }
        self.core.finish_step();
        Ok(())
    }

    fn averages(&self) -> (&MarkovPolicy, &MarkovPolicy) {
        (&self.core.avg_mu, &self.core.avg_nu)
    }
    fn current(&self) -> (&MarkovPolicy, &MarkovPolicy) {
        (&self.core.cur_mu, &self.core.cur_nu)
    }
    fn layer_regrets(&self) -> Result<Vec<f64>> {
        self.core.layer_regrets()
    }
    fn deltas(&self, qstar: &ValueTables) -> Vec<f64> {
        (0..self.core.game.horizon()).map(|h| sup_dist(self.fed_step(h), qstar.q_step(h))).collect()
    }
    fn learner(&self, h: usize, s: usize) -> &MatrixLearner {
        &self.core.learners[self.core.idx(h, s)]
    }
}

/// Two-sided value loop: the max-player learns on `Q_up`, the min-player on
/// `Q_low`, where `Q_up_h^t = r_h + P_h[max_a sum_i alpha_t^i (Q_up_{h+1}^i nu^i)(., a)]`
/// and `Q_low` mirrors it with the min-player's losses.
#[derive(Debug, Clone)]
pub struct ModOftrlRunner {
    core: Core,
    q_up: Vec<f64>,
    q_low: Vec<f64>,
}

impl ModOftrlRunner {
    pub fn new(game: &MarkovGame, config: &RunConfig) -> Result<Self> {
        if config.algorithm != Algorithm::ModOftrl {
            return Err(Error::Config("ModOftrlRunner runs mod-oftrl only".into()));
        }
        let core = Core::new(game, config)?;
        let len = game.horizon() * game.num_states() * game.joint_actions();
        Ok(Self { core, q_up: vec![0.0; len], q_low: vec![0.0; len] })
    }

    pub fn q_up_step(&self, h: usize) -> &[f64] {
        let len = self.core.game.num_states() * self.core.game.joint_actions();
        &self.q_up[h * len..(h + 1) * len]
    }

    pub fn q_low_step(&self, h: usize) -> &[f64] {
        let len = self.core.game.num_states() * self.core.game.joint_actions();
        &self.q_low[h * len..(h + 1) * len]
    }

}

impl Runner for ModOftrlRunner {
    fn game(&self) -> &MarkovGame {
        &self.core.game
    }
    fn t(&self) -> usize {
        self.core.t
    }

    fn step(&mut self) -> Result<()> {
        self.core.begin_step()?;
        let (hn, sn) = (self.core.game.horizon(), self.core.game.num_states());
        let len = sn * self.core.game.joint_actions();
        for h in (0..hn).rev() {
            self.core.update_policies(h)?;
            let (v_up, v_low) = if h + 1 < hn {
                let up: Vec<f64> =
                    (0..sn).map(|s| max_of(self.core.learners[(h + 1) * sn + s].weighted_row_payoffs())).collect();
                let low: Vec<f64> =
                    (0..sn).map(|s| min_of(&self.core.learners[(h + 1) * sn + s].weighted_col_payoffs())).collect();
                (Some(up), Some(low))
            } else {
                (None, None)
            };
            let up = self.core.game.q_backup(0, h, v_up.as_deref());
            let low = self.core.game.q_backup(0, h, v_low.as_deref());
            self.core.observe(h, &up, &low)?;
            self.q_up[h * len..(h + 1) * len].copy_from_slice(&up);
            self.q_low[h * len..(h + 1) * len].copy_from_slice(&low);
        }
        self.core.finish_step();
        Ok(())
    }

    fn averages(&self) -> (&MarkovPolicy, &MarkovPolicy) {
        (&self.core.avg_mu, &self.core.avg_nu)
    }
    fn current(&self) -> (&MarkovPolicy, &MarkovPolicy) {
        (&self.core.cur_mu, &self.core.cur_nu)
    }
    fn layer_regrets(&self) -> Result<Vec<f64>> {
        self.core.layer_regrets()
    }
    fn deltas(&self, qstar: &ValueTables) -> Vec<f64> {
        (0..self.core.game.horizon())
            .map(|h| sup_dist(self.q_up_step(h), qstar.q_step(h)).max(sup_dist(self.q_low_step(h), qstar.q_step(h))))
            .collect()
    }
    fn learner(&self, h: usize, s: usize) -> &MatrixLearner {
        &self.core.learners[self.core.idx(h, s)]
    }
    fn sandwich_violation(&self, qstar: &ValueTables) -> Option<f64> {
        let mut worst = f64::NEG_INFINITY;
        for ((lo, up), star) in self.q_low.iter().zip(&self.q_up).zip(&qstar.q) {
            worst = worst.max(lo - star).max(star - up);
        }
        Some(worst)
    }
}

/// Builds the runner matching the configuration.
pub fn make_runner(game: &MarkovGame, config: &RunConfig) -> Result<Box<dyn Runner + Send>> {
    Ok(if config.algorithm == Algorithm::ModOftrl {
        Box::new(ModOftrlRunner::new(game, config)?)
    } else if config.v_form {
        Box::new(VFormRunner::new(game, config)?)
    } else {
        Box::new(QFormRunner::new(game, config)?)
    })
}

/// Runs whichever loop `config` selects and records the trace.
pub fn run(game: &MarkovGame, config: &RunConfig) -> Result<RunOutput> {
    let runner = make_runner(game, config)?;
    drive(runner, game, config)
}

/// The Q-table loop.
pub fn run_framework(game: &MarkovGame, config: &RunConfig) -> Result<RunOutput> {
    drive(Box::new(QFormRunner::new(game, config)?), game, config)
}

/// The V-table loop (ftrl or gda with the alpha schedule).
pub fn run_v_form(game: &MarkovGame, config: &RunConfig) -> Result<RunOutput> {
    let mut config = config.clone();
    config.v_form = true;
    drive(Box::new(VFormRunner::new(game, &config)?), game, &config)
}

/// The two-sided value OFTRL loop.
pub fn run_mod_oftrl(game: &MarkovGame, config: &RunConfig) -> Result<RunOutput> {
    drive(Box::new(ModOftrlRunner::new(game, config)?), game, config)
}

fn drive(mut runner: Box<dyn Runner + Send>, game: &MarkovGame, config: &RunConfig) -> Result<RunOutput> {
    let start = Instant::now();
    let hn = game.horizon();
    let qstar = nash_values(game)?;
    let reach = game.reachable_states();
    let checkpoints = config.cadence.checkpoints(config.iters);
    let mut next_cp = checkpoints.iter().peekable();
    let mut trace = Vec::with_capacity(checkpoints.len());
    let mut recursion = config.diagnostics.then(RecursionCheck::default);
    if let Some(r) = recursion.as_mut() {
        r.worst_margin = f64::NEG_INFINITY;
    }
    let check_recursion = config.diagnostics && config.algorithm != Algorithm::ModOftrl;
    let mut mixed_next = vec![0.0; hn];
    let mut sandwich = None;

    for t in 1..=config.iters {
        runner.step()?;
        let is_cp = next_cp.peek().is_some_and(|&&c| c == t);
        let deltas = config.diagnostics.then(|| runner.deltas(&qstar));
        if check_recursion {
            let deltas = deltas.as_ref().unwrap();
            let regs = runner.layer_regrets()?;
            let beta = config.schedule.beta(t)?;
            let rec = recursion.as_mut().unwrap();
            for h in 0..hn {
                let (d_next, reg_next) = if h + 1 < hn { (deltas[h + 1], regs[h + 1]) } else { (0.0, 0.0) };
                mixed_next[h] = (1.0 - beta) * mixed_next[h] + beta * d_next;
                let margin = deltas[h] - (mixed_next[h] + reg_next);
                rec.checks += 1;
                rec.worst_margin = rec.worst_margin.max(margin);
                if margin > RECURSION_TOL {
                    rec.violations += 1;
                }
            }
        }
        if !is_cp {
            continue;
        }
        next_cp.next();
        let (mu, nu) = runner.averages();
        let negap = ne_gap(game, mu, nu)?;
        let layer_gaps =
            (0..hn).map(|h| layer_ne_gap_with(game, mu, nu, h, &qstar, &reach[h])).collect::<Result<Vec<_>>>()?;
        let max_reg = max_of(&runner.layer_regrets()?);
        if let Some(v) = runner.sandwich_violation(&qstar) {
            sandwich = Some(sandwich.unwrap_or(f64::NEG_INFINITY).max(v));
        }
        trace.push(TraceRecord {
            t,
            negap,
            layer_gaps,
            max_reg: Some(max_reg),
            max_delta: deltas.map(|d| max_of(&d)),
            elapsed_s: start.elapsed().as_secs_f64(),
        });
    }
    let (mu, nu) = runner.averages();
    Ok(RunOutput {
        avg_mu: mu.clone(),
        avg_nu: nu.clone(),
        trace,
        eta: config.eta_value(game),
        recursion,
        sandwich_violation: sandwich,
    })
}

/// Least-squares fit of `log(gap) = exponent * log(T) + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub exponent: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 3 {
        return Err(Error::Fit(format!("got {} points", points.len())));
    }
    if let Some((t, g)) = points.iter().find(|(t, g)| !(*g > 0.0) || !(*t > 0.0) || !g.is_finite()) {
        return Err(Error::Fit(format!("non-positive value at T={t}: gap={g}; floor gaps at {GAP_FLOOR:e} first")));
    }
    let xs: Vec<f64> = points.iter().map(|(t, _)| t.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, g)| g.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all points share the same T".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { (sxy * sxy) / (sxx * syy) };
    Ok(RateFit { exponent, intercept, r_squared })
}

pub fn floor_gap(gap: f64) -> f64 {
    gap.max(GAP_FLOOR)
}

/// Formats a float with 17 significant digits; `None` becomes an empty field.
pub fn fmt_num(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.16e}")).unwrap_or_default()
}

/// Writes the trace as CSV.
pub fn write_trace_csv<W: Write>(out: &mut W, trace: &[TraceRecord], horizon: usize) -> std::io::Result<()> {
    let mut header = String::from("t,negap");
    for h in 1..=horizon {
        header.push_str(&format!(",negap_layer_{h}"));
    }
    header.push_str(",max_reg,max_delta,elapsed_s");
    writeln!(out, "{header}")?;
    for r in trace {
        let mut line = format!("{},{}", r.t, fmt_num(Some(r.negap)));
        for h in 0..horizon {
            line.push(',');
            line.push_str(&fmt_num(r.layer_gaps.get(h).copied()));
        }
        line.push(',');
        line.push_str(&fmt_num(r.max_reg));
        line.push(',');
        line.push_str(&fmt_num(r.max_delta));
        line.push(',');
        line.push_str(&fmt_num(Some(r.elapsed_s)));
        writeln!(out, "{line}")?;
    }
    Ok(())
}
