//! Per-state matrix-game learners.
//!
//! Every learner works with gains (the max-player's payoff vector `Q nu`, or
//! the negated loss `-Q^T mu` for the min-player). Weighted sums are kept in
//! the scaled form `S_t = sum_i beta_t^i g_i`, a convex combination that
//! never overflows; the FTRL-style exponents are recovered from `S_t` through
//! ratios of the schedule weights.

mod lp;
mod projection;

pub use lp::{matrix_ne, MatrixSolution, NE_GAP_TOL};
pub use projection::project_simplex;

use crate::error::{Error, Result};
use crate::game::{col_payoffs, dot, max_of, row_payoffs};
use crate::schedule::Schedule;

/// Default number of past steps retained for brute-force checks.
pub const DEFAULT_HISTORY_CAP: usize = 64;

/// `p_a ∝ base_a * exp(x_a)`, with the maximum exponent subtracted first.
pub fn softmax_with_base(x: &[f64], base: &[f64]) -> Result<Vec<f64>> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("softmax exponent".into()));
    }
    let m = x
        .iter()
        .zip(base)
        .filter(|(_, &b)| b > 0.0)
        .map(|(v, _)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = x
        .iter()
        .zip(base)
        .map(|(v, &b)| if b > 0.0 { b * (v - m).exp() } else { 0.0 })
        .collect();
    let total: f64 = p.iter().sum();
    if !(total > 0.0) {
        return Err(Error::NonFinite("softmax normalizer".into()));
    }
    p.iter_mut().for_each(|v| *v /= total);
    Ok(p)
}

/// β-weighted gain average and realized payoff of one player.
#[derive(Debug, Clone)]
pub struct RegretAccumulator {
    schedule: Schedule,
    t: usize,
    last_beta: f64,
    gains: Vec<f64>,
    realized: f64,
}

impl RegretAccumulator {
    pub fn new(schedule: Schedule, num_actions: usize) -> Self {
        Self { schedule, t: 0, last_beta: 1.0, gains: vec![0.0; num_actions], realized: 0.0 }
    }

    pub fn t(&self) -> usize {
        self.t
    }

    /// `beta_t` of the most recent step.
    pub fn last_beta(&self) -> f64 {
        self.last_beta
    }

    /// `sum_i beta_t^i g_i`.
    pub fn weighted_gains(&self) -> &[f64] {
        &self.gains
    }

    /// `sum_i beta_t^i <pi^i, g_i>`.
    pub fn weighted_realized(&self) -> f64 {
        self.realized
    }

    pub fn record(&mut self, gain: &[f64], policy: &[f64]) -> Result<()> {
        if gain.len() != self.gains.len() || policy.len() != self.gains.len() {
            return Err(Error::Shape("gain/policy length does not match the accumulator".into()));
        }
        let beta = self.schedule.beta(self.t + 1)?;
        let keep = 1.0 - beta;
        for (s, g) in self.gains.iter_mut().zip(gain) {
            *s = keep * *s + beta * g;
        }
        self.realized = keep * self.realized + beta * dot(policy, gain);
        self.last_beta = beta;
        self.t += 1;
        Ok(())
    }

    /// `max_a sum_i beta_t^i g_i(a) - sum_i beta_t^i <pi^i, g_i>`.
    pub fn regret(&self) -> Result<f64> {
        if self.t == 0 {
            return Err(Error::EmptyHistory("no step recorded"));
        }
        Ok(max_of(&self.gains) - self.realized)
    }
}

/// Which past gain scales the optimistic prediction term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Prediction {
    /// `w_{t-1} g_{t-1}` (two-player zero-sum form).
    Previous,
    /// `w_t g_{t-1}` (general-sum and two-sided-value form).
    Current,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlayerRule {
    Ftrl,
    Oftrl(Prediction),
    Gda,
    Hedge,
    /// Policies are supplied from outside (exact matrix solver).
    External,
}

/// A single player's no-regret learner at one `(h, s)`.
#[derive(Debug, Clone)]
pub struct PlayerLearner {
    rule: PlayerRule,
    eta: f64,
    schedule: Schedule,
    base: Vec<f64>,
    policy: Vec<f64>,
    last_gain: Vec<f64>,
    logits: Vec<f64>,
    acc: RegretAccumulator,
    /// Step whose policy is currently emitted.
    t: usize,
    history_cap: usize,
    history: Vec<(Vec<f64>, Vec<f64>)>,
}

impl PlayerLearner {
    pub fn new(rule: PlayerRule, eta: f64, schedule: Schedule, base: Vec<f64>) -> Result<Self> {
        if base.is_empty() {
            return Err(Error::Shape("learner needs at least one action".into()));
        }
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(Error::Config(format!("step size must be finite and non-negative, got {eta}")));
        }
        let total: f64 = base.iter().sum();
        if base.iter().any(|p| !(*p >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidPolicy("base point is not a distribution".into()));
        }
        let n = base.len();
        Ok(Self {
            rule,
            eta,
            acc: RegretAccumulator::new(schedule.clone(), n),
            schedule,
            policy: base.clone(),
            base,
            last_gain: vec![0.0; n],
            logits: vec![0.0; n],
            t: 0,
            history_cap: 0,
            history: Vec::new(),
        })
    }

    /// Keeps up to `cap` `(gain, policy)` pairs for brute-force checks.
    pub fn with_history(mut self, cap: usize) -> Self {
        self.history_cap = cap;
        self
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn policy(&self) -> &[f64] {
        &self.policy
    }

    pub fn accumulator(&self) -> &RegretAccumulator {
        &self.acc
    }

    pub fn history(&self) -> &[(Vec<f64>, Vec<f64>)] {
        &self.history
    }

    pub fn regret(&self) -> Result<f64> {
        self.acc.regret()
    }

    /// Advances to the next step and returns its policy.
    pub fn next_policy(&mut self) -> Result<&[f64]> {
        if self.acc.t() != self.t {
            return Err(Error::Config("previous policy has not been observed yet".into()));
        }
        self.t += 1;
        let t = self.t;
        if t == 1 {
            self.policy.clone_from(&self.base);
            return Ok(&self.policy);
        }
        match self.rule {
            PlayerRule::Ftrl => {
                let scale = self.eta / self.prev_beta()?;
                let x: Vec<f64> = self.acc.weighted_gains().iter().map(|s| scale * s).collect();
                self.policy = softmax_with_base(&x, &self.base)?;
            }
            PlayerRule::Oftrl(pred) => {
                let ratio = self.schedule.prev_weight_ratio(t)?;
                let b = self.prev_beta()?;
                let x: Vec<f64> = self
                    .acc
                    .weighted_gains()
                    .iter()
                    .zip(&self.last_gain)
                    .map(|(s, g)| match pred {
                        Prediction::Previous => self.eta * ratio * (s / b + g),
                        Prediction::Current => self.eta * (ratio * s / b + g),
                    })
                    .collect();
                self.policy = softmax_with_base(&x, &self.base)?;
            }
            PlayerRule::Gda => {
                let step: Vec<f64> =
                    self.policy.iter().zip(&self.last_gain).map(|(p, g)| p + self.eta * g).collect();
                self.policy = project_simplex(&step)?;
            }
            PlayerRule::Hedge => {
                for (l, g) in self.logits.iter_mut().zip(&self.last_gain) {
                    *l += self.eta * g;
                }
                self.policy = softmax_with_base(&self.logits, &self.base)?;
            }
            PlayerRule::External => {}
        }
        Ok(&self.policy)
    }

    /// Overrides the current policy (used by the external rule).
    pub fn set_policy(&mut self, policy: &[f64]) {
        self.policy.copy_from_slice(policy);
    }

    /// Records the gain vector of the current step.
    pub fn observe(&mut self, gain: &[f64]) -> Result<()> {
        if self.acc.t() + 1 != self.t {
            return Err(Error::Config("observe called without a fresh policy".into()));
        }
        if gain.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("observed gain".into()));
        }
        self.acc.record(gain, &self.policy)?;
        self.last_gain.copy_from_slice(gain);
        if self.history.len() < self.history_cap {
            self.history.push((gain.to_vec(), self.policy.clone()));
        }
        Ok(())
    }

    fn prev_beta(&self) -> Result<f64> {
        let b = self.acc.last_beta();
        if b == 0.0 {
            return Err(Error::InvalidSchedule(format!("beta_{} = 0 leaves FTRL weights undefined", self.t - 1)));
        }
        Ok(b)
    }

    /// `sum_{i<=t} w_i g_i`, recovered from the scaled accumulator (alpha schedule only).
    pub fn raw_weighted_sum(&self) -> Result<Vec<f64>> {
        let t = self.acc.t();
        if t == 0 {
            return Err(Error::EmptyHistory("no step recorded"));
        }
        let factor = self.schedule.w(t)? / self.acc.last_beta();
        Ok(self.acc.weighted_gains().iter().map(|s| s * factor).collect())
    }

    /// Regret evaluated from the stored history by its definition.
    pub fn brute_force_regret(&self) -> Result<f64> {
        let t = self.history.len();
        if t == 0 || t != self.acc.t() {
            return Err(Error::EmptyHistory("history incomplete; enable with_history"));
        }
        let weights = self.schedule.weight_vector(t)?.weights;
        let n = self.base.len();
        let mut best = vec![0.0; n];
        let mut realized = 0.0;
        for (w, (g, p)) in weights.iter().zip(&self.history) {
            for (b, x) in best.iter_mut().zip(g) {
                *b += w * x;
            }
            realized += w * dot(p, g);
        }
        Ok(max_of(&best) - realized)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LearnerKind {
    Ftrl,
    Oftrl,
    Gda,
    MatrixNe,
    Hedge,
}

/// Settings shared by every per-state learner of a run.
#[derive(Debug, Clone)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    pub eta: f64,
    pub schedule: Schedule,
    pub prediction: Prediction,
    pub history_cap: usize,
}

/// Two-player zero-sum learner at one `(h, s)`.
#[derive(Debug, Clone)]
pub struct MatrixLearner {
    kind: LearnerKind,
    a: usize,
    b: usize,
    mu: PlayerLearner,
    nu: PlayerLearner,
    prev_q: Vec<f64>,
}

impl MatrixLearner {
    /// `q0` is the constant value of the initial table `Q^0`, consumed by the
    /// exact-solver learner at `t = 1`.
    pub fn new(spec: &LearnerSpec, base_mu: Vec<f64>, base_nu: Vec<f64>, q0: f64) -> Result<Self> {
        let rule = match spec.kind {
            LearnerKind::Ftrl => PlayerRule::Ftrl,
            LearnerKind::Oftrl => PlayerRule::Oftrl(spec.prediction),
            LearnerKind::Gda => PlayerRule::Gda,
            LearnerKind::Hedge => PlayerRule::Hedge,
            LearnerKind::MatrixNe => PlayerRule::External,
        };
        let (a, b) = (base_mu.len(), base_nu.len());
        let mu = PlayerLearner::new(rule, spec.eta, spec.schedule.clone(), base_mu)?.with_history(spec.history_cap);
        let nu = PlayerLearner::new(rule, spec.eta, spec.schedule.clone(), base_nu)?.with_history(spec.history_cap);
        Ok(Self { kind: spec.kind, a, b, mu, nu, prev_q: vec![q0; a * b] })
    }

    pub fn kind(&self) -> LearnerKind {
        self.kind
    }

    pub fn max_player(&self) -> &PlayerLearner {
        &self.mu
    }

    pub fn min_player(&self) -> &PlayerLearner {
        &self.nu
    }

    pub fn mu(&self) -> &[f64] {
        self.mu.policy()
    }

    pub fn nu(&self) -> &[f64] {
        self.nu.policy()
    }

    /// Computes `(mu^t, nu^t)` from everything observed through `t - 1`.
    pub fn next_policies(&mut self) -> Result<(&[f64], &[f64])> {
        self.mu.next_policy()?;
        self.nu.next_policy()?;
        if self.kind == LearnerKind::MatrixNe {
            let sol = matrix_ne(&self.prev_q, self.a, self.b)?;
            self.mu.set_policy(&sol.row);
            self.nu.set_policy(&sol.col);
        }
        Ok((self.mu.policy(), self.nu.policy()))
    }

    /// Feeds `Q^t`; both players see the same matrix.
    pub fn observe(&mut self, q: &[f64]) -> Result<()> {
        self.observe_pair(q, q)
    }

    /// Feeds separate matrices: the max-player's gains are `q_max nu`, the
    /// min-player's losses are `q_min^T mu`.
    pub fn observe_pair(&mut self, q_max: &[f64], q_min: &[f64]) -> Result<()> {
        if q_max.len() != self.a * self.b || q_min.len() != self.a * self.b {
            return Err(Error::Shape("observed matrix has the wrong size".into()));
        }
        let gain_mu = row_payoffs(q_max, self.nu.policy());
        let gain_nu: Vec<f64> = col_payoffs(q_min, self.mu.policy()).into_iter().map(|x| -x).collect();
        self.mu.observe(&gain_mu)?;
        self.nu.observe(&gain_nu)?;
        if self.kind == LearnerKind::MatrixNe {
            self.prev_q.copy_from_slice(q_max);
        }
        Ok(())
    }

    /// `(reg_mu, reg_nu)` at the last observed step.
    pub fn regrets(&self) -> Result<(f64, f64)> {
        Ok((self.mu.regret()?, self.nu.regret()?))
    }

    /// `sum_i beta_t^i Q^i nu^i`, the max-player's weighted payoff vector.
    pub fn weighted_row_payoffs(&self) -> &[f64] {
        self.mu.accumulator().weighted_gains()
    }

    /// `sum_i beta_t^i (Q^i)^T mu^i`, the min-player's weighted loss vector.
    pub fn weighted_col_payoffs(&self) -> Vec<f64> {
        self.nu.accumulator().weighted_gains().iter().map(|x| -x).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform(n: usize) -> Vec<f64> {
        vec![1.0 / n as f64; n]
    }

    #[test]
    fn regret_examples() {
        let mut acc = RegretAccumulator::new(Schedule::Alpha { horizon: 2 }, 2);
        assert!(matches!(acc.regret(), Err(Error::EmptyHistory(_))));
        acc.record(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!((acc.regret().unwrap() - 0.5).abs() < 1e-15);
        let mut acc = RegretAccumulator::new(Schedule::Eager, 2);
        acc.record(&[1.0, 0.0], &[1.0, 0.0]).unwrap();
        assert_eq!(acc.regret().unwrap(), 0.0);
    }

    #[test]
    fn ftrl_first_steps() {
        let s = Schedule::Alpha { horizon: 2 };
        let mut p = PlayerLearner::new(PlayerRule::Ftrl, 0.3, s.clone(), uniform(3)).unwrap();
        assert_eq!(p.next_policy().unwrap(), &uniform(3)[..]);
        let g = [0.2, 0.5, 0.1];
        p.observe(&g).unwrap();
        // t = 2: exponent (eta / w_1) w_1 g_1 = eta g_1
        let got = p.next_policy().unwrap().to_vec();
        let z: f64 = g.iter().map(|x| (0.3 * x).exp()).sum();
        for (x, gi) in got.iter().zip(g) {
            assert!((x - (0.3 * gi).exp() / z).abs() < 1e-15);
        }
    }

    #[test]
    fn ftrl_with_base_point_starts_at_base() {
        let mut p = PlayerLearner::new(PlayerRule::Ftrl, 1.0, Schedule::Alpha { horizon: 1 }, vec![0.3, 0.7]).unwrap();
        assert_eq!(p.next_policy().unwrap(), &[0.3, 0.7]);
    }

    #[test]
    fn ftrl_constant_losses_reach_vertex() {
        let mut p = PlayerLearner::new(PlayerRule::Ftrl, 0.5, Schedule::Alpha { horizon: 2 }, uniform(3)).unwrap();
        for _ in 0..1000 {
            p.next_policy().unwrap();
            p.observe(&[0.1, 0.9, 0.3]).unwrap();
        }
        assert!(p.next_policy().unwrap()[1] > 1.0 - 1e-12);
    }

    #[test]
    fn oftrl_second_step_doubles_last_loss() {
        let s = Schedule::Alpha { horizon: 3 };
        let mut p = PlayerLearner::new(PlayerRule::Oftrl(Prediction::Previous), 0.7, s.clone(), uniform(2)).unwrap();
        assert_eq!(p.next_policy().unwrap(), &uniform(2)[..]);
        let g = [0.4, 0.1];
        p.observe(&g).unwrap();
        let got = p.next_policy().unwrap().to_vec();
        let (w1, w2) = (s.w(1).unwrap(), s.w(2).unwrap());
        let x: Vec<f64> = g.iter().map(|gi| 0.7 / w2 * (w1 * gi + w1 * gi)).collect();
        let expect = softmax_with_base(&x, &uniform(2)).unwrap();
        for (a, b) in got.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn weighted_exponents_match_raw_sums() {
        let h = 2;
        let s = Schedule::Alpha { horizon: h };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for pred in [Prediction::Previous, Prediction::Current] {
            let eta = 0.2;
            let mut p = PlayerLearner::new(PlayerRule::Oftrl(pred), eta, s.clone(), uniform(3)).unwrap().with_history(64);
            let mut f = PlayerLearner::new(PlayerRule::Ftrl, eta, s.clone(), uniform(3)).unwrap().with_history(64);
            let mut gains: Vec<Vec<f64>> = Vec::new();
            for t in 1..=40 {
                let got_o = p.next_policy().unwrap().to_vec();
                let got_f = f.next_policy().unwrap().to_vec();
                if t > 1 {
                    let raw: Vec<f64> = (0..3)
                        .map(|a| (1..t).map(|i| s.w(i).unwrap() * gains[i - 1][a]).sum::<f64>())
                        .collect();
                    let (wt, wp) = (s.w(t).unwrap(), s.w(t - 1).unwrap());
                    let pw = if pred == Prediction::Previous { wp } else { wt };
                    let xo: Vec<f64> = (0..3).map(|a| eta / wt * (raw[a] + pw * gains[t - 2][a])).collect();
                    let xf: Vec<f64> = (0..3).map(|a| eta / wp * raw[a]).collect();
                    let eo = softmax_with_base(&xo, &uniform(3)).unwrap();
                    let ef = softmax_with_base(&xf, &uniform(3)).unwrap();
                    for a in 0..3 {
                        assert!((got_o[a] - eo[a]).abs() < 1e-12, "t={t}");
                        assert!((got_f[a] - ef[a]).abs() < 1e-12, "t={t}");
                    }
                }
                let g: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * h as f64).collect();
                p.observe(&g).unwrap();
                f.observe(&g).unwrap();
                gains.push(g);
                let raw = p.raw_weighted_sum().unwrap();
                for a in 0..3 {
                    let direct: f64 = (1..=t).map(|i| s.w(i).unwrap() * gains[i - 1][a]).sum();
                    assert!((raw[a] - direct).abs() <= 1e-10 * direct.abs().max(1.0));
                }
                let bf = p.brute_force_regret().unwrap();
                assert!((bf - p.regret().unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gda_examples() {
        let s = Schedule::Alpha { horizon: 1 };
        let mut p = PlayerLearner::new(PlayerRule::Gda, 0.0, s.clone(), vec![0.2, 0.8]).unwrap();
        p.next_policy().unwrap();
        p.observe(&[1.0, 0.0]).unwrap();
        assert_eq!(p.next_policy().unwrap(), &[0.2, 0.8]);

        let mut p = PlayerLearner::new(PlayerRule::Gda, 0.5, s.clone(), vec![0.2, 0.8]).unwrap();
        p.next_policy().unwrap();
        p.observe(&[0.0, 0.0]).unwrap();
        assert!((p.next_policy().unwrap()[0] - 0.2).abs() < 1e-15);

        // identity game from uniform: gradient is a constant vector
        let spec = LearnerSpec {
            kind: LearnerKind::Gda,
            eta: 0.3,
            schedule: s,
            prediction: Prediction::Previous,
            history_cap: 0,
        };
        let mut m = MatrixLearner::new(&spec, uniform(2), uniform(2), 1.0).unwrap();
        for _ in 0..5 {
            let (mu, nu) = m.next_policies().unwrap();
            assert!((mu[0] - 0.5).abs() < 1e-15 && (nu[0] - 0.5).abs() < 1e-15);
            m.observe(&[1.0, 0.0, 0.0, 1.0]).unwrap();
        }
    }

    #[test]
    fn hedge_examples() {
        let s = Schedule::Eager;
        let mut p = PlayerLearner::new(PlayerRule::Hedge, 0.0, s.clone(), vec![0.3, 0.7]).unwrap();
        p.next_policy().unwrap();
        p.observe(&[1.0, 0.0]).unwrap();
        assert_eq!(p.next_policy().unwrap(), &[0.3, 0.7]);

        let mut p = PlayerLearner::new(PlayerRule::Hedge, 2.0, s.clone(), vec![0.3, 0.7]).unwrap();
        p.next_policy().unwrap();
        p.observe(&[0.4, 0.4]).unwrap();
        let got = p.next_policy().unwrap();
        assert!((got[0] - 0.3).abs() < 1e-15);

        // product form: mu^t ∝ mu^{t-1} exp(eta g)
        let mut p = PlayerLearner::new(PlayerRule::Hedge, 0.9, s, uniform(3)).unwrap();
        let mut prev = p.next_policy().unwrap().to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let g: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
            p.observe(&g).unwrap();
            let got = p.next_policy().unwrap().to_vec();
            let un: Vec<f64> = prev.iter().zip(&g).map(|(q, x)| q * (0.9 * x).exp()).collect();
            let z: f64 = un.iter().sum();
            for (a, b) in got.iter().zip(&un) {
                assert!((a - b / z).abs() < 1e-13);
            }
            prev = got;
        }
    }

    #[test]
    fn matrix_ne_learner_uses_previous_matrix() {
        let spec = LearnerSpec {
            kind: LearnerKind::MatrixNe,
            eta: 0.0,
            schedule: Schedule::Alpha { horizon: 1 },
            prediction: Prediction::Previous,
            history_cap: 0,
        };
        let mut m = MatrixLearner::new(&spec, uniform(2), uniform(2), 2.0).unwrap();
        let (mu, nu) = m.next_policies().unwrap();
        assert_eq!((mu.to_vec(), nu.to_vec()), (uniform(2), uniform(2)));
        m.observe(&[0.1, 0.2, 0.5, 0.9]).unwrap();
        let (mu, nu) = m.next_policies().unwrap();
        assert!((mu[1] - 1.0).abs() < 1e-12 && (nu[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn min_player_regret_sign() {
        let spec = LearnerSpec {
            kind: LearnerKind::Ftrl,
            eta: 0.1,
            schedule: Schedule::Eager,
            prediction: Prediction::Previous,
            history_cap: 0,
        };
        let mut m = MatrixLearner::new(&spec, uniform(2), uniform(2), 1.0).unwrap();
        m.next_policies().unwrap();
        m.observe(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        // realized 0.25; min-player's best column loss is 0, max-player's best row gain 0.5
        let (rm, rn) = m.regrets().unwrap();
        assert!((rm - 0.25).abs() < 1e-15);
        assert!((rn - 0.25).abs() < 1e-15);
        assert_eq!(m.weighted_col_payoffs(), vec![0.5, 0.0]);
    }

    #[test]
    fn observe_requires_fresh_policy() {
        let mut p = PlayerLearner::new(PlayerRule::Ftrl, 0.1, Schedule::Eager, uniform(2)).unwrap();
        assert!(p.observe(&[0.0, 0.0]).is_err());
        p.next_policy().unwrap();
        assert!(p.next_policy().is_err());
    }
}
