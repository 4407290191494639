//! Value-update learning-rate sequences and the weights derived from them.
//!
//! A schedule `beta_t` (with `beta_1 = 1`) induces, for every step `t`, a
//! convex combination over the past iterates:
//! `beta_t^t = beta_t` and `beta_t^i = (1 - beta_t) * beta_{t-1}^i` for `i < t`.
//! These weights drive the value update, the output policy average and the
//! per-state regrets.

use crate::error::{Error, Result};

/// Learning-rate sequence for the value update.
#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    /// `alpha_t = (H + 1) / (H + t)`.
    Alpha { horizon: usize },
    /// `beta_t = 1`: every iteration re-evaluates the current policies.
    Eager,
    /// Explicit finite sequence `beta_1, ..., beta_n`.
    Custom(Vec<f64>),
}

impl Schedule {
    pub fn alpha(horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::InvalidSchedule("alpha schedule needs H >= 1".into()));
        }
        Ok(Schedule::Alpha { horizon })
    }

    pub fn custom(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::InvalidSchedule("custom schedule is empty".into()));
        }
        if betas[0] != 1.0 {
            return Err(Error::InvalidSchedule(format!("beta_1 must be 1, got {}", betas[0])));
        }
        if let Some(b) = betas.iter().find(|b| !(0.0..=1.0).contains(*b)) {
            return Err(Error::InvalidSchedule(format!("beta {b} outside [0, 1]")));
        }
        Ok(Schedule::Custom(betas))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Schedule::Alpha { .. } => "alpha",
            Schedule::Eager => "eager",
            Schedule::Custom(_) => "custom",
        }
    }

    /// `beta_t` for `t >= 1`.
    pub fn beta(&self, t: usize) -> Result<f64> {
        if t == 0 {
            return Err(Error::ZeroStep);
        }
        match self {
            Schedule::Alpha { horizon } => {
                let h = *horizon as f64;
                Ok((h + 1.0) / (h + t as f64))
            }
            Schedule::Eager => Ok(1.0),
            Schedule::Custom(betas) => betas
                .get(t - 1)
                .copied()
                .ok_or(Error::StepOutOfRange { t, len: betas.len() }),
        }
    }

    /// The weights `(beta_t^1, ..., beta_t^t)`.
    pub fn weight_vector(&self, t: usize) -> Result<WeightVector> {
        if t == 0 {
            return Err(Error::ZeroStep);
        }
        let mut tracker = WeightTracker::new(self.clone());
        for _ in 0..t {
            tracker.advance()?;
        }
        Ok(tracker.into_weights())
    }

    /// `w_t = alpha_t^t / alpha_t^1`, with `w_0 = 1`. Only defined for the alpha schedule.
    pub fn w(&self, t: usize) -> Result<f64> {
        let Schedule::Alpha { horizon } = self else {
            return Err(Error::UnsupportedSchedule { op: "w", schedule: self.name() });
        };
        let h = *horizon as f64;
        let mut w = 1.0;
        for k in 2..=t {
            let k = k as f64;
            w *= (h + k - 1.0) / (k - 1.0);
        }
        Ok(w)
    }

    /// `c_beta = sup_j sum_{t >= j} beta_t^j`.
    pub fn c_beta(&self) -> Result<f64> {
        match self {
            Schedule::Alpha { horizon } => Ok(1.0 + 1.0 / *horizon as f64),
            Schedule::Eager => Ok(1.0),
            Schedule::Custom(_) => Err(Error::UnsupportedSchedule { op: "c_beta", schedule: "custom" }),
        }
    }

    /// `sum_{t=j}^{n} beta_t^j`.
    pub fn tail_sum(&self, j: usize, n: usize) -> Result<f64> {
        if j == 0 {
            return Err(Error::ZeroStep);
        }
        if n < j {
            return Err(Error::InvalidSchedule(format!("tail sum needs j <= N (j={j}, N={n})")));
        }
        let mut weight = self.beta(j)?;
        let mut total = weight;
        for t in j + 1..=n {
            weight *= 1.0 - self.beta(t)?;
            total += weight;
        }
        Ok(total)
    }

    /// Ratio `w_{t-1} / w_t` expressed through the schedule, used by the
    /// weighted FTRL family: `beta_{t-1} (1 - beta_t) / beta_t`.
    pub(crate) fn prev_weight_ratio(&self, t: usize) -> Result<f64> {
        if t < 2 {
            return Ok(0.0);
        }
        let bt = self.beta(t)?;
        if bt == 0.0 {
            return Err(Error::InvalidSchedule(format!("beta_{t} = 0 makes FTRL weights undefined")));
        }
        Ok(self.beta(t - 1)? * (1.0 - bt) / bt)
    }
}

/// `(beta_t^1, ..., beta_t^t)` for one step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub t: usize,
    pub weights: Vec<f64>,
}

impl WeightVector {
    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Maintains `beta_t^i` incrementally: scale everything by `1 - beta_t`,
/// then append `beta_t`.
#[derive(Debug, Clone)]
pub struct WeightTracker {
    schedule: Schedule,
    weights: Vec<f64>,
}

impl WeightTracker {
    pub fn new(schedule: Schedule) -> Self {
        Self { schedule, weights: Vec::new() }
    }

    pub fn t(&self) -> usize {
        self.weights.len()
    }

    /// Moves to step `t + 1` and returns `beta_{t+1}`.
    pub fn advance(&mut self) -> Result<f64> {
        let beta = self.schedule.beta(self.weights.len() + 1)?;
        let keep = 1.0 - beta;
        self.weights.iter_mut().for_each(|w| *w *= keep);
        self.weights.push(beta);
        Ok(beta)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_weights(self) -> WeightVector {
        WeightVector { t: self.weights.len(), weights: self.weights }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // beta_t^i = beta_i * prod_{j=i+1}^t (1 - beta_j), evaluated from scratch.
    fn product_weights(s: &Schedule, t: usize) -> Vec<f64> {
        (1..=t)
            .map(|i| {
                let mut w = s.beta(i).unwrap();
                for j in i + 1..=t {
                    w *= 1.0 - s.beta(j).unwrap();
                }
                w
            })
            .collect()
    }

    #[test]
    fn beta_examples() {
        assert_eq!(Schedule::Alpha { horizon: 2 }.beta(2).unwrap(), 0.75);
        assert_eq!(Schedule::Eager.beta(17).unwrap(), 1.0);
        assert_eq!(Schedule::Alpha { horizon: 1 }.beta(1).unwrap(), 1.0);
        let c = Schedule::custom(vec![1.0, 0.5]).unwrap();
        assert!(matches!(c.beta(3), Err(Error::StepOutOfRange { t: 3, len: 2 })));
        assert!(matches!(c.beta(0), Err(Error::ZeroStep)));
    }

    #[test]
    fn custom_schedule_validation() {
        assert!(Schedule::custom(vec![0.5]).is_err());
        assert!(Schedule::custom(vec![1.0, 1.5]).is_err());
        assert!(Schedule::custom(vec![]).is_err());
    }

    #[test]
    fn weight_vector_examples() {
        let wv = Schedule::Alpha { horizon: 1 }.weight_vector(2).unwrap();
        assert!((wv.weights[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((wv.weights[1] - 2.0 / 3.0).abs() < 1e-15);

        let wv = Schedule::Eager.weight_vector(5).unwrap();
        assert_eq!(wv.weights, vec![0.0, 0.0, 0.0, 0.0, 1.0]);

        let s = Schedule::Alpha { horizon: 2 };
        let wv = s.weight_vector(3).unwrap();
        let oracle = product_weights(&s, 3);
        for (a, b) in wv.weights.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((wv.sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn w_examples() {
        let s1 = Schedule::Alpha { horizon: 1 };
        assert!((s1.w(2).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(s1.w(1).unwrap(), 1.0);
        let s2 = Schedule::Alpha { horizon: 2 };
        assert!((s2.w(3).unwrap() - s2.w(2).unwrap() * 2.0).abs() < 1e-12);
        // definition: alpha_t^t / alpha_t^1
        for t in 1..30 {
            let wv = s2.weight_vector(t).unwrap();
            let direct = wv.weights[t - 1] / wv.weights[0];
            assert!((s2.w(t).unwrap() - direct).abs() <= 1e-10 * direct);
        }
        assert!(matches!(Schedule::Eager.w(2), Err(Error::UnsupportedSchedule { .. })));
    }

    #[test]
    fn c_beta_examples() {
        assert_eq!(Schedule::Alpha { horizon: 4 }.c_beta().unwrap(), 1.25);
        assert_eq!(Schedule::Eager.c_beta().unwrap(), 1.0);
        assert_eq!(Schedule::Alpha { horizon: 1 }.c_beta().unwrap(), 2.0);
        assert!(Schedule::Custom(vec![1.0]).c_beta().is_err());
    }

    #[test]
    fn tail_sum_examples() {
        // tail of alpha_t^j decays like t^-(H+1); N = 10 H / eps is ample
        let s = Schedule::Alpha { horizon: 3 };
        let n = (10.0 * 3.0 / 1e-6) as usize;
        let v = s.tail_sum(1, n).unwrap();
        assert!((v - 4.0 / 3.0).abs() < 1e-6, "{v}");
        assert_eq!(Schedule::Eager.tail_sum(7, 7).unwrap(), 1.0);
        assert_eq!(Schedule::Alpha { horizon: 2 }.tail_sum(2, 2).unwrap(), 0.75);
    }

    #[test]
    fn prev_weight_ratio_matches_w() {
        let s = Schedule::Alpha { horizon: 3 };
        for t in 2..50 {
            let r = s.prev_weight_ratio(t).unwrap();
            let direct = s.w(t - 1).unwrap() / s.w(t).unwrap();
            assert!((r - direct).abs() < 1e-13);
        }
    }
}
