//! Classical online decision-making baselines.
//!
//! Full-information: FTL, FTRL with ℓ2 regularization, and Hedge (FTRL with
//! entropy regularization, i.e. exponential weights on the cumulative reward
//! vector). Bandit feedback: UCB, EXP3, Rexp3 (EXP3 with periodic resets
//! sized by the variation budget), Greedy, and a uniform-random reference.
//!
//! EXP3 and Rexp3 assume rewards in [0, 1]; incoming rewards are divided by
//! [`Exp3Config::reward_divisor`] (default 10) before the importance-weighted
//! update.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::env::PolicySpace;
use crate::linalg::{argmax, l2_norm};

#[derive(Debug, thiserror::Error)]
pub enum BaselineError {
    #[error("stepsize must be positive, got {0}")]
    BadStepsize(f64),
    #[error("EXP3 needs at least 2 arms and a positive horizon (K={k}, T={t})")]
    BadExp3Config { k: usize, t: usize },
    #[error("Rexp3 needs a positive variation budget, got {0}")]
    BadVariationBudget(f64),
    #[error("selected top-k must satisfy 1 <= k <= {0}")]
    BadTopK(usize),
    #[error("unknown algorithm id {0:?}")]
    UnknownAlgorithm(String),
}

/// Numerically stable softmax of `eta * s`.
pub fn softmax_scaled(s: &[f64], eta: f64) -> Vec<f64> {
    let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = s.iter().map(|v| (eta * (v - max)).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Hedge's anytime stepsize √(2 log d / t).
pub fn hedge_eta(d: usize, t: usize) -> f64 {
    (2.0 * (d as f64).ln() / t as f64).sqrt()
}

fn vertex(d: usize, a: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    v[a] = 1.0;
    v
}

/// Draw an action index from a simplex point.
pub fn sample_action(policy: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in policy.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    policy.len() - 1
}

// ---------------------------------------------------------------------------
// Full-information algorithms
// ---------------------------------------------------------------------------

/// Follow-the-Leader: play the policy maximizing the cumulative reward so far.
#[derive(Clone, Debug)]
pub struct Ftl {
    pub sum: Vec<f64>,
}

impl Ftl {
    pub fn new(d: usize) -> Self {
        Ftl { sum: vec![0.0; d] }
    }

    pub fn step(&self, space: &PolicySpace) -> Vec<f64> {
        match space {
            PolicySpace::Simplex => vertex(self.sum.len(), argmax(&self.sum)),
            PolicySpace::L2Ball { radius } => {
                let n = l2_norm(&self.sum);
                if n == 0.0 {
                    vec![0.0; self.sum.len()]
                } else {
                    self.sum.iter().map(|s| radius * s / n).collect()
                }
            }
        }
    }

    pub fn observe(&mut self, reward: &[f64]) {
        for (s, r) in self.sum.iter_mut().zip(reward) {
            *s += r;
        }
    }
}

/// FTRL with ℓ2 regularization on the ball: the argmax of
/// ⟨S, π⟩ − ‖π‖²/(2η) over the ball is η·S radially projected.
#[derive(Clone, Debug)]
pub struct FtrlL2 {
    pub sum: Vec<f64>,
    pub eta: f64,
    pub radius: f64,
}

impl FtrlL2 {
    pub fn new(d: usize, eta: f64, radius: f64) -> Result<Self, BaselineError> {
        if eta <= 0.0 {
            return Err(BaselineError::BadStepsize(eta));
        }
        Ok(FtrlL2 { sum: vec![0.0; d], eta, radius })
    }

    pub fn step(&self) -> Vec<f64> {
        let scaled: Vec<f64> = self.sum.iter().map(|s| self.eta * s).collect();
        let n = l2_norm(&scaled);
        if n <= self.radius {
            scaled
        } else {
            scaled.into_iter().map(|s| self.radius * s / n).collect()
        }
    }

    pub fn observe(&mut self, reward: &[f64]) {
        for (s, r) in self.sum.iter_mut().zip(reward) {
            *s += r;
        }
    }
}

/// Hedge stepsize schedule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Stepsize {
    /// η_t = √(2 log d / t).
    Anytime,
    /// η fixed to √(2 log d / T) for the given horizon.
    FixedHorizon(usize),
}

/// Hedge: π_{t}(a) ∝ exp(η_t · S_{t−1}(a)).
#[derive(Clone, Debug)]
pub struct Hedge {
    pub sum: Vec<f64>,
    pub stepsize: Stepsize,
}

impl Hedge {
    pub fn new(d: usize, stepsize: Stepsize) -> Self {
        Hedge { sum: vec![0.0; d], stepsize }
    }

    pub fn eta(&self, t: usize) -> f64 {
        match self.stepsize {
            Stepsize::Anytime => hedge_eta(self.sum.len(), t),
            Stepsize::FixedHorizon(horizon) => hedge_eta(self.sum.len(), horizon),
        }
    }

    pub fn step(&self, t: usize) -> Vec<f64> {
        softmax_scaled(&self.sum, self.eta(t))
    }

    pub fn observe(&mut self, reward: &[f64]) {
        for (s, r) in self.sum.iter_mut().zip(reward) {
            *s += r;
        }
    }
}

// ---------------------------------------------------------------------------
// Bandit algorithms
// ---------------------------------------------------------------------------

/// UCB with a configurable bonus scale: score = mean + scale·√(2 log t / N),
/// unvisited arms scoring +∞ (lowest index first).
#[derive(Clone, Debug)]
pub struct Ucb {
    pub counts: Vec<u64>,
    pub means: Vec<f64>,
    pub scale: f64,
}

impl Ucb {
    pub fn new(d: usize, scale: f64) -> Self {
        Ucb { counts: vec![0; d], means: vec![0.0; d], scale }
    }

    pub fn step(&self, t: usize) -> usize {
        if let Some(a) = self.counts.iter().position(|n| *n == 0) {
            return a;
        }
        let scores: Vec<f64> = self
            .counts
            .iter()
            .zip(&self.means)
            .map(|(n, m)| m + self.scale * (2.0 * (t as f64).ln() / *n as f64).sqrt())
            .collect();
        argmax(&scores)
    }

    pub fn observe(&mut self, action: usize, reward: f64) {
        self.counts[action] += 1;
        let n = self.counts[action] as f64;
        self.means[action] += (reward - self.means[action]) / n;
    }
}

/// Shared EXP3 machinery.
#[derive(Clone, Copy, Debug)]
pub struct Exp3Config {
    pub eta: f64,
    pub gamma: f64,
    /// Rewards are divided by this before the importance-weighted update.
    pub reward_divisor: f64,
}

/// EXP3 with η = √(2 log K/(K T)) and γ = min{1, ηK/2}.
#[derive(Clone, Debug)]
pub struct Exp3 {
    pub weights: Vec<f64>,
    pub config: Exp3Config,
}

impl Exp3 {
    pub fn new(k: usize, t: usize) -> Result<Self, BaselineError> {
        if k < 2 || t < 1 {
            return Err(BaselineError::BadExp3Config { k, t });
        }
        let eta = (2.0 * (k as f64).ln() / (k as f64 * t as f64)).sqrt();
        let gamma = (eta * k as f64 / 2.0).min(1.0);
        Ok(Exp3 {
            weights: vec![1.0; k],
            config: Exp3Config { eta, gamma, reward_divisor: 10.0 },
        })
    }

    /// Sampling distribution p(a) = (1−γ)·w(a)/Σw + γ/K.
    pub fn policy(&self) -> Vec<f64> {
        mixed_distribution(&self.weights, self.config.gamma)
    }

    /// Importance-weighted update after observing `reward` for `action`.
    pub fn observe(&mut self, action: usize, reward: f64) {
        let p = self.policy();
        let r01 = reward / self.config.reward_divisor;
        let estimate = r01 / p[action];
        self.weights[action] *= (self.config.eta * estimate).exp();
    }
}

fn mixed_distribution(weights: &[f64], gamma: f64) -> Vec<f64> {
    let k = weights.len() as f64;
    let total: f64 = weights.iter().sum();
    weights
        .iter()
        .map(|w| (1.0 - gamma) * w / total + gamma / k)
        .collect()
}

/// Batch length ⌈(K log K / V_T)^{1/3} · T^{2/3}⌉ for Rexp3 (at least 1).
pub fn rexp3_batch_length(k: usize, t: usize, v_t: f64) -> Result<usize, BaselineError> {
    if v_t <= 0.0 {
        return Err(BaselineError::BadVariationBudget(v_t));
    }
    let k = k as f64;
    let batch = ((k * k.ln() / v_t).powf(1.0 / 3.0) * (t as f64).powf(2.0 / 3.0)).ceil();
    Ok((batch as usize).max(1))
}

/// Rexp3: EXP3 restarted every `batch_length` rounds, with
/// γ = min{1, √(K log K/((e−1)·Δ_T))} and update exponent (γ/K)·R̃.
#[derive(Clone, Debug)]
pub struct Rexp3 {
    pub weights: Vec<f64>,
    pub gamma: f64,
    pub batch_length: usize,
    pub rounds_in_batch: usize,
    pub reward_divisor: f64,
}

impl Rexp3 {
    pub fn new(k: usize, t: usize, v_t: f64) -> Result<Self, BaselineError> {
        if k < 2 || t < 1 {
            return Err(BaselineError::BadExp3Config { k, t });
        }
        let batch_length = rexp3_batch_length(k, t, v_t)?;
        let kf = k as f64;
        let gamma = (kf * kf.ln() / ((std::f64::consts::E - 1.0) * batch_length as f64))
            .sqrt()
            .min(1.0);
        Ok(Rexp3 {
            weights: vec![1.0; k],
            gamma,
            batch_length,
            rounds_in_batch: 0,
            reward_divisor: 10.0,
        })
    }

    pub fn policy(&mut self) -> Vec<f64> {
        if self.rounds_in_batch == self.batch_length {
            self.weights.iter_mut().for_each(|w| *w = 1.0);
            self.rounds_in_batch = 0;
        }
        mixed_distribution(&self.weights, self.gamma)
    }

    pub fn observe(&mut self, action: usize, reward: f64) {
        let p = mixed_distribution(&self.weights, self.gamma);
        let r01 = reward / self.reward_divisor;
        let estimate = r01 / p[action];
        let k = self.weights.len() as f64;
        self.weights[action] *= (self.gamma / k * estimate).exp();
        self.rounds_in_batch += 1;
    }
}

/// Pull each arm once, then play the empirical-mean argmax.
#[derive(Clone, Debug)]
pub struct Greedy {
    pub counts: Vec<u64>,
    pub means: Vec<f64>,
}

impl Greedy {
    pub fn new(d: usize) -> Self {
        Greedy { counts: vec![0; d], means: vec![0.0; d] }
    }

    pub fn step(&self) -> usize {
        if let Some(a) = self.counts.iter().position(|n| *n == 0) {
            return a;
        }
        argmax(&self.means)
    }

    pub fn observe(&mut self, action: usize, reward: f64) {
        self.counts[action] += 1;
        let n = self.counts[action] as f64;
        self.means[action] += (reward - self.means[action]) / n;
    }
}

// ---------------------------------------------------------------------------
// String-identified algorithm registry
// ---------------------------------------------------------------------------

/// An algorithm as named in experiment configs.
#[derive(Clone, Debug, PartialEq)]
pub enum AlgorithmId {
    Ftl,
    FtrlL2 { stepsize: Stepsize },
    Hedge { stepsize: Stepsize },
    Ucb { scale: f64 },
    Exp3,
    Rexp3,
    Greedy,
    Uniform,
}

impl AlgorithmId {
    /// Parse a config identifier. Base ids: "ftl", "ftrl_l2", "hedge", "ucb",
    /// "exp3", "rexp3", "greedy", "uniform". The suffix `_eta<T>` pins the
    /// Hedge/FTRL stepsize to horizon T, e.g. "hedge_eta25".
    pub fn parse(id: &str) -> Result<Self, BaselineError> {
        let fixed = |rest: &str| -> Option<Stepsize> {
            rest.strip_prefix("_eta")
                .and_then(|n| n.parse::<usize>().ok())
                .map(Stepsize::FixedHorizon)
        };
        match id {
            "ftl" => Ok(AlgorithmId::Ftl),
            "ftrl_l2" => Ok(AlgorithmId::FtrlL2 { stepsize: Stepsize::Anytime }),
            "hedge" => Ok(AlgorithmId::Hedge { stepsize: Stepsize::Anytime }),
            "ucb" => Ok(AlgorithmId::Ucb { scale: 1.0 }),
            "exp3" => Ok(AlgorithmId::Exp3),
            "rexp3" => Ok(AlgorithmId::Rexp3),
            "greedy" => Ok(AlgorithmId::Greedy),
            "uniform" => Ok(AlgorithmId::Uniform),
            other => {
                if let Some(step) = other.strip_prefix("hedge").and_then(fixed) {
                    Ok(AlgorithmId::Hedge { stepsize: step })
                } else if let Some(step) = other.strip_prefix("ftrl_l2").and_then(fixed) {
                    Ok(AlgorithmId::FtrlL2 { stepsize: step })
                } else {
                    Err(BaselineError::UnknownAlgorithm(other.to_string()))
                }
            }
        }
    }
}

/// Uniform-random reference agent.
#[derive(Clone, Debug)]
pub struct UniformAgent {
    pub d: usize,
}

impl UniformAgent {
    pub fn policy(&self) -> Vec<f64> {
        vec![1.0 / self.d as f64; self.d]
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        sample_action(&self.policy(), rng)
    }
}
