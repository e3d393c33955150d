//! Decision-making environments and reward generation processes.
//!
//! Three environments are covered: full-information online learning (FOL),
//! stochastic multi-armed bandits (MAB), and non-stationary bandits
//! (NS-MAB). Rewards come from nine generation processes; the stochastic
//! ones clip samples element-wise to `[0, 10]`.
//!
//! Rounds are 1-based throughout, matching the process formulas (e.g. the
//! noisy-alternating decay `min(25/(t+1), 10)`).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma as GammaDist, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::linalg::argmax;
use crate::rng::{self, stream};

/// Rewards from the clipped processes live in `[0, REWARD_CAP]`.
pub const REWARD_CAP: f64 = 10.0;

/// Tolerance for simplex / ball membership checks.
pub const POLICY_TOL: f64 = 1e-9;

/// A reward vector: one real per action for one round.
pub type RewardVector = Vec<f64>;

/// A policy: a point on the simplex or in an ℓ2-ball, depending on the
/// scenario's [`PolicySpace`].
pub type Policy = Vec<f64>;

#[derive(Debug, thiserror::Error)]
pub enum EnvError {
    #[error("action space needs at least 2 actions, got {0}")]
    BadDimension(usize),
    #[error("horizon must be at least 1")]
    BadHorizon,
    #[error("action {action} out of range for {d} actions")]
    ActionOutOfRange { action: usize, d: usize },
    #[error("the {0:?} process is policy-dependent and needs the current policy")]
    MissingPolicy(ProcessKind),
    #[error("the {0:?} process does not have a mean reward")]
    MeanUnsupported(ProcessKind),
    #[error("variation budget needs at least 2 mean vectors")]
    TooFewMeans,
    #[error("{env:?} environments require a {required} policy space")]
    PolicySpaceMismatch { env: EnvKind, required: &'static str },
    #[error("the {kind:?} process is not valid for {env:?} environments")]
    ProcessMismatch { env: EnvKind, kind: ProcessKind },
    #[error("process parameters do not match d={d}: {detail}")]
    BadProcessParams { d: usize, detail: String },
    #[error("ball radius must be positive, got {0}")]
    BadRadius(f64),
}

// ---------------------------------------------------------------------------
// Core domain types
// ---------------------------------------------------------------------------

/// The finite action set; `d` is the number of actions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ActionSpace {
    d: usize,
}

impl ActionSpace {
    pub fn new(d: usize) -> Result<Self, EnvError> {
        if d < 2 {
            return Err(EnvError::BadDimension(d));
        }
        Ok(ActionSpace { d })
    }

    pub fn d(&self) -> usize {
        self.d
    }
}

/// Where policies live.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicySpace {
    /// The probability simplex over the action set.
    Simplex,
    /// The ℓ2-ball of the given radius centered at the origin.
    L2Ball { radius: f64 },
}

impl PolicySpace {
    pub fn validate(&self) -> Result<(), EnvError> {
        if let PolicySpace::L2Ball { radius } = self {
            if !(*radius > 0.0) {
                return Err(EnvError::BadRadius(*radius));
            }
        }
        Ok(())
    }

    /// Membership check with the crate-wide tolerance.
    pub fn contains(&self, policy: &[f64]) -> bool {
        match self {
            PolicySpace::Simplex => {
                policy.iter().all(|p| *p >= -POLICY_TOL)
                    && (policy.iter().sum::<f64>() - 1.0).abs() <= POLICY_TOL
            }
            PolicySpace::L2Ball { radius } => {
                crate::linalg::l2_norm(policy) <= radius + POLICY_TOL
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    Fol,
    Mab,
    NsMab,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessKind {
    Uniform,
    Gaussian,
    Gamma,
    Bernoulli,
    SineTrend,
    Alternating,
    NoisyAlternating,
    Adaptive,
    GradualVariation,
}

impl ProcessKind {
    /// Stationary stochastic processes are the only ones valid for MAB.
    pub fn is_stationary_stochastic(&self) -> bool {
        matches!(
            self,
            ProcessKind::Uniform | ProcessKind::Gaussian | ProcessKind::Gamma | ProcessKind::Bernoulli
        )
    }

    pub fn all() -> [ProcessKind; 9] {
        [
            ProcessKind::Uniform,
            ProcessKind::Gaussian,
            ProcessKind::Gamma,
            ProcessKind::Bernoulli,
            ProcessKind::SineTrend,
            ProcessKind::Alternating,
            ProcessKind::NoisyAlternating,
            ProcessKind::Adaptive,
            ProcessKind::GradualVariation,
        ]
    }
}

// ---------------------------------------------------------------------------
// Reward generation processes
// ---------------------------------------------------------------------------

/// Sampled parameters of one reward generation process.
///
/// `GradualVariation` is the only stateful variant: [`ProcessParams::next_reward`]
/// advances its mean trajectory, so rounds must be generated in order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "process_kind", content = "process_params", rename_all = "snake_case")]
pub enum ProcessParams {
    /// Per-action interval `[lo_a, hi_a]` with endpoints drawn from Unif(0,10).
    Uniform { lo: Vec<f64>, hi: Vec<f64> },
    /// Equal mixture of N(μ, I), N(μ, 3I), N(μ, 10I) with μ ~ N(5·1, I); clipped.
    Gaussian { mu: Vec<f64> },
    /// Per-action Gamma(shape α_a, scale θ_a); clipped.
    Gamma { shape: Vec<f64>, scale: Vec<f64> },
    /// Two levels shared by all arms; arm `a` pays the high level w.p. `p_a`.
    Bernoulli { low: f64, high: f64, p: Vec<f64> },
    /// `R_t(a) = 5(1 + sin(freq_a·t + phase_a))`.
    SineTrend { freq: Vec<f64>, phase: Vec<f64> },
    /// One hot arm paying 10, cycling with period d from a random shift.
    Alternating { shift: usize },
    /// Alternating with a decaying hot payoff and near-10 noise elsewhere.
    NoisyAlternating { shift: usize },
    /// Adversarial: the argmax of the current policy pays 0, the rest pay 10.
    Adaptive,
    /// Drifting mean `r_{t+1} = r_t + Δ_t`, `Δ_t ~ Unif([-1/√t, 1/√t]^d)`;
    /// rewards are the clipped Gaussian mixture around the current mean.
    GradualVariation { mean: Vec<f64> },
}

fn unif(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.gen::<f64>()
}

fn clip_reward(v: f64) -> f64 {
    v.clamp(0.0, REWARD_CAP)
}

/// One draw from the equal mixture of N(μ, vI) for v ∈ {1, 3, 10}, clipped.
fn gaussian_mixture(mu: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let sd = match rng.gen_range(0..3u8) {
        0 => 1.0f64,
        1 => 3.0f64.sqrt(),
        _ => 10.0f64.sqrt(),
    };
    mu.iter()
        .map(|m| {
            let z: f64 = StandardNormal.sample(rng);
            clip_reward(m + sd * z)
        })
        .collect()
}

impl ProcessParams {
    /// Draw process parameters exactly per the process definitions.
    pub fn sample(kind: ProcessKind, d: usize, rng: &mut ChaCha8Rng) -> Result<Self, EnvError> {
        let d = ActionSpace::new(d)?.d();
        Ok(match kind {
            ProcessKind::Uniform => {
                let mut lo = Vec::with_capacity(d);
                let mut hi = Vec::with_capacity(d);
                for _ in 0..d {
                    let x = unif(rng, 0.0, 10.0);
                    let y = unif(rng, 0.0, 10.0);
                    lo.push(x.min(y));
                    hi.push(x.max(y));
                }
                ProcessParams::Uniform { lo, hi }
            }
            ProcessKind::Gaussian => {
                let mu = (0..d)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(rng);
                        5.0 + z
                    })
                    .collect();
                ProcessParams::Gaussian { mu }
            }
            ProcessKind::Gamma => {
                let shape = (0..d).map(|_| unif(rng, 0.0, 10.0)).collect();
                let scale = (0..d).map(|_| unif(rng, 0.0, 2.0)).collect();
                ProcessParams::Gamma { shape, scale }
            }
            ProcessKind::Bernoulli => {
                let x = unif(rng, 0.0, 10.0);
                let y = unif(rng, 0.0, 10.0);
                let p = (0..d).map(|_| rng.gen::<f64>()).collect();
                ProcessParams::Bernoulli { low: x.min(y), high: x.max(y), p }
            }
            ProcessKind::SineTrend => {
                let freq = (0..d).map(|_| unif(rng, 0.0, 10.0)).collect();
                let phase = (0..d).map(|_| unif(rng, 0.0, 10.0)).collect();
                ProcessParams::SineTrend { freq, phase }
            }
            ProcessKind::Alternating => ProcessParams::Alternating { shift: rng.gen_range(0..d) },
            ProcessKind::NoisyAlternating => {
                ProcessParams::NoisyAlternating { shift: rng.gen_range(0..d) }
            }
            ProcessKind::Adaptive => ProcessParams::Adaptive,
            ProcessKind::GradualVariation => {
                let mean = (0..d).map(|_| unif(rng, 0.0, 10.0)).collect();
                ProcessParams::GradualVariation { mean }
            }
        })
    }

    pub fn kind(&self) -> ProcessKind {
        match self {
            ProcessParams::Uniform { .. } => ProcessKind::Uniform,
            ProcessParams::Gaussian { .. } => ProcessKind::Gaussian,
            ProcessParams::Gamma { .. } => ProcessKind::Gamma,
            ProcessParams::Bernoulli { .. } => ProcessKind::Bernoulli,
            ProcessParams::SineTrend { .. } => ProcessKind::SineTrend,
            ProcessParams::Alternating { .. } => ProcessKind::Alternating,
            ProcessParams::NoisyAlternating { .. } => ProcessKind::NoisyAlternating,
            ProcessParams::Adaptive => ProcessKind::Adaptive,
            ProcessParams::GradualVariation { .. } => ProcessKind::GradualVariation,
        }
    }

    /// Check that the parameters are consistent with `d` actions and lie in
    /// their sampling ranges.
    pub fn validate(&self, d: usize) -> Result<(), EnvError> {
        let bad = |detail: String| EnvError::BadProcessParams { d, detail };
        let check_len = |v: &Vec<f64>, name: &str| {
            if v.len() != d {
                Err(bad(format!("{name} has length {}", v.len())))
            } else if v.iter().any(|x| !x.is_finite()) {
                Err(bad(format!("{name} has non-finite entries")))
            } else {
                Ok(())
            }
        };
        match self {
            ProcessParams::Uniform { lo, hi } => {
                check_len(lo, "lo")?;
                check_len(hi, "hi")?;
                for (l, h) in lo.iter().zip(hi) {
                    if !(0.0..=10.0).contains(l) || !(0.0..=10.0).contains(h) || l > h {
                        return Err(bad("interval endpoints outside [0,10] or inverted".into()));
                    }
                }
            }
            ProcessParams::Gaussian { mu } => check_len(mu, "mu")?,
            ProcessParams::Gamma { shape, scale } => {
                check_len(shape, "shape")?;
                check_len(scale, "scale")?;
                if shape.iter().any(|a| *a <= 0.0 || *a > 10.0)
                    || scale.iter().any(|t| *t <= 0.0 || *t > 2.0)
                {
                    return Err(bad("gamma parameters outside (0,10] × (0,2]".into()));
                }
            }
            ProcessParams::Bernoulli { low, high, p } => {
                check_len(p, "p")?;
                if !(0.0..=10.0).contains(low) || !(0.0..=10.0).contains(high) || low > high {
                    return Err(bad("bernoulli levels outside [0,10] or inverted".into()));
                }
                if p.iter().any(|x| !(0.0..=1.0).contains(x)) {
                    return Err(bad("bernoulli probabilities outside [0,1]".into()));
                }
            }
            ProcessParams::SineTrend { freq, phase } => {
                check_len(freq, "freq")?;
                check_len(phase, "phase")?;
            }
            ProcessParams::Alternating { shift } | ProcessParams::NoisyAlternating { shift } => {
                if *shift >= d {
                    return Err(bad(format!("shift {shift} not in 0..{d}")));
                }
            }
            ProcessParams::Adaptive => {}
            ProcessParams::GradualVariation { mean } => check_len(mean, "mean")?,
        }
        Ok(())
    }

    /// Sample the round-`t` reward without touching mutable state.
    ///
    /// `policy` is required iff the process is `Adaptive`.
    pub fn sample_reward(
        &self,
        d: usize,
        t: usize,
        policy: Option<&[f64]>,
        rng: &mut ChaCha8Rng,
    ) -> Result<RewardVector, EnvError> {
        debug_assert!(t >= 1, "rounds are 1-based");
        Ok(match self {
            ProcessParams::Uniform { lo, hi } => lo
                .iter()
                .zip(hi)
                .map(|(l, h)| unif(rng, *l, *h))
                .collect(),
            ProcessParams::Gaussian { mu } => gaussian_mixture(mu, rng),
            ProcessParams::Gamma { shape, scale } => shape
                .iter()
                .zip(scale)
                .map(|(a, th)| {
                    let g = GammaDist::new(*a, *th).expect("validated gamma parameters");
                    clip_reward(g.sample(rng))
                })
                .collect(),
            ProcessParams::Bernoulli { low, high, p } => p
                .iter()
                .map(|pa| if rng.gen::<f64>() < *pa { *high } else { *low })
                .collect(),
            ProcessParams::SineTrend { freq, phase } => freq
                .iter()
                .zip(phase)
                .map(|(x, y)| 5.0 * (1.0 + (x * t as f64 + y).sin()))
                .collect(),
            ProcessParams::Alternating { shift } => {
                let hot = (t + shift) % d;
                (0..d).map(|a| if a == hot { 10.0 } else { 0.0 }).collect()
            }
            ProcessParams::NoisyAlternating { shift } => {
                let hot = (t + shift) % d;
                let hot_reward = (25.0 / (t as f64 + 1.0)).min(10.0);
                (0..d)
                    .map(|a| if a == hot { hot_reward } else { unif(rng, 9.0, 10.0) })
                    .collect()
            }
            ProcessParams::Adaptive => {
                let pi = policy.ok_or(EnvError::MissingPolicy(ProcessKind::Adaptive))?;
                let star = argmax(pi);
                (0..d).map(|a| if a == star { 0.0 } else { 10.0 }).collect()
            }
            ProcessParams::GradualVariation { mean } => gaussian_mixture(mean, rng),
        })
    }

    /// Generate the round-`t` reward and advance any process state
    /// (the gradual-variation mean moves to `r_{t+1}`).
    pub fn next_reward(
        &mut self,
        d: usize,
        t: usize,
        policy: Option<&[f64]>,
        rng: &mut ChaCha8Rng,
    ) -> Result<RewardVector, EnvError> {
        let reward = self.sample_reward(d, t, policy, rng)?;
        if let ProcessParams::GradualVariation { mean } = self {
            let step = 1.0 / (t as f64).sqrt();
            for m in mean.iter_mut() {
                *m += unif(rng, -step, step);
            }
        }
        Ok(reward)
    }

    /// Mean reward vector at round `t`.
    ///
    /// Only the stationary stochastic processes and `GradualVariation` have a
    /// well-defined mean; for the latter the current trajectory value `r_t` is
    /// returned, so `t` must match the process position.
    pub fn mean_reward(&self, d: usize, t: usize, mode: &MeanMode) -> Result<Vec<f64>, EnvError> {
        match mode {
            MeanMode::AnalyticUnclipped => Ok(match self {
                ProcessParams::Uniform { lo, hi } => {
                    lo.iter().zip(hi).map(|(l, h)| 0.5 * (l + h)).collect()
                }
                ProcessParams::Gaussian { mu } => mu.clone(),
                ProcessParams::Gamma { shape, scale } => {
                    shape.iter().zip(scale).map(|(a, th)| a * th).collect()
                }
                ProcessParams::Bernoulli { low, high, p } => {
                    p.iter().map(|pa| pa * high + (1.0 - pa) * low).collect()
                }
                ProcessParams::GradualVariation { mean } => mean.clone(),
                other => return Err(EnvError::MeanUnsupported(other.kind())),
            }),
            MeanMode::MonteCarloClipped { samples, seed } => {
                if !(self.kind().is_stationary_stochastic()
                    || self.kind() == ProcessKind::GradualVariation)
                {
                    return Err(EnvError::MeanUnsupported(self.kind()));
                }
                let mut rng = rng::stream_rng(*seed, stream::MC_MEAN);
                let mut acc = vec![0.0; d];
                for _ in 0..*samples {
                    let r = self.sample_reward(d, t, None, &mut rng)?;
                    for (a, v) in acc.iter_mut().zip(&r) {
                        *a += v;
                    }
                }
                Ok(acc.into_iter().map(|a| a / *samples as f64).collect())
            }
        }
    }
}

/// How [`ProcessParams::mean_reward`] computes the mean.
#[derive(Clone, Debug, PartialEq)]
pub enum MeanMode {
    /// The pre-clipping distribution mean (the default for regret).
    AnalyticUnclipped,
    /// Empirical mean of clipped samples under a fixed derived sub-seed.
    MonteCarloClipped { samples: u32, seed: u64 },
}

// ---------------------------------------------------------------------------
// Feedback and history
// ---------------------------------------------------------------------------

/// Bandit feedback for choosing `action`: the scalar reward and the masked
/// vector `1(a = a_t)·R_t(a)`.
pub fn bandit_feedback(reward: &[f64], action: usize) -> Result<(f64, RewardVector), EnvError> {
    if action >= reward.len() {
        return Err(EnvError::ActionOutOfRange { action, d: reward.len() });
    }
    let mut masked = vec![0.0; reward.len()];
    masked[action] = reward[action];
    Ok((reward[action], masked))
}

/// Total mean-reward variation Σ_{t≥2} ‖r_t − r_{t−1}‖_∞.
pub fn variation_budget(means: &[Vec<f64>]) -> Result<f64, EnvError> {
    if means.len() < 2 {
        return Err(EnvError::TooFewMeans);
    }
    Ok(means
        .windows(2)
        .map(|w| {
            w[0].iter()
                .zip(&w[1])
                .map(|(a, b)| (b - a).abs())
                .fold(0.0, f64::max)
        })
        .sum())
}

/// The masked reward history visible to a bandit learner.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObservedHistory {
    pub masked_rewards: Vec<RewardVector>,
    pub actions: Vec<usize>,
}

impl ObservedHistory {
    pub fn push(&mut self, d: usize, action: usize, scalar: f64) {
        let mut masked = vec![0.0; d];
        masked[action] = scalar;
        self.masked_rewards.push(masked);
        self.actions.push(action);
    }

    /// Bandit histories carry at most one nonzero entry per round.
    pub fn is_properly_masked(&self) -> bool {
        self.masked_rewards
            .iter()
            .zip(&self.actions)
            .all(|(m, a)| m.iter().enumerate().all(|(i, v)| i == *a || *v == 0.0))
    }
}

// ---------------------------------------------------------------------------
// Scenarios
// ---------------------------------------------------------------------------

/// One sampled task instance: environment kind, dimensions, horizon, reward
/// process, and the root seed all of its randomness derives from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScenarioDoc", into = "ScenarioDoc")]
pub struct Scenario {
    pub env_kind: EnvKind,
    pub action_space: ActionSpace,
    pub policy_space: PolicySpace,
    pub horizon: usize,
    pub process: ProcessParams,
    pub seed: u64,
}

/// JSON layout: `env_kind`, `d`, `T`, `policy_space`, `process_kind`,
/// `process_params`, `seed`.
#[derive(Serialize, Deserialize)]
struct ScenarioDoc {
    env_kind: EnvKind,
    d: usize,
    #[serde(rename = "T")]
    horizon: usize,
    policy_space: PolicySpace,
    #[serde(flatten)]
    process: ProcessParams,
    seed: u64,
}

impl From<Scenario> for ScenarioDoc {
    fn from(s: Scenario) -> Self {
        ScenarioDoc {
            env_kind: s.env_kind,
            d: s.action_space.d(),
            horizon: s.horizon,
            policy_space: s.policy_space,
            process: s.process,
            seed: s.seed,
        }
    }
}

impl TryFrom<ScenarioDoc> for Scenario {
    type Error = EnvError;

    fn try_from(doc: ScenarioDoc) -> Result<Self, EnvError> {
        Scenario::new(
            doc.env_kind,
            doc.d,
            doc.policy_space,
            doc.horizon,
            doc.process,
            doc.seed,
        )
    }
}

impl Scenario {
    pub fn new(
        env_kind: EnvKind,
        d: usize,
        policy_space: PolicySpace,
        horizon: usize,
        process: ProcessParams,
        seed: u64,
    ) -> Result<Self, EnvError> {
        let action_space = ActionSpace::new(d)?;
        policy_space.validate()?;
        if horizon < 1 {
            return Err(EnvError::BadHorizon);
        }
        process.validate(d)?;
        let kind = process.kind();
        match env_kind {
            EnvKind::Fol => {}
            EnvKind::Mab => {
                if policy_space != PolicySpace::Simplex {
                    return Err(EnvError::PolicySpaceMismatch { env: env_kind, required: "simplex" });
                }
                if !kind.is_stationary_stochastic() {
                    return Err(EnvError::ProcessMismatch { env: env_kind, kind });
                }
            }
            EnvKind::NsMab => {
                if policy_space != PolicySpace::Simplex {
                    return Err(EnvError::PolicySpaceMismatch { env: env_kind, required: "simplex" });
                }
                if kind != ProcessKind::GradualVariation {
                    return Err(EnvError::ProcessMismatch { env: env_kind, kind });
                }
            }
        }
        Ok(Scenario { env_kind, action_space, policy_space, horizon, process, seed })
    }

    /// Sample a fresh scenario of the given shape; process parameters come
    /// from the seed's parameter sub-stream.
    pub fn sample(
        env_kind: EnvKind,
        d: usize,
        policy_space: PolicySpace,
        horizon: usize,
        kind: ProcessKind,
        seed: u64,
    ) -> Result<Self, EnvError> {
        let mut rng = rng::stream_rng(seed, stream::PARAMS);
        let process = ProcessParams::sample(kind, d, &mut rng)?;
        Scenario::new(env_kind, d, policy_space, horizon, process, seed)
    }

    pub fn d(&self) -> usize {
        self.action_space.d()
    }

    /// Pre-generate the reward stream (and mean trajectory, where defined)
    /// from the scenario's reward sub-stream. Policy-dependent processes
    /// leave `rewards = None`; their rewards are computed per rollout.
    pub fn prepare(&self) -> PreparedScenario {
        let d = self.d();
        let kind = self.process.kind();
        let has_mean =
            kind.is_stationary_stochastic() || kind == ProcessKind::GradualVariation;
        if kind == ProcessKind::Adaptive {
            return PreparedScenario { scenario: self.clone(), rewards: None, means: None };
        }
        let mut process = self.process.clone();
        let mut rng = rng::stream_rng(self.seed, stream::REWARDS);
        let mut rewards = Vec::with_capacity(self.horizon);
        let mut means = has_mean.then(|| Vec::with_capacity(self.horizon));
        for t in 1..=self.horizon {
            if let Some(ms) = means.as_mut() {
                ms.push(
                    process
                        .mean_reward(d, t, &MeanMode::AnalyticUnclipped)
                        .expect("mean exists for this process"),
                );
            }
            rewards.push(
                process
                    .next_reward(d, t, None, &mut rng)
                    .expect("non-adaptive process needs no policy"),
            );
        }
        PreparedScenario { scenario: self.clone(), rewards: Some(rewards), means }
    }
}

/// A scenario with its realized reward stream.
#[derive(Clone, Debug)]
pub struct PreparedScenario {
    pub scenario: Scenario,
    /// Realized reward vectors for t = 1..=T; `None` for the adaptive process.
    pub rewards: Option<Vec<RewardVector>>,
    /// Mean reward vectors per round where the process has a mean.
    pub means: Option<Vec<Vec<f64>>>,
}

impl PreparedScenario {
    /// The full reward vector revealed (FOL) or sampled (bandit) at round `t`.
    pub fn reward_at(&self, t: usize, policy: &[f64]) -> RewardVector {
        match &self.rewards {
            Some(rs) => rs[t - 1].clone(),
            None => {
                let d = self.scenario.d();
                let mut rng = rng::stream_rng(self.scenario.seed, stream::REWARDS);
                self.scenario
                    .process
                    .sample_reward(d, t, Some(policy), &mut rng)
                    .expect("adaptive rewards are deterministic given the policy")
            }
        }
    }

    /// Stationary mean vector (MAB regret comparator).
    pub fn stationary_mean(&self) -> Option<&Vec<f64>> {
        self.means.as_ref().map(|m| &m[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        rng::stream_rng(seed, 0)
    }

    #[test]
    fn gradual_variation_initial_mean_in_range() {
        let p = ProcessParams::sample(ProcessKind::GradualVariation, 3, &mut rng(1)).unwrap();
        match p {
            ProcessParams::GradualVariation { mean } => {
                assert!(mean.iter().all(|m| (0.0..=10.0).contains(m)));
            }
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn degenerate_dimension_rejected() {
        assert!(matches!(
            ProcessParams::sample(ProcessKind::Alternating, 1, &mut rng(1)),
            Err(EnvError::BadDimension(1))
        ));
    }

    #[test]
    fn gaussian_params_reproducible_under_seed() {
        let a = ProcessParams::sample(ProcessKind::Gaussian, 3, &mut rng(9)).unwrap();
        let b = ProcessParams::sample(ProcessKind::Gaussian, 3, &mut rng(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn alternating_first_round() {
        let mut p = ProcessParams::Alternating { shift: 0 };
        let r = p.next_reward(3, 1, None, &mut rng(0)).unwrap();
        assert_eq!(r, vec![0.0, 10.0, 0.0]);
    }

    #[test]
    fn adaptive_penalizes_argmax() {
        let p = ProcessParams::Adaptive;
        let pi = [0.5, 0.3, 0.2];
        let r = p.sample_reward(3, 1, Some(&pi), &mut rng(0)).unwrap();
        assert_eq!(r, vec![0.0, 10.0, 10.0]);
    }

    #[test]
    fn adaptive_without_policy_is_an_error() {
        let mut p = ProcessParams::Adaptive;
        assert!(matches!(
            p.next_reward(3, 1, None, &mut rng(0)),
            Err(EnvError::MissingPolicy(ProcessKind::Adaptive))
        ));
    }

    #[test]
    fn sine_trend_at_zero_params_is_flat_five() {
        let p = ProcessParams::SineTrend { freq: vec![0.0; 3], phase: vec![0.0; 3] };
        for t in [1, 2, 17] {
            let r = p.sample_reward(3, t, None, &mut rng(0)).unwrap();
            assert_eq!(r, vec![5.0, 5.0, 5.0]);
        }
    }

    #[test]
    fn noisy_alternating_round_one_pays_full() {
        // min(25/2, 10) = 10 at t = 1
        let p = ProcessParams::NoisyAlternating { shift: 0 };
        let r = p.sample_reward(3, 1, None, &mut rng(0)).unwrap();
        assert_eq!(r[1], 10.0);
        assert!(r[0] >= 9.0 && r[0] <= 10.0);
        assert!(r[2] >= 9.0 && r[2] <= 10.0);
    }

    #[test]
    fn mean_rewards_match_hand_values() {
        let bern = ProcessParams::Bernoulli { low: 2.0, high: 8.0, p: vec![0.5, 0.5] };
        let m = bern.mean_reward(2, 1, &MeanMode::AnalyticUnclipped).unwrap();
        assert_relative_eq!(m[0], 5.0);

        let gamma = ProcessParams::Gamma { shape: vec![2.0, 2.0], scale: vec![1.5, 1.5] };
        let m = gamma.mean_reward(2, 1, &MeanMode::AnalyticUnclipped).unwrap();
        assert_relative_eq!(m[0], 3.0);

        let gv = ProcessParams::GradualVariation { mean: vec![1.0, 2.0] };
        let m = gv.mean_reward(2, 1, &MeanMode::AnalyticUnclipped).unwrap();
        assert_eq!(m, vec![1.0, 2.0]);

        assert!(matches!(
            ProcessParams::Alternating { shift: 0 }.mean_reward(2, 1, &MeanMode::AnalyticUnclipped),
            Err(EnvError::MeanUnsupported(ProcessKind::Alternating))
        ));
    }

    #[test]
    fn monte_carlo_mean_close_to_analytic_for_interior_gaussian() {
        let p = ProcessParams::Gaussian { mu: vec![5.0; 3] };
        let mc = p
            .mean_reward(3, 1, &MeanMode::MonteCarloClipped { samples: 100_000, seed: 5 })
            .unwrap();
        for v in mc {
            assert!((v - 5.0).abs() < 0.2, "clipping bias too large: {v}");
        }
    }

    #[test]
    fn bandit_feedback_masks() {
        let (scalar, masked) = bandit_feedback(&[3.0, 7.0, 1.0], 1).unwrap();
        assert_eq!(scalar, 7.0);
        assert_eq!(masked, vec![0.0, 7.0, 0.0]);
        assert!(matches!(
            bandit_feedback(&[3.0, 7.0, 1.0], 3),
            Err(EnvError::ActionOutOfRange { action: 3, d: 3 })
        ));
        let (scalar, masked) = bandit_feedback(&[0.0, 0.0, 0.0], 0).unwrap();
        assert_eq!(scalar, 0.0);
        assert_eq!(masked, vec![0.0; 3]);
    }

    #[test]
    fn variation_budget_hand_values() {
        assert_relative_eq!(
            variation_budget(&[vec![1.0, 2.0], vec![1.0, 2.0], vec![1.0, 2.0]]).unwrap(),
            0.0
        );
        assert_relative_eq!(variation_budget(&[vec![0.0, 0.0], vec![1.0, 3.0]]).unwrap(), 3.0);
        assert!(matches!(variation_budget(&[vec![0.0]]), Err(EnvError::TooFewMeans)));
    }

    #[test]
    fn gradual_variation_budget_scales_like_sqrt_t() {
        // E V_T = Σ_{t=1}^{T-1} (d/(d+1))/√t ≈ 14 for d = 3, T = 100; the
        // check is a loose factor-3 band around 2√T.
        let t_max = 100;
        let mut total = 0.0;
        let runs = 40;
        for seed in 0..runs {
            let scenario = Scenario::sample(
                EnvKind::NsMab,
                3,
                PolicySpace::Simplex,
                t_max,
                ProcessKind::GradualVariation,
                1000 + seed,
            )
            .unwrap();
            let prepared = scenario.prepare();
            total += variation_budget(prepared.means.as_ref().unwrap()).unwrap();
        }
        let avg = total / runs as f64;
        let reference = 2.0 * (t_max as f64).sqrt();
        assert!(avg > reference / 3.0 && avg < reference * 3.0, "V_T = {avg}");
    }

    #[test]
    fn clipped_processes_stay_in_range() {
        for kind in [ProcessKind::Gaussian, ProcessKind::Gamma, ProcessKind::GradualVariation] {
            let mut r = rng(77);
            let mut p = ProcessParams::sample(kind, 4, &mut r).unwrap();
            for t in 1..=300 {
                let reward = p.next_reward(4, t, None, &mut r).unwrap();
                assert!(
                    reward.iter().all(|v| (0.0..=REWARD_CAP).contains(v)),
                    "{kind:?} escaped [0,10]: {reward:?}"
                );
            }
        }
    }

    #[test]
    fn same_seed_same_stream() {
        let scenario = Scenario::sample(
            EnvKind::Mab,
            3,
            PolicySpace::Simplex,
            50,
            ProcessKind::Gaussian,
            123,
        )
        .unwrap();
        let a = scenario.prepare();
        let b = scenario.prepare();
        assert_eq!(a.rewards, b.rewards);
        assert_eq!(a.means, b.means);
    }

    #[test]
    fn alternating_is_one_hot_with_period_d() {
        let d = 3;
        let p = ProcessParams::Alternating { shift: 2 };
        let hot_at = |t: usize| {
            let r = p.sample_reward(d, t, None, &mut rng(0)).unwrap();
            let hots: Vec<usize> =
                r.iter().enumerate().filter(|(_, v)| **v == 10.0).map(|(i, _)| i).collect();
            assert_eq!(hots.len(), 1);
            assert!(r.iter().filter(|v| **v == 0.0).count() == d - 1);
            hots[0]
        };
        for t in 1..=12 {
            assert_eq!(hot_at(t), hot_at(t + d));
            assert_ne!(hot_at(t), hot_at(t + 1));
        }
    }

    #[test]
    fn scenario_validation_rules() {
        let gauss = ProcessParams::Gaussian { mu: vec![5.0; 3] };
        assert!(Scenario::new(EnvKind::Mab, 3, PolicySpace::Simplex, 10, gauss.clone(), 0).is_ok());
        assert!(matches!(
            Scenario::new(EnvKind::Mab, 3, PolicySpace::L2Ball { radius: 1.0 }, 10, gauss.clone(), 0),
            Err(EnvError::PolicySpaceMismatch { .. })
        ));
        assert!(matches!(
            Scenario::new(EnvKind::Mab, 3, PolicySpace::Simplex, 10, ProcessParams::Adaptive, 0),
            Err(EnvError::ProcessMismatch { .. })
        ));
        assert!(matches!(
            Scenario::new(EnvKind::NsMab, 3, PolicySpace::Simplex, 10, gauss.clone(), 0),
            Err(EnvError::ProcessMismatch { .. })
        ));
        assert!(matches!(
            Scenario::new(EnvKind::Fol, 3, PolicySpace::Simplex, 0, gauss, 0),
            Err(EnvError::BadHorizon)
        ));
    }

    #[test]
    fn scenario_json_round_trip() {
        let scenario = Scenario::sample(
            EnvKind::NsMab,
            3,
            PolicySpace::Simplex,
            25,
            ProcessKind::GradualVariation,
            7,
        )
        .unwrap();
        let json = serde_json::to_string(&scenario).unwrap();
        for field in ["env_kind", "\"d\"", "\"T\"", "policy_space", "process_kind", "process_params", "seed"] {
            assert!(json.contains(field), "missing {field} in {json}");
        }
        let back: Scenario = serde_json::from_str(&json).unwrap();
        assert_eq!(back, scenario);
    }

    #[test]
    fn scenario_json_rejects_invalid() {
        let json = r#"{
            "env_kind": "mab", "d": 3, "T": 10,
            "policy_space": {"kind": "simplex"},
            "process_kind": "sine_trend",
            "process_params": {"freq": [1.0,1.0,1.0], "phase": [0.0,0.0,0.0]},
            "seed": 1
        }"#;
        assert!(serde_json::from_str::<Scenario>(json).is_err());
    }

    proptest! {
        #[test]
        fn any_process_reward_is_finite_and_clipped_kinds_bounded(
            seed in 0u64..5000,
            kind_idx in 0usize..9,
            d in 2usize..5,
        ) {
            let kind = ProcessKind::all()[kind_idx];
            let mut r = rng(seed);
            let mut p = ProcessParams::sample(kind, d, &mut r).unwrap();
            let uniform = vec![1.0 / d as f64; d];
            for t in 1..=20 {
                let reward = p.next_reward(d, t, Some(&uniform), &mut r).unwrap();
                prop_assert_eq!(reward.len(), d);
                prop_assert!(reward.iter().all(|v| v.is_finite()));
                if matches!(kind, ProcessKind::Gaussian | ProcessKind::Gamma | ProcessKind::GradualVariation) {
                    prop_assert!(reward.iter().all(|v| (0.0..=REWARD_CAP).contains(v)));
                }
            }
            p.validate(d).unwrap();
        }
    }
}
