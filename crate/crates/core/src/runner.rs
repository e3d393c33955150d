//! Episode and replicate runners shared by the CLI and the test suites.
//!
//! A scenario template plus a replicate index fully determines a scenario
//! (process parameters included), so replicated evaluations are reproducible
//! and parallelize freely — results are joined in replicate order.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attn::{ModelParams, OperatorKind, ScoreAccumulator};
use crate::baselines::{
    sample_action, AlgorithmId, Exp3, Ftl, FtrlL2, Greedy, Hedge, Rexp3, Stepsize, Ucb,
    UniformAgent,
};
use crate::env::{
    bandit_feedback, variation_budget, EnvKind, EnvError, PolicySpace, PreparedScenario,
    ProcessKind, Scenario,
};
use crate::linalg::argmax;
use crate::metrics::{
    dynamic_regret, fol_regret, mab_expected_regret, Comparator, ExplorationReport, RegretCurve,
};
use crate::rng::{self, stream};

#[derive(Debug, thiserror::Error)]
pub enum RunnerError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Baseline(#[from] crate::baselines::BaselineError),
    #[error("algorithm {algo:?} does not run in {env:?} environments")]
    WrongFeedback { algo: String, env: EnvKind },
    #[error("model checkpoint has d={got}, the scenario needs d={expect}")]
    ModelDimension { got: usize, expect: usize },
}

/// The shape of scenarios an experiment draws: everything except the process
/// parameters and the per-replicate seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTemplate {
    pub env_kind: EnvKind,
    pub d: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub policy_space: PolicySpace,
    pub process_kind: ProcessKind,
}

impl ScenarioTemplate {
    pub fn instantiate(&self, seed: u64) -> Result<Scenario, EnvError> {
        Scenario::sample(
            self.env_kind,
            self.d,
            self.policy_space,
            self.horizon,
            self.process_kind,
            seed,
        )
    }
}

/// Who is playing: a classical baseline or a model checkpoint.
#[derive(Clone, Debug)]
pub enum AgentSpec {
    Baseline(AlgorithmId),
    Model { params: ModelParams, operator: OperatorKind },
}

impl AgentSpec {
    pub fn label(&self) -> String {
        match self {
            AgentSpec::Baseline(id) => format!("{id:?}"),
            AgentSpec::Model { .. } => "transformer".to_string(),
        }
    }
}

enum AgentState {
    Ftl(Ftl),
    FtrlL2(FtrlL2),
    Hedge(Hedge),
    Ucb(Ucb),
    Exp3(Exp3),
    Rexp3(Rexp3),
    Greedy(Greedy),
    Uniform(UniformAgent),
    Model { params: ModelParams, operator: OperatorKind, acc: ScoreAccumulator },
}

impl AgentState {
    fn build(
        spec: &AgentSpec,
        scenario: &Scenario,
        prepared: &PreparedScenario,
    ) -> Result<AgentState, RunnerError> {
        let d = scenario.d();
        let horizon = scenario.horizon;
        let full_info = scenario.env_kind == EnvKind::Fol;
        let wrong = |algo: &str| RunnerError::WrongFeedback {
            algo: algo.to_string(),
            env: scenario.env_kind,
        };
        Ok(match spec {
            AgentSpec::Model { params, operator } => {
                if params.d() != d {
                    return Err(RunnerError::ModelDimension { got: params.d(), expect: d });
                }
                AgentState::Model {
                    params: params.clone(),
                    operator: *operator,
                    acc: ScoreAccumulator::new(params),
                }
            }
            AgentSpec::Baseline(id) => match id {
                AlgorithmId::Ftl => {
                    if !full_info {
                        return Err(wrong("ftl"));
                    }
                    AgentState::Ftl(Ftl::new(d))
                }
                AlgorithmId::FtrlL2 { stepsize } => {
                    if !full_info {
                        return Err(wrong("ftrl_l2"));
                    }
                    let radius = match scenario.policy_space {
                        PolicySpace::L2Ball { radius } => radius,
                        PolicySpace::Simplex => {
                            return Err(RunnerError::WrongFeedback {
                                algo: "ftrl_l2 (needs the l2_ball policy space)".into(),
                                env: scenario.env_kind,
                            })
                        }
                    };
                    let eta = stepsize_value(*stepsize, d, horizon);
                    AgentState::FtrlL2(FtrlL2::new(d, eta, radius)?)
                }
                AlgorithmId::Hedge { stepsize } => {
                    if !full_info {
                        return Err(wrong("hedge"));
                    }
                    let hedge = match stepsize {
                        Stepsize::Anytime => Hedge::new(d, Stepsize::Anytime),
                        fixed => Hedge::new(d, *fixed),
                    };
                    AgentState::Hedge(hedge)
                }
                AlgorithmId::Ucb { scale } => {
                    if full_info {
                        return Err(wrong("ucb"));
                    }
                    AgentState::Ucb(Ucb::new(d, *scale))
                }
                AlgorithmId::Exp3 => {
                    if full_info {
                        return Err(wrong("exp3"));
                    }
                    AgentState::Exp3(Exp3::new(d, horizon)?)
                }
                AlgorithmId::Rexp3 => {
                    if full_info {
                        return Err(wrong("rexp3"));
                    }
                    // The variation budget of the realized mean trajectory is
                    // training-time knowledge, like the regret comparator.
                    let means = prepared.means.as_deref().unwrap_or(&[]);
                    let v_t = if means.len() >= 2 { variation_budget(means)? } else { 0.0 };
                    AgentState::Rexp3(Rexp3::new(d, horizon, v_t.max(1e-9))?)
                }
                AlgorithmId::Greedy => {
                    if full_info {
                        return Err(wrong("greedy"));
                    }
                    AgentState::Greedy(Greedy::new(d))
                }
                AlgorithmId::Uniform => AgentState::Uniform(UniformAgent { d }),
            },
        })
    }

    fn policy(&mut self, t: usize) -> Vec<f64> {
        match self {
            AgentState::Ftl(_) | AgentState::FtrlL2(_) => unreachable!("handled in fol loop"),
            AgentState::Hedge(h) => h.step(t),
            AgentState::Ucb(u) => {
                let d = u.counts.len();
                let mut v = vec![0.0; d];
                v[u.step(t)] = 1.0;
                v
            }
            AgentState::Exp3(e) => e.policy(),
            AgentState::Rexp3(r) => r.policy(),
            AgentState::Greedy(g) => {
                let d = g.counts.len();
                let mut v = vec![0.0; d];
                v[g.step()] = 1.0;
                v
            }
            AgentState::Uniform(u) => u.policy(),
            AgentState::Model { operator, acc, .. } => {
                crate::attn::apply_operator(*operator, acc.score())
            }
        }
    }
}

fn stepsize_value(stepsize: Stepsize, d: usize, eval_horizon: usize) -> f64 {
    match stepsize {
        Stepsize::Anytime => crate::baselines::hedge_eta(d, eval_horizon),
        Stepsize::FixedHorizon(t) => crate::baselines::hedge_eta(d, t),
    }
}

/// One full-information episode.
pub struct FolEpisode {
    pub policies: Vec<Vec<f64>>,
    pub rewards: Vec<Vec<f64>>,
}

pub fn run_fol_episode(
    prepared: &PreparedScenario,
    spec: &AgentSpec,
) -> Result<FolEpisode, RunnerError> {
    let scenario = &prepared.scenario;
    let mut agent = AgentState::build(spec, scenario, prepared)?;
    let mut policies = Vec::with_capacity(scenario.horizon);
    let mut rewards = Vec::with_capacity(scenario.horizon);
    for t in 1..=scenario.horizon {
        let policy = match &mut agent {
            AgentState::Ftl(f) => f.step(&scenario.policy_space),
            AgentState::FtrlL2(f) => f.step(),
            other => other.policy(t),
        };
        let reward = prepared.reward_at(t, &policy);
        match &mut agent {
            AgentState::Ftl(f) => f.observe(&reward),
            AgentState::FtrlL2(f) => f.observe(&reward),
            AgentState::Hedge(h) => h.observe(&reward),
            AgentState::Uniform(_) => {}
            AgentState::Model { params, acc, .. } => acc.push(params, &reward),
            _ => unreachable!("bandit agents are rejected when building"),
        }
        policies.push(policy);
        rewards.push(reward);
    }
    Ok(FolEpisode { policies, rewards })
}

/// One bandit episode: sample an action from the policy, reveal one entry.
pub struct BanditEpisode {
    pub policies: Vec<Vec<f64>>,
    pub actions: Vec<usize>,
    pub realized: Vec<f64>,
}

pub fn run_bandit_episode(
    prepared: &PreparedScenario,
    spec: &AgentSpec,
    rng: &mut ChaCha8Rng,
) -> Result<BanditEpisode, RunnerError> {
    let scenario = &prepared.scenario;
    let mut agent = AgentState::build(spec, scenario, prepared)?;
    let mut policies = Vec::with_capacity(scenario.horizon);
    let mut actions = Vec::with_capacity(scenario.horizon);
    let mut realized = Vec::with_capacity(scenario.horizon);
    for t in 1..=scenario.horizon {
        let policy = agent.policy(t);
        let action = sample_action(&policy, rng);
        let reward = prepared.reward_at(t, &policy);
        let (scalar, masked) = bandit_feedback(&reward, action)?;
        match &mut agent {
            AgentState::Ucb(u) => u.observe(action, scalar),
            AgentState::Exp3(e) => e.observe(action, scalar),
            AgentState::Rexp3(r) => r.observe(action, scalar),
            AgentState::Greedy(g) => g.observe(action, scalar),
            AgentState::Uniform(_) => {}
            AgentState::Model { params, acc, .. } => acc.push(params, &masked),
            _ => unreachable!("full-information agents are rejected when building"),
        }
        policies.push(policy);
        actions.push(action);
        realized.push(scalar);
    }
    Ok(BanditEpisode { policies, actions, realized })
}

/// Replicated evaluation of one agent on one scenario template.
#[derive(Clone, Debug)]
pub struct EvalOutput {
    /// Per-replicate regret curves.
    pub curves: Vec<RegretCurve>,
    /// Pointwise mean of the per-replicate curves.
    pub mean_curve: RegretCurve,
    /// Actions per replicate (bandit environments).
    pub actions: Option<Vec<Vec<usize>>>,
    /// Exploration metrics, each replicate judged against its own best arm.
    pub exploration: Option<ExplorationReport>,
}

/// Run `replicates` independent scenarios (seeds derived from `root_seed`)
/// and collect regret curves plus, for bandit environments, exploration
/// metrics.
pub fn run_replicated(
    template: &ScenarioTemplate,
    spec: &AgentSpec,
    replicates: usize,
    root_seed: u64,
) -> Result<EvalOutput, RunnerError> {
    let results: Vec<Result<(RegretCurve, Option<(Vec<usize>, Vec<usize>)>), RunnerError>> = (0
        ..replicates)
        .into_par_iter()
        .map(|rep| {
            let scenario_seed = rng::mix(root_seed, rep as u64);
            let scenario = template.instantiate(scenario_seed)?;
            let prepared = scenario.prepare();
            match template.env_kind {
                EnvKind::Fol => {
                    let ep = run_fol_episode(&prepared, spec)?;
                    let curve = fol_regret(
                        &ep.rewards,
                        &ep.policies,
                        &scenario.policy_space,
                        Comparator::BestFixedPrefix,
                    )
                    .expect("aligned episode");
                    Ok((curve, None))
                }
                EnvKind::Mab => {
                    let mut rng = rng::stream_rng(scenario_seed, stream::PERTURB);
                    let ep = run_bandit_episode(&prepared, spec, &mut rng)?;
                    let means = prepared.stationary_mean().expect("stochastic process");
                    let curve = mab_expected_regret(means, &ep.policies);
                    let best = argmax(means);
                    Ok((curve, Some((ep.actions, vec![best; scenario.horizon]))))
                }
                EnvKind::NsMab => {
                    let mut rng = rng::stream_rng(scenario_seed, stream::PERTURB);
                    let ep = run_bandit_episode(&prepared, spec, &mut rng)?;
                    let means = prepared.means.as_ref().expect("drifting means");
                    let curve = dynamic_regret(means, &ep.policies).expect("aligned episode");
                    let best: Vec<usize> = means.iter().map(|m| argmax(m)).collect();
                    Ok((curve, Some((ep.actions, best))))
                }
            }
        })
        .collect();

    let mut curves = Vec::with_capacity(replicates);
    let mut actions = Vec::new();
    let mut best_arms = Vec::new();
    for r in results {
        let (curve, bandit) = r?;
        curves.push(curve);
        if let Some((acts, best)) = bandit {
            actions.push(acts);
            best_arms.push(best);
        }
    }

    let horizon = template.horizon;
    let mut mean_values = vec![0.0; horizon];
    for curve in &curves {
        for (m, v) in mean_values.iter_mut().zip(&curve.values) {
            *m += v;
        }
    }
    mean_values.iter_mut().for_each(|m| *m /= curves.len().max(1) as f64);
    let mean_curve = RegretCurve {
        values: mean_values,
        env_kind: template.env_kind,
        comparator: curves
            .first()
            .map(|c| c.comparator)
            .unwrap_or(Comparator::BestFixedPrefix),
    };

    let (actions, exploration) = if actions.is_empty() {
        (None, None)
    } else {
        // Each replicate is judged against its own best arm(s), then averaged:
        // equivalent to the shared-best-arm metric applied per replicate.
        let d = template.d;
        let suff: Vec<f64> = (1..=horizon)
            .map(|t| {
                actions
                    .iter()
                    .zip(&best_arms)
                    .map(|(a, b)| {
                        crate::metrics::suff_fail_freq(std::slice::from_ref(a), b, t)
                    })
                    .sum::<f64>()
                    / actions.len() as f64
            })
            .collect();
        let min_frac: Vec<f64> =
            (1..=horizon).map(|t| crate::metrics::min_frac(&actions, t, d)).collect();
        (
            Some(actions),
            Some(ExplorationReport { suff_fail_freq: suff, min_frac_scaled: min_frac }),
        )
    };

    Ok(EvalOutput { curves, mean_curve, actions, exploration })
}

/// Histories drawn from a reward process, used as probe sets for the
/// FTRL-equivalence gap. Lengths cycle over 1..=max_len.
pub fn process_probe_histories(
    kind: ProcessKind,
    d: usize,
    count: usize,
    max_len: usize,
    seed: u64,
) -> Vec<Vec<Vec<f64>>> {
    (0..count)
        .map(|i| {
            let len = 1 + i % max_len;
            let scenario_seed = rng::mix(seed, i as u64);
            let scenario =
                Scenario::sample(EnvKind::Fol, d, PolicySpace::Simplex, len, kind, scenario_seed)
                    .expect("probe scenario");
            scenario.prepare().rewards.expect("non-adaptive probes")
        })
        .collect()
}
