//! Iterative regret-ranked self-imitation training.
//!
//! Each iteration samples M scenarios, rolls out L perturbed trajectories per
//! scenario (Gaussian noise added to the pre-operator score, then passed
//! through the operator so every policy stays valid), keeps the k
//! lowest-regret trajectories per scenario, and fits the model to the kept
//! policies with mini-batch Adam on the squared ℓ2 distance.
//!
//! Training is bitwise reproducible: scenario seeds, rollout noise, and batch
//! shuffles all derive from the root seed, and the rayon fan-out over
//! scenarios joins results in index order.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attn::{
    apply_operator, BatchItem, Diagnostics, ModelParams, OperatorKind, OutputKind, ScoreAccumulator,
};
use crate::env::{
    bandit_feedback, EnvKind, PolicySpace, PreparedScenario, ProcessKind, Scenario,
};
use crate::metrics::{fol_regret, mab_expected_regret, mab_realized_regret, Comparator};
use crate::rng::{self, stream};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("top-k must satisfy 1 <= k <= L = {l}, got {k}")]
    BadTopK { k: usize, l: usize },
    #[error("dataset must be nonempty")]
    EmptyDataset,
    #[error("batch size must be at least 1")]
    BadBatchSize,
    #[error(transparent)]
    Env(#[from] crate::env::EnvError),
    #[error("checkpoint sink failed: {0}")]
    Sink(String),
}

/// Adam hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig { learning_rate: 0.01, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// How rollout regret is scored in bandit environments.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BanditRegretSignal {
    /// Expected regret over the recorded policies (means are known during
    /// training).
    Expected,
    /// Realized regret on the sampled pulls.
    Realized,
}

/// Whether each iteration samples fresh scenarios or reuses a fixed pool.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioSampling {
    Resample,
    FixedPool,
}

/// Where the rollout noise enters. The perturbed-output formula
/// `Operator(π_θ(history) + ε)` reads either way depending on whether
/// `π_θ` denotes the pre-operator score or the policy the operator already
/// produced; both keep every trajectory policy valid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationPoint {
    /// ε is added to the pre-operator attention score.
    Score,
    /// ε is added to the operator output, and the operator is applied again.
    Policy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub iterations: usize,
    /// M scenarios per iteration.
    pub scenarios_per_iter: usize,
    /// L rollouts per scenario.
    pub rollouts_per_scenario: usize,
    /// k trajectories kept per scenario.
    pub top_k: usize,
    /// Perturbation standard deviation σ.
    pub sigma: f64,
    /// Where σ-noise is injected during rollouts.
    pub perturbation: PerturbationPoint,
    pub optimizer: OptimizerConfig,
    pub batch_size: usize,
    /// Optimizer passes over each iteration's dataset.
    pub epochs: usize,
    pub d: usize,
    pub horizon: usize,
    pub env_kind: EnvKind,
    pub process_kind: ProcessKind,
    pub operator: OperatorKind,
    pub init_sd: f64,
    pub scenario_sampling: ScenarioSampling,
    pub bandit_regret: BanditRegretSignal,
    /// Fit the raw pre-operator score instead of the policy output.
    pub fit_raw_score: bool,
    /// Checkpoint every this many iterations (0 = only the final model).
    pub checkpoint_interval: usize,
    /// Average the parameters over the last this many iterations and return
    /// the average as the trained model (0 = return the last iterate). The
    /// per-iteration gradient noise of small-batch Adam leaves a jitter floor
    /// on the parameters; the tail average removes it without touching the
    /// optimizer hyperparameters.
    pub tail_average: usize,
}

impl Default for TrainConfig {
    /// The FOL simplex configuration: d = 3, T = 25, Gaussian rewards,
    /// σ = 1.0, Adam(0.01, 0.9, 0.999, 1e-8), batch 1000, M = 100, L = 10,
    /// k = 1, 1000 iterations.
    fn default() -> Self {
        TrainConfig {
            iterations: 1000,
            scenarios_per_iter: 100,
            rollouts_per_scenario: 10,
            top_k: 1,
            sigma: 1.0,
            perturbation: PerturbationPoint::Score,
            optimizer: OptimizerConfig::default(),
            batch_size: 1000,
            epochs: 1,
            d: 3,
            horizon: 25,
            env_kind: EnvKind::Fol,
            process_kind: ProcessKind::Gaussian,
            operator: OperatorKind::Softmax,
            init_sd: 0.3,
            scenario_sampling: ScenarioSampling::Resample,
            bandit_regret: BanditRegretSignal::Expected,
            fit_raw_score: false,
            checkpoint_interval: 0,
            tail_average: 100,
        }
    }
}

impl TrainConfig {
    /// The MAB configuration: bandit feedback with σ = 0.1.
    pub fn default_mab() -> Self {
        TrainConfig { env_kind: EnvKind::Mab, sigma: 0.1, ..TrainConfig::default() }
    }

    pub fn policy_space(&self) -> PolicySpace {
        match self.operator {
            OperatorKind::Softmax => PolicySpace::Simplex,
            OperatorKind::ProjL2Ball { radius } => PolicySpace::L2Ball { radius },
        }
    }

    fn output_kind(&self) -> OutputKind {
        if self.fit_raw_score {
            OutputKind::RawScore
        } else {
            OutputKind::Policy(self.operator)
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if self.top_k < 1 || self.top_k > self.rollouts_per_scenario {
            return Err(TrainError::BadTopK { k: self.top_k, l: self.rollouts_per_scenario });
        }
        if self.batch_size < 1 {
            return Err(TrainError::BadBatchSize);
        }
        Ok(())
    }
}

/// One perturbed trajectory.
#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    /// Perturbed policies π_t for t = 1..=T.
    pub policies: Vec<Vec<f64>>,
    /// Reward vectors as seen by the model: full vectors in FOL, masked
    /// vectors under bandit feedback.
    pub inputs: Vec<Vec<f64>>,
    /// Sampled actions (bandit only).
    pub actions: Vec<usize>,
    /// Realized scalar rewards of the pulls (bandit only).
    pub realized: Vec<f64>,
    /// Full sampled reward vectors, kept for regret computation.
    pub rewards: Vec<Vec<f64>>,
    pub regret: f64,
}

/// Roll out one perturbed trajectory on a prepared scenario.
///
/// At each round the score accumulates the model inputs so far, Gaussian
/// noise ε ~ N(0, σ²I) is added to the pre-operator score, and the operator
/// produces the round's policy. FOL feeds the full reward vector back; bandit
/// environments sample an action from the policy and feed the masked vector.
pub fn rollout(
    prepared: &PreparedScenario,
    params: &ModelParams,
    operator: OperatorKind,
    sigma: f64,
    perturbation: PerturbationPoint,
    regret_signal: BanditRegretSignal,
    rng: &mut ChaCha8Rng,
) -> TrajectoryRecord {
    let scenario = &prepared.scenario;
    let t_max = scenario.horizon;
    let bandit = scenario.env_kind != EnvKind::Fol;

    let mut acc = ScoreAccumulator::new(params);
    let mut policies = Vec::with_capacity(t_max);
    let mut inputs = Vec::with_capacity(t_max);
    let mut actions = Vec::new();
    let mut realized = Vec::new();
    let mut rewards = Vec::with_capacity(t_max);

    for t in 1..=t_max {
        // σ = 0 short-circuits to the plain forward pass under either reading.
        let policy = if sigma > 0.0 {
            let mut pre = match perturbation {
                PerturbationPoint::Score => acc.score().to_vec(),
                PerturbationPoint::Policy => apply_operator(operator, acc.score()),
            };
            for s in pre.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *s += sigma * z;
            }
            apply_operator(operator, &pre)
        } else {
            apply_operator(operator, acc.score())
        };
        let reward = prepared.reward_at(t, &policy);
        if bandit {
            let action = sample_simplex(&policy, rng);
            let (scalar, masked) = bandit_feedback(&reward, action).expect("action in range");
            acc.push(params, &masked);
            inputs.push(masked);
            actions.push(action);
            realized.push(scalar);
        } else {
            acc.push(params, &reward);
            inputs.push(reward.clone());
        }
        policies.push(policy);
        rewards.push(reward);
    }

    let regret = trajectory_regret(
        scenario,
        prepared,
        &policies,
        &actions,
        &realized,
        &rewards,
        regret_signal,
    );
    TrajectoryRecord { policies, inputs, actions, realized, rewards, regret }
}

fn sample_simplex(policy: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in policy.iter().enumerate() {
        acc += p.max(0.0);
        if u < acc {
            return i;
        }
    }
    policy.len() - 1
}

fn trajectory_regret(
    scenario: &Scenario,
    prepared: &PreparedScenario,
    policies: &[Vec<f64>],
    actions: &[usize],
    realized: &[f64],
    rewards: &[Vec<f64>],
    signal: BanditRegretSignal,
) -> f64 {
    match scenario.env_kind {
        EnvKind::Fol => {
            fol_regret(rewards, policies, &scenario.policy_space, Comparator::BestFixedPrefix)
                .expect("aligned rollout lengths")
                .final_value()
        }
        EnvKind::Mab | EnvKind::NsMab => {
            let means = prepared.stationary_mean().expect("stochastic process has means");
            match signal {
                BanditRegretSignal::Expected => mab_expected_regret(means, policies).final_value(),
                BanditRegretSignal::Realized => mab_realized_regret(means, actions, realized)
                    .expect("aligned rollout lengths")
                    .final_value(),
            }
        }
    }
}

/// Indices of the k lowest-regret records; ties break toward the lower index.
pub fn select_topk(records: &[TrajectoryRecord], k: usize) -> Result<Vec<usize>, TrainError> {
    if k < 1 || k > records.len() {
        return Err(TrainError::BadTopK { k, l: records.len() });
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|a, b| {
        records[*a]
            .regret
            .partial_cmp(&records[*b].regret)
            .expect("finite regrets")
            .then(a.cmp(b))
    });
    order.truncate(k);
    Ok(order)
}

/// Adam state over the flat parameter vector.
#[derive(Clone, Debug)]
pub struct Adam {
    config: OptimizerConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl Adam {
    pub fn new(config: OptimizerConfig, param_len: usize) -> Self {
        Adam { config, m: vec![0.0; param_len], v: vec![0.0; param_len], step: 0 }
    }

    pub fn apply(&mut self, params: &mut ModelParams, grad: &ModelParams) {
        self.step += 1;
        let OptimizerConfig { learning_rate, beta1, beta2, epsilon } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        let theta = params.as_flat_mut();
        for (i, g) in grad.as_flat().iter().enumerate() {
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            theta[i] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
}

/// One selected trajectory with everything needed to replay its prefixes.
/// Each target pairs a 0-based prefix length with the policy to imitate:
/// the round-(t+1) policy conditions on the first t inputs.
#[derive(Clone, Debug)]
pub struct DatasetItem {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<(usize, Vec<f64>)>,
}

impl DatasetItem {
    fn from_record(record: &TrajectoryRecord) -> Self {
        DatasetItem {
            inputs: record.inputs.clone(),
            targets: record.policies.iter().cloned().enumerate().collect(),
        }
    }
}

/// One optimizer pass over the dataset: (trajectory, round) pairs are
/// shuffled, grouped into batches, and each batch takes one Adam step on the
/// mean squared ℓ2 distance between the model output on the replayed history
/// prefix and the stored perturbed policy. Returns the mean per-pair loss.
pub fn sft_update(
    params: &mut ModelParams,
    adam: &mut Adam,
    dataset: &[DatasetItem],
    config: &TrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<f64, TrainError> {
    if dataset.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    config.validate()?;
    let mut pairs: Vec<(usize, usize)> = dataset
        .iter()
        .enumerate()
        .flat_map(|(i, item)| (0..item.targets.len()).map(move |j| (i, j)))
        .collect();
    let output = config.output_kind();
    let mut epoch_loss = 0.0;
    for _ in 0..config.epochs.max(1) {
        pairs.shuffle(rng);
        let mut pass_loss = 0.0;
        for batch in pairs.chunks(config.batch_size) {
            let items: Vec<BatchItem<'_>> = batch
                .iter()
                .map(|(i, j)| {
                    let (prefix, target) = &dataset[*i].targets[*j];
                    BatchItem { history: &dataset[*i].inputs[..*prefix], target }
                })
                .collect();
            let (loss, grad) = crate::attn::loss_and_gradient(params, &items, output);
            let scale = 1.0 / items.len() as f64;
            let mut mean_grad = grad;
            mean_grad.as_flat_mut().iter_mut().for_each(|g| *g *= scale);
            adam.apply(params, &mean_grad);
            pass_loss += loss;
        }
        epoch_loss = pass_loss / pairs.len() as f64;
    }
    Ok(epoch_loss)
}

/// Per-iteration log entry.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainLogEntry {
    pub iteration: usize,
    pub loss: f64,
    pub diagnostics: Diagnostics,
    pub mean_selected_regret: f64,
    pub mean_rollout_regret: f64,
    pub checkpoint: Option<String>,
}

/// Full training log, one entry per iteration.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct TrainLog {
    pub entries: Vec<TrainLogEntry>,
}

/// Observer invoked after every iteration; return a checkpoint reference to
/// record in the log (e.g. a file the caller just wrote).
pub type TrainObserver<'a> =
    dyn FnMut(&TrainLogEntry, &ModelParams) -> Result<Option<String>, String> + 'a;

/// Run the full training loop from a fresh random initialization.
pub fn train(
    config: &TrainConfig,
    root_seed: u64,
    observer: Option<&mut TrainObserver<'_>>,
) -> Result<(ModelParams, TrainLog), TrainError> {
    config.validate()?;
    let mut params = ModelParams::random_init(
        config.d,
        config.init_sd,
        &mut rng::stream_rng(root_seed, stream::PARAMS),
    );
    let log = train_from(&mut params, config, root_seed, observer)?;
    Ok((params, log))
}

/// Run the training loop from the given parameters (mutated in place).
pub fn train_from(
    params: &mut ModelParams,
    config: &TrainConfig,
    root_seed: u64,
    mut observer: Option<&mut TrainObserver<'_>>,
) -> Result<TrainLog, TrainError> {
    config.validate()?;
    let mut adam = Adam::new(config.optimizer, params.len());
    let mut log = TrainLog::default();
    let mut shuffle_rng = rng::stream_rng(rng::mix(root_seed, 0xB47C), 0);
    let mut tail_sum = vec![0.0; params.len()];
    let mut tail_count = 0usize;

    for iteration in 0..config.iterations {
        let pool_tag = match config.scenario_sampling {
            ScenarioSampling::Resample => iteration as u64,
            ScenarioSampling::FixedPool => 0,
        };
        // Roll out every scenario in parallel; join preserves index order.
        let per_scenario: Vec<(Vec<DatasetItem>, f64, f64)> = (0..config.scenarios_per_iter)
            .into_par_iter()
            .map(|i| {
                let scenario_seed = rng::mix(rng::mix(root_seed, pool_tag), i as u64);
                let scenario = Scenario::sample(
                    config.env_kind,
                    config.d,
                    config.policy_space(),
                    config.horizon,
                    config.process_kind,
                    scenario_seed,
                )
                .expect("valid training configuration");
                let prepared = scenario.prepare();
                let records: Vec<TrajectoryRecord> = (0..config.rollouts_per_scenario)
                    .map(|l| {
                        let mut noise =
                            rng::stream_rng(scenario_seed, stream::PERTURB + l as u64);
                        rollout(
                            &prepared,
                            params,
                            config.operator,
                            config.sigma,
                            config.perturbation,
                            config.bandit_regret,
                            &mut noise,
                        )
                    })
                    .collect();
                let selected = select_topk(&records, config.top_k).expect("validated top-k");
                let mean_all =
                    records.iter().map(|r| r.regret).sum::<f64>() / records.len() as f64;
                let mean_sel =
                    selected.iter().map(|i| records[*i].regret).sum::<f64>() / selected.len() as f64;
                let items = selected.iter().map(|i| DatasetItem::from_record(&records[*i])).collect();
                (items, mean_sel, mean_all)
            })
            .collect();

        let mut dataset = Vec::with_capacity(config.scenarios_per_iter * config.top_k);
        let mut sel_sum = 0.0;
        let mut all_sum = 0.0;
        for (items, sel, all) in per_scenario {
            dataset.extend(items);
            sel_sum += sel;
            all_sum += all;
        }
        let loss = sft_update(params, &mut adam, &dataset, config, &mut shuffle_rng)?;

        if config.tail_average > 0 && iteration + config.tail_average >= config.iterations {
            for (s, p) in tail_sum.iter_mut().zip(params.as_flat()) {
                *s += p;
            }
            tail_count += 1;
        }

        let mut entry = TrainLogEntry {
            iteration,
            loss,
            diagnostics: params.diagnostics(config.operator),
            mean_selected_regret: sel_sum / config.scenarios_per_iter as f64,
            mean_rollout_regret: all_sum / config.scenarios_per_iter as f64,
            checkpoint: None,
        };
        let due = config.checkpoint_interval > 0
            && (iteration + 1) % config.checkpoint_interval == 0;
        if let Some(obs) = observer.as_deref_mut() {
            if due || iteration + 1 == config.iterations {
                entry.checkpoint = obs(&entry, params).map_err(TrainError::Sink)?;
            } else {
                obs(&entry, params).map_err(TrainError::Sink)?;
            }
        }
        log.entries.push(entry);
    }
    if tail_count > 0 {
        for (p, s) in params.as_flat_mut().iter_mut().zip(&tail_sum) {
            *p = s / tail_count as f64;
        }
    }
    Ok(log)
}
