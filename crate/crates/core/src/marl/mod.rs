//! Multi-agent double/dueling deep Q-learning with a value-decomposition
//! (VDN) sum over agents.
//!
//! Each UAV owns an independent [`Network`]. Agents act on their own
//! observation windows, share one reward, and are trained jointly on the
//! squared error between the summed chosen-action Q-values and a double-Q
//! target.

mod checkpoint;

use std::collections::VecDeque;
use std::path::Path;
use std::sync::Arc;

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{scenario_hash, CHECKPOINT_VERSION};

use crate::approximator::{adam_step, argmax, AdamState, Network, NetworkSpec, ParamVector};
use crate::env::{Env, EnvOptions, Observation, Scenario, StepResult};
use crate::rng::{substream, Stream};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub gamma: f64,
    pub batch_size: usize,
    pub memory_capacity: usize,
    /// Training steps between target-network syncs.
    pub target_sync: usize,
    pub learning_rate: f64,
    pub epsilon_start: f64,
    pub epsilon_floor: f64,
    pub epsilon_decay: f64,
    pub train_episodes: usize,
    pub test_episodes: usize,
    pub recurrent_units: usize,
    pub dense_widths: Vec<usize>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            gamma: 0.8,
            batch_size: 64,
            memory_capacity: 1000,
            target_sync: 20,
            learning_rate: 1e-3,
            epsilon_start: 1.0,
            epsilon_floor: 0.001,
            epsilon_decay: 0.9995,
            train_episodes: 400,
            test_episodes: 40,
            recurrent_units: 64,
            dense_widths: vec![128, 64],
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1)");
        }
        if self.batch_size == 0 || self.batch_size > self.memory_capacity {
            return bad("batch_size must be in 1..=memory_capacity");
        }
        if self.target_sync == 0 {
            return bad("target_sync must be >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..=1.0).contains(&self.epsilon_floor)
            || !(self.epsilon_floor..=1.0).contains(&self.epsilon_start)
            || !(0.0..=1.0).contains(&self.epsilon_decay)
        {
            return bad("need 0 <= epsilon_floor <= epsilon_start <= 1 and decay in [0, 1]");
        }
        Ok(())
    }

    pub fn network_spec(&self, input_width: usize, num_actions: usize) -> NetworkSpec {
        NetworkSpec {
            input_width,
            recurrent_units: self.recurrent_units,
            dense_widths: self.dense_widths.clone(),
            num_actions,
        }
    }
}

/// One joint step: per-agent windows and actions plus the shared reward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub observations: Vec<Observation>,
    pub actions: Vec<usize>,
    pub next_observations: Vec<Observation>,
    pub reward: f64,
}

/// Bounded FIFO of transitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayMemory {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayMemory {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity),
        }
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// Uniform sample of `n` distinct transitions, in draw order.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<&Transition> {
        assert!(n <= self.items.len(), "sample larger than memory");
        index::sample(rng, self.items.len(), n)
            .into_iter()
            .map(|k| &self.items[k])
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub value: f64,
    pub floor: f64,
    pub decay: f64,
}

impl EpsilonSchedule {
    pub fn from_config(c: &TrainingConfig) -> Self {
        Self {
            value: c.epsilon_start,
            floor: c.epsilon_floor,
            decay: c.epsilon_decay,
        }
    }

    pub fn step(&mut self) {
        self.value = (self.value * self.decay).max(self.floor);
    }

    /// Value after `k` decays from 1.
    pub fn closed_form(decay: f64, floor: f64, k: u64) -> f64 {
        decay.powf(k as f64).max(floor)
    }
}

/// Epsilon-greedy choice. One uniform draw decides exploration; a second
/// picks the random action. Greedy ties go to the lowest index.
pub fn select_action<R: Rng + ?Sized>(
    net: &Network,
    obs: &Observation,
    epsilon: f64,
    rng: &mut R,
) -> Result<usize> {
    let zeta: f64 = rng.gen();
    if zeta < epsilon {
        return Ok(rng.gen_range(0..net.spec().num_actions));
    }
    Ok(argmax(&net.forward(obs)?))
}

pub fn greedy_action(net: &Network, obs: &Observation) -> Result<usize> {
    Ok(argmax(&net.forward(obs)?))
}

pub fn vdn_total(q_chosen: &[f64]) -> f64 {
    q_chosen.iter().sum()
}

/// `Y = R + gamma * sum_i Q_i^target(s_i', argmax_a Q_i^online(s_i', a))`.
pub fn d3ql_target(
    batch: &[&Transition],
    online: &[Network],
    target: &[Network],
    gamma: f64,
) -> Result<Vec<f64>> {
    batch
        .iter()
        .map(|t| {
            let mut next = Vec::with_capacity(online.len());
            for (i, (on, tg)) in online.iter().zip(target).enumerate() {
                let s = &t.next_observations[i];
                let a = argmax(&on.forward(s)?);
                next.push(tg.forward(s)?[a]);
            }
            Ok(t.reward + gamma * vdn_total(&next))
        })
        .collect()
}

/// Mean squared TD error and its gradient for every agent, with `targets`
/// held constant.
pub fn loss_gradients(
    batch: &[&Transition],
    online: &[Network],
    targets: &[f64],
) -> Result<(f64, Vec<ParamVector>)> {
    if batch.is_empty() {
        return Err(Error::Config("empty training batch".into()));
    }
    let m = batch.len() as f64;
    let mut grads: Vec<ParamVector> = online
        .iter()
        .map(|n| ParamVector::zeros(n.num_params()))
        .collect();
    let mut loss = 0.0;
    for (t, &y) in batch.iter().zip(targets) {
        let traces = online
            .iter()
            .zip(&t.observations)
            .map(|(n, s)| n.forward_trace(s))
            .collect::<Result<Vec<_>>>()?;
        let chosen: Vec<f64> = traces
            .iter()
            .zip(&t.actions)
            .map(|(tr, &a)| tr.q[a])
            .collect();
        let residual = vdn_total(&chosen) - y;
        loss += residual * residual;
        let scale = 2.0 * residual / m;
        for (i, tr) in traces.iter().enumerate() {
            let mut dq = vec![0.0; online[i].spec().num_actions];
            dq[t.actions[i]] = scale;
            online[i].backward(tr, &dq, grads[i].as_mut_slice());
        }
    }
    Ok((loss / m, grads))
}

/// One optimizer step on every agent. Returns the batch loss.
pub fn train_step(
    batch: &[&Transition],
    online: &mut [Network],
    target: &[Network],
    adam: &mut [AdamState],
    gamma: f64,
    lr: f64,
) -> Result<f64> {
    let y = d3ql_target(batch, online, target, gamma)?;
    let (loss, grads) = loss_gradients(batch, online, &y)?;
    for ((net, g), st) in online.iter_mut().zip(&grads).zip(adam.iter_mut()) {
        adam_step(net.params_mut().as_mut_slice(), g.as_slice(), st, lr);
    }
    Ok(loss)
}

/// Frozen per-agent networks acting greedily.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedyPolicy {
    pub nets: Vec<Network>,
}

impl GreedyPolicy {
    pub fn act(&self, observations: &[Observation]) -> Result<Vec<usize>> {
        self.nets
            .iter()
            .zip(observations)
            .map(|(n, o)| greedy_action(n, o))
            .collect()
    }

    /// One greedy episode from reset.
    pub fn rollout(&self, env: &mut Env) -> Result<Vec<StepResult>> {
        let mut obs = env.reset()?;
        let mut trace = Vec::new();
        while !env.is_done() {
            let joint = self.act(&obs)?;
            let step = env.step(&joint)?;
            obs = step.observations.clone();
            trace.push(step);
        }
        Ok(trace)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Train,
    Test,
}

/// Per-episode summary, one CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub phase: Phase,
    pub epsilon: f64,
    /// Mean per-slot training reward.
    pub mean_reward: f64,
    /// Mean per-slot semantic objective under the evaluation model.
    pub objective: f64,
    pub mean_loss: Option<f64>,
    pub train_steps: u64,
}

pub fn write_metrics_csv(path: &Path, rows: &[EpisodeMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Complete learner state. Everything needed to continue training lives
/// here, which is what makes checkpoints resume bit-exactly.
#[derive(Debug, Clone)]
pub struct Trainer {
    scenario: Arc<Scenario>,
    options: EnvOptions,
    config: TrainingConfig,
    seed: u64,
    online: Vec<Network>,
    target: Vec<Network>,
    adam: Vec<AdamState>,
    memory: ReplayMemory,
    epsilon: EpsilonSchedule,
    explore: Vec<ChaCha8Rng>,
    replay_rng: ChaCha8Rng,
    episodes_done: usize,
    env_steps: u64,
    train_steps: u64,
}

impl Trainer {
    pub fn new(
        scenario: Arc<Scenario>,
        options: EnvOptions,
        config: TrainingConfig,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let n = scenario.num_uavs();
        let spec = config.network_spec(
            scenario.frame_width(options.coverage_feature),
            scenario.num_actions(),
        );
        let online = (0..n)
            .map(|i| Network::init(spec.clone(), &mut substream(seed, Stream::Init, i as u64)))
            .collect::<Result<Vec<_>>>()?;
        let target = online.clone();
        let adam = online
            .iter()
            .map(|net| AdamState::new(net.num_params()))
            .collect();
        Ok(Self {
            memory: ReplayMemory::new(config.memory_capacity),
            epsilon: EpsilonSchedule::from_config(&config),
            explore: (0..n)
                .map(|i| substream(seed, Stream::Exploration, i as u64))
                .collect(),
            replay_rng: substream(seed, Stream::Replay, 0),
            scenario,
            options,
            config,
            seed,
            online,
            target,
            adam,
            episodes_done: 0,
            env_steps: 0,
            train_steps: 0,
        })
    }

    pub fn scenario(&self) -> &Arc<Scenario> {
        &self.scenario
    }

    pub fn options(&self) -> &EnvOptions {
        &self.options
    }

    pub fn config(&self) -> &TrainingConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn online(&self) -> &[Network] {
        &self.online
    }

    pub fn target(&self) -> &[Network] {
        &self.target
    }

    pub fn memory(&self) -> &ReplayMemory {
        &self.memory
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon.value
    }

    pub fn episodes_done(&self) -> usize {
        self.episodes_done
    }

    pub fn env_steps(&self) -> u64 {
        self.env_steps
    }

    pub fn train_steps(&self) -> u64 {
        self.train_steps
    }

    pub fn policy(&self) -> GreedyPolicy {
        GreedyPolicy {
            nets: self.online.clone(),
        }
    }

    pub fn env(&self) -> Result<Env> {
        Env::new(Arc::clone(&self.scenario), self.options)
    }

    /// One exploring episode with learning after every step.
    pub fn train_episode(&mut self) -> Result<EpisodeMetrics> {
        let mut env = self.env()?;
        let mut obs = env.reset()?;
        let (mut reward, mut objective, mut slots) = (0.0, 0.0, 0usize);
        let (mut loss_sum, mut losses) = (0.0, 0usize);
        while !env.is_done() {
            let eps = self.epsilon.value;
            let joint = self
                .online
                .iter()
                .zip(&obs)
                .zip(&mut self.explore)
                .map(|((net, o), rng)| select_action(net, o, eps, rng))
                .collect::<Result<Vec<_>>>()?;
            let step = env.step(&joint)?;
            self.env_steps += 1;
            reward += step.reward;
            objective += step.objective;
            slots += 1;
            self.memory.push(Transition {
                observations: std::mem::take(&mut obs),
                actions: joint,
                next_observations: step.observations.clone(),
                reward: step.reward,
            });
            obs = step.observations;

            if self.memory.len() >= self.config.batch_size {
                let batch = self
                    .memory
                    .sample(self.config.batch_size, &mut self.replay_rng);
                loss_sum += train_step(
                    &batch,
                    &mut self.online,
                    &self.target,
                    &mut self.adam,
                    self.config.gamma,
                    self.config.learning_rate,
                )?;
                losses += 1;
                self.train_steps += 1;
                if self.train_steps % self.config.target_sync as u64 == 0 {
                    self.target.clone_from(&self.online);
                }
            }
            self.epsilon.step();
        }
        let m = EpisodeMetrics {
            episode: self.episodes_done,
            phase: Phase::Train,
            epsilon: self.epsilon.value,
            mean_reward: reward / slots as f64,
            objective: objective / slots as f64,
            mean_loss: (losses > 0).then(|| loss_sum / losses as f64),
            train_steps: self.train_steps,
        };
        self.episodes_done += 1;
        Ok(m)
    }

    /// One greedy episode without learning; `episode` labels the row.
    pub fn test_episode(&self, episode: usize) -> Result<EpisodeMetrics> {
        let mut env = self.env()?;
        let trace = self.policy().rollout(&mut env)?;
        let n = trace.len() as f64;
        Ok(EpisodeMetrics {
            episode,
            phase: Phase::Test,
            epsilon: 0.0,
            mean_reward: trace.iter().map(|s| s.reward).sum::<f64>() / n,
            objective: trace.iter().map(|s| s.objective).sum::<f64>() / n,
            mean_loss: None,
            train_steps: self.train_steps,
        })
    }
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub policy: GreedyPolicy,
    pub metrics: Vec<EpisodeMetrics>,
}

impl TrainingOutcome {
    /// Mean test-phase objective.
    pub fn test_objective(&self) -> Option<f64> {
        mean(
            self.metrics
                .iter()
                .filter(|m| m.phase == Phase::Test)
                .map(|m| m.objective),
        )
    }

    /// Mean test-phase training reward.
    pub fn test_reward(&self) -> Option<f64> {
        mean(
            self.metrics
                .iter()
                .filter(|m| m.phase == Phase::Test)
                .map(|m| m.mean_reward),
        )
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

/// Train for `config.train_episodes`, then run `config.test_episodes` greedy
/// episodes.
pub fn run_training(
    scenario: Arc<Scenario>,
    options: EnvOptions,
    config: TrainingConfig,
    seed: u64,
) -> Result<TrainingOutcome> {
    let mut trainer = Trainer::new(scenario, options, config, seed)?;
    let mut metrics = Vec::new();
    for _ in 0..trainer.config.train_episodes {
        metrics.push(trainer.train_episode()?);
    }
    let start = trainer.episodes_done;
    for k in 0..trainer.config.test_episodes {
        metrics.push(trainer.test_episode(start + k)?);
    }
    Ok(TrainingOutcome {
        policy: trainer.policy(),
        metrics,
    })
}

#[cfg(test)]
mod tests;
