//! A common interface over learned and reference policies.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::baselines::{hu_joint, oracle_allocate};
use crate::env::{Env, Observation, StepResult};
use crate::marl::GreedyPolicy;
use crate::Result;

pub trait Policy {
    /// Joint action for the env's current slot.
    fn act(&mut self, env: &Env, observations: &[Observation]) -> Result<Vec<usize>>;
}

impl Policy for GreedyPolicy {
    fn act(&mut self, _env: &Env, observations: &[Observation]) -> Result<Vec<usize>> {
        GreedyPolicy::act(self, observations)
    }
}

/// Greedy highest-gain heuristic.
#[derive(Debug, Clone, Copy, Default)]
pub struct HuPolicy;

impl Policy for HuPolicy {
    fn act(&mut self, env: &Env, _: &[Observation]) -> Result<Vec<usize>> {
        hu_joint(env.scenario(), env.context())
    }
}

/// Exhaustive per-slot search.
#[derive(Debug, Clone, Copy, Default)]
pub struct OraclePolicy;

impl Policy for OraclePolicy {
    fn act(&mut self, env: &Env, _: &[Observation]) -> Result<Vec<usize>> {
        Ok(oracle_allocate(env)?.joint)
    }
}

/// Every UAV silent.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroPolicy;

impl Policy for ZeroPolicy {
    fn act(&mut self, env: &Env, _: &[Observation]) -> Result<Vec<usize>> {
        let zero = env
            .scenario()
            .actions
            .iter()
            .position(|a| a.iter().all(|&p| p == 0.0))
            .unwrap_or(0);
        Ok(vec![zero; env.scenario().num_uavs()])
    }
}

/// Uniform random actions.
#[derive(Debug, Clone)]
pub struct RandomPolicy(pub ChaCha8Rng);

impl Policy for RandomPolicy {
    fn act(&mut self, env: &Env, _: &[Observation]) -> Result<Vec<usize>> {
        let a = env.scenario().num_actions();
        Ok((0..env.scenario().num_uavs())
            .map(|_| self.0.gen_range(0..a))
            .collect())
    }
}

/// One episode from reset.
pub fn rollout<P: Policy + ?Sized>(policy: &mut P, env: &mut Env) -> Result<Vec<StepResult>> {
    let mut obs = env.reset()?;
    let mut trace = Vec::new();
    while !env.is_done() {
        let joint = policy.act(env, &obs)?;
        let step = env.step(&joint)?;
        obs = step.observations.clone();
        trace.push(step);
    }
    Ok(trace)
}

/// Mean objective of each of `episodes` episodes.
pub fn episode_objectives<P: Policy + ?Sized>(
    policy: &mut P,
    env: &mut Env,
    episodes: usize,
) -> Result<Vec<f64>> {
    (0..episodes)
        .map(|_| crate::env::semantic_objective(&rollout(policy, env)?))
        .collect()
}
