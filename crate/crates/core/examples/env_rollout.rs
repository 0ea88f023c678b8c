//! Steps the environment by hand with a random policy, then compares HU.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use semcov::env::{semantic_objective, Env, EnvOptions, Scenario, ScenarioConfig};
use semcov::harness::synthetic;
use semcov::policy::{rollout, HuPolicy, Policy, RandomPolicy};

fn main() -> semcov::Result<()> {
    let config = ScenarioConfig {
        num_uavs: 4,
        steps_per_episode: 10,
        image: "synthetic:clouds".into(),
        ..Default::default()
    };
    let scenario = Arc::new(Scenario::new(config, &synthetic("clouds").unwrap())?);
    println!(
        "{} actions per UAV, sides {:?}",
        scenario.num_actions(),
        scenario.sides
    );

    let mut env = Env::new(scenario, EnvOptions::default())?;
    let mut random = RandomPolicy(ChaCha8Rng::seed_from_u64(1));
    let mut obs = env.reset()?;
    println!(
        "observation: {} frames of width {}",
        obs[0].history(),
        obs[0].width()
    );
    while !env.is_done() {
        let joint = random.act(&env, &obs)?;
        let step = env.step(&joint)?;
        println!(
            "slot {:>2} actions {joint:?} objective {:.4}",
            env.slot(),
            step.objective
        );
        obs = step.observations;
    }

    let hu = semantic_objective(&rollout(&mut HuPolicy, &mut env)?)?;
    println!("HU episode objective {hu:.4}");
    Ok(())
}
