//! HU heuristic, a random policy and the exhaustive oracle on one scenario.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use semcov::baselines::oracle_episode;
use semcov::env::{Env, EnvOptions, ScenarioConfig};
use semcov::harness::build_scenario;
use semcov::policy::{episode_objectives, HuPolicy, RandomPolicy, ZeroPolicy};
use semcov::validation::oracle_gap;

fn main() -> semcov::Result<()> {
    let config = ScenarioConfig {
        num_uavs: 3,
        num_bs: 2,
        num_channels: 2,
        steps_per_episode: 10,
        image: "synthetic:clouds".into(),
        seed: 3,
        ..Default::default()
    };
    let scenario = build_scenario(&config, std::path::Path::new("."))?;
    let mut env = Env::new(scenario, EnvOptions::default())?;

    let oracle = oracle_episode(&mut env)?;
    let best = oracle.iter().map(|s| s.objective).sum::<f64>() / oracle.len() as f64;
    println!("oracle   objective {best:.4}");

    let hu = episode_objectives(&mut HuPolicy, &mut env, 1)?[0];
    println!(
        "HU       objective {hu:.4}  oracle gap {:.3}",
        oracle_gap(&mut HuPolicy, &mut env, 1)?
    );
    let mut random = RandomPolicy(ChaCha8Rng::seed_from_u64(0));
    println!(
        "random   oracle gap {:.3}",
        oracle_gap(&mut random, &mut env, 3)?
    );
    println!(
        "silent   oracle gap {:.3}",
        oracle_gap(&mut ZeroPolicy, &mut env, 1)?
    );
    Ok(())
}
