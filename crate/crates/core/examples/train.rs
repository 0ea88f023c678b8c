//! Trains the semantic learner on a small scenario, checkpoints it, resumes
//! and runs one greedy episode.

use semcov::env::{semantic_objective, ScenarioConfig};
use semcov::harness::build_scenario;
use semcov::marl::{Phase, Trainer, TrainingConfig};

fn main() -> semcov::Result<()> {
    let config = ScenarioConfig {
        num_uavs: 2,
        num_bs: 1,
        num_channels: 2,
        steps_per_episode: 10,
        image: "synthetic:clouds".into(),
        ..Default::default()
    };
    let scenario = build_scenario(&config, std::path::Path::new("."))?;
    let training = TrainingConfig {
        recurrent_units: 16,
        dense_widths: vec![32, 16],
        batch_size: 16,
        ..Default::default()
    };
    let mut trainer = Trainer::new(scenario.clone(), Default::default(), training, 7)?;
    for _ in 0..30 {
        let m = trainer.train_episode()?;
        if m.episode % 10 == 9 {
            println!(
                "episode {:>3} eps {:.3} objective {:.4} loss {:?}",
                m.episode, m.epsilon, m.objective, m.mean_loss
            );
        }
    }

    let dir = std::env::temp_dir().join("semcov-train-example");
    trainer.save(&dir)?;
    let resumed = Trainer::resume(&dir, scenario)?;
    let test = resumed.test_episode(resumed.episodes_done())?;
    assert_eq!(test.phase, Phase::Test);
    println!(
        "resumed after {} episodes; greedy objective {:.4}",
        resumed.episodes_done(),
        test.objective
    );

    let mut env = resumed.env()?;
    let trace = resumed.policy().rollout(&mut env)?;
    println!("rollout objective {:.4}", semantic_objective(&trace)?);
    Ok(())
}
