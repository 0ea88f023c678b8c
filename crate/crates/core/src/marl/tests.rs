use super::*;
use crate::approximator::ParamGroup;
use crate::env::ScenarioConfig;
use crate::semantics::{QualityMetric, QualityModel, DEFAULT_THRESHOLDS};

fn ladder() -> QualityModel {
    let q = (1..=8).map(|b| b as f64 / 8.0).collect();
    QualityModel::from_parts(QualityMetric::Psnr, DEFAULT_THRESHOLDS.to_vec(), q, 50.0).unwrap()
}

fn small_scenario(seed: u64) -> Arc<Scenario> {
    let config = ScenarioConfig {
        num_uavs: 2,
        num_bs: 1,
        num_channels: 1,
        steps_per_episode: 5,
        history: 2,
        seed,
        ..Default::default()
    };
    Arc::new(Scenario::with_models(config, ladder(), ladder()).unwrap())
}

fn small_config() -> TrainingConfig {
    TrainingConfig {
        batch_size: 4,
        memory_capacity: 50,
        target_sync: 5,
        recurrent_units: 4,
        dense_widths: vec![6, 5],
        train_episodes: 4,
        test_episodes: 2,
        ..Default::default()
    }
}

fn tiny_spec(actions: usize) -> NetworkSpec {
    NetworkSpec {
        input_width: 2,
        recurrent_units: 3,
        dense_widths: vec![4],
        num_actions: actions,
    }
}

/// Network whose Q-values are `v + a - mean(a)` for every input.
fn constant_net(v: f64, adv: &[f64]) -> Network {
    let mut net = Network::zeros(tiny_spec(adv.len())).unwrap();
    let value = net.group_ranges(ParamGroup::Value)[0].clone();
    let advantage = net.group_ranges(ParamGroup::Advantage)[0].clone();
    let p = net.params_mut().as_mut_slice();
    p[value.end - 1] = v;
    p[advantage.end - adv.len()..advantage.end].copy_from_slice(adv);
    net
}

fn random_obs(width: usize, history: usize, rng: &mut impl Rng) -> Observation {
    Observation::new(width, (0..width * history).map(|_| rng.gen()).collect()).unwrap()
}

fn transition(agents: usize, actions: &[usize], reward: f64, rng: &mut impl Rng) -> Transition {
    Transition {
        observations: (0..agents).map(|_| random_obs(2, 3, rng)).collect(),
        actions: actions.to_vec(),
        next_observations: (0..agents).map(|_| random_obs(2, 3, rng)).collect(),
        reward,
    }
}

#[test]
fn vdn_examples() {
    assert_eq!(vdn_total(&[1.0, 2.5]), 3.5);
    assert_eq!(vdn_total(&[0.0, 0.0, 0.0]), 0.0);
    assert_eq!(vdn_total(&[-0.3]), -0.3);
}

#[test]
fn worked_double_q_target() {
    let online = constant_net(3.0, &[-2.0, 2.0]);
    let target = constant_net(6.0, &[4.0, -4.0]);
    let mut rng = substream(0, Stream::Evaluation, 0);
    let t = transition(1, &[0], 1.0, &mut rng);
    assert_eq!(
        online.forward(&t.next_observations[0]).unwrap(),
        vec![1.0, 5.0]
    );
    assert_eq!(
        target.forward(&t.next_observations[0]).unwrap(),
        vec![10.0, 2.0]
    );
    let y = d3ql_target(&[&t], &[online], &[target], 0.8).unwrap();
    assert!((y[0] - 2.6).abs() < 1e-15);
}

#[test]
fn degenerate_targets_equal_reward() {
    let mut rng = substream(1, Stream::Evaluation, 0);
    let nets: Vec<Network> = (0..2)
        .map(|i| Network::init(tiny_spec(3), &mut substream(1, Stream::Init, i)).unwrap())
        .collect();
    let zeros = vec![Network::zeros(tiny_spec(3)).unwrap(); 2];
    let t = transition(2, &[0, 2], 0.37, &mut rng);
    assert_eq!(d3ql_target(&[&t], &nets, &nets, 0.0).unwrap(), vec![0.37]);
    assert_eq!(d3ql_target(&[&t], &nets, &zeros, 0.8).unwrap(), vec![0.37]);
}

#[test]
fn greedy_and_ties() {
    let net = constant_net(0.0, &[1.0, 3.0, 3.0]);
    let obs = Observation::zeros(2, 3);
    let mut rng = substream(2, Stream::Exploration, 0);
    for _ in 0..50 {
        assert_eq!(select_action(&net, &obs, 0.0, &mut rng).unwrap(), 1);
    }
}

#[test]
fn full_exploration_is_uniform() {
    let net = constant_net(0.0, &[0.0, 9.0, 0.0, 0.0]);
    let obs = Observation::zeros(2, 3);
    let mut rng = substream(3, Stream::Exploration, 0);
    let draws = 10_000;
    let mut counts = [0usize; 4];
    for _ in 0..draws {
        counts[select_action(&net, &obs, 1.0, &mut rng).unwrap()] += 1;
    }
    let expected = draws as f64 / 4.0;
    let chi2: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    // 99.9th percentile of chi-square with 3 degrees of freedom.
    assert!(chi2 < 16.266, "{counts:?} chi2 = {chi2}");
}

#[test]
fn replay_is_fifo() {
    let mut rng = substream(4, Stream::Evaluation, 0);
    let mut mem = ReplayMemory::new(10);
    for k in 0..13 {
        mem.push(transition(1, &[0], k as f64, &mut rng));
    }
    assert_eq!(mem.len(), 10);
    let rewards: Vec<f64> = mem.iter().map(|t| t.reward).collect();
    assert_eq!(rewards, (3..13).map(|k| k as f64).collect::<Vec<_>>());
}

#[test]
fn replay_sample_is_distinct() {
    let mut rng = substream(5, Stream::Evaluation, 0);
    let mut mem = ReplayMemory::new(20);
    for k in 0..20 {
        mem.push(transition(1, &[0], k as f64, &mut rng));
    }
    let mut seen: Vec<f64> = mem.sample(20, &mut rng).iter().map(|t| t.reward).collect();
    seen.sort_by(f64::total_cmp);
    assert_eq!(seen, (0..20).map(|k| k as f64).collect::<Vec<_>>());
}

#[test]
fn epsilon_schedule_closed_form() {
    let mut e = EpsilonSchedule::from_config(&TrainingConfig::default());
    let mut prev = e.value;
    for k in 1..=20_000u64 {
        e.step();
        assert!(e.value <= prev && e.value >= 0.001);
        prev = e.value;
        if k % 1000 == 0 {
            let want = EpsilonSchedule::closed_form(0.9995, 0.001, k);
            assert!((e.value - want).abs() <= 1e-9 * want, "k={k}");
        }
    }
    assert_eq!(e.value, 0.001);
}

#[test]
fn zero_residual_leaves_params() {
    let mut rng = substream(6, Stream::Evaluation, 0);
    let mut nets: Vec<Network> = (0..2)
        .map(|i| Network::init(tiny_spec(3), &mut substream(6, Stream::Init, i)).unwrap())
        .collect();
    let ts: Vec<Transition> = (0..4)
        .map(|_| transition(2, &[1, 2], 0.0, &mut rng))
        .collect();
    let batch: Vec<&Transition> = ts.iter().collect();
    let y: Vec<f64> = batch
        .iter()
        .map(|t| {
            let q: Vec<f64> = (0..2)
                .map(|i| nets[i].forward(&t.observations[i]).unwrap()[t.actions[i]])
                .collect();
            vdn_total(&q)
        })
        .collect();
    let (loss, grads) = loss_gradients(&batch, &nets, &y).unwrap();
    assert_eq!(loss, 0.0);
    let before = nets.clone();
    for (net, g) in nets.iter_mut().zip(&grads) {
        assert!(g.as_slice().iter().all(|&x| x == 0.0));
        let mut st = AdamState::new(net.num_params());
        adam_step(net.params_mut().as_mut_slice(), g.as_slice(), &mut st, 1e-3);
    }
    assert_eq!(nets, before);
}

#[test]
fn single_sample_gradient_is_scaled_q_gradient() {
    let mut rng = substream(7, Stream::Evaluation, 0);
    let net = Network::init(tiny_spec(3), &mut substream(7, Stream::Init, 0)).unwrap();
    let t = transition(1, &[2], 0.0, &mut rng);
    let q = net.forward(&t.observations[0]).unwrap()[2];
    let y = q + 0.75;
    let (loss, grads) = loss_gradients(&[&t], std::slice::from_ref(&net), &[y]).unwrap();
    assert!((loss - 0.5625).abs() < 1e-12);
    let dq = net.gradient(&t.observations[0], &[0.0, 0.0, 1.0]).unwrap();
    for (g, d) in grads[0].as_slice().iter().zip(dq.as_slice()) {
        assert!((g - 2.0 * (q - y) * d).abs() <= 1e-12 * (1.0 + d.abs()));
    }
}

#[test]
fn gradient_is_local_to_each_agent() {
    let mut rng = substream(8, Stream::Evaluation, 0);
    let nets: Vec<Network> = (0..2)
        .map(|i| Network::init(tiny_spec(3), &mut substream(8, Stream::Init, i)).unwrap())
        .collect();
    let t = transition(2, &[0, 1], 0.2, &mut rng);
    let (_, base) = loss_gradients(&[&t], &nets, &[0.9]).unwrap();

    // Blank agent 1's fields and shift the target so the shared residual
    // is unchanged.
    let mut blanked = t.clone();
    blanked.observations[1] = Observation::zeros(2, 3);
    blanked.next_observations[1] = Observation::zeros(2, 3);
    blanked.actions[1] = 2;
    let q_old = nets[1].forward(&t.observations[1]).unwrap()[1];
    let q_new = nets[1].forward(&blanked.observations[1]).unwrap()[2];
    let (_, moved) = loss_gradients(&[&blanked], &nets, &[0.9 + (q_new - q_old)]).unwrap();
    for (a, b) in base[0].as_slice().iter().zip(moved[0].as_slice()) {
        assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }
}

#[test]
fn loss_is_nonnegative() {
    let mut rng = substream(9, Stream::Evaluation, 0);
    let nets = vec![Network::init(tiny_spec(2), &mut substream(9, Stream::Init, 0)).unwrap()];
    for _ in 0..20 {
        let t = transition(1, &[1], rng.gen_range(-5.0..5.0), &mut rng);
        let (loss, _) = loss_gradients(&[&t], &nets, &[rng.gen_range(-5.0..5.0)]).unwrap();
        assert!(loss >= 0.0);
    }
}

#[test]
fn warm_up_does_not_train() {
    let config = TrainingConfig {
        batch_size: 8,
        ..small_config()
    };
    let mut tr = Trainer::new(small_scenario(1), EnvOptions::default(), config, 1).unwrap();
    let before = tr.online().to_vec();
    let m = tr.train_episode().unwrap();
    assert_eq!(tr.memory().len(), 5);
    assert_eq!(m.mean_loss, None);
    assert_eq!(tr.online(), &before[..]);
    tr.train_episode().unwrap();
    assert_ne!(tr.online(), &before[..]);
}

#[test]
fn targets_stay_frozen_between_syncs() {
    // One training step per slot, five slots per episode: a sync of 10 lands
    // on every second episode boundary.
    let config = TrainingConfig {
        batch_size: 1,
        target_sync: 10,
        ..small_config()
    };
    let mut tr = Trainer::new(small_scenario(2), EnvOptions::default(), config, 2).unwrap();
    let mut last_sync = tr.online().to_vec();
    for e in 0..6 {
        tr.train_episode().unwrap();
        assert_eq!(tr.train_steps(), 5 * (e + 1));
        if tr.train_steps() % 10 == 0 {
            assert_eq!(tr.target(), tr.online());
            last_sync = tr.online().to_vec();
        } else {
            assert_eq!(tr.target(), &last_sync[..]);
            assert_ne!(tr.target(), tr.online());
        }
    }
}

#[test]
fn epsilon_decays_once_per_slot() {
    let mut tr = Trainer::new(small_scenario(3), EnvOptions::default(), small_config(), 3).unwrap();
    tr.train_episode().unwrap();
    tr.train_episode().unwrap();
    assert_eq!(tr.env_steps(), 10);
    let want = EpsilonSchedule::closed_form(0.9995, 0.001, 10);
    assert!((tr.epsilon() - want).abs() < 1e-15);
}

#[test]
fn training_is_deterministic() {
    let run = |seed| {
        run_training(
            small_scenario(4),
            EnvOptions::default(),
            small_config(),
            seed,
        )
        .unwrap()
    };
    let (a, b, c) = (run(4), run(4), run(5));
    assert_eq!(a.metrics, b.metrics);
    assert_eq!(a.policy, b.policy);
    assert_ne!(a.policy, c.policy);
    assert_eq!(
        a.metrics.iter().filter(|m| m.phase == Phase::Test).count(),
        2
    );
    assert!(a.test_objective().is_some());
}

#[test]
fn metrics_csv_layout() {
    let out = run_training(small_scenario(4), EnvOptions::default(), small_config(), 4).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("metrics.csv");
    write_metrics_csv(&path, &out.metrics).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "episode,phase,epsilon,mean_reward,objective,mean_loss,train_steps"
    );
    assert_eq!(lines.count(), 6);
}

#[test]
fn checkpoint_resume_is_bit_exact() {
    let scenario = small_scenario(6);
    let mut straight = Trainer::new(
        Arc::clone(&scenario),
        EnvOptions::default(),
        small_config(),
        6,
    )
    .unwrap();
    let mut first = straight.clone();
    let mut rows_a = Vec::new();
    for _ in 0..4 {
        rows_a.push(straight.train_episode().unwrap());
    }

    let mut rows_b = Vec::new();
    for _ in 0..2 {
        rows_b.push(first.train_episode().unwrap());
    }
    let dir = tempfile::tempdir().unwrap();
    first.save(dir.path()).unwrap();
    drop(first);
    let mut resumed = Trainer::resume(dir.path(), scenario).unwrap();
    for _ in 0..2 {
        rows_b.push(resumed.train_episode().unwrap());
    }
    assert_eq!(rows_a, rows_b);
    assert_eq!(straight.online(), resumed.online());
    assert_eq!(straight.target(), resumed.target());
    assert_eq!(straight.memory(), resumed.memory());
}

#[test]
fn checkpoint_rejects_other_scenario() {
    let tr = Trainer::new(small_scenario(7), EnvOptions::default(), small_config(), 7).unwrap();
    let dir = tempfile::tempdir().unwrap();
    tr.save(dir.path()).unwrap();
    let err = Trainer::resume(dir.path(), small_scenario(8)).unwrap_err();
    assert!(matches!(err, Error::Checkpoint(_)), "{err}");
}

#[test]
fn config_validation() {
    assert!(TrainingConfig::default().validate().is_ok());
    let bad = [
        TrainingConfig {
            gamma: 1.0,
            ..Default::default()
        },
        TrainingConfig {
            batch_size: 2000,
            ..Default::default()
        },
        TrainingConfig {
            target_sync: 0,
            ..Default::default()
        },
        TrainingConfig {
            epsilon_floor: 0.5,
            epsilon_start: 0.1,
            ..Default::default()
        },
    ];
    for c in bad {
        assert!(c.validate().is_err(), "{c:?}");
    }
}
