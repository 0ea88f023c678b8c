//! The individual acceptance criteria.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use rand::Rng;

use super::reference::naive_target;
use super::{oracle_gap, Check};
use crate::approximator::gradcheck::{gradient_check, GradCheckConfig};
use crate::approximator::{Network, NetworkSpec, ParamGroup};
use crate::baselines::{hu_allocate, hu_joint, oracle_allocate};
use crate::env::{enumerate_actions, Env, EnvOptions, Observation, Scenario, ScenarioConfig};
use crate::geometry::{decompose, ObservationSquare};
use crate::harness::images::{synthetic, SYNTHETIC_IMAGES};
use crate::harness::{
    build_scenario, results_csv_bytes, run_sweep, train_method, ExperimentConfig, Method,
    SweepSpec, SweepValue, SweepVariable,
};
use crate::marl::{d3ql_target, GreedyPolicy, TrainingConfig, Transition};
use crate::radio::{PathGainTable, PowerAllocation};
use crate::rng::{substream, Stream};
use crate::semantics::{
    build_quality_model, map_rate_to_quality, QualityMetric, DEFAULT_PSNR_CAP, DEFAULT_THRESHOLDS,
};
use crate::Result;

pub const ORACLE_GAP_NAME: &str = "oracle gap";
pub const SEMANTIC_VS_BIT_NAME: &str = "semantic vs bit-oriented";
pub const METRIC_CHOICE_NAME: &str = "reward metric choice";

/// Required fraction of the oracle's per-slot reward.
pub const ORACLE_GAP_TOLERANCE: f64 = 0.9;
/// Required margin of SAMA over BO on the interference scenario.
pub const SEMANTIC_MARGIN: f64 = 0.05;
pub const GRADIENT_TOLERANCE: f64 = 1e-4;
pub const TARGET_TOLERANCE: f64 = 1e-12;
const MC_POINTS: usize = 1_000_000;

fn check(
    id: u8,
    name: &'static str,
    passed: bool,
    measured: String,
    tolerance: impl Into<String>,
) -> Check {
    Check {
        id,
        name,
        passed,
        measured,
        tolerance: tolerance.into(),
    }
}

/// Criterion 1: the six feasible tuples for levels {0, 5, 10}, two
/// channels and a 10 W budget.
pub fn action_space_check() -> Result<Check> {
    let mut got = enumerate_actions(&[0.0, 5.0, 10.0], 2, 0.0, 10.0)?;
    let mut want = vec![
        vec![0.0, 0.0],
        vec![0.0, 5.0],
        vec![0.0, 10.0],
        vec![5.0, 0.0],
        vec![5.0, 5.0],
        vec![10.0, 0.0],
    ];
    got.sort_by(|a, b| a.partial_cmp(b).unwrap());
    want.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(check(
        1,
        "action space",
        got == want,
        format!("{} tuples {:?}", got.len(), got),
        "the 6 listed tuples",
    ))
}

/// Three mutually overlapping squares used by criterion 2.
pub fn three_squares() -> [ObservationSquare; 3] {
    [
        ObservationSquare::new(0, (10.0, 10.0), 20.0),
        ObservationSquare::new(1, (22.0, 12.0), 20.0),
        ObservationSquare::new(2, (15.0, 22.0), 20.0),
    ]
}

/// Criterion 2: segment count, the per-square partition identity and a
/// Monte Carlo area estimate per segment.
pub fn segment_geometry_check() -> Result<Check> {
    let squares = three_squares();
    let decomp = decompose(&squares);
    let identity_err = squares
        .iter()
        .map(|s| (decomp.covered_by(s.owner) - s.side * s.side).abs())
        .fold(0.0, f64::max);

    let (x0, x1, y0, y1) = (0.0, 32.0, 0.0, 32.0);
    let box_area = (x1 - x0) * (y1 - y0);
    let mut counts = vec![0usize; decomp.len()];
    let mut rng = substream(0, Stream::Evaluation, 2);
    let mut members = Vec::with_capacity(3);
    for _ in 0..MC_POINTS {
        let (x, y) = (rng.gen_range(x0..x1), rng.gen_range(y0..y1));
        members.clear();
        members.extend(squares.iter().filter(|s| s.contains(x, y)).map(|s| s.owner));
        if let Some(k) = decomp.iter().position(|s| s.members == members) {
            counts[k] += 1;
        }
    }
    let mut worst_z: f64 = 0.0;
    for (seg, &c) in decomp.iter().zip(&counts) {
        let p = c as f64 / MC_POINTS as f64;
        let se = box_area * (p * (1.0 - p) / MC_POINTS as f64).sqrt();
        let z = (box_area * p - seg.area).abs() / se.max(f64::MIN_POSITIVE);
        worst_z = worst_z.max(z);
    }
    let passed = decomp.len() == 7 && identity_err <= 1e-9 && worst_z <= 3.0;
    Ok(check(
        2,
        "segment geometry",
        passed,
        format!(
            "{} segments, identity err {identity_err:.1e}, worst MC z {worst_z:.2}",
            decomp.len()
        ),
        "7 segments, identity <= 1e-9, |z| <= 3",
    ))
}

/// Criterion 3: finite differences against backpropagation.
pub fn gradient_check_criterion() -> Result<Check> {
    let report = gradient_check(&GradCheckConfig::standard(0))?;
    let cases: usize = report.groups.iter().map(|g| g.cases).sum();
    let covered = ParamGroup::ALL
        .iter()
        .all(|g| report.groups.iter().any(|r| r.group == *g && r.cases > 0));
    Ok(check(
        3,
        "gradient fidelity",
        report.passes(GRADIENT_TOLERANCE) && covered && cases >= 100,
        format!(
            "max rel error {:.2e} over {cases} cases",
            report.max_rel_error
        ),
        format!("<= {GRADIENT_TOLERANCE:e}, every parameter group"),
    ))
}

fn constant_net(v: f64, adv: &[f64]) -> Result<Network> {
    let spec = NetworkSpec {
        input_width: 2,
        recurrent_units: 2,
        dense_widths: vec![2],
        num_actions: adv.len(),
    };
    let mut net = Network::zeros(spec)?;
    let value = net.group_ranges(ParamGroup::Value)[0].clone();
    let advantage = net.group_ranges(ParamGroup::Advantage)[0].clone();
    let p = net.params_mut().as_mut_slice();
    p[value.end - 1] = v;
    p[advantage.end - adv.len()..advantage.end].copy_from_slice(adv);
    Ok(net)
}

/// Criterion 4: the worked double-Q example plus randomized cases against
/// the loop-based reference.
pub fn target_check() -> Result<Check> {
    let online = [constant_net(3.0, &[-2.0, 2.0])?];
    let target = [constant_net(6.0, &[4.0, -4.0])?];
    let obs = Observation::zeros(2, 1);
    let t = Transition {
        observations: vec![obs.clone()],
        actions: vec![0],
        next_observations: vec![obs],
        reward: 1.0,
    };
    let worked = d3ql_target(&[&t], &online, &target, 0.8)?[0];
    let worked_ok = (worked - 2.6).abs() <= TARGET_TOLERANCE;

    let mut rng = substream(4, Stream::Evaluation, 0);
    let mut worst: f64 = 0.0;
    for case in 0..1000u64 {
        let agents = rng.gen_range(1..=3);
        let spec = NetworkSpec {
            input_width: rng.gen_range(1..=4),
            recurrent_units: rng.gen_range(1..=4),
            dense_widths: (0..rng.gen_range(1..=2))
                .map(|_| rng.gen_range(1..=5))
                .collect(),
            num_actions: rng.gen_range(1..=6),
        };
        let history = rng.gen_range(1..=3);
        let nets = |k: u64| -> Result<Vec<Network>> {
            (0..agents as u64)
                .map(|i| {
                    Network::init(spec.clone(), &mut substream(case, Stream::Init, 16 * k + i))
                })
                .collect()
        };
        let (on, tg) = (nets(0)?, nets(1)?);
        let mut random_obs = || {
            Observation::new(
                spec.input_width,
                (0..spec.input_width * history)
                    .map(|_| rng.gen_range(-1.0..1.0))
                    .collect(),
            )
        };
        let next = (0..agents)
            .map(|_| random_obs())
            .collect::<Result<Vec<_>>>()?;
        let now = (0..agents)
            .map(|_| random_obs())
            .collect::<Result<Vec<_>>>()?;
        let reward = rng.gen_range(-1.0..1.0);
        let gamma = rng.gen_range(0.0..1.0);
        let t = Transition {
            observations: now,
            actions: vec![0; agents],
            next_observations: next.clone(),
            reward,
        };
        let fast = d3ql_target(&[&t], &on, &tg, gamma)?[0];
        let slow = naive_target(reward, gamma, &next, &on, &tg);
        worst = worst.max((fast - slow).abs());
    }
    Ok(check(
        4,
        "double-Q target",
        worked_ok && worst <= TARGET_TOLERANCE,
        format!("worked example {worked}, worst of 1000 random cases {worst:.1e}"),
        format!("2.6 and <= {TARGET_TOLERANCE:e}"),
    ))
}

/// Two UAVs over one station on two channels, circling side by side so
/// their squares overlap through the episode.
pub fn oracle_gap_config(seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        num_uavs: 2,
        num_bs: 1,
        num_channels: 2,
        steps_per_episode: 20,
        history: 4,
        sides: Some(vec![30.0, 30.0]),
        speeds: Some(vec![10.0, 10.0]),
        circle_centers: Some(vec![[45.0, 50.0], [55.0, 50.0]]),
        phases: Some(vec![0.0, PI]),
        directions: Some(vec![1, -1]),
        image: "synthetic:clouds".into(),
        seed,
        ..Default::default()
    }
}

pub fn oracle_gap_scenario(seed: u64) -> Result<Arc<Scenario>> {
    build_scenario(&oracle_gap_config(seed), Path::new("."))
}

pub fn oracle_gap_training() -> TrainingConfig {
    TrainingConfig {
        train_episodes: 200,
        test_episodes: 5,
        ..Default::default()
    }
}

/// Three UAVs sharing one channel to a central station. UAV 0 has the best
/// gain but a small square; UAV 1 covers most of the union on its own.
pub fn interference_config(seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        num_uavs: 3,
        num_bs: 1,
        num_channels: 1,
        steps_per_episode: 20,
        history: 4,
        bs_positions: Some(vec![[50.0, 50.0]]),
        sides: Some(vec![14.0, 56.0, 40.0]),
        speeds: Some(vec![10.0, 10.0, 10.0]),
        circle_centers: Some(vec![[50.0, 50.0], [50.0, 72.0], [50.0, 28.0]]),
        phases: Some(vec![0.0, PI / 2.0, PI]),
        directions: Some(vec![1, -1, 1]),
        image: "synthetic:clouds".into(),
        seed,
        ..Default::default()
    }
}

pub fn interference_training() -> TrainingConfig {
    TrainingConfig {
        train_episodes: 120,
        test_episodes: 5,
        ..Default::default()
    }
}

/// One seed of the criterion-5 scenario trained with the PSNR reward.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleGapRun {
    pub seed: u64,
    /// Mean per-slot fraction of the oracle's reward.
    pub ratio: f64,
    /// Mean test objective (PSNR).
    pub objective: f64,
}

pub fn oracle_gap_run(seed: u64) -> Result<OracleGapRun> {
    let scenario = oracle_gap_scenario(seed)?;
    let training = oracle_gap_training();
    let out = train_method(Method::Sama, scenario.clone(), &training)?;
    let objective = out.test_objective().unwrap_or(0.0);
    let mut policy: GreedyPolicy = out.policy;
    let mut env = Env::new(scenario, EnvOptions::default())?;
    let ratio = oracle_gap(&mut policy, &mut env, training.test_episodes)?;
    Ok(OracleGapRun {
        seed,
        ratio,
        objective,
    })
}

pub fn oracle_gap_runs(seeds: &[u64]) -> Result<Vec<OracleGapRun>> {
    seeds.iter().map(|&s| oracle_gap_run(s)).collect()
}

/// Criterion 5: at least two of three seeds reach 90% of the oracle.
pub fn oracle_gap_check(runs: &[OracleGapRun]) -> Check {
    let good = runs
        .iter()
        .filter(|r| r.ratio >= ORACLE_GAP_TOLERANCE)
        .count();
    let needed = (2 * runs.len()).div_ceil(3);
    let ratios: Vec<String> = runs.iter().map(|r| format!("{:.3}", r.ratio)).collect();
    check(
        5,
        ORACLE_GAP_NAME,
        !runs.is_empty() && good >= needed,
        format!(
            "ratios [{}], {good}/{} seeds pass",
            ratios.join(", "),
            runs.len()
        ),
        format!(">= {ORACLE_GAP_TOLERANCE} in >= {needed} seeds"),
    )
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len().max(1) as f64
}

/// Mean test objective of `method` on a scenario, one entry per seed.
pub fn test_objectives(
    method: Method,
    config: impl Fn(u64) -> ScenarioConfig,
    training: &TrainingConfig,
    seeds: &[u64],
) -> Result<Vec<f64>> {
    seeds
        .iter()
        .map(|&s| {
            let scenario = build_scenario(&config(s), Path::new("."))?;
            let out = train_method(method, scenario, training)?;
            Ok(out.test_objective().unwrap_or(0.0))
        })
        .collect()
}

/// Criterion 6: SAMA beats BO by a fixed margin on the interference
/// scenario, averaged over seeds.
pub fn semantic_vs_bit_check(seeds: &[u64]) -> Result<Check> {
    let training = interference_training();
    let sama = test_objectives(Method::Sama, interference_config, &training, seeds)?;
    let bo = test_objectives(Method::Bo, interference_config, &training, seeds)?;
    let (ms, mb) = (mean(&sama), mean(&bo));
    Ok(check(
        6,
        SEMANTIC_VS_BIT_NAME,
        ms - mb >= SEMANTIC_MARGIN,
        format!("SAMA {ms:.4} vs BO {mb:.4} (margin {:.4})", ms - mb),
        format!("margin >= {SEMANTIC_MARGIN}"),
    ))
}

/// Criterion 7: the hand-built allocation, then HU never beats the oracle
/// on random snapshots.
pub fn heuristic_check() -> Result<Check> {
    let gains = PathGainTable::from_rows(vec![vec![0.3], vec![0.1]], 2.0)?;
    let alloc = hu_allocate(&gains, &[0, 0], &[0.0, 5.0, 10.0], 0.0, 10.0, 2)?;
    let worked_ok = alloc == PowerAllocation::new(vec![vec![10.0, 0.0], vec![0.0, 10.0]])?;

    let model = build_quality_model(
        &synthetic("clouds").expect("built-in image"),
        QualityMetric::Psnr,
        DEFAULT_PSNR_CAP,
        &DEFAULT_THRESHOLDS,
    )?;
    let mut violations = 0;
    let mut worst_gap = f64::INFINITY;
    for seed in 0..100 {
        let config = ScenarioConfig {
            num_uavs: 3,
            num_bs: 2,
            num_channels: 2,
            steps_per_episode: 1,
            history: 1,
            seed,
            ..Default::default()
        };
        let scenario = Arc::new(Scenario::with_models(config, model.clone(), model.clone())?);
        let mut env = Env::new(scenario.clone(), EnvOptions::default())?;
        env.reset()?;
        let hu = env.evaluate(&hu_joint(&scenario, env.context())?)?.reward;
        let best = oracle_allocate(&env)?.reward;
        if hu > best {
            violations += 1;
        }
        worst_gap = worst_gap.min(best - hu);
    }
    Ok(check(
        7,
        "heuristic benchmark",
        worked_ok && violations == 0,
        format!(
            "worked allocation {}, {violations}/100 snapshots with HU above oracle (min gap {worst_gap:.4})",
            if worked_ok { "matches" } else { "differs" }
        ),
        "[[10,0],[0,10]] and 0 violations",
    ))
}

/// Criterion 8: PSNR-reward training scores at least as well under the PSNR
/// objective as SSIM-reward training, mean over seeds.
pub fn metric_choice_check(psnr_runs: &[OracleGapRun], seeds: &[u64]) -> Result<Check> {
    let ssim_config = |s| ScenarioConfig {
        reward_metric: QualityMetric::Ssim,
        ..oracle_gap_config(s)
    };
    let ssim = test_objectives(Method::Sama, ssim_config, &oracle_gap_training(), seeds)?;
    let psnr: Vec<f64> = psnr_runs.iter().map(|r| r.objective).collect();
    let (mp, ms) = (mean(&psnr), mean(&ssim));
    Ok(check(
        8,
        METRIC_CHOICE_NAME,
        mp >= ms,
        format!("PSNR-trained {mp:.4} vs SSIM-trained {ms:.4}"),
        "PSNR-trained >= SSIM-trained",
    ))
}

/// A small sweep that exercises training, HU and the worker pool.
pub fn determinism_experiment() -> Result<ExperimentConfig> {
    let mut exp = ExperimentConfig::from_toml("", Path::new("."))?;
    exp.scenario = ScenarioConfig {
        num_uavs: 2,
        num_bs: 1,
        steps_per_episode: 5,
        history: 2,
        image: "synthetic:gradient".into(),
        ..Default::default()
    };
    exp.training = TrainingConfig {
        batch_size: 4,
        memory_capacity: 50,
        target_sync: 5,
        recurrent_units: 4,
        dense_widths: vec![8],
        train_episodes: 3,
        test_episodes: 2,
        ..Default::default()
    };
    exp.sweep = Some(SweepSpec {
        variable: SweepVariable::Channels,
        values: vec![SweepValue::Int(1), SweepValue::Int(2)],
        seeds: vec![0, 1],
        methods: vec![Method::Sama, Method::Bo, Method::Hu],
        images: Vec::new(),
    });
    Ok(exp)
}

/// Criterion 9: two sweeps over the same config, one serial and one on two
/// workers, serialize to identical bytes.
pub fn determinism_check() -> Result<Check> {
    let exp = determinism_experiment()?;
    let spec = exp.sweep.clone().expect("sweep table");
    let a = results_csv_bytes(&run_sweep(&spec, &exp, 1)?)?;
    let b = results_csv_bytes(&run_sweep(&spec, &exp, 2)?)?;
    Ok(check(
        9,
        "sweep determinism",
        a == b,
        format!(
            "{} vs {} bytes, {}",
            a.len(),
            b.len(),
            if a == b { "identical" } else { "different" }
        ),
        "byte-identical CSV",
    ))
}

/// Criterion 10: top quality is exactly 1, qualities never drop with more
/// bits, and the rate mapping is the step function its thresholds define.
pub fn quality_model_check() -> Result<Check> {
    let mut problems = Vec::new();
    let mut models = Vec::new();
    for name in SYNTHETIC_IMAGES {
        let img = synthetic(name).expect("built-in image");
        for metric in [QualityMetric::Psnr, QualityMetric::Ssim] {
            match build_quality_model(&img, metric, DEFAULT_PSNR_CAP, &DEFAULT_THRESHOLDS) {
                Ok(m) => {
                    if m.quality_of(8) != 1.0 || m.qualities.windows(2).any(|w| w[1] < w[0]) {
                        problems.push(format!("{name}/{metric}"));
                    }
                    models.push(m);
                }
                Err(e) => problems.push(format!("{name}/{metric}: {e}")),
            }
        }
    }

    let mut rng = substream(10, Stream::Evaluation, 0);
    let mut step_errors = 0;
    if let Some(model) = models.first() {
        let side = 30.0;
        let mut rates: Vec<f64> = (0..10_000)
            .map(|_| 10f64.powf(rng.gen_range(-1.0..3.0)))
            .collect();
        rates.sort_by(f64::total_cmp);
        let mut prev = 0.0;
        for &r in &rates {
            let q = map_rate_to_quality(model, r, side);
            let density = r / (side * side);
            let mut expect = 0.0;
            for (t, &qt) in model.thresholds.iter().zip(&model.qualities) {
                if density >= *t {
                    expect = qt;
                }
            }
            if q != expect || q < prev {
                step_errors += 1;
            }
            prev = q;
        }
    }
    Ok(check(
        10,
        "quality model",
        problems.is_empty() && step_errors == 0 && !models.is_empty(),
        format!(
            "{} models, {} bad, {step_errors}/10000 probe mismatches",
            models.len(),
            problems.len()
        ),
        "q(8) = 1, nondecreasing, exact step function",
    ))
}
