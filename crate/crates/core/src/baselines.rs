//! Reference policies: the bit-oriented learner (BO), the greedy
//! highest-gain heuristic (HU) and an exhaustive per-slot oracle.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::env::{Env, EnvOptions, RewardSignal, Scenario, SlotContext};
use crate::radio::{PathGainTable, PowerAllocation};
use crate::{Error, Result};

/// Largest joint-action space the oracle will enumerate.
pub const ORACLE_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Bo,
    Hu,
    Oracle,
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselineKind::Bo => "BO",
            BaselineKind::Hu => "HU",
            BaselineKind::Oracle => "ORACLE",
        })
    }
}

impl FromStr for BaselineKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bo" => Ok(Self::Bo),
            "hu" => Ok(Self::Hu),
            "oracle" => Ok(Self::Oracle),
            _ => Err(Error::Config(format!("unknown baseline {s:?}"))),
        }
    }
}

/// Env options for the bit-oriented learner: normalized sum-rate reward and
/// no shared-coverage feature.
pub fn bo_configure(scenario: &Scenario) -> EnvOptions {
    EnvOptions {
        reward: RewardSignal::BitRate {
            normalizer: scenario.rate_upper_bound(),
        },
        coverage_feature: false,
    }
}

/// Greedy channel assignment. Channels are visited in order; each goes to
/// the eligible UAV with the highest gain to its own station (ties to the
/// lower index), at the largest level its remaining budget allows.
pub fn hu_allocate(
    gains: &PathGainTable,
    assoc: &[usize],
    levels: &[f64],
    p_min: f64,
    p_max: f64,
    channels: usize,
) -> Result<PowerAllocation> {
    let n = gains.num_uavs();
    let mut alloc = PowerAllocation::zeros(n, channels);
    let smallest = levels
        .iter()
        .copied()
        .filter(|&l| l > 0.0)
        .fold(f64::INFINITY, f64::min);
    let mut budget = vec![p_max; n];
    for c in 0..channels {
        let mut pick: Option<usize> = None;
        for i in 0..n {
            if budget[i] < smallest {
                continue;
            }
            let g = gains.get(i, assoc[i]);
            if pick.map_or(true, |j| g > gains.get(j, assoc[j])) {
                pick = Some(i);
            }
        }
        let Some(i) = pick else { break };
        let level = levels
            .iter()
            .copied()
            .filter(|&l| l > 0.0 && l <= budget[i])
            .fold(0.0, f64::max);
        alloc.set(i, c, level);
        budget[i] -= level;
    }
    if let Some(i) = (0..n).find(|&i| alloc.total(i) < p_min) {
        return Err(Error::HeuristicInfeasible(i));
    }
    Ok(alloc)
}

/// Action indices whose power rows reproduce `alloc`.
pub fn allocation_to_actions(alloc: &PowerAllocation, actions: &[Vec<f64>]) -> Result<Vec<usize>> {
    (0..alloc.num_uavs())
        .map(|i| {
            actions
                .iter()
                .position(|a| a.as_slice() == alloc.row(i))
                .ok_or_else(|| {
                    Error::Config(format!(
                        "UAV {i} allocation {:?} is not in the action set",
                        alloc.row(i)
                    ))
                })
        })
        .collect()
}

/// HU joint action at the env's current slot.
pub fn hu_joint(scenario: &Scenario, ctx: &SlotContext) -> Result<Vec<usize>> {
    let c = &scenario.config;
    let alloc = hu_allocate(
        &ctx.gains,
        &ctx.assoc,
        &c.power_levels,
        c.p_min,
        c.p_max,
        c.num_channels,
    )?;
    allocation_to_actions(&alloc, &scenario.actions)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleChoice {
    pub joint: Vec<usize>,
    pub reward: f64,
}

/// Exhaustive search over joint actions at the env's current slot, scored
/// with the env's reward. Ties keep the lexicographically smallest action.
pub fn oracle_allocate(env: &Env) -> Result<OracleChoice> {
    let a = env.scenario().num_actions();
    let n = env.scenario().num_uavs();
    let size = (a as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if size > ORACLE_LIMIT {
        return Err(Error::SearchSpaceTooLarge(size));
    }
    let mut joint = vec![0usize; n];
    let mut best = OracleChoice {
        joint: joint.clone(),
        reward: env.evaluate(&joint)?.reward,
    };
    // Odometer over joint actions, last agent fastest: lexicographic order.
    'outer: loop {
        let mut k = n;
        loop {
            if k == 0 {
                break 'outer;
            }
            k -= 1;
            joint[k] += 1;
            if joint[k] < a {
                break;
            }
            joint[k] = 0;
        }
        let r = env.evaluate(&joint)?.reward;
        if r > best.reward {
            best = OracleChoice {
                joint: joint.clone(),
                reward: r,
            };
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSlot {
    pub slot: usize,
    pub choice: OracleChoice,
    /// Evaluation-model objective of the chosen action.
    pub objective: f64,
}

/// Oracle choice at every slot of one episode. Positions do not depend on
/// actions, so per-slot maximization is also optimal for the episode.
pub fn oracle_episode(env: &mut Env) -> Result<Vec<OracleSlot>> {
    env.reset()?;
    let mut out = Vec::new();
    while !env.is_done() {
        let choice = oracle_allocate(env)?;
        let step = env.step(&choice.joint)?;
        out.push(OracleSlot {
            slot: out.len(),
            choice,
            objective: step.objective,
        });
    }
    Ok(out)
}

/// Writes `slot,action_0..,reward`.
pub fn write_oracle_csv(path: &Path, slots: &[OracleSlot]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let n = slots.first().map_or(0, |s| s.choice.joint.len());
    let mut header = vec!["slot".to_string()];
    header.extend((0..n).map(|i| format!("action_{i}")));
    header.push("reward".into());
    w.write_record(&header)?;
    for s in slots {
        let mut row = vec![s.slot.to_string()];
        row.extend(s.choice.joint.iter().map(|a| a.to_string()));
        row.push(s.choice.reward.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use proptest::prelude::*;

    use super::*;
    use crate::env::ScenarioConfig;
    use crate::semantics::{QualityMetric, QualityModel, DEFAULT_THRESHOLDS};

    const LEVELS: [f64; 3] = [0.0, 5.0, 10.0];

    fn table(g: &[f64]) -> PathGainTable {
        PathGainTable::from_rows(g.iter().map(|&x| vec![x]).collect(), 2.0).unwrap()
    }

    fn ladder() -> QualityModel {
        let q = (1..=8).map(|b| b as f64 / 8.0).collect();
        QualityModel::from_parts(QualityMetric::Psnr, DEFAULT_THRESHOLDS.to_vec(), q, 50.0).unwrap()
    }

    fn env_for(config: ScenarioConfig) -> Env {
        let s = Arc::new(Scenario::with_models(config, ladder(), ladder()).unwrap());
        Env::new(s, EnvOptions::default()).unwrap()
    }

    #[test]
    fn hu_single_pick() {
        let a = hu_allocate(&table(&[0.3, 0.1]), &[0, 0], &LEVELS, 0.0, 10.0, 1).unwrap();
        assert_eq!(
            a,
            PowerAllocation::new(vec![vec![10.0], vec![0.0]]).unwrap()
        );
    }

    #[test]
    fn hu_budget_walk() {
        let a = hu_allocate(&table(&[0.3]), &[0], &LEVELS, 0.0, 10.0, 3).unwrap();
        assert_eq!(a.row(0), &[10.0, 0.0, 0.0]);
    }

    #[test]
    fn hu_two_by_two() {
        let a = hu_allocate(&table(&[0.3, 0.1]), &[0, 0], &LEVELS, 0.0, 10.0, 2).unwrap();
        assert_eq!(
            a,
            PowerAllocation::new(vec![vec![10.0, 0.0], vec![0.0, 10.0]]).unwrap()
        );
    }

    #[test]
    fn hu_ties_go_low_then_next() {
        let a = hu_allocate(
            &table(&[0.2, 0.2, 0.2]),
            &[0, 0, 0],
            &[0.0, 4.0],
            0.0,
            8.0,
            4,
        )
        .unwrap();
        let rows: Vec<&[f64]> = (0..3).map(|i| a.row(i)).collect();
        assert_eq!(
            rows,
            vec![&[4.0, 4.0, 0.0, 0.0][..], &[0.0, 0.0, 4.0, 4.0], &[0.0; 4]]
        );
    }

    #[test]
    fn hu_infeasible_under_p_min() {
        let err = hu_allocate(&table(&[0.3, 0.1]), &[0, 0], &LEVELS, 5.0, 10.0, 1).unwrap_err();
        assert!(matches!(err, Error::HeuristicInfeasible(1)));
    }

    #[test]
    fn bo_options() {
        let env = env_for(ScenarioConfig::default());
        let o = bo_configure(env.scenario());
        assert!(!o.coverage_feature);
        let bo = Env::new(Arc::clone(env.scenario()), o).unwrap();
        assert_eq!(bo.frame_width() + 1, env.frame_width());
        let zero = vec![0; env.scenario().num_uavs()];
        assert_eq!(bo.evaluate(&zero).unwrap().reward, 0.0);
    }

    #[test]
    fn bo_lone_uav_reward_is_bounded_rate_share() {
        let config = ScenarioConfig {
            num_uavs: 1,
            num_bs: 1,
            num_channels: 2,
            ..Default::default()
        };
        let env = env_for(config);
        let bo = Env::new(Arc::clone(env.scenario()), bo_configure(env.scenario())).unwrap();
        let s = bo.scenario();
        for a in 0..s.num_actions() {
            let out = bo.evaluate(&[a]).unwrap();
            assert!((out.reward - out.rates.total() / s.rate_upper_bound()).abs() < 1e-15);
            assert!(out.reward <= 1.0);
        }
    }

    #[test]
    fn bo_shares_dynamics() {
        let env = env_for(ScenarioConfig::default());
        let bo = Env::new(Arc::clone(env.scenario()), bo_configure(env.scenario())).unwrap();
        let joint: Vec<usize> = (0..8).map(|i| i % env.scenario().num_actions()).collect();
        assert_eq!(
            env.evaluate(&joint).unwrap().rates,
            bo.evaluate(&joint).unwrap().rates
        );
    }

    #[test]
    fn oracle_single_uav_maximizes_own_quality() {
        let config = ScenarioConfig {
            num_uavs: 1,
            num_bs: 1,
            ..Default::default()
        };
        let env = env_for(config);
        let best = oracle_allocate(&env).unwrap();
        let top = (0..env.scenario().num_actions())
            .map(|a| env.evaluate(&[a]).unwrap().qualities[0])
            .fold(0.0, f64::max);
        assert_eq!(best.reward, top);
        let first = (0..env.scenario().num_actions())
            .find(|&a| env.evaluate(&[a]).unwrap().qualities[0] == top)
            .unwrap();
        assert_eq!(best.joint, vec![first]);
    }

    #[test]
    fn oracle_silences_a_coincident_twin() {
        let config = ScenarioConfig {
            num_uavs: 2,
            num_bs: 1,
            num_channels: 1,
            sides: Some(vec![30.0, 30.0]),
            speeds: Some(vec![10.0, 10.0]),
            circle_centers: Some(vec![[50.0, 50.0], [50.0, 50.0]]),
            phases: Some(vec![0.0, 0.0]),
            directions: Some(vec![1, 1]),
            ..Default::default()
        };
        let env = env_for(config);
        let best = oracle_allocate(&env).unwrap();
        assert_eq!(
            best.joint.iter().filter(|&&a| a == 0).count(),
            1,
            "{best:?}"
        );
        // Both transmitting is strictly worse than either one alone.
        for both in [[1, 1], [1, 2], [2, 1], [2, 2]] {
            assert!(env.evaluate(&both).unwrap().reward < best.reward);
        }
    }

    #[test]
    fn oracle_all_zero_on_dead_links() {
        let config = ScenarioConfig {
            num_uavs: 2,
            num_bs: 1,
            num_channels: 1,
            noise: 1e6,
            ..Default::default()
        };
        let env = env_for(config);
        let best = oracle_allocate(&env).unwrap();
        assert_eq!(best.joint, vec![0, 0]);
        assert_eq!(best.reward, env.evaluate(&[0, 0]).unwrap().reward);
    }

    #[test]
    fn oracle_limit() {
        let config = ScenarioConfig {
            num_uavs: 8,
            num_channels: 3,
            power_levels: vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 10.0],
            ..Default::default()
        };
        let env = env_for(config);
        assert!(matches!(
            oracle_allocate(&env),
            Err(Error::SearchSpaceTooLarge(_))
        ));
    }

    #[test]
    fn oracle_csv() {
        let config = ScenarioConfig {
            num_uavs: 2,
            num_bs: 1,
            num_channels: 1,
            steps_per_episode: 3,
            ..Default::default()
        };
        let mut env = env_for(config);
        let slots = oracle_episode(&mut env).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("oracle.csv");
        write_oracle_csv(&p, &slots).unwrap();
        let text = std::fs::read_to_string(p).unwrap();
        assert!(text.starts_with("slot,action_0,action_1,reward\n"));
        assert_eq!(text.lines().count(), 4);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn hu_meets_power_constraints(gains in prop::collection::vec(1e-4f64..1.0, 1..6), channels in 1usize..4) {
            let n = gains.len();
            let a = hu_allocate(&table(&gains), &vec![0; n], &LEVELS, 0.0, 10.0, channels).unwrap();
            prop_assert!(a.satisfies(&LEVELS, 0.0, 10.0));
        }

        #[test]
        fn oracle_dominates_hu(seed in 0u64..1000) {
            let config = ScenarioConfig {
                num_uavs: 3,
                num_bs: 2,
                num_channels: 2,
                steps_per_episode: 4,
                seed,
                ..Default::default()
            };
            let env = env_for(config);
            let hu = hu_joint(env.scenario(), env.context()).unwrap();
            let hu_r = env.evaluate(&hu).unwrap().reward;
            let best = oracle_allocate(&env).unwrap();
            prop_assert!(best.reward >= hu_r && hu_r >= 0.0);
        }
    }
}
