//! Discrete-time multi-UAV coverage environment.
//!
//! Each slot every UAV picks a power tuple (one level per channel) from a
//! shared action list. The environment evaluates rates at the current
//! positions, turns them into per-UAV image quality, scores every coverage
//! segment by its best member and returns the area-weighted mean as the
//! shared reward. UAVs then advance along their circles and observe a new
//! frame of normalized gains, shared coverage degree and position.

mod config;
mod trajectory;

use std::collections::VecDeque;
use std::path::Path;
use std::sync::Arc;

pub use config::ScenarioConfig;
pub use trajectory::{Circle, TrajectoryModel};

use crate::geometry::{self, ObservationSquare, SegmentDecomposition};
use crate::radio::{self, PathGainTable, Position3D, PowerAllocation, RateVector};
use crate::semantics::{self, GrayImage, QualityMetric, QualityModel};
use crate::{Error, Result};

/// All power tuples with entries from `levels` and total in `[p_min, p_max]`,
/// in lexicographic order of level indices.
pub fn enumerate_actions(
    levels: &[f64],
    channels: usize,
    p_min: f64,
    p_max: f64,
) -> Result<Vec<Vec<f64>>> {
    let k = levels.len();
    let total = k
        .checked_pow(channels as u32)
        .filter(|_| k > 0)
        .unwrap_or(0);
    let mut out = Vec::new();
    let mut idx = vec![0usize; channels];
    for _ in 0..total {
        let tuple: Vec<f64> = idx.iter().map(|&j| levels[j]).collect();
        let sum: f64 = tuple.iter().sum();
        if sum >= p_min && sum <= p_max {
            out.push(tuple);
        }
        for pos in (0..channels).rev() {
            idx[pos] += 1;
            if idx[pos] < k {
                break;
            }
            idx[pos] = 0;
        }
    }
    if out.is_empty() {
        return Err(Error::InfeasiblePower { p_min, p_max });
    }
    Ok(out)
}

/// A built scenario: config plus everything derived from it once per run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub sides: Vec<f64>,
    pub trajectories: TrajectoryModel,
    pub stations: Vec<Position3D>,
    pub actions: Vec<Vec<f64>>,
    /// PSNR model; every reported objective uses it.
    pub eval_model: QualityModel,
    /// Model behind the semantic training reward (`config.reward_metric`).
    pub reward_model: QualityModel,
    /// Largest feasible path gain, at the minimum UAV/BS separation.
    pub gain_max: f64,
}

impl Scenario {
    pub fn new(config: ScenarioConfig, image: &GrayImage) -> Result<Self> {
        config.validate()?;
        let eval_model = semantics::build_quality_model(
            image,
            QualityMetric::Psnr,
            config.psnr_cap,
            &config.thresholds,
        )?;
        let reward_model = match config.reward_metric {
            QualityMetric::Psnr => eval_model.clone(),
            m => semantics::build_quality_model(image, m, config.psnr_cap, &config.thresholds)?,
        };
        Self::with_models(config, eval_model, reward_model)
    }

    pub fn with_models(
        config: ScenarioConfig,
        eval_model: QualityModel,
        reward_model: QualityModel,
    ) -> Result<Self> {
        config.validate()?;
        let actions = enumerate_actions(
            &config.power_levels,
            config.num_channels,
            config.p_min,
            config.p_max,
        )?;
        let (sides, trajectories) = trajectory::sample_run(&config);
        let stations = config
            .station_xy()
            .iter()
            .map(|p| Position3D::new(p[0], p[1], config.bs_altitude))
            .collect();
        let gain_max = (config.uav_altitude - config.bs_altitude)
            .abs()
            .powf(-config.alpha);
        Ok(Self {
            config,
            sides,
            trajectories,
            stations,
            actions,
            eval_model,
            reward_model,
            gain_max,
        })
    }

    pub fn num_uavs(&self) -> usize {
        self.config.num_uavs
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    /// Per-UAV aggregate rate bound used to normalize bit-oriented rewards:
    /// every channel at the top total power with the best possible gain and no
    /// interference.
    pub fn rate_upper_bound(&self) -> f64 {
        self.config.num_channels as f64
            * (1.0 + self.config.p_max * self.gain_max / self.config.noise).log2()
    }

    pub fn uav_position(&self, uav: usize, slot: usize) -> Position3D {
        let (x, y) = self.trajectories.position(uav, slot);
        Position3D::new(x, y, self.config.uav_altitude)
    }

    pub fn allocation(&self, joint: &[usize]) -> Result<PowerAllocation> {
        if joint.len() != self.num_uavs() {
            return Err(Error::ActionCount {
                expected: self.num_uavs(),
                got: joint.len(),
            });
        }
        let rows = joint
            .iter()
            .enumerate()
            .map(|(agent, &a)| {
                self.actions.get(a).cloned().ok_or(Error::InvalidAction {
                    agent,
                    index: a,
                    count: self.actions.len(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        PowerAllocation::new(rows)
    }

    /// Width of one observation frame.
    pub fn frame_width(&self, coverage_feature: bool) -> usize {
        self.config.num_bs + 2 + usize::from(coverage_feature)
    }
}

/// What the agents are rewarded for.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RewardSignal {
    /// Area-weighted best-member quality under the scenario's reward model.
    Semantic,
    /// Sum of rates over `num_uavs * normalizer`.
    BitRate { normalizer: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EnvOptions {
    pub reward: RewardSignal,
    /// Include the shared coverage degree in observation frames.
    pub coverage_feature: bool,
}

impl Default for EnvOptions {
    fn default() -> Self {
        Self {
            reward: RewardSignal::Semantic,
            coverage_feature: true,
        }
    }
}

/// A window of `history` frames, oldest first, stored flat.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Observation {
    width: usize,
    data: Vec<f64>,
}

impl Observation {
    pub fn new(width: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || data.is_empty() || data.len() % width != 0 {
            return Err(Error::Shape(format!(
                "observation of {} values is not a whole number of width-{width} frames",
                data.len()
            )));
        }
        Ok(Self { width, data })
    }

    pub fn zeros(width: usize, history: usize) -> Self {
        Self {
            width,
            data: vec![0.0; width * history],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn history(&self) -> usize {
        self.data.len() / self.width
    }

    pub fn frame(&self, k: usize) -> &[f64] {
        &self.data[k * self.width..(k + 1) * self.width]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.width)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Everything about one slot that does not depend on the chosen powers.
#[derive(Debug, Clone)]
pub struct SlotContext {
    pub slot: usize,
    pub positions: Vec<Position3D>,
    pub gains: PathGainTable,
    pub assoc: Vec<usize>,
    pub decomposition: SegmentDecomposition,
    pub covered_area: f64,
}

impl SlotContext {
    fn build(scenario: &Scenario, slot: usize) -> Result<Self> {
        let n = scenario.num_uavs();
        let positions: Vec<_> = (0..n).map(|i| scenario.uav_position(i, slot)).collect();
        let gains = PathGainTable::compute(&positions, &scenario.stations, scenario.config.alpha)?;
        let assoc = radio::associate_all(&gains);
        let squares: Vec<_> = positions
            .iter()
            .enumerate()
            .map(|(i, p)| ObservationSquare::new(i, (p.x, p.y), scenario.sides[i]))
            .collect();
        let decomposition = geometry::decompose(&squares);
        let covered_area = geometry::union_area(&decomposition);
        Ok(Self {
            slot,
            positions,
            gains,
            assoc,
            decomposition,
            covered_area,
        })
    }
}

/// Result of applying one joint action in one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotOutcome {
    pub rates: RateVector,
    /// Per-UAV quality under the evaluation (PSNR) model.
    pub qualities: Vec<f64>,
    /// Semantic reward under the evaluation model, in `[0, 1]`.
    pub objective: f64,
    /// Training signal for the configured [`RewardSignal`].
    pub reward: f64,
    pub covered_area: f64,
}

/// Area-weighted mean over segments of the best member quality.
pub fn semantic_reward(decomp: &SegmentDecomposition, qualities: &[f64]) -> f64 {
    let mut weighted = 0.0;
    let mut area = 0.0;
    for s in decomp.iter() {
        let best = s.members.iter().map(|&i| qualities[i]).fold(0.0, f64::max);
        weighted += s.area * best;
        area += s.area;
    }
    if area > 0.0 {
        weighted / area
    } else {
        0.0
    }
}

fn qualities_under(model: &QualityModel, rates: &RateVector, sides: &[f64]) -> Vec<f64> {
    rates
        .as_slice()
        .iter()
        .zip(sides)
        .map(|(&r, &d)| semantics::map_rate_to_quality(model, r, d))
        .collect()
}

/// Scores a joint action against a slot without touching any state.
pub fn evaluate_slot(
    scenario: &Scenario,
    options: &EnvOptions,
    ctx: &SlotContext,
    joint: &[usize],
) -> Result<SlotOutcome> {
    let alloc = scenario.allocation(joint)?;
    let rates = radio::rates(&alloc, &ctx.gains, &ctx.assoc, scenario.config.noise);
    let qualities = qualities_under(&scenario.eval_model, &rates, &scenario.sides);
    let objective = semantic_reward(&ctx.decomposition, &qualities);
    let reward = match options.reward {
        RewardSignal::Semantic => {
            if scenario.reward_model == scenario.eval_model {
                objective
            } else {
                let q = qualities_under(&scenario.reward_model, &rates, &scenario.sides);
                semantic_reward(&ctx.decomposition, &q)
            }
        }
        RewardSignal::BitRate { normalizer } => {
            rates.total() / (scenario.num_uavs() as f64 * normalizer)
        }
    };
    Ok(SlotOutcome {
        rates,
        qualities,
        objective,
        reward,
        covered_area: ctx.covered_area,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observations: Vec<Observation>,
    /// Training reward.
    pub reward: f64,
    /// Semantic objective under the evaluation model.
    pub objective: f64,
    pub rates: Vec<f64>,
    /// Union area of the slot; `objective * covered_area` recovers the
    /// unnormalized per-slot sum.
    pub covered_area: f64,
    pub done: bool,
}

/// Mean per-slot semantic objective of a trace.
pub fn semantic_objective(trace: &[StepResult]) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::Config("empty trace".into()));
    }
    Ok(trace.iter().map(|s| s.objective).sum::<f64>() / trace.len() as f64)
}

/// Unnormalized objective: sum over slots of `sum_S area_S * quality_S`.
pub fn unnormalized_objective(trace: &[StepResult]) -> f64 {
    trace.iter().map(|s| s.objective * s.covered_area).sum()
}

pub struct Env {
    scenario: Arc<Scenario>,
    options: EnvOptions,
    slot: usize,
    ctx: SlotContext,
    histories: Vec<VecDeque<Vec<f64>>>,
}

impl Env {
    pub fn new(scenario: Arc<Scenario>, options: EnvOptions) -> Result<Self> {
        let ctx = SlotContext::build(&scenario, 0)?;
        let mut env = Self {
            scenario,
            options,
            slot: 0,
            ctx,
            histories: Vec::new(),
        };
        env.reset()?;
        Ok(env)
    }

    pub fn scenario(&self) -> &Arc<Scenario> {
        &self.scenario
    }

    pub fn options(&self) -> &EnvOptions {
        &self.options
    }

    pub fn slot(&self) -> usize {
        self.slot
    }

    pub fn context(&self) -> &SlotContext {
        &self.ctx
    }

    pub fn frame_width(&self) -> usize {
        self.scenario.frame_width(self.options.coverage_feature)
    }

    pub fn is_done(&self) -> bool {
        self.slot >= self.scenario.config.steps_per_episode
    }

    /// Back to slot 0 with zeroed histories stamped with the first frame.
    /// Trajectories are fixed per run, so every reset is identical.
    pub fn reset(&mut self) -> Result<Vec<Observation>> {
        self.slot = 0;
        self.ctx = SlotContext::build(&self.scenario, 0)?;
        let width = self.frame_width();
        let h = self.scenario.config.history;
        self.histories = (0..self.scenario.num_uavs())
            .map(|_| std::iter::repeat(vec![0.0; width]).take(h).collect())
            .collect();
        self.stamp_frames()?;
        Ok(self.observations())
    }

    fn frame(&self, uav: usize) -> Result<Vec<f64>> {
        let s = &self.scenario;
        let mut f = Vec::with_capacity(self.frame_width());
        for b in 0..s.config.num_bs {
            f.push(self.ctx.gains.get(uav, b) / s.gain_max);
        }
        if self.options.coverage_feature {
            let z = geometry::shared_coverage_degree(uav, &self.ctx.decomposition, s.sides[uav])?;
            f.push(z / s.num_uavs() as f64);
        }
        let p = self.ctx.positions[uav];
        f.push(p.x / s.config.area_side);
        f.push(p.y / s.config.area_side);
        for v in &mut f {
            *v = v.clamp(0.0, 1.0);
        }
        Ok(f)
    }

    fn stamp_frames(&mut self) -> Result<()> {
        for i in 0..self.scenario.num_uavs() {
            let f = self.frame(i)?;
            let hist = &mut self.histories[i];
            hist.pop_front();
            hist.push_back(f);
        }
        Ok(())
    }

    pub fn observations(&self) -> Vec<Observation> {
        let width = self.frame_width();
        self.histories
            .iter()
            .map(|h| Observation {
                width,
                data: h.iter().flatten().copied().collect(),
            })
            .collect()
    }

    /// Scores `joint` at the current slot without advancing.
    pub fn evaluate(&self, joint: &[usize]) -> Result<SlotOutcome> {
        evaluate_slot(&self.scenario, &self.options, &self.ctx, joint)
    }

    pub fn step(&mut self, joint: &[usize]) -> Result<StepResult> {
        if self.is_done() {
            return Err(Error::Config(
                "episode finished; reset before stepping".into(),
            ));
        }
        let outcome = self.evaluate(joint)?;
        self.slot += 1;
        self.ctx = SlotContext::build(&self.scenario, self.slot)?;
        self.stamp_frames()?;
        Ok(StepResult {
            observations: self.observations(),
            reward: outcome.reward,
            objective: outcome.objective,
            rates: outcome.rates.0,
            covered_area: outcome.covered_area,
            done: self.is_done(),
        })
    }
}

/// One row of an exported trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub episode: usize,
    pub slot: usize,
    pub actions: Vec<usize>,
    pub rates: Vec<f64>,
    pub reward: f64,
}

/// Writes `episode,t,action_0..,rate_0..,reward`.
pub fn write_trace_csv(path: &Path, num_uavs: usize, records: &[TraceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["episode".to_string(), "t".to_string()];
    header.extend((0..num_uavs).map(|i| format!("action_{i}")));
    header.extend((0..num_uavs).map(|i| format!("rate_{i}")));
    header.push("reward".into());
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![r.episode.to_string(), r.slot.to_string()];
        row.extend(r.actions.iter().map(|a| a.to_string()));
        row.extend(r.rates.iter().map(|x| x.to_string()));
        row.push(r.reward.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
