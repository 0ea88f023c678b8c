//! Central finite-difference check of [`Network::backward`].

use rand::seq::SliceRandom;
use rand::Rng;

use super::{Network, NetworkSpec, ParamGroup};
use crate::env::Observation;
use crate::rng::{substream, Stream};
use crate::Result;

/// Absolute scale below which gradients are compared absolutely.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    pub spec: NetworkSpec,
    pub history: usize,
    pub cases: usize,
    pub step: f64,
    pub seed: u64,
}

impl GradCheckConfig {
    pub fn standard(seed: u64) -> Self {
        Self {
            spec: NetworkSpec::standard(5, 9),
            history: 4,
            cases: 100,
            step: 1e-5,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupError {
    pub group: ParamGroup,
    pub cases: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub groups: Vec<GroupError>,
    /// Coordinates redrawn because a ReLU changed sign inside the stencil.
    pub kinks_skipped: usize,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error <= tol
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

fn objective(net: &Network, obs: &Observation, dq: &[f64]) -> Result<(f64, Vec<bool>)> {
    let tr = net.forward_trace(obs)?;
    Ok((
        tr.q.iter().zip(dq).map(|(q, w)| q * w).sum(),
        tr.relu_pattern(),
    ))
}

/// Cases cycle through the parameter groups. Each case draws a fresh network,
/// observation window, upstream weight vector and one coordinate of the group.
pub fn gradient_check(config: &GradCheckConfig) -> Result<GradCheckReport> {
    let mut rng = substream(config.seed, Stream::Evaluation, 0xC4EC);
    let mut groups: Vec<GroupError> = ParamGroup::ALL
        .iter()
        .map(|&group| GroupError {
            group,
            cases: 0,
            max_rel_error: 0.0,
        })
        .collect();
    let mut kinks = 0;
    let h = config.step;
    let width = config.spec.input_width;

    for case in 0..config.cases {
        let slot = case % groups.len();
        let mut net = Network::init(
            config.spec.clone(),
            &mut substream(config.seed, Stream::Init, case as u64),
        )?;
        // Perturb biases off zero so bias paths are exercised non-trivially.
        let bias_ranges: Vec<_> = [ParamGroup::LstmBias, ParamGroup::DenseBias]
            .iter()
            .flat_map(|&g| net.group_ranges(g))
            .collect();
        for range in bias_ranges {
            for b in &mut net.params_mut().as_mut_slice()[range] {
                *b += rng.gen_range(-0.1..0.1);
            }
        }
        let obs = Observation::new(
            width,
            (0..width * config.history).map(|_| rng.gen()).collect(),
        )?;
        let dq: Vec<f64> = (0..config.spec.num_actions)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect();
        let grad = net.gradient(&obs, &dq)?;
        let (_, base_pattern) = objective(&net, &obs, &dq)?;

        let ranges = net.group_ranges(groups[slot].group);
        let err = loop {
            let range = ranges
                .choose(&mut rng)
                .expect("group has at least one block")
                .clone();
            let k = rng.gen_range(range);
            let x = net.params().as_slice()[k];
            net.params_mut().as_mut_slice()[k] = x + h;
            let (plus, pat_plus) = objective(&net, &obs, &dq)?;
            net.params_mut().as_mut_slice()[k] = x - h;
            let (minus, pat_minus) = objective(&net, &obs, &dq)?;
            net.params_mut().as_mut_slice()[k] = x;
            if pat_plus != base_pattern || pat_minus != base_pattern {
                kinks += 1;
                continue;
            }
            break relative_error(grad.as_slice()[k], (plus - minus) / (2.0 * h));
        };
        let g = &mut groups[slot];
        g.cases += 1;
        g.max_rel_error = g.max_rel_error.max(err);
    }

    Ok(GradCheckReport {
        max_rel_error: groups.iter().map(|g| g.max_rel_error).fold(0.0, f64::max),
        groups,
        kinks_skipped: kinks,
    })
}
