use std::f64::consts::TAU;

use rand::Rng;

use super::ScenarioConfig;
use crate::rng::{substream, Stream};

/// One UAV's circular path, traversed exactly once per episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: (f64, f64),
    pub radius: f64,
    pub phase: f64,
    /// Magnitude of the angular speed, rad/s.
    pub omega: f64,
    /// `+1` counter-clockwise, `-1` clockwise.
    pub direction: f64,
}

impl Circle {
    pub fn position(&self, seconds: f64) -> (f64, f64) {
        let angle = self.phase + self.direction * self.omega * seconds;
        (
            self.center.0 + self.radius * angle.cos(),
            self.center.1 + self.radius * angle.sin(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryModel {
    pub circles: Vec<Circle>,
    pub slot_duration: f64,
}

impl TrajectoryModel {
    pub fn position(&self, uav: usize, slot: usize) -> (f64, f64) {
        self.circles[uav].position(slot as f64 * self.slot_duration)
    }
}

/// Per-run draws: observation sides and trajectories. Sampled once from the
/// scenario stream and frozen for every episode. Explicit config lists
/// override the draws (which are still consumed so other UAVs keep theirs).
pub(crate) fn sample_run(config: &ScenarioConfig) -> (Vec<f64>, TrajectoryModel) {
    let mut rng = substream(config.seed, Stream::Scenario, 0);
    let period = config.steps_per_episode as f64 * config.slot_duration;
    let max_radius = (config.area_side / 2.0 - 1.0).max(0.0);
    let mut sides = Vec::with_capacity(config.num_uavs);
    let mut circles = Vec::with_capacity(config.num_uavs);
    for i in 0..config.num_uavs {
        let side = rng.gen_range(config.side_range[0]..=config.side_range[1]);
        let speed = rng.gen_range(config.speed_range[0]..=config.speed_range[1]);
        let u_cx: f64 = rng.gen();
        let u_cy: f64 = rng.gen();
        let phase = rng.gen_range(0.0..TAU);
        let direction = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };

        let side = config.sides.as_ref().map_or(side, |s| s[i]);
        let speed = config.speeds.as_ref().map_or(speed, |s| s[i]) * config.velocity_scale;
        let radius = (speed * period / TAU).min(max_radius);
        let center = match &config.circle_centers {
            Some(c) => (c[i][0], c[i][1]),
            None => {
                let span = config.area_side - 2.0 * radius;
                (radius + u_cx * span, radius + u_cy * span)
            }
        };
        sides.push(side);
        circles.push(Circle {
            center,
            radius,
            phase: config.phases.as_ref().map_or(phase, |p| p[i]),
            omega: TAU / period,
            direction: config
                .directions
                .as_ref()
                .map_or(direction, |d| d[i] as f64),
        });
    }
    (
        sides,
        TrajectoryModel {
            circles,
            slot_duration: config.slot_duration,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_full_circle_per_episode() {
        let config = ScenarioConfig::default();
        let (_, traj) = sample_run(&config);
        for i in 0..config.num_uavs {
            let a = traj.position(i, 0);
            let b = traj.position(i, config.steps_per_episode);
            assert!((a.0 - b.0).abs() < 1e-6 && (a.1 - b.1).abs() < 1e-6);
        }
    }

    #[test]
    fn circles_fit_inside_area() {
        for seed in 0..20 {
            let config = ScenarioConfig {
                seed,
                velocity_scale: 3.0,
                ..Default::default()
            };
            let (sides, traj) = sample_run(&config);
            for (c, d) in traj.circles.iter().zip(&sides) {
                assert!(c.radius <= 49.0);
                assert!(c.center.0 - c.radius >= 0.0 && c.center.0 + c.radius <= 100.0);
                assert!(c.center.1 - c.radius >= 0.0 && c.center.1 + c.radius <= 100.0);
                assert!((20.0..=40.0).contains(d));
            }
        }
    }

    #[test]
    fn radius_follows_speed() {
        let config = ScenarioConfig {
            num_uavs: 1,
            speeds: Some(vec![15.0]),
            ..Default::default()
        };
        let (_, traj) = sample_run(&config);
        assert!((traj.circles[0].radius - 15.0 * 10.0 / TAU).abs() < 1e-12);
    }

    #[test]
    fn start_point_is_center_plus_radius_at_phase() {
        let config = ScenarioConfig {
            num_uavs: 1,
            phases: Some(vec![0.7]),
            circle_centers: Some(vec![[50.0, 40.0]]),
            ..Default::default()
        };
        let (_, traj) = sample_run(&config);
        let c = traj.circles[0];
        let (x, y) = traj.position(0, 0);
        assert_eq!(
            (x, y),
            (
                50.0 + c.radius * 0.7f64.cos(),
                40.0 + c.radius * 0.7f64.sin()
            )
        );
    }
}
