use serde::{Deserialize, Serialize};

use crate::semantics::{QualityMetric, DEFAULT_PSNR_CAP, DEFAULT_THRESHOLDS};
use crate::{Error, Result};

/// Static description of a run. Every field maps 1:1 to a top-level key of the
/// TOML config file; omitted keys take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Side of the square network area, meters.
    pub area_side: f64,
    pub num_uavs: usize,
    pub num_bs: usize,
    pub num_channels: usize,
    /// Discrete per-channel transmit power levels, watts.
    pub power_levels: Vec<f64>,
    /// Bounds on a UAV's total power across channels, watts.
    pub p_min: f64,
    pub p_max: f64,
    /// Noise power per channel, watts.
    pub noise: f64,
    /// Path-loss exponent.
    pub alpha: f64,
    pub uav_altitude: f64,
    pub bs_altitude: f64,
    /// Ground positions of the BSs; spread along the horizontal midline when absent.
    pub bs_positions: Option<Vec<[f64; 2]>>,
    /// Uniform range for observation square sides, meters.
    pub side_range: [f64; 2],
    /// Uniform range for UAV speeds, m/s (before `velocity_scale`).
    pub speed_range: [f64; 2],
    pub velocity_scale: f64,
    /// Explicit per-UAV overrides of the sampled values.
    pub sides: Option<Vec<f64>>,
    pub speeds: Option<Vec<f64>>,
    pub circle_centers: Option<Vec<[f64; 2]>>,
    pub phases: Option<Vec<f64>>,
    pub directions: Option<Vec<i8>>,
    /// Slot duration, seconds.
    pub slot_duration: f64,
    pub steps_per_episode: usize,
    /// Observation history length (frames).
    pub history: usize,
    /// `synthetic:<name>` for a built-in test image, otherwise a path to a P5 PGM.
    pub image: String,
    /// Metric used for the training reward. Evaluation always uses PSNR.
    pub reward_metric: QualityMetric,
    pub psnr_cap: f64,
    /// Rate-density lower edges for bit depths 1..=8, bits/s/Hz/m^2.
    pub thresholds: Vec<f64>,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            area_side: 100.0,
            num_uavs: 8,
            num_bs: 2,
            num_channels: 3,
            power_levels: vec![0.0, 5.0, 10.0],
            p_min: 0.0,
            p_max: 10.0,
            noise: 1e-9,
            alpha: 2.0,
            uav_altitude: 20.0,
            bs_altitude: 0.0,
            bs_positions: None,
            side_range: [20.0, 40.0],
            speed_range: [10.0, 20.0],
            velocity_scale: 1.0,
            sides: None,
            speeds: None,
            circle_centers: None,
            phases: None,
            directions: None,
            slot_duration: 0.1,
            steps_per_episode: 100,
            history: 4,
            image: "synthetic:gradient".into(),
            reward_metric: QualityMetric::Psnr,
            psnr_cap: DEFAULT_PSNR_CAP,
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    /// Cuts per-UAV override lists down to `num_uavs` entries. Shorter lists
    /// are left alone and rejected by [`validate`](Self::validate).
    pub fn trim_overrides(&mut self) {
        let n = self.num_uavs;
        fn cut<T>(v: &mut Option<Vec<T>>, n: usize) {
            if let Some(v) = v {
                v.truncate(n);
            }
        }
        cut(&mut self.sides, n);
        cut(&mut self.speeds, n);
        cut(&mut self.circle_centers, n);
        cut(&mut self.phases, n);
        cut(&mut self.directions, n);
    }

    /// Ground BS positions, explicit or evenly spread on `y = side/2`.
    pub fn station_xy(&self) -> Vec<[f64; 2]> {
        match &self.bs_positions {
            Some(p) => p.clone(),
            None => (0..self.num_bs)
                .map(|k| {
                    [
                        self.area_side * (k as f64 + 0.5) / self.num_bs as f64,
                        self.area_side / 2.0,
                    ]
                })
                .collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.num_uavs == 0 || self.num_bs == 0 || self.num_channels == 0 {
            return fail("num_uavs, num_bs and num_channels must be >= 1".into());
        }
        if !(self.area_side > 0.0) {
            return fail("area_side must be positive".into());
        }
        if self.power_levels.is_empty() || self.power_levels.iter().any(|p| !(*p >= 0.0)) {
            return fail("power_levels must be nonempty and nonnegative".into());
        }
        if self.p_min > self.p_max {
            return fail(format!("p_min {} exceeds p_max {}", self.p_min, self.p_max));
        }
        if !(self.noise > 0.0) || !(self.alpha >= 0.0) {
            return fail("noise must be positive and alpha nonnegative".into());
        }
        if !(self.uav_altitude > 0.0) || self.uav_altitude == self.bs_altitude {
            return fail("uav_altitude must be positive and differ from bs_altitude".into());
        }
        if self.steps_per_episode == 0 || self.history == 0 {
            return fail("steps_per_episode and history must be >= 1".into());
        }
        if !(self.slot_duration > 0.0) || !(self.velocity_scale > 0.0) {
            return fail("slot_duration and velocity_scale must be positive".into());
        }
        if !(self.side_range[0] > 0.0 && self.side_range[0] <= self.side_range[1]) {
            return fail("side_range must be positive and ordered".into());
        }
        if !(self.speed_range[0] > 0.0 && self.speed_range[0] <= self.speed_range[1]) {
            return fail("speed_range must be positive and ordered".into());
        }
        if self.station_xy().len() != self.num_bs {
            return fail("bs_positions length must equal num_bs".into());
        }
        let n = self.num_uavs;
        let lens = [
            ("sides", self.sides.as_ref().map(Vec::len)),
            ("speeds", self.speeds.as_ref().map(Vec::len)),
            ("circle_centers", self.circle_centers.as_ref().map(Vec::len)),
            ("phases", self.phases.as_ref().map(Vec::len)),
            ("directions", self.directions.as_ref().map(Vec::len)),
        ];
        for (name, len) in lens {
            if let Some(len) = len {
                if len != n {
                    return fail(format!("{name} has {len} entries, expected num_uavs = {n}"));
                }
            }
        }
        if let Some(d) = &self.directions {
            if d.iter().any(|x| *x != 1 && *x != -1) {
                return fail("directions must be +1 or -1".into());
            }
        }
        if let Some(s) = &self.sides {
            if s.iter().any(|x| !(*x > 0.0)) {
                return fail("sides must be positive".into());
            }
        }
        if let Some(s) = &self.speeds {
            if s.iter().any(|x| !(*x > 0.0)) {
                return fail("speeds must be positive".into());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip_through_toml() {
        let c = ScenarioConfig::default();
        assert_eq!(ScenarioConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn toml_overrides_and_rejects_unknown_keys() {
        let c =
            ScenarioConfig::from_toml("num_uavs = 2\nnum_channels = 1\nreward_metric = \"ssim\"\n")
                .unwrap();
        assert_eq!(c.num_uavs, 2);
        assert_eq!(c.num_channels, 1);
        assert_eq!(c.reward_metric, QualityMetric::Ssim);
        assert_eq!(c.power_levels, vec![0.0, 5.0, 10.0]);
        assert!(ScenarioConfig::from_toml("num_drones = 3").is_err());
    }

    #[test]
    fn default_stations() {
        let c = ScenarioConfig::default();
        assert_eq!(c.station_xy(), vec![[25.0, 50.0], [75.0, 50.0]]);
        let one = ScenarioConfig { num_bs: 1, ..c };
        assert_eq!(one.station_xy(), vec![[50.0, 50.0]]);
    }

    #[test]
    fn validation_catches_bad_values() {
        let ok = ScenarioConfig::default();
        ok.validate().unwrap();
        assert!(ScenarioConfig {
            p_min: 20.0,
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(ScenarioConfig {
            history: 0,
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(ScenarioConfig {
            sides: Some(vec![30.0]),
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(ScenarioConfig {
            directions: Some(vec![2; 8]),
            ..ok.clone()
        }
        .validate()
        .is_err());
        assert!(ScenarioConfig {
            uav_altitude: 0.0,
            ..ok
        }
        .validate()
        .is_err());
    }
}
