//! Uplink radio model: free-space path gains, strongest-gain BS association,
//! per-channel SINR and Shannon spectral efficiency.
//!
//! Rates are spectral efficiencies in bits/s/Hz summed over channels; no
//! bandwidth factor is applied. Interference for UAV `i` on channel `c` is
//! evaluated at `i`'s own associated BS and includes every other UAV that
//! transmits on `c`, whichever BS that UAV is associated with.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position3D {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn distance(&self, other: &Position3D) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// `distance^(-alpha)`.
pub fn path_gain(uav: &Position3D, bs: &Position3D, alpha: f64) -> Result<f64> {
    let d = uav.distance(bs);
    if d == 0.0 {
        return Err(Error::CoincidentPositions);
    }
    Ok(d.powf(-alpha))
}

/// Gains indexed `[uav][bs]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGainTable {
    gains: Vec<Vec<f64>>,
    pub alpha: f64,
}

impl PathGainTable {
    pub fn compute(uavs: &[Position3D], stations: &[Position3D], alpha: f64) -> Result<Self> {
        let gains = uavs
            .iter()
            .map(|u| {
                stations
                    .iter()
                    .map(|b| path_gain(u, b, alpha))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { gains, alpha })
    }

    /// Builds a table from raw gains. Rows must share one length.
    pub fn from_rows(gains: Vec<Vec<f64>>, alpha: f64) -> Result<Self> {
        let width = gains.first().map_or(0, Vec::len);
        if width == 0 || gains.iter().any(|r| r.len() != width) {
            return Err(Error::Shape(
                "gain table rows must be nonempty and equal length".into(),
            ));
        }
        Ok(Self { gains, alpha })
    }

    #[inline]
    pub fn get(&self, uav: usize, bs: usize) -> f64 {
        self.gains[uav][bs]
    }

    pub fn row(&self, uav: usize) -> &[f64] {
        &self.gains[uav]
    }

    pub fn num_uavs(&self) -> usize {
        self.gains.len()
    }

    pub fn num_bs(&self) -> usize {
        self.gains.first().map_or(0, Vec::len)
    }
}

/// Index of the BS with the highest gain; ties go to the lowest index.
pub fn associate_bs(gains: &PathGainTable, uav: usize) -> usize {
    let row = gains.row(uav);
    let mut best = 0;
    for (b, &g) in row.iter().enumerate().skip(1) {
        if g > row[best] {
            best = b;
        }
    }
    best
}

pub fn associate_all(gains: &PathGainTable) -> Vec<usize> {
    (0..gains.num_uavs())
        .map(|i| associate_bs(gains, i))
        .collect()
}

/// Transmit powers indexed `[uav][channel]`, in watts.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    powers: Vec<Vec<f64>>,
}

impl PowerAllocation {
    pub fn new(powers: Vec<Vec<f64>>) -> Result<Self> {
        let channels = powers.first().map_or(0, Vec::len);
        if channels == 0 || powers.iter().any(|r| r.len() != channels) {
            return Err(Error::Shape(
                "power rows must be nonempty and equal length".into(),
            ));
        }
        Ok(Self { powers })
    }

    pub fn zeros(uavs: usize, channels: usize) -> Self {
        Self {
            powers: vec![vec![0.0; channels]; uavs],
        }
    }

    #[inline]
    pub fn get(&self, uav: usize, channel: usize) -> f64 {
        self.powers[uav][channel]
    }

    pub fn set(&mut self, uav: usize, channel: usize, watts: f64) {
        self.powers[uav][channel] = watts;
    }

    pub fn row(&self, uav: usize) -> &[f64] {
        &self.powers[uav]
    }

    pub fn num_uavs(&self) -> usize {
        self.powers.len()
    }

    pub fn num_channels(&self) -> usize {
        self.powers.first().map_or(0, Vec::len)
    }

    pub fn total(&self, uav: usize) -> f64 {
        self.powers[uav].iter().sum()
    }

    /// Checks every entry is one of `levels` and every per-UAV total lies in
    /// `[p_min, p_max]`.
    pub fn satisfies(&self, levels: &[f64], p_min: f64, p_max: f64) -> bool {
        self.powers.iter().all(|row| {
            let total: f64 = row.iter().sum();
            row.iter().all(|p| levels.contains(p)) && total >= p_min && total <= p_max
        })
    }
}

pub fn sinr(
    uav: usize,
    channel: usize,
    alloc: &PowerAllocation,
    gains: &PathGainTable,
    assoc: &[usize],
    noise: f64,
) -> f64 {
    let p = alloc.get(uav, channel);
    if p == 0.0 {
        return 0.0;
    }
    let bs = assoc[uav];
    let mut interference = 0.0;
    for j in 0..alloc.num_uavs() {
        if j != uav {
            interference += alloc.get(j, channel) * gains.get(j, bs);
        }
    }
    p * gains.get(uav, bs) / (interference + noise)
}

/// Per-UAV aggregate spectral efficiency in bits/s/Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct RateVector(pub Vec<f64>);

impl RateVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

impl std::ops::Index<usize> for RateVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

pub fn rates(
    alloc: &PowerAllocation,
    gains: &PathGainTable,
    assoc: &[usize],
    noise: f64,
) -> RateVector {
    let n = alloc.num_uavs();
    let channels = alloc.num_channels();
    let mut out = vec![0.0; n];
    for (i, r) in out.iter_mut().enumerate() {
        for c in 0..channels {
            *r += (1.0 + sinr(i, c, alloc, gains, assoc, noise)).log2();
        }
    }
    RateVector(out)
}
