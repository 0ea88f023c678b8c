//! Image quality as a function of uplink rate density.
//!
//! A reference image is quantized at every bit depth from 1 to 8. Each depth
//! is scored against the original (PSNR normalized by a cap, or SSIM) and
//! bound to a rate-density bucket; the resulting step function maps
//! `rate / side^2` to a quality in `[0, 1]`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || width * height != pixels.len() {
            return Err(Error::InvalidImage(format!(
                "{width}x{height} does not match {} pixels",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    fn same_dims(&self, other: &GrayImage) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }
}

/// Truncates each pixel to `bits` significant bits and reconstructs at the
/// bin midpoint. `bits == 8` is the identity.
pub fn quantize(img: &GrayImage, bits: u32) -> Result<GrayImage> {
    if !(1..=8).contains(&bits) {
        return Err(Error::BitDepth(bits));
    }
    if bits == 8 {
        return Ok(img.clone());
    }
    let shift = 8 - bits;
    let half = 1u16 << (shift - 1);
    let pixels = img
        .pixels
        .iter()
        .map(|&p| ((((p as u16) >> shift) << shift) + half).min(255) as u8)
        .collect();
    Ok(GrayImage { pixels, ..*img })
}

/// Peak signal-to-noise ratio in dB; identical images give `f64::INFINITY`.
pub fn psnr(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    a.same_dims(b)?;
    let sse: u64 = a
        .pixels
        .iter()
        .zip(&b.pixels)
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            (d * d) as u64
        })
        .sum();
    if sse == 0 {
        return Ok(f64::INFINITY);
    }
    let mse = sse as f64 / a.pixels.len() as f64;
    Ok(10.0 * (255.0 * 255.0 / mse).log10())
}

const SSIM_BLOCK: usize = 8;
const SSIM_C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
const SSIM_C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

/// Mean SSIM over non-overlapping 8x8 blocks (partial edge blocks skipped).
pub fn ssim(a: &GrayImage, b: &GrayImage) -> Result<f64> {
    a.same_dims(b)?;
    if a.width < SSIM_BLOCK || a.height < SSIM_BLOCK {
        return Err(Error::ImageTooSmall(a.width, a.height));
    }
    let n = (SSIM_BLOCK * SSIM_BLOCK) as f64;
    let mut total = 0.0;
    let mut blocks = 0usize;
    for by in (0..=a.height - SSIM_BLOCK).step_by(SSIM_BLOCK) {
        for bx in (0..=a.width - SSIM_BLOCK).step_by(SSIM_BLOCK) {
            let (mut sa, mut sb) = (0.0, 0.0);
            for y in by..by + SSIM_BLOCK {
                for x in bx..bx + SSIM_BLOCK {
                    sa += a.at(x, y) as f64;
                    sb += b.at(x, y) as f64;
                }
            }
            let (ma, mb) = (sa / n, sb / n);
            let (mut vaa, mut vbb, mut vab) = (0.0, 0.0, 0.0);
            for y in by..by + SSIM_BLOCK {
                for x in bx..bx + SSIM_BLOCK {
                    let da = a.at(x, y) as f64 - ma;
                    let db = b.at(x, y) as f64 - mb;
                    vaa += da * da;
                    vbb += db * db;
                    vab += da * db;
                }
            }
            let (vaa, vbb, vab) = (vaa / n, vbb / n, vab / n);
            let num = (2.0 * ma * mb + SSIM_C1) * (2.0 * vab + SSIM_C2);
            let den = (ma * ma + mb * mb + SSIM_C1) * (vaa + vbb + SSIM_C2);
            total += num / den;
            blocks += 1;
        }
    }
    Ok(total / blocks as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum QualityMetric {
    #[default]
    Psnr,
    Ssim,
}

impl fmt::Display for QualityMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QualityMetric::Psnr => "psnr",
            QualityMetric::Ssim => "ssim",
        })
    }
}

impl std::str::FromStr for QualityMetric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "psnr" => Ok(QualityMetric::Psnr),
            "ssim" => Ok(QualityMetric::Ssim),
            other => Err(Error::Config(format!("unknown quality metric {other:?}"))),
        }
    }
}

pub const BIT_DEPTHS: usize = 8;

pub const DEFAULT_THRESHOLDS: [f64; BIT_DEPTHS] =
    [0.001, 0.002, 0.004, 0.008, 0.016, 0.032, 0.064, 0.128];

pub const DEFAULT_PSNR_CAP: f64 = 50.0;

/// Step function from rate density (bits/s/Hz per m^2) to quality.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityModel {
    pub metric: QualityMetric,
    /// Ascending lower edges; bucket `b` (1-based) starts at `thresholds[b-1]`.
    pub thresholds: Vec<f64>,
    /// Quality of bit depth `b` at index `b-1`.
    pub qualities: Vec<f64>,
    pub cap: f64,
}

impl QualityModel {
    /// Builds a model directly from per-depth qualities.
    pub fn from_parts(
        metric: QualityMetric,
        thresholds: Vec<f64>,
        qualities: Vec<f64>,
        cap: f64,
    ) -> Result<Self> {
        if thresholds.is_empty() || thresholds.len() != qualities.len() {
            return Err(Error::QualityModel(
                "thresholds and qualities must be nonempty and equal length".into(),
            ));
        }
        if thresholds.windows(2).any(|w| !(w[0] < w[1]))
            || !thresholds.iter().all(|t| t.is_finite())
        {
            return Err(Error::QualityModel(
                "thresholds must be finite and strictly increasing".into(),
            ));
        }
        if qualities.iter().any(|q| !(0.0..=1.0).contains(q)) {
            return Err(Error::QualityModel("qualities must lie in [0, 1]".into()));
        }
        if qualities.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::QualityModel(format!(
                "qualities not nondecreasing in bit depth: {qualities:?}"
            )));
        }
        if *qualities.last().unwrap() != 1.0 {
            return Err(Error::QualityModel(
                "top bucket quality must be exactly 1".into(),
            ));
        }
        Ok(Self {
            metric,
            thresholds,
            qualities,
            cap,
        })
    }

    pub fn depths(&self) -> usize {
        self.qualities.len()
    }

    /// Quality of bit depth `bits` (1-based).
    pub fn quality_of(&self, bits: usize) -> f64 {
        self.qualities[bits - 1]
    }
}

pub fn build_quality_model(
    img: &GrayImage,
    metric: QualityMetric,
    cap: f64,
    thresholds: &[f64],
) -> Result<QualityModel> {
    if thresholds.len() != BIT_DEPTHS {
        return Err(Error::QualityModel(format!(
            "expected {BIT_DEPTHS} thresholds, got {}",
            thresholds.len()
        )));
    }
    if !(cap > 0.0) {
        return Err(Error::QualityModel("psnr cap must be positive".into()));
    }
    let qualities = (1..=BIT_DEPTHS as u32)
        .map(|b| {
            let q = quantize(img, b)?;
            Ok(match metric {
                QualityMetric::Psnr => psnr(&q, img)?.min(cap) / cap,
                QualityMetric::Ssim => ssim(&q, img)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    QualityModel::from_parts(metric, thresholds.to_vec(), qualities, cap)
}

/// `0` below the first threshold, else the quality of the highest bucket whose
/// lower edge is at or below `rate / side^2`.
pub fn map_rate_to_quality(model: &QualityModel, rate: f64, side: f64) -> f64 {
    let density = rate / (side * side);
    let bucket = model.thresholds.partition_point(|&t| t <= density);
    if bucket == 0 {
        0.0
    } else {
        model.qualities[bucket - 1]
    }
}

impl fmt::Display for QualityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "metric: {}  cap: {} dB", self.metric, self.cap)?;
        writeln!(f, "bits  min_density(bits/s/Hz/m^2)  quality")?;
        for (b, (t, q)) in self.thresholds.iter().zip(&self.qualities).enumerate() {
            writeln!(f, "{:>4}  {:>28}  {:.6}", b + 1, t, q)?;
        }
        Ok(())
    }
}
