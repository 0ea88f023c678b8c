//! Six synthetic 256x256 test scenes. Copies ship in `assets/` as P5 files.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::pgm::load_image;
use crate::semantics::GrayImage;
use crate::{Error, Result};

pub const SIZE: usize = 256;

pub const SYNTHETIC_IMAGES: [&str; 6] = [
    "gradient",
    "radial",
    "checker-fine",
    "checker-coarse",
    "noise",
    "clouds",
];

const NOISE_SEED: u64 = 0x5eed_0001;

fn from_fn(f: impl Fn(usize, usize) -> f64) -> GrayImage {
    let px = (0..SIZE * SIZE)
        .map(|k| f(k % SIZE, k / SIZE).round().clamp(0.0, 255.0) as u8)
        .collect();
    GrayImage::new(SIZE, SIZE, px).expect("size matches")
}

/// Uniform sensor grain in `[-amp, amp)`, one value per pixel.
fn grain(seed: u64, amp: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..SIZE * SIZE).map(|_| rng.gen_range(-amp..amp)).collect()
}

/// `f` plus grain, so no scene is perfectly smooth.
fn grainy(seed: u64, f: impl Fn(usize, usize) -> f64) -> GrayImage {
    let g = grain(seed, GRAIN);
    from_fn(|x, y| f(x, y) + g[y * SIZE + x])
}

const GRAIN: f64 = 12.0;

/// Checkerboard whose tiles carry opposite shading ramps.
fn checker(tile: usize, seed: u64) -> GrayImage {
    grainy(seed, |x, y| {
        let ramp = ((x % tile) + (y % tile)) as f64 / (2 * tile - 2) as f64;
        if (x / tile + y / tile) % 2 == 0 {
            20.0 + 100.0 * ramp
        } else {
            235.0 - 100.0 * ramp
        }
    })
}

/// Bilinear interpolation of a random coarse grid plus fine grain.
fn clouds() -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(NOISE_SEED + 1);
    let cells = 16;
    let grid: Vec<f64> = (0..(cells + 1) * (cells + 1))
        .map(|_| rng.gen_range(0.0..255.0))
        .collect();
    let grain = grain(NOISE_SEED + 2, GRAIN);
    let step = SIZE as f64 / cells as f64;
    from_fn(|x, y| {
        let (gx, gy) = (x as f64 / step, y as f64 / step);
        let (i, j) = (gx as usize, gy as usize);
        let (fx, fy) = (gx - i as f64, gy - j as f64);
        let at = |a: usize, b: usize| grid[b * (cells + 1) + a];
        let top = at(i, j) * (1.0 - fx) + at(i + 1, j) * fx;
        let bottom = at(i, j + 1) * (1.0 - fx) + at(i + 1, j + 1) * fx;
        top * (1.0 - fy) + bottom * fy + grain[y * SIZE + x]
    })
}

pub fn synthetic(name: &str) -> Option<GrayImage> {
    Some(match name {
        "gradient" => grainy(NOISE_SEED + 3, |x, y| (x + y) as f64 / 2.0),
        "radial" => grainy(NOISE_SEED + 4, |x, y| {
            let (dx, dy) = (x as f64 - 127.5, y as f64 - 127.5);
            255.0 * (1.0 - (dx * dx + dy * dy).sqrt() / 181.0)
        }),
        "checker-fine" => checker(8, NOISE_SEED + 5),
        "checker-coarse" => checker(32, NOISE_SEED + 6),
        "noise" => {
            let mut rng = ChaCha8Rng::seed_from_u64(NOISE_SEED);
            GrayImage::new(SIZE, SIZE, (0..SIZE * SIZE).map(|_| rng.gen()).collect())
                .expect("size matches")
        }
        "clouds" => clouds(),
        _ => return None,
    })
}

/// `synthetic:<name>` or a P5 file path (relative paths against `base`).
pub fn resolve_image(spec: &str, base: &Path) -> Result<GrayImage> {
    match spec.strip_prefix("synthetic:") {
        Some(name) => synthetic(name).ok_or_else(|| {
            Error::Config(format!(
                "unknown synthetic image {name:?}; expected one of {SYNTHETIC_IMAGES:?}"
            ))
        }),
        None => load_image(&base.join(spec)),
    }
}

/// Short identifier for result rows.
pub fn image_id(spec: &str) -> String {
    match spec.strip_prefix("synthetic:") {
        Some(name) => name.to_string(),
        None => Path::new(spec)
            .file_stem()
            .map_or_else(|| spec.to_string(), |s| s.to_string_lossy().into_owned()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::pgm::parse_pgm;

    fn asset(name: &str) -> std::path::PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("assets")
            .join(format!("{name}.pgm"))
    }

    #[test]
    fn shipped_assets_match_generator() {
        for name in SYNTHETIC_IMAGES {
            let bytes = std::fs::read(asset(name)).unwrap();
            assert_eq!(
                parse_pgm(&bytes).unwrap(),
                synthetic(name).unwrap(),
                "{name}"
            );
        }
    }

    #[test]
    fn resolves_both_forms() {
        let base = Path::new(env!("CARGO_MANIFEST_DIR"));
        let a = resolve_image("synthetic:clouds", base).unwrap();
        let b = resolve_image("assets/clouds.pgm", base).unwrap();
        assert_eq!(a, b);
        assert!(resolve_image("synthetic:nope", base).is_err());
        assert_eq!(image_id("assets/clouds.pgm"), "clouds");
        assert_eq!(image_id("synthetic:noise"), "noise");
    }
}
