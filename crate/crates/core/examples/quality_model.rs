//! Builds PSNR and SSIM quality ladders for a built-in image and maps a few
//! rates to quality.

use semcov::harness::synthetic;
use semcov::semantics::{
    build_quality_model, map_rate_to_quality, QualityMetric, DEFAULT_PSNR_CAP, DEFAULT_THRESHOLDS,
};

fn main() -> semcov::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "clouds".into());
    let img = synthetic(&name)
        .ok_or_else(|| semcov::Error::Config(format!("no built-in image {name:?}")))?;
    for metric in [QualityMetric::Psnr, QualityMetric::Ssim] {
        let model = build_quality_model(&img, metric, DEFAULT_PSNR_CAP, &DEFAULT_THRESHOLDS)?;
        print!("{model}");
        let side = 30.0;
        for rate in [0.5, 2.0, 8.0, 30.0, 120.0] {
            println!(
                "  rate {rate:>6.1} over a {side} m square -> q {:.4}",
                map_rate_to_quality(&model, rate, side)
            );
        }
    }
    Ok(())
}
