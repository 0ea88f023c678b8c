//! A tiny channel sweep from an inline experiment file, printed as CSV.

use std::path::Path;

use semcov::harness::{results_csv_bytes, run_sweep, ExperimentConfig};

const EXPERIMENT: &str = r#"
num_uavs = 3
num_bs = 1
steps_per_episode = 8
history = 2
image = "synthetic:radial"

[training]
recurrent_units = 8
dense_widths = [16]
batch_size = 8
train_episodes = 5
test_episodes = 2

[sweep]
variable = "channels"
values = [1, 2]
seeds = [0, 1]
methods = ["SAMA", "BO", "HU"]
"#;

fn main() -> semcov::Result<()> {
    let exp = ExperimentConfig::from_toml(EXPERIMENT, Path::new("."))?;
    let spec = exp.sweep.clone().expect("inline experiment has a sweep");
    let rows = run_sweep(&spec, &exp, 2)?;
    print!("{}", String::from_utf8_lossy(&results_csv_bytes(&rows)?));
    Ok(())
}
