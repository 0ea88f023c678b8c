//! Experiment plumbing: config files, image ingestion, seeded sweeps and
//! CSV results.
//!
//! An experiment file is TOML. Scenario keys sit at the top level (one per
//! [`ScenarioConfig`] field); optional `[training]` and `[sweep]` tables
//! hold [`TrainingConfig`] and [`SweepSpec`].
//!
//! ```toml
//! num_uavs = 2
//! num_channels = 2
//! image = "synthetic:clouds"
//!
//! [training]
//! train_episodes = 200
//!
//! [sweep]
//! variable = "channels"
//! values = [1, 2, 3]
//! seeds = [0, 1, 2]
//! methods = ["SAMA", "HU"]
//! ```

pub mod cli;
pub mod images;
pub mod pgm;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use images::{image_id, resolve_image, synthetic, SYNTHETIC_IMAGES};
pub use pgm::{load_image, parse_pgm, save_image};

use crate::baselines::bo_configure;
use crate::env::{Env, EnvOptions, Scenario, ScenarioConfig};
use crate::marl::{run_training, TrainingConfig, TrainingOutcome};
use crate::policy::{episode_objectives, HuPolicy};
use crate::semantics::QualityMetric;
use crate::{Error, Result};

/// Fixed results header.
pub const RESULTS_HEADER: &str =
    "method,sweep_var,sweep_value,seed,image,objective_mean,objective_std";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "SAMA", alias = "sama")]
    Sama,
    #[serde(rename = "BO", alias = "bo")]
    Bo,
    #[serde(rename = "HU", alias = "hu")]
    Hu,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Sama => "SAMA",
            Method::Bo => "BO",
            Method::Hu => "HU",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SAMA" => Ok(Method::Sama),
            "BO" => Ok(Method::Bo),
            "HU" => Ok(Method::Hu),
            _ => Err(Error::Config(format!(
                "unknown method {s:?} (SAMA, BO or HU)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepVariable {
    Channels,
    Uavs,
    VelocityScale,
    RewardMetric,
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepVariable::Channels => "channels",
            SweepVariable::Uavs => "uavs",
            SweepVariable::VelocityScale => "velocity-scale",
            SweepVariable::RewardMetric => "reward-metric",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepValue {
    Int(i64),
    Float(f64),
    Text(String),
}

impl fmt::Display for SweepValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepValue::Int(v) => write!(f, "{v}"),
            SweepValue::Float(v) => write!(f, "{v}"),
            SweepValue::Text(v) => f.write_str(v),
        }
    }
}

impl SweepValue {
    fn as_f64(&self) -> Option<f64> {
        match self {
            SweepValue::Int(v) => Some(*v as f64),
            SweepValue::Float(v) => Some(*v),
            SweepValue::Text(_) => None,
        }
    }

    fn as_count(&self) -> Option<usize> {
        match self {
            SweepValue::Int(v) if *v >= 1 => Some(*v as usize),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub values: Vec<SweepValue>,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    /// Image specs; empty means the scenario's own `image`.
    #[serde(default)]
    pub images: Vec<String>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() || self.seeds.is_empty() || self.methods.is_empty() {
            return Err(Error::Config(
                "sweep values, seeds and methods must be nonempty".into(),
            ));
        }
        Ok(())
    }

    /// Applies one sweep value to a scenario config.
    pub fn apply(&self, base: &ScenarioConfig, value: &SweepValue) -> Result<ScenarioConfig> {
        let mut c = base.clone();
        let bad = || {
            Error::Config(format!(
                "sweep value {value} does not fit variable {}",
                self.variable
            ))
        };
        match self.variable {
            SweepVariable::Channels => c.num_channels = value.as_count().ok_or_else(bad)?,
            SweepVariable::Uavs => {
                c.num_uavs = value.as_count().ok_or_else(bad)?;
                c.trim_overrides();
            }
            SweepVariable::VelocityScale => c.velocity_scale = value.as_f64().ok_or_else(bad)?,
            SweepVariable::RewardMetric => {
                c.reward_metric = match value {
                    SweepValue::Text(t) => t.parse().map_err(|_| bad())?,
                    _ => return Err(bad()),
                }
            }
        }
        Ok(c)
    }
}

/// A parsed experiment file.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub training: TrainingConfig,
    pub sweep: Option<SweepSpec>,
    /// Directory relative image paths resolve against.
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let bad = |e: toml::de::Error| Error::Config(e.to_string());
        let mut table: toml::Table = text.parse().map_err(bad)?;
        let training = match table.remove("training") {
            Some(v) => v.try_into().map_err(bad)?,
            None => TrainingConfig::default(),
        };
        let sweep = table
            .remove("sweep")
            .map(|v| v.try_into())
            .transpose()
            .map_err(bad)?;
        let scenario: ScenarioConfig = toml::Value::Table(table).try_into().map_err(bad)?;
        scenario.validate()?;
        training.validate()?;
        if let Some(s) = &sweep {
            SweepSpec::validate(s)?;
        }
        Ok(Self {
            scenario,
            training,
            sweep,
            base_dir: base_dir.to_path_buf(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.scenario.seed = seed;
        self
    }

    pub fn build_scenario(&self) -> Result<Arc<Scenario>> {
        build_scenario(&self.scenario, &self.base_dir)
    }
}

pub fn build_scenario(config: &ScenarioConfig, base_dir: &Path) -> Result<Arc<Scenario>> {
    let image = resolve_image(&config.image, base_dir)?;
    Ok(Arc::new(Scenario::new(config.clone(), &image)?))
}

/// Env options a method trains and is evaluated with.
pub fn method_options(method: Method, scenario: &Scenario) -> EnvOptions {
    match method {
        Method::Bo => bo_configure(scenario),
        Method::Sama | Method::Hu => EnvOptions::default(),
    }
}

/// Trains a learning method with the scenario's seed.
pub fn train_method(
    method: Method,
    scenario: Arc<Scenario>,
    training: &TrainingConfig,
) -> Result<TrainingOutcome> {
    if method == Method::Hu {
        return Err(Error::Config("HU is not a learning method".into()));
    }
    let options = method_options(method, &scenario);
    let seed = scenario.config.seed;
    run_training(scenario, options, training.clone(), seed)
}

/// Per-episode test objectives of one method on one scenario.
pub fn evaluate_method(
    method: Method,
    scenario: Arc<Scenario>,
    training: &TrainingConfig,
) -> Result<Vec<f64>> {
    match method {
        Method::Hu => {
            let mut env = Env::new(scenario, EnvOptions::default())?;
            episode_objectives(&mut HuPolicy, &mut env, training.test_episodes.max(1))
        }
        _ => {
            let out = train_method(method, scenario, training)?;
            Ok(out
                .metrics
                .iter()
                .filter(|m| m.phase == crate::marl::Phase::Test)
                .map(|m| m.objective)
                .collect())
        }
    }
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: Method,
    pub sweep_var: SweepVariable,
    pub sweep_value: String,
    pub seed: u64,
    pub image: String,
    /// Mean and population std of test-episode objectives, or the error.
    pub outcome: std::result::Result<(f64, f64), String>,
}

impl ResultRow {
    pub fn objective_mean(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|o| o.0)
    }
}

#[derive(Debug, Clone)]
struct Job {
    order: (usize, usize, usize, usize),
    method: Method,
    value: SweepValue,
    seed: u64,
    image: String,
}

/// Every (method, value, seed, image) run. Failures become error rows; rows
/// come back in spec order regardless of `workers`.
pub fn run_sweep(
    spec: &SweepSpec,
    exp: &ExperimentConfig,
    workers: usize,
) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let images = if spec.images.is_empty() {
        vec![exp.scenario.image.clone()]
    } else {
        spec.images.clone()
    };
    let mut jobs = Vec::new();
    for (mi, &method) in spec.methods.iter().enumerate() {
        for (vi, value) in spec.values.iter().enumerate() {
            for (si, &seed) in spec.seeds.iter().enumerate() {
                for (ii, image) in images.iter().enumerate() {
                    jobs.push(Job {
                        order: (mi, vi, si, ii),
                        method,
                        value: value.clone(),
                        seed,
                        image: image.clone(),
                    });
                }
            }
        }
    }
    let run = |job: &Job| -> (JobOrder, ResultRow) {
        let outcome = (|| {
            let mut config = spec.apply(&exp.scenario, &job.value)?;
            config.seed = job.seed;
            config.image = job.image.clone();
            let scenario = build_scenario(&config, &exp.base_dir)?;
            let objectives = evaluate_method(job.method, scenario, &exp.training)?;
            if objectives.is_empty() {
                return Err(Error::Config("no test episodes".into()));
            }
            Ok(mean_std(&objectives))
        })()
        .map_err(|e: Error| e.to_string());
        (
            job.order,
            ResultRow {
                method: job.method,
                sweep_var: spec.variable,
                sweep_value: job.value.to_string(),
                seed: job.seed,
                image: image_id(&job.image),
                outcome,
            },
        )
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let mut rows: Vec<(JobOrder, ResultRow)> = pool.install(|| jobs.par_iter().map(run).collect());
    rows.sort_by_key(|r| r.0);
    Ok(rows.into_iter().map(|r| r.1).collect())
}

type JobOrder = (usize, usize, usize, usize);

/// Serializes rows under [`RESULTS_HEADER`]. Failed runs carry `ERROR` in
/// the mean column and the message in the std column.
pub fn results_csv_bytes(rows: &[ResultRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RESULTS_HEADER.split(','))?;
    for r in rows {
        let (mean, std) = match &r.outcome {
            Ok((m, s)) => (m.to_string(), s.to_string()),
            Err(e) => ("ERROR".to_string(), e.clone()),
        };
        w.write_record([
            r.method.to_string(),
            r.sweep_var.to_string(),
            r.sweep_value.clone(),
            r.seed.to_string(),
            r.image.clone(),
            mean,
            std,
        ])?;
    }
    w.into_inner()
        .map_err(|e| Error::Config(format!("csv buffer: {}", e.error())))
}

pub fn write_results_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    std::fs::write(path, results_csv_bytes(rows)?).map_err(|e| Error::io(path, e))
}

/// Parses a file written by [`write_results_csv`].
pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let field = |k: usize| rec.get(k).unwrap_or_default().to_string();
        let parse_f = |k: usize| -> Result<f64> {
            field(k)
                .parse()
                .map_err(|_| Error::Config(format!("bad number in results row: {:?}", field(k))))
        };
        let var: SweepVariable = toml::Value::String(field(1))
            .try_into()
            .map_err(|_| Error::Config(format!("unknown sweep variable {:?}", field(1))))?;
        let outcome = if field(5) == "ERROR" {
            Err(field(6))
        } else {
            Ok((parse_f(5)?, parse_f(6)?))
        };
        rows.push(ResultRow {
            method: field(0).parse()?,
            sweep_var: var,
            sweep_value: field(2),
            seed: field(3)
                .parse()
                .map_err(|_| Error::Config(format!("bad seed {:?}", field(3))))?,
            image: field(4),
            outcome,
        });
    }
    Ok(rows)
}

/// Quality model of the configured image under `metric`.
pub fn quality_table(
    exp: &ExperimentConfig,
    metric: QualityMetric,
) -> Result<crate::semantics::QualityModel> {
    let image = resolve_image(&exp.scenario.image, &exp.base_dir)?;
    crate::semantics::build_quality_model(
        &image,
        metric,
        exp.scenario.psnr_cap,
        &exp.scenario.thresholds,
    )
}
