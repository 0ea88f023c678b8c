//! Command-line entry point.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use super::{
    build_scenario, method_options, quality_table, run_sweep, write_results_csv, ExperimentConfig,
    Method,
};
use crate::approximator::gradcheck::{gradient_check, GradCheckConfig};
use crate::baselines::{oracle_episode, write_oracle_csv};
use crate::env::{write_trace_csv, Env, EnvOptions, TraceRecord};
use crate::marl::{write_metrics_csv, GreedyPolicy, Phase, Trainer};
use crate::policy::{HuPolicy, Policy};
use crate::semantics::QualityMetric;
use crate::validation::{run_acceptance, AcceptanceOptions};
use crate::{Error, Result};

/// Gradient checks above this relative error fail.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Parser)]
#[command(
    name = "semcov",
    version,
    about = "Semantic-aware multi-UAV uplink power allocation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a learner; writes metrics.csv and a checkpoint/ directory.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "SAMA")]
        method: Method,
    },
    /// Run greedy test episodes from a checkpoint (or HU); writes trace.csv.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "SAMA")]
        method: Method,
        /// Checkpoint directory; defaults to <out>/checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Run the config's [sweep]; writes results.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Exhaustive per-slot search over one episode; writes oracle.csv.
    Oracle {
        #[command(flatten)]
        common: Common,
    },
    /// Print the quality model built from the configured image.
    QualityTable {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        metric: Option<QualityMetric>,
    },
    /// Finite-difference check of the network gradients.
    Gradcheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100)]
        cases: usize,
    },
    /// Run the acceptance checks; writes acceptance.txt and acceptance.csv.
    Accept {
        #[command(flatten)]
        common: Common,
        /// Skip the learning checks.
        #[arg(long)]
        quick: bool,
    },
}

fn experiment(common: &Common) -> Result<ExperimentConfig> {
    let exp = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::from_toml("", Path::new("."))?,
    };
    Ok(match common.seed {
        Some(s) => exp.with_seed(s),
        None => exp,
    })
}

fn out_dir(common: &Common) -> Result<PathBuf> {
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn execute(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Train { common, method } => {
            let exp = experiment(&common)?;
            let out = out_dir(&common)?;
            let scenario = exp.build_scenario()?;
            if method == Method::Hu {
                return Err(Error::Config(
                    "HU does not train; use `eval --method HU`".into(),
                ));
            }
            let options = method_options(method, &scenario);
            let mut trainer =
                Trainer::new(scenario, options, exp.training.clone(), exp.scenario.seed)?;
            let mut rows = Vec::new();
            for _ in 0..exp.training.train_episodes {
                rows.push(trainer.train_episode()?);
            }
            let start = trainer.episodes_done();
            for k in 0..exp.training.test_episodes {
                rows.push(trainer.test_episode(start + k)?);
            }
            write_metrics_csv(&out.join("metrics.csv"), &rows)?;
            trainer.save(&out.join("checkpoint"))?;
            let test: Vec<f64> = rows
                .iter()
                .filter(|m| m.phase == Phase::Test)
                .map(|m| m.objective)
                .collect();
            if !test.is_empty() {
                println!(
                    "{method} test objective: {:.6}",
                    test.iter().sum::<f64>() / test.len() as f64
                );
            }
            println!("wrote {}", out.display());
            Ok(0)
        }
        Command::Eval {
            common,
            method,
            checkpoint,
            episodes,
        } => {
            let exp = experiment(&common)?;
            let out = out_dir(&common)?;
            let scenario = exp.build_scenario()?;
            let (mut policy, options): (Box<dyn Policy>, EnvOptions) = match method {
                Method::Hu => (Box::new(HuPolicy), EnvOptions::default()),
                _ => {
                    let dir = checkpoint.unwrap_or_else(|| out.join("checkpoint"));
                    let trainer = Trainer::resume(&dir, scenario.clone())?;
                    let options = *trainer.options();
                    let p: GreedyPolicy = trainer.policy();
                    (Box::new(p), options)
                }
            };
            let mut env = Env::new(scenario.clone(), options)?;
            let episodes = episodes.unwrap_or(exp.training.test_episodes).max(1);
            let mut records = Vec::new();
            let mut objective = 0.0;
            let mut slots = 0usize;
            for e in 0..episodes {
                let mut obs = env.reset()?;
                while !env.is_done() {
                    let slot = env.slot();
                    let joint = policy.act(&env, &obs)?;
                    let step = env.step(&joint)?;
                    objective += step.objective;
                    slots += 1;
                    records.push(TraceRecord {
                        episode: e,
                        slot,
                        actions: joint,
                        rates: step.rates.clone(),
                        reward: step.reward,
                    });
                    obs = step.observations;
                }
            }
            write_trace_csv(&out.join("trace.csv"), scenario.num_uavs(), &records)?;
            println!(
                "{method} mean objective over {episodes} episodes: {:.6}",
                objective / slots as f64
            );
            Ok(0)
        }
        Command::Sweep { common, workers } => {
            let exp = experiment(&common)?;
            let out = out_dir(&common)?;
            let spec = exp
                .sweep
                .clone()
                .ok_or_else(|| Error::Config("config has no [sweep] table".into()))?;
            let rows = run_sweep(&spec, &exp, workers)?;
            let path = out.join("results.csv");
            write_results_csv(&path, &rows)?;
            let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
            println!(
                "wrote {} ({} rows, {failed} failed)",
                path.display(),
                rows.len()
            );
            Ok(0)
        }
        Command::Oracle { common } => {
            let exp = experiment(&common)?;
            let out = out_dir(&common)?;
            let scenario = build_scenario(&exp.scenario, &exp.base_dir)?;
            let mut env = Env::new(scenario, EnvOptions::default())?;
            let slots = oracle_episode(&mut env)?;
            let path = out.join("oracle.csv");
            write_oracle_csv(&path, &slots)?;
            let mean = slots.iter().map(|s| s.choice.reward).sum::<f64>() / slots.len() as f64;
            println!("oracle mean per-slot reward: {mean:.6}");
            println!("wrote {}", path.display());
            Ok(0)
        }
        Command::QualityTable { common, metric } => {
            let exp = experiment(&common)?;
            let model = quality_table(&exp, metric.unwrap_or(exp.scenario.reward_metric))?;
            print!("{model}");
            Ok(0)
        }
        Command::Gradcheck { common, cases } => {
            let config = GradCheckConfig {
                cases,
                ..GradCheckConfig::standard(common.seed.unwrap_or(0))
            };
            let report = gradient_check(&config)?;
            for g in &report.groups {
                println!(
                    "{:<14} cases {:>3}  max rel error {:.3e}",
                    format!("{:?}", g.group),
                    g.cases,
                    g.max_rel_error
                );
            }
            println!(
                "max relative error: {:.3e} (tolerance {GRADCHECK_TOLERANCE:e})",
                report.max_rel_error
            );
            Ok(if report.passes(GRADCHECK_TOLERANCE) {
                0
            } else {
                1
            })
        }
        Command::Accept { common, quick } => {
            let out = out_dir(&common)?;
            let report = run_acceptance(&AcceptanceOptions {
                learning: !quick,
                ..Default::default()
            })?;
            let text = report.to_text();
            print!("{text}");
            fs::write(out.join("acceptance.txt"), &text)
                .map_err(|e| Error::io(out.join("acceptance.txt"), e))?;
            report.write_csv(&out.join("acceptance.csv"))?;
            Ok(if report.all_passed() { 0 } else { 1 })
        }
    }
}

/// Parses `argv` and runs the command. Returns the process exit code:
/// 0 on success, 1 on runtime errors, 2 on usage errors.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
