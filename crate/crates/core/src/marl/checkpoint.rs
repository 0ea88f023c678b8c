//! Checkpoint directories.
//!
//! ```text
//! manifest.json      counters, epsilon, RNG cursors, configs, scenario hash
//! online_<i>.bin     agent parameters (approximator param-file format)
//! target_<i>.bin     target-network parameters
//! adam_<i>.bin       Adam moments: m then v, f64 little-endian
//! replay.json        replay memory, oldest first
//! ```

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{EpsilonSchedule, ReplayMemory, Trainer, TrainingConfig};
use crate::approximator::{load_params, save_params, AdamState, Network};
use crate::env::{EnvOptions, Scenario};
use crate::rng::{cursor, restore, Cursor};
use crate::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    scenario_hash: String,
    seed: u64,
    options: EnvOptions,
    config: TrainingConfig,
    episodes_done: usize,
    env_steps: u64,
    train_steps: u64,
    epsilon: EpsilonSchedule,
    adam_steps: Vec<u64>,
    explore: Vec<Cursor>,
    replay: Cursor,
}

/// SHA-256 over the scenario config and both quality tables.
pub fn scenario_hash(s: &Scenario) -> String {
    let mut h = Sha256::new();
    h.update(s.config.to_toml().as_bytes());
    for m in [&s.eval_model, &s.reward_model] {
        h.update(
            format!(
                "{:?}|{:?}|{:?}|{:?}",
                m.metric, m.thresholds, m.qualities, m.cap
            )
            .as_bytes(),
        );
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn encode_adam(st: &AdamState) -> Vec<u8> {
    st.m.iter()
        .chain(&st.v)
        .flat_map(|x| x.to_le_bytes())
        .collect()
}

fn decode_adam(bytes: &[u8], len: usize, t: u64) -> Result<AdamState> {
    if bytes.len() != 16 * len {
        return Err(bad(format!(
            "adam file holds {} bytes, expected {}",
            bytes.len(),
            16 * len
        )));
    }
    let vals: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(AdamState {
        m: vals[..len].to_vec(),
        v: vals[len..].to_vec(),
        t,
    })
}

impl Trainer {
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (i, ((on, tg), st)) in self
            .online
            .iter()
            .zip(&self.target)
            .zip(&self.adam)
            .enumerate()
        {
            save_params(&dir.join(format!("online_{i}.bin")), on)?;
            save_params(&dir.join(format!("target_{i}.bin")), tg)?;
            write(&dir.join(format!("adam_{i}.bin")), encode_adam(st))?;
        }
        let replay = serde_json::to_vec(&self.memory).map_err(|e| bad(e.to_string()))?;
        write(&dir.join("replay.json"), replay)?;
        let manifest = Manifest {
            version: CHECKPOINT_VERSION,
            scenario_hash: scenario_hash(&self.scenario),
            seed: self.seed,
            options: self.options,
            config: self.config.clone(),
            episodes_done: self.episodes_done,
            env_steps: self.env_steps,
            train_steps: self.train_steps,
            epsilon: self.epsilon,
            adam_steps: self.adam.iter().map(|a| a.t).collect(),
            explore: self.explore.iter().map(cursor).collect(),
            replay: cursor(&self.replay_rng),
        };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| bad(e.to_string()))?;
        write(&dir.join("manifest.json"), text)
    }

    /// Rebuilds a trainer saved by [`Trainer::save`]. The scenario must
    /// hash to the one the checkpoint was taken on.
    pub fn resume(dir: &Path, scenario: Arc<Scenario>) -> Result<Self> {
        let manifest: Manifest = serde_json::from_slice(&read(&dir.join("manifest.json"))?)
            .map_err(|e| bad(e.to_string()))?;
        if manifest.version != CHECKPOINT_VERSION {
            return Err(bad(format!(
                "unsupported checkpoint version {}",
                manifest.version
            )));
        }
        if manifest.scenario_hash != scenario_hash(&scenario) {
            return Err(bad("checkpoint was taken on a different scenario"));
        }
        let n = scenario.num_uavs();
        if manifest.explore.len() != n || manifest.adam_steps.len() != n {
            return Err(bad("agent count does not match the scenario"));
        }
        let load = |name: String| -> Result<Network> { load_params(&dir.join(name)) };
        let online = (0..n)
            .map(|i| load(format!("online_{i}.bin")))
            .collect::<Result<Vec<_>>>()?;
        let target = (0..n)
            .map(|i| load(format!("target_{i}.bin")))
            .collect::<Result<Vec<_>>>()?;
        let adam = online
            .iter()
            .enumerate()
            .map(|(i, net)| {
                decode_adam(
                    &read(&dir.join(format!("adam_{i}.bin")))?,
                    net.num_params(),
                    manifest.adam_steps[i],
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let memory: ReplayMemory = serde_json::from_slice(&read(&dir.join("replay.json"))?)
            .map_err(|e| bad(e.to_string()))?;
        Ok(Self {
            scenario,
            options: manifest.options,
            config: manifest.config,
            seed: manifest.seed,
            online,
            target,
            adam,
            memory,
            epsilon: manifest.epsilon,
            explore: manifest.explore.iter().map(restore).collect(),
            replay_rng: restore(&manifest.replay),
            episodes_done: manifest.episodes_done,
            env_steps: manifest.env_steps,
            train_steps: manifest.train_steps,
        })
    }
}
