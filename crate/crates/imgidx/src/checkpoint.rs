//! Trained-model checkpoints as versioned JSON.
//!
//! Floats are written in shortest round-trip form and parsed with exact
//! decimal conversion, so a read-back checkpoint is bit-identical.

use std::path::Path;

use imgidx_core::model::{ModelConfig, OptState, Params};
use imgidx_core::probe::{AblationConfig, TrainedRun};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const CHECKPOINT_FORMAT: &str = "imgidx-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub arm: AblationConfig,
    pub seed: u64,
    pub model: ModelConfig,
    pub params: Params<f64>,
    pub opt: OptState<f64>,
    pub curve: Vec<(usize, f64)>,
}

impl Checkpoint {
    pub fn from_run(run: &TrainedRun) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            arm: run.config,
            seed: run.seed,
            model: run.model.clone(),
            params: run.params.clone(),
            opt: run.opt.clone(),
            curve: run.curve.clone(),
        }
    }

    pub fn into_run(self) -> TrainedRun {
        TrainedRun {
            config: self.arm,
            seed: self.seed,
            model: self.model,
            params: self.params,
            opt: self.opt,
            curve: self.curve,
        }
    }

    pub fn file_name(arm: AblationConfig, seed: u64) -> String {
        let arm = arm.name().replace(['+', '-'], "_");
        format!("{arm}_seed{seed}.json")
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| CliError::BadInput(format!("checkpoint not serializable: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint =
            serde_json::from_str(text).map_err(|e| CliError::BadInput(format!("invalid checkpoint: {e}")))?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(CliError::BadInput(format!("not a checkpoint (format {:?})", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(CliError::BadInput(format!(
                "checkpoint version {} unsupported (expected {CHECKPOINT_VERSION})",
                ck.version
            )));
        }
        if !ck.params.matches(&ck.model) || !ck.opt.m.matches(&ck.model) || !ck.opt.v.matches(&ck.model) {
            return Err(CliError::BadInput("checkpoint shapes do not match its model config".into()));
        }
        Ok(ck)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| CliError::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text)
    }
}
