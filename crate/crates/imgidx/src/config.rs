//! The JSON configuration file.
//!
//! Every section is optional and falls back to its defaults; unknown keys are
//! rejected. Command-line flags override values read from the file.

use std::path::Path;

use imgidx_core::assembler::AssemblyOptions;
use imgidx_core::index_embed::IndexEmbedConfig;
use imgidx_core::model::ModelConfig;
use imgidx_core::mrope::RopeConfig;
use imgidx_core::probe::ProbeSpec;
use imgidx_core::GridShape;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    /// Used by `dump-rope`.
    pub rope: RopeConfig,
    /// Used by `dump-index`.
    pub index_embed: IndexEmbedConfig,
    pub assemble: AssembleSpec,
    pub model: ModelConfig,
    pub gradcheck: GradCheckSection,
    pub probe: ProbeSpec,
}

/// Input of `assemble`: image grids and sequence options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssembleSpec {
    pub grids: Vec<GridShape>,
    pub channels: usize,
    pub separator_width: usize,
    pub text_len: usize,
    pub options: AssemblyOptions,
    pub index_embed: IndexEmbedConfig,
}

impl Default for AssembleSpec {
    fn default() -> Self {
        let g = GridShape {
            frames: 1,
            height: 2,
            width: 2,
        };
        Self {
            grids: vec![g, g],
            channels: 32,
            separator_width: 1,
            text_len: 0,
            options: AssemblyOptions::default(),
            index_embed: IndexEmbedConfig::default(),
        }
    }
}

/// Settings of the gradient-check instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradCheckSection {
    pub images: usize,
    pub text_len: usize,
    pub samples_per_block: usize,
    /// Overrides the precision's default step.
    pub eps: Option<f64>,
    /// Overrides the precision's default weight std.
    pub init_std: Option<f64>,
}

impl Default for GradCheckSection {
    fn default() -> Self {
        Self {
            images: 3,
            text_len: 2,
            samples_per_block: 32,
            eps: None,
            init_std: None,
        }
    }
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::BadInput(format!("invalid config: {e}")))
    }

    /// Defaults when `path` is `None`.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                Self::parse(&text).map_err(|e| CliError::BadInput(format!("{}: {e}", p.display())))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_sections_fill_defaults() {
        let c = FileConfig::parse(r#"{"rope": {"base": 100.0}, "probe": {"steps": 10}}"#).unwrap();
        assert_eq!(c.rope.base, 100.0);
        assert_eq!(c.rope.axes_dim, RopeConfig::default().axes_dim);
        assert_eq!(c.probe.steps, 10);
        assert_eq!(c.probe.vocab, 64);
        assert_eq!(c.model, ModelConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(FileConfig::parse(r#"{"rope": {"bsae": 1.0}}"#).is_err());
        assert!(FileConfig::parse(r#"{"ropes": {}}"#).is_err());
        assert!(FileConfig::parse("{not json").is_err());
    }

    #[test]
    fn round_trip() {
        let c = FileConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(FileConfig::parse(&text).unwrap(), c);
    }
}
