use crate::assembler::{AssemblyOptions, SeparatorPositions};
use crate::error::{bail, Result};
use crate::index_embed::IndexEmbedConfig;
use crate::mrope::RopeConfig;

/// Which sequence mechanisms are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ModelFlags {
    pub use_separator: bool,
    pub use_index_embed: bool,
    pub use_rope: bool,
    /// When false the separator keeps its initial values (gradient discarded).
    pub train_separator: bool,
}

impl Default for ModelFlags {
    fn default() -> Self {
        Self::full()
    }
}

impl ModelFlags {
    pub const fn full() -> Self {
        Self {
            use_separator: true,
            use_index_embed: true,
            use_rope: true,
            train_separator: true,
        }
    }

    pub const fn none() -> Self {
        Self {
            use_separator: false,
            use_index_embed: false,
            use_rope: false,
            train_separator: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ModelConfig {
    pub vocab: usize,
    pub channels: usize,
    pub heads: usize,
    pub head_dim: usize,
    pub layers: usize,
    pub ffn_hidden: usize,
    pub rope: RopeConfig,
    pub index_embed: IndexEmbedConfig,
    pub flags: ModelFlags,
    pub separator_width: usize,
    pub trailing_separator: bool,
    pub separator_positions: SeparatorPositions,
    pub init_std: f64,
    /// Std of the token-embedding rows. Kept separate from `init_std` so
    /// image content is not swamped by the unit-amplitude index embedding.
    pub embed_init_std: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            vocab: 64,
            channels: 32,
            heads: 4,
            head_dim: 8,
            layers: 2,
            ffn_hidden: 64,
            rope: RopeConfig {
                axes_dim: [4, 2, 2],
                base: 10_000.0,
            },
            index_embed: IndexEmbedConfig {
                tau: 10_000.0,
                channels: 32,
            },
            flags: ModelFlags::full(),
            separator_width: 1,
            trailing_separator: true,
            separator_positions: SeparatorPositions::Unrotated,
            init_std: 0.02,
            embed_init_std: 1.0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.vocab < 2 {
            bail!(Config, "vocab must be >= 2");
        }
        if self.heads == 0 || self.head_dim == 0 || self.channels != self.heads * self.head_dim {
            bail!(
                Config,
                "channels ({}) must equal heads ({}) x head_dim ({})",
                self.channels,
                self.heads,
                self.head_dim
            );
        }
        if self.layers == 0 {
            bail!(Config, "layers must be >= 1");
        }
        if self.ffn_hidden == 0 {
            bail!(Config, "ffn_hidden must be >= 1");
        }
        self.rope.validate()?;
        if self.rope.head_dim() != self.head_dim {
            bail!(
                Config,
                "rotary axes sum to {} but head_dim is {}",
                self.rope.head_dim(),
                self.head_dim
            );
        }
        self.index_embed.validate()?;
        if self.index_embed.channels != self.channels {
            bail!(
                Config,
                "index embedding width {} differs from channels {}",
                self.index_embed.channels,
                self.channels
            );
        }
        if self.separator_width == 0 {
            bail!(Config, "separator_width must be >= 1");
        }
        for (name, v) in [("init_std", self.init_std), ("embed_init_std", self.embed_init_std)] {
            if !(v >= 0.0) || !v.is_finite() {
                bail!(Config, "{name} must be finite and >= 0");
            }
        }
        Ok(())
    }

    pub fn with_flags(&self, flags: ModelFlags) -> Self {
        Self {
            flags,
            ..self.clone()
        }
    }

    pub fn assembly_options(&self) -> AssemblyOptions {
        AssemblyOptions {
            use_separator: self.flags.use_separator,
            use_index_embed: self.flags.use_index_embed,
            trailing_separator: self.trailing_separator,
            separator_positions: self.separator_positions,
        }
    }
}
