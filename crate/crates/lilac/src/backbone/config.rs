//! Denoiser architecture configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of the frozen denoiser.
///
/// `latent_channels` must be at least 12 so the latent space can carry a
/// 12-channel chroma probe; time lengths must divide by `2^(levels-1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackboneConfig {
    pub latent_channels: usize,
    pub levels: Vec<usize>,
    pub blocks_per_level: usize,
    pub embed_dim: usize,
    pub context_channels: usize,
    pub num_styles: usize,
    /// Nominal latent frame rate; metadata only.
    pub frame_rate_hz: f64,
}

impl Default for BackboneConfig {
    fn default() -> Self {
        BackboneConfig {
            latent_channels: 16,
            levels: vec![16, 32, 64],
            blocks_per_level: 1,
            embed_dim: 64,
            context_channels: 16,
            num_styles: 3,
            frame_rate_hz: 11.7,
        }
    }
}

impl BackboneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::Config("levels must be non-empty".into()));
        }
        if self.levels.iter().any(|&w| w == 0) {
            return Err(Error::Config(format!("level widths must be positive: {:?}", self.levels)));
        }
        if self.latent_channels < 12 {
            return Err(Error::Config(format!(
                "latent_channels {} must be >= 12 (chroma probe)",
                self.latent_channels
            )));
        }
        if self.blocks_per_level == 0 {
            return Err(Error::Config("blocks_per_level must be >= 1".into()));
        }
        if self.embed_dim == 0 {
            return Err(Error::Config("embed_dim must be >= 1".into()));
        }
        if self.context_channels == 0 {
            return Err(Error::Config("context_channels must be >= 1".into()));
        }
        if self.num_styles == 0 {
            return Err(Error::Config("num_styles must be >= 1".into()));
        }
        Ok(())
    }

    /// Total time compression at the bottleneck.
    pub fn downsample_factor(&self) -> usize {
        1 << (self.levels.len() - 1)
    }

    pub fn validate_time_len(&self, t: usize) -> Result<()> {
        let f = self.downsample_factor();
        if t == 0 || t % f != 0 {
            return Err(Error::Contract(format!(
                "time length {t} must be a positive multiple of {f}"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        BackboneConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_small_latent_and_empty_levels() {
        let mut c = BackboneConfig { latent_channels: 8, ..Default::default() };
        assert!(c.validate().is_err());
        c.latent_channels = 16;
        c.levels = vec![];
        assert!(c.validate().is_err());
    }

    #[test]
    fn time_divisibility() {
        let c = BackboneConfig::default(); // 3 levels -> factor 4
        assert_eq!(c.downsample_factor(), 4);
        assert!(c.validate_time_len(32).is_ok());
        assert!(c.validate_time_len(30).is_err());
        assert!(c.validate_time_len(0).is_err());
    }
}
