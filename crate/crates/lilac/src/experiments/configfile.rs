//! Experiment configuration file: TOML with [backbone], [train], [data],
//! [eval] sections mirroring the respective config structs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backbone::{BackboneConfig, SamplerConfig};
use crate::error::{Error, Result};
use crate::trainer::{bytes_digest, TrainConfig};

use super::data::DataConfig;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Held-out evaluation set size.
    pub samples: usize,
    /// Sampler steps during evaluation runs.
    pub sample_steps: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub rho: f64,
    pub cfg_weight: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            samples: 200,
            sample_steps: 15,
            sigma_min: 0.01,
            sigma_max: 10.0,
            rho: 7.0,
            cfg_weight: 1.0,
        }
    }
}

impl EvalConfig {
    pub fn sampler(&self) -> SamplerConfig {
        SamplerConfig {
            steps: self.sample_steps,
            sigma_min: self.sigma_min,
            sigma_max: self.sigma_max,
            rho: self.rho,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub backbone: BackboneConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
    pub eval: EvalConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.backbone.validate()?;
        self.train.validate()?;
        self.data.validate()?;
        self.backbone.validate_time_len(self.data.t_latent)?;
        if self.backbone.num_styles != self.data.num_styles {
            return Err(Error::Config(format!(
                "backbone.num_styles {} != data.num_styles {}",
                self.backbone.num_styles, self.data.num_styles
            )));
        }
        if self.backbone.latent_channels < 12 + self.data.num_styles {
            return Err(Error::Config(
                "latent_channels must fit 12 chroma rows plus one per style".into(),
            ));
        }
        if self.eval.samples == 0 || self.eval.sample_steps == 0 {
            return Err(Error::Config("eval.samples and eval.sample_steps must be >= 1".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Format(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_toml())?)
    }

    /// Digest over the canonical JSON form; stamped into checkpoints and
    /// report headers.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        bytes_digest(&json)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(back.digest(), cfg.digest());
    }

    #[test]
    fn partial_toml_fills_defaults() {
        let cfg = ExperimentConfig::from_toml(
            "[train]\nsteps = 500\n\n[data]\nn_samples = 50\n",
        )
        .unwrap();
        assert_eq!(cfg.train.steps, 500);
        assert_eq!(cfg.data.n_samples, 50);
        assert_eq!(cfg.backbone.latent_channels, 16);
        assert_ne!(cfg.digest(), ExperimentConfig::default().digest());
    }

    #[test]
    fn inconsistent_styles_rejected() {
        let text = "[backbone]\nnum_styles = 4\n";
        assert!(ExperimentConfig::from_toml(text).is_err());
    }

    #[test]
    fn bad_toml_is_format_error() {
        assert!(matches!(
            ExperimentConfig::from_toml("not toml ["),
            Err(Error::Format(_))
        ));
    }
}
