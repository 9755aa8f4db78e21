use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::{FusionRule, SvmParams};
use crate::registration::RegistrationConfig;
use crate::texture::DEFAULT_EXPANSION;
use crate::{Error, Result};

use super::synth::SynthConfig;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CodebookConfig {
    pub k: usize,
    pub max_iters: usize,
    /// Number of training feature faces pooled for clustering.
    pub sample_faces: usize,
}

impl Default for CodebookConfig {
    fn default() -> Self {
        CodebookConfig {
            k: crate::codebook::CODEBOOK_SIZE,
            max_iters: 100,
            sample_faces: 3000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    #[serde(flatten)]
    pub params: SvmParams,
    pub grid_search: bool,
    pub holdout_fraction: f64,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            params: SvmParams::default(),
            grid_search: false,
            holdout_fraction: 0.25,
        }
    }
}

/// Everything `train`/`eval`/`predict` need besides the data itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Root seed; every stage derives its own seed from it.
    pub seed: u64,
    pub expansion: f64,
    pub registration: RegistrationConfig,
    pub codebook: CodebookConfig,
    pub svm: SvmConfig,
    pub fusion: FusionRule,
    pub synth: SynthConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            expansion: DEFAULT_EXPANSION,
            registration: RegistrationConfig::default(),
            codebook: CodebookConfig::default(),
            svm: SvmConfig::default(),
            fusion: FusionRule::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: PipelineConfig = super::io::read_json(path)?;
        cfg.validate().map_err(|e| Error::file(path, e))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.expansion >= 1.0) || !self.expansion.is_finite() {
            return Err(Error::invalid(format!(
                "expansion factor must be >= 1, got {}",
                self.expansion
            )));
        }
        self.registration.validate()?;
        if self.codebook.sample_faces == 0 {
            return Err(Error::invalid("codebook.sample_faces must be positive"));
        }
        self.fusion.validate()?;
        self.synth.validate()
    }
}
