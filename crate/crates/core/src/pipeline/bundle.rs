use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classifier::{FusionRule, Standardizer, SvmModel};
use crate::codebook::{AverageFace, Codebook};
use crate::registration::TemplateFace;
use crate::{Error, Liveness, Result};

use super::features::FeatureModels;
use super::io::{read_json, write_json, AverageFaceFile};
use super::PipelineConfig;

pub const TEMPLATE_FILE: &str = "template.json";
pub const CODEBOOK_FILE: &str = "codebook.json";
pub const AVG_POS_FILE: &str = "avg_pos.json";
pub const AVG_NEG_FILE: &str = "avg_neg.json";
pub const SVM_TFBD_FILE: &str = "svm_tfbd.json";
pub const SVM_SPMT_FILE: &str = "svm_spmt.json";
pub const FUSION_FILE: &str = "fusion.json";
pub const SCALER_TFBD_FILE: &str = "scaler_tfbd.json";
pub const SCALER_SPMT_FILE: &str = "scaler_spmt.json";
pub const PROVENANCE_FILE: &str = "provenance.json";

pub const BUNDLE_FILES: [&str; 10] = [
    TEMPLATE_FILE,
    CODEBOOK_FILE,
    AVG_POS_FILE,
    AVG_NEG_FILE,
    SVM_TFBD_FILE,
    SVM_SPMT_FILE,
    FUSION_FILE,
    SCALER_TFBD_FILE,
    SCALER_SPMT_FILE,
    PROVENANCE_FILE,
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub crate_version: String,
    pub seed: u64,
    pub config: PipelineConfig,
    /// SHA-256 of the serialized config.
    pub config_hash: String,
    /// Samples used per split.
    pub counts: BTreeMap<String, usize>,
    /// Fingerprints of the splits the bundle was built from.
    pub split_hashes: BTreeMap<String, String>,
    pub codebook_iterations: usize,
    pub codebook_inertia: f64,
    pub svm_tfbd_params: (f64, f64),
    pub svm_spmt_params: (f64, f64),
}

/// Everything produced by training.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelBundle {
    pub models: FeatureModels,
    pub svm_tfbd: SvmModel,
    pub svm_spmt: SvmModel,
    pub scaler_tfbd: Standardizer,
    pub scaler_spmt: Standardizer,
    pub fusion: FusionRule,
    pub provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct TemplateFile {
    points: Vec<[f64; 3]>,
}

impl ModelBundle {
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        write_json(
            &dir.join(TEMPLATE_FILE),
            &TemplateFile {
                points: self.models.template.points.clone(),
            },
        )?;
        write_json(&dir.join(CODEBOOK_FILE), &self.models.codebook)?;
        write_json(&dir.join(AVG_POS_FILE), &AverageFaceFile::from(&self.models.live_average))?;
        write_json(&dir.join(AVG_NEG_FILE), &AverageFaceFile::from(&self.models.fake_average))?;
        write_json(&dir.join(SVM_TFBD_FILE), &self.svm_tfbd)?;
        write_json(&dir.join(SVM_SPMT_FILE), &self.svm_spmt)?;
        write_json(&dir.join(FUSION_FILE), &self.fusion)?;
        write_json(&dir.join(SCALER_TFBD_FILE), &self.scaler_tfbd)?;
        write_json(&dir.join(SCALER_SPMT_FILE), &self.scaler_spmt)?;
        write_json(&dir.join(PROVENANCE_FILE), &self.provenance)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        for name in BUNDLE_FILES {
            let p = dir.join(name);
            if !p.is_file() {
                return Err(Error::file(p, "bundle file missing"));
            }
        }
        let template: TemplateFile = read_json(&dir.join(TEMPLATE_FILE))?;
        let template = TemplateFace::new(template.points).map_err(|e| Error::file(dir.join(TEMPLATE_FILE), e))?;
        let codebook: Codebook = read_json(&dir.join(CODEBOOK_FILE))?;
        let codebook = Codebook::new(codebook.words, codebook.seed)
            .map_err(|e| Error::file(dir.join(CODEBOOK_FILE), e))?;
        let load_avg = |name: &str, class: Liveness| -> Result<AverageFace> {
            let path = dir.join(name);
            let avg = AverageFace::try_from(read_json::<AverageFaceFile>(&path)?)
                .map_err(|e| Error::file(&path, e))?;
            if avg.class != class {
                return Err(Error::file(path, format!("expected a {class} average face")));
            }
            Ok(avg)
        };
        let live_average = load_avg(AVG_POS_FILE, Liveness::Live)?;
        let fake_average = load_avg(AVG_NEG_FILE, Liveness::Fake)?;
        let provenance: Provenance = read_json(&dir.join(PROVENANCE_FILE))?;
        let fusion: FusionRule = read_json(&dir.join(FUSION_FILE))?;
        fusion.validate().map_err(|e| Error::file(dir.join(FUSION_FILE), e))?;
        let bundle = ModelBundle {
            models: FeatureModels {
                template,
                codebook,
                live_average,
                fake_average,
                registration: provenance.config.registration,
                expansion: provenance.config.expansion,
            },
            svm_tfbd: read_json(&dir.join(SVM_TFBD_FILE))?,
            svm_spmt: read_json(&dir.join(SVM_SPMT_FILE))?,
            scaler_tfbd: read_json(&dir.join(SCALER_TFBD_FILE))?,
            scaler_spmt: read_json(&dir.join(SCALER_SPMT_FILE))?,
            fusion,
            provenance,
        };
        bundle.check_dims().map_err(|e| Error::file(dir, e))?;
        Ok(bundle)
    }

    fn check_dims(&self) -> Result<()> {
        for (scaler, svm) in [(&self.scaler_tfbd, &self.svm_tfbd), (&self.scaler_spmt, &self.svm_spmt)] {
            if scaler.dim() != svm.dim || scaler.scale.len() != scaler.mean.len() {
                return Err(Error::DimensionMismatch {
                    expected: svm.dim,
                    found: scaler.dim(),
                });
            }
            if svm.support_vectors.len() != svm.coefficients.len()
                || svm.support_vectors.iter().any(|sv| sv.len() != svm.dim)
            {
                return Err(Error::invalid("SVM support vectors do not match its dimension"));
            }
        }
        Ok(())
    }
}
