use crate::codebook::{encode_bovw, AverageFace, Codebook};
use crate::geometry::{build_abstract_face, KeypointPair, StereoRig};
use crate::pyramid::spmt_descriptor;
use crate::registration::{tfbd_descriptor, RegistrationConfig, TemplateFace};
use crate::texture::{crop_and_normalize, mslbp_face, BoundingBox, FaceCrop, GrayImage, MslbpFeatureFace};
use crate::{Error, Result};

/// Crops the face around its right-image landmarks.
pub fn face_crop(right: &GrayImage, kps: &[KeypointPair], expansion: f64) -> Result<FaceCrop> {
    let bbox = BoundingBox::from_points(kps.iter().map(|k| [k.ur, k.vr]))
        .ok_or_else(|| Error::invalid("no landmarks to crop around"))?;
    crop_and_normalize(right, &bbox, expansion)
}

pub fn mslbp_from_image(right: &GrayImage, kps: &[KeypointPair], expansion: f64) -> Result<MslbpFeatureFace> {
    Ok(mslbp_face(&face_crop(right, kps, expansion)?))
}

/// Trained components needed to turn a sample into its two descriptors.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureModels {
    pub template: TemplateFace,
    pub codebook: Codebook,
    pub live_average: AverageFace,
    pub fake_average: AverageFace,
    pub registration: RegistrationConfig,
    pub expansion: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleFeatures {
    pub tfbd: Vec<f64>,
    pub spmt: Vec<f64>,
}

impl FeatureModels {
    pub fn tfbd(&self, rig: &StereoRig, kps: &[KeypointPair]) -> Result<Vec<f64>> {
        let face = build_abstract_face(rig, kps)?;
        Ok(tfbd_descriptor(&face, &self.template, &self.registration)?.0)
    }

    pub fn spmt_from_mslbp(&self, face: &MslbpFeatureFace) -> Result<Vec<f64>> {
        let code = encode_bovw(face, &self.codebook);
        Ok(spmt_descriptor(&code, &self.live_average, &self.fake_average)?.0)
    }

    pub fn spmt(&self, right: &GrayImage, kps: &[KeypointPair]) -> Result<Vec<f64>> {
        self.spmt_from_mslbp(&mslbp_from_image(right, kps, self.expansion)?)
    }
}
