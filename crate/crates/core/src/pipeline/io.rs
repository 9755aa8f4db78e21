//! JSON schemas for calibration, landmark and model files, plus image IO.

use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::codebook::{AverageFace, BovwCodeFace};
use crate::geometry::{order_keypoints, CameraIntrinsics, KeypointPair, StereoRig};
use crate::texture::GrayImage;
use crate::{Error, Liveness, Result};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::file(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::file(path, e))
}

/// `{"left": {..}, "right": {..}, "E": [9 row-major], "V": [3], "unit": "mm"}`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFile {
    pub left: CameraIntrinsics,
    pub right: CameraIntrinsics,
    #[serde(rename = "E")]
    pub rotation: [f64; 9],
    #[serde(rename = "V")]
    pub translation: [f64; 3],
    #[serde(default = "default_unit")]
    pub unit: String,
}

fn default_unit() -> String {
    "mm".to_string()
}

impl CalibrationFile {
    pub fn from_rig(rig: &StereoRig, unit: &str) -> Self {
        let r = rig.rotation();
        let mut rotation = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                rotation[i * 3 + j] = r[(i, j)];
            }
        }
        let t = rig.translation();
        CalibrationFile {
            left: *rig.left(),
            right: *rig.right(),
            rotation,
            translation: [t.x, t.y, t.z],
            unit: unit.to_string(),
        }
    }

    pub fn rig(&self) -> Result<StereoRig> {
        StereoRig::compose(
            self.left,
            self.right,
            Matrix3::from_row_slice(&self.rotation),
            Vector3::from(self.translation),
        )
    }
}

pub fn load_calibration(path: &Path) -> Result<StereoRig> {
    let cal: CalibrationFile = read_json(path)?;
    cal.rig().map_err(|e| Error::file(path, e))
}

/// `{"points": [{"i": 1..68, "ul", "vl", "ur", "vr"}, ...]}`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandmarkFile {
    pub points: Vec<KeypointPair>,
}

/// Loads a landmark file and returns its 68 keypoints in index order.
pub fn load_landmarks(path: &Path) -> Result<Vec<KeypointPair>> {
    let file: LandmarkFile = read_json(path)?;
    if let Some(bad) = file
        .points
        .iter()
        .find(|p| ![p.ul, p.vl, p.ur, p.vr].iter().all(|v| v.is_finite()))
    {
        return Err(Error::file(path, format!("keypoint {} has non-finite coordinates", bad.index)));
    }
    order_keypoints(&file.points).map_err(|e| Error::file(path, e))
}

pub fn load_gray(path: &Path) -> Result<GrayImage> {
    let img = image::open(path).map_err(|e| Error::file(path, e))?;
    GrayImage::from_dynamic(&img).map_err(|e| Error::file(path, e))
}

pub fn save_gray_png(path: &Path, img: &GrayImage) -> Result<()> {
    image::save_buffer_with_format(
        path,
        img.data(),
        img.width() as u32,
        img.height() as u32,
        image::ExtendedColorType::L8,
        image::ImageFormat::Png,
    )
    .map_err(|e| Error::file(path, e))
}

/// Average code face on disk: class tag plus a row-major grid of codes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AverageFaceFile {
    pub class: Liveness,
    pub count: usize,
    pub width: usize,
    pub height: usize,
    pub grid: Vec<Vec<u8>>,
}

impl From<&AverageFace> for AverageFaceFile {
    fn from(avg: &AverageFace) -> Self {
        AverageFaceFile {
            class: avg.class,
            count: avg.count,
            width: avg.face.width,
            height: avg.face.height,
            grid: avg.face.codes.chunks(avg.face.width).map(<[u8]>::to_vec).collect(),
        }
    }
}

impl TryFrom<AverageFaceFile> for AverageFace {
    type Error = Error;

    fn try_from(f: AverageFaceFile) -> Result<Self> {
        if f.grid.len() != f.height || f.grid.iter().any(|row| row.len() != f.width) {
            return Err(Error::invalid("average face grid does not match its declared size"));
        }
        Ok(AverageFace {
            class: f.class,
            count: f.count,
            face: BovwCodeFace::new(f.width, f.height, f.grid.concat())?,
        })
    }
}
