//! Face anti-spoofing features from a calibrated binocular camera pair.
//!
//! Two descriptors are computed per face:
//!
//! * a 68-d depth descriptor: stereo landmarks are triangulated, depths are
//!   centered, and the resulting `[x, y, depth]` keypoint set is registered to
//!   a template face with a trimmed similarity ICP ([`registration`]);
//! * a 3328-d micro-texture descriptor: multi-scale uniform LBP labels are
//!   quantized against a 256-word codebook and summarized by a two-level
//!   spatial pyramid of code histograms and matching-degree vectors against
//!   class-average code faces ([`texture`], [`codebook`], [`pyramid`]).
//!
//! Each descriptor feeds an RBF SVM and the two decision values are fused
//! ([`classifier`]). [`pipeline`] wires everything to files on disk and
//! includes a synthetic stereo-face generator.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod classifier;
pub mod codebook;
mod error;
pub mod fvec;
pub mod geometry;
pub mod pipeline;
pub mod pyramid;
pub mod registration;
pub mod texture;

pub use error::{Error, Result};

use serde::{Deserialize, Serialize};

/// Ground-truth class of a sample: a live face or a presentation attack.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Liveness {
    Live,
    Fake,
}

impl Liveness {
    /// SVM target: `+1` for live, `-1` for fake.
    pub fn sign(self) -> f64 {
        match self {
            Liveness::Live => 1.0,
            Liveness::Fake => -1.0,
        }
    }

    pub fn from_sign(value: f64) -> Self {
        if value >= 0.0 {
            Liveness::Live
        } else {
            Liveness::Fake
        }
    }
}

impl std::fmt::Display for Liveness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Liveness::Live => "live",
            Liveness::Fake => "fake",
        })
    }
}
