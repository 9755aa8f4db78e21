use serde::{Deserialize, Serialize};

use crate::{Error, Liveness, Result};

/// Weighted sum of the depth and texture SVM scores, thresholded.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FusionRule {
    /// `(w_tfbd, w_spmt)`.
    pub weights: [f64; 2],
    pub threshold: f64,
}

impl Default for FusionRule {
    fn default() -> Self {
        FusionRule {
            weights: [0.5, 0.5],
            threshold: 0.0,
        }
    }
}

impl FusionRule {
    pub fn new(weights: [f64; 2], threshold: f64) -> Result<Self> {
        let rule = FusionRule { weights, threshold };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<()> {
        let [a, b] = self.weights;
        if !(a >= 0.0 && b >= 0.0) || ((a + b) - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "fusion weights must be non-negative and sum to 1, got ({a}, {b})"
            )));
        }
        if !self.threshold.is_finite() {
            return Err(Error::invalid("fusion threshold must be finite"));
        }
        Ok(())
    }

    pub fn classify(&self, score: f64) -> Liveness {
        if score >= self.threshold {
            Liveness::Live
        } else {
            Liveness::Fake
        }
    }
}

/// Returns the fused score and its label (live iff fused ≥ threshold).
pub fn fuse(tfbd: f64, spmt: f64, rule: &FusionRule) -> (f64, Liveness) {
    let fused = rule.weights[0] * tfbd + rule.weights[1] * spmt;
    (fused, rule.classify(fused))
}
