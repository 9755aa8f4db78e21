use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Per-dimension standardization fitted on training features.
///
/// Dimensions with (near-)zero spread keep unit scale so they map to zero
/// instead of blowing up.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

const MIN_SCALE: f64 = 1e-12;

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Result<Self> {
        let first = x.first().ok_or_else(|| Error::invalid("cannot fit scaler on no samples"))?;
        let dim = first.len();
        let n = x.len() as f64;
        let mut mean = vec![0.0; dim];
        for v in x {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            for (m, f) in mean.iter_mut().zip(v) {
                *m += f;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for v in x {
            for ((s, f), m) in var.iter_mut().zip(v).zip(&mean) {
                *s += (f - m) * (f - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > MIN_SCALE { sd } else { 1.0 }
            })
            .collect();
        Ok(Standardizer { mean, scale })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: v.len(),
            });
        }
        Ok(v
            .iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((f, m), s)| (f - m) / s)
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_mean_unit_variance() {
        let x = vec![vec![1.0, 5.0], vec![3.0, 5.0]];
        let s = Standardizer::fit(&x).unwrap();
        assert_eq!(s.transform(&[1.0, 5.0]).unwrap(), vec![-1.0, 0.0]);
        assert_eq!(s.transform(&[3.0, 5.0]).unwrap(), vec![1.0, 0.0]);
        assert!(s.transform(&[1.0]).is_err());
    }
}
