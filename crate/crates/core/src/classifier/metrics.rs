use serde::{Deserialize, Serialize};

use crate::{Error, Liveness, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Score threshold producing this point (`None` for the origin).
    pub threshold: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub auc: f64,
    pub eer: f64,
    pub threshold: f64,
    pub roc: Vec<RocPoint>,
    pub live_scores: Vec<f64>,
    pub fake_scores: Vec<f64>,
}

/// ROC over every distinct score (live predicted iff score ≥ threshold),
/// trapezoidal AUC, EER by linear interpolation along the ROC polyline, and
/// accuracy at `threshold`.
pub fn evaluate(scores: &[f64], labels: &[Liveness], threshold: f64) -> Result<EvalReport> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            found: labels.len(),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::invalid("scores must be finite"));
    }
    let n_live = labels.iter().filter(|&&l| l == Liveness::Live).count();
    let n_fake = labels.len() - n_live;
    if n_live == 0 || n_fake == 0 {
        return Err(Error::invalid("evaluation needs both live and fake samples"));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut roc = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: None,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            match labels[order[k]] {
                Liveness::Live => tp += 1,
                Liveness::Fake => fp += 1,
            }
            k += 1;
        }
        roc.push(RocPoint {
            fpr: fp as f64 / n_fake as f64,
            tpr: tp as f64 / n_live as f64,
            threshold: Some(s),
        });
    }

    let auc = roc
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[0].tpr + w[1].tpr) / 2.0)
        .sum();

    let correct = scores
        .iter()
        .zip(labels)
        .filter(|(&s, &l)| (s >= threshold) == (l == Liveness::Live))
        .count();

    let (live_scores, fake_scores) = scores.iter().zip(labels).fold(
        (Vec::with_capacity(n_live), Vec::with_capacity(n_fake)),
        |(mut live, mut fake), (&s, &l)| {
            match l {
                Liveness::Live => live.push(s),
                Liveness::Fake => fake.push(s),
            }
            (live, fake)
        },
    );

    Ok(EvalReport {
        accuracy: correct as f64 / scores.len() as f64,
        auc,
        eer: equal_error_rate(&roc),
        threshold,
        roc,
        live_scores,
        fake_scores,
    })
}

/// Point on the ROC polyline where FPR = FNR = 1 − TPR.
fn equal_error_rate(roc: &[RocPoint]) -> f64 {
    // fpr + tpr − 1 is non-decreasing along the curve, −1 at (0,0), +1 at (1,1)
    let gap = |p: &RocPoint| p.fpr + p.tpr - 1.0;
    for w in roc.windows(2) {
        let (g0, g1) = (gap(&w[0]), gap(&w[1]));
        if g0 == 0.0 {
            return w[0].fpr;
        }
        if g0 < 0.0 && g1 >= 0.0 {
            let t = -g0 / (g1 - g0);
            return w[0].fpr + t * (w[1].fpr - w[0].fpr);
        }
    }
    roc.last().map_or(1.0, |p| p.fpr)
}
