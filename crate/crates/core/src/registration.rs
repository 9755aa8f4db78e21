//! Template face construction and trimmed similarity registration.
//!
//! Every round solves the closed-form similarity alignment (unit-quaternion
//! absolute orientation) between the current keypoints and the template,
//! then applies it to all 68 keypoints. Round one uses every correspondence;
//! later rounds use only the `trim_size` keypoints with the smallest error
//! under the previous round's alignment.

use nalgebra::{Matrix3, Matrix4, Quaternion, SymmetricEigen, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::{AbstractFace, NUM_KEYPOINTS};
use crate::{Error, Result};

const COLLINEAR_REL: f64 = 1e-12;

/// Per-index mean of a set of abstract faces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemplateFace {
    pub points: Vec<[f64; 3]>,
}

impl TemplateFace {
    pub fn new(points: Vec<[f64; 3]>) -> Result<Self> {
        if points.len() != NUM_KEYPOINTS {
            return Err(Error::DimensionMismatch {
                expected: NUM_KEYPOINTS,
                found: points.len(),
            });
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("template contains non-finite values"));
        }
        Ok(TemplateFace { points })
    }

    pub fn depths(&self) -> Vec<f64> {
        self.points.iter().map(|p| p[2]).collect()
    }
}

pub fn build_template(faces: &[AbstractFace]) -> Result<TemplateFace> {
    if faces.is_empty() {
        return Err(Error::invalid("template needs at least one face"));
    }
    let mut sums = vec![[0.0f64; 3]; NUM_KEYPOINTS];
    for face in faces {
        if face.points.len() != NUM_KEYPOINTS {
            return Err(Error::DimensionMismatch {
                expected: NUM_KEYPOINTS,
                found: face.points.len(),
            });
        }
        for (acc, p) in sums.iter_mut().zip(&face.points) {
            for c in 0..3 {
                acc[c] += p[c];
            }
        }
    }
    let n = faces.len() as f64;
    TemplateFace::new(sums.into_iter().map(|s| s.map(|v| v / n)).collect())
}

/// `p -> scale * rotation * p + translation`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        SimilarityTransform {
            scale: 1.0,
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.scale * (self.rotation * p) + self.translation
    }

    /// `self ∘ first`: applies `first`, then `self`.
    pub fn compose(&self, first: &SimilarityTransform) -> SimilarityTransform {
        SimilarityTransform {
            scale: self.scale * first.scale,
            rotation: self.rotation * first.rotation,
            translation: self.scale * (self.rotation * first.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> SimilarityTransform {
        let rt = self.rotation.transpose();
        SimilarityTransform {
            scale: 1.0 / self.scale,
            rotation: rt,
            translation: -(rt * self.translation) / self.scale,
        }
    }
}

fn centroid(points: &[Vector3<f64>]) -> Vector3<f64> {
    points.iter().sum::<Vector3<f64>>() / points.len() as f64
}

/// Least-squares similarity taking `source` onto `target`.
///
/// The rotation is the unit quaternion of maximal eigenvalue of Horn's 4×4
/// symmetric matrix built from the centered cross-covariance; the scale is
/// the (asymmetric) least-squares scale given that rotation.
pub fn solve_absolute_orientation(
    source: &[Vector3<f64>],
    target: &[Vector3<f64>],
) -> Result<SimilarityTransform> {
    if source.len() != target.len() {
        return Err(Error::DimensionMismatch {
            expected: source.len(),
            found: target.len(),
        });
    }
    if source.len() < 3 {
        return Err(Error::invalid(format!(
            "need at least 3 correspondences, got {}",
            source.len()
        )));
    }
    let src_c = centroid(source);
    let dst_c = centroid(target);

    let mut cross = Matrix3::zeros();
    let mut scatter = Matrix3::zeros();
    let mut src_norm = 0.0;
    for (a, b) in source.iter().zip(target) {
        let a = a - src_c;
        let b = b - dst_c;
        cross += a * b.transpose();
        scatter += a * a.transpose();
        src_norm += a.norm_squared();
    }

    let spread = SymmetricEigen::new(scatter).eigenvalues;
    let mut spread = [spread[0], spread[1], spread[2]];
    spread.sort_by(|a, b| b.total_cmp(a));
    if !(spread[0] > 0.0) || spread[1] <= COLLINEAR_REL * spread[0] {
        return Err(Error::Degenerate("source points are collinear or coincident".into()));
    }

    let (sxx, sxy, sxz) = (cross[(0, 0)], cross[(0, 1)], cross[(0, 2)]);
    let (syx, syy, syz) = (cross[(1, 0)], cross[(1, 1)], cross[(1, 2)]);
    let (szx, szy, szz) = (cross[(2, 0)], cross[(2, 1)], cross[(2, 2)]);
    #[rustfmt::skip]
    let horn = Matrix4::new(
        sxx + syy + szz, syz - szy,        szx - sxz,        sxy - syx,
        syz - szy,       sxx - syy - szz,  sxy + syx,        szx + sxz,
        szx - sxz,       sxy + syx,        -sxx + syy - szz, syz + szy,
        sxy - syx,       szx + sxz,        syz + szy,        -sxx - syy + szz,
    );
    let eig = SymmetricEigen::new(horn);
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let (top, next) = (eig.eigenvalues[order[0]], eig.eigenvalues[order[1]]);
    let magnitude = eig.eigenvalues.amax();
    if !(magnitude > 0.0) || top - next <= COLLINEAR_REL * magnitude {
        return Err(Error::Degenerate("rotation is not uniquely determined".into()));
    }
    let q = eig.eigenvectors.column(order[0]);
    let rotation = UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]))
        .to_rotation_matrix()
        .into_inner();

    let mut dot = 0.0;
    for (a, b) in source.iter().zip(target) {
        dot += (b - dst_c).dot(&(rotation * (a - src_c)));
    }
    let scale = dot / src_norm;
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::Degenerate(format!("non-positive scale {scale}")));
    }
    let translation = dst_c - scale * (rotation * src_c);
    Ok(SimilarityTransform {
        scale,
        rotation,
        translation,
    })
}

/// `Σ ||target_j - xf(source_j)||²`.
pub fn alignment_objective(
    source: &[Vector3<f64>],
    target: &[Vector3<f64>],
    xf: &SimilarityTransform,
) -> f64 {
    source
        .iter()
        .zip(target)
        .map(|(p, t)| (t - xf.apply(p)).norm_squared())
        .sum()
}

/// Euclidean distance between each template point and its transformed keypoint.
pub fn registration_errors(
    points: &[Vector3<f64>],
    template: &TemplateFace,
    xf: &SimilarityTransform,
) -> Result<Vec<f64>> {
    if points.len() != template.points.len() {
        return Err(Error::DimensionMismatch {
            expected: template.points.len(),
            found: points.len(),
        });
    }
    Ok(points
        .iter()
        .zip(&template.points)
        .map(|(p, t)| (Vector3::from(*t) - xf.apply(p)).norm())
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegistrationConfig {
    pub rounds: usize,
    pub trim_size: usize,
}

impl Default for RegistrationConfig {
    fn default() -> Self {
        RegistrationConfig {
            rounds: 20,
            trim_size: 20,
        }
    }
}

impl RegistrationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::invalid("registration needs at least one round"));
        }
        if self.trim_size == 0 || self.trim_size > NUM_KEYPOINTS {
            return Err(Error::invalid(format!(
                "trim size must be in 1..={NUM_KEYPOINTS}, got {}",
                self.trim_size
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    pub transform: SimilarityTransform,
    /// Keypoint indices (0-based) used to estimate this round's transform.
    pub used: Vec<usize>,
    /// Objective over the used correspondences after applying the transform.
    pub objective: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Registration {
    pub points: Vec<Vector3<f64>>,
    pub rounds: Vec<RoundRecord>,
    /// Set when a trimmed subset was degenerate and iteration stopped before
    /// the configured number of rounds.
    pub stopped_early: bool,
}

impl Registration {
    /// Composition of all round transforms, mapping original keypoints to
    /// their registered positions.
    pub fn total_transform(&self) -> SimilarityTransform {
        self.rounds
            .iter()
            .fold(SimilarityTransform::identity(), |acc, r| r.transform.compose(&acc))
    }
}

/// Indices of the `k` smallest errors, ties broken by keypoint index.
fn smallest_errors(errors: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..errors.len()).collect();
    idx.sort_by(|&a, &b| errors[a].total_cmp(&errors[b]).then(a.cmp(&b)));
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

pub fn register_iterative(
    face: &AbstractFace,
    template: &TemplateFace,
    cfg: &RegistrationConfig,
) -> Result<Registration> {
    cfg.validate()?;
    if face.points.len() != NUM_KEYPOINTS || template.points.len() != NUM_KEYPOINTS {
        return Err(Error::DimensionMismatch {
            expected: NUM_KEYPOINTS,
            found: face.points.len().min(template.points.len()),
        });
    }
    let targets: Vec<Vector3<f64>> = template.points.iter().map(|p| Vector3::from(*p)).collect();
    let mut points: Vec<Vector3<f64>> = face.points.iter().map(|p| Vector3::from(*p)).collect();
    let mut rounds = Vec::with_capacity(cfg.rounds);
    let mut stopped_early = false;

    for round in 0..cfg.rounds {
        let used: Vec<usize> = if round == 0 {
            (0..NUM_KEYPOINTS).collect()
        } else {
            // current points already carry the previous round's transform
            let errors =
                registration_errors(&points, template, &SimilarityTransform::identity())?;
            smallest_errors(&errors, cfg.trim_size)
        };
        let src: Vec<_> = used.iter().map(|&j| points[j]).collect();
        let dst: Vec<_> = used.iter().map(|&j| targets[j]).collect();
        let transform = match solve_absolute_orientation(&src, &dst) {
            Ok(xf) => xf,
            Err(e @ Error::InvalidInput(_)) | Err(e @ Error::Degenerate(_)) if round > 0 => {
                log::debug!("registration stopped at round {}: {e}", round + 1);
                stopped_early = true;
                break;
            }
            Err(e) => return Err(e),
        };
        let objective = alignment_objective(&src, &dst, &transform);
        for p in points.iter_mut() {
            *p = transform.apply(p);
        }
        rounds.push(RoundRecord {
            transform,
            used,
            objective,
        });
    }
    Ok(Registration {
        points,
        rounds,
        stopped_early,
    })
}

/// 68-d depth descriptor of a registered keypoint set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TfbdVector(pub Vec<f64>);

pub fn extract_tfbd(registered: &[Vector3<f64>]) -> Result<TfbdVector> {
    if registered.len() != NUM_KEYPOINTS {
        return Err(Error::DimensionMismatch {
            expected: NUM_KEYPOINTS,
            found: registered.len(),
        });
    }
    Ok(TfbdVector(registered.iter().map(|p| p.z).collect()))
}

/// Registers a face against the template and returns its depth descriptor.
pub fn tfbd_descriptor(
    face: &AbstractFace,
    template: &TemplateFace,
    cfg: &RegistrationConfig,
) -> Result<TfbdVector> {
    extract_tfbd(&register_iterative(face, template, cfg)?.points)
}
