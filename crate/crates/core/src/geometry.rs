//! Stereo pinhole geometry: projection matrix, per-keypoint depth and
//! abstract keypoint faces.
//!
//! Conventions: the rig rotation `E` and translation `V` map a point from the
//! right-camera frame into the left-camera frame, `P_l = E * P_r + V`. Depths
//! are expressed in the right-camera frame, in whatever length unit the
//! calibration uses.

use nalgebra::{Matrix3, Matrix3x4, Vector3};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Number of facial landmarks per face.
pub const NUM_KEYPOINTS: usize = 68;

const ROTATION_TOL: f64 = 1e-9;
const DEGENERATE_REL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        let k = CameraIntrinsics { fx, fy, cx, cy };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.fx.is_finite() || !self.fy.is_finite() {
            return Err(Error::invalid(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if !self.cx.is_finite() || !self.cy.is_finite() {
            return Err(Error::invalid("principal point must be finite"));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Projects a camera-frame point to pixel coordinates.
    pub fn project(&self, p: &Vector3<f64>) -> [f64; 2] {
        [
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        ]
    }
}

/// Calibrated binocular rig with the composed left projection matrix
/// `m = M_l [E | V]` acting on right-camera-frame points.
#[derive(Clone, Debug, PartialEq)]
pub struct StereoRig {
    left: CameraIntrinsics,
    right: CameraIntrinsics,
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
    projection: Matrix3x4<f64>,
}

impl StereoRig {
    /// Validates the extrinsics and composes the projection matrix.
    pub fn compose(
        left: CameraIntrinsics,
        right: CameraIntrinsics,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self> {
        left.validate()?;
        right.validate()?;
        check_rotation(&rotation)?;
        if translation.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("translation must be finite"));
        }
        let mut extrinsic = Matrix3x4::zeros();
        extrinsic.fixed_view_mut::<3, 3>(0, 0).copy_from(&rotation);
        extrinsic.set_column(3, &translation);
        let projection = left.matrix() * extrinsic;
        Ok(StereoRig {
            left,
            right,
            rotation,
            translation,
            projection,
        })
    }

    pub fn left(&self) -> &CameraIntrinsics {
        &self.left
    }

    pub fn right(&self) -> &CameraIntrinsics {
        &self.right
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn projection(&self) -> &Matrix3x4<f64> {
        &self.projection
    }

    /// Projects a right-camera-frame point into the right image.
    pub fn project_right(&self, p: &Vector3<f64>) -> [f64; 2] {
        self.right.project(p)
    }

    /// Projects a right-camera-frame point into the left image.
    pub fn project_left(&self, p: &Vector3<f64>) -> [f64; 2] {
        self.left.project(&(self.rotation * p + self.translation))
    }

    /// Closed-form depth of a keypoint along the right camera's viewing ray.
    ///
    /// The point is parameterized as `d * [a, Y/d, 1]` with
    /// `a = (u_r - c_xr) / f_xr`; the two left-image row constraints of `m`
    /// are solved for `d` after eliminating `Y`. Only the x-component of the
    /// right ray enters, so `v_r` does not affect the result.
    pub fn triangulate_depth(&self, kp: &KeypointPair) -> Result<f64> {
        let m = &self.projection;
        let (ul, vl) = (kp.ul, kp.vl);
        let b1 = |j: usize| m[(0, j)] - m[(2, j)] * ul;
        let b2 = |j: usize| m[(1, j)] - m[(2, j)] * vl;
        let rhs1 = m[(2, 3)] * ul - m[(0, 3)];
        let rhs2 = m[(2, 3)] * vl - m[(1, 3)];
        let ray_x = (kp.ur - self.right.cx) / self.right.fx;

        let (b11, b12, b13) = (b1(0), b1(1), b1(2));
        let (b21, b22, b23) = (b2(0), b2(1), b2(2));

        let numerator = b12 * rhs2 - b22 * rhs1;
        let cross_xy = b12 * b21 - b11 * b22;
        let cross_yz = b12 * b23 - b22 * b13;
        let denominator = ray_x * cross_xy + cross_yz;

        let scale = (ray_x * b12 * b21).abs()
            + (ray_x * b11 * b22).abs()
            + (b12 * b23).abs()
            + (b22 * b13).abs();
        if !denominator.is_finite() || denominator.abs() <= DEGENERATE_REL * scale || scale == 0.0
        {
            return Err(Error::Degenerate(format!(
                "rays do not intersect (denominator {denominator:e})"
            )));
        }
        let depth = numerator / denominator;
        if !depth.is_finite() {
            return Err(Error::Degenerate("non-finite depth".into()));
        }
        Ok(depth)
    }
}

fn check_rotation(r: &Matrix3<f64>) -> Result<()> {
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("rotation must be finite"));
    }
    let ortho = (r.transpose() * r - Matrix3::identity()).amax();
    let det = r.determinant();
    if ortho > ROTATION_TOL || (det - 1.0).abs() > ROTATION_TOL {
        return Err(Error::invalid(format!(
            "E is not a proper rotation (|E^T E - I| = {ortho:e}, det = {det})"
        )));
    }
    Ok(())
}

/// Matching landmark observed in both images. `index` is 1-based.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeypointPair {
    #[serde(rename = "i")]
    pub index: usize,
    pub ul: f64,
    pub vl: f64,
    pub ur: f64,
    pub vr: f64,
}

/// Subtracts the mean from 68 raw depths.
pub fn normalize_depths(depths: &[f64]) -> Result<Vec<f64>> {
    if depths.len() != NUM_KEYPOINTS {
        return Err(Error::DimensionMismatch {
            expected: NUM_KEYPOINTS,
            found: depths.len(),
        });
    }
    if let Some(bad) = depths.iter().position(|d| !d.is_finite()) {
        return Err(Error::invalid(format!("depth {} is not finite", bad + 1)));
    }
    let mean = depths.iter().sum::<f64>() / NUM_KEYPOINTS as f64;
    Ok(depths.iter().map(|d| d - mean).collect())
}

/// 68 keypoints `[x, y, d']`: right-image pixel position plus centered depth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AbstractFace {
    pub points: Vec<[f64; 3]>,
}

impl AbstractFace {
    pub fn new(points: Vec<[f64; 3]>) -> Result<Self> {
        if points.len() != NUM_KEYPOINTS {
            return Err(Error::DimensionMismatch {
                expected: NUM_KEYPOINTS,
                found: points.len(),
            });
        }
        Ok(AbstractFace { points })
    }

    pub fn depths(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p[2])
    }
}

/// Sorts keypoints by index, checking that indices are exactly `1..=68`.
pub fn order_keypoints(kps: &[KeypointPair]) -> Result<Vec<KeypointPair>> {
    if kps.len() != NUM_KEYPOINTS {
        return Err(Error::DimensionMismatch {
            expected: NUM_KEYPOINTS,
            found: kps.len(),
        });
    }
    let mut slots: Vec<Option<KeypointPair>> = vec![None; NUM_KEYPOINTS];
    for kp in kps {
        if kp.index == 0 || kp.index > NUM_KEYPOINTS {
            return Err(Error::invalid(format!(
                "keypoint index {} outside 1..={NUM_KEYPOINTS}",
                kp.index
            )));
        }
        let slot = &mut slots[kp.index - 1];
        if slot.is_some() {
            return Err(Error::invalid(format!("duplicate keypoint index {}", kp.index)));
        }
        *slot = Some(*kp);
    }
    Ok(slots.into_iter().flatten().collect())
}

/// Triangulates all 68 keypoints and builds the abstract face, in index order.
pub fn build_abstract_face(rig: &StereoRig, kps: &[KeypointPair]) -> Result<AbstractFace> {
    let ordered = order_keypoints(kps)?;
    let depths = ordered
        .iter()
        .map(|kp| {
            rig.triangulate_depth(kp).map_err(|e| Error::Keypoint {
                index: kp.index,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let normalized = normalize_depths(&depths)?;
    let points = ordered
        .iter()
        .zip(normalized)
        .map(|(kp, d)| [kp.ur, kp.vr, d])
        .collect();
    AbstractFace::new(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rectified() -> StereoRig {
        let k = CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0).unwrap();
        StereoRig::compose(k, k, Matrix3::identity(), Vector3::new(60.0, 0.0, 0.0)).unwrap()
    }

    #[test]
    fn identity_projection() {
        let k = CameraIntrinsics::new(1.0, 1.0, 0.0, 0.0).unwrap();
        let rig = StereoRig::compose(k, k, Matrix3::identity(), Vector3::zeros()).unwrap();
        let mut expected = Matrix3x4::zeros();
        expected.fixed_view_mut::<3, 3>(0, 0).fill_with_identity();
        assert_eq!(*rig.projection(), expected);
    }

    #[test]
    fn projection_first_row() {
        let rig = rectified();
        let m = rig.projection();
        assert_eq!(
            [m[(0, 0)], m[(0, 1)], m[(0, 2)], m[(0, 3)]],
            [500.0, 0.0, 320.0, 30000.0]
        );
        // third row is [E row 3 | V_z]
        assert_eq!([m[(2, 0)], m[(2, 1)], m[(2, 2)], m[(2, 3)]], [0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn reflection_rejected() {
        let k = CameraIntrinsics::new(500.0, 500.0, 320.0, 240.0).unwrap();
        let flip = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(matches!(
            StereoRig::compose(k, k, flip, Vector3::zeros()),
            Err(Error::InvalidInput(_))
        ));
        let skew = Matrix3::new(1.0, 0.1, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(StereoRig::compose(k, k, skew, Vector3::zeros()).is_err());
    }

    #[test]
    fn bad_intrinsics_rejected() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 0.0, 0.0).is_err());
        assert!(CameraIntrinsics::new(1.0, -2.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn rectified_depth() {
        let kp = KeypointPair {
            index: 1,
            ul: 370.0,
            vl: 240.0,
            ur: 320.0,
            vr: 240.0,
        };
        assert_relative_eq!(rectified().triangulate_depth(&kp).unwrap(), 600.0, max_relative = 1e-12);
    }

    #[test]
    fn zero_disparity_is_degenerate() {
        let kp = KeypointPair {
            index: 1,
            ul: 320.0,
            vl: 240.0,
            ur: 320.0,
            vr: 240.0,
        };
        assert!(matches!(
            rectified().triangulate_depth(&kp),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn normalize_examples() {
        assert!(normalize_depths(&[500.0; 68]).unwrap().iter().all(|&d| d == 0.0));
        let mut depths = vec![200.0; 68];
        depths[0] = 100.0;
        depths[2] = 300.0;
        let n = normalize_depths(&depths).unwrap();
        assert_eq!(n[0], -100.0);
        assert_eq!(n[1], 0.0);
        assert_eq!(n[2], 100.0);
        assert!(n[3..].iter().all(|&d| d == 0.0));
    }

    #[test]
    fn normalize_rejects_bad_input() {
        assert!(normalize_depths(&[1.0; 67]).is_err());
        let mut d = vec![1.0; 68];
        d[5] = f64::NAN;
        assert!(normalize_depths(&d).is_err());
    }

    fn axis_face(ul: f64) -> Vec<KeypointPair> {
        (1..=68)
            .map(|i| KeypointPair {
                index: i,
                ul,
                vl: 240.0,
                ur: 320.0,
                vr: 240.0,
            })
            .collect()
    }

    #[test]
    fn abstract_face_on_axis() {
        let face = build_abstract_face(&rectified(), &axis_face(370.0)).unwrap();
        assert_eq!(face.points.len(), 68);
        for p in &face.points {
            assert_eq!(p[0], 320.0);
            assert_eq!(p[1], 240.0);
            assert!(p[2].abs() < 1e-9);
        }
    }

    #[test]
    fn abstract_face_reports_keypoint_index() {
        let mut kps = axis_face(370.0);
        kps[16].ul = 320.0;
        match build_abstract_face(&rectified(), &kps) {
            Err(Error::Keypoint { index, .. }) => assert_eq!(index, 17),
            other => panic!("expected keypoint error, got {other:?}"),
        }
    }

    #[test]
    fn keypoint_indices_validated() {
        let mut kps = axis_face(370.0);
        kps[3].index = 5;
        assert!(build_abstract_face(&rectified(), &kps).is_err());
        assert!(build_abstract_face(&rectified(), &kps[..67]).is_err());
    }
}
