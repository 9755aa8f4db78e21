mod common;

use common::*;
use liveface::geometry::{build_abstract_face, normalize_depths, KeypointPair, StereoRig, NUM_KEYPOINTS};
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;

/// Depth of the point closest to both viewing rays (least squares in the two
/// ray parameters), measured along the right camera's axis.
fn two_ray_depth(rig: &StereoRig, kp: &KeypointPair) -> f64 {
    let kr = rig.right().matrix().try_inverse().unwrap();
    let kl = rig.left().matrix().try_inverse().unwrap();
    let e_t = rig.rotation().transpose();
    let d1 = kr * Vector3::new(kp.ur, kp.vr, 1.0);
    let o2 = -(e_t * rig.translation());
    let d2 = e_t * (kl * Vector3::new(kp.ul, kp.vl, 1.0));
    // Minimize |s d1 - (o2 + t d2)|^2 over (s, t).
    let a = Matrix3::from_columns(&[d1, -d2, Vector3::zeros()]).fixed_view::<3, 2>(0, 0).into_owned();
    let sol = (a.transpose() * a).try_inverse().unwrap() * a.transpose() * o2;
    (d1 * sol[0] + (o2 + d2 * sol[1])).z / 2.0
}

#[test]
fn matches_two_ray_oracle_on_random_rigs() {
    let mut rng = rng(11);
    for _ in 0..300 {
        let rig = random_rig(&mut rng);
        let p = random_point(&mut rng, &rig);
        let kp = project_pair(&rig, &p, 1);
        let d = rig.triangulate_depth(&kp).unwrap();
        let oracle = two_ray_depth(&rig, &kp);
        assert!(((d - oracle) / oracle).abs() < 1e-6, "{d} vs {oracle}");
        assert!(((d - p.z) / p.z).abs() < 1e-6);
    }
}

#[test]
fn noisy_landmarks_stay_close_to_oracle() {
    // With pixel noise the two estimators differ but agree to first order.
    let mut rng = rng(12);
    for _ in 0..200 {
        let rig = random_rig(&mut rng);
        let p = random_point(&mut rng, &rig);
        let mut kp = project_pair(&rig, &p, 1);
        kp.ul += 0.2 * gauss(&mut rng);
        kp.vl += 0.2 * gauss(&mut rng);
        kp.ur += 0.2 * gauss(&mut rng);
        let d = rig.triangulate_depth(&kp).unwrap();
        let oracle = two_ray_depth(&rig, &kp);
        assert!(((d - oracle) / oracle).abs() < 0.05, "{d} vs {oracle}");
    }
}

fn meters(rig: &StereoRig) -> StereoRig {
    StereoRig::compose(*rig.left(), *rig.right(), *rig.rotation(), rig.translation() / 1000.0).unwrap()
}

#[test]
fn unit_change_scales_depth() {
    let mut rng = rng(13);
    for _ in 0..100 {
        let rig = random_rig(&mut rng);
        let kp = project_pair(&rig, &random_point(&mut rng, &rig), 1);
        let mm = rig.triangulate_depth(&kp).unwrap();
        let m = meters(&rig).triangulate_depth(&kp).unwrap();
        assert!((mm / 1000.0 - m).abs() <= 1e-9 * m.abs());
    }
}

#[test]
fn abstract_face_centres_depths() {
    let mut rng = rng(14);
    let rig = random_rig(&mut rng);
    let kps: Vec<_> = (0..NUM_KEYPOINTS)
        .rev()
        .map(|j| project_pair(&rig, &random_point(&mut rng, &rig), j + 1))
        .collect();
    let face = build_abstract_face(&rig, &kps).unwrap();
    let mean: f64 = face.depths().sum::<f64>() / NUM_KEYPOINTS as f64;
    assert!(mean.abs() < 1e-9);
    // Output is in index order regardless of input order.
    let first = kps.iter().find(|k| k.index == 1).unwrap();
    assert_eq!([face.points[0][0], face.points[0][1]], [first.ur, first.vr]);
}

proptest! {
    #[test]
    fn normalized_depths_are_shift_invariant(
        depths in prop::collection::vec(100.0f64..3000.0, NUM_KEYPOINTS),
        shift in -500.0f64..500.0,
    ) {
        let a = normalize_depths(&depths).unwrap();
        let shifted: Vec<f64> = depths.iter().map(|d| d + shift).collect();
        let b = normalize_depths(&shifted).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn right_row_does_not_affect_depth(seed in 0u64..1000, dv in -50.0f64..50.0) {
        let mut rng = rng(seed);
        let rig = random_rig(&mut rng);
        let mut kp = project_pair(&rig, &random_point(&mut rng, &rig), 1);
        let d = rig.triangulate_depth(&kp).unwrap();
        kp.vr += dv;
        prop_assert_eq!(rig.triangulate_depth(&kp).unwrap(), d);
    }
}
