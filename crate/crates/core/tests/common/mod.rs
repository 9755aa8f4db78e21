#![allow(dead_code)]

use liveface::geometry::{CameraIntrinsics, KeypointPair, StereoRig, NUM_KEYPOINTS};
use liveface::texture::GrayImage;
use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn random_rotation(rng: &mut ChaCha8Rng, max_angle: f64) -> Matrix3<f64> {
    let axis = Unit::new_normalize(Vector3::new(gauss(rng), gauss(rng), gauss(rng)));
    *Rotation3::from_axis_angle(&axis, rng.random_range(-max_angle..max_angle)).matrix()
}

pub fn random_intrinsics(rng: &mut ChaCha8Rng) -> CameraIntrinsics {
    let f = rng.random_range(400.0..1200.0);
    CameraIntrinsics {
        fx: f,
        fy: f * rng.random_range(0.95..1.05),
        cx: rng.random_range(280.0..360.0),
        cy: rng.random_range(200.0..280.0),
    }
}

/// A converging stereo pair with a mostly horizontal baseline and a random
/// small extra rotation.
pub fn random_rig(rng: &mut ChaCha8Rng) -> StereoRig {
    let baseline: f64 = rng.random_range(50.0..250.0);
    let converge = rng.random_range(300.0..1500.0);
    let toe_in = *Rotation3::from_axis_angle(&Vector3::y_axis(), -(baseline / converge).atan()).matrix();
    let rotation = random_rotation(rng, 0.05) * toe_in;
    let centre = Vector3::new(-baseline, rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
    StereoRig::compose(
        random_intrinsics(rng),
        random_intrinsics(rng),
        rotation,
        -(rotation * centre),
    )
    .expect("valid rig")
}

/// Right-frame point in front of both cameras.
pub fn random_point(rng: &mut ChaCha8Rng, rig: &StereoRig) -> Vector3<f64> {
    loop {
        let z = rng.random_range(200.0..2000.0);
        let p = Vector3::new(rng.random_range(-0.4..0.4) * z, rng.random_range(-0.3..0.3) * z, z);
        if (rig.rotation() * p + rig.translation()).z > 50.0 {
            return p;
        }
    }
}

pub fn project_pair(rig: &StereoRig, p: &Vector3<f64>, index: usize) -> KeypointPair {
    let [ul, vl] = rig.project_left(p);
    let [ur, vr] = rig.project_right(p);
    KeypointPair { index, ul, vl, ur, vr }
}

/// Irregular 68-point cloud on the scale of an abstract face.
pub fn face_cloud(rng: &mut ChaCha8Rng) -> Vec<Vector3<f64>> {
    (0..NUM_KEYPOINTS)
        .map(|_| {
            Vector3::new(
                rng.random_range(200.0..400.0),
                rng.random_range(150.0..350.0),
                rng.random_range(-30.0..30.0),
            )
        })
        .collect()
}

pub fn diameter(points: &[Vector3<f64>]) -> f64 {
    let mut d: f64 = 0.0;
    for a in points {
        for b in points {
            d = d.max((a - b).norm());
        }
    }
    d
}

pub fn random_image(rng: &mut ChaCha8Rng, width: usize, height: usize) -> GrayImage {
    // Low-entropy values make equal-intensity ties common.
    let levels = rng.random_range(2..=256u32);
    let data = (0..width * height)
        .map(|_| (rng.random_range(0..levels) * 255 / (levels - 1).max(1)) as u8)
        .collect();
    GrayImage::new(width, height, data).unwrap()
}

fn circular_transitions(pattern: u32, p: usize) -> u32 {
    (0..p)
        .filter(|&k| ((pattern >> k) & 1) != ((pattern >> ((k + 1) % p)) & 1))
        .count() as u32
}

/// Label table for the uniform mapping: uniform patterns numbered in ascending
/// raw order, everything else shares the last label.
pub fn naive_uniform_table(p: usize) -> Vec<u8> {
    let nonuniform = (p * (p - 1) + 2) as u8;
    let mut next = 0u8;
    (0..1u32 << p)
        .map(|raw| {
            if circular_transitions(raw, p) <= 2 {
                next += 1;
                next - 1
            } else {
                nonuniform
            }
        })
        .collect()
}

fn pixel(img: &GrayImage, x: i64, y: i64) -> f64 {
    let x = x.clamp(0, img.width() as i64 - 1) as usize;
    let y = y.clamp(0, img.height() as i64 - 1) as usize;
    img.data()[y * img.width() + x] as f64
}

/// Straightforward double loop over pixels and neighbours.
pub fn naive_lbp(img: &GrayImage, p: usize, r: f64) -> Vec<u8> {
    let table = naive_uniform_table(p);
    let mut out = Vec::with_capacity(img.width() * img.height());
    for y in 0..img.height() as i64 {
        for x in 0..img.width() as i64 {
            let c = pixel(img, x, y);
            let mut raw = 0u32;
            for k in 0..p {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / p as f64;
                let mut dx = r * theta.cos();
                let mut dy = -r * theta.sin();
                if (dx - dx.round()).abs() < 1e-9 {
                    dx = dx.round();
                }
                if (dy - dy.round()).abs() < 1e-9 {
                    dy = dy.round();
                }
                let (fx0, fy0) = (dx.floor(), dy.floor());
                let (fx, fy) = (dx - fx0, dy - fy0);
                let (sx, sy) = (x + fx0 as i64, y + fy0 as i64);
                let d00 = pixel(img, sx, sy) - c;
                let d10 = pixel(img, sx + 1, sy) - c;
                let d01 = pixel(img, sx, sy + 1) - c;
                let d11 = pixel(img, sx + 1, sy + 1) - c;
                let v = d00 * (1.0 - fx) * (1.0 - fy) + d10 * fx * (1.0 - fy) + d01 * (1.0 - fx) * fy + d11 * fx * fy;
                if v >= 0.0 {
                    raw |= 1 << k;
                }
            }
            out.push(table[raw as usize]);
        }
    }
    out
}
