//! Deterministic synthetic stereo-face generator.
//!
//! Live samples are a fixed curved 68-point face under random poses; fake
//! samples are the same face flattened onto its best-fit plane, as a printed
//! photo would be. Each sample gets a rendered right (and left) image whose
//! face region carries a class-specific procedural texture.

use std::fs;
use std::path::{Path, PathBuf};

use image::{ImageBuffer, Luma};
use nalgebra::{Matrix3, Rotation3, SymmetricEigen, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::geometry::{CameraIntrinsics, KeypointPair, StereoRig, NUM_KEYPOINTS};
use crate::texture::GrayImage;
use crate::{Error, Liveness, Result};

use super::io::{save_gray_png, write_json, CalibrationFile, LandmarkFile};
use super::manifest::{ManifestEntry, Split};
use super::stage_seed;

/// Samples per split. The template split is live-only.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthCounts {
    pub template: usize,
    pub train_per_class: usize,
    pub average_per_class: usize,
    pub test_per_class: usize,
}

impl Default for SynthCounts {
    fn default() -> Self {
        SynthCounts {
            template: 20,
            train_per_class: 200,
            average_per_class: 100,
            test_per_class: 200,
        }
    }
}

/// Toe-in stereo pair: the left camera sits `baseline` mm to the left of the
/// right camera and is turned so both optical axes meet at `convergence` mm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthRig {
    pub left: CameraIntrinsics,
    pub right: CameraIntrinsics,
    pub baseline: f64,
    pub convergence: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for SynthRig {
    fn default() -> Self {
        SynthRig {
            left: CameraIntrinsics {
                fx: 705.0,
                fy: 705.0,
                cx: 322.0,
                cy: 238.0,
            },
            right: CameraIntrinsics {
                fx: 700.0,
                fy: 700.0,
                cx: 320.0,
                cy: 240.0,
            },
            baseline: 120.0,
            convergence: 550.0,
            width: 640,
            height: 480,
        }
    }
}

impl SynthRig {
    pub fn stereo_rig(&self) -> Result<StereoRig> {
        if !(self.baseline > 0.0 && self.convergence > 0.0) {
            return Err(Error::invalid("synthetic rig needs positive baseline and convergence distance"));
        }
        let beta = (self.baseline / self.convergence).atan();
        let rotation = *Rotation3::from_axis_angle(&Vector3::y_axis(), -beta).matrix();
        let left_centre = Vector3::new(-self.baseline, 0.0, 0.0);
        StereoRig::compose(self.left, self.right, rotation, -(rotation * left_centre))
    }
}

/// Random pose ranges. Angles in degrees, lengths in mm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoseRange {
    pub distance: [f64; 2],
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
    pub offset: f64,
    pub scale: [f64; 2],
    /// Angle multiplier for template samples (near-frontal).
    pub template_angle_factor: f64,
}

impl Default for PoseRange {
    fn default() -> Self {
        PoseRange {
            distance: [450.0, 650.0],
            yaw: 15.0,
            pitch: 10.0,
            roll: 10.0,
            offset: 30.0,
            scale: [0.92, 1.08],
            template_angle_factor: 0.25,
        }
    }
}

/// Procedural face texture: unit Gaussian grain scaled by `grain`, blurred by
/// `blur` px (which also lowers its amplitude), optionally
/// overlaid with a periodic halftone-like dot pattern.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TextureStyle {
    pub grain: f64,
    pub blur: f64,
    pub halftone_period: f64,
    pub halftone_amplitude: f64,
    /// Multiplier on the illumination gradient and grain.
    pub contrast: f64,
}

impl Default for TextureStyle {
    fn default() -> Self {
        TextureStyle::live()
    }
}

impl TextureStyle {
    pub fn live() -> Self {
        TextureStyle {
            grain: 28.0,
            blur: 0.6,
            halftone_period: 0.0,
            halftone_amplitude: 0.0,
            contrast: 1.0,
        }
    }

    pub fn fake() -> Self {
        TextureStyle {
            grain: 28.0,
            blur: 2.0,
            halftone_period: 4.0,
            halftone_amplitude: 10.0,
            contrast: 0.8,
        }
    }

    fn validate(&self) -> Result<()> {
        let vals = [self.grain, self.blur, self.halftone_period, self.halftone_amplitude, self.contrast];
        if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("texture style parameters must be finite and non-negative"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub counts: SynthCounts,
    pub rig: SynthRig,
    pub pose: PoseRange,
    /// Per-keypoint 3D jitter of the face shape, mm.
    pub depth_noise: f64,
    /// Gaussian noise added to every projected landmark coordinate, px.
    pub landmark_noise: f64,
    pub live_texture: TextureStyle,
    pub fake_texture: TextureStyle,
    /// Pose draws per sample before giving up.
    pub max_retries: usize,
    /// Minimum distance of any landmark from the image border, px.
    pub margin: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 0,
            counts: SynthCounts::default(),
            rig: SynthRig::default(),
            pose: PoseRange::default(),
            depth_noise: 1.0,
            landmark_noise: 0.1,
            live_texture: TextureStyle::live(),
            fake_texture: TextureStyle::fake(),
            max_retries: 100,
            margin: 16.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.depth_noise >= 0.0 && self.landmark_noise >= 0.0) {
            return Err(Error::invalid("noise sigmas must be non-negative"));
        }
        self.live_texture.validate()?;
        self.fake_texture.validate()?;
        let p = &self.pose;
        if !(p.distance[0] > 0.0 && p.distance[0] <= p.distance[1])
            || !(p.scale[0] > 0.0 && p.scale[0] <= p.scale[1])
        {
            return Err(Error::invalid("pose distance and scale ranges must be positive and ordered"));
        }
        if self.max_retries == 0 {
            return Err(Error::invalid("max_retries must be positive"));
        }
        if self.rig.width < 64 || self.rig.height < 64 {
            return Err(Error::invalid("synthetic images must be at least 64x64"));
        }
        self.rig.left.validate()?;
        self.rig.right.validate()?;
        self.rig.stereo_rig().map(|_| ())
    }
}

/// The canonical 68-point face in mm: x right, y down, z away from the
/// camera, centred on its centroid.
pub fn base_face() -> Vec<Vector3<f64>> {
    use std::f64::consts::PI;
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(NUM_KEYPOINTS);
    for k in 0..17 {
        let phi = PI * k as f64 / 16.0;
        pts.push((-70.0 * phi.cos() * (1.0 - 0.2 * phi.sin()), 95.0 * phi.sin()));
    }
    for k in 0..5 {
        let t = k as f64 / 4.0;
        pts.push((-55.0 + 40.0 * t, -18.0 - 6.0 * (PI * t).sin()));
    }
    for k in 0..5 {
        let t = k as f64 / 4.0;
        pts.push((15.0 + 40.0 * t, -18.0 - 6.0 * (PI * t).sin()));
    }
    for k in 0..4 {
        pts.push((0.0, 10.0 * k as f64));
    }
    for (x, y) in [(-14.0, 38.0), (-7.0, 40.0), (0.0, 42.0), (7.0, 40.0), (14.0, 38.0)] {
        pts.push((x, y));
    }
    let eye = |cx: f64, pts: &mut Vec<(f64, f64)>| {
        for deg in [180.0f64, 120.0, 60.0, 0.0, -60.0, -120.0] {
            let a = deg.to_radians();
            pts.push((cx + 12.0 * a.cos(), -5.0 * a.sin()));
        }
    };
    eye(-32.0, &mut pts);
    eye(32.0, &mut pts);
    for k in 0..12 {
        let a = PI - k as f64 * PI / 6.0;
        pts.push((25.0 * a.cos(), 62.0 - 10.0 * a.sin()));
    }
    for k in 0..8 {
        let a = PI - k as f64 * PI / 4.0;
        pts.push((15.0 * a.cos(), 62.0 - 4.0 * a.sin()));
    }
    debug_assert_eq!(pts.len(), NUM_KEYPOINTS);

    let protrusion = |x: f64, y: f64| {
        let head = -0.006 * x * x - 0.002 * (y - 30.0) * (y - 30.0);
        let nose = 25.0 * (-((x / 12.0).powi(2) + ((y - 32.0) / 22.0).powi(2))).exp();
        let lips = 6.0 * (-((x / 22.0).powi(2) + ((y - 62.0) / 8.0).powi(2))).exp();
        head + nose + lips
    };
    let mut out: Vec<Vector3<f64>> = pts.iter().map(|&(x, y)| Vector3::new(x, y, -protrusion(x, y))).collect();
    let c = centroid(&out);
    out.iter_mut().for_each(|p| *p -= c);
    out
}

fn centroid(points: &[Vector3<f64>]) -> Vector3<f64> {
    points.iter().sum::<Vector3<f64>>() / points.len() as f64
}

/// Least-squares plane through the points: (centroid, unit normal).
pub fn best_fit_plane(points: &[Vector3<f64>]) -> (Vector3<f64>, Vector3<f64>) {
    let c = centroid(points);
    let cov = points.iter().fold(Matrix3::zeros(), |acc, p| {
        let d = p - c;
        acc + d * d.transpose()
    });
    let eig = SymmetricEigen::new(cov);
    let i = eig.eigenvalues.imin();
    (c, eig.eigenvectors.column(i).into_owned())
}

/// Orthogonal projection of every point onto the best-fit plane.
pub fn flatten_to_plane(points: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
    let (c, n) = best_fit_plane(points);
    points.iter().map(|p| p - n * (p - c).dot(&n)).collect()
}

/// RMS distance of the points from their best-fit plane.
pub fn plane_residual_rms(points: &[Vector3<f64>]) -> f64 {
    let (c, n) = best_fit_plane(points);
    (points.iter().map(|p| (p - c).dot(&n).powi(2)).sum::<f64>() / points.len() as f64).sqrt()
}

/// Compares how far the live shape departs from a plane with the depth error
/// that landmark noise causes at the farthest pose.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryGap {
    pub shape_residual_rms: f64,
    pub depth_noise_std: f64,
    pub ratio: f64,
}

/// First-order estimate: at depth `z` the disparity-to-depth gain is
/// `z^2 / (f B)` and horizontal disparity carries noise from both images.
pub fn geometry_gap(cfg: &SynthConfig) -> GeometryGap {
    let shape_residual_rms = plane_residual_rms(&base_face()) * cfg.pose.scale[0];
    let z = cfg.pose.distance[1];
    let f = cfg.rig.left.fx.min(cfg.rig.right.fx);
    let depth_noise_std = z * z / (f * cfg.rig.baseline) * cfg.landmark_noise * 2f64.sqrt();
    GeometryGap {
        shape_residual_rms,
        depth_noise_std,
        ratio: shape_residual_rms / depth_noise_std,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub label: Liveness,
    pub split: Split,
    /// Keypoints in the right camera frame, mm.
    pub points: Vec<[f64; 3]>,
    /// Depth of each keypoint along the right camera's optical axis.
    pub depths: Vec<f64>,
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
    pub scale: f64,
}

/// One generated sample, before anything is written to disk.
#[derive(Clone, Debug)]
pub struct SynthSample {
    pub truth: SynthTruth,
    pub keypoints: Vec<KeypointPair>,
    pub left: GrayImage,
    pub right: GrayImage,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthOutput {
    pub manifest: PathBuf,
    pub calibration: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

fn symmetric(rng: &mut ChaCha8Rng, half: f64) -> f64 {
    uniform(rng, -half, half)
}

fn normal(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        0.0
    } else {
        sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
    }
}

fn in_view(px: [f64; 2], rig: &SynthRig, margin: f64) -> bool {
    px[0] >= margin && px[1] >= margin && px[0] <= rig.width as f64 - 1.0 - margin && px[1] <= rig.height as f64 - 1.0 - margin
}

/// Generates sample `index` of the dataset described by `cfg`.
pub fn synth_sample(cfg: &SynthConfig, rig: &StereoRig, index: usize, label: Liveness, split: Split) -> Result<SynthSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(stage_seed(cfg.seed, &format!("synth-{index}")));
    let base = base_face();
    let shape: Vec<Vector3<f64>> = base
        .iter()
        .map(|p| {
            p + Vector3::new(
                normal(&mut rng, cfg.depth_noise),
                normal(&mut rng, cfg.depth_noise),
                normal(&mut rng, cfg.depth_noise),
            )
        })
        .collect();
    let shape = match label {
        Liveness::Live => shape,
        Liveness::Fake => flatten_to_plane(&shape),
    };

    let p = &cfg.pose;
    let angle_factor = if split == Split::Template { p.template_angle_factor } else { 1.0 };
    for _ in 0..cfg.max_retries {
        let yaw = symmetric(&mut rng, p.yaw * angle_factor);
        let pitch = symmetric(&mut rng, p.pitch * angle_factor);
        let roll = symmetric(&mut rng, p.roll * angle_factor);
        let scale = uniform(&mut rng, p.scale[0], p.scale[1]);
        let t = Vector3::new(
            symmetric(&mut rng, p.offset),
            symmetric(&mut rng, p.offset),
            uniform(&mut rng, p.distance[0], p.distance[1]),
        );
        let r = Rotation3::from_euler_angles(pitch.to_radians(), yaw.to_radians(), roll.to_radians());
        let cam: Vec<Vector3<f64>> = shape.iter().map(|q| r * (q * scale) + t).collect();
        let left_frame_ok = cam.iter().all(|q| (rig.rotation() * q + rig.translation()).z > 0.0);
        if !left_frame_ok || cam.iter().any(|q| q.z <= 0.0) {
            continue;
        }
        let mut keypoints = Vec::with_capacity(NUM_KEYPOINTS);
        let mut ok = true;
        for (k, q) in cam.iter().enumerate() {
            let pr = rig.project_right(q);
            let pl = rig.project_left(q);
            if !in_view(pr, &cfg.rig, cfg.margin) || !in_view(pl, &cfg.rig, cfg.margin) {
                ok = false;
                break;
            }
            keypoints.push(KeypointPair {
                index: k + 1,
                ul: pl[0] + normal(&mut rng, cfg.landmark_noise),
                vl: pl[1] + normal(&mut rng, cfg.landmark_noise),
                ur: pr[0] + normal(&mut rng, cfg.landmark_noise),
                vr: pr[1] + normal(&mut rng, cfg.landmark_noise),
            });
        }
        if !ok {
            continue;
        }
        let style = match label {
            Liveness::Live => &cfg.live_texture,
            Liveness::Fake => &cfg.fake_texture,
        };
        let right = render(&cfg.rig, keypoints.iter().map(|k| [k.ur, k.vr]), style, &mut rng);
        let left = render(&cfg.rig, keypoints.iter().map(|k| [k.ul, k.vl]), style, &mut rng);
        return Ok(SynthSample {
            truth: SynthTruth {
                label,
                split,
                points: cam.iter().map(|q| [q.x, q.y, q.z]).collect(),
                depths: cam.iter().map(|q| q.z).collect(),
                yaw,
                pitch,
                roll,
                scale,
            },
            keypoints,
            left,
            right,
        });
    }
    Err(Error::Degenerate(format!(
        "no pose kept all landmarks in view after {} attempts",
        cfg.max_retries
    ))
    .at_stage("synth", Some(index)))
}

/// Renders a face ellipse around the landmarks on a flat background.
fn render(
    rig: &SynthRig,
    points: impl Iterator<Item = [f64; 2]>,
    style: &TextureStyle,
    rng: &mut ChaCha8Rng,
) -> GrayImage {
    let (w, h) = (rig.width, rig.height);
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for [x, y] in points {
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    let (cx, cy) = ((x0 + x1) / 2.0, (y0 + y1) / 2.0);
    let (ax, ay) = ((x1 - x0) * 0.5 * 1.45, (y1 - y0) * 0.5 * 1.45);

    let pad = (3.0 * style.blur).ceil() as i64 + 1;
    let rx0 = ((cx - ax).floor() as i64 - pad).max(0);
    let ry0 = ((cy - ay).floor() as i64 - pad).max(0);
    let rx1 = ((cx + ax).ceil() as i64 + pad).min(w as i64 - 1);
    let ry1 = ((cy + ay).ceil() as i64 + pad).min(h as i64 - 1);
    let (rw, rh) = ((rx1 - rx0 + 1) as u32, (ry1 - ry0 + 1) as u32);

    let grain = Normal::new(0.0, 1.0).expect("unit normal");
    let mut field: ImageBuffer<Luma<f32>, Vec<f32>> =
        ImageBuffer::from_fn(rw, rh, |_, _| Luma([grain.sample(rng) as f32]));
    if style.blur > 0.0 {
        field = image::imageops::blur(&field, style.blur as f32);
    }
    let base = uniform(rng, 125.0, 155.0);
    let angle = uniform(rng, 0.0, std::f64::consts::TAU);
    let (gx, gy) = (angle.cos() * 25.0 / ax.max(1.0), angle.sin() * 25.0 / ay.max(1.0));
    let phase = [uniform(rng, 0.0, 1.0), uniform(rng, 0.0, 1.0)];

    let mut data = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            let bg = 80.0 + 20.0 * x as f64 / w as f64;
            data[y * w + x] = bg.round() as u8;
        }
    }
    for y in ry0..=ry1 {
        for x in rx0..=rx1 {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            if (dx / ax).powi(2) + (dy / ay).powi(2) > 1.0 {
                continue;
            }
            let noise = field.get_pixel((x - rx0) as u32, (y - ry0) as u32)[0] as f64;
            let mut v = base + style.contrast * (gx * dx + gy * dy + style.grain * noise);
            if style.halftone_period > 0.0 {
                let f = std::f64::consts::TAU / style.halftone_period;
                v += style.halftone_amplitude
                    * (f * (x as f64 + phase[0] * style.halftone_period)).cos()
                    * (f * (y as f64 + phase[1] * style.halftone_period)).cos();
            }
            data[y as usize * w + x as usize] = v.round().clamp(0.0, 255.0) as u8;
        }
    }
    GrayImage::new(w, h, data).expect("buffer matches image size")
}

/// Split layout in generation order: `(split, label)` per sample.
pub fn synth_layout(counts: &SynthCounts) -> Vec<(Split, Liveness)> {
    let mut out = vec![(Split::Template, Liveness::Live); counts.template];
    for (split, n) in [
        (Split::Train, counts.train_per_class),
        (Split::Average, counts.average_per_class),
        (Split::Test, counts.test_per_class),
    ] {
        for _ in 0..n {
            out.push((split, Liveness::Live));
            out.push((split, Liveness::Fake));
        }
    }
    out
}

/// Writes `calibration.json`, `manifest.json`, and per-sample images,
/// landmark files and ground truth under `out`.
pub fn synth_generate(cfg: &SynthConfig, out: &Path) -> Result<SynthOutput> {
    cfg.validate().map_err(|e| e.at_stage("synth", None))?;
    let rig = cfg.rig.stereo_rig()?;
    for sub in ["images", "landmarks", "truth"] {
        let d = out.join(sub);
        fs::create_dir_all(&d).map_err(|e| Error::file(d, e))?;
    }
    let calibration = out.join("calibration.json");
    write_json(&calibration, &CalibrationFile::from_rig(&rig, "mm"))?;

    let layout = synth_layout(&cfg.counts);
    let mut entries = Vec::with_capacity(layout.len());
    for (i, &(split, label)) in layout.iter().enumerate() {
        let sample = synth_sample(cfg, &rig, i, label, split)?;
        let entry = ManifestEntry {
            left: PathBuf::from(format!("images/{i:04}_left.png")),
            right: PathBuf::from(format!("images/{i:04}_right.png")),
            landmarks: PathBuf::from(format!("landmarks/{i:04}.json")),
            label,
            split,
        };
        let tag = |e: Error| e.at_stage("synth", Some(i));
        save_gray_png(&out.join(&entry.left), &sample.left).map_err(tag)?;
        save_gray_png(&out.join(&entry.right), &sample.right).map_err(tag)?;
        write_json(
            &out.join(&entry.landmarks),
            &LandmarkFile {
                points: sample.keypoints,
            },
        )
        .map_err(tag)?;
        write_json(&out.join(format!("truth/{i:04}.json")), &sample.truth).map_err(tag)?;
        entries.push(entry);
    }
    let manifest = out.join("manifest.json");
    write_json(&manifest, &entries)?;
    log::info!("synth: wrote {} samples to {}", entries.len(), out.display());
    Ok(SynthOutput {
        manifest,
        calibration,
        entries,
    })
}
