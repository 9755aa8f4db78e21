//! Browser demo: three small views into the liveness pipeline, each returning
//! a JSON string the static page draws on a canvas.
//!
//! The plain-Rust functions (`*_report`) do the work and are what the native
//! tests exercise; the `#[wasm_bindgen]` wrappers only serialize.

use liveface::classifier::evaluate;
use liveface::geometry::AbstractFace;
use liveface::pipeline::synth::{base_face, synth_sample};
use liveface::pipeline::{face_crop, Split, SynthConfig};
use liveface::registration::{register_iterative, RegistrationConfig, TemplateFace};
use liveface::texture::{lbp_uniform, SUPPORTED_SCALES};
use liveface::{Liveness, Result};
use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn arrays(points: &[Vector3<f64>]) -> Vec<[f64; 3]> {
    points.iter().map(|p| [p.x, p.y, p.z]).collect()
}

/// Moves the canonical face by a random similarity, throws `outliers`
/// landmarks far off, then registers it back onto the canonical face.
pub fn registration_report(seed: u64, outliers: usize) -> Result<Value> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let template_pts = base_face();
    let rot = Rotation3::from_euler_angles(
        rng.random_range(-0.6..0.6),
        rng.random_range(-0.6..0.6),
        rng.random_range(-3.1..3.1),
    );
    let scale = rng.random_range(0.7..1.4);
    let shift = Vector3::new(gauss(&mut rng), gauss(&mut rng), gauss(&mut rng)) * 40.0 + Vector3::new(0.0, 0.0, 500.0);
    let mut face: Vec<Vector3<f64>> = template_pts.iter().map(|p| rot * p * scale + shift).collect();

    let outliers = outliers.min(template_pts.len());
    let mut order: Vec<usize> = (0..face.len()).collect();
    for i in 0..outliers {
        let j = rng.random_range(i..order.len());
        order.swap(i, j);
    }
    let mut corrupted = order[..outliers].to_vec();
    corrupted.sort_unstable();
    for &j in &corrupted {
        face[j] += Vector3::new(gauss(&mut rng), gauss(&mut rng), gauss(&mut rng)) * 60.0;
    }

    let template = TemplateFace::new(arrays(&template_pts))?;
    let reg = register_iterative(&AbstractFace::new(arrays(&face))?, &template, &RegistrationConfig::default())?;
    let clean: Vec<usize> = (0..face.len()).filter(|j| !corrupted.contains(j)).collect();
    let clean_error = clean
        .iter()
        .map(|&j| (reg.points[j] - template_pts[j]).norm())
        .sum::<f64>()
        / clean.len().max(1) as f64;

    Ok(json!({
        "template": arrays(&template_pts),
        "registered": arrays(&reg.points),
        "corrupted": corrupted,
        "used": reg.rounds.last().map(|r| r.used.clone()).unwrap_or_default(),
        "objectives": reg.rounds.iter().map(|r| r.objective).collect::<Vec<_>>(),
        "clean_error_mm": clean_error,
    }))
}

/// Renders one live and one fake synthetic face and returns the normalized
/// crop plus its uniform LBP label maps at each supported scale.
pub fn texture_report(seed: u64) -> Result<Value> {
    let cfg = SynthConfig {
        seed,
        ..SynthConfig::default()
    };
    let rig = cfg.rig.stereo_rig()?;
    let mut classes = Vec::new();
    for (index, label) in [(0, Liveness::Live), (1, Liveness::Fake)] {
        let sample = synth_sample(&cfg, &rig, index, label, Split::Test)?;
        let crop = face_crop(&sample.right, &sample.keypoints, liveface::texture::DEFAULT_EXPANSION)?;
        let mut maps = Vec::new();
        for (p, r) in SUPPORTED_SCALES {
            let map = lbp_uniform(&crop, p, r)?;
            let mut hist = vec![0u32; if p == 8 { 59 } else { 243 }];
            for &l in &map.labels {
                hist[l as usize] += 1;
            }
            maps.push(json!({ "neighbors": p, "radius": r, "labels": map.labels, "histogram": hist }));
        }
        classes.push(json!({
            "label": if label == Liveness::Live { "live" } else { "fake" },
            "width": crop.image().width(),
            "height": crop.image().height(),
            "crop": crop.image().data(),
            "scales": maps,
        }));
    }
    Ok(Value::Array(classes))
}

/// Draws `n` live scores from N(separation, 1) and `n` fake scores from
/// N(0, 1) and reports the ROC curve, AUC and EER.
pub fn roc_report(separation: f64, n: usize, seed: u64) -> Result<Value> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n.max(1);
    let mut scores = Vec::with_capacity(2 * n);
    let mut labels = Vec::with_capacity(2 * n);
    for _ in 0..n {
        scores.push(gauss(&mut rng) + separation);
        labels.push(Liveness::Live);
        scores.push(gauss(&mut rng));
        labels.push(Liveness::Fake);
    }
    let report = evaluate(&scores, &labels, separation / 2.0)?;
    Ok(json!({
        "auc": report.auc,
        "eer": report.eer,
        "accuracy": report.accuracy,
        "fpr": report.roc.iter().map(|p| p.fpr).collect::<Vec<_>>(),
        "tpr": report.roc.iter().map(|p| p.tpr).collect::<Vec<_>>(),
    }))
}

#[wasm_bindgen]
pub fn register_face(seed: u32, outliers: u32) -> std::result::Result<String, JsError> {
    Ok(registration_report(seed.into(), outliers as usize)?.to_string())
}

#[wasm_bindgen]
pub fn texture_maps(seed: u32) -> std::result::Result<String, JsError> {
    Ok(texture_report(seed.into())?.to_string())
}

#[wasm_bindgen]
pub fn roc_curve(separation: f64, n: u32, seed: u32) -> std::result::Result<String, JsError> {
    Ok(roc_report(separation, n as usize, seed.into())?.to_string())
}
