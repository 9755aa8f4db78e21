use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::{
    evaluate, fuse, grid_search, train_svm, EvalReport, Standardizer, SvmModel, SvmParams,
};
use crate::codebook::{build_average_face, encode_bovw, train_codebook_counts, KMeansConfig, SampleCounts};
use crate::geometry::{build_abstract_face, KeypointPair, StereoRig};
use crate::registration::{build_template, TemplateFace};
use crate::texture::{GrayImage, MslbpFeatureFace};
use crate::{fvec, Error, Liveness, Result};

use super::bundle::{ModelBundle, Provenance};
use super::features::{mslbp_from_image, FeatureModels};
use super::io::{load_gray, write_json};
use super::manifest::{Dataset, Split};
use super::{hex_digest, stage_seed, timed, PipelineConfig};

/// Wall-clock accounting, in seconds per stage plus per-sample descriptor cost.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub stages: BTreeMap<String, f64>,
    pub tfbd_ms_per_sample: Option<f64>,
    pub spmt_ms_per_sample: Option<f64>,
}

/// Descriptors for a set of samples, in manifest order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Extracted {
    pub indices: Vec<usize>,
    pub labels: Vec<Liveness>,
    pub tfbd: Vec<Vec<f64>>,
    pub spmt: Vec<Vec<f64>>,
}

fn load_right(ds: &Dataset, i: usize) -> Result<GrayImage> {
    load_gray(&ds.resolve(&ds.entries[i].right))
}

fn split_mslbp(ds: &Dataset, indices: &[usize], expansion: f64, stage: &'static str) -> Result<Vec<MslbpFeatureFace>> {
    indices
        .iter()
        .map(|&i| {
            load_right(ds, i)
                .and_then(|img| mslbp_from_image(&img, &ds.keypoints[i], expansion))
                .map_err(|e| e.at_stage(stage, Some(i)))
        })
        .collect()
}

fn require(ds: &Dataset, split: Split, stage: &'static str) -> Result<Vec<usize>> {
    let idx = ds.indices(split);
    if idx.is_empty() {
        return Err(Error::invalid(format!("{} split is empty", split.name())).at_stage(stage, None));
    }
    Ok(idx)
}

fn require_both_classes(ds: &Dataset, idx: &[usize], split: Split, stage: &'static str) -> Result<()> {
    for class in [Liveness::Live, Liveness::Fake] {
        if !idx.iter().any(|&i| ds.entries[i].label == class) {
            return Err(Error::invalid(format!("{} split has no {class} samples", split.name()))
                .at_stage(stage, None));
        }
    }
    Ok(())
}

fn record_per_sample(timings: &mut Timings, tfbd: f64, spmt: f64, n: usize) {
    if n > 0 {
        timings.tfbd_ms_per_sample = Some(tfbd * 1e3 / n as f64);
        timings.spmt_ms_per_sample = Some(spmt * 1e3 / n as f64);
    }
}

/// Computes both descriptors for the given samples.
pub fn extract_samples(
    ds: &Dataset,
    models: &FeatureModels,
    indices: &[usize],
    timings: &mut Timings,
) -> Result<Extracted> {
    let mut out = Extracted::default();
    let (mut t_tfbd, mut t_spmt, mut t_load) = (0.0, 0.0, 0.0);
    for &i in indices {
        let start = Instant::now();
        let tfbd = models
            .tfbd(&ds.rig, &ds.keypoints[i])
            .map_err(|e| e.at_stage("tfbd", Some(i)))?;
        t_tfbd += start.elapsed().as_secs_f64();

        let start = Instant::now();
        let img = load_right(ds, i).map_err(|e| e.at_stage("load", Some(i)))?;
        t_load += start.elapsed().as_secs_f64();

        let start = Instant::now();
        let spmt = models
            .spmt(&img, &ds.keypoints[i])
            .map_err(|e| e.at_stage("spmt", Some(i)))?;
        t_spmt += start.elapsed().as_secs_f64();

        out.indices.push(i);
        out.labels.push(ds.entries[i].label);
        out.tfbd.push(tfbd);
        out.spmt.push(spmt);
    }
    timings.stages.insert("tfbd".into(), t_tfbd);
    timings.stages.insert("spmt".into(), t_spmt);
    timings.stages.insert("image_load".into(), t_load);
    record_per_sample(timings, t_tfbd, t_spmt, indices.len());
    Ok(out)
}

fn fit_svm(
    x: &[Vec<f64>],
    y: &[f64],
    cfg: &PipelineConfig,
    stage: &'static str,
) -> Result<SvmModel> {
    let params: SvmParams = if cfg.svm.grid_search {
        let (best, grid) = grid_search(x, y, &cfg.svm.params, cfg.svm.holdout_fraction, stage_seed(cfg.seed, stage))
            .map_err(|e| e.at_stage(stage, None))?;
        for g in &grid {
            log::debug!("{stage}: C={} gamma={:.3e} holdout acc={:.4}", g.c, g.gamma, g.holdout_accuracy);
        }
        best
    } else {
        cfg.svm.params
    };
    let fit = train_svm(x, y, &params).map_err(|e| e.at_stage(stage, None))?;
    log::info!(
        "{stage}: {} support vectors, {} SMO iterations",
        fit.model.support_vectors.len(),
        fit.iterations
    );
    Ok(fit.model)
}

fn standardize(scaler: &Standardizer, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    x.iter().map(|v| scaler.transform(v)).collect()
}

/// Averages the abstract faces of the template split.
pub fn build_template_from(ds: &Dataset) -> Result<TemplateFace> {
    let faces = require(ds, Split::Template, "template")?
        .into_iter()
        .map(|i| build_abstract_face(&ds.rig, &ds.keypoints[i]).map_err(|e| e.at_stage("template", Some(i))))
        .collect::<Result<Vec<_>>>()?;
    build_template(&faces).map_err(|e| e.at_stage("template", None))
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub bundle: ModelBundle,
    pub features: Extracted,
    pub timings: Timings,
}

/// Builds template, codebook, average faces and both SVMs, then writes the
/// bundle (and the training descriptors) to `out`.
pub fn run_train(ds: &Dataset, cfg: &PipelineConfig, out: &Path) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut timings = Timings::default();

    require(ds, Split::Template, "template")?;
    let train_idx = require(ds, Split::Train, "train")?;
    let average_idx = require(ds, Split::Average, "average")?;
    require_both_classes(ds, &train_idx, Split::Train, "train")?;
    require_both_classes(ds, &average_idx, Split::Average, "average")?;

    let template = timed(&mut timings, "template", || build_template_from(ds))?;

    let train_mslbp = timed(&mut timings, "texture", || split_mslbp(ds, &train_idx, cfg.expansion, "texture"))?;

    let report = timed(&mut timings, "codebook", || {
        let n = train_mslbp.len();
        let chosen: Vec<usize> = if n <= cfg.codebook.sample_faces {
            (0..n).collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(stage_seed(cfg.seed, "codebook-faces"));
            let mut v = rand::seq::index::sample(&mut rng, n, cfg.codebook.sample_faces).into_vec();
            v.sort_unstable();
            v
        };
        let mut counts = SampleCounts::new();
        for &j in &chosen {
            counts.add_face(&train_mslbp[j]);
        }
        log::info!(
            "codebook: {} faces, {} distinct label triples",
            chosen.len(),
            counts.distinct()
        );
        let kcfg = KMeansConfig {
            k: cfg.codebook.k,
            max_iters: cfg.codebook.max_iters,
            seed: stage_seed(cfg.seed, "codebook"),
        };
        train_codebook_counts(counts, &kcfg).map_err(|e| e.at_stage("codebook", None))
    })?;
    let codebook = report.codebook;

    let (live_average, fake_average) = timed(&mut timings, "average", || -> Result<_> {
        let mslbp = split_mslbp(ds, &average_idx, cfg.expansion, "average")?;
        let codes: Vec<_> = mslbp.iter().map(|f| encode_bovw(f, &codebook)).collect();
        let of_class = |class: Liveness| {
            build_average_face(
                average_idx
                    .iter()
                    .zip(&codes)
                    .filter(|(&i, _)| ds.entries[i].label == class)
                    .map(|(_, c)| (class, c)),
            )
            .map_err(|e| e.at_stage("average", None))
        };
        Ok((of_class(Liveness::Live)?, of_class(Liveness::Fake)?))
    })?;

    let models = FeatureModels {
        template,
        codebook,
        live_average,
        fake_average,
        registration: cfg.registration,
        expansion: cfg.expansion,
    };

    let (features, t_tfbd, t_spmt) = timed(&mut timings, "train_features", || -> Result<_> {
        let mut out = Extracted::default();
        let (mut t_tfbd, mut t_spmt) = (0.0, 0.0);
        for (&i, face) in train_idx.iter().zip(&train_mslbp) {
            let start = Instant::now();
            out.tfbd.push(
                models
                    .tfbd(&ds.rig, &ds.keypoints[i])
                    .map_err(|e| e.at_stage("tfbd", Some(i)))?,
            );
            t_tfbd += start.elapsed().as_secs_f64();
            let start = Instant::now();
            out.spmt.push(models.spmt_from_mslbp(face).map_err(|e| e.at_stage("spmt", Some(i)))?);
            t_spmt += start.elapsed().as_secs_f64();
            out.indices.push(i);
            out.labels.push(ds.entries[i].label);
        }
        Ok((out, t_tfbd, t_spmt))
    })?;
    record_per_sample(&mut timings, t_tfbd, t_spmt, features.indices.len());

    let y: Vec<f64> = features.labels.iter().map(|l| l.sign()).collect();
    let (scaler_tfbd, svm_tfbd) = timed(&mut timings, "svm_tfbd", || -> Result<_> {
        let scaler = Standardizer::fit(&features.tfbd).map_err(|e| e.at_stage("svm_tfbd", None))?;
        let x = standardize(&scaler, &features.tfbd)?;
        Ok((scaler, fit_svm(&x, &y, cfg, "svm_tfbd")?))
    })?;
    let (scaler_spmt, svm_spmt) = timed(&mut timings, "svm_spmt", || -> Result<_> {
        let scaler = Standardizer::fit(&features.spmt).map_err(|e| e.at_stage("svm_spmt", None))?;
        let x = standardize(&scaler, &features.spmt)?;
        Ok((scaler, fit_svm(&x, &y, cfg, "svm_spmt")?))
    })?;

    let config_json = serde_json::to_string(cfg)?;
    let mut counts = BTreeMap::new();
    let mut split_hashes = BTreeMap::new();
    for split in [Split::Template, Split::Train, Split::Average] {
        counts.insert(split.name().to_string(), ds.indices(split).len());
        split_hashes.insert(split.name().to_string(), ds.split_hash(split));
    }
    let mut bundle = ModelBundle {
        models,
        svm_tfbd,
        svm_spmt,
        scaler_tfbd,
        scaler_spmt,
        fusion: cfg.fusion,
        provenance: Provenance {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: cfg.seed,
            config: cfg.clone(),
            config_hash: hex_digest([config_json]),
            counts,
            split_hashes,
            codebook_iterations: report.iterations,
            codebook_inertia: report.inertia.last().copied().unwrap_or(0.0),
            svm_tfbd_params: (0.0, 0.0),
            svm_spmt_params: (0.0, 0.0),
        },
    };
    bundle.provenance.svm_tfbd_params = (bundle.svm_tfbd.c, bundle.svm_tfbd.gamma);
    bundle.provenance.svm_spmt_params = (bundle.svm_spmt.c, bundle.svm_spmt.gamma);

    timed(&mut timings, "save", || -> Result<()> {
        bundle.save(out)?;
        write_features(out, "train_", &features)
    })?;
    Ok(TrainOutcome {
        bundle,
        features,
        timings,
    })
}

fn write_features(dir: &Path, prefix: &str, f: &Extracted) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    for (name, vectors) in [("tfbd", &f.tfbd), ("spmt", &f.spmt)] {
        fvec::save(&dir.join(format!("{prefix}{name}.fvec")), vectors)?;
        let csv_path = dir.join(format!("{prefix}{name}.csv"));
        let file = fs::File::create(&csv_path).map_err(|e| Error::file(&csv_path, e))?;
        fvec::write_csv(BufWriter::new(file), vectors, &f.labels).map_err(|e| Error::file(&csv_path, e))?;
    }
    #[derive(Serialize)]
    struct SampleRow {
        index: usize,
        label: Liveness,
    }
    let rows: Vec<_> = f
        .indices
        .iter()
        .zip(&f.labels)
        .map(|(&index, &label)| SampleRow { index, label })
        .collect();
    write_json(&dir.join(format!("{prefix}samples.json")), &rows)
}

fn check_split_hygiene(ds: &Dataset, bundle: &ModelBundle, split: Split) -> Result<()> {
    let hash = ds.split_hash(split);
    if let Some((name, _)) = bundle.provenance.split_hashes.iter().find(|(_, h)| **h == hash) {
        return Err(Error::invalid(format!(
            "the {} split is identical to the `{name}` split this bundle was trained on",
            split.name()
        )));
    }
    Ok(())
}

/// Writes descriptors of one split to `out` (binary container plus CSV).
pub fn run_extract(ds: &Dataset, bundle: &ModelBundle, split: Split, out: &Path) -> Result<(Extracted, Timings)> {
    let idx = require(ds, split, "extract")?;
    let mut timings = Timings::default();
    let features = extract_samples(ds, &bundle.models, &idx, &mut timings)?;
    write_features(out, "", &features)?;
    Ok((features, timings))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub tfbd: EvalReport,
    pub spmt: EvalReport,
    pub fused: EvalReport,
    pub timings: Timings,
}

fn scores(svm: &SvmModel, scaler: &Standardizer, x: &[Vec<f64>], stage: &'static str) -> Result<Vec<f64>> {
    x.iter()
        .map(|v| scaler.transform(v).and_then(|s| svm.decision_score(&s)))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.at_stage(stage, None))
}

/// Scores the test split with each SVM and with the fused rule.
pub fn run_eval(ds: &Dataset, bundle: &ModelBundle, out: Option<&Path>) -> Result<EvalOutcome> {
    let idx = require(ds, Split::Test, "eval")?;
    check_split_hygiene(ds, bundle, Split::Test).map_err(|e| e.at_stage("eval", None))?;
    let mut timings = Timings::default();
    let f = extract_samples(ds, &bundle.models, &idx, &mut timings)?;

    let s_tfbd = scores(&bundle.svm_tfbd, &bundle.scaler_tfbd, &f.tfbd, "eval_tfbd")?;
    let s_spmt = scores(&bundle.svm_spmt, &bundle.scaler_spmt, &f.spmt, "eval_spmt")?;
    let s_fused: Vec<f64> = s_tfbd
        .iter()
        .zip(&s_spmt)
        .map(|(&a, &b)| fuse(a, b, &bundle.fusion).0)
        .collect();
    let report = |s: &[f64], threshold: f64| evaluate(s, &f.labels, threshold).map_err(|e| e.at_stage("eval", None));
    let outcome = EvalOutcome {
        tfbd: report(&s_tfbd, 0.0)?,
        spmt: report(&s_spmt, 0.0)?,
        fused: report(&s_fused, bundle.fusion.threshold)?,
        timings,
    };
    if let Some(dir) = out {
        write_eval(dir, &outcome)?;
    }
    Ok(outcome)
}

#[derive(Serialize)]
struct Summary {
    accuracy: f64,
    auc: f64,
    eer: f64,
}

fn write_eval(dir: &Path, outcome: &EvalOutcome) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
    let summary: BTreeMap<&str, Summary> = [("tfbd", &outcome.tfbd), ("spmt", &outcome.spmt), ("fused", &outcome.fused)]
        .into_iter()
        .map(|(k, r)| {
            (
                k,
                Summary {
                    accuracy: r.accuracy,
                    auc: r.auc,
                    eer: r.eer,
                },
            )
        })
        .collect();
    write_json(&dir.join("summary.json"), &summary)?;
    write_json(&dir.join("report.json"), outcome)?;
    for (name, r) in [("tfbd", &outcome.tfbd), ("spmt", &outcome.spmt), ("fused", &outcome.fused)] {
        let path = dir.join(format!("roc_{name}.csv"));
        let file = fs::File::create(&path).map_err(|e| Error::file(&path, e))?;
        let mut w = BufWriter::new(file);
        let res: std::io::Result<()> = (|| {
            writeln!(w, "fpr,tpr,threshold")?;
            for p in &r.roc {
                match p.threshold {
                    Some(t) => writeln!(w, "{},{},{}", p.fpr, p.tpr, t)?,
                    None => writeln!(w, "{},{},", p.fpr, p.tpr)?,
                }
            }
            w.flush()
        })();
        res.map_err(|e| Error::file(&path, e))?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub tfbd_score: f64,
    pub spmt_score: f64,
    pub fused_score: f64,
    pub label: Liveness,
}

/// Classifies a single stereo sample.
pub fn predict(bundle: &ModelBundle, rig: &StereoRig, kps: &[KeypointPair], right: &GrayImage) -> Result<Prediction> {
    let tfbd = bundle.models.tfbd(rig, kps).map_err(|e| e.at_stage("tfbd", None))?;
    let spmt = bundle.models.spmt(right, kps).map_err(|e| e.at_stage("spmt", None))?;
    let tfbd_score = bundle
        .svm_tfbd
        .decision_score(&bundle.scaler_tfbd.transform(&tfbd)?)
        .map_err(|e| e.at_stage("svm_tfbd", None))?;
    let spmt_score = bundle
        .svm_spmt
        .decision_score(&bundle.scaler_spmt.transform(&spmt)?)
        .map_err(|e| e.at_stage("svm_spmt", None))?;
    let (fused_score, label) = fuse(tfbd_score, spmt_score, &bundle.fusion);
    Ok(Prediction {
        tfbd_score,
        spmt_score,
        fused_score,
        label,
    })
}
