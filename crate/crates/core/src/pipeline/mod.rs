//! File-level orchestration: manifests, calibration and landmark files,
//! model bundles, training, evaluation, and the synthetic data generator.

mod bundle;
mod config;
mod features;
pub mod io;
mod manifest;
mod run;
pub mod synth;

use std::time::Instant;

use sha2::{Digest, Sha256};

pub use bundle::{ModelBundle, Provenance};
pub use config::{CodebookConfig, PipelineConfig, SvmConfig};
pub use features::{face_crop, mslbp_from_image, FeatureModels, SampleFeatures};
pub use manifest::{Dataset, ManifestEntry, Split};
pub use run::{
    build_template_from, extract_samples, predict, run_eval, run_extract, run_train, EvalOutcome, Extracted, Prediction, Timings, TrainOutcome,
};
pub use synth::{synth_generate, SynthConfig, SynthOutput};

/// Derives an independent stage seed from the root seed.
pub fn stage_seed(root: u64, stage: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    h.update(stage.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

pub(crate) fn hex_digest(parts: impl IntoIterator<Item = impl AsRef<[u8]>>) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_ref());
        h.update([0u8]);
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs `f`, logging and recording its wall-clock time under `stage`.
pub(crate) fn timed<T>(timings: &mut Timings, stage: &str, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    let secs = start.elapsed().as_secs_f64();
    log::info!("{stage}: {secs:.3}s");
    timings.stages.insert(stage.to_string(), secs);
    out
}
