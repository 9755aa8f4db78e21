use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use liveface::pipeline::io::{load_calibration, load_gray, load_landmarks, write_json};
use liveface::pipeline::{
    build_template_from, predict, run_eval, run_extract, run_train, synth_generate, Dataset, ModelBundle,
    PipelineConfig, Split,
};

#[derive(Parser)]
#[command(name = "liveface", version, about = "Stereo face anti-spoofing: TFBD + SPMT features, SVMs, fusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON pipeline config; missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed, overriding the config's.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn config(&self) -> liveface::Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
            cfg.synth.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct Data {
    /// JSON array of {left, right, landmarks, label, split}.
    #[arg(long)]
    manifest: PathBuf,
    /// Calibration JSON; defaults to calibration.json next to the manifest.
    #[arg(long)]
    calibration: Option<PathBuf>,
}

impl Data {
    fn load(&self) -> liveface::Result<Dataset> {
        Dataset::load(&self.manifest, self.calibration.as_deref())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic stereo-face dataset.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Average the template split into a template face.
    BuildTemplate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Data,
        /// Output JSON file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train codebook, average faces and both SVMs; write a model bundle.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Data,
        #[arg(long)]
        bundle: PathBuf,
        /// Pick C and gamma on a held-out part of the train split.
        #[arg(long)]
        grid_search: bool,
        /// Face box expansion factor for cropping.
        #[arg(long)]
        expansion: Option<f64>,
    },
    /// Write TFBD and SPMT descriptors of one split.
    Extract {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Data,
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the bundle on the test split.
    Eval {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: Data,
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify one sample.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        calibration: PathBuf,
        #[arg(long)]
        landmarks: PathBuf,
        /// Right-camera image.
        #[arg(long)]
        image: PathBuf,
    },
}

fn print_json<T: serde::Serialize>(value: &T) -> liveface::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn load_bundle(dir: &Path) -> liveface::Result<ModelBundle> {
    ModelBundle::load(dir).map_err(|e| e.at_stage("bundle", None))
}

fn run(cli: Cli) -> liveface::Result<()> {
    match cli.command {
        Command::Synth { common, out } => {
            let cfg = common.config()?;
            let written = synth_generate(&cfg.synth, &out)?;
            println!("{} samples -> {}", written.entries.len(), written.manifest.display());
        }
        Command::BuildTemplate { common, data, out } => {
            common.config()?;
            let template = build_template_from(&data.load()?)?;
            write_json(&out, &template)?;
            println!("template -> {}", out.display());
        }
        Command::Train {
            common,
            data,
            bundle,
            grid_search,
            expansion,
        } => {
            let mut cfg = common.config()?;
            cfg.svm.grid_search |= grid_search;
            if let Some(e) = expansion {
                cfg.expansion = e;
            }
            let outcome = run_train(&data.load()?, &cfg, &bundle)?;
            print_json(&outcome.timings)?;
        }
        Command::Extract {
            common,
            data,
            bundle,
            split,
            out,
        } => {
            common.config()?;
            let split: Split = split.parse()?;
            let bundle = load_bundle(&bundle)?;
            let (features, timings) = run_extract(&data.load()?, &bundle, split, &out)?;
            log::info!("extracted {} samples", features.indices.len());
            print_json(&timings)?;
        }
        Command::Eval {
            common,
            data,
            bundle,
            out,
        } => {
            common.config()?;
            let bundle = load_bundle(&bundle)?;
            let outcome = run_eval(&data.load()?, &bundle, Some(&out))?;
            for (name, r) in [("tfbd", &outcome.tfbd), ("spmt", &outcome.spmt), ("fused", &outcome.fused)] {
                println!("{name:>5}: accuracy {:.4}  auc {:.4}  eer {:.4}", r.accuracy, r.auc, r.eer);
            }
        }
        Command::Predict {
            common,
            bundle,
            calibration,
            landmarks,
            image,
        } => {
            common.config()?;
            let bundle = load_bundle(&bundle)?;
            let rig = load_calibration(&calibration).map_err(|e| e.at_stage("load", None))?;
            let kps = load_landmarks(&landmarks).map_err(|e| e.at_stage("load", None))?;
            let img = load_gray(&image).map_err(|e| e.at_stage("load", None))?;
            print_json(&predict(&bundle, &rig, &kps, &img)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
