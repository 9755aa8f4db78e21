use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::geometry::{KeypointPair, StereoRig};
use crate::{Error, Liveness, Result};

use super::io::{load_calibration, load_landmarks, read_json};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Template,
    Train,
    Average,
    Test,
}

impl Split {
    pub const ALL: [Split; 4] = [Split::Template, Split::Train, Split::Average, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Template => "template",
            Split::Train => "train",
            Split::Average => "average",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|sp| sp.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown split `{s}`")))
    }
}

/// One stereo sample. Paths are relative to the manifest's directory unless
/// absolute.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub left: PathBuf,
    pub right: PathBuf,
    pub landmarks: PathBuf,
    pub label: Liveness,
    pub split: Split,
}

/// Validated manifest with landmarks loaded and the rig composed.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub root: PathBuf,
    pub entries: Vec<ManifestEntry>,
    pub keypoints: Vec<Vec<KeypointPair>>,
    pub rig: StereoRig,
}

impl Dataset {
    /// Loads and validates a manifest. The calibration defaults to
    /// `calibration.json` next to the manifest.
    pub fn load(manifest: &Path, calibration: Option<&Path>) -> Result<Self> {
        let root = manifest.parent().map(Path::to_path_buf).unwrap_or_default();
        let tag = |e: Error| e.at_stage("load", None);
        let entries: Vec<ManifestEntry> = read_json(manifest).map_err(tag)?;
        let cal_path = calibration.map_or_else(|| root.join("calibration.json"), Path::to_path_buf);
        let rig = load_calibration(&cal_path).map_err(tag)?;
        Dataset::from_entries(root, entries, rig)
    }

    pub fn from_entries(root: PathBuf, entries: Vec<ManifestEntry>, rig: StereoRig) -> Result<Self> {
        let mut owner: HashMap<PathBuf, (usize, Split)> = HashMap::new();
        let mut keypoints = Vec::with_capacity(entries.len());
        for (i, entry) in entries.iter().enumerate() {
            let tag = |e: Error| e.at_stage("load", Some(i));
            for rel in [&entry.left, &entry.right, &entry.landmarks] {
                let path = root.join(rel);
                if !path.is_file() {
                    return Err(tag(Error::file(path, "file not found")));
                }
                if let Some(&(j, split)) = owner.get(rel) {
                    if split != entry.split {
                        return Err(tag(Error::file(
                            path,
                            format!(
                                "used by entry {j} in split `{}` and again in split `{}`",
                                split.name(),
                                entry.split.name()
                            ),
                        )));
                    }
                }
                owner.insert(rel.clone(), (i, entry.split));
            }
            keypoints.push(load_landmarks(&root.join(&entry.landmarks)).map_err(tag)?);
        }
        Ok(Dataset {
            root,
            entries,
            keypoints,
            rig,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.entries.len())
            .filter(|&i| self.entries[i].split == split)
            .collect()
    }

    pub fn resolve(&self, rel: &Path) -> PathBuf {
        self.root.join(rel)
    }

    /// Stable fingerprint of the samples in a split.
    pub fn split_hash(&self, split: Split) -> String {
        let mut keys: Vec<String> = self
            .indices(split)
            .into_iter()
            .map(|i| {
                let e = &self.entries[i];
                format!(
                    "{}|{}|{}|{}",
                    e.left.display(),
                    e.right.display(),
                    e.landmarks.display(),
                    e.label
                )
            })
            .collect();
        keys.sort();
        super::hex_digest(keys)
    }
}
