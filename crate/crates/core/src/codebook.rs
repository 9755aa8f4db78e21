//! K-means codebook over MSLBP label triples, bag-of-visual-words encoding,
//! and class-average code faces.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::texture::MslbpFeatureFace;
use crate::{Error, Liveness, Result};

pub const CODEBOOK_SIZE: usize = 256;

/// Codewords in MSLBP label space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    pub k: usize,
    pub words: Vec<[f64; 3]>,
    pub seed: u64,
}

impl Codebook {
    pub fn new(words: Vec<[f64; 3]>, seed: u64) -> Result<Self> {
        if words.is_empty() || words.len() > CODEBOOK_SIZE {
            return Err(Error::invalid(format!(
                "codebook must hold 1..={CODEBOOK_SIZE} words, got {}",
                words.len()
            )));
        }
        if words.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("codebook contains non-finite values"));
        }
        Ok(Codebook {
            k: words.len(),
            words,
            seed,
        })
    }

    /// Index of the nearest word, lowest index on ties.
    #[inline]
    pub fn nearest(&self, v: [f64; 3]) -> usize {
        nearest(&self.words, v).0
    }
}

#[inline]
fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    let d0 = a[0] - b[0];
    let d1 = a[1] - b[1];
    let d2 = a[2] - b[2];
    d0 * d0 + d1 * d1 + d2 * d2
}

#[inline]
fn nearest(words: &[[f64; 3]], v: [f64; 3]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, w) in words.iter().enumerate() {
        let d = dist2(*w, v);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            k: CODEBOOK_SIZE,
            max_iters: 100,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KMeansReport {
    pub codebook: Codebook,
    /// Within-cluster sum of squares: entry 0 after seeding, then one entry
    /// per Lloyd iteration.
    pub inertia: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Multiset of sample vectors stored as distinct values with multiplicities.
///
/// Lloyd's algorithm and k-means++ seeding depend on the samples only through
/// this multiset, so duplicates are collapsed before clustering.
#[derive(Clone, Debug, Default)]
pub struct SampleCounts {
    counts: BTreeMap<[u64; 3], u64>,
}

impl SampleCounts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, v: [f64; 3], weight: u64) {
        *self.counts.entry(v.map(f64::to_bits)).or_insert(0) += weight;
    }

    pub fn add_face(&mut self, face: &MslbpFeatureFace) {
        for p in &face.pixels {
            self.add(p.map(f64::from), 1);
        }
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    fn into_vecs(self) -> (Vec<[f64; 3]>, Vec<f64>) {
        self.counts
            .into_iter()
            .map(|(k, w)| (k.map(f64::from_bits), w as f64))
            .unzip()
    }
}

impl FromIterator<[f64; 3]> for SampleCounts {
    fn from_iter<I: IntoIterator<Item = [f64; 3]>>(iter: I) -> Self {
        let mut s = SampleCounts::new();
        for v in iter {
            s.add(v, 1);
        }
        s
    }
}

pub fn train_codebook(samples: &[[f64; 3]], cfg: &KMeansConfig) -> Result<KMeansReport> {
    if samples.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("k-means samples must be finite"));
    }
    train_codebook_counts(samples.iter().copied().collect(), cfg)
}

/// Seeded k-means++ followed by Lloyd iterations until the assignment stops
/// changing or `max_iters` is reached.
pub fn train_codebook_counts(samples: SampleCounts, cfg: &KMeansConfig) -> Result<KMeansReport> {
    let k = cfg.k;
    if k == 0 || k > CODEBOOK_SIZE {
        return Err(Error::invalid(format!("k must be in 1..={CODEBOOK_SIZE}, got {k}")));
    }
    if samples.distinct() < k {
        return Err(Error::invalid(format!(
            "need at least {k} distinct samples, got {}",
            samples.distinct()
        )));
    }
    let (points, weights) = samples.into_vecs();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut centers = kmeans_plus_plus(&points, &weights, k, &mut rng);

    let mut assign = vec![usize::MAX; points.len()];
    let mut dists = vec![0.0; points.len()];
    let mut inertia = Vec::with_capacity(cfg.max_iters + 1);
    assign_points(&points, &centers, &mut assign, &mut dists);
    inertia.push(weighted_sum(&dists, &weights));

    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        update_centers(&points, &weights, &assign, &dists, &mut centers);
        let changed = assign_points(&points, &centers, &mut assign, &mut dists);
        inertia.push(weighted_sum(&dists, &weights));
        if !changed {
            converged = true;
            break;
        }
    }
    Ok(KMeansReport {
        codebook: Codebook::new(centers, cfg.seed)?,
        inertia,
        iterations,
        converged,
    })
}

fn weighted_sum(d: &[f64], w: &[f64]) -> f64 {
    d.iter().zip(w).map(|(d, w)| d * w).sum()
}

fn kmeans_plus_plus(points: &[[f64; 3]], weights: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    let mut centers = Vec::with_capacity(k);
    centers.push(points[sample_index(weights, rng)]);
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(*p, centers[0])).collect();
    while centers.len() < k {
        let scores: Vec<f64> = d2.iter().zip(weights).map(|(d, w)| d * w).collect();
        let idx = if scores.iter().sum::<f64>() > 0.0 {
            sample_index(&scores, rng)
        } else {
            // unreachable with >= k distinct points, kept for safety
            d2.iter().position(|&d| d > 0.0).unwrap_or(0)
        };
        let c = points[idx];
        centers.push(c);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(*p, c));
        }
    }
    centers
}

fn sample_index(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if target < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Returns whether any assignment changed.
fn assign_points(points: &[[f64; 3]], centers: &[[f64; 3]], assign: &mut [usize], dists: &mut [f64]) -> bool {
    let mut changed = false;
    for (i, p) in points.iter().enumerate() {
        let (c, d) = nearest(centers, *p);
        if assign[i] != c {
            assign[i] = c;
            changed = true;
        }
        dists[i] = d;
    }
    changed
}

fn update_centers(
    points: &[[f64; 3]],
    weights: &[f64],
    assign: &[usize],
    dists: &[f64],
    centers: &mut [[f64; 3]],
) {
    let k = centers.len();
    let mut sums = vec![[0.0f64; 3]; k];
    let mut mass = vec![0.0f64; k];
    for ((p, &w), &c) in points.iter().zip(weights).zip(assign) {
        mass[c] += w;
        for j in 0..3 {
            sums[c][j] += w * p[j];
        }
    }
    let mut taken = vec![false; points.len()];
    for c in 0..k {
        if mass[c] > 0.0 {
            centers[c] = sums[c].map(|s| s / mass[c]);
        } else {
            // re-seed an empty cluster at the point worst served by its centre
            let far = (0..points.len())
                .filter(|&i| !taken[i])
                .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
            if let Some(i) = far {
                taken[i] = true;
                centers[c] = points[i];
            }
        }
    }
}

/// Per-pixel codeword indices over the crop.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BovwCodeFace {
    pub width: usize,
    pub height: usize,
    pub codes: Vec<u8>,
}

impl BovwCodeFace {
    pub fn new(width: usize, height: usize, codes: Vec<u8>) -> Result<Self> {
        if codes.len() != width * height || width == 0 || height == 0 {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                found: codes.len(),
            });
        }
        Ok(BovwCodeFace {
            width,
            height,
            codes,
        })
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.codes[y * self.width + x]
    }
}

pub fn encode_bovw(face: &MslbpFeatureFace, cb: &Codebook) -> BovwCodeFace {
    let codes = face
        .pixels
        .iter()
        .map(|p| cb.nearest(p.map(f64::from)) as u8)
        .collect();
    BovwCodeFace {
        width: face.width,
        height: face.height,
        codes,
    }
}

/// Rounded per-pixel mean code face of one class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AverageFace {
    pub class: Liveness,
    pub count: usize,
    pub face: BovwCodeFace,
}

/// Averages code indices per pixel, rounding halves away from zero.
pub fn build_average_face<'a>(
    faces: impl IntoIterator<Item = (Liveness, &'a BovwCodeFace)>,
) -> Result<AverageFace> {
    let mut it = faces.into_iter();
    let (class, first) = it
        .next()
        .ok_or_else(|| Error::invalid("average face needs at least one code face"))?;
    let mut sums: Vec<u64> = first.codes.iter().map(|&c| c as u64).collect();
    let mut count = 1u64;
    for (c, face) in it {
        if c != class {
            return Err(Error::invalid(format!(
                "average face mixes classes {class} and {c}"
            )));
        }
        if face.width != first.width || face.height != first.height {
            return Err(Error::DimensionMismatch {
                expected: first.codes.len(),
                found: face.codes.len(),
            });
        }
        for (s, &v) in sums.iter_mut().zip(&face.codes) {
            *s += v as u64;
        }
        count += 1;
    }
    // floor(sum / n + 1/2) for non-negative sums
    let codes = sums.iter().map(|&s| ((2 * s + count) / (2 * count)) as u8).collect();
    Ok(AverageFace {
        class,
        count: count as usize,
        face: BovwCodeFace::new(first.width, first.height, codes)?,
    })
}
