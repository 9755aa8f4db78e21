//! Two-level spatial pyramid coding of BOVW code faces.
//!
//! Layout of the 3328-d vector, in 256-entry blocks:
//!
//! | blocks | content                                   | L1 mass |
//! |--------|-------------------------------------------|---------|
//! | 0      | code histogram, whole face (level 0)      | 0.5     |
//! | 1–4    | code histograms, quadrants 1..4 (level 1) | 1.0     |
//! | 5–8    | matching degree vs. live average, q1..q4  | 1.0     |
//! | 9–12   | matching degree vs. fake average, q1..q4  | 1.0     |
//!
//! Quadrants are numbered row-major: 1 top-left, 2 top-right, 3 bottom-left,
//! 4 bottom-right.

use serde::{Deserialize, Serialize};

use crate::codebook::{AverageFace, BovwCodeFace, CODEBOOK_SIZE};
use crate::{Error, Liveness, Result};

pub const NUM_QUADRANTS: usize = 4;
pub const SPMT_DIM: usize = (1 + NUM_QUADRANTS + 2 * NUM_QUADRANTS) * CODEBOOK_SIZE;

/// Pyramid weights `w_l = 1 / 2^(L - l)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PyramidSpec {
    pub max_level: u32,
}

impl Default for PyramidSpec {
    fn default() -> Self {
        PyramidSpec { max_level: 1 }
    }
}

impl PyramidSpec {
    pub fn weight(&self, level: u32) -> f64 {
        assert!(level <= self.max_level, "level {level} above pyramid top");
        1.0 / f64::from(1u32 << (self.max_level - level))
    }
}

/// A rectangular piece of a code face.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Region {
    pub level: u32,
    /// 1-based index within the level.
    pub index: usize,
    pub width: usize,
    pub height: usize,
    pub codes: Vec<u8>,
}

impl Region {
    pub fn counts(&self) -> [u32; CODEBOOK_SIZE] {
        code_counts(&self.codes)
    }
}

pub fn code_counts(codes: &[u8]) -> [u32; CODEBOOK_SIZE] {
    let mut counts = [0u32; CODEBOOK_SIZE];
    for &c in codes {
        counts[c as usize] += 1;
    }
    counts
}

fn sub_region(face: &BovwCodeFace, x0: usize, y0: usize, w: usize, h: usize) -> Vec<u8> {
    (y0..y0 + h)
        .flat_map(|y| face.codes[y * face.width + x0..y * face.width + x0 + w].iter().copied())
        .collect()
}

/// Level 0 (whole face) followed by the four level-1 quadrants.
pub fn subdivide(face: &BovwCodeFace) -> Result<Vec<Region>> {
    if !face.width.is_multiple_of(2) || !face.height.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "code face {}x{} cannot be split into equal quadrants",
            face.width, face.height
        )));
    }
    let (qw, qh) = (face.width / 2, face.height / 2);
    let mut regions = vec![Region {
        level: 0,
        index: 1,
        width: face.width,
        height: face.height,
        codes: face.codes.clone(),
    }];
    for q in 0..NUM_QUADRANTS {
        let (col, row) = (q % 2, q / 2);
        regions.push(Region {
            level: 1,
            index: q + 1,
            width: qw,
            height: qh,
            codes: sub_region(face, col * qw, row * qh, qw, qh),
        });
    }
    Ok(regions)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodeHistogram {
    pub level: u32,
    pub region: usize,
    pub bins: Vec<f64>,
}

/// Code counts divided by the pixel count, times the level weight.
pub fn region_histogram(region: &Region, weight: f64) -> Result<CodeHistogram> {
    if region.codes.is_empty() {
        return Err(Error::invalid("histogram of an empty region"));
    }
    let n = region.codes.len() as f64;
    Ok(CodeHistogram {
        level: region.level,
        region: region.index,
        bins: region.counts().iter().map(|&c| c as f64 / n * weight).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchingDegreeVector {
    pub class: Liveness,
    pub level: u32,
    pub region: usize,
    /// Per-code matching degree before normalization; each entry in `[0, w]`.
    pub raw: Vec<f64>,
    /// `raw` scaled to L1 mass `w` (all zero when `raw` is all zero).
    pub values: Vec<f64>,
}

/// Per-code min-ratio agreement between two count vectors: `w` where both are
/// zero, 0 where exactly one is zero, `w * min(f/a, a/f)` otherwise.
pub fn matching_degree_raw(f: &[u32; CODEBOOK_SIZE], a: &[u32; CODEBOOK_SIZE], weight: f64) -> Vec<f64> {
    f.iter()
        .zip(a)
        .map(|(&f, &a)| match (f, a) {
            (0, 0) => weight,
            (0, _) | (_, 0) => 0.0,
            (f, a) => weight * (f.min(a) as f64 / f.max(a) as f64),
        })
        .collect()
}

fn l1_rescale(raw: &[f64], mass: f64) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    if total > 0.0 {
        raw.iter().map(|v| v / total * mass).collect()
    } else {
        vec![0.0; raw.len()]
    }
}

pub fn matching_degree(
    region: &Region,
    average: &Region,
    weight: f64,
    class: Liveness,
) -> Result<MatchingDegreeVector> {
    if region.width != average.width || region.height != average.height {
        return Err(Error::invalid(format!(
            "region {}x{} does not match average region {}x{}",
            region.width, region.height, average.width, average.height
        )));
    }
    let raw = matching_degree_raw(&region.counts(), &average.counts(), weight);
    let values = l1_rescale(&raw, weight);
    Ok(MatchingDegreeVector {
        class,
        level: region.level,
        region: region.index,
        raw,
        values,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpmtVector(pub Vec<f64>);

/// Concatenates 5 histograms (level 0, then quadrants 1..4) with 8 matching
/// vectors (live quadrants 1..4, then fake quadrants 1..4).
pub fn assemble_spmt(hists: &[CodeHistogram], mdvs: &[MatchingDegreeVector]) -> Result<SpmtVector> {
    if hists.len() != 1 + NUM_QUADRANTS {
        return Err(Error::DimensionMismatch {
            expected: 1 + NUM_QUADRANTS,
            found: hists.len(),
        });
    }
    if mdvs.len() != 2 * NUM_QUADRANTS {
        return Err(Error::DimensionMismatch {
            expected: 2 * NUM_QUADRANTS,
            found: mdvs.len(),
        });
    }
    let hist_order_ok = hists[0].level == 0
        && hists[1..]
            .iter()
            .enumerate()
            .all(|(i, h)| h.level == 1 && h.region == i + 1);
    let mdv_order_ok = mdvs.iter().enumerate().all(|(i, m)| {
        let class = if i < NUM_QUADRANTS { Liveness::Live } else { Liveness::Fake };
        m.class == class && m.level == 1 && m.region == i % NUM_QUADRANTS + 1
    });
    if !hist_order_ok || !mdv_order_ok {
        return Err(Error::invalid("pyramid blocks are not in canonical order"));
    }
    let mut out = Vec::with_capacity(SPMT_DIM);
    for block in hists.iter().map(|h| &h.bins).chain(mdvs.iter().map(|m| &m.values)) {
        if block.len() != CODEBOOK_SIZE {
            return Err(Error::DimensionMismatch {
                expected: CODEBOOK_SIZE,
                found: block.len(),
            });
        }
        out.extend_from_slice(block);
    }
    Ok(SpmtVector(out))
}

/// Full SPMT descriptor of a code face against the two class-average faces.
pub fn spmt_descriptor(
    face: &BovwCodeFace,
    live_avg: &AverageFace,
    fake_avg: &AverageFace,
) -> Result<SpmtVector> {
    if live_avg.class != Liveness::Live || fake_avg.class != Liveness::Fake {
        return Err(Error::invalid("average faces passed in the wrong order"));
    }
    let spec = PyramidSpec::default();
    let regions = subdivide(face)?;
    let hists = regions
        .iter()
        .map(|r| region_histogram(r, spec.weight(r.level)))
        .collect::<Result<Vec<_>>>()?;
    let w1 = spec.weight(1);
    let mut mdvs = Vec::with_capacity(2 * NUM_QUADRANTS);
    for avg in [live_avg, fake_avg] {
        let avg_regions = subdivide(&avg.face)?;
        for (r, a) in regions[1..].iter().zip(&avg_regions[1..]) {
            mdvs.push(matching_degree(r, a, w1, avg.class)?);
        }
    }
    assemble_spmt(&hists, &mdvs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn face_from(f: impl Fn(usize, usize) -> u8) -> BovwCodeFace {
        let codes = (0..72).flat_map(|y| (0..64).map(move |x| (x, y))).map(|(x, y)| f(x, y)).collect();
        BovwCodeFace::new(64, 72, codes).unwrap()
    }

    fn avg(face: BovwCodeFace, class: Liveness) -> AverageFace {
        AverageFace { class, count: 1, face }
    }

    #[test]
    fn weights() {
        let s = PyramidSpec::default();
        assert_eq!(s.weight(0), 0.5);
        assert_eq!(s.weight(1), 1.0);
    }

    #[test]
    fn quadrant_geometry() {
        let face = face_from(|x, y| (x / 32 + 2 * (y / 36)) as u8 + 10);
        let regions = subdivide(&face).unwrap();
        assert_eq!(regions.len(), 5);
        assert_eq!(regions[0].codes.len(), 64 * 72);
        for (q, r) in regions[1..].iter().enumerate() {
            assert_eq!((r.width, r.height), (32, 36));
            assert_eq!(r.codes.len(), 1152);
            assert!(r.codes.iter().all(|&c| c as usize == q + 10));
        }
    }

    #[test]
    fn histogram_examples() {
        let face = face_from(|_, _| 7);
        let regions = subdivide(&face).unwrap();
        let h = region_histogram(&regions[0], 0.5).unwrap();
        assert_eq!(h.bins[7], 0.5);
        assert_eq!(h.bins.iter().sum::<f64>(), 0.5);

        let half = face_from(|x, _| if x % 32 < 16 { 1 } else { 2 });
        let q = &subdivide(&half).unwrap()[1];
        let h = region_histogram(q, 1.0).unwrap();
        assert_eq!((h.bins[1], h.bins[2]), (0.5, 0.5));
    }

    #[test]
    fn empty_region_rejected() {
        let r = Region { level: 0, index: 1, width: 0, height: 0, codes: vec![] };
        assert!(region_histogram(&r, 1.0).is_err());
    }

    #[test]
    fn matching_degree_examples() {
        let mut f = [0u32; 256];
        let mut a = [0u32; 256];
        f[3] = 4;
        a[3] = 8;
        f[9] = 5;
        let raw = matching_degree_raw(&f, &a, 1.0);
        assert_eq!(raw[3], 0.5);
        assert_eq!(raw[9], 0.0);
        assert_eq!(raw[0], 1.0);
    }

    #[test]
    fn geometry_mismatch() {
        let face = face_from(|_, _| 0);
        let regions = subdivide(&face).unwrap();
        assert!(matching_degree(&regions[1], &regions[0], 1.0, Liveness::Live).is_err());
    }

    #[test]
    fn spmt_dimension_and_mass() {
        assert_eq!(SPMT_DIM, 3328);
        let face = face_from(|x, y| ((x * 3 + y * 5) % 256) as u8);
        let live = avg(face_from(|x, _| (x % 7) as u8), Liveness::Live);
        let fake = avg(face_from(|_, y| (y % 11) as u8), Liveness::Fake);
        let v = spmt_descriptor(&face, &live, &fake).unwrap();
        assert_eq!(v.0.len(), 3328);
        let total: f64 = v.0.iter().sum();
        assert!((total - 12.5).abs() < 1e-9);
    }

    #[test]
    fn zero_blocks() {
        let hists: Vec<_> = (0..5)
            .map(|i| CodeHistogram { level: (i > 0) as u32, region: i.max(1), bins: vec![0.0; 256] })
            .collect();
        let mdvs: Vec<_> = (0..8)
            .map(|i| MatchingDegreeVector {
                class: if i < 4 { Liveness::Live } else { Liveness::Fake },
                level: 1,
                region: i % 4 + 1,
                raw: vec![0.0; 256],
                values: vec![0.0; 256],
            })
            .collect();
        let v = assemble_spmt(&hists, &mdvs).unwrap();
        assert_eq!(v.0, vec![0.0; 3328]);
        assert!(assemble_spmt(&hists[..4], &mdvs).is_err());
        assert!(assemble_spmt(&hists, &mdvs[..7]).is_err());
        let mut swapped = mdvs.clone();
        swapped.swap(0, 4);
        assert!(assemble_spmt(&hists, &swapped).is_err());
    }

    #[test]
    fn averages_in_wrong_order() {
        let face = face_from(|_, _| 0);
        let live = avg(face.clone(), Liveness::Live);
        let fake = avg(face.clone(), Liveness::Fake);
        assert!(spmt_descriptor(&face, &fake, &live).is_err());
    }
}
