//! Face cropping and multi-scale uniform local binary patterns.
//!
//! LBP conventions used throughout:
//!
//! * neighbour `k` sits at angle `2πk/P`, starting to the right of the centre
//!   and proceeding counter-clockwise (upwards in image rows);
//! * neighbour `k` sets bit `k` (bit 0 is the LSB) when its bilinearly
//!   interpolated intensity is `>=` the centre;
//! * samples falling outside the crop use replicate padding;
//! * uniform patterns (at most two circular bit transitions) are labelled
//!   `0..P(P-1)+2` in ascending raw value, all other patterns share the label
//!   `P(P-1)+2`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const CROP_WIDTH: usize = 64;
pub const CROP_HEIGHT: usize = 72;
pub const DEFAULT_EXPANSION: f64 = 1.3;

/// 8-bit grayscale image, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image must be non-empty"));
        }
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                found: data.len(),
            });
        }
        Ok(GrayImage {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        GrayImage {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    /// Converts packed RGB with ITU-R BT.601 luma weights.
    pub fn from_rgb(width: usize, height: usize, rgb: &[u8]) -> Result<Self> {
        if rgb.len() != width * height * 3 {
            return Err(Error::DimensionMismatch {
                expected: width * height * 3,
                found: rgb.len(),
            });
        }
        let data = rgb
            .chunks_exact(3)
            .map(|px| {
                let y = 0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64;
                y.round().clamp(0.0, 255.0) as u8
            })
            .collect();
        GrayImage::new(width, height, data)
    }

    /// Accepts 8-bit grayscale directly; anything else goes through RGB.
    pub fn from_dynamic(img: &image::DynamicImage) -> Result<Self> {
        match img {
            image::DynamicImage::ImageLuma8(g) => {
                GrayImage::new(g.width() as usize, g.height() as usize, g.as_raw().clone())
            }
            other => {
                let rgb = other.to_rgb8();
                GrayImage::from_rgb(rgb.width() as usize, rgb.height() as usize, rgb.as_raw())
            }
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    /// Pixel lookup with replicate padding.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> u8 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.data[y * self.width + x]
    }

    /// Bilinear sample at a continuous pixel-centre coordinate, replicate padded.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let (xi, yi) = (x0 as isize, y0 as isize);
        let p00 = self.get_clamped(xi, yi) as f64;
        let p10 = self.get_clamped(xi + 1, yi) as f64;
        let p01 = self.get_clamped(xi, yi + 1) as f64;
        let p11 = self.get_clamped(xi + 1, yi + 1) as f64;
        (1.0 - fx) * (1.0 - fy) * p00 + fx * (1.0 - fy) * p10 + (1.0 - fx) * fy * p01 + fx * fy * p11
    }
}

/// Axis-aligned rectangle in continuous pixel coordinates; `[x, x + width)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl BoundingBox {
    pub fn from_points(points: impl IntoIterator<Item = [f64; 2]>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let (mut x0, mut y0, mut x1, mut y1) = (first[0], first[1], first[0], first[1]);
        for [x, y] in it {
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        Some(BoundingBox {
            x: x0,
            y: y0,
            width: x1 - x0,
            height: y1 - y0,
        })
    }

    /// Scales about the centre.
    pub fn expanded(&self, factor: f64) -> Self {
        let cx = self.x + self.width / 2.0;
        let cy = self.y + self.height / 2.0;
        let w = self.width * factor;
        let h = self.height * factor;
        BoundingBox {
            x: cx - w / 2.0,
            y: cy - h / 2.0,
            width: w,
            height: h,
        }
    }

    pub fn clipped(&self, width: usize, height: usize) -> Option<Self> {
        let x0 = self.x.max(0.0);
        let y0 = self.y.max(0.0);
        let x1 = (self.x + self.width).min(width as f64);
        let y1 = (self.y + self.height).min(height as f64);
        (x1 > x0 && y1 > y0).then_some(BoundingBox {
            x: x0,
            y: y0,
            width: x1 - x0,
            height: y1 - y0,
        })
    }
}

/// A 64×72 grayscale face crop.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FaceCrop(GrayImage);

impl FaceCrop {
    pub fn new(img: GrayImage) -> Result<Self> {
        if img.width != CROP_WIDTH || img.height != CROP_HEIGHT {
            return Err(Error::invalid(format!(
                "face crop must be {CROP_WIDTH}x{CROP_HEIGHT}, got {}x{}",
                img.width, img.height
            )));
        }
        Ok(FaceCrop(img))
    }

    pub fn image(&self) -> &GrayImage {
        &self.0
    }
}

/// Expands the box about its centre, clips it to the image and resamples the
/// region to 64×72 with bilinear interpolation (pixel-centre aligned).
pub fn crop_and_normalize(img: &GrayImage, bbox: &BoundingBox, expansion: f64) -> Result<FaceCrop> {
    if !(bbox.width > 0.0 && bbox.height > 0.0) {
        return Err(Error::invalid("face bounding box is empty"));
    }
    if !(expansion > 0.0) || !expansion.is_finite() {
        return Err(Error::invalid(format!("invalid expansion factor {expansion}")));
    }
    let region = bbox
        .expanded(expansion)
        .clipped(img.width, img.height)
        .ok_or_else(|| Error::invalid("face bounding box lies outside the image"))?;
    let sx = region.width / CROP_WIDTH as f64;
    let sy = region.height / CROP_HEIGHT as f64;
    let max_x = (img.width - 1) as f64;
    let max_y = (img.height - 1) as f64;
    let mut data = Vec::with_capacity(CROP_WIDTH * CROP_HEIGHT);
    for j in 0..CROP_HEIGHT {
        let y = (region.y + (j as f64 + 0.5) * sy - 0.5).clamp(0.0, max_y);
        for i in 0..CROP_WIDTH {
            let x = (region.x + (i as f64 + 0.5) * sx - 0.5).clamp(0.0, max_x);
            data.push(img.sample_bilinear(x, y).round().clamp(0.0, 255.0) as u8);
        }
    }
    FaceCrop::new(GrayImage::new(CROP_WIDTH, CROP_HEIGHT, data)?)
}

/// Number of circular 0/1 transitions in a `bits`-wide pattern.
pub fn transitions(pattern: u32, bits: usize) -> u32 {
    let mask = if bits == 32 { u32::MAX } else { (1u32 << bits) - 1 };
    let rotated = ((pattern >> 1) | ((pattern & 1) << (bits - 1))) & mask;
    (pattern ^ rotated).count_ones()
}

/// Raw LBP pattern → uniform label table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UniformMapping {
    neighbors: usize,
    table: Vec<u8>,
}

impl UniformMapping {
    pub fn new(neighbors: usize) -> Result<Self> {
        if !(2..=16).contains(&neighbors) {
            return Err(Error::invalid(format!("unsupported neighbour count {neighbors}")));
        }
        let n_labels = neighbors * (neighbors - 1) + 3;
        let non_uniform = (n_labels - 1) as u8;
        let mut next = 0u8;
        let table = (0..1u32 << neighbors)
            .map(|raw| {
                if transitions(raw, neighbors) <= 2 {
                    let label = next;
                    next += 1;
                    label
                } else {
                    non_uniform
                }
            })
            .collect();
        debug_assert_eq!(next as usize, n_labels - 1);
        Ok(UniformMapping { neighbors, table })
    }

    pub fn neighbors(&self) -> usize {
        self.neighbors
    }

    /// `P(P-1) + 3`.
    pub fn num_labels(&self) -> usize {
        self.neighbors * (self.neighbors - 1) + 3
    }

    #[inline]
    pub fn label(&self, raw: u32) -> u8 {
        self.table[raw as usize]
    }
}

#[derive(Clone, Copy, Debug)]
struct Offset {
    dx: isize,
    dy: isize,
    fx: f64,
    fy: f64,
}

/// Bilinear neighbour value minus the centre, from integer differences only,
/// so that ties and constant offsets compare exactly.
#[inline]
pub(crate) fn neighbour_minus_center(center: f64, [p00, p10, p01, p11]: [f64; 4], fx: f64, fy: f64) -> f64 {
    (p00 - center) + fx * (p10 - p00) + fy * (p01 - p00) + fx * fy * (p11 - p10 - p01 + p00)
}

/// Circular LBP operator with precomputed sampling offsets.
#[derive(Clone, Debug)]
pub struct LbpOperator {
    neighbors: usize,
    radius: f64,
    mapping: UniformMapping,
    offsets: Vec<Offset>,
}

/// Rounds offsets that are integral up to trigonometric noise.
pub(crate) fn snap(v: f64) -> f64 {
    if (v - v.round()).abs() < 1e-9 {
        v.round()
    } else {
        v
    }
}

pub const SUPPORTED_SCALES: [(usize, f64); 3] = [(8, 1.0), (8, 2.0), (16, 2.0)];

impl LbpOperator {
    pub fn new(neighbors: usize, radius: f64) -> Result<Self> {
        if !SUPPORTED_SCALES.contains(&(neighbors, radius)) {
            return Err(Error::invalid(format!(
                "unsupported LBP scale (P={neighbors}, R={radius})"
            )));
        }
        let offsets = (0..neighbors)
            .map(|k| {
                let angle = 2.0 * std::f64::consts::PI * k as f64 / neighbors as f64;
                let ox = snap(radius * angle.cos());
                let oy = snap(-radius * angle.sin());
                let (x0, y0) = (ox.floor(), oy.floor());
                Offset {
                    dx: x0 as isize,
                    dy: y0 as isize,
                    fx: ox - x0,
                    fy: oy - y0,
                }
            })
            .collect();
        Ok(LbpOperator {
            neighbors,
            radius,
            mapping: UniformMapping::new(neighbors)?,
            offsets,
        })
    }

    pub fn neighbors(&self) -> usize {
        self.neighbors
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn mapping(&self) -> &UniformMapping {
        &self.mapping
    }

    pub fn raw_pattern(&self, img: &GrayImage, x: usize, y: usize) -> u32 {
        let center = img.get(x, y) as f64;
        let (xi, yi) = (x as isize, y as isize);
        let mut pattern = 0u32;
        for (k, o) in self.offsets.iter().enumerate() {
            let (sx, sy) = (xi + o.dx, yi + o.dy);
            let p00 = img.get_clamped(sx, sy) as f64;
            let p10 = img.get_clamped(sx + 1, sy) as f64;
            let p01 = img.get_clamped(sx, sy + 1) as f64;
            let p11 = img.get_clamped(sx + 1, sy + 1) as f64;
            if neighbour_minus_center(center, [p00, p10, p01, p11], o.fx, o.fy) >= 0.0 {
                pattern |= 1 << k;
            }
        }
        pattern
    }

    pub fn apply(&self, img: &GrayImage) -> LabelMap {
        let mut labels = Vec::with_capacity(img.width * img.height);
        for y in 0..img.height {
            for x in 0..img.width {
                labels.push(self.mapping.label(self.raw_pattern(img, x, y)));
            }
        }
        LabelMap {
            width: img.width,
            height: img.height,
            labels,
        }
    }
}

/// Per-pixel uniform LBP labels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u8>,
}

fn operators() -> &'static [LbpOperator; 3] {
    static OPS: OnceLock<[LbpOperator; 3]> = OnceLock::new();
    OPS.get_or_init(|| {
        SUPPORTED_SCALES.map(|(p, r)| LbpOperator::new(p, r).expect("supported LBP scale"))
    })
}

pub fn lbp_uniform(img: &FaceCrop, neighbors: usize, radius: f64) -> Result<LabelMap> {
    let op = operators()
        .iter()
        .find(|op| op.neighbors == neighbors && op.radius == radius)
        .ok_or_else(|| {
            Error::invalid(format!("unsupported LBP scale (P={neighbors}, R={radius})"))
        })?;
    Ok(op.apply(img.image()))
}

/// Per-pixel `[LBP(8,1), LBP(8,2), LBP(16,2)]` uniform labels over the crop.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MslbpFeatureFace {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[u8; 3]>,
}

impl MslbpFeatureFace {
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        self.pixels[y * self.width + x]
    }
}

pub fn mslbp_face(img: &FaceCrop) -> MslbpFeatureFace {
    let [a, b, c] = operators().each_ref().map(|op| op.apply(img.image()));
    let pixels = a
        .labels
        .iter()
        .zip(&b.labels)
        .zip(&c.labels)
        .map(|((&l1, &l2), &l3)| [l1, l2, l3])
        .collect();
    MslbpFeatureFace {
        width: a.width,
        height: a.height,
        pixels,
    }
}
