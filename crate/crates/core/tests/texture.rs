mod common;

use std::collections::BTreeSet;

use common::*;
use liveface::texture::{
    crop_and_normalize, lbp_uniform, mslbp_face, BoundingBox, FaceCrop, GrayImage, UniformMapping, CROP_HEIGHT,
    CROP_WIDTH, SUPPORTED_SCALES,
};
use rand::Rng;

#[test]
fn mapping_matches_naive_table() {
    for p in [8usize, 16] {
        let mapping = UniformMapping::new(p).unwrap();
        let table = naive_uniform_table(p);
        for raw in 0..1u32 << p {
            assert_eq!(mapping.label(raw), table[raw as usize], "P={p} raw={raw}");
        }
        let labels: BTreeSet<u8> = (0..1u32 << p).map(|r| mapping.label(r)).collect();
        assert_eq!(labels.len(), p * (p - 1) + 3);
        assert_eq!(mapping.num_labels(), labels.len());
    }
}

#[test]
fn operator_matches_naive_double_loop() {
    let mut rng = rng(21);
    for trial in 0..20 {
        let crop = FaceCrop::new(random_image(&mut rng, CROP_WIDTH, CROP_HEIGHT)).unwrap();
        for (p, r) in SUPPORTED_SCALES {
            let fast = lbp_uniform(&crop, p, r).unwrap();
            assert_eq!(fast.labels, naive_lbp(crop.image(), p, r), "trial {trial} P={p} R={r}");
        }
    }
}

#[test]
fn feature_face_stacks_the_three_scales() {
    let mut rng = rng(22);
    let crop = FaceCrop::new(random_image(&mut rng, CROP_WIDTH, CROP_HEIGHT)).unwrap();
    let face = mslbp_face(&crop);
    let maps: Vec<_> = SUPPORTED_SCALES
        .iter()
        .map(|&(p, r)| lbp_uniform(&crop, p, r).unwrap())
        .collect();
    for (i, px) in face.pixels.iter().enumerate() {
        assert_eq!(*px, [maps[0].labels[i], maps[1].labels[i], maps[2].labels[i]]);
    }
}

#[test]
fn intensity_shift_leaves_labels_unchanged() {
    let mut rng = rng(23);
    let img = random_image(&mut rng, CROP_WIDTH, CROP_HEIGHT);
    let max = *img.data().iter().max().unwrap();
    let shift = rng.random_range(0..=255 - max);
    let shifted = GrayImage::new(CROP_WIDTH, CROP_HEIGHT, img.data().iter().map(|v| v + shift).collect()).unwrap();
    let a = mslbp_face(&FaceCrop::new(img).unwrap());
    let b = mslbp_face(&FaceCrop::new(shifted).unwrap());
    assert_eq!(a, b);
}

#[test]
fn crop_of_exact_box_samples_source() {
    // A box that is an integer multiple of the crop size, with no expansion,
    // samples at pixel centres that land midway between source pixels.
    let (w, h) = (CROP_WIDTH * 2, CROP_HEIGHT * 2);
    let data: Vec<u8> = (0..w * h).map(|i| (i % w) as u8).collect();
    let img = GrayImage::new(w, h, data).unwrap();
    let bbox = BoundingBox {
        x: 0.0,
        y: 0.0,
        width: w as f64,
        height: h as f64,
    };
    let crop = crop_and_normalize(&img, &bbox, 1.0).unwrap();
    let out = crop.image();
    assert_eq!((out.width(), out.height()), (CROP_WIDTH, CROP_HEIGHT));
    for y in 0..CROP_HEIGHT {
        for x in 0..CROP_WIDTH {
            // Source sample point is (2x + 0.5, 2y + 0.5); the ramp is linear in x.
            let expect = (2 * x) as f64 + 0.5;
            assert!((out.get(x, y) as f64 - expect).abs() <= 0.5, "({x},{y})");
        }
    }
}

#[test]
fn crop_clips_to_image() {
    let img = GrayImage::filled(100, 80, 77);
    let bbox = BoundingBox {
        x: 60.0,
        y: 50.0,
        width: 60.0,
        height: 50.0,
    };
    let crop = crop_and_normalize(&img, &bbox, 1.3).unwrap();
    assert!(crop.image().data().iter().all(|&v| v == 77));
}
