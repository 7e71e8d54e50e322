mod common;

use std::sync::OnceLock;

use defocus_core::estimate::{CandidateField, PixelState};
use defocus_core::io::{load_blur_raster, load_gray, quantize, save_blur_raster, save_gray};
use defocus_core::optics::{c_max_bounded, coc_diameter, CameraSettings};
use defocus_core::reconstruct::reconstruct_and_score;
use defocus_core::resample::decimate;
use defocus_core::sharpness::{evaluate_pair, PairParams};
use defocus_core::synth::{apply_sigma_field, linear_sigma_field, Axis};
use defocus_core::{estimate_blur_map, EstimateParams, Framework, GrayImage, Mask};

fn fw() -> &'static Framework {
    static FW: OnceLock<Framework> = OnceLock::new();
    FW.get_or_init(Framework::default)
}

fn crop() -> GrayImage {
    common::center_crop("brick.png", 80, 60)
}

#[test]
fn identical_images_land_on_floor() {
    let left = crop();
    let map = estimate_blur_map(&left, &left, fw(), None, &EstimateParams::default()).unwrap();
    let lo = fw().sigma_grid().min();
    for y in 0..60 {
        for x in 0..80 {
            if let Some(s) = map.sigma_at(x, y) {
                assert_eq!(s, lo);
                assert!(map.floor().get(x, y));
            }
        }
    }
    assert!(map.valid_fraction() > 0.9);
}

#[test]
fn flat_image_is_invalid() {
    let flat = GrayImage::filled(30, 20, 0.4);
    let map = estimate_blur_map(&flat, &flat, fw(), None, &EstimateParams::default()).unwrap();
    assert_eq!(map.valid().count(), 0);
    assert!(map.sigmas().iter().all(|s| s.is_nan()));
}

#[test]
fn masked_pixels_stay_invalid() {
    let left = crop();
    let field = linear_sigma_field(80, 60, 1.0, 2.0, Axis::Vertical).unwrap();
    let right = apply_sigma_field(&left, &field).unwrap();
    let mask = Mask::from_fn(80, 60, |x, y| (x + y) % 3 != 0);
    let map =
        estimate_blur_map(&left, &right, fw(), Some(&mask), &EstimateParams::default()).unwrap();
    for y in 0..60 {
        for x in 0..80 {
            if !mask.get(x, y) {
                assert!(map.sigma_at(x, y).is_none());
            }
        }
    }
}

#[test]
fn per_pixel_choice_ignores_mask() {
    let left = crop();
    let field = linear_sigma_field(80, 60, 1.0, 2.0, Axis::Horizontal).unwrap();
    let right = apply_sigma_field(&left, &field).unwrap();
    let engine = fw().engine(&left);
    let full = CandidateField::compute(&engine, &right, None, 1e-4).unwrap();
    let mask = Mask::from_fn(80, 60, |x, _| x < 40);
    let part = CandidateField::compute(&engine, &right, Some(&mask), 1e-4).unwrap();
    let (a, b) = (full.per_pixel_indices(), part.per_pixel_indices());
    for y in 0..60 {
        for x in 0..80 {
            let i = y * 80 + x;
            if mask.get(x, y) {
                assert_eq!(a[i], b[i]);
            } else {
                assert_eq!(part.state(x, y), PixelState::Skipped);
                assert_eq!(b[i], None);
            }
        }
    }
    for (i, idx) in a.iter().enumerate() {
        if let Some(k) = *idx {
            let curve = full.residual_curve(i % 80, i / 80);
            let min = curve.iter().cloned().fold(f64::INFINITY, f64::min);
            assert!(curve[k] <= min + 1e-4);
        }
    }
}

#[test]
fn recovers_known_field() {
    let left = crop();
    let field = linear_sigma_field(80, 60, 1.0, 2.0, Axis::Vertical).unwrap();
    let right = apply_sigma_field(&left, &field).unwrap();
    let map = estimate_blur_map(&left, &right, fw(), None, &EstimateParams::default()).unwrap();
    let mut rel = 0.0;
    let mut n = 0;
    for y in 0..60 {
        for x in 0..80 {
            if let Some(s) = map.sigma_at(x, y) {
                rel += (s - field.get(x, y)).abs() / field.get(x, y);
                n += 1;
            }
        }
    }
    assert!(n > 80 * 60 * 9 / 10);
    assert!(rel / (n as f64) < 0.05, "{}", rel / n as f64);
    let report = reconstruct_and_score(&left, &right, &map, None).unwrap();
    assert!(report.mae < 2e-3, "{}", report.mae);
}

#[test]
fn pair_evaluation_is_symmetric() {
    let base = crop();
    let mut other = base.clone();
    let blurred = apply_sigma_field(
        &base,
        &linear_sigma_field(80, 60, 1.2, 1.2, Axis::Vertical).unwrap(),
    )
    .unwrap();
    for y in 0..60 {
        for x in 40..80 {
            other.set(x, y, blurred.get(x, y));
        }
    }
    let p = PairParams::default();
    let ab = evaluate_pair(&other, &base, fw(), &p).unwrap();
    let ba = evaluate_pair(&base, &other, fw(), &p).unwrap();
    assert_eq!(ab.e_b, ba.e_f);
    assert_eq!(ab.e_f, ba.e_b);
    assert_eq!(ab.pct_b_sharper, ba.pct_f_sharper);
    assert_eq!(ab.pct_equal, ba.pct_equal);
    assert_eq!(
        ab.count_b_sharper + ab.count_f_sharper + ab.count_equal,
        80 * 60
    );
    assert_eq!(ab.contributing_pixels(), 80 * 60 - ab.count_equal);
}

#[test]
fn identical_pair_has_no_errors() {
    let base = crop();
    let e = evaluate_pair(&base, &base, fw(), &PairParams::default()).unwrap();
    assert_eq!((e.e_b, e.e_f), (None, None));
    assert_eq!(e.pct_equal, 100.0);
}

#[test]
fn gray_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let img = GrayImage::from_fn(37, 21, |x, y| ((x * 7 + y * 13) % 101) as f64 / 100.0);
    for name in ["a.png", "a.pgm"] {
        let path = dir.path().join(name);
        save_gray(&img, &path).unwrap();
        let back = load_gray(&path).unwrap();
        for (a, b) in img.pixels().iter().zip(back.pixels()) {
            assert!((a - b).abs() <= 1.0 / 510.0 + 1e-12);
        }
    }
    assert_eq!(quantize(0.5), 128);
    assert!(save_gray(&GrayImage::filled(2, 2, 1.5), dir.path().join("bad.png")).is_err());
}

#[test]
fn sixteen_bit_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("deep.png");
    let buf = image::ImageBuffer::<image::Luma<u16>, _>::from_fn(4, 3, |x, _| {
        image::Luma([x as u16 * 20000])
    });
    buf.save(&path).unwrap();
    let img = load_gray(&path).unwrap();
    assert_eq!(img.dims(), (4, 3));
    assert!((img.get(3, 1) - 60000.0 / 65535.0).abs() < 1e-12);
}

#[test]
fn blur_raster_round_trip() {
    let left = crop();
    let right = apply_sigma_field(
        &left,
        &linear_sigma_field(80, 60, 1.5, 1.5, Axis::Vertical).unwrap(),
    )
    .unwrap();
    let map = estimate_blur_map(&left, &right, fw(), None, &EstimateParams::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("map.dfbm");
    save_blur_raster(&map, &path).unwrap();
    let r = load_blur_raster(&path).unwrap();
    assert_eq!((r.width, r.height), (80, 60));
    for y in 0..60 {
        for x in 0..80 {
            match map.sigma_at(x, y) {
                Some(s) => assert_eq!(r.get(x, y), Some(s as f32)),
                None => assert!(r.get(x, y).unwrap().is_nan()),
            }
        }
    }
}

#[test]
fn decimation_cascade() {
    let img = common::load("camera.png");
    let half = decimate(&img, 2).unwrap();
    assert_eq!(
        half.dims(),
        (img.width().div_ceil(2), img.height().div_ceil(2))
    );
    let flat = decimate(&GrayImage::filled(625, 433, 0.37), 4).unwrap();
    assert_eq!(flat.dims(), (157, 109));
    assert!(flat.pixels().iter().all(|v| (v - 0.37).abs() < 1e-9));
}

#[test]
fn bounded_c_max_is_the_scan_maximum() {
    let s = CameraSettings::new(17.0, 2.0, 1000.0, 4.5).unwrap();
    for eta in [0.05, 0.2, 0.5] {
        let bound = c_max_bounded(&s, eta).unwrap();
        let scan = (0..=2000)
            .map(|i| -eta + 2.0 * eta * i as f64 / 2000.0)
            .filter(|r| *r != 0.0)
            .map(|r| coc_diameter(&s, r * 1000.0).unwrap().abs())
            .fold(0.0, f64::max);
        assert!((scan - bound).abs() <= 1e-9 * bound, "{scan} vs {bound}");
    }
}
