#![allow(dead_code)]

use std::path::PathBuf;

use defocus_core::io::load_gray;
use defocus_core::GrayImage;

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/data")
        .join(name)
}

pub fn load(name: &str) -> GrayImage {
    load_gray(data_path(name)).expect("test image")
}

/// Centered `w x h` window of a test image.
pub fn center_crop(name: &str, w: usize, h: usize) -> GrayImage {
    let img = load(name);
    img.crop((img.width() - w) / 2, (img.height() - h) / 2, w, h)
        .expect("crop fits")
}

/// Direct 2-D convolution with one sampled Gaussian, replicate borders.
pub fn global_convolution(img: &GrayImage, sigma: f64) -> GrayImage {
    let r = (5.0 * sigma * (1.0 + 1e-12)).floor() as isize;
    let mut weights = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            let r2 = (dx * dx + dy * dy) as f64;
            if r2 <= 25.0 * sigma * sigma * (1.0 + 1e-12) {
                weights.push((dx, dy, (-r2 / (2.0 * sigma * sigma)).exp()));
            }
        }
    }
    let total: f64 = weights.iter().map(|w| w.2).sum();
    GrayImage::from_fn(img.width(), img.height(), |x, y| {
        weights
            .iter()
            .map(|&(dx, dy, w)| w / total * img.get_clamped(x as isize + dx, y as isize + dy))
            .sum()
    })
}
