//! Spatially varying Gaussian convolution shared by the synthetic blur
//! generator and the reconstruction step.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::kernel::SampledGaussian;

/// Above this many distinct sigmas kernels are built per pixel instead of cached.
const KERNEL_CACHE_LIMIT: usize = 4096;

/// Convolves `img` with the normalized sampled Gaussian of scale
/// `sigmas[i]` at pixel `i` (row-major). `None` copies the input pixel.
/// Borders are replicate-padded and the result is clamped to `[0, 1]`.
pub fn convolve_varying(img: &GrayImage, sigmas: &[Option<f64>]) -> Result<GrayImage> {
    if sigmas.len() != img.len() {
        return Err(Error::shape(img.len(), sigmas.len()));
    }
    let mut distinct: Vec<u64> = Vec::new();
    for s in sigmas.iter().flatten() {
        if !(s.is_finite() && *s > 0.0) {
            return Err(Error::invalid(format!("sigma must be positive, got {s}")));
        }
        distinct.push(s.to_bits());
    }
    distinct.sort_unstable();
    distinct.dedup();

    let cache: HashMap<u64, SampledGaussian> = if distinct.len() <= KERNEL_CACHE_LIMIT {
        distinct
            .par_iter()
            .map(|&b| {
                (
                    b,
                    SampledGaussian::new(f64::from_bits(b)).expect("validated sigma"),
                )
            })
            .collect()
    } else {
        HashMap::new()
    };
    let pad = distinct
        .iter()
        .map(|&b| SampledGaussian::new(f64::from_bits(b)).map(|k| k.radius()))
        .try_fold(0, |acc, r| r.map(|r| acc.max(r)))?;
    let padded = img.padded(pad);
    let width = img.width();

    let mut out = img.clone();
    out.pixels_mut()
        .par_chunks_mut(width)
        .enumerate()
        .for_each(|(y, row)| {
            for (x, v) in row.iter_mut().enumerate() {
                let Some(s) = sigmas[y * width + x] else {
                    continue;
                };
                let blurred = match cache.get(&s.to_bits()) {
                    Some(k) => k.apply_at(&padded, x, y),
                    None => SampledGaussian::new(s)
                        .expect("validated sigma")
                        .apply_at(&padded, x, y),
                };
                *v = blurred.clamp(0.0, 1.0);
            }
        });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn none_copies_input() {
        let img = GrayImage::from_fn(9, 7, |x, y| ((x + 2 * y) % 5) as f64 / 4.0);
        let out = convolve_varying(&img, &vec![None; img.len()]).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn constant_image_fixed_point() {
        let img = GrayImage::filled(12, 10, 0.35);
        let sig: Vec<Option<f64>> = (0..img.len())
            .map(|i| Some(0.2 + 0.03 * i as f64))
            .collect();
        let out = convolve_varying(&img, &sig).unwrap();
        assert!(out.pixels().iter().all(|v| (v - 0.35).abs() < 1e-12));
    }

    #[test]
    fn rejects_bad_sigma_and_length() {
        let img = GrayImage::filled(3, 3, 0.0);
        assert!(convolve_varying(&img, &[None; 8]).is_err());
        let mut s = vec![None; 9];
        s[4] = Some(-1.0);
        assert!(convolve_varying(&img, &s).is_err());
    }
}
