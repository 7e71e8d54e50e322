//! Re-blurring the sharper image with the estimated per-pixel kernels and
//! comparing the result with the observed blurred image.

use serde::{Deserialize, Serialize};

use crate::blur::convolve_varying;
use crate::error::{Error, Result};
use crate::estimate::BlurMap;
use crate::image::{GrayImage, Mask};

/// Convolves each valid pixel of `left` with the Gaussian of its estimated
/// sigma; invalid pixels keep their value from `left`.
pub fn spatially_varying_convolve(left: &GrayImage, blur: &BlurMap) -> Result<GrayImage> {
    if left.dims() != blur.dims() {
        return Err(Error::shape(
            format!("{}x{}", left.width(), left.height()),
            format!("{}x{}", blur.width(), blur.height()),
        ));
    }
    convolve_varying(left, &blur.optional_sigmas())
}

/// Mean absolute difference over the pixels set in `mask` (all without one).
pub fn image_mae(a: &GrayImage, b: &GrayImage, mask: Option<&Mask>) -> Result<f64> {
    let (sum, count, _) = abs_diff_stats(a, b, mask)?;
    Ok(sum / count as f64)
}

fn abs_diff_stats(a: &GrayImage, b: &GrayImage, mask: Option<&Mask>) -> Result<(f64, usize, f64)> {
    a.ensure_same_dims(b)?;
    if let Some(m) = mask {
        m.ensure_dims(a.width(), a.height())?;
    }
    let mut sum = 0.0;
    let mut max = 0.0f64;
    let mut count = 0;
    for (i, (u, v)) in a.pixels().iter().zip(b.pixels()).enumerate() {
        if mask.is_none_or(|m| m.as_slice()[i]) {
            let d = (u - v).abs();
            sum += d;
            max = max.max(d);
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::EmptyDomain);
    }
    Ok((sum, count, max))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionReport {
    #[serde(skip)]
    pub r_hat: Option<GrayImage>,
    pub mae: f64,
    pub max_abs: f64,
    pub evaluated_fraction: f64,
}

/// Reconstructs `right` from `left` and `blur` and scores the result over
/// the valid pixels of the map (intersected with `mask` when given).
pub fn reconstruct_and_score(
    left: &GrayImage,
    right: &GrayImage,
    blur: &BlurMap,
    mask: Option<&Mask>,
) -> Result<ReconstructionReport> {
    let r_hat = spatially_varying_convolve(left, blur)?;
    let domain = match mask {
        Some(m) => blur.valid().and(m)?,
        None => blur.valid().clone(),
    };
    let (sum, count, max_abs) = abs_diff_stats(right, &r_hat, Some(&domain))?;
    Ok(ReconstructionReport {
        r_hat: Some(r_hat),
        mae: sum / count as f64,
        max_abs,
        evaluated_fraction: count as f64 / right.len() as f64,
    })
}
