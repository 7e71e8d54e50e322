//! Ground-truth blur fields and synthetically blurred images.

use serde::{Deserialize, Serialize};

use crate::blur::convolve_varying;
use crate::error::{Error, Result};
use crate::image::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// Sigma changes from the left column to the right column.
    Horizontal,
    /// Sigma changes from the top row to the bottom row.
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub axis: Axis,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SigmaField {
    width: usize,
    height: usize,
    values: Vec<f64>,
    spec: FieldSpec,
}

impl SigmaField {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn spec(&self) -> FieldSpec {
        self.spec
    }

    /// The field as an image (values are sigmas, not intensities).
    pub fn to_image(&self) -> GrayImage {
        GrayImage::from_fn(self.width, self.height, |x, y| self.get(x, y))
    }
}

pub fn linear_sigma_field(
    width: usize,
    height: usize,
    start: f64,
    end: f64,
    axis: Axis,
) -> Result<SigmaField> {
    if width == 0 || height == 0 {
        return Err(Error::invalid("field dimensions must be positive"));
    }
    for s in [start, end] {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::invalid(format!("sigma must be positive, got {s}")));
        }
    }
    let n = match axis {
        Axis::Horizontal => width,
        Axis::Vertical => height,
    };
    let profile: Vec<f64> = (0..n)
        .map(|i| {
            if i + 1 == n && n > 1 {
                end
            } else if n == 1 {
                start
            } else {
                start + (end - start) * i as f64 / (n - 1) as f64
            }
        })
        .collect();
    let img = GrayImage::from_fn(width, height, |x, y| match axis {
        Axis::Horizontal => profile[x],
        Axis::Vertical => profile[y],
    });
    Ok(SigmaField {
        width,
        height,
        values: img.into_pixels(),
        spec: FieldSpec { axis, start, end },
    })
}

/// Blurs every pixel of `img` with the Gaussian of its sigma in `field`.
pub fn apply_sigma_field(img: &GrayImage, field: &SigmaField) -> Result<GrayImage> {
    if img.dims() != field.dims() {
        return Err(Error::shape(
            format!("{}x{}", img.width(), img.height()),
            format!("{}x{}", field.width, field.height),
        ));
    }
    let sigmas: Vec<Option<f64>> = field.values.iter().map(|&s| Some(s)).collect();
    convolve_varying(img, &sigmas)
}
