//! Local windows around a pixel, the angular mean on a circle, and the direct
//! sampled-Gaussian convolution that serves as the reference for the
//! matrix-form framework.

use std::f64::consts::PI;

use nalgebra::DVector;

use super::grid::RADIAL_UPPER_BOUND;
use crate::error::{Error, Result};
use crate::image::PaddedImage;

/// Relative slack on the truncation circle so that pixels lying exactly on
/// `r_max * sigma` are kept regardless of rounding in the product.
const SUPPORT_SLACK: f64 = 1e-12;

/// Whether a pixel at squared distance `rho2` is inside the kernel truncated at `r_max * sigma`.
#[inline]
pub(crate) fn in_support(rho2: f64, sigma: f64, r_max: f64) -> bool {
    let reach = r_max * sigma;
    rho2 <= reach * reach * (1.0 + SUPPORT_SLACK)
}

/// Square odd-sided window of intensities centered on a pixel of interest.
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    side: usize,
    pixels: Vec<f64>,
    center: (usize, usize),
}

impl Patch {
    /// Builds a patch from row-major pixels; `center` records where the window
    /// came from in its parent image.
    pub fn new(side: usize, pixels: Vec<f64>, center: (usize, usize)) -> Result<Self> {
        if side.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "patch side must be odd, got {side}"
            )));
        }
        if pixels.len() != side * side {
            return Err(Error::shape(side * side, pixels.len()));
        }
        Ok(Self {
            side,
            pixels,
            center,
        })
    }

    pub fn from_fn(side: usize, mut f: impl FnMut(isize, isize) -> f64) -> Result<Self> {
        if side.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "patch side must be odd, got {side}"
            )));
        }
        let h = (side / 2) as isize;
        let mut pixels = Vec::with_capacity(side * side);
        for dy in -h..=h {
            for dx in -h..=h {
                pixels.push(f(dx, dy));
            }
        }
        Ok(Self {
            side,
            pixels,
            center: (0, 0),
        })
    }

    /// Window of `side` pixels around `(x, y)` of a replicate-padded image.
    pub fn extract(img: &PaddedImage, x: usize, y: usize, side: usize) -> Result<Self> {
        if side.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "patch side must be odd, got {side}"
            )));
        }
        let h = side / 2;
        if h > img.pad() {
            return Err(Error::OutOfSupport {
                radius: h as f64,
                support: img.pad() as f64,
            });
        }
        let h = h as isize;
        let mut pixels = Vec::with_capacity(side * side);
        for dy in -h..=h {
            for dx in -h..=h {
                pixels.push(img.at(x, y, dx, dy));
            }
        }
        Ok(Self {
            side,
            pixels,
            center: (x, y),
        })
    }

    #[inline]
    pub fn side(&self) -> usize {
        self.side
    }

    #[inline]
    pub fn half(&self) -> usize {
        self.side / 2
    }

    pub fn center(&self) -> (usize, usize) {
        self.center
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    /// Intensity at displacement `(dx, dy)` from the center.
    #[inline]
    pub fn get(&self, dx: isize, dy: isize) -> f64 {
        let h = self.half() as isize;
        self.pixels[((dy + h) as usize) * self.side + (dx + h) as usize]
    }

    /// Column-stacking vectorization: entry `col * side + row`.
    pub fn vec_columns(&self) -> DVector<f64> {
        let s = self.side;
        DVector::from_fn(s * s, |l, _| {
            let (col, row) = (l / s, l % s);
            self.pixels[row * s + col]
        })
    }

    fn bilinear(&self, x: f64, y: f64) -> f64 {
        let h = self.half() as isize;
        let x0 = x.floor();
        let y0 = y.floor();
        let (fx, fy) = (x - x0, y - y0);
        let (x0, y0) = (x0 as isize, y0 as isize);
        let clamp = |v: isize| v.clamp(-h, h);
        let p00 = self.get(clamp(x0), clamp(y0));
        let p10 = self.get(clamp(x0 + 1), clamp(y0));
        let p01 = self.get(clamp(x0), clamp(y0 + 1));
        let p11 = self.get(clamp(x0 + 1), clamp(y0 + 1));
        (1.0 - fy) * ((1.0 - fx) * p00 + fx * p10) + fy * ((1.0 - fx) * p01 + fx * p11)
    }
}

/// Number of angular samples on a circle of the given radius: four per pixel
/// of circumference, at least eight.
pub fn ring_sample_count(radius: f64) -> usize {
    ((2.0 * PI * radius * 4.0).ceil() as usize).max(8)
}

/// Angular mean of the bilinearly interpolated patch on the circle of
/// `radius` pixels around its center.
pub fn radial_average(patch: &Patch, radius: f64) -> Result<f64> {
    let support = patch.half() as f64;
    if !(radius >= 0.0) || radius > support {
        return Err(Error::OutOfSupport { radius, support });
    }
    if radius == 0.0 {
        return Ok(patch.get(0, 0));
    }
    let k = ring_sample_count(radius);
    let sum: f64 = (0..k)
        .map(|i| {
            let theta = 2.0 * PI * i as f64 / k as f64;
            patch.bilinear(radius * theta.cos(), radius * theta.sin())
        })
        .sum();
    Ok(sum / k as f64)
}

/// Circular Gaussian sampled at pixel centers, truncated at `r_max * sigma`
/// and normalized to unit sum.
#[derive(Debug, Clone)]
pub struct SampledGaussian {
    sigma: f64,
    radius: usize,
    weights: Vec<f64>,
}

impl SampledGaussian {
    pub fn new(sigma: f64) -> Result<Self> {
        Self::with_truncation(sigma, RADIAL_UPPER_BOUND)
    }

    pub fn with_truncation(sigma: f64, r_max: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        let radius = (r_max * sigma * (1.0 + SUPPORT_SLACK)).floor() as usize;
        let side = 2 * radius + 1;
        let r = radius as isize;
        let inv = 1.0 / (2.0 * sigma * sigma);
        let mut weights = Vec::with_capacity(side * side);
        for dy in -r..=r {
            for dx in -r..=r {
                let rho2 = (dx * dx + dy * dy) as f64;
                weights.push(if in_support(rho2, sigma, r_max) {
                    (-rho2 * inv).exp()
                } else {
                    0.0
                });
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self {
            sigma,
            radius,
            weights,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Largest integer displacement with nonzero weight.
    pub fn radius(&self) -> usize {
        self.radius
    }

    #[inline]
    pub fn weight(&self, dx: isize, dy: isize) -> f64 {
        let r = self.radius as isize;
        if dx.abs() > r || dy.abs() > r {
            return 0.0;
        }
        self.weights[((dy + r) as usize) * (2 * self.radius + 1) + (dx + r) as usize]
    }

    /// Row-major weights over the `(2 radius + 1)^2` support square.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Kernel applied at original pixel `(x, y)` of a padded image.
    pub fn apply_at(&self, img: &PaddedImage, x: usize, y: usize) -> f64 {
        let r = self.radius as isize;
        let side = 2 * self.radius + 1;
        let data = img.data();
        let stride = img.stride() as isize;
        let base = img.index_of(x, y) as isize;
        let mut acc = 0.0;
        for dy in -r..=r {
            let row = &self.weights[((dy + r) as usize) * side..((dy + r) as usize + 1) * side];
            let start = (base + dy * stride - r) as usize;
            let src = &data[start..start + side];
            acc += row.iter().zip(src).map(|(w, v)| w * v).sum::<f64>();
        }
        acc
    }
}

/// Center value of the patch convolved with the normalized sampled Gaussian of
/// scale `sigma`, truncated at `5 sigma`.
pub fn direct_blur_oracle(patch: &Patch, sigma: f64) -> Result<f64> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    let needed = (RADIAL_UPPER_BOUND * sigma - 1e-9).ceil().max(0.0);
    if (patch.half() as f64) < needed {
        return Err(Error::OutOfSupport {
            radius: RADIAL_UPPER_BOUND * sigma,
            support: patch.half() as f64,
        });
    }
    let kernel = SampledGaussian::new(sigma)?;
    let r = kernel.radius() as isize;
    let mut acc = 0.0;
    for dy in -r..=r {
        for dx in -r..=r {
            let w = kernel.weight(dx, dy);
            if w != 0.0 {
                acc += w * patch.get(dx, dy);
            }
        }
    }
    Ok(acc)
}

/// Sum of the unnormalized sampled weights `exp(-rho^2 / 2 sigma^2) / (2 pi sigma^2)`
/// over pixels farther than `r_max * sigma`, on the unbounded grid (summed
/// until the remaining terms fall below double precision).
pub fn sampled_tail_mass(sigma: f64, r_max: f64) -> f64 {
    let reach = (12.0 * sigma).ceil() as isize + 2;
    let norm = 1.0 / (2.0 * PI * sigma * sigma);
    let inv = 1.0 / (2.0 * sigma * sigma);
    let mut tail = 0.0;
    for dy in -reach..=reach {
        for dx in -reach..=reach {
            let rho2 = (dx * dx + dy * dy) as f64;
            if !in_support(rho2, sigma, r_max) {
                tail += norm * (-rho2 * inv).exp();
            }
        }
    }
    tail
}
