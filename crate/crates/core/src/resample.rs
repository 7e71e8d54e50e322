//! Anti-aliased decimation with a Kaiser-windowed sinc filter.
//!
//! Frequencies are normalized so that 1 is the Nyquist frequency
//! (`pi` radians per sample).

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::GrayImage;

pub const DEFAULT_HALF_LENGTH: usize = 8;
pub const DEFAULT_BETA: f64 = 10.0;

/// Zeroth-order modified Bessel function of the first kind (power series).
pub fn bessel_i0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    while term > 1e-17 * sum {
        term *= q / (k * k);
        sum += term;
        k += 1.0;
    }
    sum
}

/// `sin(pi x) / (pi x)`, exactly zero at nonzero integers.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else if x.fract() == 0.0 {
        0.0
    } else {
        (PI * x).sin() / (PI * x)
    }
}

/// Symmetric Kaiser window of `len` points.
pub fn kaiser_window(len: usize, beta: f64) -> Result<Vec<f64>> {
    if len == 0 {
        return Err(Error::invalid("window length must be positive"));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::invalid(format!("beta must be >= 0, got {beta}")));
    }
    if len == 1 {
        return Ok(vec![1.0]);
    }
    let half = (len - 1) as f64 / 2.0;
    let norm = bessel_i0(beta);
    Ok((0..len)
        .map(|n| {
            let t = (n as f64 - half) / half;
            bessel_i0(beta * (1.0 - t * t).max(0.0).sqrt()) / norm
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirFilter {
    /// Coefficients for `k = -L..=L`, normalized to unit sum.
    pub taps: Vec<f64>,
    pub factor: usize,
    pub half_length: usize,
    pub beta: f64,
}

impl FirFilter {
    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Coefficient at offset `k` from the center.
    pub fn tap(&self, k: isize) -> f64 {
        self.taps[(k + self.half_length as isize) as usize]
    }

    /// The Kaiser window the taps were shaped with.
    pub fn window(&self) -> Vec<f64> {
        kaiser_window(self.taps.len(), self.beta).expect("validated at construction")
    }

    pub fn response(&self, num_points: usize) -> Result<Vec<(f64, f64)>> {
        frequency_response(&self.taps, num_points)
    }
}

/// `g(k) = sinc(k / D) I0(beta sqrt(1 - (k/L)^2)) / I0(beta)` for `|k| <= L`,
/// scaled to unit DC gain.
pub fn kaiser_sinc_taps(factor: usize, half_length: usize, beta: f64) -> Result<FirFilter> {
    if factor == 0 {
        return Err(Error::invalid("decimation factor must be >= 1"));
    }
    if half_length == 0 {
        return Err(Error::invalid("half-length must be >= 1"));
    }
    let window = kaiser_window(2 * half_length + 1, beta)?;
    let l = half_length as isize;
    let mut taps: Vec<f64> = (-l..=l)
        .zip(&window)
        .map(|(k, w)| sinc(k as f64 / factor as f64) * w)
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    // enforce exact mirror symmetry after the division
    for k in 0..half_length {
        taps[2 * half_length - k] = taps[k];
    }
    Ok(FirFilter {
        taps,
        factor,
        half_length,
        beta,
    })
}

/// Magnitude in dB of the DTFT of `taps` at `num_points` frequencies
/// spread uniformly over `[0, 1]` (1 = Nyquist).
pub fn frequency_response(taps: &[f64], num_points: usize) -> Result<Vec<(f64, f64)>> {
    if num_points < 64 {
        return Err(Error::invalid(format!(
            "need at least 64 points, got {num_points}"
        )));
    }
    let c = (taps.len() as f64 - 1.0) / 2.0;
    Ok((0..num_points)
        .map(|i| {
            let f = i as f64 / (num_points - 1) as f64;
            let w = PI * f;
            let (re, im) = taps
                .iter()
                .enumerate()
                .fold((0.0, 0.0), |(re, im), (n, g)| {
                    let a = w * (n as f64 - c);
                    (re + g * a.cos(), im - g * a.sin())
                });
            (f, 20.0 * re.hypot(im).max(1e-300).log10())
        })
        .collect())
}

/// Spectral summary of a window or filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralMetrics {
    /// Full width of the main lobe at -3 dB, normalized frequency.
    pub mainlobe_width: f64,
    /// Highest sidelobe relative to the main-lobe peak, dB (negative).
    pub sidelobe_attenuation_db: f64,
}

pub const METRIC_POINTS: usize = 1 << 16;

/// Main-lobe width and sidelobe level of `coeffs`, evaluated on a dense grid.
pub fn spectral_metrics(coeffs: &[f64]) -> Result<SpectralMetrics> {
    let resp = frequency_response(coeffs, METRIC_POINTS)?;
    let peak = resp[0].1;
    let rel: Vec<f64> = resp.iter().map(|&(_, db)| db - peak).collect();
    let cross = rel
        .iter()
        .position(|&v| v < -3.0)
        .ok_or_else(|| Error::invalid("response never falls 3 dB below its peak"))?;
    let (f0, f1) = (resp[cross - 1].0, resp[cross].0);
    let (v0, v1) = (rel[cross - 1], rel[cross]);
    let f3 = f0 + (f1 - f0) * (-3.0 - v0) / (v1 - v0);
    let null = (cross..rel.len() - 1)
        .find(|&i| rel[i] <= rel[i + 1])
        .ok_or_else(|| Error::invalid("main lobe extends to Nyquist"))?;
    let side = rel[null..]
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(SpectralMetrics {
        mainlobe_width: 2.0 * f3,
        sidelobe_attenuation_db: side,
    })
}

fn filter_line(src: &[f64], taps: &[f64], step: usize, out: &mut [f64]) {
    let l = (taps.len() / 2) as isize;
    let last = src.len() as isize - 1;
    for (j, o) in out.iter_mut().enumerate() {
        let c = (j * step) as isize;
        *o = taps
            .iter()
            .enumerate()
            .map(|(t, g)| g * src[(c + l - t as isize).clamp(0, last) as usize])
            .sum();
    }
}

/// Low-pass filters rows then columns with replicate borders and keeps
/// samples `0, D, 2D, ...` in each direction.
pub fn decimate_with(img: &GrayImage, filter: &FirFilter) -> Result<GrayImage> {
    let (w, h) = img.dims();
    let support = filter.len();
    if w < support || h < support {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min_side: support,
        });
    }
    let d = filter.factor;
    let (ow, oh) = (w.div_ceil(d), h.div_ceil(d));
    let mut horiz = vec![0.0; ow * h];
    horiz
        .par_chunks_mut(ow)
        .enumerate()
        .for_each(|(y, row)| filter_line(&img.pixels()[y * w..(y + 1) * w], &filter.taps, d, row));
    let mut out = vec![0.0; ow * oh];
    let cols: Vec<Vec<f64>> = (0..ow)
        .into_par_iter()
        .map(|x| {
            let col: Vec<f64> = (0..h).map(|y| horiz[y * ow + x]).collect();
            let mut dst = vec![0.0; oh];
            filter_line(&col, &filter.taps, d, &mut dst);
            dst
        })
        .collect();
    for (x, col) in cols.iter().enumerate() {
        for (y, v) in col.iter().enumerate() {
            out[y * ow + x] = *v;
        }
    }
    GrayImage::new(ow, oh, out)
}

/// Decimation by `factor` with the default filter (`L = 8`, `beta = 10`).
pub fn decimate(img: &GrayImage, factor: usize) -> Result<GrayImage> {
    decimate_with(
        img,
        &kaiser_sinc_taps(factor, DEFAULT_HALF_LENGTH, DEFAULT_BETA)?,
    )
}
