//! Thin-lens relations between focus, depth and circle of confusion.
//!
//! Lengths are millimetres throughout; pixel pitches are micrometres and are
//! only used to convert a diameter to a count of pixels. The depth offset
//! `delta` is measured from the focal plane, positive away from the lens, and
//! the circle of confusion `C` carries the same sign.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distances beyond this are treated as infinite.
pub const DIVERGENCE_LIMIT_MM: f64 = 1e9;

/// Upper end of the preferred blur range, in pixel pitches.
pub const DECIMATION_UPPER: f64 = 5.0;
/// Lower end of the preferred blur range, in pixel pitches.
pub const DECIMATION_LOWER: f64 = 0.5;

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::invalid(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

fn finite_distance(what: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v.abs() <= DIVERGENCE_LIMIT_MM {
        Ok(v)
    } else {
        Err(Error::Divergence(format!("{what} = {v} mm")))
    }
}

/// Object distance in focus for a lens of focal length `f` with the sensor
/// at `d_i`: `f d_i / (d_i - f)`.
pub fn focus_distance(f: f64, d_i: f64) -> Result<f64> {
    positive("focal length", f)?;
    positive("image distance", d_i)?;
    if d_i <= f {
        return Err(Error::NoRealFocus {
            focal: f,
            image_dist: d_i,
        });
    }
    finite_distance("focus distance", f * d_i / (d_i - f))
}

/// Sensor distance that brings `d_f` into focus; the inverse of [`focus_distance`].
pub fn image_distance(f: f64, d_f: f64) -> Result<f64> {
    positive("focal length", f)?;
    positive("focus distance", d_f)?;
    if d_f <= f {
        return Err(Error::invalid(format!(
            "focus distance {d_f} mm must exceed the focal length {f} mm"
        )));
    }
    finite_distance("image distance", f * d_f / (d_f - f))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraSettings {
    pub aperture_mm: f64,
    pub focal_mm: f64,
    pub f_number: f64,
    pub image_dist_mm: f64,
    pub focus_dist_mm: f64,
    pub pixel_pitch_um: f64,
}

impl CameraSettings {
    /// Settings focused at `focus_dist_mm`; aperture and sensor distance are derived.
    pub fn new(
        focal_mm: f64,
        f_number: f64,
        focus_dist_mm: f64,
        pixel_pitch_um: f64,
    ) -> Result<Self> {
        positive("focal length", focal_mm)?;
        positive("f-number", f_number)?;
        positive("pixel pitch", pixel_pitch_um)?;
        let image_dist_mm = image_distance(focal_mm, focus_dist_mm)?;
        Ok(Self {
            aperture_mm: focal_mm / f_number,
            focal_mm,
            f_number,
            image_dist_mm,
            focus_dist_mm,
            pixel_pitch_um,
        })
    }

    /// Checks the internal consistency of hand-built settings.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("aperture", self.aperture_mm),
            ("focal length", self.focal_mm),
            ("f-number", self.f_number),
            ("image distance", self.image_dist_mm),
            ("focus distance", self.focus_dist_mm),
            ("pixel pitch", self.pixel_pitch_um),
        ] {
            positive(name, v)?;
        }
        let rel = |a: f64, b: f64| (a - b).abs() / b.abs();
        if rel(self.focal_mm / self.aperture_mm, self.f_number) > 1e-9 {
            return Err(Error::invalid(
                "f-number differs from focal length / aperture",
            ));
        }
        if self.focus_dist_mm <= self.focal_mm {
            return Err(Error::invalid(
                "focus distance must exceed the focal length",
            ));
        }
        if rel(
            focus_distance(self.focal_mm, self.image_dist_mm)?,
            self.focus_dist_mm,
        ) > 1e-9
        {
            return Err(Error::invalid(
                "image and focus distances violate the lens law",
            ));
        }
        Ok(())
    }

    /// `C_o = A f / (d_f - f)`, the limit of the circle of confusion for
    /// objects receding to infinity.
    pub fn coc_at_infinity(&self) -> f64 {
        self.aperture_mm * self.focal_mm / (self.focus_dist_mm - self.focal_mm)
    }

    pub fn mm_to_pitches(&self, mm: f64) -> f64 {
        mm_to_pitches(mm, self.pixel_pitch_um)
    }
}

pub fn mm_to_pitches(mm: f64, pixel_pitch_um: f64) -> f64 {
    mm * 1000.0 / pixel_pitch_um
}

/// Signed circle of confusion `C_o delta / (d_f + delta)` of an object at
/// `d_f + delta`.
pub fn coc_diameter(s: &CameraSettings, delta_mm: f64) -> Result<f64> {
    let d = s.focus_dist_mm + delta_mm;
    if !(d > 0.0) {
        return Err(Error::BehindLens(d));
    }
    Ok(s.coc_at_infinity() * delta_mm / d)
}

/// Depth offset `C d_f / (C_o - C)` that produces the circle of confusion `c`.
pub fn depth_from_coc(c_mm: f64, s: &CameraSettings) -> Result<f64> {
    let c_o = s.coc_at_infinity();
    let denom = c_o - c_mm;
    if denom == 0.0 {
        return Err(Error::Singular(format!(
            "circle of confusion {c_mm} mm equals C_o: the object is at infinity"
        )));
    }
    finite_distance("depth offset", c_mm * s.focus_dist_mm / denom)
}

/// Largest `|C|` over relative depths `|delta / d_f| < eta`, reached at the
/// near end: `eta / (1 - eta) C_o`.
pub fn c_max_bounded(s: &CameraSettings, eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::invalid(format!("eta must lie in (0, 1), got {eta}")));
    }
    Ok(eta / (1.0 - eta) * s.coc_at_infinity())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distance {
    Finite(f64),
    Infinity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CMax {
    pub exact_mm: f64,
    /// `f^2 / (f_n d_F)`
    pub approx_mm: f64,
}

fn check_scene(d_front: f64, d_back: Distance, f: f64, f_number: f64) -> Result<Option<f64>> {
    positive("focal length", f)?;
    positive("f-number", f_number)?;
    positive("foreground distance", d_front)?;
    if d_front <= f {
        return Err(Error::invalid(format!(
            "foreground distance {d_front} mm must exceed the focal length {f} mm"
        )));
    }
    match d_back {
        Distance::Infinity => Ok(None),
        Distance::Finite(b) if b.is_finite() && b >= d_front => Ok(Some(b)),
        Distance::Finite(b) => Err(Error::invalid(format!(
            "background distance {b} mm must not be nearer than the foreground {d_front} mm"
        ))),
    }
}

/// Largest blur in a scene spanning `[d_F, d_B]` with focus on the foreground.
pub fn c_max_foreground(d_front: f64, d_back: Distance, f: f64, f_number: f64) -> Result<CMax> {
    let back = check_scene(d_front, d_back, f, f_number)?;
    let a = f / f_number;
    let spread = back.map_or(1.0, |b| (b - d_front) / b);
    Ok(CMax {
        exact_mm: spread * a * f / (d_front - f),
        approx_mm: f * f / (f_number * d_front),
    })
}

/// Largest blur in the same scene with focus on the background.
pub fn c_max_background(d_front: f64, d_back: Distance, f: f64, f_number: f64) -> Result<CMax> {
    let back = check_scene(d_front, d_back, f, f_number)?;
    let a = f / f_number;
    let exact_mm = match back {
        Some(b) => (b - d_front) / d_front * a * f / (b - f),
        None => a * f / d_front,
    };
    Ok(CMax {
        exact_mm,
        approx_mm: f * f / (f_number * d_front),
    })
}

/// Blur target `C_m = (1 - eta) / eta C_max`.
pub fn c_m_from_c_max(c_max_mm: f64, eta: f64) -> Result<f64> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::invalid(format!("eta must lie in (0, 1), got {eta}")));
    }
    Ok((1.0 - eta) / eta * c_max_mm)
}

/// Positive root of `f^2 + C_m f_n f - C_m f_n d_f = 0`.
pub fn solve_focal_length(c_m: f64, f_number: f64, d_f: f64) -> Result<f64> {
    positive("C_m", c_m)?;
    positive("f-number", f_number)?;
    positive("focus distance", d_f)?;
    let b = c_m * f_number;
    // product form of (b/2)(sqrt(1 + 4 d/b) - 1), free of cancellation
    Ok(2.0 * b * d_f / (b + (b * b + 4.0 * b * d_f).sqrt()))
}

/// `|f^2 + b f - b d_f| / (b d_f)` with `b = C_m f_n`.
pub fn focal_quadratic_residual(f: f64, c_m: f64, f_number: f64, d_f: f64) -> f64 {
    let b = c_m * f_number;
    (f * f + b * f - b * d_f).abs() / (b * d_f)
}

/// Smallest integer factor bringing `c_max_pitches` below five pitches.
pub fn recommend_decimation(c_max_pitches: f64) -> Result<usize> {
    positive("C_max", c_max_pitches)?;
    Ok((c_max_pitches / DECIMATION_UPPER).floor() as usize + 1)
}

/// Smallest power of two bringing `c_max_pitches` below five pitches.
pub fn recommend_decimation_pow2(c_max_pitches: f64) -> Result<usize> {
    positive("C_max", c_max_pitches)?;
    let mut d = 1usize;
    while c_max_pitches / d as f64 >= DECIMATION_UPPER {
        d *= 2;
    }
    Ok(d)
}

/// Warning text when decimating by `factor` leaves less than half a pitch of blur.
pub fn decimation_warning(c_max_pitches: f64, factor: usize) -> Option<String> {
    let scaled = c_max_pitches / factor as f64;
    (scaled < DECIMATION_LOWER).then(|| {
        format!("blur of {scaled:.3} pitches after decimation is below {DECIMATION_LOWER}")
    })
}
