//! Local sharpness, labelling of focus pairs, and the cross-estimation
//! errors of a generalized image pair.
//!
//! For the pixels where `I_B` is sharper, `I_B` plays the sharp image and
//! `I_F` the blurred one: the blur is estimated on that subset, `I_F` is
//! reconstructed from `I_B`, and `e_F` is the mean absolute error of that
//! reconstruction over the subset. The pixels where `I_F` is sharper give
//! `e_B` the same way. Pixels of equal sharpness enter neither error.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{estimate_blur_map, BlurMap, EstimateParams};
use crate::image::{GrayImage, Mask};
use crate::kernel::Framework;
use crate::reconstruct::{image_mae, spatially_varying_convolve};

pub const DEFAULT_EQ_TOL: f64 = 1e-6;

/// Per-pixel standard deviation of the 3x3 neighbourhood.
#[derive(Debug, Clone, PartialEq)]
pub struct SharpnessMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl SharpnessMap {
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Population standard deviation over each replicate-padded 3x3 window.
pub fn local_sharpness(img: &GrayImage) -> Result<SharpnessMap> {
    let (w, h) = img.dims();
    if w < 3 || h < 3 {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min_side: 3,
        });
    }
    let p = img.padded(1);
    let mut values = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let mut win = [0.0; 9];
            let mut k = 0;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    win[k] = p.at(x, y, dx, dy);
                    k += 1;
                }
            }
            // shifted by the center value so flat windows give exactly zero
            let c = win[4];
            let mean = win.iter().map(|v| v - c).sum::<f64>() / 9.0;
            let var = win.iter().map(|v| (v - c - mean).powi(2)).sum::<f64>() / 9.0;
            values.push(var.sqrt());
        }
    }
    Ok(SharpnessMap {
        width: w,
        height: h,
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SharpnessLabel {
    BSharper,
    FSharper,
    Equal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SharpnessPartition {
    width: usize,
    height: usize,
    labels: Vec<SharpnessLabel>,
}

impl SharpnessPartition {
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn label(&self, x: usize, y: usize) -> SharpnessLabel {
        self.labels[y * self.width + x]
    }

    pub fn labels(&self) -> &[SharpnessLabel] {
        &self.labels
    }

    pub fn mask(&self, label: SharpnessLabel) -> Mask {
        Mask::new(
            self.width,
            self.height,
            self.labels.iter().map(|&l| l == label).collect(),
        )
        .expect("label buffer matches dimensions")
    }

    pub fn count(&self, label: SharpnessLabel) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    fn percent(&self, label: SharpnessLabel) -> f64 {
        100.0 * self.count(label) as f64 / self.labels.len() as f64
    }
}

/// Labels each pixel by which image is locally sharper, with a dead band of
/// `eq_tol` on the sharpness difference.
pub fn partition_pair(ib: &GrayImage, i_f: &GrayImage, eq_tol: f64) -> Result<SharpnessPartition> {
    ib.ensure_same_dims(i_f)?;
    if !(eq_tol >= 0.0) {
        return Err(Error::invalid(format!(
            "equality tolerance must be >= 0, got {eq_tol}"
        )));
    }
    let sb = local_sharpness(ib)?;
    let sf = local_sharpness(i_f)?;
    let labels = sb
        .values
        .iter()
        .zip(&sf.values)
        .map(|(b, f)| {
            let d = b - f;
            if d > eq_tol {
                SharpnessLabel::BSharper
            } else if d < -eq_tol {
                SharpnessLabel::FSharper
            } else {
                SharpnessLabel::Equal
            }
        })
        .collect();
    Ok(SharpnessPartition {
        width: ib.width(),
        height: ib.height(),
        labels,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairParams {
    pub eq_tol: f64,
    pub estimate: EstimateParams,
}

impl Default for PairParams {
    fn default() -> Self {
        Self {
            eq_tol: DEFAULT_EQ_TOL,
            estimate: EstimateParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEvaluation {
    /// Error reconstructing `I_B` on the pixels where `I_F` is sharper; `None` if there are none.
    pub e_b: Option<f64>,
    /// Error reconstructing `I_F` on the pixels where `I_B` is sharper; `None` if there are none.
    pub e_f: Option<f64>,
    pub pct_b_sharper: f64,
    pub pct_f_sharper: f64,
    pub pct_equal: f64,
    pub resolution: (usize, usize),
    pub count_b_sharper: usize,
    pub count_f_sharper: usize,
    pub count_equal: usize,
}

impl PairEvaluation {
    /// Pixels that entered `e_B` or `e_F`.
    pub fn contributing_pixels(&self) -> usize {
        self.count_b_sharper + self.count_f_sharper
    }
}

/// Intermediate results of a pair evaluation, for export.
#[derive(Debug, Clone)]
pub struct PairArtifacts {
    pub partition: SharpnessPartition,
    /// Blur taking `I_B` to `I_F`, estimated where `I_B` is sharper.
    pub blur_b_to_f: Option<BlurMap>,
    /// Blur taking `I_F` to `I_B`, estimated where `I_F` is sharper.
    pub blur_f_to_b: Option<BlurMap>,
    pub f_hat: Option<GrayImage>,
    pub b_hat: Option<GrayImage>,
}

fn cross_estimate(
    sharp: &GrayImage,
    blurred: &GrayImage,
    mask: &Mask,
    framework: &Framework,
    params: &EstimateParams,
) -> Result<Option<(BlurMap, GrayImage, f64)>> {
    if mask.count() == 0 {
        return Ok(None);
    }
    let map = estimate_blur_map(sharp, blurred, framework, Some(mask), params)?;
    let hat = spatially_varying_convolve(sharp, &map)?;
    let err = image_mae(blurred, &hat, Some(mask))?;
    Ok(Some((map, hat, err)))
}

pub fn evaluate_pair(
    ib: &GrayImage,
    i_f: &GrayImage,
    framework: &Framework,
    params: &PairParams,
) -> Result<PairEvaluation> {
    evaluate_pair_with_artifacts(ib, i_f, framework, params).map(|(e, _)| e)
}

pub fn evaluate_pair_with_artifacts(
    ib: &GrayImage,
    i_f: &GrayImage,
    framework: &Framework,
    params: &PairParams,
) -> Result<(PairEvaluation, PairArtifacts)> {
    let partition = partition_pair(ib, i_f, params.eq_tol)?;
    let b_mask = partition.mask(SharpnessLabel::BSharper);
    let f_mask = partition.mask(SharpnessLabel::FSharper);
    let (fwd, bwd) = rayon::join(
        || cross_estimate(ib, i_f, &b_mask, framework, &params.estimate),
        || cross_estimate(i_f, ib, &f_mask, framework, &params.estimate),
    );
    let (fwd, bwd) = (fwd?, bwd?);
    let eval = PairEvaluation {
        e_f: fwd.as_ref().map(|r| r.2),
        e_b: bwd.as_ref().map(|r| r.2),
        pct_b_sharper: partition.percent(SharpnessLabel::BSharper),
        pct_f_sharper: partition.percent(SharpnessLabel::FSharper),
        pct_equal: partition.percent(SharpnessLabel::Equal),
        resolution: partition.dims(),
        count_b_sharper: b_mask.count(),
        count_f_sharper: f_mask.count(),
        count_equal: partition.count(SharpnessLabel::Equal),
    };
    let (blur_b_to_f, f_hat) = fwd.map(|(m, h, _)| (m, h)).unzip();
    let (blur_f_to_b, b_hat) = bwd.map(|(m, h, _)| (m, h)).unzip();
    Ok((
        eval,
        PairArtifacts {
            partition,
            blur_b_to_f,
            blur_f_to_b,
            f_hat,
            b_hat,
        },
    ))
}

/// Display image: the sharper input at each pixel, their mean where equal.
pub fn fusion_image(
    ib: &GrayImage,
    i_f: &GrayImage,
    partition: &SharpnessPartition,
) -> Result<GrayImage> {
    ib.ensure_same_dims(i_f)?;
    if partition.dims() != ib.dims() {
        return Err(Error::shape(
            format!("{}x{}", ib.width(), ib.height()),
            format!("{}x{}", partition.width, partition.height),
        ));
    }
    Ok(GrayImage::from_fn(
        ib.width(),
        ib.height(),
        |x, y| match partition.label(x, y) {
            SharpnessLabel::BSharper => ib.get(x, y),
            SharpnessLabel::FSharper => i_f.get(x, y),
            SharpnessLabel::Equal => 0.5 * (ib.get(x, y) + i_f.get(x, y)),
        },
    ))
}

/// One line of the results table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub dataset_id: String,
    pub evaluation: PairEvaluation,
}

pub const TABLE_HEADER: [&str; 6] = [
    "dataset_id",
    "resolution",
    "pct_b_sharper",
    "pct_f_sharper",
    "e_b",
    "e_f",
];

/// Writes the header and one row per evaluation; missing errors are `NA`.
pub fn write_table<W: Write>(out: W, rows: &[TableRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TABLE_HEADER)?;
    let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |e| format!("{e:.6}"));
    for row in rows {
        let e = &row.evaluation;
        w.write_record([
            row.dataset_id.clone(),
            format!("{}x{}", e.resolution.0, e.resolution.1),
            format!("{:.2}", e.pct_b_sharper),
            format!("{:.2}", e.pct_f_sharper),
            opt(e.e_b),
            opt(e.e_f),
        ])?;
    }
    w.flush()?;
    Ok(())
}
