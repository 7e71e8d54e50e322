//! Per-pixel blur selection: candidate matching against the observed
//! intensity, then neighbourhood disambiguation.
//!
//! Each processed pixel keeps its full residual curve `|M(sigma_m) - obs|`.
//! A pixel whose match set covers the whole grid (every candidate within the
//! tie tolerance of the best) carries no blur information and is reported
//! invalid. For the remaining pixels the selected index minimizes the sum of
//! residual curves over the textured pixels of the surrounding window, which
//! is the total mismatch of the neighbourhood under a locally constant blur.
//! A 3x3 median over valid pixels then removes isolated outliers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{GrayImage, Mask};
use crate::kernel::{CandidateEngine, CandidateVector, Framework, SigmaGrid};

pub const DEFAULT_TIE_TOL: f64 = 1e-4;
pub const DEFAULT_WINDOW: usize = 5;

/// Grid indices whose residual is within the tie tolerance of the best one.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchCandidates {
    pub indices: Vec<usize>,
    pub residuals: Vec<f64>,
}

impl MatchCandidates {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Index with the smallest residual, the smallest index on ties.
    pub fn best(&self) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (&i, &r) in self.indices.iter().zip(&self.residuals) {
            if best.is_none_or(|(_, b)| r < b) {
                best = Some((i, r));
            }
        }
        best.map(|(i, _)| i)
    }
}

fn select_matches(residuals: &[f64], tie_tol: f64) -> MatchCandidates {
    let min = residuals.iter().copied().fold(f64::INFINITY, f64::min);
    let bound = min + tie_tol.max(0.0);
    let (indices, residuals) = residuals
        .iter()
        .enumerate()
        .filter(|(_, &r)| r <= bound)
        .map(|(i, &r)| (i, r))
        .unzip();
    MatchCandidates { indices, residuals }
}

pub fn match_sigma(candidates: &CandidateVector, observed: f64, tie_tol: f64) -> MatchCandidates {
    let residuals: Vec<f64> = candidates
        .values()
        .iter()
        .map(|c| (c - observed).abs())
        .collect();
    select_matches(&residuals, tie_tol)
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PixelState {
    /// Outside the estimation mask.
    Skipped,
    /// Every candidate matches equally well.
    Textureless,
    Textured,
}

/// Residual curves and match classification for every pixel of an image.
#[derive(Debug, Clone)]
pub struct CandidateField {
    width: usize,
    height: usize,
    sigma_grid: SigmaGrid,
    tie_tol: f64,
    states: Vec<PixelState>,
    residuals: Vec<f64>,
}

impl CandidateField {
    /// Evaluates candidates of the engine's image against `observed` at every
    /// pixel where `mask` is set (all pixels without a mask).
    pub fn compute(
        engine: &CandidateEngine<'_>,
        observed: &GrayImage,
        mask: Option<&Mask>,
        tie_tol: f64,
    ) -> Result<Self> {
        let (width, height) = observed.dims();
        if let Some(mask) = mask {
            mask.ensure_dims(width, height)?;
        }
        if !(tie_tol >= 0.0) {
            return Err(Error::invalid(format!(
                "tie tolerance must be >= 0, got {tie_tol}"
            )));
        }
        let m = engine.sigma_count();
        let mut states = vec![PixelState::Skipped; width * height];
        let mut residuals = vec![0.0; width * height * m];
        residuals
            .par_chunks_mut(width * m)
            .zip(states.par_chunks_mut(width))
            .enumerate()
            .for_each(|(y, (res_row, state_row))| {
                let mut scratch = vec![0.0; engine.scratch_len()];
                let mut cand = vec![0.0; m];
                for x in 0..width {
                    if mask.is_some_and(|k| !k.get(x, y)) {
                        continue;
                    }
                    engine.candidates_into(x, y, &mut scratch, &mut cand);
                    let obs = observed.get(x, y);
                    let curve = &mut res_row[x * m..(x + 1) * m];
                    for (r, c) in curve.iter_mut().zip(&cand) {
                        *r = (c - obs).abs();
                    }
                    state_row[x] = if select_matches(curve, tie_tol).len() == m {
                        PixelState::Textureless
                    } else {
                        PixelState::Textured
                    };
                }
            });
        Ok(Self {
            width,
            height,
            sigma_grid: engine.framework().sigma_grid().clone(),
            tie_tol,
            states,
            residuals,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn sigma_grid(&self) -> &SigmaGrid {
        &self.sigma_grid
    }

    pub fn state(&self, x: usize, y: usize) -> PixelState {
        self.states[y * self.width + x]
    }

    /// `|M(sigma_m) - observed|` for all `m`; zeros for skipped pixels.
    pub fn residual_curve(&self, x: usize, y: usize) -> &[f64] {
        let m = self.sigma_grid.len();
        let i = y * self.width + x;
        &self.residuals[i * m..(i + 1) * m]
    }

    pub fn matches(&self, x: usize, y: usize) -> Option<MatchCandidates> {
        match self.state(x, y) {
            PixelState::Skipped => None,
            _ => Some(select_matches(self.residual_curve(x, y), self.tie_tol)),
        }
    }

    /// Best index of each textured pixel taken on its own, before any
    /// neighbourhood step.
    pub fn per_pixel_indices(&self) -> Vec<Option<usize>> {
        (0..self.width * self.height)
            .map(|i| {
                let (x, y) = (i % self.width, i / self.width);
                (self.states[i] == PixelState::Textured).then(|| argmin(self.residual_curve(x, y)))
            })
            .collect()
    }
}

/// Per-pixel blur estimate on the candidate grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BlurMap {
    width: usize,
    height: usize,
    sigma: Vec<f64>,
    valid: Mask,
    floor: Mask,
    residual: Vec<f64>,
    sigma_range: (f64, f64),
}

impl BlurMap {
    /// Builds a map from per-pixel sigmas (`None` = invalid) and residuals.
    /// Valid sigmas must lie inside `sigma_range`; the floor flag is set
    /// where the sigma equals the lower end.
    pub fn from_parts(
        width: usize,
        height: usize,
        sigma: &[Option<f64>],
        residual: &[f64],
        sigma_range: (f64, f64),
    ) -> Result<Self> {
        if sigma.len() != width * height {
            return Err(Error::shape(width * height, sigma.len()));
        }
        if residual.len() != width * height {
            return Err(Error::shape(width * height, residual.len()));
        }
        let (lo, hi) = sigma_range;
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::invalid(format!("bad sigma range [{lo}, {hi}]")));
        }
        let mut out = Self {
            width,
            height,
            sigma: vec![f64::NAN; width * height],
            valid: Mask::filled(width, height, false),
            floor: Mask::filled(width, height, false),
            residual: vec![f64::NAN; width * height],
            sigma_range,
        };
        for (i, s) in sigma.iter().enumerate() {
            if let Some(s) = *s {
                if !(lo..=hi).contains(&s) {
                    return Err(Error::invalid(format!("sigma {s} outside [{lo}, {hi}]")));
                }
                if !(residual[i] >= 0.0) {
                    return Err(Error::invalid(format!("negative residual {}", residual[i])));
                }
                let (x, y) = (i % width, i / width);
                out.sigma[i] = s;
                out.residual[i] = residual[i];
                out.valid.set(x, y, true);
                out.floor.set(x, y, s == lo);
            }
        }
        Ok(out)
    }

    pub fn constant(
        width: usize,
        height: usize,
        sigma: f64,
        sigma_range: (f64, f64),
    ) -> Result<Self> {
        let n = width * height;
        Self::from_parts(
            width,
            height,
            &vec![Some(sigma); n],
            &vec![0.0; n],
            sigma_range,
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn sigma_range(&self) -> (f64, f64) {
        self.sigma_range
    }

    pub fn sigma_at(&self, x: usize, y: usize) -> Option<f64> {
        self.valid.get(x, y).then(|| self.sigma[y * self.width + x])
    }

    pub fn residual_at(&self, x: usize, y: usize) -> Option<f64> {
        self.valid
            .get(x, y)
            .then(|| self.residual[y * self.width + x])
    }

    /// Row-major sigmas, NaN where invalid.
    pub fn sigmas(&self) -> &[f64] {
        &self.sigma
    }

    /// Row-major residuals, NaN where invalid.
    pub fn residuals(&self) -> &[f64] {
        &self.residual
    }

    pub fn valid(&self) -> &Mask {
        &self.valid
    }

    /// Pixels pinned to the lowest grid value; their true blur may be smaller.
    pub fn floor(&self) -> &Mask {
        &self.floor
    }

    pub fn valid_fraction(&self) -> f64 {
        self.valid.count() as f64 / (self.width * self.height) as f64
    }

    pub(crate) fn optional_sigmas(&self) -> Vec<Option<f64>> {
        self.sigma
            .iter()
            .zip(self.valid.as_slice())
            .map(|(&s, &v)| v.then_some(s))
            .collect()
    }
}

fn median_lower(values: &mut [usize]) -> usize {
    values.sort_unstable();
    values[(values.len() - 1) / 2]
}

/// Resolves a candidate field into a blur map using neighbourhoods of
/// `window x window` pixels (odd, at least 3).
pub fn disambiguate(field: &CandidateField, window: usize) -> Result<BlurMap> {
    if window < 3 || window.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "window must be odd and >= 3, got {window}"
        )));
    }
    let (w, h) = field.dims();
    let m = field.sigma_grid.len();
    let half = (window / 2) as isize;
    let textured = |x: isize, y: isize| {
        x >= 0
            && y >= 0
            && (x as usize) < w
            && (y as usize) < h
            && field.state(x as usize, y as usize) == PixelState::Textured
    };

    let mut selected: Vec<Option<usize>> = vec![None; w * h];
    selected.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let mut acc = vec![0.0; m];
        for (x, out) in row.iter_mut().enumerate() {
            if field.state(x, y) != PixelState::Textured {
                continue;
            }
            acc.iter_mut().for_each(|a| *a = 0.0);
            for dy in -half..=half {
                for dx in -half..=half {
                    let (qx, qy) = (x as isize + dx, y as isize + dy);
                    if textured(qx, qy) {
                        let curve = field.residual_curve(qx as usize, qy as usize);
                        for (a, r) in acc.iter_mut().zip(curve) {
                            *a += r;
                        }
                    }
                }
            }
            *out = Some(argmin(&acc));
        }
    });

    let mut smoothed: Vec<Option<usize>> = vec![None; w * h];
    smoothed.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let mut window_vals = Vec::with_capacity(9);
        for (x, out) in row.iter_mut().enumerate() {
            if selected[y * w + x].is_none() {
                continue;
            }
            window_vals.clear();
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let (qx, qy) = (x as isize + dx, y as isize + dy);
                    if qx >= 0 && qy >= 0 && (qx as usize) < w && (qy as usize) < h {
                        if let Some(i) = selected[qy as usize * w + qx as usize] {
                            window_vals.push(i);
                        }
                    }
                }
            }
            *out = Some(median_lower(&mut window_vals));
        }
    });

    let sigmas = field.sigma_grid.sigmas();
    let mut sigma = vec![None; w * h];
    let mut residual = vec![0.0; w * h];
    for (i, idx) in smoothed.iter().enumerate() {
        if let Some(k) = *idx {
            sigma[i] = Some(sigmas[k]);
            residual[i] = field.residual_curve(i % w, i / w)[k];
        }
    }
    BlurMap::from_parts(
        w,
        h,
        &sigma,
        &residual,
        (field.sigma_grid.min(), field.sigma_grid.max()),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateParams {
    pub tie_tol: f64,
    pub window: usize,
}

impl Default for EstimateParams {
    fn default() -> Self {
        Self {
            tie_tol: DEFAULT_TIE_TOL,
            window: DEFAULT_WINDOW,
        }
    }
}

/// Estimates the relative blur taking the sharper image `left` to `right`.
pub fn estimate_blur_map(
    left: &GrayImage,
    right: &GrayImage,
    framework: &Framework,
    mask: Option<&Mask>,
    params: &EstimateParams,
) -> Result<BlurMap> {
    left.ensure_same_dims(right)?;
    let engine = framework.engine(left);
    let field = CandidateField::compute(&engine, right, mask, params.tie_tol)?;
    disambiguate(&field, params.window)
}
